"""Model parameterizations and exact density computations.

Two hidden-unit families share one parameter container: leaky rectified
linear hidden units with Gaussian visibles, and the classic
Bernoulli-Gaussian variant.  All functions here are pure and accept either
a single visible vector of shape (I,) or a batch of shape (n, I).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonPDRegionError

# Smallest eigenvalue above which a precision matrix counts as positive
# definite.
PD_TOL = 1e-10


class HiddenKind(enum.Enum):
    LEAKY_RELU = "leaky_relu"
    BERNOULLI = "bernoulli"


def _readonly(x, dtype=np.float64) -> np.ndarray:
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RbmParams:
    """Full model specification: weights, biases and leakiness.

    weights has shape (I, J); column j is hidden unit j's weight vector.
    visible_bias defaults to zero and is carried for completeness.
    leakiness is the negative-side slope in (0, 1]; it is ignored for
    Bernoulli hidden units.
    """

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    leakiness: float = 1.0
    hidden_kind: HiddenKind = HiddenKind.LEAKY_RELU

    def __post_init__(self):
        W = _readonly(self.weights)
        if W.ndim != 2:
            raise DimensionError("weights must be a 2-D matrix")
        a = _readonly(self.visible_bias)
        b = _readonly(self.hidden_bias)
        if a.shape != (W.shape[0],):
            raise DimensionError(
                f"visible_bias has shape {a.shape}, expected ({W.shape[0]},)"
            )
        if b.shape != (W.shape[1],):
            raise DimensionError(
                f"hidden_bias has shape {b.shape}, expected ({W.shape[1]},)"
            )
        if not (np.isfinite(W).all() and np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("parameters must be finite")
        c = float(self.leakiness)
        if self.hidden_kind is HiddenKind.LEAKY_RELU and not (0.0 < c <= 1.0):
            raise ValueError(f"leakiness must be in (0, 1], got {c}")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "visible_bias", a)
        object.__setattr__(self, "hidden_bias", b)
        object.__setattr__(self, "leakiness", c)

    @classmethod
    def create(
        cls,
        weights,
        hidden_bias=None,
        visible_bias=None,
        leakiness: float = 1.0,
        hidden_kind: HiddenKind = HiddenKind.LEAKY_RELU,
    ) -> "RbmParams":
        W = np.asarray(weights, dtype=np.float64)
        if W.ndim != 2:
            raise DimensionError("weights must be a 2-D matrix")
        n_vis, n_hid = W.shape
        a = np.zeros(n_vis) if visible_bias is None else visible_bias
        b = np.zeros(n_hid) if hidden_bias is None else hidden_bias
        return cls(W, a, b, leakiness, hidden_kind)

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]

    def with_(self, **changes) -> "RbmParams":
        """Copy with some fields replaced."""
        fields = {
            "weights": self.weights,
            "visible_bias": self.visible_bias,
            "hidden_bias": self.hidden_bias,
            "leakiness": self.leakiness,
            "hidden_kind": self.hidden_kind,
        }
        fields.update(changes)
        return RbmParams(**fields)

    def max_singular_value(self) -> float:
        return float(np.linalg.svd(self.weights, compute_uv=False)[0])

    def is_safe(self, tol: float = PD_TOL) -> bool:
        """Whether I - W W^T is positive (semi-)definite within tolerance."""
        eigs = 1.0 - np.linalg.svd(self.weights, compute_uv=False) ** 2
        return bool(eigs.min(initial=1.0) > -tol)


@dataclass(frozen=True)
class ActivationPattern:
    """Per-hidden-unit branch coefficients, each entry c or 1."""

    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _readonly(self.alpha))


@dataclass(frozen=True)
class RegionGaussian:
    """Precision/mean of the Gaussian attached to one activation region."""

    precision: np.ndarray
    mean: np.ndarray
    min_eigenvalue: float
    is_pd: bool


def _check_visible(params: RbmParams, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != params.n_visible:
        raise DimensionError(
            f"visible vector has dimension {v.shape[-1]}, "
            f"model expects {params.n_visible}"
        )
    return v


def response(params: RbmParams, v) -> np.ndarray:
    """Hidden-unit responses W^T v + b.

    Accepts shape (I,) or (n, I); returns (J,) or (n, J).
    """
    v = _check_visible(params, v)
    return v @ params.weights + params.hidden_bias


def hidden_conditional(params: RbmParams, v):
    """Mean and variance of each leaky hidden unit given v.

    Positive responses get N(eta, 1); non-positive get N(c*eta, c).  The
    boundary eta == 0 takes the leaky branch.
    """
    if params.hidden_kind is not HiddenKind.LEAKY_RELU:
        raise ValueError("hidden_conditional requires leaky hidden units")
    eta = response(params, v)
    c = params.leakiness
    positive = eta > 0
    mean = np.where(positive, eta, c * eta)
    var = np.where(positive, 1.0, c)
    return mean, var


def bernoulli_hidden_conditional(params: RbmParams, v) -> np.ndarray:
    """p(h_j = 1 | v) for Bernoulli hidden units: sigmoid of the response."""
    if params.hidden_kind is not HiddenKind.BERNOULLI:
        raise ValueError("bernoulli_hidden_conditional requires Bernoulli units")
    eta = response(params, v)
    # overflow-safe sigmoid
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def visible_conditional(params: RbmParams, h) -> np.ndarray:
    """Mean of v given h (unit variance per component): a + W h."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.n_hidden:
        raise DimensionError(
            f"hidden vector has dimension {h.shape[-1]}, "
            f"model expects {params.n_hidden}"
        )
    return h @ params.weights.T + params.visible_bias


def activation_pattern(params: RbmParams, v) -> ActivationPattern:
    """Branch coefficients alpha_j = 1 if eta_j > 0 else c, for a single v."""
    if params.hidden_kind is not HiddenKind.LEAKY_RELU:
        raise ValueError("activation patterns only apply to leaky hidden units")
    eta = response(params, v)
    alpha = np.where(eta > 0, 1.0, params.leakiness)
    return ActivationPattern(alpha)


def region_precision_mean(
    params: RbmParams, pattern: ActivationPattern, tol: float = PD_TOL
) -> RegionGaussian:
    """Precision matrix and mean of the Gaussian on one region.

    Omega = I - sum_j alpha_j W_j W_j^T; the mean solves
    Omega mu = a + W (alpha * b).  Raises NonPDRegionError when the solve
    fails because Omega is numerically singular.
    """
    alpha = np.asarray(pattern.alpha, dtype=np.float64)
    if alpha.shape != (params.n_hidden,):
        raise DimensionError("activation pattern length does not match model")
    W = params.weights
    omega = np.eye(params.n_visible) - (W * alpha) @ W.T
    min_eig = float(np.linalg.eigvalsh(omega)[0])
    is_pd = min_eig > tol
    rhs = params.visible_bias + W @ (alpha * params.hidden_bias)
    try:
        mean = np.linalg.solve(omega, rhs)
    except np.linalg.LinAlgError:
        raise NonPDRegionError(min_eig) from None
    return RegionGaussian(omega, mean, min_eig, is_pd)


def log_unnorm_marginal(params: RbmParams, v, leakiness: float | None = None):
    """Log of the unnormalized marginal density of v for leaky hidden units.

    Equals -||v - a||^2/2 + sum_j f(eta_j) with f(eta) = eta^2/2 on the
    positive branch and c*eta^2/2 otherwise; this is the exact result of
    integrating the hidden units out of the joint.  An explicit
    ``leakiness`` overrides the model's c (used by annealing paths).
    """
    if params.hidden_kind is not HiddenKind.LEAKY_RELU:
        raise ValueError("log_unnorm_marginal requires leaky hidden units")
    c = params.leakiness if leakiness is None else float(leakiness)
    v = _check_visible(params, v)
    eta = v @ params.weights + params.hidden_bias
    coeff = np.where(eta > 0, 1.0, c)
    quad = 0.5 * np.sum((v - params.visible_bias) ** 2, axis=-1)
    return -quad + 0.5 * np.sum(coeff * eta**2, axis=-1)


def bernoulli_log_unnorm_marginal(params: RbmParams, v):
    """Log unnormalized marginal for Bernoulli hidden units.

    Summing the joint over h in {0,1}^J gives
    -||v - a||^2/2 + sum_j softplus(eta_j).
    """
    if params.hidden_kind is not HiddenKind.BERNOULLI:
        raise ValueError("bernoulli_log_unnorm_marginal requires Bernoulli units")
    v = _check_visible(params, v)
    eta = v @ params.weights + params.hidden_bias
    softplus = np.logaddexp(0.0, eta)
    quad = 0.5 * np.sum((v - params.visible_bias) ** 2, axis=-1)
    return -quad + np.sum(softplus, axis=-1)
