import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leaky_rbm import LeakyRbmError, is_globally_safe, project_spectral
from leaky_rbm.sampler import make_rng


class TestProjectSpectral:
    def test_feasible_matrix_unchanged(self):
        U, _ = np.linalg.qr(np.array([[1.0, 0.2], [0.1, 1.0]]))
        W = (U * np.array([0.9, 0.3])) @ np.eye(2)
        W_proj, report = project_spectral(W)
        np.testing.assert_array_equal(W_proj, W)
        assert report.clipped_count == 0

    def test_rank_one_clip(self, rng):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(2)
        v /= np.linalg.norm(v)
        W = 2.0 * np.outer(u, v)
        W_proj, report = project_spectral(W)
        np.testing.assert_allclose(W_proj, np.outer(u, v), rtol=1e-10, atol=1e-12)
        assert report.clipped_count == 1
        np.testing.assert_allclose(report.max_singular_value_before, 2.0, rtol=1e-12)
        np.testing.assert_allclose(report.max_singular_value_after, 1.0, rtol=1e-12)

    def test_non_finite_rejected(self):
        W = np.full((2, 2), np.inf)
        with pytest.raises(LeakyRbmError):
            project_spectral(W)

    def test_projection_beats_feasible_grid(self):
        # Frobenius-optimality on 2x2 matrices against a dense grid of
        # feasible competitors built from random feasible samples.
        rng = make_rng(77)
        grid = []
        while len(grid) < 4000:
            cand = rng.uniform(-1.5, 1.5, size=(2, 2))
            s = np.linalg.svd(cand, compute_uv=False)
            if s[0] <= 1.0:
                grid.append(cand)
        grid = np.array(grid)
        for _ in range(25):
            W = rng.uniform(-2.0, 2.0, size=(2, 2))
            if np.linalg.svd(W, compute_uv=False)[0] <= 1.0:
                continue
            W_proj, _ = project_spectral(W)
            d_proj = np.linalg.norm(W - W_proj)
            d_grid = np.linalg.norm(grid - W, axis=(1, 2)).min()
            assert d_proj <= d_grid + 1e-6


class TestIsGloballySafe:
    def test_zero_weights(self):
        safe, eig = is_globally_safe(np.zeros((3, 2)))
        assert safe and eig == 1.0

    def test_large_singular_value_unsafe(self):
        W = np.diag([1.5, 0.2])
        safe, eig = is_globally_safe(W)
        assert not safe
        np.testing.assert_allclose(eig, 1.0 - 1.5**2, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_property_projection_always_safe(seed):
    rng = make_rng(seed)
    shape = (int(rng.integers(1, 6)), int(rng.integers(1, 6)))
    W = rng.standard_normal(shape) * rng.uniform(0.1, 3.0)
    W_proj, report = project_spectral(W)
    safe, _ = is_globally_safe(W_proj)
    assert safe
    assert report.max_singular_value_after <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_property_projection_idempotent(seed):
    rng = make_rng(seed)
    W = rng.standard_normal((3, 3)) * rng.uniform(0.1, 3.0)
    once, _ = project_spectral(W)
    twice, _ = project_spectral(once)
    np.testing.assert_allclose(twice, once, atol=1e-12)
