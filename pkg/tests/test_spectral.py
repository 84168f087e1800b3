import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rscn.model import BLOCK_LOWER_TRIANGULAR, GENERAL, ReservoirModel, run_reservoir
from rscn.spectral import (
    EIGEN,
    MODE_CONTRACTION,
    MODE_SPECTRAL,
    SIGMA_MAX,
    esp_check,
    max_singular_value,
    scale_feedback,
    spectral_radius,
)

GOLDEN = 1.618033988749895  # larger root of x^2 = x + 1


def small_matrices(n=4):
    return arrays(
        float, (n, n),
        elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False),
    )


class TestMaxSingularValue:
    def test_identity(self):
        assert max_singular_value(np.eye(3)) == pytest.approx(1.0, rel=1e-9)

    def test_diagonal(self):
        assert max_singular_value(np.diag([0.5, -0.8])) == pytest.approx(0.8, rel=1e-9)

    def test_shear_matches_quadratic_formula(self):
        # eigenvalues of W^T W = [[1,1],[1,2]] are (3 +- sqrt(5)) / 2
        w = np.array([[1.0, 1.0], [0.0, 1.0]])
        assert max_singular_value(w) == pytest.approx(GOLDEN, rel=1e-9)

    def test_zero_matrix(self):
        assert max_singular_value(np.zeros((4, 4))) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(small_matrices(), st.floats(-100, 100, allow_nan=False))
    def test_absolute_homogeneity(self, w, c):
        base = max_singular_value(w)
        assert max_singular_value(c * w) == pytest.approx(
            abs(c) * base, rel=1e-9, abs=1e-12
        )

    @settings(max_examples=60, deadline=None)
    @given(small_matrices(5))
    def test_matches_svd_oracle(self, w):
        want = np.linalg.svd(w, compute_uv=False)[0]
        assert max_singular_value(w) == pytest.approx(want, rel=1e-9, abs=1e-12)


class TestSpectralRadius:
    def test_triangular_growth_rows_with_zero_initial_block(self):
        w = np.zeros((3, 3))
        w[1, 1] = 0.5
        w[2, 2] = -0.8
        w[1, 0] = 2.0
        w[2, 0] = -3.0
        got = spectral_radius(w, BLOCK_LOWER_TRIANGULAR, initial_block_size=1)
        assert got == pytest.approx(0.8, abs=1e-12)

    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((3, 3))) == 0.0

    def test_rotation_pair_magnitude(self):
        # characteristic polynomial x^2 + 0.81 has roots +-0.9i
        w = np.array([[0.0, -0.9], [0.9, 0.0]])
        assert spectral_radius(w, estimator=EIGEN) == pytest.approx(0.9, rel=1e-9)

    def test_sigma_estimator_upper_bounds_eigen(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            w = rng.normal(size=(5, 5))
            rho = spectral_radius(w, estimator=EIGEN)
            assert rho <= max_singular_value(w) + 1e-9

    @settings(max_examples=60, deadline=None)
    @given(small_matrices(5))
    def test_eigen_estimator_matches_numpy_oracle(self, w):
        want = np.max(np.abs(np.linalg.eigvals(w))) if w.size else 0.0
        got = spectral_radius(w, estimator=EIGEN)
        assert got == pytest.approx(want, rel=1e-7, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(small_matrices(4))
    def test_radius_never_exceeds_singular_bound(self, w):
        got = spectral_radius(w, estimator=EIGEN)
        assert got <= max_singular_value(w) + 1e-9

    def test_block_structure_matches_dense_eigen(self):
        rng = np.random.default_rng(8)
        n0, n = 3, 6
        w = np.zeros((n, n))
        w[:n0, :n0] = rng.normal(size=(n0, n0))
        for i in range(n0, n):
            w[i, : i + 1] = rng.normal(size=i + 1)
        got = spectral_radius(w, BLOCK_LOWER_TRIANGULAR, n0, estimator=EIGEN)
        want = np.max(np.abs(np.linalg.eigvals(w)))
        assert got == pytest.approx(want, rel=1e-9)


def tiny_model(w_r, structure_tag=GENERAL, n0=0):
    w_r = np.asarray(w_r, dtype=float)
    n = w_r.shape[0]
    return ReservoirModel(
        input_weights=np.ones((n, 1)),
        feedback=w_r,
        biases=np.zeros(n),
        readout=np.zeros((1, n + 1)),
        structure_tag=structure_tag,
        initial_block_size=n0,
    )


class TestScaleFeedback:
    def test_contraction_sets_sigma_to_alpha(self):
        w = np.array([[2.0, 0.0], [0.0, 1.0]])  # sigma_max = 2
        report = scale_feedback(tiny_model(w), 0.5, MODE_CONTRACTION)
        assert max_singular_value(report.model.feedback) == pytest.approx(0.5, rel=1e-9)
        assert report.certified

    def test_spectral_sets_rho_to_alpha(self):
        rng = np.random.default_rng(4)
        w = rng.normal(size=(4, 4))
        report = scale_feedback(tiny_model(w), 0.4, MODE_SPECTRAL)
        got = spectral_radius(report.model.feedback, estimator=EIGEN)
        assert got == pytest.approx(0.4, rel=1e-7)

    def test_spectral_certification_on_normal_matrix(self):
        # diagonal matrix: rho == sigma_max, so any alpha < 1 certifies
        report = scale_feedback(tiny_model(np.diag([0.5, -0.8])), 0.79, MODE_SPECTRAL)
        assert report.certified
        assert report.rho == pytest.approx(0.8, abs=1e-12)

    def test_zero_matrix_is_noop_with_warning(self):
        m = tiny_model(np.zeros((2, 2)))
        with pytest.warns(UserWarning):
            report = scale_feedback(m, 0.5, MODE_CONTRACTION)
        assert np.array_equal(report.model.feedback, m.feedback)


class TestEspContraction:
    def test_state_gap_collapses_for_contractive_feedback(self):
        rng = np.random.default_rng(6)
        n = 10
        w = rng.normal(size=(n, n))
        model = tiny_model(w)
        model = scale_feedback(model, 0.9, MODE_CONTRACTION).model
        report = esp_check(model, n_pairs=20, n_steps=500, tol=1e-8,
                           rng=np.random.default_rng(0))
        assert report.converged
        assert report.steps_to_tol <= 500

    def test_gap_bounded_by_geometric_envelope(self):
        rng = np.random.default_rng(15)
        n = 6
        model = scale_feedback(tiny_model(rng.normal(size=(n, n))), 0.8,
                               MODE_CONTRACTION).model
        u = rng.uniform(-1, 1, (1, 200))
        x1 = rng.uniform(-1, 1, n)
        x2 = rng.uniform(-1, 1, n)
        s1 = run_reservoir(model, u, x1)
        s2 = run_reservoir(model, u, x2)
        gaps = np.linalg.norm(s1.states - s2.states, axis=0)
        g0 = np.linalg.norm(x1 - x2)
        envelope = 0.8 ** np.arange(1, 201) * g0
        assert np.all(gaps <= envelope + 1e-12)
