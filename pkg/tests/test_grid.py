import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calabi.grid import (
    TorusGrid,
    biharmonic_apply,
    biharmonic_shift_solve,
    complex_hessian,
    d_antiholo,
    d_holo,
    integrate,
    laplace_flat,
    mode_field,
    random_spectrum_field,
    remove_null,
    sample_on_tensor,
    spectral_tail_norm,
)


@pytest.fixture
def g1():
    return TorusGrid(1, 32)


class TestTorusGrid:
    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            TorusGrid(3, 16)
        with pytest.raises(ValueError):
            TorusGrid(1, 7)
        with pytest.raises(ValueError):
            TorusGrid(1, 6)

    def test_weights(self):
        g = TorusGrid(2, 8)
        assert g.shape == (8, 8, 8, 8)
        assert np.isclose(g.weight * g.size, (2 * np.pi) ** 4)

    def test_null_patterns_span_derivative_kernel(self):
        g = TorusGrid(1, 16)
        for p in g.null_patterns:
            assert np.max(np.abs(laplace_flat(g, p))) < 1e-12
            assert np.max(np.abs(d_holo(g, p, 0))) < 1e-12
        assert len(g.null_patterns) == 4


class TestDerivatives:
    def test_holomorphic_derivative_of_plane_wave(self, g1):
        x, y = g1.coords()
        f = np.cos(2 * x + 3 * y)
        # d/dz cos(kx + ly) = -(k - i l)/2 sin(kx + ly)
        expect = -0.5 * (2 - 3j) * np.sin(2 * x + 3 * y)
        assert np.max(np.abs(d_holo(g1, f, 0) - expect)) < 1e-12
        assert np.max(np.abs(d_antiholo(g1, f, 0) - np.conj(expect))) < 1e-12

    def test_laplace_is_quarter_of_real(self, g1):
        x, y = g1.coords()
        f = np.sin(x) * np.cos(2 * y)
        assert np.max(np.abs(laplace_flat(g1, f) + 5 / 4 * f)) < 1e-12

    def test_hessian_trace_matches_laplacian(self):
        g = TorusGrid(2, 8)
        f = random_spectrum_field(g, 2.0, 0, 1.0)
        H = complex_hessian(g, f)
        assert np.max(np.abs(H[0, 0] + H[1, 1] - laplace_flat(g, f))) < 1e-12
        assert np.max(np.abs(H[0, 1] - np.conj(H[1, 0]))) < 1e-14

    def test_axis_index_checked(self, g1):
        with pytest.raises(ValueError):
            d_holo(g1, np.zeros(g1.shape), 1)

    def test_non_finite_rejected(self, g1):
        f = np.zeros(g1.shape)
        f[0, 0] = np.nan
        with pytest.raises(ValueError):
            laplace_flat(g1, f)

    def test_nyquist_mode_is_invisible(self, g1):
        x, _ = g1.coords()
        f = np.cos(16 * x)
        assert np.max(np.abs(laplace_flat(g1, f))) < 1e-12


class TestBiharmonic:
    def test_round_trip(self, g1):
        f = random_spectrum_field(g1, 1.0, 1, 1.0)
        u = biharmonic_shift_solve(g1, f, 0.3)
        assert np.max(np.abs(biharmonic_apply(g1, u, 0.3) - f)) < 1e-12

    def test_mode_gain(self, g1):
        x, _ = g1.coords()
        u = biharmonic_shift_solve(g1, np.cos(x), 1.0)
        assert np.allclose(u, np.cos(x) / (1 + 1 / 16), atol=1e-14)

    def test_sigma_positive(self, g1):
        with pytest.raises(ValueError):
            biharmonic_shift_solve(g1, np.zeros(g1.shape), 0.0)


class TestQuadrature:
    def test_integral_of_constant(self, g1):
        assert np.isclose(integrate(g1, np.ones(g1.shape)), 4 * np.pi**2)

    def test_tail_norm(self, g1):
        x, y = g1.coords()
        f = np.cos(x) + 0.5 * np.cos(10 * y)
        # L2 norm of 0.5 cos(10 y) over the torus
        assert np.isclose(spectral_tail_norm(g1, f, 8), 0.5 * np.sqrt(2 * np.pi**2), rtol=1e-12)
        with pytest.raises(ValueError):
            spectral_tail_norm(g1, f, 16)

    def test_mode_field_shape_check(self, g1):
        with pytest.raises(ValueError):
            mode_field(g1, [1, 0, 0, 0])

    def test_random_field_amplitude_and_band(self, g1):
        f = random_spectrum_field(g1, 2.0, 3, 0.7, k_max=4)
        assert np.isclose(np.max(np.abs(f)), 0.7)
        assert spectral_tail_norm(g1, f, 4) < 1e-12
        assert abs(np.mean(f)) < 1e-14

    def test_random_field_is_seeded(self, g1):
        a = random_spectrum_field(g1, 2.0, 5, 1.0)
        b = random_spectrum_field(g1, 2.0, 5, 1.0)
        assert np.array_equal(a, b)


class TestSampling:
    def test_interpolant_exact_on_grid(self, g1):
        f = random_spectrum_field(g1, 2.0, 0, 1.0)
        x = g1.spacing * np.arange(g1.N)
        assert np.max(np.abs(sample_on_tensor(g1, f, x, x) - f)) < 1e-13

    def test_band_limited_off_grid(self, g1):
        xs = np.linspace(0.1, 6.0, 7)
        ys = np.linspace(0.3, 5.0, 5)
        x, y = g1.coords()
        f = np.cos(3 * x - 2 * y)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        assert np.max(np.abs(sample_on_tensor(g1, f, xs, ys) - np.cos(3 * X - 2 * Y))) < 1e-12


class TestRemoveNull:
    def test_flat_projection_idempotent(self, g1):
        v = random_spectrum_field(g1, 0.0, 2, 1.0) + 3.0
        p = remove_null(g1, v)
        assert np.max(np.abs(remove_null(g1, p) - p)) < 1e-13
        assert abs(np.mean(p)) < 1e-14

    def test_weighted_projection_is_orthogonal(self, g1):
        w = 1.0 + 0.5 * np.cos(g1.coords()[0])
        v = random_spectrum_field(g1, 0.0, 4, 1.0) + 1.0
        p = remove_null(g1, v, w)
        for b in g1.null_patterns:
            assert abs(np.sum(b * p * w)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.floats(0, 2 * np.pi))
def test_dz_dzbar_compose_to_laplacian(k, l, phase):
    g = TorusGrid(1, 16)
    f = mode_field(g, [k, l], 1.0, phase)
    dd = d_holo(g, d_antiholo(g, f, 0).real, 0) + 1j * d_holo(g, d_antiholo(g, f, 0).imag, 0)
    assert np.max(np.abs(dd - laplace_flat(g, f))) < 1e-11
