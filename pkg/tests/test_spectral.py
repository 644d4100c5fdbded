import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmcwave.spectral import (
    CauchyData, Grid, VectorField, ZeroModeError, cos_multiplier, dealias, field_to_csv,
    fractional_laplacian, gaussian_bumps, half_wave_cos, half_wave_sinc, l2_norm_physical,
    load_field, partial_derivative, random_cauchy_data, save_field, sinc_multiplier, sobolev_norm,
)

G = Grid(32)
L = G.box_length
K0 = 2 * np.pi / L


def single(func):
    return VectorField.from_function(G, lambda x, y: (func(x, y), 0 * x, 0 * x))


def smooth_field(seed, grid=G):
    return dealias(gaussian_bumps(grid, np.random.default_rng(seed)))


def mean_free(f):
    hat = f.spectral.copy()
    hat[:, 0, 0] = 0
    return VectorField.from_spectral(f.grid, hat)


def test_grid_validation():
    for bad in (7, 6, 9, 12.5):
        with pytest.raises(ValueError):
            Grid(bad)
    with pytest.raises(ValueError):
        Grid(16, -1.0)
    assert G.kx[0, 0] == 0 and G.ky[0, 0] == 0
    assert G.box_length == pytest.approx(16 * np.pi)


def test_roundtrip_is_real_and_exact():
    f = smooth_field(0)
    back = f.to_spectral().to_physical()
    assert np.isrealobj(back.physical)
    assert np.abs(back.physical - f.physical).max() <= 1e-12 * np.abs(f.physical).max()


def test_field_is_immutable():
    f = smooth_field(1)
    with pytest.raises(ValueError):
        f.physical[0, 0, 0] = 1.0


class TestFractionalLaplacian:
    def test_s_zero_identity(self):
        f = smooth_field(2)
        assert np.allclose(fractional_laplacian(f, 0).physical, f.physical, atol=1e-14)

    def test_single_mode(self):
        f = single(lambda x, y: np.cos(K0 * x))
        out = fractional_laplacian(f, 1.0).physical[0]
        assert np.abs(out - K0 * np.cos(K0 * G.coords[0])).max() < 1e-13

    def test_constant_is_annihilated(self):
        f = VectorField.from_function(G, lambda x, y: (3.0 + 0 * x, -1.0 + 0 * x, 2.0 + 0 * x))
        assert np.abs(fractional_laplacian(f, 2).physical).max() < 1e-13

    def test_negative_power_needs_mean_free(self):
        f = VectorField.from_function(G, lambda x, y: (1.0 + np.cos(K0 * x), 0 * x, 0 * x))
        with pytest.raises(ZeroModeError, match="non-invertible zero mode"):
            fractional_laplacian(f, -1)

    @pytest.mark.parametrize("s", [0.5, 1.0, 1.5, 2.7])
    def test_inverse_pair(self, s):
        f = mean_free(smooth_field(3))
        back = fractional_laplacian(fractional_laplacian(f, -s), s)
        assert np.abs(back.physical - f.physical).max() <= 1e-11 * np.abs(f.physical).max()


class TestSobolevNorm:
    def test_zero(self):
        assert sobolev_norm(VectorField.zeros(G), 0.5) == 0.0

    def test_single_mode(self):
        # one mode f_hat(xi0) = c, so |f|_{1/2} = |xi0|^{1/2} |c|_{L2}; here c via cos amplitude 2
        f = single(lambda x, y: 2 * np.cos(K0 * x + 3 * K0 * y))
        l2 = 2 * L / math.sqrt(2)
        xi = K0 * math.sqrt(10)
        assert sobolev_norm(f, 0.5) == pytest.approx(math.sqrt(xi) * l2, rel=1e-13)

    def test_parseval_on_100_fields(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            f = VectorField(G, rng.normal(size=(3, G.n, G.n)))
            a, b = sobolev_norm(f, 0.0), l2_norm_physical(f)
            worst = max(worst, abs(a - b) / b)
        assert worst <= 1e-12


class TestPropagators:
    def test_t_zero(self):
        f = smooth_field(4)
        assert np.allclose(half_wave_cos(f, 0).physical, f.physical, atol=1e-14)
        assert np.abs(half_wave_sinc(f, 0).physical).max() == 0

    def test_cos_zero_kills_mode(self):
        f = single(lambda x, y: np.cos(K0 * x))
        t = np.pi / (2 * K0)
        assert np.abs(half_wave_cos(f, t).physical).max() < 1e-14

    def test_sinc_of_constant(self):
        f = VectorField.from_function(G, lambda x, y: (2.0 + 0 * x, 0 * x, -1.0 + 0 * x))
        out = half_wave_sinc(f, 1.7).physical
        assert np.allclose(out[0], 3.4, atol=1e-13) and np.allclose(out[2], -1.7, atol=1e-13)
        assert sinc_multiplier(G, 0.3)[0, 0] == 0.3

    def test_sinc_single_mode(self):
        f = single(lambda x, y: np.sin(2 * K0 * y))
        t = 0.77
        k = 2 * K0
        ref = np.sin(t * k) / k * np.sin(k * G.coords[1])
        assert np.abs(half_wave_sinc(f, t).physical[0] - ref).max() < 1e-12

    def test_dalembert_plane_wave(self):
        # u(t) = cos(k.x - |k| t) from u0 = cos(k.x), u1 = |k| sin(k.x)
        kx, ky = 3 * K0, -2 * K0
        k = math.hypot(kx, ky)
        u0 = single(lambda x, y: np.cos(kx * x + ky * y))
        u1 = single(lambda x, y: k * np.sin(kx * x + ky * y))
        x, y = G.coords
        for t in (0.3, 1.9, 12.0):
            u = half_wave_cos(u0, t) + half_wave_sinc(u1, t)
            assert np.abs(u.physical[0] - np.cos(kx * x + ky * y - k * t)).max() <= 1e-10

    def test_group_law(self):
        f = smooth_field(5)
        t1, t2 = 0.4, 2.3
        lhs = half_wave_cos(half_wave_cos(f, t1), t2).spectral
        rhs = 0.5 * (cos_multiplier(G, t1 + t2) + cos_multiplier(G, t1 - t2)) * f.spectral
        assert np.abs(lhs - rhs).max() <= 1e-11 * np.abs(f.spectral).max()

    def test_linear_energy_conserved(self):
        grid = Grid(64)
        d = random_cauchy_data(grid, np.random.default_rng(0), 1.0)
        vals = []
        for t in np.linspace(0, 5, 7):
            u = half_wave_cos(d.u0, t) + half_wave_sinc(d.u1, t)
            # u_t = -|xi|^2 sinc(t) u0 + cos(t) u1
            ut = half_wave_cos(d.u1, t) - fractional_laplacian(half_wave_sinc(d.u0, t), 2)
            vals.append(sobolev_norm(ut, 0) ** 2 + sobolev_norm(u, 1) ** 2)
        vals = np.array(vals)
        assert np.ptp(vals) / vals[0] <= 1e-10


class TestDerivatives:
    def test_constant(self):
        f = VectorField.from_function(G, lambda x, y: (1.0 + 0 * x, 2.0 + 0 * x, 0 * x))
        assert np.abs(partial_derivative(f, "x").physical).max() < 1e-14

    def test_sine(self):
        f = single(lambda x, y: np.sin(K0 * x))
        out = partial_derivative(f, "x").physical[0]
        assert np.abs(out - K0 * np.cos(K0 * G.coords[0])).max() <= 1e-12

    def test_mixed_commute(self):
        f = smooth_field(6)
        a = partial_derivative(partial_derivative(f, "x"), "y").physical
        b = partial_derivative(partial_derivative(f, "y"), "x").physical
        assert np.abs(a - b).max() <= 1e-12

    def test_nyquist_zeroed(self):
        f = single(lambda x, y: np.cos(np.pi * G.n / L * x))
        assert np.abs(partial_derivative(f, "x").physical).max() < 1e-14

    def test_bad_axis(self):
        with pytest.raises(ValueError):
            partial_derivative(smooth_field(0), "z")


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_multipliers_commute_and_compose(s1, s2, seed):
    f = mean_free(smooth_field(seed % 1000))
    a = fractional_laplacian(fractional_laplacian(f, s1), s2).spectral
    b = fractional_laplacian(f, s1 + s2).spectral
    scale = np.abs(a).max() + np.abs(b).max() + 1e-300
    assert np.abs(a - b).max() <= 1e-11 * scale


class TestCauchyData:
    def test_ingest_splits_mean(self):
        u0 = VectorField.from_function(G, lambda x, y: (1.5 + np.cos(K0 * x), 0 * x, 0 * x))
        d = CauchyData.ingest(u0, VectorField.zeros(G))
        assert d.mean0[0] == pytest.approx(1.5)
        assert abs(d.u0.spectral[0, 0, 0]) < 1e-12

    def test_rejects_mean_and_oversize(self):
        u0 = VectorField.from_function(G, lambda x, y: (1.0 + 0 * x, 0 * x, 0 * x))
        with pytest.raises(ValueError, match="mean-free"):
            CauchyData(u0, VectorField.zeros(G), 10.0)
        f = mean_free(smooth_field(1))
        with pytest.raises(ValueError, match="exceeds"):
            CauchyData(f, f, 1e-9)

    def test_random_data_norm(self):
        d = random_cauchy_data(Grid(64), np.random.default_rng(3), 0.3)
        assert d.norm() == pytest.approx(0.3, rel=1e-10)
        assert d.norm() <= d.size_bound


def test_serialization_roundtrip(tmp_path):
    f = smooth_field(8)
    save_field(f, tmp_path / "f")
    g = load_field(tmp_path / "f")
    assert g.grid == f.grid and np.array_equal(g.physical, f.physical)
    spec = f.to_spectral()
    save_field(spec, tmp_path / "s")
    h = load_field(tmp_path / "s")
    assert h.representation == "spectral" and np.array_equal(h.spectral, spec.spectral)
    path = field_to_csv(f, tmp_path / "f.csv")
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (G.n**2, 5)
