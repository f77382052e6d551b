import numpy as np
import pytest
from scipy.special import loggamma

from fragmellin.grids import ComplexLine, GridFunction, make_log_grid
from fragmellin.kernels import RateSpec, k0_mellin, uniform_binary
from fragmellin.mellin import (
    MellinSamples,
    Taper,
    cauchy_one_sided,
    mellin_forward,
    mellin_inverse,
    mellin_real,
    pv_cauchy,
)


def exp_profile(x_min=1e-4, x_max=60.0, n=512):
    g = make_log_grid(x_min, x_max, n)
    return GridFunction(g, np.exp(-g.nodes))


class TestForward:
    def test_gamma_values(self):
        f = exp_profile()
        assert mellin_real(f, 3.0) == pytest.approx(2.0, abs=1e-5)
        assert mellin_real(f, 2.0) == pytest.approx(1.0, abs=1e-5)

    def test_uniform_indicator(self):
        g = make_log_grid(1e-6, 1.0, 512)
        f = GridFunction(g, np.full(g.n, 2.0))
        assert mellin_real(f, 5.0) == pytest.approx(0.4, rel=1e-3)

    def test_line_matches_gamma_function(self):
        # relative accuracy where Gamma is appreciable, absolute accuracy in
        # the far tail where |Gamma(2.5+iv)| itself sits at the 1e-11 scale
        f = exp_profile()
        samples = mellin_forward(f, u=2.5, V=20.0, dv=0.5)
        truth = np.exp(loggamma(samples.line.s_nodes))
        err = np.abs(samples.values - truth)
        assert np.max(err / (np.abs(truth) + 1e-8)) < 1e-5
        assert np.max(err) < 1e-10

    def test_hermitian_symmetry(self):
        f = exp_profile()
        samples = mellin_forward(f, u=3.0, V=10.0, dv=0.25)
        assert samples.hermitian_defect() < 1e-13 * float(np.max(np.abs(samples.values)))

    def test_boundary_warning(self):
        # a profile that does not decay by x_max triggers the truncation warning
        g = make_log_grid(1e-2, 5.0, 128)
        f = GridFunction(g, np.exp(-g.nodes))
        with pytest.warns(UserWarning, match="truncation-dominated"):
            mellin_forward(f, u=6.0, V=2.0, dv=0.5)

    def test_negative_clipping_reported(self):
        g = make_log_grid(1e-2, 5.0, 128)
        vals = np.exp(-g.nodes)
        vals[10] = -0.5
        f_vals = GridFunction(g, vals)
        samples = mellin_forward(f_vals, u=2.0, V=1.0, dv=0.5)
        assert samples.diagnostics["clipped_mass"] > 0

    def test_requires_u_at_least_one(self):
        f = exp_profile(n=64)
        with pytest.raises(ValueError):
            mellin_forward(f, u=0.5, V=1.0, dv=0.5)


class TestInverse:
    def test_gamma_pair(self):
        # analytic Gamma samples invert back to e^-x
        u, V, dv = 2.5, 40.0, 0.05
        m = int(round(V / dv))
        v = np.linspace(-V, V, 2 * m + 1)
        line = ComplexLine(u=u, v_nodes=v, values=np.exp(loggamma(u + 1j * v)))
        x = np.geomspace(0.1, 10.0, 200)
        vals, diag = mellin_inverse(line, x, window=Taper(kind="tukey", frac=0.25))
        assert np.max(np.abs(vals - np.exp(-x))) < 1e-4
        assert diag["imag_residual"] < 1e-6

    def test_indicator_pair(self):
        # 2/s inverts to 2*1_(0,1) away from the jump; the default cosine
        # taper holds +-0.05 on the wider bands, the Hann window on the
        # tighter ones
        u, V, dv = 3.0, 200.0, 0.1
        m = int(round(V / dv))
        v = np.linspace(-V, V, 2 * m + 1)
        line = ComplexLine(u=u, v_nodes=v, values=2.0 / (u + 1j * v))
        x = np.geomspace(0.05, 2.0, 400)
        vals, _ = mellin_inverse(line, x, window=Taper(kind="tukey", frac=0.25))
        assert np.max(np.abs(vals[(x >= 0.05) & (x <= 0.9)] - 2.0)) < 0.05
        assert np.max(np.abs(vals[(x >= 1.1) & (x <= 2.0)])) < 0.05
        vals_h, _ = mellin_inverse(line, x, window=Taper(kind="hann"))
        assert np.max(np.abs(vals_h[(x >= 0.05) & (x <= 0.95)] - 2.0)) < 0.05
        assert np.max(np.abs(vals_h[(x >= 1.05) & (x <= 2.0)])) < 0.05

    def test_zero_line(self):
        v = np.linspace(-5.0, 5.0, 101)
        line = ComplexLine(u=2.0, v_nodes=v, values=np.zeros(101, dtype=complex))
        vals, _ = mellin_inverse(line, np.array([0.5, 1.0, 2.0]))
        assert np.all(vals == 0.0)

    def test_round_trip(self):
        for fn in (lambda x: np.exp(-x), lambda x: np.exp(-(x**2))):
            f = exp_profile(1e-4, 50.0, 512)
            f = GridFunction(f.grid, fn(f.grid.nodes))
            samples = mellin_forward(f, u=2.5, V=40.0, dv=0.05)
            back, _ = mellin_inverse(samples, f.grid)
            err = float(np.sum(f.grid.weights * f.grid.nodes * np.abs(back.values - f.values)))
            assert err < 1e-3

    def test_symmetry_violation_flagged(self):
        v = np.linspace(-5.0, 5.0, 101)
        vals = np.where(v > 0, 1.0 + 0j, 0.0 + 0j)  # grossly non-Hermitian
        line = ComplexLine(u=2.0, v_nodes=v, values=vals)
        with pytest.warns(UserWarning, match="imaginary residual"):
            mellin_inverse(line, np.array([1.0, 2.0]))


class TestFunctionalEquation:
    def test_exact_case_residual(self):
        # (2 - s) G(s) = alpha gamma (K0(s) - 1) G(s + gamma) on real s
        f = exp_profile()
        k = uniform_binary()
        s = np.linspace(2.5, 8.0, 23)
        G = mellin_real(f, s)
        Gg = mellin_real(f, s + 1.0)
        K0 = np.real(k0_mellin(k, s))
        resid = np.abs((2.0 - s) * G - (K0 - 1.0) * Gg) / np.abs(Gg)
        assert np.max(resid) < 1e-5


class TestPrincipalValue:
    def test_constant_on_symmetric_window(self):
        a = 1.0
        w = np.linspace(0.0, 2.0 * a, 20001)
        assert abs(pv_cauchy(w, np.ones_like(w), a)) < 1e-6

    def test_partial_fraction_cancellation(self):
        # PV int_0^inf dw/((w-1)(w+1)) = 0
        a = 1.0
        w = np.unique(np.concatenate([
            np.geomspace(1e-6, 1e6, 120001),
            np.linspace(0.5, 1.5, 20001),
        ]))
        h = 1.0 / (w + 1.0)
        assert abs(pv_cauchy(w, h, a)) < 1e-6

    def test_one_sided_limits(self):
        a = 1.0
        w = np.linspace(0.0, 2.0, 40001)
        h = np.ones_like(w)
        above = cauchy_one_sided(w, h, a, side="above")
        below = cauchy_one_sided(w, h, a, side="below")
        assert abs(above - (-1j * np.pi)) < 1e-6
        assert abs(below - (1j * np.pi)) < 1e-6

    def test_resolution_guard(self):
        w = np.geomspace(1e-3, 10.0, 30)  # too coarse near the pole
        with pytest.raises(ValueError, match="resolve the pole"):
            pv_cauchy(w, np.ones_like(w), 1.0)
