import numpy as np
import pytest

from fragmellin.forward import (
    StabilityError,
    default_dt,
    dt_max,
    gain_operator,
    rescale_snapshot,
    simulate,
    step,
)
from fragmellin.grids import GridFunction, integrate, interp_log, make_log_grid
from fragmellin.kernels import KernelSpec, RateSpec, beta_kernel, mitosis, uniform_binary

RATE = RateSpec(alpha=1.0, gamma=1.0)


def exact_case(n=512, x_min=1e-4, x_max=60.0):
    g = make_log_grid(x_min, x_max, n)
    return g, GridFunction(g, np.exp(-g.nodes))


def exact_solution(t, x):
    return (1.0 + t) ** 2 * np.exp(-(1.0 + t) * x)


def weighted_l1(grid, a, b):
    return float(np.sum(grid.weights * grid.nodes * np.abs(a - b)))


class TestGain:
    def test_uniform_exact_case(self):
        # int_x^inf (2/u) u e^-u du = 2 e^-x
        _, f = exact_case()
        gain = gain_operator(f, uniform_binary(), RATE)
        assert abs(interp_log(gain, 1.0) - 2.0 * np.exp(-1.0)) < 1e-3

    def test_zero_density(self):
        g, _ = exact_case(n=128)
        f = GridFunction(g, np.zeros(g.n))
        gain = gain_operator(f, uniform_binary(), RATE)
        assert np.all(gain.values == 0.0)

    def test_mitosis_atom_formula(self):
        # c z0^(-gamma-1) x^gamma f(x/z0) = 2 * 4 * e^-2 at x = 1
        _, f = exact_case()
        gain = gain_operator(f, mitosis(), RATE)
        assert abs(interp_log(gain, 1.0) - 8.0 * np.exp(-2.0)) < 1e-3

    def test_negative_input_rejected(self):
        g, _ = exact_case(n=64)
        f = GridFunction(g, -np.ones(g.n))
        with pytest.raises(ValueError):
            gain_operator(f, uniform_binary(), RATE)


class TestStep:
    def test_zero_stays_zero(self):
        g, _ = exact_case(n=128)
        f = GridFunction(g, np.zeros(g.n))
        out = step(f, uniform_binary(), RATE, 1e-3)
        assert np.all(out.values == 0.0)

    def test_degenerate_kernel_pure_decay(self):
        g, f = exact_case(n=128)
        empty = KernelSpec()  # zero-mass kernel: gain vanishes
        out = step(f, empty, RATE, 1e-2)
        expected = np.exp(-RATE.B(g.nodes) * 1e-2) * f.values
        assert np.allclose(out.values, expected, rtol=1e-12)

    def test_stability_guard(self):
        g, f = exact_case(n=128)
        with pytest.raises(StabilityError):
            step(f, uniform_binary(), RATE, 2.0 * dt_max(RATE, g))

    def test_positivity(self):
        g, f = exact_case(n=128)
        out = f
        for _ in range(50):
            out = step(out, uniform_binary(), RATE, 5e-3)
        assert np.all(out.values >= 0.0)

    def test_exact_solution_t1(self):
        g, f = exact_case()
        dt = 5e-4
        for _ in range(int(round(1.0 / dt))):
            f = step(f, uniform_binary(), RATE, dt)
        assert weighted_l1(g, f.values, exact_solution(1.0, g.nodes)) < 1e-3


class TestSimulate:
    def test_moments_match_exact_case(self):
        # x_min small enough that the particle count below the grid,
        # (1+t)^2 x_min, stays inside the tolerance
        g, f0 = exact_case(x_min=1e-5)
        series = simulate(f0, uniform_binary(), RATE, t_end=2.0, output_times=(0.0, 1.0, 2.0), dt=1e-4)
        assert np.allclose(series.M1, 1.0, atol=1e-4)
        assert np.allclose(series.M0, 1.0 + series.times, atol=1e-3)

    def test_number_monotone(self):
        g, f0 = exact_case()
        series = simulate(f0, beta_kernel(), RATE, t_end=1.0, output_times=np.linspace(0, 1, 11), dt=1e-3)
        assert np.all(np.diff(series.M0) >= -1e-10)

    def test_zero_initial_condition(self):
        g, _ = exact_case(n=128)
        f0 = GridFunction(g, np.zeros(g.n))
        series = simulate(f0, uniform_binary(), RATE, t_end=0.5, output_times=(0.25, 0.5), dt=1e-2)
        assert np.all(series.M0 == 0.0)
        assert all(np.all(s.values == 0.0) for s in series.snapshots)

    def test_dust_counter_accumulates(self):
        # with a coarse lower cutoff some fragment mass is produced below x_min
        g = make_log_grid(0.2, 60.0, 256)
        f0 = GridFunction(g, np.exp(-g.nodes))
        series = simulate(f0, uniform_binary(), RATE, t_end=1.0, output_times=(1.0,), dt=1e-3)
        assert series.dust[-1] > 0.0
        assert np.all(np.diff(series.dust) >= 0.0) if series.dust.size > 1 else True


class TestRescale:
    def test_exact_case_t9_t99(self):
        # on the exact solution the rescaled profile converges to e^-z
        g = make_log_grid(1e-4, 60.0, 512)
        target = np.exp(-g.nodes)
        for t, tol in ((9.0, 0.25), (99.0, 0.03)):
            big = make_log_grid(1e-5, 600.0, 1024)
            f = GridFunction(big, exact_solution(t, big.nodes))
            ghat = rescale_snapshot(f, t, RATE, g)
            assert float(np.sum(g.weights * np.abs(ghat.values - target))) < tol

    def test_unit_time_identity(self):
        # at t = 1 the size rescaling is the identity up to the t^(-2/gamma) factor
        g, f = exact_case(n=256)
        ghat = rescale_snapshot(f, 1.0, RATE)
        assert np.allclose(ghat.values, f.values, rtol=1e-6)

    def test_zero_function(self):
        g, _ = exact_case(n=64)
        f = GridFunction(g, np.zeros(g.n))
        ghat = rescale_snapshot(f, 5.0, RATE)
        assert np.all(ghat.values == 0.0)

    def test_requires_positive_time(self):
        g, f = exact_case(n=64)
        with pytest.raises(ValueError):
            rescale_snapshot(f, 0.0, RATE)


class TestSelfSimilarConvergence:
    @pytest.mark.slow
    def test_dyadic_distance_decreases(self):
        g, f0 = exact_case()
        times = (1.0, 2.0, 4.0, 8.0)
        series = simulate(f0, uniform_binary(), RATE, t_end=8.0, output_times=times, dt=None, adaptive_safety=0.02)
        target = np.exp(-g.nodes)
        dists = []
        for t, snap in zip(series.times, series.snapshots):
            ghat = rescale_snapshot(snap, t, RATE, g)
            dists.append(float(np.sum(g.weights * g.nodes * np.abs(ghat.values - target))))
        assert all(d2 < d1 for d1, d2 in zip(dists, dists[1:]))

    def test_default_dt_scales_with_mean_size(self):
        g, f0 = exact_case()
        dt0 = default_dt(f0, RATE)
        shrunk = GridFunction(g, exact_solution(9.0, g.nodes))
        assert default_dt(shrunk, RATE) > dt0
