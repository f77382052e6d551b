import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fragmellin.kernels import (
    KernelSpec,
    RateSpec,
    beta_kernel,
    k0_mellin,
    k0_tail_coefficient,
    kernel_from_json,
    kernel_to_json,
    mitosis,
    renormalize,
    sampled_kernel,
    uniform_binary,
    validate_kernel,
)

BUNDLED = [uniform_binary(), beta_kernel(), mitosis()]


class TestValidate:
    def test_uniform_binary(self):
        d = validate_kernel(uniform_binary())
        assert d["passed"]
        assert d["mass"] == pytest.approx(2.0)
        assert d["first_moment"] == pytest.approx(1.0)

    def test_mitosis(self):
        d = validate_kernel(mitosis())
        assert d["passed"]
        assert d["mass"] == pytest.approx(2.0)
        assert d["first_moment"] == pytest.approx(1.0)

    def test_beta(self):
        d = validate_kernel(beta_kernel(2.0, 2.0))
        assert d["passed"]
        assert d["mass"] == pytest.approx(2.0)
        assert d["first_moment"] == pytest.approx(1.0, abs=1e-10)

    def test_reports_violation_without_raising(self):
        bad = uniform_binary(mass=3.0)  # first moment 1.5
        d = validate_kernel(bad)
        assert not d["passed"]
        assert any("first moment" in msg for msg in d["issues"])


class TestRateSpec:
    def test_requires_positive(self):
        with pytest.raises(ValueError):
            RateSpec(alpha=-1.0, gamma=1.0)
        with pytest.raises(ValueError):
            RateSpec(alpha=1.0, gamma=0.0)

    def test_power_law(self):
        r = RateSpec(alpha=2.0, gamma=1.5)
        assert r.B(4.0) == pytest.approx(2.0 * 4.0**1.5)


class TestMellin:
    def test_uniform_normalization(self):
        assert k0_mellin(uniform_binary(), 2.0) == pytest.approx(1.0)

    def test_uniform_s5(self):
        assert k0_mellin(uniform_binary(), 5.0) == pytest.approx(0.4)

    def test_mitosis_s3(self):
        assert k0_mellin(mitosis(), 3.0) == pytest.approx(0.5)

    def test_beta_s4(self):
        assert k0_mellin(beta_kernel(), 4.0) == pytest.approx(12.0 / (5.0 * 6.0))

    def test_domain(self):
        with pytest.raises(ValueError):
            k0_mellin(uniform_binary(), 0.5)

    def test_sampled_matches_uniform(self):
        z = np.geomspace(1e-8, 1.0, 2000)
        k = sampled_kernel(z, np.full_like(z, 2.0))
        for s in (2.0, 3.5, 5.0):
            assert k0_mellin(k, s) == pytest.approx(2.0 / s, rel=5e-4)

    @pytest.mark.parametrize("k", BUNDLED, ids=["uniform", "beta", "mitosis"])
    def test_normalization_invariant(self, k):
        assert abs(k0_mellin(k, 2.0) - 1.0) <= 1e-6

    @pytest.mark.parametrize("k", BUNDLED, ids=["uniform", "beta", "mitosis"])
    def test_contraction_above_two(self, k):
        s = np.linspace(2.05, 30.0, 40)
        vals = np.abs(k0_mellin(k, s))
        assert np.all(vals < 1.0)

    @pytest.mark.parametrize("k,k01", [(uniform_binary(), 2.0), (beta_kernel(), 0.0)], ids=["uniform", "beta"])
    def test_tail_asymptotics_decreasing_error(self, k, k01):
        # non-strict: for the uniform kernel s K0(s) - k0(1) is identically zero
        errs = [abs(s * k0_mellin(k, s) - k01) for s in (50.0, 100.0, 200.0)]
        assert errs[0] + 1e-15 >= errs[1] >= errs[2] - 1e-15
        assert errs[2] <= errs[0] + 1e-15

    def test_atoms_do_not_decay_on_vertical_lines(self):
        k = mitosis()
        u = 3.0
        v = np.linspace(0.0, 100.0, 2001)
        vals = np.abs(k0_mellin(k, u + 1j * v))
        z1, c1 = k.atoms[0]
        assert np.max(vals) > 0.5 * c1 * z1 ** (u - 1.0)
        # no decay: the outer values stay comparable to the inner ones
        assert np.max(vals[v > 80]) > 0.5 * np.max(vals)


class TestTailCoefficient:
    def test_uniform(self):
        assert k0_tail_coefficient(uniform_binary()) == pytest.approx(2.0)

    def test_beta_vanishes(self):
        assert k0_tail_coefficient(beta_kernel()) == pytest.approx(0.0)

    def test_mitosis_warns_zero(self):
        with pytest.warns(UserWarning):
            val = k0_tail_coefficient(mitosis())
        assert val == 0.0

    def test_atom_at_one_rejected(self):
        k = KernelSpec(atoms=((1.0, 1.0),))
        with pytest.raises(ValueError):
            k0_tail_coefficient(k)


class TestRenormalize:
    def test_scales_first_moment(self):
        k = uniform_binary(mass=3.0)
        k2 = renormalize(k)
        assert k2.first_moment() == pytest.approx(1.0)

    @given(st.lists(st.floats(min_value=0.05, max_value=5.0), min_size=8, max_size=8))
    @settings(max_examples=25, deadline=None)
    def test_random_sampled_kernels_normalize(self, raw):
        z = np.geomspace(1e-3, 1.0, 8)
        k = renormalize(sampled_kernel(z, np.asarray(raw)))
        assert abs(k0_mellin(k, 2.0) - 1.0) <= 1e-6


class TestJson:
    @pytest.mark.parametrize("k", BUNDLED, ids=["uniform", "beta", "mitosis"])
    def test_round_trip(self, k):
        k2 = kernel_from_json(kernel_to_json(k))
        for s in (1.5, 2.0, 4.0):
            assert k0_mellin(k2, s) == pytest.approx(complex(k0_mellin(k, s)))

    def test_sampled_round_trip(self):
        z = np.geomspace(0.01, 1.0, 50)
        k = sampled_kernel(z, 2.0 * np.ones(50))
        k2 = kernel_from_json(kernel_to_json(k))
        assert np.allclose(k2.density_params["values"], 2.0)
