"""Limit-law unit tests.

Expected values come from independent oracles: adaptive quadrature of the
normal density for tail probabilities, and a frozen 1e7-draw Monte Carlo
(seed 20260810) for the mixed law.  Nothing below asserts a value that was
not computed by one of those routes.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from extremefields.limit_law import (
    LimitLawParams,
    QuadratureSpec,
    limit_cdf,
    log_normal_tail,
    lognormal_mixture_cdf,
    lognormal_mixture_cdf_mc,
    m_ratio_limit,
    normal_tail,
    specialization_coefficients,
    tail_constant_m,
    u_z_transform,
)


def tail_oracle(u: float) -> float:
    """Adaptive integration of the standard normal density over (u, inf)."""
    if u > 0:
        val, err = quad(lambda t: math.exp(-t * t / 2.0) / math.sqrt(2 * math.pi), u, u + 40.0)
    else:
        body, _ = quad(lambda t: math.exp(-t * t / 2.0) / math.sqrt(2 * math.pi), u, 0.0)
        val = body + 0.5
    return val


class TestNormalTail:
    def test_symmetry_at_zero(self):
        assert normal_tail(0.0) == 0.5

    def test_against_quadrature_oracle(self):
        for u in np.linspace(-8.0, 8.0, 33):
            expected = tail_oracle(float(u))
            assert normal_tail(float(u)) == pytest.approx(expected, rel=1e-12)

    def test_quoted_point(self):
        assert normal_tail(1.96) == pytest.approx(tail_oracle(1.96), abs=1e-12)
        assert abs(normal_tail(1.96) - 0.024998) < 1e-6

    def test_left_tail_saturates(self):
        assert normal_tail(-8.0) > 0.999999

    def test_log_tail_matches_linear_scale(self):
        for u in (0.0, 1.0, 3.0, 5.9, 6.1, 8.0):
            assert log_normal_tail(u) == pytest.approx(math.log(normal_tail(u)), rel=1e-13)

    def test_log_tail_deep(self):
        # asymptotic Psi(u) ~ phi(u)/u; ratio tends to 1 from below
        for u in (20.0, 40.0):
            approx = -0.5 * u * u - math.log(u * math.sqrt(2 * math.pi))
            assert log_normal_tail(u) == pytest.approx(approx, abs=0.01)
            assert log_normal_tail(u) < approx


class TestTailConstantM:
    def test_alpha2_unit_pickands(self):
        t = tail_constant_m(1.0, [2.0], [1.0])
        assert t.m == pytest.approx(1.0 / tail_oracle(1.0), rel=1e-12)

    def test_alpha2_literature_pickands_u3(self):
        h2 = 1.0 / math.sqrt(math.pi)
        t = tail_constant_m(3.0, [2.0], [h2])
        expected = 1.0 / (h2 * 3.0 * tail_oracle(3.0))
        assert t.m == pytest.approx(expected, rel=1e-12)
        assert abs(t.m - 437.7) < 0.5  # rounded reference value

    def test_doubling_pickands_halves_m_per_dimension(self):
        for d in (1, 2, 3):
            alphas = [2.0] * d
            base = tail_constant_m(2.0, alphas, [1.0] * d)
            doubled = tail_constant_m(2.0, alphas, [2.0] * d)
            assert doubled.m == pytest.approx(base.m / 2**d, rel=1e-12)

    def test_reciprocal_identity_machine_precision(self):
        # m * prod(H u^{2/alpha}) * Psi = 1, checked in log space
        for u in (1.0, 2.5, 7.0, 40.0, 200.0):
            t = tail_constant_m(u, [2.0, 1.0], [0.5641895835477563, 1.0])
            log_prod = sum(
                math.log(h) + (2.0 / a) * math.log(u)
                for a, h in zip(t.alphas, t.pickands_values)
            )
            assert t.log_m + log_prod + t.log_psi == pytest.approx(0.0, abs=1e-12)

    def test_monotone_on_evaluation_grids(self):
        grid = np.linspace(2.0, 6.0, 41)
        for alphas, hs in ([(2.0, 2.0), (0.564189583, 0.564189583)], [(1.0,), (1.0,)]):
            vals = [tail_constant_m(float(u), alphas, hs).log_m for u in grid]
            assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError, match="mismatch"):
            tail_constant_m(2.0, [2.0, 1.0], [1.0])


GOLDEN_MC_VALUE = 0.6085676    # 1e7 draws over the mixing normal, seed 20260810
GOLDEN_MC_SE = 9.54e-05


class TestMixtureCdf:
    def test_weak_dependence_closed_form(self):
        quad32 = QuadratureSpec(node_count=32)
        for c in (1e-3, 0.1, 1.0, 5.0, 20.0):
            assert abs(lognormal_mixture_cdf(c, 0.0, 0.25, quad32) - math.exp(-c)) <= 1e-10

    def test_zero_rate_boundary(self):
        assert lognormal_mixture_cdf(0.0, 0.7, 0.25) == 1.0

    def test_rate_limits(self):
        lo = lognormal_mixture_cdf(1e-12, 0.5, 0.25)
        hi = lognormal_mixture_cdf(1e9, 0.5, 0.25)
        assert lo > 1.0 - 1e-9
        assert hi < 1e-6

    def test_monotone_in_c(self):
        values = [lognormal_mixture_cdf(c, 0.5, 0.25) for c in np.geomspace(1e-3, 1e3, 25)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_monotone_in_x_and_lambda(self):
        quad = QuadratureSpec()
        base = limit_cdf(LimitLawParams(x=(1.0, 1.0), lambda_J=1.0, R=0.5, gamma=0.25), quad)
        bigger_x = limit_cdf(LimitLawParams(x=(1.5, 1.0), lambda_J=1.0, R=0.5, gamma=0.25), quad)
        bigger_l = limit_cdf(LimitLawParams(x=(1.0, 1.0), lambda_J=2.0, R=0.5, gamma=0.25), quad)
        assert bigger_x < base
        assert bigger_l < base

    def test_golden_value_strong_dependence(self):
        gh = lognormal_mixture_cdf(1.0, 0.5, 0.25, QuadratureSpec(node_count=64))
        assert abs(gh - GOLDEN_MC_VALUE) <= 3.0 * GOLDEN_MC_SE

    def test_gh_converged_at_64_nodes(self):
        v64 = lognormal_mixture_cdf(1.0, 0.5, 0.25, QuadratureSpec(node_count=64))
        v160 = lognormal_mixture_cdf(1.0, 0.5, 0.25, QuadratureSpec(node_count=160))
        assert v64 == pytest.approx(v160, abs=1e-9)

    def test_monte_carlo_agrees_and_reproduces(self):
        v1, se = lognormal_mixture_cdf_mc(1.0, 0.5, 0.25, 200_000, seed=11)
        v2, _ = lognormal_mixture_cdf_mc(1.0, 0.5, 0.25, 200_000, seed=11)
        assert v1 == v2
        gh = lognormal_mixture_cdf(1.0, 0.5, 0.25)
        assert abs(gh - v1) <= 3.0 * se

    def test_saturation_warns(self):
        with pytest.warns(RuntimeWarning, match="clamped"):
            lognormal_mixture_cdf(1e305, 0.0, 0.25)

    @settings(max_examples=60, deadline=None)
    @given(
        c=st.floats(1e-3, 50.0),
        r_const=st.floats(0.0, 4.0),
        gamma=st.floats(0.05, 0.5),
    )
    def test_jensen_lower_bound(self, c, r_const, gamma):
        # mixing variable has mean 1 and y -> exp(-c y) is convex
        value = lognormal_mixture_cdf(c, r_const, gamma)
        assert value >= math.exp(-c) - 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            lognormal_mixture_cdf(1.0, -0.1, 0.25)
        with pytest.raises(ValueError):
            lognormal_mixture_cdf(1.0, 0.5, 0.6)
        with pytest.raises(ValueError):
            QuadratureSpec(method="gauss_hermite", node_count=4)
        with pytest.raises(ValueError):
            QuadratureSpec(method="monte_carlo", mc_draws=10)
        with pytest.raises(ValueError):
            LimitLawParams(x=(0.0,), lambda_J=1.0, R=0.0, gamma=0.25)


class TestSpecialization:
    def test_planar_and_equal_growth_identities(self):
        for r_const in (0.0, 0.3, 1.0, 2.5):
            # gamma = 1/4 is exact in binary, so these hold with equality
            shift, scale = specialization_coefficients(r_const, 0.25)
            assert shift == 2.0 * r_const
            assert scale == 2.0 * math.sqrt(r_const)
            for d in (1, 2, 3, 5):
                shift_d, scale_d = specialization_coefficients(r_const, 1.0 / (2 * d))
                assert shift_d == pytest.approx(d * r_const, rel=1e-15, abs=0.0)
                assert scale_d == pytest.approx(math.sqrt(2 * d * r_const), rel=1e-15, abs=0.0)

    def test_degenerate_weak_case(self):
        assert specialization_coefficients(0.0, 0.3) == (0.0, 0.0)


class TestThresholdTransform:
    def test_weak_dependence_identity(self):
        for u, z, t_hor in ((1.0, 0.3, 10.0), (5.0, -2.0, 100.0)):
            assert u_z_transform(u, z, 0.0, t_hor) == u

    def test_direct_substitution(self):
        got = u_z_transform(1.0, 0.0, 0.5, math.exp(2.0))
        assert got == pytest.approx(1.0 / math.sqrt(0.75), rel=1e-15)

    def test_expansion_gap_decays(self):
        # u_z = u + (R/(2 gamma) - sqrt(R/gamma) z)/u + o(1/u) for T = exp(gamma u^2)
        r_const, gamma, z = 0.5, 0.25, 1.3
        shift, scale = specialization_coefficients(r_const, gamma)
        gaps = []
        for u in (10.0, 100.0, 1000.0):
            gap = u_z_transform(u, z, r_const, log_T=gamma * u * u) - u - (shift - scale * z) / u
            gaps.append(abs(gap) * u)
        assert gaps[1] < gaps[0] and gaps[2] < gaps[1]
        assert gaps[2] < 1e-5

    def test_horizon_too_small(self):
        with pytest.raises(ValueError, match="horizon too small"):
            u_z_transform(3.0, 0.0, 5.0, math.exp(2.0))
        with pytest.raises(ValueError):
            u_z_transform(3.0, 0.0, 0.5, 0.9)


class TestMRatio:
    def test_weak_dependence(self):
        for z in (-2.0, 0.0, 3.5):
            assert m_ratio_limit(z, 0.0, 0.25) == 1.0

    def test_vanishing_exponent_point(self):
        r_const, gamma = 0.5, 0.25
        z_star = 0.5 * math.sqrt(r_const / gamma)
        assert m_ratio_limit(z_star, r_const, gamma) == pytest.approx(1.0, rel=1e-15)

    def test_against_tail_ratio_at_large_threshold(self):
        r_const, gamma, z, u = 0.5, 0.25, 1.0, 200.0
        u_z = u_z_transform(u, z, r_const, log_T=gamma * u * u)
        hs = (1.0, 1.0)
        alphas = (2.0, 2.0)
        ratio = math.exp(
            tail_constant_m(u, alphas, hs).log_m - tail_constant_m(u_z, alphas, hs).log_m
        )
        assert ratio == pytest.approx(m_ratio_limit(z, r_const, gamma), rel=1e-2)
