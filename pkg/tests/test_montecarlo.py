"""Experiment engine tests at reduced scale.

Full-scale convergence and trend criteria live in test_acceptance.py;
these tests pin the engine's exact contracts: determinism across reruns and
worker counts, replicate-wise monotonicity under shared streams, exact
lattice sums against hand-expanded terms, and report wiring.
"""

import math

import numpy as np
import pytest

from extremefields.fields import CorrelationModel, build_sampler
from extremefields.geometry import BudgetError, JordanSet, ScalingPlan, build_grid
from extremefields.limit_law import lognormal_mixture_cdf, normal_tail
from extremefields.montecarlo import (
    RateDescriptor,
    SupExperimentConfig,
    _collect_sups,
    convergence_study,
    corollary_experiments,
    discretization_gap,
    estimate_sup_cdf,
    lemma2_sum,
    lemma3_sum_detailed,
    lemma_sum_study,
    piterbarg_tail_check,
    wilson_interval,
)

H2 = 1.0 / math.sqrt(math.pi)
SEP2 = CorrelationModel.separable_stable((2.0, 2.0))
PLAN2 = ScalingPlan.symmetric(2)


def small_config(**overrides) -> SupExperimentConfig:
    base = dict(
        model=SEP2, plan=PLAN2, J=JordanSet.unit_cube(2), x=(1.0, 1.0),
        u_values=(2.5,), a=0.25, replicates=200, seed=42,
        pickands_values=(H2, H2),
    )
    base.update(overrides)
    return SupExperimentConfig(**base)


class TestWilson:
    def test_brackets_the_proportion(self):
        low, high = wilson_interval(30, 100)
        assert low < 0.3 < high

    def test_edge_cases(self):
        low0, high0 = wilson_interval(0, 50)
        assert low0 == 0.0 and high0 > 0.0
        low1, high1 = wilson_interval(50, 50)
        assert high1 == 1.0 and low1 < 1.0

    def test_known_value(self):
        # Wilson for p_hat = 0.5, n = 100, z = 1.96: 0.5 +- 0.0958
        low, high = wilson_interval(50, 100)
        assert low == pytest.approx(0.404, abs=2e-3)
        assert high == pytest.approx(0.596, abs=2e-3)


class TestSupExperiment:
    def test_impossible_threshold_gives_zero(self):
        rep = estimate_sup_cdf(small_config(u_values=(-10.0,), replicates=150))
        assert rep.records[0]["empirical_cdf"] == 0.0

    def test_single_point_set_matches_marginal(self):
        # a set far smaller than the grid spacing keeps exactly one grid point,
        # so the sup is one standard normal and the CDF is Phi(u)
        cfg = small_config(J=JordanSet.box((0.0, 0.0), (1e-9, 1e-9)),
                           u_values=(1.0,), replicates=4000)
        rep = estimate_sup_cdf(cfg)
        rec = rep.records[0]
        assert rec["grid_points"] == 1
        phi = 1.0 - normal_tail(1.0)
        assert rec["wilson_ci_low"] <= phi <= rec["wilson_ci_high"]

    def test_rerun_is_byte_identical(self):
        a = estimate_sup_cdf(small_config()).canonical()
        b = estimate_sup_cdf(small_config()).canonical()
        assert a == b

    def test_worker_count_invariance(self):
        a = estimate_sup_cdf(small_config()).records
        b = estimate_sup_cdf(small_config(workers=3)).records
        a = [dict(r) for r in a]
        b = [dict(r) for r in b]
        for ra, rb in zip(a, b):
            ra.pop("replicates"), rb.pop("replicates")
        assert a == b

    def test_report_shapes_and_theory(self):
        rep = estimate_sup_cdf(small_config(u_values=(2.0, 2.5)))
        assert rep.kind == "sup_cdf"
        assert len(rep.records) == 2
        for rec in rep.records:
            assert 0.0 <= rec["empirical_cdf"] <= 1.0
            assert rec["wilson_ci_low"] <= rec["empirical_cdf"] <= rec["wilson_ci_high"]
            assert rec["theory_limit"] == pytest.approx(math.exp(-1.0), abs=1e-12)
        assert "config_hash" in rep.metadata
        assert rep.csv_text().splitlines()[0] == "u,empirical,ci_low,ci_high,theory,n"

    def test_budget_truncation_flag(self):
        cfg = small_config(u_values=(2.5, 6.0), budget=20_000)
        rep = estimate_sup_cdf(cfg)
        assert rep.metadata["flags"].get("truncated") is True
        assert len(rep.records) == 1

    def test_mixture_horizon_tied_per_u(self):
        model = CorrelationModel.mixture_strong((2.0, 2.0), 0.5, 51.6)
        cfg = small_config(model=model, u_values=(2.5,), replicates=150)
        rep = estimate_sup_cdf(cfg)
        rec = rep.records[0]
        # theory uses the R > 0 law
        expected = lognormal_mixture_cdf(1.0, 0.5, 0.25)
        assert rec["theory_limit"] == pytest.approx(expected, rel=1e-12)


class TestSharedStreamMonotonicity:
    def test_cdf_monotone_in_threshold_on_fixed_grid(self):
        grid = build_grid([(0.0, 2.0), (0.0, 2.0)], SEP2.alphas, 0.25, 2.0)
        sampler = build_sampler(SEP2, grid)
        sups = _collect_sups(sampler, [None], replicates=500, seed=3, workers=1)[0]
        cdfs = [(sups <= u).mean() for u in (1.0, 1.5, 2.0, 2.5)]
        assert all(b >= a for a, b in zip(cdfs, cdfs[1:]))

    def test_cdf_monotone_in_nested_sets(self):
        big = JordanSet.box((0.0, 0.0), (2.0, 2.0))
        small = JordanSet.box((0.0, 0.0), (1.0, 1.0))
        grid = build_grid([(0.0, 2.0), (0.0, 2.0)], SEP2.alphas, 0.25, 2.0)
        sampler = build_sampler(SEP2, grid)
        from extremefields.montecarlo import _grid_mask

        masks = [_grid_mask(small, grid), _grid_mask(big, grid)]
        sups = _collect_sups(sampler, masks, replicates=400, seed=4, workers=1)
        # replicate-wise: sup over the smaller set never exceeds the larger
        assert (sups[0] <= sups[1]).all()
        assert (sups[0] <= 2.0).mean() >= (sups[1] <= 2.0).mean()


class TestTailCheck:
    def test_records_and_floor(self):
        rep = piterbarg_tail_check(SEP2, (2.0, 2.0), (H2, H2), (2.0, 2.5), 3000, seed=7)
        for rec in rep.records:
            # sup over the box dominates a single-point exceedance
            assert rec["empirical_cdf"] >= 0.8 * normal_tail(rec["u"])
            assert rec["ratio"] == rec["empirical_cdf"] / rec["theory_limit"]

    def test_low_exceedance_flag(self):
        rep = piterbarg_tail_check(SEP2, (2.0, 2.0), (H2, H2), (4.5,), 300, seed=7)
        assert rep.metadata["flags"].get("insufficient_exceedances") is True


class TestDiscretizationGap:
    def test_gaps_nonnegative_and_ordered(self):
        rep = discretization_gap(SEP2, JordanSet.unit_cube(2), 2.5, [1.0, 0.5, 0.25],
                                 replicates=400, seed=2)
        recs = {r["a"]: r for r in rep.records}
        assert recs[0.0625]["gap"] == 0.0  # the reference compares to itself
        gaps = [recs[a]["gap"] for a in (1.0, 0.5, 0.25)]
        assert all(g >= 0.0 for g in gaps)
        assert gaps[0] >= gaps[1] >= gaps[2]

    def test_alignment_validation(self):
        with pytest.raises(ValueError, match="integer multiple"):
            discretization_gap(SEP2, JordanSet.unit_cube(2), 2.5, [1.0, 0.3],
                               replicates=100, seed=2)
        with pytest.raises(ValueError, match="decreasing"):
            discretization_gap(SEP2, JordanSet.unit_cube(2), 2.5, [0.5, 1.0],
                               replicates=100, seed=2)


class TestLemma2:
    def test_zero_exactly_at_weak_dependence(self):
        assert lemma2_sum(SEP2, 3.0, 0.25, 0.25, R=0.0, T=math.e**2) == 0.0

    def test_single_term_hand_expansion(self):
        # d = 1, eps/q in (1, 2]: lattice reduces to j = -1 and j = +1
        model = CorrelationModel.separable_stable((2.0,))
        u, a, r_const = 3.0, 0.25, 0.5
        q = a / u
        eps = 1.5 * q
        t_hor = math.exp(u * u / 4.0)
        rho = r_const / math.log(t_hor)
        r = math.exp(-(q**2))
        inner = r + (1 - r) * rho
        term = (1 - r) * rho * (1 - inner**2) ** -0.5 * math.exp(-u * u / (1 + inner))
        m = 1.0 / (H2 * u * normal_tail(u))
        expected = m / q * 2.0 * term
        got = lemma2_sum(model, u, a, eps, r_const, t_hor, pickands_values=(H2,))
        assert got == pytest.approx(expected, rel=1e-12)

    def test_empty_window_is_zero(self):
        model = CorrelationModel.separable_stable((2.0,))
        # eps below one spacing leaves only the origin, which is excluded
        assert lemma2_sum(model, 3.0, 0.25, 0.05, 0.5, math.e**2) == 0.0

    def test_singularity_detected(self):
        # R/log T >= 1 pushes the inner value past 1 and the sqrt argument
        # nonpositive
        with pytest.raises(ValueError, match="eps too large|square-root"):
            lemma2_sum(SEP2, 3.0, 0.25, 0.25, R=2.0, T=math.e)

    def test_nonnegative(self):
        for r_const in (0.1, 0.5, 1.0):
            val = lemma2_sum(SEP2, 3.0, 0.25, 0.25, r_const, math.exp(9.0 / 4.0))
            assert val >= 0.0


class TestLemma3:
    def test_branch_values_enter_the_sum(self):
        # single-point window: T_i chosen so the lattice is {-q, 0, q} and the
        # kept points sit in the near branch where rho_T = 1
        model = CorrelationModel.separable_stable((1.0,))
        u, a = 3.0, 0.25
        q = a / (u * u)
        t_vec = [1.2 * q]
        eps = 0.5 * q  # keeps j = +-1
        val, info = lemma3_sum_detailed(model, u, a, eps, t_vec, R=0.0)
        r = math.exp(-q)
        # near branch: rho_T = 1, varrho_T = |r|
        expected_term = math.exp(-u * u / (1.0 + r))
        expected = (t_vec[0] / q) * 2.0 * expected_term
        assert val == pytest.approx(expected, rel=1e-12)
        assert not info["strided"]

    def test_far_branch_uses_rho(self):
        # with eps > 1 every kept point is in the far branch; R > 0 keeps
        # rho_T = |r - rho| and the exponent denominator 1 + max(|r|, rho)
        model = CorrelationModel.separable_stable((1.0,))
        u, a = 3.0, 1.0
        q = a / (u * u)
        t_vec = [2.0]
        eps = 1.5
        r_const = 0.5
        rho = r_const / math.log(t_vec[0])
        val, _ = lemma3_sum_detailed(model, u, a, eps, t_vec, R=r_const)
        js = np.arange(-int(math.floor(t_vec[0] / q)), int(math.floor(t_vec[0] / q)) + 1) * q
        keep = np.abs(js) >= eps
        r = np.exp(-np.abs(js[keep]))
        far = np.abs(js[keep]) >= 1.0
        rho_t = np.where(far, np.abs(r - rho), 1.0)
        varrho = np.where(far, rho, np.abs(r) + (1 - r) * rho)
        expected = (t_vec[0] / q) * float(
            (rho_t * np.exp(-u * u / (1.0 + np.maximum(np.abs(r), varrho)))).sum()
        )
        assert val == pytest.approx(expected, rel=1e-10)

    def test_stride_flag_and_budget(self):
        model = CorrelationModel.separable_stable((1.0,))
        t_vec = [50_000.0]
        val, info = lemma3_sum_detailed(model, 3.0, 0.25, 0.25, t_vec, R=0.0, budget=2**16)
        assert info["strided"] and info["stride"] > 1
        assert val >= 0.0
        with pytest.raises(BudgetError):
            lemma3_sum_detailed(model, 3.0, 0.25, 0.25, t_vec, R=0.0, budget=2**16,
                                allow_stride=False)

    def test_study_wrapper(self):
        model = CorrelationModel.separable_stable((2.0,))
        rep = lemma_sum_study(
            2, model, [3.0, 4.0], 0.25, 0.25, 0.5,
            T_for_u=lambda u: math.exp(u * u / 4.0), pickands_values=(H2,),
        )
        assert rep.lemma == 2
        assert len(rep.sum_values) == 2
        assert rep.csv_text().splitlines()[0] == "u,sum,component"


class TestCorollary:
    def test_szybko_control_arm_matches_covered_regime(self):
        cfg = small_config(u_values=(2.5,), replicates=300)
        rep = corollary_experiments("szybko", cfg, kappa=0.0)
        rec = rep.records[0]
        # kappa = 0 keeps the product constraint and the standard limit
        assert rec["theory_limit"] == pytest.approx(math.exp(-1.0), rel=1e-12)
        assert rec["m_values"][0] == 1.0

    def test_szybko_shrinks_first_coordinate(self):
        cfg = small_config(u_values=(2.5, 3.0), replicates=200)
        rep = corollary_experiments("szybko", cfg, kappa=0.125)
        m1 = [r["m_values"][0] for r in rep.records]
        assert m1[0] == pytest.approx(math.exp(-0.125 * 6.25), rel=1e-12)
        assert m1[1] < m1[0]
        assert all(r["theory_limit"] == 0.0 for r in rep.records)
        assert "decreasing" in rep.metadata["verdict"]
        # the compensation keeps the window volume at m(u)
        from extremefields.limit_law import tail_constant_m

        for rec in rep.records:
            m_prod = float(np.prod(rec["m_values"]))
            tail = tail_constant_m(rec["u"], (2.0, 2.0), (H2, H2))
            assert m_prod == pytest.approx(tail.m, rel=1e-10)

    def test_wolno_conjecture_labels(self):
        cfg = small_config(u_values=(2.5, 3.0), replicates=200)
        rep = corollary_experiments(
            "wolno", cfg, shrink=(RateDescriptor(power=-1.0, log_power=1.0),),
        )
        assert rep.metadata["verdict"]["conjecture_conditional"] is True
        m1 = [r["m_values"][0] for r in rep.records]
        assert m1[0] == pytest.approx(math.log(2.5) / 2.5, rel=1e-12)
        for rec in rep.records:
            assert rec["theory_limit"] == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_validation(self):
        cfg = small_config()
        with pytest.raises(ValueError):
            corollary_experiments("nope", cfg)
        with pytest.raises(ValueError):
            corollary_experiments("wolno", cfg, shrink=())


class TestConvergenceStudy:
    def test_verdict_wiring(self):
        cfg = small_config(u_values=(2.0, 2.25, 2.5), replicates=300)
        rep = convergence_study(cfg)
        verdict = rep.metadata["verdict"]
        disc = [abs(r["empirical_cdf"] - r["theory_limit"]) for r in rep.records]
        width = rep.records[0]["wilson_ci_high"] - rep.records[0]["wilson_ci_low"]
        assert verdict["discrepancies"] == disc
        assert verdict["trend_ok"] == (disc[-1] <= disc[0] + width)

    def test_needs_increasing_ladder(self):
        with pytest.raises(ValueError):
            convergence_study(small_config(u_values=(2.5, 2.0, 3.0)))
        with pytest.raises(ValueError):
            convergence_study(small_config(u_values=(2.0, 2.5)))
