"""Experiment-layer tests at small scale: closed forms at beta = 0,
brute-force assembly oracles, and statistics helpers."""

import math

import numpy as np
import pytest

from pamlab.box import Box
from pamlab.errors import CoverageError
from pamlab.evolution import backward_partition, make_plan, solve_cauchy
from pamlab.experiments import (attraction_experiment, bootstrap_ci,
                                cocycle_apply, estimate_limit_Z,
                                factorization_residual,
                                fit_powerlaw_exponent,
                                fit_quadratic_coefficient, probe_sites,
                                residual_profile, sigma_decomposition,
                                stationarity_check, stationary_pair,
                                tail_probability, wilson_interval)
from pamlab.kernels import kernel_table
from pamlab.noise import NoiseField
from pamlab.profiles import (FunctionClassSpec, profile_constant,
                             profile_exp_growth)

DIM, DT, BETA = 3, 0.05, 0.2


def make_noise(radius=10, t_start=-12.0, t_end=16.0, seed=9, **kw):
    return NoiseField(DIM, radius, t_start, t_end, DT, seed, **kw)


def test_limit_values_trivial_at_beta_zero():
    plan = make_plan(DIM, DT, 0.0, 12)
    nf = make_noise(radius=12)
    rec = estimate_limit_Z((0, 0, 0), 0.0, nf, plan, [2.0, 4.0])
    assert rec.results["Z_T=2"] == pytest.approx(1.0, abs=1e-8)
    assert rec.results["Z_T=4"] == pytest.approx(1.0, abs=1e-8)
    assert abs(rec.results["diff_T=2_4"]) < 1e-8


def test_limit_horizons_must_increase():
    plan = make_plan(DIM, DT, BETA, 6)
    with pytest.raises(ValueError):
        estimate_limit_Z((0, 0, 0), 0.0, make_noise(radius=6), plan,
                         [4.0, 2.0])


def test_residual_zero_at_beta_zero():
    plan = make_plan(DIM, DT, 0.0, 14)
    nf = make_noise(radius=14)
    rec = factorization_residual((1, 0, 0), 0.0, (0, 0, 0), 4.0, nf, plan,
                                 S_burn=4.0, T_burn=4.0)
    assert abs(rec.results["delta"]) < 1e-4
    assert rec.results["Z_inf"] == pytest.approx(1.0, abs=1e-6)
    assert rec.results["Z_minus_inf"] == pytest.approx(1.0, abs=1e-6)


def test_residual_endpoint_separation_enforced():
    plan = make_plan(DIM, DT, BETA, 10)
    with pytest.raises(CoverageError):
        factorization_residual((6, 0, 0), 0.0, (0, 0, 0), 4.0,
                               make_noise(), plan, 4.0, 4.0)
    with pytest.raises(ValueError):
        factorization_residual((1, 0, 0), 0.0, (0, 0, 0), 4.0,
                               make_noise(), plan, 4.0, 4.0, sigma=0.5)


def test_residual_profile_matches_scalar_op():
    plan = make_plan(DIM, DT, BETA, 10)
    nf = make_noise()
    probes, deltas = residual_profile((0, 0, 0), 0.0, 4.0, nf, plan, plan,
                                      plan, 8.0, 8.0)
    for x in [(1, 0, 0), (0, 0, 0), (-2, 1, 0)]:
        rec = factorization_residual(x, 0.0, (0, 0, 0), 4.0, nf, plan,
                                     S_burn=8.0, T_burn=8.0)
        i = int(np.where((probes == x).all(axis=1))[0][0])
        assert deltas[i] == pytest.approx(rec.results["delta"], rel=1e-10)


def test_residual_brute_force_assembly():
    # reassemble delta from independent forward sweeps of each factor
    from pamlab.evolution import point_to_point_field

    plan = make_plan(DIM, DT, BETA, 8)
    nf = make_noise(radius=8, t_start=-4.0, t_end=6.0)
    x, y, t = (1, 0, 0), (0, 0, 0), 2.0
    rec = factorization_residual(x, 0.0, y, t, nf, plan, S_burn=4.0,
                                 T_burn=4.0)
    z = point_to_point_field(x, 0.0, t, nf, plan).at(y)
    zinf = point_to_point_field(x, 0.0, t + 4.0, nf, plan).total()
    zminf = backward_partition(-4.0, t, nf, plan).at(y)
    p = kernel_table(DIM, t, 8).prob((-1, 0, 0))
    assert z / p - zinf * zminf == pytest.approx(rec.results["delta"],
                                                 rel=1e-10)


def test_decomposition_identity_against_direct_solve():
    plan = make_plan(DIM, DT, BETA, 10)
    nf = make_noise()
    spec = FunctionClassSpec(0.5, 0.5)
    f = profile_exp_growth(Box(DIM, 10), 0.5, 0.5)
    rec = sigma_decomposition(f, (0, 0, 0), 4.0, nf, plan, 0.7, spec,
                              8.0, 8.0)
    total = (rec.results["sigma1"] + rec.results["sigma2"]
             + rec.results["sigma3"])
    assert total == pytest.approx(rec.results["u_f"], rel=1e-10)
    direct = solve_cauchy(f, 0.0, 4.0, nf, plan).at((0, 0, 0))
    assert direct == pytest.approx(rec.results["u_f"], rel=1e-10)


def test_decomposition_closed_forms_at_beta_zero():
    plan = make_plan(DIM, DT, 0.0, 14)
    nf = make_noise(radius=14)
    spec = FunctionClassSpec(0.5, 0.5)
    f = profile_constant(Box(DIM, 14))
    t, sigma = 4.0, 0.7
    rec = sigma_decomposition(f, (0, 0, 0), t, nf, plan, sigma, spec,
                              4.0, 4.0)
    table = kernel_table(DIM, t, 14)
    ball = Box(DIM, 14).eucl_norm <= t ** sigma
    in_ball = float(table.values[ball].sum())
    assert abs(rec.results["B"]) < 1e-4
    assert rec.results["D"] == pytest.approx(in_ball, rel=1e-4)
    assert rec.results["C"] == pytest.approx(
        (rec.results["u_f"] - in_ball) / in_ball, rel=1e-2)


def test_decomposition_rejects_class_violation():
    plan = make_plan(DIM, DT, BETA, 10)
    spec = FunctionClassSpec(0.1, 0.9)
    f = profile_exp_growth(Box(DIM, 10), 0.5, 0.5)  # too large for spec
    with pytest.raises(ValueError):
        sigma_decomposition(f, (0, 0, 0), 4.0, make_noise(), plan, 0.7,
                            spec, 8.0, 8.0)


def test_attraction_invariant_profile_has_zero_discrepancy():
    # starting from the backward profile itself, both ratios coincide
    plan = make_plan(DIM, DT, BETA, 10)
    nf = make_noise()
    f = backward_partition(-8.0, 0.0, nf, plan).normalize()
    rec = attraction_experiment(f, (1, 0, 0), [1.0, 2.0, 4.0], nf, plan,
                                S_burn=8.0)
    for t in (1.0, 2.0, 4.0):
        assert rec.results[f"disc_t={t:g}"] < 1e-8


def test_attraction_beta_zero_matches_kernel_computation():
    plan = make_plan(DIM, DT, 0.0, 14)
    nf = make_noise(radius=14)
    f = profile_exp_growth(Box(DIM, 14), 0.5, 0.5)
    y, t = (1, 0, 0), 2.0
    rec = attraction_experiment(f, y, [t], nf, plan, S_burn=4.0)
    table = kernel_table(DIM, t, 14)
    num = float((f.values * np.roll(table.values, y,
                                    axis=(0, 1, 2))).sum())
    den = float((f.values * table.values).sum())
    assert rec.results[f"u_ratio_t={t:g}"] == pytest.approx(num / den,
                                                            rel=1e-6)
    assert rec.results[f"z_ratio_t={t:g}"] == pytest.approx(1.0, abs=1e-6)


def test_cocycle_law_and_normalization():
    plan = make_plan(DIM, DT, BETA, 8)
    nf = NoiseField(DIM, 8, -1.0, 3.0, DT, seed=3)
    f = profile_constant(Box(DIM, 8))
    one_step = cocycle_apply(f, 0.0, 0.7, nf, plan)
    assert one_step.at((0, 0, 0)) == 1.0
    two_step = cocycle_apply(one_step, 0.0, 0.55, nf.wiener_shift(0.7), plan)
    direct = cocycle_apply(f, 0.0, 1.25, nf, plan)
    assert np.max(np.abs(two_step.values - direct.values)) < 1e-10
    assert cocycle_apply(f, 0.5, 0.5, nf, plan).at((0, 0, 0)) == 1.0


def test_stationary_pair_shift_consistency():
    # pushing the profile through [0, t] equals sampling at the shifted time
    plan = make_plan(DIM, DT, BETA, 8)
    nf = make_noise(radius=8, t_start=-6.0, t_end=2.0)
    y0, pushed = stationary_pair(nf, plan, 1.0, 4.0)
    y_direct = backward_partition(-4.0, 0.0, nf, plan).normalize()
    p_direct = backward_partition(-4.0, 1.0, nf, plan).normalize()
    probes = probe_sites(DIM)
    assert y0 == pytest.approx([y_direct.at(p) for p in probes], rel=1e-12)
    assert pushed == pytest.approx([p_direct.at(p) for p in probes],
                                   rel=1e-12)


def test_stationarity_beta_zero_distances_vanish():
    plan = make_plan(DIM, DT, 0.0, 10)
    ens = [make_noise(radius=10, t_start=-4.0, t_end=2.0, realization_index=i)
           for i in range(5)]
    rec = stationarity_check(ens, plan, 1.0, 3.0)
    assert rec.results["max_quantile_distance"] < 1e-6


def test_tail_probability_monotone_and_trivial_cases():
    plan = make_plan(DIM, DT, BETA, 8)
    ens = [NoiseField(DIM, 8, 0.0, 4.0, DT, 9, realization_index=i)
           for i in range(50)]
    u = np.linspace(0.0, 1.0, 6)
    rec = tail_probability(4.0, u, ens, plan)
    qs = [rec.results[f"Q_u={v:g}"] for v in u]
    assert all(a >= b for a, b in zip(qs, qs[1:]))
    for v in u:
        assert (rec.results[f"Q_lo_u={v:g}"] <= rec.results[f"Q_u={v:g}"]
                <= rec.results[f"Q_hi_u={v:g}"])
    # beta = 0: Z is 1 up to leakage, so every positive threshold is missed
    plan0 = make_plan(DIM, DT, 0.0, 8)
    rec0 = tail_probability(4.0, [0.1, 0.5], ens[:5], plan0)
    assert rec0.results["Q_u=0.1"] == 0.0
    with pytest.raises(ValueError):
        tail_probability(4.0, u, [], plan)


def test_probe_sites_shape():
    assert probe_sites(3) == ((0, 0, 0), (1, 0, 0), (1, 1, 0), (2, 0, 0))
    assert len(probe_sites(1)) == len(set(probe_sites(1)))


def test_wilson_interval_basics():
    lo, hi = wilson_interval(5, 100)
    assert 0.0 <= lo < 0.05 < hi <= 1.0
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_bootstrap_ci_deterministic_and_covers():
    rng = np.random.default_rng(0)
    vals = rng.normal(3.0, 1.0, size=400)
    a = bootstrap_ci(vals, np.mean, seed=1)
    b = bootstrap_ci(vals, np.mean, seed=1)
    assert a == b
    assert a[0] < 3.0 < a[1]


def test_fit_helpers_recover_synthetic_laws():
    xs = np.array([2.0, 4.0, 8.0, 16.0])
    assert fit_powerlaw_exponent(xs, 5.0 * xs ** -1.7) == pytest.approx(
        -1.7, abs=1e-12)
    u = np.linspace(0.0, 2.0, 9)
    assert fit_quadratic_coefficient(u, 1.0 + 0.3 * u - 0.8 * u * u) == \
        pytest.approx(-0.8, abs=1e-12)
    with pytest.raises(ValueError):
        fit_powerlaw_exponent([1.0, -2.0], [1.0, 1.0])
