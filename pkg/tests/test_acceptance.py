"""Acceptance suite: one test per contracted criterion, at full scale.

Each test prints a single verdict line once its assertions hold, so a
verbose run (``pytest tests/test_acceptance.py -v -s``) reads as a
checklist.  Tolerances are fixed here, not imported from the library.
"""

import json
import math

import numpy as np
import shiftmix as sm
from shiftmix import halfplane as hp
from shiftmix import mixing
from shiftmix.cli import main as cli_main
from shiftmix.fourier import (
    TensorIndex,
    coefficient_envelope_constant,
    linear_fourier_table,
    mc_fourier_coefficient,
)
from shiftmix.observables import linear_functional, with_exact_mean_subtracted
from shiftmix.sampling import SamplerState, sample_window
from shiftmix.shift import LpVector, apply_section, canonical_shift
from shiftmix.weights import build_block_schedule, check_weight_conditions


def report(n: int, msg: str) -> None:
    print(f"[criterion {n:2d}] PASS  {msg}")


def half_dyadic(lo: int, hi: int) -> np.ndarray:
    out, v = [], float(lo)
    while int(round(v)) <= hi:
        g = int(round(v))
        if not out or g > out[-1]:
            out.append(g)
        v *= math.sqrt(2.0)
    return np.array(out)


def test_criterion_01_basis_correctness(weights40, basis40):
    gram = basis40.gram_residual()
    assert gram < 1e-10
    l1 = basis40.l1_norms()
    assert np.all(l1 <= 4.0 * np.sqrt(weights40.p[: basis40.l_max]))
    report(1, f"Gram residual {gram:.2e} < 1e-10; weighted l1 <= 4 sqrt(p)")


def test_criterion_02_conjugacy(model2, weights40):
    state = SamplerState(7)
    residuals = [
        sm.conjugacy_residual(model2, sample_window(weights40, -64, 2, state.substream(r)))
        for r in range(1000)
    ]
    assert max(residuals) == 0.0
    report(2, "conjugacy residual exactly 0 on 1000 aligned windows")


def test_criterion_03_weight_conditions(weights40, chain, model2):
    sched = build_block_schedule(model2, weights40, chain, levels=weights40.length)
    rep = check_weight_conditions(weights40, chain, k_max=20, schedule=sched)
    assert rep.tail_domination.constant <= 0.5
    assert rep.sqrt_moment.constant <= 4.0
    assert rep.moment.constant <= 4.0
    assert rep.amplitude_caps.constant <= 1.0
    for d in (1, 2, 3):
        assert rep.block_sum[d]["converged"]
    report(
        3,
        f"tail ratio {rep.tail_domination.constant:.3f} <= 1/2; "
        f"fitted constants {rep.sqrt_moment.constant:.2f}, {rep.moment.constant:.2f} <= 4; "
        "amplitude and block-sum conditions hold for d <= 3",
    )


def test_criterion_04_covariance_regimes(chain, weights40):
    lags = half_dyadic(16, 4096)
    depth = 1_000_000
    obs = linear_functional(np.ones(depth + 1))
    slopes = {}
    for alpha, want in ((0.75, -0.5), (2.0, -2.0)):
        model = canonical_shift(alpha, depth=depth, chain=chain)
        rep = mixing.exact_decay_curve(model, weights40, obs, obs, lags)
        fit = mixing.decay_exponent_fit(rep)
        assert abs(fit.slope - want) <= 0.1
        slopes[alpha] = fit.slope
    model1 = canonical_shift(1.0, depth=depth, chain=chain)
    rep1 = mixing.exact_decay_curve(model1, weights40, obs, obs, lags)
    lo, hi = mixing.log_lag_ratio_band(rep1)
    assert hi / lo <= 2.0
    report(
        4,
        f"slopes {slopes[0.75]:.3f} (want -0.5), {slopes[2.0]:.3f} (want -2.0); "
        f"boundary ratio band factor {hi / lo:.2f} <= 2",
    )


def test_criterion_05_oracle_vs_monte_carlo(chain, weights40):
    lags = np.array([1, 2, 4, 8, 16, 32, 64, 128, 256])
    worst = 0.0
    for alpha in (0.75, 1.0, 2.0):
        model = canonical_shift(alpha, depth=256, chain=chain)
        obs = linear_functional(np.ones(257))
        rep = mixing.empirical_covariance(
            model, weights40, obs, obs, lags,
            n_samples=100_000, depth=256, state=SamplerState(5, int(alpha * 100)),
        )
        z = np.max(np.abs(rep.mc - rep.exact) / rep.se)
        worst = max(worst, float(z))
        assert np.all(np.abs(rep.mc - rep.exact) <= 3.0 * rep.se)
    report(5, f"MC within 3 SE of exact at every lag for three alphas (worst z {worst:.2f})")


def test_criterion_06_clt(model2, weights40):
    window = with_exact_mean_subtracted(
        linear_functional(np.ones(257)), model2, weights40
    )
    control = with_exact_mean_subtracted(linear_functional([1.0]), model2, weights40)
    msgs = []
    for name, obs in (("window", window), ("control", control)):
        rep = mixing.clt_experiment(model2, weights40, obs, 4096, 2000, SamplerState(7))
        assert rep.ks_distance < rep.ks_limit
        assert abs(rep.skewness) < rep.skew_limit
        assert abs(rep.excess_kurtosis) < rep.kurtosis_limit
        assert abs(rep.sigma2_hat - rep.sigma2_series) <= 0.1 * rep.sigma2_series
        msgs.append(f"{name}: KS {rep.ks_distance:.4f} < {rep.ks_limit:.4f}")
    report(6, "; ".join(msgs))


def test_criterion_07_martingale_diagnostics(chain, weights40, basis40):
    model = canonical_shift(2.0, depth=4096, chain=chain)
    table = linear_fourier_table(model, basis40, np.ones(4097))
    grid = np.array([4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096])
    d = mixing.conditional_norm_diagnostics(table, grid)
    known_r = d.cauchy_ratios("known")
    resid_r = d.cauchy_ratios("residual")
    assert np.all(known_r >= 1.5)
    assert np.all(resid_r >= 1.5)
    env = np.maximum(grid.astype(float) ** (3.0 - 4.0), np.log(grid + 1.0))
    c_fit = d.residual_sq / env
    assert int(np.argmax(c_fit)) < len(grid) - 3  # constant settled early
    tail = c_fit[len(grid) // 2 :]
    assert float(tail.max() / tail.min()) < 2.0
    report(
        7,
        f"both summand series Cauchy (min dyadic ratios {known_r.min():.2f}, "
        f"{resid_r.min():.2f} >= 1.5); envelope constant stable "
        f"(tail spread {tail.max() / tail.min():.2f} < 2)",
    )


def test_criterion_08_window_power_constants():
    grid = [4, 16, 64, 256, 1024, 4096]
    fc15 = mixing.window_tail_constants(1.5, grid)
    assert fc15.stated_spread() < 2.0
    # above the 3/2 threshold the left side saturates, so stability is
    # measured against the constant regime of the same estimate
    fc20 = mixing.window_tail_constants(2.0, grid)
    assert fc20.regime_spread() < 2.0
    for n in range(1, 9):
        lhs, rhs = mixing.fact2_bruteforce(2.0, n)
        assert lhs <= rhs
    report(
        8,
        f"window-sum constants stable (spreads {fc15.stated_spread():.2f}, "
        f"{fc20.regime_spread():.2f} < 2); factored square bound holds for n <= 8",
    )


def test_criterion_09_coefficient_identities(model2, weights40, basis40, amp_moments):
    obs = linear_functional(np.ones(9))
    est, se = mc_fourier_coefficient(
        obs, model2, weights40, basis40, TensorIndex((1, 1), (-3, 0)),
        400_000, SamplerState(2), depth=8,
    )
    assert abs(est) <= 3.0 * se
    consts = [
        coefficient_envelope_constant(
            linear_fourier_table(model2, basis40, np.ones(dd + 1)), model2
        )
        for dd in (64, 128, 256)
    ]
    assert max(consts) / min(consts) < 1.1
    _, var = amp_moments
    t = linear_fourier_table(model2, basis40, [1.0])
    parseval = abs(float(np.dot(t.level_factors, t.level_factors)) - var)
    assert parseval <= 1e-10
    report(
        9,
        f"pair coefficient of a linear observable within 3 SE of 0; envelope "
        f"constant stable across truncations; Parseval defect {parseval:.1e} <= 1e-10",
    )


def test_criterion_10_halfplane():
    one = hp.h2_norm(lambda t: 1.0, hp.QuadratureConfig(tolerance=1e-8))
    assert abs(one.value - 1.0) <= 1e-8
    cauchy = hp.h2_norm(hp.DecayedFunction(decay_power=1))
    assert abs(cauchy.value**2 - 0.375) <= 1e-8
    fit = hp.translation_decay_fit(4, [8, 16, 32, 64, 128, 256, 512])
    assert 0.9 <= fit.exponent <= 1.1
    assert fit.exponent >= 8.0 / 9.0
    ratios = [hp.envelope_sum_check(4, np.ones(km), km).ratio for km in (16, 32, 64)]
    assert max(ratios) / min(ratios) <= 1.5
    for k in range(1, 65):
        assert hp.partner_count(k, 4 * k) <= 4.0 * k**0.25
    report(
        10,
        f"norms exact to 1e-8; decay exponent {fit.exponent:.3f} in [0.9, 1.1] "
        f"above 8/9; envelope ratio spread {max(ratios) / min(ratios):.3f}; "
        "partner counts within 4 k^(1/4)",
    )


def test_criterion_11_support_probe(model2, weights40):
    targets = [
        ("zero", LpVector(scaled=np.zeros(1), model=model2)),
        ("seed2", apply_section(model2, 2, 0)),
        ("seed2-depth1", apply_section(model2, 2, 1)),
    ]
    state = SamplerState(11)
    parts = []
    for i, (name, target) in enumerate(targets):
        rep = sm.support_probe(
            model2, weights40, target, delta=0.25, samples=2000, state=state.substream(i)
        )
        assert rep.empirical > 0.0
        assert rep.analytic_lower_bound > 0.0
        parts.append(f"{name} {rep.empirical:.3f}/{rep.analytic_lower_bound:.4f}")
    report(11, "positive empirical/analytic mass: " + ", ".join(parts))


def test_criterion_12_determinism(tmp_path):
    def artifacts(out):
        return [(out / n).read_bytes() for n in ("report.json", "data.csv", "manifest.replay")]

    recipes = [
        ["clt", "--R", "150", "--N", "512", "--seed", "9"],
        ["cov-decay", "--mc", "--alpha", "2", "--R", "4000",
         "--lags", "1,2,4,8,16", "--depth", "32", "--seed", "3"],
        ["support-probe", "--R", "200", "--seed", "5"],
    ]
    for i, recipe in enumerate(recipes):
        outs = [tmp_path / f"{i}-{tag}" for tag in ("a", "b", "w")]
        cli_main(recipe + ["--out", str(outs[0])])
        cli_main(recipe + ["--out", str(outs[1])])
        cli_main(recipe + ["--workers", "6", "--out", str(outs[2])])
        base = artifacts(outs[0])
        assert artifacts(outs[1]) == base
        assert artifacts(outs[2]) == base
    report(12, "manifest re-runs byte-identical, worker count included")
