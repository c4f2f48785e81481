"""Manifest-driven experiment runner.

Every subcommand resolves its parameters from defaults, then an optional
manifest file (flat ``key = value`` lines), then explicit flags, and writes
three artifacts into the output directory: ``report.json`` with the summary
and pass flags, ``data.csv`` with the per-point numbers, and
``manifest.replay`` with the canonical manifest that reproduces the run
byte for byte.  The exit status is 0 exactly when every contracted
tolerance of the subcommand holds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import basis as basis_mod
from . import halfplane as hp
from . import mixing, observables, sampling, shift, weights

EXPERIMENTS = (
    "weights-check",
    "basis-check",
    "cov-decay",
    "clt",
    "mw",
    "facts",
    "halfplane-decay",
    "envelope-check",
    "support-probe",
)

_FIELDS: dict[str, tuple[type, object]] = {
    # name: (type, default)
    "seed": (int, 7),
    "streams": (int, 0),  # base stream family of the master sampler state
    "alpha": (float, 2.0),
    "p_exp": (float, 2.0),
    "depth": (int, None),
    "L": (int, 40),
    "d_max": (int, 3),
    "growth": (str, "log"),
    "N": (int, 4096),
    "R": (int, 2000),
    "lags": (str, "16:4096"),
    "exact": (bool, True),
    "functional": (str, "ones"),
    "delta": (float, 0.25),
    "p": (int, 4),
    "k_grid": (str, "8:512"),
    "kmax_list": (str, "16,32,64"),
    "n_grid": (str, "4:4096"),
    "tolerance": (float, 1e-10),
    "workers": (int, 1),
    "out": (str, "out"),
}


class ManifestError(ValueError):
    pass


def parse_manifest(path: str) -> dict:
    values = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ManifestError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key == "experiment":
            if val not in EXPERIMENTS:
                raise ManifestError(f"{path}:{lineno}: unknown experiment {val!r}")
            values[key] = val
            continue
        if key not in _FIELDS:
            raise ManifestError(f"{path}:{lineno}: unknown field {key!r}")
        typ, _ = _FIELDS[key]
        try:
            if typ is bool:
                values[key] = val.lower() in ("1", "true", "yes", "on")
            else:
                values[key] = typ(val)
        except ValueError:
            raise ManifestError(
                f"{path}:{lineno}: field {key!r} expects {typ.__name__}, got {val!r}"
            ) from None
    return values


# execution knobs that do not determine a single result byte
_NON_IDENTITY = ("out", "workers")


def canonical_manifest(experiment: str, params: dict) -> str:
    lines = [f"experiment = {experiment}"]
    for key in sorted(params):
        v = params[key]
        if v is None or key in _NON_IDENTITY:
            continue
        lines.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
    return "\n".join(lines) + "\n"


def _parse_grid(text: str) -> list[int]:
    """Either a comma list or 'lo:hi' doubling from lo to hi."""
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":")[:2])
        out, v = [], lo
        while v <= hi:
            out.append(v)
            v *= 2
        return out
    return [int(x) for x in text.split(",")]


def _build_stack(params):
    chain = weights.build_growth_chain(params["growth"], 128)
    w = weights.build_symbol_weights(chain, d_max=params["d_max"], length=params["L"])
    depth = params["depth"] if params["depth"] is not None else 256
    model = shift.canonical_shift(
        params["alpha"], params["p_exp"], depth=depth, chain=chain
    )
    return chain, w, model


def _ones_functional(depth: int) -> observables.Observable:
    return observables.linear_functional(np.ones(depth + 1), descriptor=f"ones[{depth}]")


def _pick_functional(name: str, depth: int) -> observables.Observable:
    if name == "ones":
        return _ones_functional(depth)
    if name == "delta0":
        return observables.linear_functional([1.0], descriptor="delta0")
    return observables.parse_observable(name)


# ---------------------------------------------------------------------------
# experiment bodies: each returns (results dict, csv header, csv rows, passed)


def _run_weights_check(params):
    chain, w, model = _build_stack(params)
    schedule = weights.build_block_schedule(model, w, chain, levels=w.length)
    report = weights.check_weight_conditions(w, chain, k_max=20, schedule=schedule)
    beta_sq = math.exp(schedule.log_beta_sq_sum)
    results = {
        "tail_ratio_max": report.tail_domination.constant,
        "sqrt_moment_constant": report.sqrt_moment.constant,
        "moment_constant": report.moment.constant,
        "amplitude_cap_constant": report.amplitude_caps.constant,
        "block_sums": {str(d): v for d, v in report.block_sum.items()},
        "beta_sq_product": beta_sq,
    }
    passed = (
        report.tail_domination.constant <= 0.5
        and report.sqrt_moment.constant <= 4.0
        and report.moment.constant <= 4.0
        and report.amplitude_caps.constant <= 1.0
        and all(v["converged"] for v in report.block_sum.values())
        and beta_sq > 0.5
    )
    rows = []
    for fit in (report.sqrt_moment, report.moment):
        for kk, c in enumerate(fit.per_k, start=1):
            rows.append(f"{fit.name},{kk},{float(c)!r}")
    return results, "condition,k,constant", rows, passed


def _run_basis_check(params):
    chain, w, _ = _build_stack(params)
    b = basis_mod.build_basis(w)
    gram = b.gram_residual()
    l1 = b.l1_norms()
    ratios = l1 / np.sqrt(w.p[: b.l_max])
    results = {
        "gram_residual": gram,
        "l1_constant": float(ratios.max()),
        "levels": b.l_max,
    }
    passed = gram < params["tolerance"] and float(ratios.max()) <= 4.0
    rows = [f"{l},{l1[l-1]!r},{math.sqrt(w.p[l-1])!r}" for l in range(1, b.l_max + 1)]
    print(f"max |Gram - I| = {gram:.3e}")
    return results, "l,l1_norm,sqrt_p", rows, passed


def _expected_slope(alpha: float) -> float | None:
    if alpha > 1.0:
        return -alpha
    if alpha < 1.0:
        return 1.0 - 2.0 * alpha
    return None


def _run_cov_decay(params):
    alpha = params["alpha"]
    lags = _parse_grid(params["lags"])
    chain = weights.build_growth_chain(params["growth"], 128)
    w = weights.build_symbol_weights(chain, d_max=params["d_max"], length=params["L"])
    if params["exact"]:
        depth = params["depth"] if params["depth"] is not None else 1_048_576
        model = shift.canonical_shift(alpha, params["p_exp"], depth=depth, chain=chain)
        obs = _pick_functional(params["functional"], depth)
        # half-dyadic grid through the lag range for a stable fit
        grid, v = [], float(lags[0])
        while int(round(v)) <= lags[-1]:
            g = int(round(v))
            if not grid or g > grid[-1]:
                grid.append(g)
            v *= math.sqrt(2.0)
        report = mixing.exact_decay_curve(model, w, obs, obs, np.array(grid))
    else:
        depth = params["depth"] if params["depth"] is not None else 256
        model = shift.canonical_shift(alpha, params["p_exp"], depth=depth, chain=chain)
        obs = _pick_functional(params["functional"], depth)
        report = mixing.empirical_covariance(
            model, w, obs, obs, np.array(lags), n_samples=params["R"],
            depth=depth, state=sampling.SamplerState(params["seed"], params["streams"]),
            workers=params["workers"],
        )
    results: dict = {"alpha": alpha, "lags": [int(x) for x in report.lags]}
    expected = _expected_slope(alpha)
    passed = True
    if expected is not None:
        fit = mixing.decay_exponent_fit(report)
        tol = 0.1 if params["exact"] else 0.2
        results.update(
            {
                "slope": fit.slope,
                "slope_ci": fit.ci,
                "expected_slope": expected,
                "slope_source": "exact" if report.exact is not None else "mc",
            }
        )
        if report.exact is not None and report.mc is not None:
            # a sampled fit is only meaningful on lags above the noise floor
            mc_only = mixing.DecayReport(
                lags=report.lags, mc=report.mc, se=report.se, exact=None,
                alpha=report.alpha, n_samples=report.n_samples,
            )
            try:
                results["slope_mc"] = mixing.decay_exponent_fit(mc_only).slope
            except ValueError as exc:
                results["slope_mc"] = None
                results["slope_mc_note"] = str(exc)
        passed = abs(fit.slope - expected) <= tol
        print(f"fitted slope {fit.slope:.4f} +/- {fit.ci:.4f} (expected {expected:+.2f})")
    else:
        lo, hi = mixing.log_lag_ratio_band(report)
        results.update({"ratio_band": [lo, hi], "band_factor": hi / lo})
        passed = hi / lo <= 2.0
        print(f"cov*n/log(n+1) band [{lo:.4g}, {hi:.4g}] factor {hi/lo:.3f}")
    if report.mc is not None and report.exact is not None:
        agree = np.all(np.abs(report.mc - report.exact) <= 3.0 * report.se)
        results["mc_exact_within_3se"] = bool(agree)
        passed = passed and bool(agree)
    return results, "lag,cov,se,exact", list(report.csv_rows()), passed


def _run_clt(params):
    chain, w, model = _build_stack(params)
    depth = model.depth if params["functional"] == "ones" else 0
    obs = _pick_functional(params["functional"], depth)
    obs = observables.with_exact_mean_subtracted(obs, model, w)
    report = mixing.clt_experiment(
        model, w, obs, n_steps=params["N"], replicas=params["R"],
        state=sampling.SamplerState(params["seed"], params["streams"]),
        workers=params["workers"],
    )
    results = {
        "ks": report.ks_distance,
        "ks_limit": report.ks_limit,
        "skewness": report.skewness,
        "skew_limit": report.skew_limit,
        "excess_kurtosis": report.excess_kurtosis,
        "kurtosis_limit": report.kurtosis_limit,
        "sigma2_hat": report.sigma2_hat,
        "sigma2_series": report.sigma2_series,
        "degenerate": report.degenerate,
    }
    print(
        f"KS {report.ks_distance:.4f} (limit {report.ks_limit:.4f}); "
        f"skew {report.skewness:+.4f}; exkurt {report.excess_kurtosis:+.4f}; "
        f"sigma2 {report.sigma2_hat:.5g} vs series {report.sigma2_series}"
    )
    return results, "replica,value", list(report.csv_rows()), report.passed


def _run_mw(params):
    grid = _parse_grid(params["n_grid"])
    if params["depth"] is None:
        params = dict(params, depth=max(grid))  # no saturation below the horizon
    chain, w, model = _build_stack(params)
    b = basis_mod.build_basis(w)
    obs = _ones_functional(model.depth)
    table = mixing.linear_fourier_table(model, b, obs.coefs)
    diag = mixing.conditional_norm_diagnostics(table, np.array(grid))
    tail = max(2, len(grid) // 2)
    known_ratios = diag.cauchy_ratios("known")[-tail:]
    resid_ratios = diag.cauchy_ratios("residual")[-tail:]
    env = np.maximum(
        diag.n_grid.astype(float) ** (3.0 - 2.0 * model.alpha), np.log(diag.n_grid + 1.0)
    )
    c_fit = diag.residual_sq / env
    peak_early = int(np.argmax(c_fit)) < len(grid) - max(1, len(grid) // 4)
    tail_spread = float(c_fit[-tail:].max() / c_fit[-tail:].min())
    results = {
        "n_grid": [int(n) for n in diag.n_grid],
        "known_cauchy_min_ratio": float(np.min(known_ratios)),
        "residual_cauchy_min_ratio": float(np.min(resid_ratios)),
        "envelope_constant_peak_early": peak_early,
        "envelope_constant_tail_spread": tail_spread,
    }
    passed = (
        float(np.min(known_ratios)) >= 1.5
        and float(np.min(resid_ratios)) >= 1.5
        and peak_early
        and tail_spread < 2.0
    )
    rows = [
        f"{int(n)},{float(diag.known_sq[i])!r},{float(diag.residual_sq[i])!r},"
        f"{float(diag.known_summand[i])!r},{float(diag.residual_summand[i])!r},"
        f"{float(diag.known_partial[i])!r},{float(diag.residual_partial[i])!r}"
        for i, n in enumerate(diag.n_grid)
    ]
    header = "n,known_sq,residual_sq,known_summand,residual_summand,known_partial,residual_partial"
    return results, header, rows, passed


def _run_facts(params):
    alpha = params["alpha"]
    grid = _parse_grid(params["n_grid"])
    fc = mixing.window_tail_constants(alpha, grid)
    f2 = [(n, *mixing.fact2_bruteforce(alpha, n)) for n in range(1, 9)]
    results = {
        "stated_spread": fc.stated_spread(),
        "regime_spread": fc.regime_spread(),
        "sup_attained_early": fc.sup_attained_early(),
        "fact2_ok": all(l <= r for _, l, r in f2),
    }
    passed = fc.regime_spread() < 2.0 and results["fact2_ok"]
    rows = [
        f"{int(n)},{float(fc.lhs[i])!r},{float(fc.c_stated[i])!r},{float(fc.c_regime[i])!r}"
        for i, n in enumerate(fc.n_grid)
    ]
    return results, "n,lhs,c_stated,c_regime", rows, passed


def _run_halfplane_decay(params):
    grid = _parse_grid(params["k_grid"])
    fit = hp.translation_decay_fit(params["p"], grid)
    results = {
        "exponent": fit.exponent,
        "guaranteed": fit.guaranteed,
    }
    passed = 0.9 <= fit.exponent <= 1.1 and fit.exponent >= fit.guaranteed
    rows = [
        f"{int(k)},{float(fit.norms[i])!r},{float(fit.errors[i])!r}"
        for i, k in enumerate(fit.ks)
    ]
    print(f"fitted decay exponent {fit.exponent:.4f} (guaranteed {fit.guaranteed:.4f})")
    return results, "k,norm,error_estimate", rows, passed


def _run_envelope_check(params):
    kmaxes = [int(x) for x in params["kmax_list"].split(",")]
    checks = [hp.envelope_sum_check(params["p"], np.ones(km), km) for km in kmaxes]
    ratios = [c.ratio for c in checks]
    counts_ok = all(
        hp.partner_count(k, 4 * k) <= 4.0 * k**0.25 for k in range(1, 65)
    )
    results = {
        "ratios": ratios,
        "ratio_spread": max(ratios) / min(ratios),
        "neighbor_counts_ok": counts_ok,
    }
    passed = max(ratios) / min(ratios) <= 1.5 and counts_ok
    rows = [f"{c.k_max},{c.lhs!r},{c.rhs!r},{c.ratio!r}" for c in checks]
    return results, "k_max,lhs,rhs,ratio", rows, passed


def _run_support_probe(params):
    chain, w, model = _build_stack(params)
    targets = [
        ("zero", shift.LpVector(scaled=np.zeros(1), model=model)),
        ("seed2", shift.apply_section(model, 2, 0)),
        ("seed2-depth1", shift.apply_section(model, 2, 1)),
    ]
    state = sampling.SamplerState(params["seed"], params["streams"])
    rows, results, passed = [], {}, True
    for i, (name, target) in enumerate(targets):
        rep = sampling.support_probe(
            model, w, target, params["delta"], params["R"], state.substream(i)
        )
        rows.append(f"{name},{rep.empirical!r},{rep.analytic_lower_bound!r}")
        results[name] = {
            "empirical": rep.empirical,
            "analytic": rep.analytic_lower_bound,
            "hits": rep.hits,
        }
        passed = passed and rep.empirical > 0 and rep.analytic_lower_bound > 0
    return results, "target,empirical,analytic", rows, passed


_RUNNERS = {
    "weights-check": _run_weights_check,
    "basis-check": _run_basis_check,
    "cov-decay": _run_cov_decay,
    "clt": _run_clt,
    "mw": _run_mw,
    "facts": _run_facts,
    "halfplane-decay": _run_halfplane_decay,
    "envelope-check": _run_envelope_check,
    "support-probe": _run_support_probe,
}


def run_experiment(experiment: str, params: dict) -> int:
    replay = canonical_manifest(experiment, params)
    digest = hashlib.sha256(replay.encode()).hexdigest()
    results, header, rows, passed = _RUNNERS[experiment](params)

    out = Path(params["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.replay").write_text(replay)
    report = {
        "experiment": experiment,
        "manifest_hash": digest,
        "params": {
            k: v
            for k, v in sorted(params.items())
            if v is not None and k not in _NON_IDENTITY
        },
        "results": results,
        "passed": passed,
    }
    (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    csv_lines = [f"# manifest_hash={digest}", header, *rows]
    (out / "data.csv").write_text("\n".join(csv_lines) + "\n")
    print(f"{experiment}: {'PASS' if passed else 'FAIL'} -> {out}")
    return 0 if passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="shiftmix", description="deterministic mixing and CLT experiments"
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--manifest", default=None)
        for field, (typ, _) in _FIELDS.items():
            flag = "--" + field.replace("_", "-")
            if typ is bool:
                group = sp.add_mutually_exclusive_group()
                group.add_argument(flag, dest=field, action="store_true", default=None)
                group.add_argument(
                    "--mc" if field == "exact" else f"--no-{field}",
                    dest=field,
                    action="store_false",
                    default=None,
                )
            else:
                sp.add_argument(flag, dest=field, type=typ, default=None)

    args = parser.parse_args(argv)
    params = {k: v for k, (t, v) in _FIELDS.items()}
    try:
        if args.manifest:
            loaded = parse_manifest(args.manifest)
            exp = loaded.pop("experiment", args.experiment)
            if exp != args.experiment:
                raise ManifestError(
                    f"manifest experiment {exp!r} does not match subcommand {args.experiment!r}"
                )
            params.update(loaded)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for field in _FIELDS:
        v = getattr(args, field, None)
        if v is not None:
            params[field] = v
    try:
        return run_experiment(args.experiment, params)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
