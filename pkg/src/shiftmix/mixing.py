"""Covariance decay, central limit behavior, and martingale diagnostics.

Dynamics never iterate the operator on vectors: one window of symbols is
sampled per replica and the operator acts as an index shift inside it, so a
whole Birkhoff sum costs one pass over the window.  Exact covariances come
from the coefficient convolution of the factorized linear tables; Monte
Carlo estimates must agree with them within standard errors, and the CLT
experiments compare standardized Birkhoff sums against a moment-matched
Gaussian.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .basis import TriangularBasis, build_basis
from .fourier import FourierTable, exact_covariance, linear_fourier_table
from .observables import Observable, evaluate, exact_mean
from .sampling import SamplerState, SymbolWindow, sample_symbol_matrix, window_vector
from .shift import ShiftModel
from .weights import SymbolWeights

__all__ = [
    "DecayReport",
    "SlopeFit",
    "empirical_covariance",
    "exact_decay_curve",
    "decay_exponent_fit",
    "log_lag_ratio_band",
    "CltReport",
    "clt_experiment",
    "MartingaleDiagnostics",
    "conditional_norm_diagnostics",
    "FactConstants",
    "window_tail_constants",
    "fact2_bruteforce",
    "regime_envelope",
]


def _run_blocks(n_total: int, block: int, fn, workers: int) -> None:
    """Run fn(start, stop) over fixed-size blocks, possibly on threads.

    Blocks are a constant of the algorithm and every block writes disjoint
    preassigned slices, so results do not depend on the worker count.
    """
    starts = list(range(0, n_total, block))
    if workers <= 1:
        for s in starts:
            fn(s, min(s + block, n_total))
        return
    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(lambda s: fn(s, min(s + block, n_total)), starts))


# ---------------------------------------------------------------------------
# covariance decay


@dataclass(frozen=True)
class DecayReport:
    lags: np.ndarray
    mc: np.ndarray | None
    se: np.ndarray | None
    exact: np.ndarray | None
    alpha: float
    n_samples: int

    def usable_mask(self) -> np.ndarray:
        """Lags whose value stands clear of its error bound (10x)."""
        if self.exact is not None:
            return np.abs(self.exact) > 0
        return np.abs(self.mc) > 10.0 * self.se

    def csv_rows(self):
        for i, lag in enumerate(self.lags):
            mc = repr(float(self.mc[i])) if self.mc is not None else ""
            se = repr(float(self.se[i])) if self.se is not None else ""
            ex = repr(float(self.exact[i])) if self.exact is not None else ""
            yield f"{lag},{mc},{se},{ex}"


def _linear_kernel(obs: Observable, model: ShiftModel) -> np.ndarray:
    c = obs.coefs
    return c / model.W[: len(c)]


def _lag_values(
    obs: Observable, model: ShiftModel, symmat: np.ndarray, idx0: int, lag: int
) -> np.ndarray:
    """Observable values on the lag-shifted realizations of each window row."""
    if obs.kind == "linear":
        k = _linear_kernel(obs, model)
        d = len(k) - 1
        cols = symmat[:, idx0 - lag - d : idx0 - lag + 1]
        amp = model.symbol_alpha[cols]
        return amp @ k[::-1] - obs.mean_shift
    rows = symmat.shape[0]
    out = np.empty(rows)
    # lagging shifts the window, never the realized vector
    depth = min(idx0 - lag, model.depth)
    for r in range(rows):
        v = window_vector(model, SymbolWindow(-depth, 0, symmat[r, idx0 - lag - depth : idx0 - lag + 1]))
        out[r] = evaluate(obs, v)
    return out


def empirical_covariance(
    model: ShiftModel,
    w: SymbolWeights,
    obs_f: Observable,
    obs_g: Observable,
    lags: np.ndarray,
    n_samples: int,
    depth: int | None = None,
    state: SamplerState | None = None,
    basis: TriangularBasis | None = None,
    workers: int = 1,
) -> DecayReport:
    """Monte Carlo lag covariances with standard errors and exact columns.

    Requires window depth at least the largest lag plus the observable
    support depth.  The lag-p value pairs the observable on the shifted
    window against the other observable at lag zero; estimates are centered
    products, so observable means do not need to be removed beforehand.
    """
    lags = np.asarray(sorted(int(x) for x in lags))
    if state is None:
        state = SamplerState(0)
    support = max(obs_f.support_depth, obs_g.support_depth)
    if depth is None:
        depth = support
    if depth < support:
        raise ValueError(f"depth {depth} below observable support {support}")
    max_lag = int(lags.max())
    width = depth + max_lag + 1
    idx0 = width - 1

    chunk = 4096
    g_all = np.empty(n_samples)
    f_all = [np.empty(n_samples) for _ in lags]

    def block(start: int, stop: int) -> None:
        mat = sample_symbol_matrix(w, stop - start, width, state.substream(start // chunk))
        g_all[start:stop] = _lag_values(obs_g, model, mat, idx0, 0)
        for i, lag in enumerate(lags):
            f_all[i][start:stop] = _lag_values(obs_f, model, mat, idx0, int(lag))

    _run_blocks(n_samples, chunk, block, workers)

    g_c = g_all - g_all.mean()
    mc = np.empty(len(lags))
    se = np.empty(len(lags))
    for i in range(len(lags)):
        f_c = f_all[i] - f_all[i].mean()
        prod = f_c * g_c
        mc[i] = prod.mean()
        se[i] = prod.std(ddof=1) / math.sqrt(n_samples)

    exact = None
    if obs_f.kind == "linear" and obs_g.kind == "linear":
        if basis is None:
            basis = build_basis(w)
        tf = linear_fourier_table(model, basis, obs_f.coefs)
        tg = linear_fourier_table(model, basis, obs_g.coefs)
        exact = np.array([exact_covariance(tf, tg, int(p)) for p in lags])

    return DecayReport(
        lags=lags, mc=mc, se=se, exact=exact, alpha=model.alpha, n_samples=n_samples
    )


def exact_decay_curve(
    model: ShiftModel,
    w: SymbolWeights,
    obs_f: Observable,
    obs_g: Observable,
    lags: np.ndarray,
    basis: TriangularBasis | None = None,
) -> DecayReport:
    """Exact covariance decay only, for oracle-grade slope fits."""
    if obs_f.kind != "linear" or obs_g.kind != "linear":
        raise ValueError("exact curves exist for linear observables only")
    if basis is None:
        basis = build_basis(w)
    lags = np.asarray(sorted(int(x) for x in lags))
    tf = linear_fourier_table(model, basis, obs_f.coefs)
    tg = linear_fourier_table(model, basis, obs_g.coefs)
    exact = np.array([exact_covariance(tf, tg, int(p)) for p in lags])
    return DecayReport(lags=lags, mc=None, se=None, exact=exact, alpha=model.alpha, n_samples=0)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    ci: float
    intercept: float
    n_points: int


def decay_exponent_fit(report: DecayReport, lag_window: tuple[int, int] | None = None) -> SlopeFit:
    """Least-squares slope of log |cov| against log lag.

    Only lags whose covariance exceeds ten times its error bound enter the
    fit; fewer than five usable lags is an error, and all-zero covariances
    raise "no signal".
    """
    values = report.exact if report.exact is not None else report.mc
    mask = report.usable_mask() & (np.abs(values) > 0)
    if lag_window is not None:
        lo, hi = lag_window
        mask &= (report.lags >= lo) & (report.lags <= hi)
    if not mask.any():
        raise ValueError("no signal: all covariances statistically zero")
    if mask.sum() < 5:
        raise ValueError(f"only {int(mask.sum())} usable lags; need at least 5")
    x = np.log(report.lags[mask].astype(float))
    y = np.log(np.abs(values[mask]))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    n = int(mask.sum())
    if n > 2 and len(res) > 0:
        s2 = float(res[0]) / (n - 2)
        sx = float(np.sum((x - x.mean()) ** 2))
        ci = 1.96 * math.sqrt(s2 / sx)
    else:
        ci = 0.0
    return SlopeFit(slope=float(coef[0]), ci=ci, intercept=float(coef[1]), n_points=n)


def log_lag_ratio_band(report: DecayReport, lag_window: tuple[int, int] | None = None) -> tuple[float, float]:
    """Spread of cov * lag / log(lag + 1), the boundary-regime diagnostic."""
    values = report.exact if report.exact is not None else report.mc
    mask = report.usable_mask()
    if lag_window is not None:
        lo, hi = lag_window
        mask &= (report.lags >= lo) & (report.lags <= hi)
    lags = report.lags[mask].astype(float)
    ratio = values[mask] * lags / np.log(lags + 1.0)
    return float(ratio.min()), float(ratio.max())


# ---------------------------------------------------------------------------
# central limit experiment


@dataclass(frozen=True)
class CltReport:
    n_steps: int
    replicas: int
    samples: np.ndarray
    ks_distance: float
    ks_limit: float
    skewness: float
    skew_limit: float
    excess_kurtosis: float
    kurtosis_limit: float
    sigma2_hat: float
    sigma2_series: float | None
    degenerate: bool

    @property
    def passed(self) -> bool:
        if self.degenerate:
            return False
        ok = (
            self.ks_distance < self.ks_limit
            and abs(self.skewness) < self.skew_limit
            and abs(self.excess_kurtosis) < self.kurtosis_limit
        )
        if self.sigma2_series is not None and self.sigma2_series > 0:
            ok = ok and abs(self.sigma2_hat - self.sigma2_series) <= 0.1 * self.sigma2_series
        return ok

    def csv_rows(self):
        for r, v in enumerate(self.samples):
            yield f"{r},{float(v)!r}"


def _normal_cdf(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.array([math.erf(t / math.sqrt(2.0)) for t in z]))


def _ks_fitted_normal(samples: np.ndarray) -> float:
    n = len(samples)
    z = np.sort((samples - samples.mean()) / samples.std(ddof=1))
    F = _normal_cdf(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def clt_experiment(
    model: ShiftModel,
    w: SymbolWeights,
    obs: Observable,
    n_steps: int,
    replicas: int,
    state: SamplerState,
    exploratory: bool = False,
    basis: TriangularBasis | None = None,
    workers: int = 1,
) -> CltReport:
    """Distribution of normalized Birkhoff sums over independent replicas.

    The observable must be centered (exact mean zero).  The decay exponent
    must exceed 1, the proven regime, unless the run is explicitly flagged
    exploratory.  Each replica draws a fresh stream; for linear observables
    the whole Birkhoff sum is one dot product against a precomputed kernel.
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas for a usable distribution test")
    if model.alpha <= 1.0 and not exploratory:
        raise ValueError("decay exponent at most 1; pass exploratory=True to force")
    mu = exact_mean(obs, model, w)
    if abs(mu) > 1e-9:
        raise ValueError(f"observable mean {mu!r} is not zero; center it first")

    depth = obs.support_depth
    width = n_steps + depth
    values = np.empty(replicas)
    if obs.kind == "linear":
        k = _linear_kernel(obs, model)
        kern = np.convolve(k, np.ones(n_steps))  # kern[i] = sum of k over the lag band
        kern_rev = kern[::-1]
        shift_total = n_steps * obs.mean_shift

        def block(start: int, stop: int) -> None:
            for r in range(start, stop):
                syms = sample_symbol_matrix(w, 1, width, state.substream(r))[0]
                amp = model.symbol_alpha[syms]
                values[r] = (float(amp @ kern_rev) - shift_total) / math.sqrt(n_steps)

        _run_blocks(replicas, 256, block, workers)
    else:

        def block(start: int, stop: int) -> None:
            for r in range(start, stop):
                syms = sample_symbol_matrix(w, 1, width, state.substream(r))[0]
                total = 0.0
                for p in range(n_steps):
                    hi = width - 1 - p
                    lo = max(hi - model.depth, 0)
                    win = SymbolWindow(-(hi - lo), 0, syms[lo : hi + 1])
                    total += evaluate(obs, window_vector(model, win))
                values[r] = total / math.sqrt(n_steps)

        _run_blocks(replicas, 64, block, workers)

    var_hat = float(values.var(ddof=1))
    if var_hat <= 1e-300:
        return CltReport(
            n_steps=n_steps,
            replicas=replicas,
            samples=values,
            ks_distance=math.nan,
            ks_limit=1.5 * 1.63 / math.sqrt(replicas),
            skewness=math.nan,
            skew_limit=4.0 * math.sqrt(6.0 / replicas),
            excess_kurtosis=math.nan,
            kurtosis_limit=4.0 * math.sqrt(24.0 / replicas),
            sigma2_hat=var_hat,
            sigma2_series=None,
            degenerate=True,
        )

    z = (values - values.mean()) / math.sqrt(var_hat)
    skew = float(np.mean(z**3))
    kurt = float(np.mean(z**4) - 3.0)
    ks = _ks_fitted_normal(values)

    sigma2_series = None
    if obs.kind == "linear":
        if basis is None:
            basis = build_basis(w)
        table = linear_fourier_table(model, basis, obs.coefs)
        c0 = exact_covariance(table, table, 0)
        total = c0
        for p in range(1, len(obs.coefs)):
            c = exact_covariance(table, table, p)
            if abs(c) < 1e-12 * abs(c0):
                break
            total += 2.0 * c
        sigma2_series = float(total)

    return CltReport(
        n_steps=n_steps,
        replicas=replicas,
        samples=values,
        ks_distance=ks,
        ks_limit=1.5 * 1.63 / math.sqrt(replicas),
        skewness=skew,
        skew_limit=4.0 * math.sqrt(6.0 / replicas),
        excess_kurtosis=kurt,
        kurtosis_limit=4.0 * math.sqrt(24.0 / replicas),
        sigma2_hat=var_hat,
        sigma2_series=sigma2_series,
        degenerate=False,
    )


# ---------------------------------------------------------------------------
# martingale (conditional-norm) diagnostics


@dataclass(frozen=True)
class MartingaleDiagnostics:
    """Conditional norms of Birkhoff sums against the coordinate filtration.

    ``known_sq[i]`` is the squared norm of the sum's projection onto the
    sigma-field of coordinates at positions >= 0; ``residual_sq[i]`` is the
    squared norm of what coordinates below -n still carry.  The summand
    arrays divide the root of each by n^{3/2}; partial sums of those decide
    the martingale-approximation criterion.
    """

    n_grid: np.ndarray
    known_sq: np.ndarray
    residual_sq: np.ndarray
    known_summand: np.ndarray
    residual_summand: np.ndarray
    known_partial: np.ndarray
    residual_partial: np.ndarray

    def cauchy_ratios(self, which: str = "residual") -> np.ndarray:
        s = self.residual_summand if which == "residual" else self.known_summand
        with np.errstate(divide="ignore", invalid="ignore"):
            return s[:-1] / s[1:]


def conditional_norm_diagnostics(table: FourierTable, n_grid: np.ndarray) -> MartingaleDiagnostics:
    """Evaluate both conditional-norm series of a linear table exactly.

    Conditioning on the coordinates at positions >= -m keeps exactly the
    tensor indices whose leading position is >= -m, so both norms are sums
    of squared coefficient windows; with the factorized table these reduce
    to prefix-sum arithmetic on the depth factors.
    """
    if not table.is_linear:
        raise ValueError("diagnostics need a factorized linear table")
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    g = table.depth_factors  # position -m carries g[m]
    D = len(g) - 1
    amp = float(np.dot(table.level_factors, table.level_factors))

    known_sq = np.empty(len(n_grid))
    resid_sq = np.empty(len(n_grid))
    for i, n in enumerate(n_grid):
        # prefix sums over positions i in [-D, n]: h(i) = g[-i] for i <= 0
        h = np.zeros(D + n + 1)
        h[: D + 1] = g[::-1]  # positions -D .. 0
        P = np.concatenate([[0.0], np.cumsum(h)])
        # S(j, n) = sum_{p < n} h(j + p), with j indexed from -D
        def window_sum(j_positions: np.ndarray) -> np.ndarray:
            a = np.clip(j_positions + D, 0, D + n + 1)
            b = np.clip(j_positions + D + n, 0, D + n + 1)
            return P[b] - P[a]

        j_known = np.arange(0, 1)  # positions >= 0 with any mass: only 0
        known_sq[i] = amp * float(np.sum(window_sum(j_known) ** 2))
        j_resid = np.arange(-D - n, -n)  # positions strictly below -n
        resid_sq[i] = amp * float(np.sum(window_sum(j_resid) ** 2))

    known_summand = np.sqrt(known_sq) / n_grid.astype(float) ** 1.5
    resid_summand = np.sqrt(resid_sq) / n_grid.astype(float) ** 1.5
    return MartingaleDiagnostics(
        n_grid=n_grid,
        known_sq=known_sq,
        residual_sq=resid_sq,
        known_summand=known_summand,
        residual_summand=resid_summand,
        known_partial=np.cumsum(known_summand),
        residual_partial=np.cumsum(resid_summand),
    )


# ---------------------------------------------------------------------------
# shifted-window power-sum constants


@dataclass(frozen=True)
class FactConstants:
    alpha: float
    n_grid: np.ndarray
    lhs: np.ndarray
    c_stated: np.ndarray  # against max(n^{3-2a}, log(n+1))
    c_regime: np.ndarray  # against the tight regime envelope

    def stated_spread(self) -> float:
        return float(self.c_stated.max() / self.c_stated.min())

    def regime_spread(self) -> float:
        return float(self.c_regime.max() / self.c_regime.min())

    def sup_attained_early(self) -> bool:
        """The fitted constant peaks before the last grid point, so the
        bound is witnessed inside the grid rather than still climbing."""
        return int(np.argmax(self.c_stated)) < len(self.n_grid) - 1


def _window_power_lhs(alpha: float, n: int, j_max: int | None = None) -> float:
    """sum_{j >= 0} (sum_{p < n} (1 + j + p)^-alpha)^2 by direct summation."""
    if j_max is None:
        j_max = max(200_000, 400 * n)
    i = np.arange(1, j_max + n + 2, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(i**-alpha)])
    j = np.arange(0, j_max + 1)
    inner = c[j + n] - c[j]
    total = float(np.sum(inner**2))
    # integral tail of the dropped indices
    total += n**2 * (j_max + 1.5) ** (1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
    return total


def regime_envelope(alpha: float, n: np.ndarray) -> np.ndarray:
    if alpha < 1.5:
        return n.astype(float) ** (3.0 - 2.0 * alpha)
    if alpha == 1.5:
        return np.log(n + 1.0)
    return np.ones_like(n, dtype=float)


def window_tail_constants(alpha: float, n_grid) -> FactConstants:
    """Fitted constants of the shifted-window power-sum bound.

    ``c_stated`` divides by ``max(n^{3-2a}, log(n+1))``; ``c_regime``
    divides by the sharp regime of the same estimate (the left side
    saturates to a constant once a > 3/2, so the logarithmic envelope is
    loose there and its fitted constant decays).
    """
    if alpha <= 1.0:
        raise ValueError("needs a decay exponent above 1")
    n_grid = np.asarray(sorted(int(n) for n in n_grid))
    lhs = np.array([_window_power_lhs(alpha, int(n)) for n in n_grid])
    stated = np.maximum(n_grid.astype(float) ** (3.0 - 2.0 * alpha), np.log(n_grid + 1.0))
    return FactConstants(
        alpha=alpha,
        n_grid=n_grid,
        lhs=lhs,
        c_stated=lhs / stated,
        c_regime=lhs / regime_envelope(alpha, n_grid),
    )


def fact2_bruteforce(alpha: float, n: int, j_cut: int = 200) -> tuple[float, float]:
    """Brute-force check of the factored square expansion for arity 2.

    Returns (lhs, rhs) where lhs sums over leading positions below -n and a
    truncated second position, and rhs is the factored bound with its
    single-position sum enlarged to cover the truncation shift.
    """
    j1 = np.arange(-n - j_cut, -n)
    j2 = np.arange(-j_cut, j_cut + 1)
    p = np.arange(0, n)
    t1 = (1.0 + np.abs(j1[:, None] + p[None, :])) ** -alpha  # (j1, p)
    t2 = (1.0 + np.abs(j2[:, None] + p[None, :])) ** -alpha  # (j2, p)
    inner = np.einsum("ap,bp->ab", t1, t2)
    lhs = float(np.sum(inner**2))

    one_pos = float(np.sum((t1.sum(axis=1)) ** 2))
    jj = np.arange(-j_cut - n, j_cut + n + 1)
    factor = float(np.sum((1.0 + np.abs(jj)) ** -alpha))
    rhs = one_pos * factor
    return lhs, rhs
