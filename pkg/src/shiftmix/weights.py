"""Growth-function chains, symbol weights, and block schedules.

These three objects parametrize the invariant measure used everywhere else:

* :class:`GrowthChain` holds three nested growth scales on the positive
  integers.  The *outer* scale bounds how fast observable derivatives may
  grow, the *inner* scale caps seed amplitudes and drives the symbol-weight
  recursion, and the *middle* scale sits between them so that the pairing
  inequality ``inner(k+k')^(k+k') <= middle(k)^k * middle(k')^k'`` holds for
  every pair.
* :class:`SymbolWeights` is a strictly decreasing probability vector
  ``p_1..p_L`` over symbol indices, built so that several summability
  conditions hold with small explicit constants.
* :class:`BlockSchedule` is an increasing integer sequence with convex gaps
  whose induced product ``prod beta_l^2`` stays bounded away from zero; this
  is the full-support certificate for the pushforward measure.

All probability arithmetic that spans many orders of magnitude is done in
log space; linear-space values are derived from the logs once and kept
alongside them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "GrowthChain",
    "SymbolWeights",
    "BlockSchedule",
    "ConditionFit",
    "ConditionReport",
    "GROWTH_FUNCTIONS",
    "build_growth_chain",
    "build_symbol_weights",
    "check_weight_conditions",
    "build_block_schedule",
    "measure_to_doc",
    "measure_from_doc",
]

# Named growth functions usable from manifests and serialized documents.
GROWTH_FUNCTIONS: dict[str, Callable[[int], float]] = {
    "log": lambda k: math.log(k + math.e),
    "linear": lambda k: 1.0 + k,
    "sqrt": lambda k: 1.0 + math.sqrt(k),
    "exp": lambda k: math.exp(k),
}

_MIN_LOG = math.log(5e-324)  # smallest positive subnormal double


@dataclass(frozen=True)
class GrowthChain:
    """Three nested growth scales tabulated on ``1..k_max``.

    Arrays are 1-indexed conceptually: ``outer[i]`` is the value at
    ``kappa = i + 1``.  Use the ``*_at`` accessors.
    """

    kind: str
    k_max: int
    outer: np.ndarray
    middle: np.ndarray
    inner: np.ndarray
    ratio_monotone_from: int  # index from which middle^2/outer is nonincreasing

    def _at(self, arr: np.ndarray, k: int) -> float:
        if not 1 <= k <= self.k_max:
            raise ValueError(f"growth scale evaluated at {k}, outside [1, {self.k_max}]")
        return float(arr[k - 1])

    def outer_at(self, k: int) -> float:
        return self._at(self.outer, k)

    def middle_at(self, k: int) -> float:
        return self._at(self.middle, k)

    def inner_at(self, k: int) -> float:
        return self._at(self.inner, k)

    def pairing_margin(self) -> float:
        """Worst log-slack of the pairing inequality over all k + k' <= k_max.

        Negative means the inequality holds strictly everywhere.  The check
        is exhaustive, not sampled.
        """
        log_in = np.log(self.inner)
        log_mid = np.log(self.middle)
        worst = -math.inf
        for k in range(1, self.k_max):
            for kp in range(1, self.k_max - k + 1):
                lhs = (k + kp) * log_in[k + kp - 1]
                rhs = k * log_mid[k - 1] + kp * log_mid[kp - 1]
                worst = max(worst, lhs - rhs)
        return worst

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "params": {"k_max": self.k_max},
            "outer": [repr(v) for v in self.outer.tolist()],
            "middle": [repr(v) for v in self.middle.tolist()],
            "inner": [repr(v) for v in self.inner.tolist()],
            "ratio_monotone_from": self.ratio_monotone_from,
        }

    @staticmethod
    def from_doc(doc: dict) -> "GrowthChain":
        return GrowthChain(
            kind=doc["kind"],
            k_max=int(doc["params"]["k_max"]),
            outer=np.array([float(v) for v in doc["outer"]]),
            middle=np.array([float(v) for v in doc["middle"]]),
            inner=np.array([float(v) for v in doc["inner"]]),
            ratio_monotone_from=int(doc["ratio_monotone_from"]),
        )


def build_growth_chain(outer: str | Callable[[int], float], k_max: int = 128) -> GrowthChain:
    """Construct the growth chain from an outer scale.

    ``outer`` may be a name from :data:`GROWTH_FUNCTIONS` or any callable on
    positive integers.  It must exceed 1 everywhere, be nondecreasing, and
    keep increasing over the tabulated range (a constant scale is rejected
    because the chain needs an unbounded target).

    The middle scale is the cube root of the outer one, capped so that it
    never more than doubles per step; this makes ``middle^2 / outer`` tend
    to zero monotonically while keeping the doubling property.  The inner
    scale is ``sqrt(middle(ceil(k/2)))``, which satisfies the pairing
    inequality with genuine slack.
    """
    if k_max < 4:
        raise ValueError("k_max must be at least 4")
    if isinstance(outer, str):
        try:
            fn = GROWTH_FUNCTIONS[outer]
        except KeyError:
            raise ValueError(f"unknown growth function {outer!r}") from None
        kind = outer
    else:
        fn, kind = outer, "custom"

    vals = np.array([float(fn(k)) for k in range(1, k_max + 1)])
    if np.any(vals <= 1.0):
        raise ValueError("outer growth scale must exceed 1 everywhere")
    if np.any(np.diff(vals) < 0):
        raise ValueError("outer growth scale must be nondecreasing")
    if vals[-1] <= vals[max(0, k_max // 2 - 1)]:
        raise ValueError("outer growth scale must keep increasing (unbounded target)")

    middle = np.empty(k_max)
    middle[0] = vals[0] ** (1.0 / 3.0)
    for i in range(1, k_max):
        middle[i] = min(vals[i] ** (1.0 / 3.0), 2.0 * middle[i - 1])
    inner = np.array([math.sqrt(middle[(k + 1) // 2 - 1]) for k in range(1, k_max + 1)])

    ratio = middle**2 / vals
    monotone_from = k_max - 1
    for i in range(k_max - 1):
        if np.all(np.diff(ratio[i:]) <= 1e-15):
            monotone_from = i
            break
    if ratio[-1] >= ratio[monotone_from]:
        raise ValueError("middle^2/outer does not decay over the tabulated range")

    chain = GrowthChain(
        kind=kind,
        k_max=k_max,
        outer=vals,
        middle=middle,
        inner=inner,
        ratio_monotone_from=monotone_from + 1,
    )
    margin = chain.pairing_margin()
    if margin > 1e-12:
        raise ValueError(f"pairing inequality violated with log margin {margin:.3e}")
    return chain


@dataclass(frozen=True)
class SymbolWeights:
    """Strictly decreasing symbol probabilities with exact suffix sums.

    ``tail[l-1]`` is ``q_l = sum_{m >= l} p_m`` computed by backward
    summation, so ``q_l = p_l + q_{l+1}`` holds exactly in floating point.
    Mass beyond index L of the underlying infinite recursion is folded into
    symbol L, hence ``tail_beyond = 0``.
    """

    p: np.ndarray
    log_p: np.ndarray
    tail: np.ndarray
    length: int
    d_max: int
    tail_beyond: float = 0.0

    def __post_init__(self):
        if len(self.p) != self.length or len(self.tail) != self.length:
            raise ValueError("inconsistent array lengths")
        if np.any(self.p <= 0.0):
            raise ValueError("probabilities must be positive")
        if np.any(np.diff(self.p) >= 0):
            raise ValueError("probabilities must be strictly decreasing")
        total = math.fsum(self.p.tolist()) + self.tail_beyond
        if abs(total - 1.0) > 1e-15:
            raise ValueError(f"probabilities sum to {total!r}, not 1")

    def suffix(self, l: int) -> float:
        """q_l for 1 <= l <= length + 1 (q_{L+1} is the folded remainder)."""
        if l == self.length + 1:
            return self.tail_beyond
        return float(self.tail[l - 1])

    def tail_ratios(self) -> np.ndarray:
        """sum_{m>l} p_m / p_l for l = 1..L-1."""
        return (self.tail[1:] ) / self.p[:-1]

    def to_doc(self) -> dict:
        return {
            "p": [repr(v) for v in self.p.tolist()],
            "p_log": [repr(v) for v in self.log_p.tolist()],
            "d_max": self.d_max,
        }

    @staticmethod
    def from_doc(doc: dict) -> "SymbolWeights":
        p = np.array([float(v) for v in doc["p"]])
        log_p = np.array([float(v) for v in doc["p_log"]])
        tail = np.cumsum(p[::-1])[::-1]
        return SymbolWeights(p=p, log_p=log_p, tail=tail, length=len(p), d_max=int(doc["d_max"]))

    @staticmethod
    def from_probabilities(p: Sequence[float], d_max: int = 0) -> "SymbolWeights":
        """Wrap an explicit probability vector (test weights, etc.)."""
        arr = np.asarray(p, dtype=float)
        arr = arr / math.fsum(arr.tolist())
        tail = np.cumsum(arr[::-1])[::-1]
        return SymbolWeights(
            p=arr, log_p=np.log(arr), tail=tail, length=len(arr), d_max=d_max
        )


# Ratio caps for the weight recursion.  The first step is gentler so the
# leading symbol does not swallow so much mass that Birkhoff-sum skewness
# blows up; later steps shrink geometrically so the full-support product
# certificate has room against the exponentially growing block gaps.
_FIRST_RATIO = 1.0 / 64.0
_BASE_RATIO = 1.0 / 256.0
_RATIO_DECAY = 0.7


def build_symbol_weights(chain: GrowthChain, d_max: int = 3, length: int = 40) -> SymbolWeights:
    """Build the symbol-weight vector from the inner growth scale.

    Each ratio ``p_{l+1}/p_l`` is the minimum of the halving recursion
    ``sqrt(p_{l+1}) inner(l+1)^{l+1} <= sqrt(p_l) inner(l)^l / 2`` and a
    geometric cap, and the absolute levels additionally respect
    ``inner(l)^{2d} <= p_l^{-1/2}`` for every ``d <= d_max`` once
    ``l >= 2d``.  The result is normalized to sum to one.
    """
    if length < 2 * d_max:
        raise ValueError(f"length {length} below 2*d_max = {2 * d_max}")
    if length < 2:
        raise ValueError("need at least two symbols")
    if chain.k_max < length:
        raise ValueError("growth chain too short for requested length")

    log_in = np.log(chain.inner)
    u = np.zeros(length)
    for l in range(1, length):  # ratio from p_l to p_{l+1}, 1-based l
        halving = math.log(0.25) + 2.0 * (l * log_in[l - 1] - (l + 1) * log_in[l])
        if l == 1:
            cap = math.log(_FIRST_RATIO)
        else:
            cap = math.log(_BASE_RATIO) + (l - 2) * math.log(_RATIO_DECAY)
        u[l] = u[l - 1] + min(halving, cap)
        for d in range(1, d_max + 1):
            if l + 1 >= 2 * d:
                u[l] = min(u[l], -4.0 * d * log_in[l])

    u -= logsumexp(u)
    if u[-1] <= _MIN_LOG + 2.0:
        raise ValueError(
            f"p_{length} would underflow (log {u[-1]:.1f}); use a smaller length"
        )
    p = np.exp(u)
    p /= math.fsum(p.tolist())
    tail = np.cumsum(p[::-1])[::-1]
    return SymbolWeights(
        p=p, log_p=np.log(p), tail=tail, length=length, d_max=d_max
    )


@dataclass(frozen=True)
class ConditionFit:
    """Fitted constant for one summability condition."""

    name: str
    constant: float
    worst_pair: tuple[int, int]  # (l, k); k = 0 when the condition has no k
    per_k: np.ndarray | None
    bounded: bool


@dataclass(frozen=True)
class ConditionReport:
    tail_domination: ConditionFit
    sqrt_moment: ConditionFit | None
    moment: ConditionFit | None
    amplitude_caps: ConditionFit | None
    block_sum: dict[int, dict] | None

    def all_fits(self) -> list[ConditionFit]:
        fits = [self.tail_domination]
        if self.sqrt_moment is not None:
            fits.append(self.sqrt_moment)
        if self.moment is not None:
            fits.append(self.moment)
        return fits


def _moment_fit(
    name: str, logs: np.ndarray, log_in: np.ndarray, length: int, k_max: int
) -> ConditionFit:
    """Smallest C with sum_{m>=l} x_m inner(m)^k <= C x_l max(inner(k)^k, inner(l)^k).

    ``logs`` holds log x_m; everything is evaluated in log space so that
    weights spanning hundreds of orders of magnitude stay comparable.
    """
    per_k = np.empty(k_max)
    best = -math.inf
    worst = (0, 0)
    for k in range(1, k_max + 1):
        term = logs + k * log_in[:length]
        # suffix logsumexp, smallest terms first
        suffix = np.empty(length)
        acc = -math.inf
        for i in range(length - 1, -1, -1):
            acc = np.logaddexp(acc, term[i])
            suffix[i] = acc
        k_pow = k * log_in[k - 1]
        denom = logs + np.maximum(k_pow, k * log_in[:length])
        ratios = suffix - denom
        i = int(np.argmax(ratios))
        per_k[k - 1] = ratios[i]
        if ratios[i] > best:
            best = ratios[i]
            worst = (i + 1, k)
    # growth detector: a healthy sequence keeps the fitted constant near its
    # k = 1 value; a failing one climbs orders of magnitude before the
    # truncation hides the divergence behind the k^k denominator
    baseline = max(per_k[0], 0.0)
    bounded = bool(np.max(per_k) <= baseline + math.log(2.0))
    return ConditionFit(
        name=name,
        constant=float(math.exp(best)),
        worst_pair=worst,
        per_k=np.exp(per_k),
        bounded=bounded,
    )


def check_weight_conditions(
    w: SymbolWeights,
    chain: GrowthChain,
    k_max: int = 20,
    schedule: "BlockSchedule | None" = None,
) -> ConditionReport:
    """Fit the smallest constants for the weight summability conditions.

    Reported, never raised: an unbounded constant shows up as ``bounded
    = False`` (the fitted value keeps growing along k).  With a schedule the
    block-sum conditions ``sum (N_{l+1}-N_l) p_l^{1/4d} < inf`` are
    evaluated through their partial sums for ``d <= w.d_max``.
    """
    if chain.k_max < max(w.length, k_max):
        raise ValueError("growth chain too short for the requested check range")
    log_in = np.log(chain.inner)
    L = w.length

    ratios = w.tail_ratios()
    l_worst = int(np.argmax(ratios)) + 1
    tail_fit = ConditionFit(
        name="tail_domination",
        constant=float(ratios.max()),
        worst_pair=(l_worst, 0),
        per_k=None,
        bounded=bool(ratios.max() <= 0.5),
    )

    sqrt_fit = moment_fit = None
    if k_max >= 1:
        sqrt_fit = _moment_fit("sqrt_moment", 0.5 * w.log_p, log_in, L, k_max)
        moment_fit = _moment_fit("moment", w.log_p, log_in, L, k_max)

    amp_fit = None
    if w.d_max >= 1:
        best, worst = -math.inf, (0, 0)
        for d in range(1, w.d_max + 1):
            for l in range(2 * d, L + 1):
                v = 2.0 * d * log_in[l - 1] + 0.5 * w.log_p[l - 1]
                if v > best:
                    best, worst = v, (l, d)
        amp_fit = ConditionFit(
            name="amplitude_caps",
            constant=float(math.exp(best)),
            worst_pair=worst,
            per_k=None,
            bounded=bool(best <= 0.0),
        )

    block = None
    if schedule is not None and len(schedule.bounds) >= 2:
        block = {}
        gaps = np.diff(schedule.bounds).astype(float)
        n_terms = min(len(gaps), L)
        for d in range(1, max(w.d_max, 1) + 1):
            terms = gaps[:n_terms] * np.exp(w.log_p[:n_terms] / (4.0 * d))
            partial = np.cumsum(terms)
            total = float(partial[-1])
            last_quarter = float(terms[-max(1, n_terms // 4):].sum())
            block[d] = {
                "partial_sum": total,
                "last_term": float(terms[-1]),
                "tail_fraction": last_quarter / total if total > 0 else 0.0,
                "converged": bool(terms[-1] <= 1e-6 * total),
            }

    return ConditionReport(
        tail_domination=tail_fit,
        sqrt_moment=sqrt_fit,
        moment=moment_fit,
        amplitude_caps=amp_fit,
        block_sum=block,
    )


@dataclass(frozen=True)
class BlockSchedule:
    """Increasing block boundaries with convex gaps and the beta certificate."""

    bounds: np.ndarray  # N_1..N_R, int64
    beta: np.ndarray  # beta_l for l = 1..R-1
    gaps_convex: bool
    log_beta_sq_sum: float

    def __len__(self) -> int:
        return len(self.bounds)

    def log_beta_sq_tail(self, from_level: int, weights: SymbolWeights) -> float:
        """2 * sum_{l >= from_level} gap_l * log(sigma_l) over the truncation."""
        total = 0.0
        sigma = np.cumsum(weights.p)
        for l in range(from_level, len(self.bounds)):
            gap = int(self.bounds[l] - self.bounds[l - 1])
            s = sigma[min(l, weights.length) - 1]
            total += 2.0 * gap * math.log(s)
        return total

    def to_doc(self) -> dict:
        return {"N": [int(v) for v in self.bounds.tolist()]}

    @staticmethod
    def from_doc(doc: dict, weights: SymbolWeights) -> "BlockSchedule":
        return _schedule_from_bounds(np.array(doc["N"], dtype=np.int64), weights)


def _schedule_from_bounds(bounds: np.ndarray, w: SymbolWeights) -> BlockSchedule:
    sigma = np.cumsum(w.p)
    log_sum = 0.0
    beta = np.empty(max(len(bounds) - 1, 0))
    for l in range(1, len(bounds)):
        gap = int(bounds[l] - bounds[l - 1])
        s = float(sigma[min(l, w.length) - 1])
        log_beta = gap * math.log(s)
        beta[l - 1] = math.exp(log_beta)
        log_sum += 2.0 * log_beta
    gaps = np.diff(bounds)
    convex = bool(np.all(np.diff(gaps) > 0)) if len(gaps) >= 2 else True
    return BlockSchedule(
        bounds=bounds, beta=beta, gaps_convex=convex, log_beta_sq_sum=log_sum
    )


def build_block_schedule(model, w: SymbolWeights, chain: GrowthChain, levels: int) -> BlockSchedule:
    """Choose block boundaries so worst-case orbit tails stay below 2^-n.

    The model only enters through its decay envelope: section norms are
    bounded by ``inner(symbol) / N^alpha`` past depth N, and forward orbits
    of the seed family vanish.  Level l gets the smallest boundary with
    integral tail bound ``inner(l) * N^(1-alpha) / (alpha-1) <= 2^(-l-1)``;
    summing the geometric budget over ``l >= n`` then certifies every level
    n at once.  Gap convexity is enforced afterwards by inflation, which
    only shrinks the tails further.
    """
    if levels == 0:
        return _schedule_from_bounds(np.empty(0, dtype=np.int64), w)
    if levels < 0:
        raise ValueError("levels must be nonnegative")
    alpha = float(model.alpha)
    if alpha <= 1.0:
        raise ValueError(
            f"orbit-norm envelope N^(-{alpha}) is not summable; cannot certify tails"
        )
    if chain.k_max < levels:
        raise ValueError("growth chain too short for the requested level count")

    bounds = np.empty(levels, dtype=np.int64)
    for l in range(1, levels + 1):
        need = (chain.inner_at(l) * 2.0 ** (l + 1) / (alpha - 1.0)) ** (1.0 / (alpha - 1.0))
        n_min = max(int(math.ceil(need)), l)
        if l == 1:
            bounds[0] = n_min
        elif l == 2:
            bounds[1] = max(n_min, bounds[0] + 1)
        else:
            bounds[l - 1] = max(n_min, bounds[l - 2] + (bounds[l - 2] - bounds[l - 3]) + 1)
    return _schedule_from_bounds(bounds, w)


def measure_to_doc(
    chain: GrowthChain, weights: SymbolWeights, schedule: BlockSchedule | None = None
) -> dict:
    doc = {
        "chain": chain.to_doc(),
        "p": weights.to_doc()["p_log"],
        "p_linear": weights.to_doc()["p"],
        "d_max": weights.d_max,
        "N": schedule.to_doc()["N"] if schedule is not None else None,
    }
    return doc


def measure_from_doc(doc: dict) -> tuple[GrowthChain, SymbolWeights, BlockSchedule | None]:
    chain = GrowthChain.from_doc(doc["chain"])
    weights = SymbolWeights.from_doc(
        {"p": doc["p_linear"], "p_log": doc["p"], "d_max": doc["d_max"]}
    )
    schedule = None
    if doc.get("N") is not None:
        schedule = BlockSchedule.from_doc({"N": doc["N"]}, weights)
    return chain, weights, schedule
