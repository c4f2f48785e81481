"""Sampling the product measure on symbol space and the conjugacy map.

A point of symbol space is an integer sequence indexed by a window of Z;
symbols are drawn i.i.d. with the :class:`~shiftmix.weights.SymbolWeights`
distribution.  The conjugacy map sends a window to the vector whose scaled
coordinate m is the seed amplitude of the symbol at window index -m, so the
operator acts on realized vectors as an index shift of the window.

Randomness is counter-based (Philox keyed by ``(seed, stream)``): a draw is
a pure function of seed, stream and position, which makes every experiment
replayable and independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .shift import LpVector, ShiftModel, apply_shift
from .weights import SymbolWeights, build_block_schedule

__all__ = [
    "SamplerState",
    "SymbolWindow",
    "sample_window",
    "sample_symbol_matrix",
    "window_vector",
    "conjugacy_residual",
    "SupportProbeReport",
    "support_probe",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class SamplerState:
    """Immutable handle on one random stream.

    Equal (seed, stream) pairs produce identical draw sequences on any
    machine and under any parallel schedule.
    """

    seed: int
    stream: int = 0

    def rng(self) -> Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return Generator(Philox(key=key))

    def substream(self, i: int) -> "SamplerState":
        return SamplerState(self.seed, _splitmix64((self.stream * 0x100000001B3 + i + 1) & _MASK64))


@dataclass(frozen=True)
class SymbolWindow:
    """Symbols on the integer window [lo, hi]."""

    lo: int
    hi: int
    symbols: np.ndarray  # int array, length hi - lo + 1

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError("empty window")
        if len(self.symbols) != self.hi - self.lo + 1:
            raise ValueError("symbol count does not match window length")

    def symbol(self, k: int) -> int:
        if not self.lo <= k <= self.hi:
            raise ValueError(f"index {k} outside window [{self.lo}, {self.hi}]")
        return int(self.symbols[k - self.lo])

    def shifted(self, steps: int = 1) -> "SymbolWindow":
        """The forward-shift image: index k now reads the old k - steps."""
        return SymbolWindow(self.lo + steps, self.hi + steps, self.symbols)

    def csv_rows(self):
        for k in range(self.lo, self.hi + 1):
            yield f"{k},{self.symbols[k - self.lo]}"


def _thresholds(w: SymbolWeights) -> np.ndarray:
    return np.cumsum(w.p)[:-1]


def sample_window(w: SymbolWeights, lo: int, hi: int, state: SamplerState) -> SymbolWindow:
    """Draw one i.i.d. window; the same state always yields the same window."""
    if hi < lo:
        raise ValueError("need lo <= hi")
    u = state.rng().random(hi - lo + 1)
    symbols = np.searchsorted(_thresholds(w), u, side="right") + 1
    return SymbolWindow(lo, hi, symbols.astype(np.int64))


def sample_symbol_matrix(
    w: SymbolWeights, rows: int, cols: int, state: SamplerState, chunk: int = 1024
) -> np.ndarray:
    """Rows of i.i.d. symbols, one stream per fixed-size chunk of rows.

    The chunk size is a constant of the algorithm, not of the executor, so
    results are byte-identical however the work is scheduled.
    """
    thr = _thresholds(w)
    out = np.empty((rows, cols), dtype=np.int64)
    for start in range(0, rows, chunk):
        stop = min(start + chunk, rows)
        rng = state.substream(start // chunk).rng()
        u = rng.random((stop - start, cols))
        out[start:stop] = np.searchsorted(thr, u, side="right") + 1
    return out


def window_vector(model: ShiftModel, win: SymbolWindow) -> LpVector:
    """Realize a window as a vector: scaled coordinate m = seed(symbol at -m).

    The window must cover index 0.  Coordinates deeper than the window or
    the model truncation are dropped; the dropped mass is bounded (using
    the actual symbols where known, the admissibility envelope elsewhere)
    and recorded on the result.
    """
    if win.lo > 0 or win.hi < 0:
        raise ValueError("window must cover index 0")
    if int(win.symbols.max()) > model.n_seeds:
        raise ValueError("window contains symbols beyond the seed family")
    depth = min(-win.lo, model.depth)
    idx0 = -win.lo  # array position of window index 0
    z = model.symbol_alpha[win.symbols[idx0 - depth : idx0 + 1][::-1]]

    p = model.p_exp
    tail = 0.0
    if -win.lo > model.depth:
        # known symbols past the truncation
        syms = win.symbols[: idx0 - depth]
        amps = np.abs(model.symbol_alpha[syms[::-1]])
        ms = np.arange(depth + 1, -win.lo + 1, dtype=float)
        tail += float(np.sum(amps**p / ms ** (model.alpha * p)) ** (1.0 / p))
    elif -win.lo < model.depth:
        # unknown symbols inside the truncation: use the largest admissible amplitude
        a_max = float(np.max(np.abs(model.seed_values)))
        ms = np.arange(-win.lo + 1, model.depth + 1, dtype=float)
        tail += float((a_max**p * np.sum(ms ** (-model.alpha * p))) ** (1.0 / p))
    return LpVector(scaled=z, model=model, tail_bound=tail)


def conjugacy_residual(model: ShiftModel, win: SymbolWindow) -> float:
    """Norm of (operator o realize - realize o shift) on one window.

    Zero exactly when the window depth fits the truncation; with a deeper
    window the residual is positive but stays below the sum of the two
    recorded truncation bounds (the shifted realization keeps one
    coordinate the operator image has already truncated away).
    """
    if win.hi < 1:
        raise ValueError("window must cover index 1")
    v1 = apply_shift(model, window_vector(model, win), 1)
    v2 = window_vector(model, win.shifted())
    n = max(len(v1.scaled), len(v2.scaled))
    a = np.zeros(n)
    b = np.zeros(n)
    a[: len(v1.scaled)] = v1.scaled
    b[: len(v2.scaled)] = v2.scaled
    diff = LpVector(scaled=a - b, model=model)
    return diff.norm()


@dataclass(frozen=True)
class SupportProbeReport:
    empirical: float
    hits: int
    samples: int
    analytic_lower_bound: float
    analytic_log: float
    level: int
    window_halfwidth: int


def support_probe(
    model: ShiftModel,
    w: SymbolWeights,
    target: LpVector,
    delta: float,
    samples: int,
    state: SamplerState,
) -> SupportProbeReport:
    """Estimate the measure of a delta-ball and certify it is positive.

    The analytic lower bound follows the full-support argument: prescribe
    the matching symbol at every coordinate of the target's support and the
    zero seed elsewhere inside a window wide enough that residual tails
    stay below delta, then multiply the prescribed symbol masses by the
    truncated beta-square product of the block schedule.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")

    # match target coordinates to seed indices, exactly
    support: dict[int, int] = {}
    for m, z in enumerate(target.scaled):
        if z == 0.0:
            continue
        hits = np.nonzero(model.seed_values == z)[0]
        if len(hits) == 0:
            raise ValueError(
                f"target coordinate {m} (scaled {z!r}) is not on the seed grid"
            )
        support[m] = int(hits[0]) + 1

    max_depth = max(support) if support else 0
    level = 1
    while 2.0**-level >= delta:
        level += 1
    schedule = build_block_schedule(model, w, model.chain, levels=max(level + 12, 16))
    while level < len(schedule.bounds) and schedule.bounds[level - 1] <= max_depth:
        level += 1
    if schedule.bounds[level - 1] <= max_depth:
        raise ValueError("target support too deep for the schedule range")
    half = int(schedule.bounds[level - 1])

    # prescribed configuration on [-half, half]: matching symbol on the
    # support (window index -m), zero seed (symbol 1) everywhere else
    log_bound = (2 * half + 1 - len(support)) * float(w.log_p[0])
    for m, sym in support.items():
        if sym > w.length:
            raise ValueError("target needs a symbol beyond the weight truncation")
        log_bound += float(w.log_p[sym - 1])
    log_bound += schedule.log_beta_sq_tail(level, w)
    analytic = math.exp(log_bound)

    depth = model.depth
    hits_n = 0
    for r in range(samples):
        win_syms = sample_symbol_matrix(w, 1, depth + 1, state.substream(r))[0]
        win = SymbolWindow(-depth, 0, win_syms)
        v = window_vector(model, win)
        n = max(len(v.scaled), len(target.scaled))
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(v.scaled)] = v.scaled
        b[: len(target.scaled)] = target.scaled
        if LpVector(scaled=a - b, model=model).norm() < delta:
            hits_n += 1
    return SupportProbeReport(
        empirical=hits_n / samples,
        hits=hits_n,
        samples=samples,
        analytic_lower_bound=analytic,
        analytic_log=log_bound,
        level=level,
        window_halfwidth=half,
    )
