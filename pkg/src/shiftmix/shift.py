"""Weighted backward shift on a truncated sequence space.

The operator acts on ``x = (x_0, x_1, ...)`` by ``(x_n) -> (w_{n+1} x_{n+1})``
with cumulative weight products ``W_n = w_1 .. w_n = n^alpha`` for the
canonical family.  Vectors are stored through their *scaled* coordinates
``z_m = y_m * W_m``: on that representation the operator is a pure index
shift and the section maps place a seed amplitude at a single index, so the
algebraic identities (cocycle relation, conjugacy with the symbol shift)
hold bit-for-bit in floating point.  Plain coordinates are derived on
demand by a single division per entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .weights import GrowthChain, build_growth_chain

__all__ = [
    "ShiftModel",
    "LpVector",
    "canonical_shift",
    "apply_shift",
    "apply_section",
    "enumerate_seed_values",
]


def enumerate_seed_values(chain: GrowthChain, count: int, p_exp: float) -> np.ndarray:
    """Interleaved dyadic amplitudes clipped by the inner growth scale.

    Candidates are produced level by level: level t walks the odd multiples
    of 2^-t out to absolute value t+1 in +/- pairs (level 0 also emits 0
    and +/-1).  A candidate is accepted at the next free index n only if
    ``|v|^p_exp <= inner(n)``; rejected candidates are skipped, larger ones
    reappear at later levels as the range widens.  The accepted sequence is
    dense in the admissible region and always starts with the zero seed.
    """
    if count < 1:
        raise ValueError("need at least one seed")
    if count > chain.k_max:
        raise ValueError("growth chain too short for the requested seed count")
    out = [0.0]
    t = 0
    while len(out) < count:
        step = 2.0**-t
        limit = int((t + 1) / step)
        for j in range(1, limit + 1):
            if t > 0 and j % 2 == 0:
                continue
            for v in (j * step, -j * step):
                n = len(out) + 1
                if n > count:
                    break
                if abs(v) ** p_exp <= chain.inner_at(n):
                    out.append(v)
        t += 1
        if t > 60:  # admissibility bound grows too slowly to fill the request
            raise ValueError("seed enumeration stalled; increase chain range")
    return np.array(out[:count])


@dataclass(frozen=True)
class ShiftModel:
    """Canonical weighted backward shift with its seed family.

    ``W[m] = m**alpha`` (``W[0] = 1``), truncated at coordinate ``depth``.
    ``seed_values[n-1]`` is the amplitude of seed n; the zero seed sits at
    n = 1.  Immutable and safe to share.
    """

    alpha: float
    p_exp: float
    depth: int
    W: np.ndarray
    seed_values: np.ndarray
    chain: GrowthChain
    # seed amplitudes padded so symbol arrays can fancy-index directly
    symbol_alpha: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.symbol_alpha is None:
            object.__setattr__(
                self, "symbol_alpha", np.concatenate([[0.0], self.seed_values])
            )

    @property
    def n_seeds(self) -> int:
        return len(self.seed_values)

    def seed(self, n: int) -> float:
        if not 1 <= n <= self.n_seeds:
            raise ValueError(f"seed index {n} outside [1, {self.n_seeds}]")
        return float(self.seed_values[n - 1])

    def weight_at(self, m: int) -> float:
        """W_m, analytic beyond the truncation."""
        if m <= self.depth:
            return float(self.W[m])
        return float(max(m, 1)) ** self.alpha

    def section_norm_envelope(self, symbol: int, depth: int) -> float:
        """Upper bound for a section norm at the given depth."""
        return self.chain.inner_at(symbol) / self.weight_at(depth)


def canonical_shift(
    alpha: float,
    p_exp: float = 2.0,
    depth: int = 256,
    chain: GrowthChain | None = None,
    n_seeds: int = 64,
) -> ShiftModel:
    """Build the canonical model with ``W_m = m**alpha``.

    Requires ``alpha > 1/2`` and ``alpha * p_exp > 1``; the latter is the
    summability of ``W_m**-p_exp``, without which no invariant measure with
    full support exists for this family.
    """
    if alpha * p_exp <= 1.0:
        raise ValueError(
            f"sum of W_n^(-p) diverges (alpha*p_exp = {alpha * p_exp:.3g} <= 1); "
            "no fully supported invariant measure exists for this family"
        )
    if alpha <= 0.5:
        raise ValueError("alpha must exceed 1/2 for the covariance decay regimes")
    if p_exp < 1.0:
        raise ValueError("p_exp must be at least 1")
    if chain is None:
        chain = build_growth_chain("log", 128)
    W = np.arange(0, depth + 1, dtype=float) ** alpha
    W[0] = 1.0
    seeds = enumerate_seed_values(chain, n_seeds, p_exp)
    return ShiftModel(
        alpha=alpha, p_exp=p_exp, depth=depth, W=W, seed_values=seeds, chain=chain
    )


@dataclass(frozen=True)
class LpVector:
    """Finitely supported vector, stored through scaled coordinates.

    ``scaled[m] = y_m * W_m``; ``coords()`` recovers y.  ``tail_bound`` is an
    upper bound on the norm of whatever was cut off when the vector was
    produced (truncation depth, unknown window symbols); it is 0 for
    exactly represented vectors.
    """

    scaled: np.ndarray
    model: ShiftModel
    tail_bound: float = 0.0

    def __len__(self) -> int:
        return len(self.scaled)

    def coords(self) -> np.ndarray:
        return self.scaled / self.model.W[: len(self.scaled)]

    def coord(self, m: int) -> float:
        if m >= len(self.scaled):
            return 0.0
        return float(self.scaled[m] / self.model.W[m])

    def norm(self) -> float:
        p = self.model.p_exp
        y = np.abs(self.coords())
        if p == 2.0:
            return float(np.sqrt(np.dot(y, y)))
        return float(np.sum(y**p) ** (1.0 / p))

    @staticmethod
    def from_coords(model: ShiftModel, coords: Sequence[float]) -> "LpVector":
        y = np.asarray(coords, dtype=float)
        if len(y) > model.depth + 1:
            raise ValueError("coordinate list longer than the model truncation")
        return LpVector(scaled=y * model.W[: len(y)], model=model)

    @staticmethod
    def basis_vector(model: ShiftModel, m: int) -> "LpVector":
        if m > model.depth:
            raise ValueError("coordinate beyond truncation")
        z = np.zeros(m + 1)
        z[m] = model.W[m]
        return LpVector(scaled=z, model=model)

    def csv_rows(self):
        y = self.coords()
        for m, v in enumerate(y):
            yield f"{m},{float(v)!r}"


def apply_shift(model: ShiftModel, v: LpVector, steps: int) -> LpVector:
    """Iterate the backward shift: coordinate m becomes (W_{m+s}/W_m) y_{m+s}.

    On scaled coordinates this is an exact index shift, so repeated
    applications compose without rounding.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0:
        return v
    if steps >= len(v.scaled):
        return LpVector(scaled=np.zeros(1), model=model, tail_bound=_shift_tail(model, v, steps))
    return LpVector(
        scaled=v.scaled[steps:].copy(),
        model=model,
        tail_bound=_shift_tail(model, v, steps),
    )


def _shift_tail(model: ShiftModel, v: LpVector, steps: int) -> float:
    if v.tail_bound == 0.0:
        return 0.0
    # cut-off coordinates lived past depth - steps; the shift scales them by
    # at most ((m+steps)/m)^alpha there
    m0 = max(model.depth - steps, 1)
    return v.tail_bound * ((m0 + steps) / m0) ** model.alpha


def apply_section(model: ShiftModel, seed_index: int, k: int) -> LpVector:
    """Right-inverse section: place seed n at depth k with amplitude a_n/W_k."""
    if k < 0:
        raise ValueError("depth must be nonnegative")
    if k > model.depth:
        raise ValueError(f"depth {k} exceeds truncation {model.depth}")
    a = model.seed(seed_index)
    z = np.zeros(k + 1)
    z[k] = a
    return LpVector(scaled=z, model=model)
