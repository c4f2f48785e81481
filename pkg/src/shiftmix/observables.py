"""Observables for experiments: linear functionals, polynomials, norm powers.

Every observable evaluates on realized vectors.  Polynomial observables
also expose exact means under the invariant measure (coordinates are
independent under the pullback, so means reduce to moments of the seed
amplitude distribution), and upper bounds for the derivative-growth norm
that decides membership in the regularity class of an outer growth scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .shift import LpVector, ShiftModel
from .weights import GrowthChain, SymbolWeights

__all__ = [
    "Observable",
    "linear_functional",
    "monomial_sum",
    "norm_power",
    "parse_observable",
    "evaluate",
    "exact_mean",
    "with_exact_mean_subtracted",
    "GrowthNormCertificate",
    "taylor_growth_certificate",
    "composition_series_bound",
]


@dataclass(frozen=True)
class Observable:
    kind: str  # "linear" | "monomials" | "norm_power"
    coefs: np.ndarray | None = None
    terms: tuple[tuple[float, tuple[int, ...]], ...] | None = None
    power: int | None = None
    mean_shift: float = 0.0
    descriptor: str = ""

    @property
    def degree(self) -> int | None:
        """Polynomial degree, or None for non-polynomial kinds."""
        if self.kind == "linear":
            return 1
        if self.kind == "monomials":
            return max((len(ix) for _, ix in self.terms), default=0)
        return None

    @property
    def support_depth(self) -> int:
        if self.kind == "linear":
            return len(self.coefs) - 1
        if self.kind == "monomials":
            return max((max(ix) for _, ix in self.terms if ix), default=0)
        return 0

    def evaluate_coords(self, y: np.ndarray) -> float:
        if self.kind == "linear":
            n = min(len(y), len(self.coefs))
            return float(np.dot(self.coefs[:n], y[:n])) - self.mean_shift
        if self.kind == "monomials":
            total = 0.0
            for c, ix in self.terms:
                prod = c
                for i in ix:
                    prod *= y[i] if i < len(y) else 0.0
                total += prod
            return total - self.mean_shift
        raise ValueError("norm powers need the full vector, not bare coordinates")


def linear_functional(coefs: Sequence[float], descriptor: str = "") -> Observable:
    c = np.asarray(coefs, dtype=float)
    return Observable(kind="linear", coefs=c, descriptor=descriptor or f"lin[{len(c)}]")


def monomial_sum(terms: Sequence[tuple[float, Sequence[int]]], descriptor: str = "") -> Observable:
    tt = tuple((float(c), tuple(int(i) for i in ix)) for c, ix in terms)
    return Observable(kind="monomials", terms=tt, descriptor=descriptor or "mono")


def norm_power(d: int) -> Observable:
    if d < 1:
        raise ValueError("power must be positive")
    return Observable(kind="norm_power", power=d, descriptor=f"normp:{d}")


def parse_observable(text: str) -> Observable:
    """Parse the compact forms ``lin:0=1,1=0.5``, ``mono:(0,1)=1``, ``normp:2``.

    Several monomial terms are separated by semicolons.
    """
    head, _, body = text.partition(":")
    if head == "lin":
        pairs = {}
        for item in body.split(","):
            k, _, v = item.partition("=")
            pairs[int(k)] = float(v)
        coefs = np.zeros(max(pairs) + 1)
        for k, v in pairs.items():
            coefs[k] = v
        return linear_functional(coefs, descriptor=text)
    if head == "mono":
        terms = []
        for item in body.split(";"):
            ix, _, v = item.partition("=")
            ix = ix.strip()
            if not (ix.startswith("(") and ix.endswith(")")):
                raise ValueError(f"bad monomial index {ix!r}")
            idx = tuple(int(t) for t in ix[1:-1].split(",") if t.strip() != "")
            terms.append((float(v), idx))
        return monomial_sum(terms, descriptor=text)
    if head == "normp":
        return norm_power(int(body))
    raise ValueError(f"unknown observable form {text!r}")


def evaluate(obs: Observable, v: LpVector) -> float:
    if obs.kind == "norm_power":
        return v.norm() ** obs.power - obs.mean_shift
    return obs.evaluate_coords(v.coords())


def _amplitude_moments(model: ShiftModel, w: SymbolWeights, orders: set[int]) -> dict[int, float]:
    amps = model.seed_values[: w.length]
    return {k: float(np.dot(w.p, amps**k)) for k in orders}


def exact_mean(obs: Observable, model: ShiftModel, w: SymbolWeights) -> float:
    """Mean under the invariant measure (polynomial kinds only).

    Coordinates of a realized vector are independent with distribution
    amplitude(symbol) / W_m, so a monomial mean is the product over
    distinct coordinates of amplitude moments divided by weight powers.
    """
    if model.n_seeds < w.length:
        raise ValueError("seed family shorter than the symbol alphabet")
    if obs.kind == "linear":
        m1 = _amplitude_moments(model, w, {1})[1]
        n = min(len(obs.coefs), model.depth + 1)
        return m1 * float(np.sum(obs.coefs[:n] / model.W[:n])) - obs.mean_shift
    if obs.kind == "monomials":
        orders = set()
        for _, ix in obs.terms:
            for i in set(ix):
                orders.add(ix.count(i))
        moments = _amplitude_moments(model, w, orders)
        total = 0.0
        for c, ix in obs.terms:
            prod = c
            for i in set(ix):
                u = ix.count(i)
                prod *= moments[u] / model.weight_at(i) ** u
            total += prod
        return total - obs.mean_shift
    raise ValueError("no closed-form mean for norm powers")


def with_exact_mean_subtracted(obs: Observable, model: ShiftModel, w: SymbolWeights) -> Observable:
    mu = exact_mean(obs, model, w) + obs.mean_shift
    return Observable(
        kind=obs.kind,
        coefs=obs.coefs,
        terms=obs.terms,
        power=obs.power,
        mean_shift=mu,
        descriptor=obs.descriptor + "-centered",
    )


@dataclass(frozen=True)
class GrowthNormCertificate:
    """Per-degree derivative-norm bounds and the certified norm value.

    ``per_degree[k]`` bounds the norm of the k-th derivative at zero; the
    certificate is ``max_k per_degree[k] * outer(k)^k``.  For linear
    observables the degree-1 entry is the exact dual norm, so the
    certificate is exact; otherwise it is an upper bound (coefficient
    l1 mass times factorial).
    """

    per_degree: np.ndarray
    value: float
    exact: bool


def taylor_growth_certificate(
    obs: Observable, chain: GrowthChain, p_exp: float = 2.0
) -> GrowthNormCertificate:
    if obs.kind == "norm_power":
        raise ValueError(
            "norm powers are not analytic observables; they live in L2 only"
        )
    if obs.kind == "linear":
        if p_exp == 1.0:
            dual = float(np.max(np.abs(obs.coefs)))
        else:
            q = p_exp / (p_exp - 1.0)
            dual = float(np.sum(np.abs(obs.coefs) ** q) ** (1.0 / q))
        per = np.array([abs(obs.mean_shift), dual])
        exact = True
    else:
        deg = obs.degree
        per = np.zeros(deg + 1)
        per[0] = abs(obs.mean_shift)
        for c, ix in obs.terms:
            per[len(ix)] += abs(c)
        for k in range(2, deg + 1):
            per[k] *= math.factorial(k)
        exact = False
    value = 0.0
    for k, u in enumerate(per):
        factor = 1.0 if k == 0 else chain.outer_at(k) ** k
        value = max(value, u * factor)
    return GrowthNormCertificate(per_degree=per, value=value, exact=exact)


def composition_series_bound(
    poly_degree: int,
    poly_bound: float,
    series_amp: float,
    series_rate: float,
    series_damping: float,
    k_max: int = 64,
) -> np.ndarray:
    """Bound sequence for composing a damped power series with a polynomial.

    For a series ``sum a_n x^n / (n!)^damping`` with ``|a_n| <= amp * rate^n``
    composed with a degree-d polynomial bounded by ``B ||x||^k`` per
    homogeneous part, the degree-k piece of the composition satisfies

        bound_k = amp * k^d * (B * rate)^k * sum_j (B * rate)^j / ((floor(k/d) + j)!)^damping

    and the returned value is ``bound_k * k! * log(k + e)^k``, which must
    stay bounded in k whenever ``damping > poly_degree``.  Everything is
    evaluated in log space with the series cut once terms stop mattering.
    """
    d, B = poly_degree, poly_bound
    A, tau, sigma = series_amp, series_rate, series_damping
    if sigma <= d:
        raise ValueError("series damping must exceed the polynomial degree")
    if d < 1 or min(A, tau, B) <= 0:
        raise ValueError("need d >= 1 and positive amp, rate, bound")
    bt = max(B * tau, 1.0)
    log_bt = math.log(bt)

    out = np.empty(k_max + 1)
    for k in range(0, k_max + 1):
        base = math.floor(k / d)
        logs = []
        j = 0
        best = -math.inf
        while True:
            t = j * log_bt - sigma * gammaln(base + j + 1)
            logs.append(t)
            best = max(best, t)
            if t < best - 60.0 and j > 4:
                break
            j += 1
        log_s = float(logsumexp(logs))
        log_q = math.log(A) + (d * math.log(k) if k > 0 else 0.0) + k * log_bt + log_s
        log_b = log_q + gammaln(k + 1) + k * math.log(math.log(k + math.e))
        out[k] = math.exp(min(log_b, 700.0))
    return out
