"""Limit laws and closed-form approximations for the coalescent bounds.

The time to reduce k lineages to one is a sum of independent exponentials
with distinct rates m(m-1)/2 - a hypoexponential variable.  This module
provides that family in general (`hypoexp_cdf` / `hypoexp_pdf`), its k -> oo
limit (`s_infinity`, with density `f_infinity`), the small- and large-time
shapes of g(k, 1, T), and the asymptotic forms of the union-bound sample size
in its three regimes.

The limit distribution is evaluated by a pair of exact expansions rather than
by truncating the k-indexed family: an alternating exponential series that
converges fast for T >= 2, and its theta-function transform that converges
fast for T < 2.  Together they give full relative precision over the whole
line (underflowing to 0 only below T ~ 0.02, where the value drops under the
smallest positive double).  A truncation at any fixed k would carry an O(1/k)
gap - the very gap law this module quantifies - and could not meet the
accuracy the small-T diagnostics need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .bounds import BoundSpec, original_bound_value
from .coalescent import CANCEL_TOL, _TERM_RELERR, g, poisson_weights
from .errors import DomainError, UnstableEvaluation

# Beyond this many rates the closed coefficient formula is hopeless and the
# stage-chain route is used directly.
FORMULA_MAX_RATES = 40

# Crossover between the two exact expansions of the limit distribution.
_SERIES_SWITCH = 2.0

REGIMES = ("small-T", "large-T", "large-k")


@dataclass(frozen=True)
class HypoexponentialSpec:
    """Sum of independent exponentials with strictly increasing distinct rates."""

    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.rates:
            raise DomainError("need at least one rate")
        if any(not (r > 0.0) or math.isinf(r) for r in self.rates):
            raise DomainError("rates must be positive and finite")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise DomainError("rates must be strictly increasing")

    @classmethod
    def kingman(cls, k: int) -> "HypoexponentialSpec":
        """Rates m(m-1)/2 for m = 2..k: the waiting times from k lineages to 1."""
        if k < 2:
            raise DomainError("the coalescent chain needs k >= 2")
        return cls(tuple(m * (m - 1) / 2.0 for m in range(2, k + 1)))


@lru_cache(maxsize=512)
def _signed_coefficients(rates: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
    """log-magnitudes and signs of C_i = prod_{m != i} lam_m / (lam_m - lam_i).

    For increasing rates, exactly i - 1 of the gaps are negative, so the sign
    of C_i is (-1)^(i-1).
    """
    lam = np.asarray(rates)
    logmag = np.empty(lam.size)
    for i in range(lam.size):
        others = np.delete(lam, i)
        logmag[i] = float(np.sum(np.log(others) - np.log(np.abs(others - lam[i]))))
    signs = np.where(np.arange(lam.size) % 2 == 0, 1.0, -1.0)
    return logmag, signs


def _formula_terms(spec: HypoexponentialSpec, T: float, with_rate: bool) -> np.ndarray:
    logmag, signs = _signed_coefficients(spec.rates)
    lam = np.asarray(spec.rates)
    logs = logmag - lam * T
    if with_rate:
        logs = logs + np.log(lam)
    return signs * np.exp(logs)


def _formula_cdf(spec: HypoexponentialSpec, T: float) -> float:
    terms = _formula_terms(spec, T, with_rate=False)
    tail = math.fsum(terms)
    if _TERM_RELERR * float(np.sum(np.abs(terms))) > CANCEL_TOL:
        raise UnstableEvaluation("hypoexponential coefficients cancel too strongly")
    value = 1.0 - tail
    if not -1e-9 <= value <= 1.0 + 1e-9:
        raise UnstableEvaluation(f"hypoexponential CDF {value!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def _formula_pdf(spec: HypoexponentialSpec, T: float) -> float:
    terms = _formula_terms(spec, T, with_rate=True)
    value = math.fsum(terms)
    if _TERM_RELERR * float(np.sum(np.abs(terms))) > CANCEL_TOL:
        raise UnstableEvaluation("hypoexponential coefficients cancel too strongly")
    if value < -1e-9:
        raise UnstableEvaluation(f"hypoexponential density {value!r} negative")
    return max(value, 0.0)


@lru_cache(maxsize=512)
def _stage_occupation(rates: tuple[float, ...], T: float) -> np.ndarray:
    """P(chain sits in stage s at time T), s = 0..k with k = absorbed."""
    lam = np.asarray(rates)
    big = float(lam[-1])
    weights = poisson_weights(big * T)
    advance = lam / big
    v = np.zeros(lam.size + 1)
    v[0] = 1.0
    out = weights[0] * v
    for w in weights[1:]:
        nxt = v.copy()
        nxt[:-1] -= v[:-1] * advance
        nxt[1:] += v[:-1] * advance
        v = nxt
        out += w * v
    np.clip(out, 0.0, 1.0, out=out)
    out.setflags(write=False)
    return out


def hypoexp_cdf(spec: HypoexponentialSpec, T: float) -> float:
    """P(sum of the stage durations <= T)."""
    if not (T >= 0.0) or math.isinf(T):
        raise DomainError("T must be finite and >= 0")
    if T == 0.0:
        return 0.0
    if len(spec.rates) <= FORMULA_MAX_RATES:
        try:
            return _formula_cdf(spec, T)
        except UnstableEvaluation:
            pass
    return float(_stage_occupation(spec.rates, T)[-1])


def hypoexp_pdf(spec: HypoexponentialSpec, T: float) -> float:
    """Density of the sum at T (absorption flux of the stage chain)."""
    if not (T >= 0.0) or math.isinf(T):
        raise DomainError("T must be finite and >= 0")
    if T == 0.0:
        return spec.rates[0] if len(spec.rates) == 1 else 0.0
    if len(spec.rates) <= FORMULA_MAX_RATES:
        try:
            return _formula_pdf(spec, T)
        except UnstableEvaluation:
            pass
    occupation = _stage_occupation(spec.rates, T)
    return float(spec.rates[-1] * occupation[-2])


def s_infinity(T: float) -> float:
    """Probability that infinitely many coalescences all finish within T.

    This is the k -> oo limit of g(k, 1, T); g(k, 1, T) decreases to it.
    Exact alternating series for T >= 2, theta-transformed series below.
    """
    if not (T > 0.0):
        raise DomainError("T must be positive")
    if T >= _SERIES_SWITCH:
        terms = []
        k = 1
        while True:
            term = (2 * k - 1) * math.exp(-k * (k - 1) / 2.0 * T)
            terms.append(term if k % 2 == 1 else -term)
            if k > 2 and term < 1e-18:
                break
            k += 1
        return min(max(math.fsum(terms), 0.0), 1.0)
    prefactor = math.exp(T / 8.0) * math.pi**1.5 * (2.0 / T) ** 1.5
    total = 0.0
    j, sign = 1, 1.0
    while True:
        term = sign * j * math.exp(-j * j * math.pi**2 / (2.0 * T))
        total += term
        if abs(term) <= 1e-18 * abs(total) + 1e-320:
            break
        j += 2
        sign = -sign
    return min(max(prefactor * total, 0.0), 1.0)


def f_infinity(T: float) -> float:
    """Density of the total time used by infinitely many coalescences."""
    if not (T > 0.0):
        raise DomainError("T must be positive")
    if T >= _SERIES_SWITCH:
        terms = []
        for k in range(2, 60):
            lam = k * (k - 1) / 2.0
            term = (2 * k - 1) * lam * math.exp(-lam * T)
            terms.append(term if k % 2 == 0 else -term)
            if k > 3 and term < 1e-18:
                break
        return max(math.fsum(terms), 0.0)
    prefactor = math.exp(T / 8.0) * math.pi**1.5 * (2.0 / T) ** 1.5
    total = 0.0
    j, sign = 1, 1.0
    while True:
        peak = j * j * math.pi**2 / 2.0
        term = sign * j * math.exp(-peak / T) * (0.125 - 1.5 / T + peak / (T * T))
        total += term
        if abs(term) <= 1e-18 * abs(total) + 1e-320:
            break
        j += 2
        sign = -sign
    return max(prefactor * total, 0.0)


def g_small_T_approx(k: int, T: float) -> float:
    """Leading small-time shape of g(k, 1, T): k! T^(k-1) / 2^(k-1)."""
    if k < 2:
        raise DomainError("need k >= 2")
    if not (T > 0.0):
        raise DomainError("T must be positive")
    return math.exp(
        math.lgamma(k + 1) + (k - 1) * (math.log(T) - math.log(2.0))
    )


def g_large_T_approx(k: int, T: float) -> float:
    """Leading large-time shape of g(k, 1, T): 1 - 3(k-1)/(k+1) e^-T."""
    if k < 2:
        raise DomainError("need k >= 2")
    return 1.0 - 3.0 * (k - 1) / (k + 1) * math.exp(-T)


def u_of_T(T: float) -> float:
    """(2 - e^(-T/2)) / (1 - e^(-T/2)): cap on the mean lineage count entering
    any edge of a balanced tree with minimum branch length T; ~ 2/T as T -> 0."""
    if not (T > 0.0):
        raise DomainError("T must be positive")
    decay = math.exp(-T / 2.0)
    return (2.0 - decay) / (1.0 - decay)


class ImprovementFactor(NamedTuple):
    """Evaluated improvement ratio together with its claimed small-T asymptote."""

    value: float
    asymptote: float


def beta_T(T: float) -> ImprovementFactor:
    """Improvement of the balanced-envelope exponent over the naive one.

    Ratio of -log(1 - g(ceil(u(T)), 1, T)) to -log(1 - s_infinity(T)); the
    non-integer index u(T) is rounded up, which is conservative because
    g(., 1, T) decreases in its first argument.  The second field carries the
    reference asymptote pi^2 / (2 T) for comparison.
    """
    if not (T > 0.0):
        raise DomainError("T must be positive")
    index = math.ceil(u_of_T(T))
    numerator = -math.log1p(-g(index, 1, T))
    denominator = -math.log1p(-s_infinity(T))
    return ImprovementFactor(numerator / denominator, math.pi**2 / (2.0 * T))


@dataclass(frozen=True)
class AsymptoticReport:
    """One regime's closed-form prediction next to the exact bound value."""

    regime: str
    approximation: float
    exact: float

    @property
    def ratio(self) -> float:
        return self.exact / self.approximation


def m_o_asymptotics(k: int, T: float, q: float, regime: str) -> AsymptoticReport:
    """Compare the union-bound sample size against its closed regime form.

    The exact side is the real-valued solution (no integer ceiling), since
    the regimes describe the formula, not its rounding.  Forms:
    large-T, log((k-3)/(1-q)) / T; small-T, the same numerator times
    2^(k-3) / ((k-2)! T^(k-3)); large-k, numerator / -log(1 - s_infinity(T)).
    """
    if regime not in REGIMES:
        raise DomainError(f"regime must be one of {REGIMES}")
    spec = BoundSpec(k=k, t_min=T, q=q)
    exact = original_bound_value(spec)
    margin = math.log((k - 3) / (1.0 - q))
    if regime == "large-T":
        approx = margin / T
    elif regime == "small-T":
        approx = math.exp(
            math.log(margin)
            + (k - 3) * math.log(2.0)
            - math.lgamma(k - 1)
            - (k - 3) * math.log(T)
        )
    else:
        approx = margin / -math.log1p(-s_infinity(T))
    return AsymptoticReport(regime=regime, approximation=approx, exact=exact)
