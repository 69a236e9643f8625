"""Ancestral-lineage transition kernel of the Kingman coalescent.

A block of i exchangeable lineages evolving backwards in time for T coalescent
units leaves behind a random number of surviving lineages Z_i^T in {1, ..., i}.
This module computes the transition probabilities

    g(i, j, T) = P(Z_i^T = j),

together with the distribution-level operations built on them: pushing a pmf
over lineage counts through a branch (`evolve`), merging the lineages of two
child branches (`convolve`), and a closed-form bound on the surviving mean
(`expected_lineages_bound`).

Two evaluation routes are provided and cross-dispatch automatically:

* `g_tavare` - the classical alternating finite sum.  Fast, but the terms
  carry huge rising/falling factorials with alternating signs, so for large i
  and small T the sum cancels catastrophically.  Magnitudes are evaluated in
  log space, the signed terms are combined with exact summation, and the
  accumulated absolute mass yields a cancellation estimate.
* `g_stable` - uniformization of the pure-death chain with rates m(m-1)/2.
  Every term is positive, so the result is accurate in relative terms at any
  magnitude; the Poisson expansion is truncated once its tail mass drops
  below `POISSON_TAIL`.

`g` tries the alternating sum first and falls back to uniformization whenever
the cancellation estimate exceeds `CANCEL_TOL` or the raw value leaves
[-BOUNDARY_SLACK, 1 + BOUNDARY_SLACK].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, UnstableEvaluation

# Hard cap on lineage counts; far beyond any species count used in practice
# and keeps the factorial machinery within floating-point reach.
MAX_LINEAGES = 512

# Pmf entries below TRIM_EPS may be trimmed from the edges of a support;
# trimming may remove at most TRIM_MASS mass in total.
TRIM_EPS = 1e-15
TRIM_MASS = 1e-12

# Dispatch thresholds for the alternating sum.
CANCEL_TOL = 1e-8
BOUNDARY_SLACK = 1e-9
_TERM_RELERR = 1e-12  # conservative per-term evaluation error (log-space exp/lgamma)

POISSON_TAIL = 1e-13


def _check_ij(i: int, j: int) -> None:
    if i < 1 or i > MAX_LINEAGES:
        raise DomainError(f"lineage count i={i} outside [1, {MAX_LINEAGES}]")
    if j < 1 or j > i:
        raise DomainError(f"target count j={j} outside [1, i={i}]")


def _check_time(T: float) -> None:
    if not (T >= 0.0) or math.isinf(T) or math.isnan(T):
        raise DomainError(f"branch length T={T} must be finite and >= 0")


def g_tavare(i: int, j: int, T: float) -> float:
    """Transition probability by the alternating finite sum.

    Raises UnstableEvaluation when cancellation makes the result untrustworthy
    (estimated error above CANCEL_TOL, or raw value outside the unit interval
    by more than BOUNDARY_SLACK).
    """
    _check_ij(i, j)
    _check_time(T)
    if T == 0.0:
        return 1.0 if i == j else 0.0

    ks = np.arange(j, i + 1, dtype=np.float64)
    # magnitude of each term, in logs:
    #   e^{-k(k-1)T/2} (2k-1) j_(k-1) i_[k] / ( j! (k-j)! i_(k) )
    # with a_(m) the rising and a_[m] the falling factorial.
    logmag = (
        -ks * (ks - 1.0) / 2.0 * T
        + np.log(2.0 * ks - 1.0)
        + gammaln(j + ks - 1.0)
        - math.lgamma(j)
        + math.lgamma(i + 1)
        - gammaln(i - ks + 1.0)
        - math.lgamma(j + 1)
        - gammaln(ks - j + 1.0)
        - gammaln(i + ks)
        + math.lgamma(i)
    )
    terms = np.exp(logmag)
    terms[(ks.astype(np.int64) - j) % 2 == 1] *= -1.0

    total = math.fsum(terms)
    est_err = _TERM_RELERR * float(np.sum(np.abs(terms)))
    if est_err > CANCEL_TOL:
        raise UnstableEvaluation(
            f"g({i},{j},{T}): cancellation estimate {est_err:.2e} exceeds {CANCEL_TOL:.0e}"
        )
    if not (-BOUNDARY_SLACK <= total <= 1.0 + BOUNDARY_SLACK):
        raise UnstableEvaluation(f"g({i},{j},{T}): raw value {total!r} outside [0, 1]")
    return min(max(total, 0.0), 1.0)


def poisson_weights(mu: float) -> np.ndarray:
    """Poisson(mu) pmf truncated once cumulative mass reaches 1 - POISSON_TAIL."""
    n_hi = int(mu + 12.0 * math.sqrt(mu + 1.0) + 30.0)
    ns = np.arange(n_hi + 1, dtype=np.float64)
    logw = -mu + ns * math.log(mu) - gammaln(ns + 1.0)
    weights = np.exp(logw)
    cut = int(np.searchsorted(np.cumsum(weights), 1.0 - POISSON_TAIL)) + 1
    return weights[: min(cut + 1, n_hi + 1)]


@lru_cache(maxsize=2048)
def _uniform_row(i: int, T: float) -> np.ndarray:
    """Full row P(Z_i^T = j), j = 1..i, by uniformization; read-only array."""
    if i == 1 or T == 0.0:
        row = np.zeros(i)
        row[i - 1] = 1.0
        row.setflags(write=False)
        return row
    rates = np.arange(1, i + 1, dtype=np.float64)
    rates *= (rates - 1.0) / 2.0  # rates[m-1] = m(m-1)/2; rate 0 in state 1
    lam = rates[-1]
    weights = poisson_weights(lam * T)

    stay = 1.0 - rates / lam
    drop = (rates / lam)[1:]
    v = np.zeros(i)
    v[-1] = 1.0
    row = weights[0] * v
    for w in weights[1:]:
        nxt = v * stay
        nxt[:-1] += v[1:] * drop
        v = nxt
        row += w * v
    np.clip(row, 0.0, 1.0, out=row)
    row.setflags(write=False)
    return row


def g_stable(i: int, j: int, T: float) -> float:
    """Transition probability by the positive-term uniformization route."""
    _check_ij(i, j)
    _check_time(T)
    return float(_uniform_row(i, T)[j - 1])


def g(i: int, j: int, T: float) -> float:
    """P(Z_i^T = j): alternating sum when trustworthy, else uniformization.

    Reads from the cached whole-row dispatcher so that all entries of a row
    come from a single route; mixing routes within a row costs a few 1e-10 of
    row mass, which would break the row-stochasticity guarantee.
    """
    _check_ij(i, j)
    _check_time(T)
    return float(_transition_row(i, T)[j - 1])


@lru_cache(maxsize=2048)
def _transition_row(i: int, T: float) -> np.ndarray:
    """Row of g(i, *, T) with a whole-row stability policy.

    Uses the alternating sum per entry, but switches the entire row to
    uniformization as soon as any entry is unstable or the summed cancellation
    estimates threaten the row-sum budget.  Keeping the row on a single route
    preserves row stochasticity to ~1e-12.
    """
    _check_time(T)
    if i < 1 or i > MAX_LINEAGES:
        raise DomainError(f"lineage count i={i} outside [1, {MAX_LINEAGES}]")
    if i == 1 or T == 0.0:
        return _uniform_row(i, T)
    row = np.empty(i)
    for j in range(1, i + 1):
        try:
            row[j - 1] = g_tavare(i, j, T)
        except UnstableEvaluation:
            return _uniform_row(i, T)
    # Entries passed individually; still guard the row as a whole.
    if abs(float(row.sum()) - 1.0) > 1e-10:
        return _uniform_row(i, T)
    row.setflags(write=False)
    return row


@dataclass(frozen=True)
class LineageDistribution:
    """Pmf over surviving-lineage counts with contiguous support.

    `probs[idx]` is the probability of count `min_count + idx`.  Support never
    includes 0, probabilities sum to 1 within 1e-10, and edge entries below
    TRIM_EPS are trimmed at construction (with renormalization) as long as the
    trimmed mass stays below TRIM_MASS.
    """

    min_count: int
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.min_count < 1:
            raise DomainError("lineage counts start at 1")
        if not self.probs:
            raise DomainError("empty distribution")
        if self.max_count > MAX_LINEAGES:
            raise DomainError(f"support exceeds the {MAX_LINEAGES}-lineage cap")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-10:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        if min(self.probs) < -1e-12:
            raise DomainError("negative probability")

    @property
    def max_count(self) -> int:
        return self.min_count + len(self.probs) - 1

    @classmethod
    def point(cls, count: int) -> "LineageDistribution":
        return cls(count, (1.0,))

    @classmethod
    def from_weights(cls, min_count: int, weights) -> "LineageDistribution":
        """Build from raw weights, trimming negligible edge mass."""
        arr = np.asarray(weights, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("weights must be a nonempty 1-d sequence")
        if float(arr.min()) < -1e-12:
            raise DomainError("negative probability")
        np.clip(arr, 0.0, None, out=arr)
        lo, hi = 0, arr.size
        while lo < hi - 1 and arr[lo] < TRIM_EPS:
            lo += 1
        while hi - 1 > lo and arr[hi - 1] < TRIM_EPS:
            hi -= 1
        kept = arr[lo:hi]
        trimmed = float(arr.sum() - kept.sum())
        if trimmed > TRIM_MASS:
            raise UnstableEvaluation(f"trimming would discard mass {trimmed:.3e}")
        if trimmed != 0.0:
            kept = kept / kept.sum()
        return cls(min_count + lo, tuple(float(p) for p in kept))

    def prob(self, count: int) -> float:
        if self.min_count <= count <= self.max_count:
            return self.probs[count - self.min_count]
        return 0.0

    def items(self):
        for idx, p in enumerate(self.probs):
            yield self.min_count + idx, p

    def mean(self) -> float:
        return math.fsum(c * p for c, p in self.items())

    def cdf(self) -> tuple[float, ...]:
        """Cumulative probabilities aligned with the support."""
        out, acc = [], 0.0
        for p in self.probs:
            acc += p
            out.append(acc)
        return tuple(out)


def evolve(dist: LineageDistribution, T: float) -> LineageDistribution:
    """Push a lineage-count pmf through a branch of length T."""
    _check_time(T)
    if T == 0.0:
        return dist
    out = np.zeros(dist.max_count)
    for count, p in dist.items():
        if p > 0.0:
            out[:count] += p * _transition_row(count, T)
    return LineageDistribution.from_weights(1, out)


def convolve(a: LineageDistribution, b: LineageDistribution) -> LineageDistribution:
    """Distribution of the sum of two independent lineage counts."""
    merged = np.convolve(np.asarray(a.probs), np.asarray(b.probs))
    return LineageDistribution.from_weights(a.min_count + b.min_count, merged)


def expected_lineages_bound(i: int, T: float) -> float:
    """Closed-form upper bound on E Z_i^T: 1 / (1 - (1 - 1/i) e^{-T/2})."""
    if i < 1:
        raise DomainError("need at least one lineage")
    if not (T > 0.0):
        raise DomainError("T must be positive")
    return 1.0 / (1.0 - (1.0 - 1.0 / i) * math.exp(-T / 2.0))
