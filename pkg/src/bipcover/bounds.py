"""Sample-size bounds for covering every nontrivial species-tree bipartition.

Given k species, a minimum internal branch length t_min, and a target
probability q, each bound returns the number of independent gene trees that
guarantees, with probability at least q, that every nontrivial bipartition of
the species tree is displayed by at least one sampled gene tree.

Four bounds are computed, each sharpening the last by modeling more of the
coalescent process on the species tree:

* `original_bound` (M_o) - union bound with the single worst-case per-gene
  success probability g(k-2, 1, t_min).
* `caterpillar_bound` (M_c) - per-bipartition success probabilities
  g(l, 1, t_min) for l = 2..k-2, the exact profile of a caterpillar tree,
  which maximizes the failure sum over all shapes.
* `one_step_bound` (M_s) - lets lineages coalesce for one branch on each side
  of a bipartition's edge before entering it (success probability q_l).
* `balanced_bound` (M_b) - full recursion over a balanced subtree, tracking
  the entire distribution of lineages entering each edge (success w_l).

All four return the least integer n making the respective failure sum drop to
1 - q; `invert_sum_bound` performs that inversion by doubling then bisection.
The real-valued (pre-ceiling) solutions are exposed as well for asymptotic
comparisons and for reasoning about parameter corners where the integer
answer exceeds the bracket cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

from scipy.optimize import brentq

from .coalescent import LineageDistribution, convolve, evolve, g
from .errors import DomainError, NeverSatisfiable, Overflow

# Largest n the integer inversion will bracket to, and the largest count the
# closed-form bounds will report; both are far past any usable gene count.
BRACKET_CAP = 2**40
COUNT_CAP = 2**53


@dataclass(frozen=True)
class BoundSpec:
    """Problem instance: k species, minimum internal branch, target probability."""

    k: int
    t_min: float
    q: float

    def __post_init__(self) -> None:
        if self.k < 4:
            raise DomainError("bounds need k >= 4 (at least one nontrivial bipartition)")
        if not (self.t_min > 0.0) or math.isinf(self.t_min):
            raise DomainError("t_min must be positive and finite")
        if not 0.0 < self.q < 1.0:
            raise DomainError("q must lie strictly between 0 and 1")


@dataclass(frozen=True)
class BoundReport:
    """All four bounds plus the per-length success probabilities behind them.

    The dict tables map subtree leaf counts l = 2..k-2 to the per-gene
    probability that the corresponding bipartition is displayed.
    """

    spec: BoundSpec
    m_o: int
    m_c: int
    m_s: int
    m_b: int
    h_original: float
    h_caterpillar: dict[int, float]
    h_one_step: dict[int, float]
    h_balanced: dict[int, float]

    def __post_init__(self) -> None:
        if not self.m_b <= self.m_s <= self.m_c <= self.m_o:
            raise AssertionError(
                f"bound chain violated: {self.m_b} <= {self.m_s} <= "
                f"{self.m_c} <= {self.m_o} fails"
            )


def _failure_logs(h: Iterable[float]) -> list[float]:
    """log(1 - h_l) for entries below 1; validates domain, flags dead terms."""
    hs = list(h)
    if not hs:
        raise DomainError("need at least one success probability")
    for value in hs:
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"success probability {value!r} outside [0, 1]")
    if any(value == 0.0 for value in hs):
        raise NeverSatisfiable(
            "a success probability of 0 keeps the failure sum at or above 1"
        )
    return [math.log1p(-value) for value in hs if value < 1.0]


def _failure_sum(logs: list[float], n: float) -> float:
    return math.fsum(math.exp(n * lg) for lg in logs)


def invert_sum_bound(h: Iterable[float], q: float) -> int:
    """Least integer n with sum_l (1 - h_l)^n <= 1 - q; n is at least 1."""
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie strictly between 0 and 1")
    logs = _failure_logs(h)
    target = 1.0 - q
    if _failure_sum(logs, 1) <= target:
        return 1
    lo, hi = 1, 2
    while _failure_sum(logs, hi) > target:
        lo, hi = hi, hi * 2
        if hi > BRACKET_CAP:
            raise Overflow(f"inversion exceeds the {BRACKET_CAP} gene-tree cap")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _failure_sum(logs, mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def invert_sum_bound_value(h: Iterable[float], q: float) -> float:
    """Real-valued solution of sum_l (1 - h_l)^n = 1 - q (no ceiling, no cap)."""
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie strictly between 0 and 1")
    logs = _failure_logs(h)
    target = 1.0 - q
    if not logs:
        return 0.0
    hi = 1.0
    while _failure_sum(logs, hi) > target:
        hi *= 2.0
    return float(
        brentq(lambda n: _failure_sum(logs, n) - target, 0.0, hi, xtol=1e-9, rtol=1e-14)
    )


def original_bound_value(spec: BoundSpec) -> float:
    """Real-valued log((1-q)/(k-3)) / log(1 - g(k-2, 1, t_min))."""
    p = g(spec.k - 2, 1, spec.t_min)
    if p == 1.0:
        return 0.0
    if p == 0.0:
        raise Overflow("success probability underflows; the bound exceeds any cap")
    return math.log((1.0 - spec.q) / (spec.k - 3)) / math.log1p(-p)


def original_bound(spec: BoundSpec) -> int:
    """Union bound M_o: every bipartition held to the worst-case probability."""
    value = original_bound_value(spec)
    if value > COUNT_CAP:
        raise Overflow(f"gene count {value:.3e} exceeds {COUNT_CAP}")
    return max(1, math.ceil(value))


def caterpillar_success(spec: BoundSpec) -> dict[int, float]:
    """Per-gene display probability g(l, 1, t_min) for l = 2..k-2."""
    return {ell: g(ell, 1, spec.t_min) for ell in range(2, spec.k - 1)}


def caterpillar_bound(spec: BoundSpec) -> int:
    """M_c: inversion of the caterpillar failure profile."""
    return invert_sum_bound(caterpillar_success(spec).values(), spec.q)


def one_step_success(ell: int, t_min: float) -> float:
    """Display probability after one round of coalescence on each side.

    The l leaves below the bipartition's edge split as evenly as possible;
    each half coalesces for time t_min, the survivors merge, and the merged
    block must reach a single lineage within t_min again.  A half of size 1
    is a pendant edge and deterministically contributes one lineage.
    """
    if ell < 2:
        raise DomainError("one-step success needs l >= 2")
    if not (t_min > 0.0):
        raise DomainError("t_min must be positive")
    lower = evolve(LineageDistribution.point(ell // 2), t_min)
    upper = evolve(LineageDistribution.point((ell + 1) // 2), t_min)
    entering = convolve(lower, upper)
    return math.fsum(p * g(m, 1, t_min) for m, p in entering.items())


def one_step_bound(spec: BoundSpec) -> int:
    """M_s: inversion of the one-step success profile."""
    h = [one_step_success(ell, spec.t_min) for ell in range(2, spec.k - 1)]
    return invert_sum_bound(h, spec.q)


@lru_cache(maxsize=None)
def _surviving(ell: int, t_min: float) -> LineageDistribution:
    """W_l: lineages leaving a balanced l-leaf subtree's root edge."""
    if ell < 1:
        raise DomainError("subtree size must be >= 1")
    if ell == 1:
        return LineageDistribution.point(1)
    return evolve(_entering(ell, t_min), t_min)


@lru_cache(maxsize=None)
def _entering(ell: int, t_min: float) -> LineageDistribution:
    """X_l: lineages entering that edge, i.e. survivors of the two halves."""
    if ell < 2:
        raise DomainError("entering distribution needs l >= 2")
    return convolve(_surviving((ell + 1) // 2, t_min), _surviving(ell // 2, t_min))


class BalancedTables(NamedTuple):
    """Entering (X_l, l >= 2) and surviving (W_l, l >= 1) distributions."""

    entering: dict[int, LineageDistribution]
    surviving: dict[int, LineageDistribution]


def balanced_lineage_distributions(ell_max: int, t_min: float) -> BalancedTables:
    """Bottom-up tables of X_l and W_l for l up to ell_max (memoized)."""
    if ell_max < 1:
        raise DomainError("need ell_max >= 1")
    if not (t_min > 0.0):
        raise DomainError("t_min must be positive")
    surviving = {ell: _surviving(ell, t_min) for ell in range(1, ell_max + 1)}
    entering = {ell: _entering(ell, t_min) for ell in range(2, ell_max + 1)}
    return BalancedTables(entering, surviving)


def balanced_success(ell: int, t_min: float) -> float:
    """w_l = P(W_l = 1): a balanced l-leaf subtree resolves to one lineage."""
    if ell < 2:
        raise DomainError("balanced success needs l >= 2")
    if not (t_min > 0.0):
        raise DomainError("t_min must be positive")
    return _surviving(ell, t_min).prob(1)


def balanced_bound(spec: BoundSpec) -> int:
    """M_b: inversion of the balanced-recursion success profile."""
    h = [balanced_success(ell, spec.t_min) for ell in range(2, spec.k - 1)]
    return invert_sum_bound(h, spec.q)


def balanced_bound_envelope(spec: BoundSpec) -> int:
    """Closed-form upper bound on M_b using the mean entering count at k-2.

    The non-integer mean index is rounded up before evaluating g, which is
    decreasing in its first argument, so the result stays an upper bound.
    """
    mean_in = _entering(spec.k - 2, spec.t_min).mean()
    p = g(math.ceil(mean_in), 1, spec.t_min)
    if p == 1.0:
        return 1
    if p == 0.0:
        raise Overflow("success probability underflows; the bound exceeds any cap")
    value = math.log((1.0 - spec.q) / (spec.k - 3)) / math.log1p(-p)
    if value > COUNT_CAP:
        raise Overflow(f"gene count {value:.3e} exceeds {COUNT_CAP}")
    return max(1, math.ceil(value))


def bound_report(spec: BoundSpec) -> BoundReport:
    """Compute all four bounds and their success tables for one instance."""
    h_cat = caterpillar_success(spec)
    h_one = {ell: one_step_success(ell, spec.t_min) for ell in range(2, spec.k - 1)}
    h_bal = {ell: balanced_success(ell, spec.t_min) for ell in range(2, spec.k - 1)}
    return BoundReport(
        spec=spec,
        m_o=original_bound(spec),
        m_c=invert_sum_bound(h_cat.values(), spec.q),
        m_s=invert_sum_bound(h_one.values(), spec.q),
        m_b=invert_sum_bound(h_bal.values(), spec.q),
        h_original=g(spec.k - 2, 1, spec.t_min),
        h_caterpillar=h_cat,
        h_one_step=h_one,
        h_balanced=h_bal,
    )
