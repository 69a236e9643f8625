"""Gene-tree simulation under the multispecies coalescent.

One lineage enters the species tree at each leaf.  Lineages within a branch
coalesce in pairs at rate 1 per pair for the branch's duration; survivors are
handed to the parent branch, and coalescence continues above the root until a
single lineage remains.  Each simulated gene tree is reduced to the set of
nontrivial bipartitions it displays (in the unrooted sense), which is all the
cover experiments need.

Reproducibility contract: every public experiment takes a master seed and
derives one independent stream per trial from (seed, trial index), so serial
and parallel executions of the same experiment agree bit-for-bit.

Alongside the event-level simulator, `edge_entry_distributions` propagates
exact lineage-count pmfs through the same topology (via the coalescent
module); the two routes are compared in the validation suites.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .bounds import BoundSpec, balanced_bound, original_bound
from .coalescent import LineageDistribution, convolve, evolve
from .errors import CapExceeded, DomainError
from .streams import stream
from .treegen import Bipartition, Node, SpeciesTree, nontrivial_bipartitions

DEFAULT_CAP = 10_000_000

_TRIAL_TAG = "cover-trial"
_PROB_TAG = "cover-prob"
_ROOT_TAG = "root-entry"


def _coalesce(lineages: list[int], length: float, rng: random.Random,
              merged_into: list[int]) -> None:
    """Run pairwise coalescence on `lineages` in place for `length` time units.

    Each merge ORs two clade bitmasks; the resulting masks are appended to
    `merged_into` in event order.
    """
    elapsed = 0.0
    m = len(lineages)
    while m >= 2:
        elapsed += rng.expovariate(m * (m - 1) / 2.0)
        if elapsed >= length:
            return
        i = rng.randrange(m)
        j = rng.randrange(m - 1)
        if j >= i:
            j += 1
        lineages[i] |= lineages[j]
        merged_into.append(lineages[i])
        lineages[j] = lineages[m - 1]
        lineages.pop()
        m -= 1


def _simulate(tree: SpeciesTree, rng: random.Random,
              entry_counts: dict[int, int] | None,
              stop_at_root: bool = False) -> list[int]:
    """Shared core: returns all merge masks; optionally records entry counts.

    `entry_counts`, when given, is filled with {clade bitmask: lineage count
    entering the edge above that internal node} plus the root entry under the
    full-taxon mask.  With `stop_at_root` the above-root phase is skipped.
    """
    merges: list[int] = []

    def survivors(node: Node, at_root: bool) -> list[int]:
        if node.is_leaf:
            return [1 << tree.taxon_index(node.label)]
        incoming: list[int] = []
        for child in node.children:
            incoming.extend(survivors(child, False))
        if entry_counts is not None:
            clade = 0
            for mask in incoming:
                clade |= mask
            entry_counts[clade] = len(incoming)
        if at_root:
            if not stop_at_root:
                _coalesce(incoming, math.inf, rng, merges)
        else:
            _coalesce(incoming, node.length, rng, merges)
        return incoming

    survivors(tree.root, True)
    return merges


def simulate_gene_tree(tree: SpeciesTree, rng: random.Random) -> frozenset[Bipartition]:
    """Bipartitions displayed by one gene tree drawn on this species tree."""
    k = tree.n_taxa
    if k < 4:
        raise DomainError("gene-tree bipartitions need k >= 4")
    merges = _simulate(tree, rng, None)
    masks = {m for m in merges if 2 <= m.bit_count() <= k - 2}
    return frozenset(Bipartition(m, k) for m in masks)


def sample_edge_entry_counts(tree: SpeciesTree, rng: random.Random) -> dict[int, int]:
    """One draw of the lineage count entering each internal edge (and the root).

    Keys are clade bitmasks of the internal nodes, with the all-ones mask for
    the count reaching the root.
    """
    counts: dict[int, int] = {}
    _simulate(tree, rng, counts, stop_at_root=True)
    return counts


def sample_root_entry_counts(tree: SpeciesTree, n: int, seed: int) -> list[int]:
    """`n` independent draws of the lineage count entering the root."""
    rng = stream(seed, 0, _ROOT_TAG)
    full = (1 << tree.n_taxa) - 1
    out = []
    for _ in range(n):
        counts: dict[int, int] = {}
        _simulate(tree, rng, counts, stop_at_root=True)
        out.append(counts[full])
    return out


def edge_entry_distributions(tree: SpeciesTree) -> dict[int, LineageDistribution]:
    """Exact counterpart of `sample_edge_entry_counts`: pmfs per internal edge."""
    table: dict[int, LineageDistribution] = {}

    def surviving(node: Node, at_root: bool) -> tuple[int, LineageDistribution]:
        if node.is_leaf:
            return 1 << tree.taxon_index(node.label), LineageDistribution.point(1)
        masks_dists = [surviving(c, False) for c in node.children]
        clade = 0
        entering = None
        for mask, dist in masks_dists:
            clade |= mask
            entering = dist if entering is None else convolve(entering, dist)
        table[clade] = entering
        if at_root:
            return clade, entering
        return clade, evolve(entering, node.length)

    surviving(tree.root, True)
    return table


def root_lineage_distribution(tree: SpeciesTree) -> LineageDistribution:
    """Exact pmf of the lineage count entering the root population."""
    full = (1 << tree.n_taxa) - 1
    return edge_entry_distributions(tree)[full]


def is_cover(species_bips: Iterable[Bipartition], seen: Iterable[Bipartition]) -> bool:
    """True when every species-tree bipartition appears among those seen."""
    return set(species_bips) <= set(seen)


def genes_to_cover(tree: SpeciesTree, rng: random.Random, cap: int = DEFAULT_CAP) -> int:
    """Gene trees drawn until their bipartition union covers the species tree."""
    if cap < 1:
        raise DomainError("cap must be >= 1")
    missing = set(nontrivial_bipartitions(tree))
    drawn = 0
    while missing:
        if drawn >= cap:
            raise CapExceeded(drawn, missing)
        drawn += 1
        missing -= simulate_gene_tree(tree, rng)
    return max(drawn, 1)


def cover_trials(tree: SpeciesTree, trials: int, seed: int,
                 cap: int = DEFAULT_CAP) -> tuple[float, ...]:
    """Independent genes-to-cover outcomes; capped trials appear as +inf."""
    if trials < 1:
        raise DomainError("need at least one trial")
    out = []
    for index in range(trials):
        rng = stream(seed, index, _TRIAL_TAG)
        try:
            out.append(float(genes_to_cover(tree, rng, cap)))
        except CapExceeded:
            out.append(math.inf)
    return tuple(out)


def empirical_quantile(tree: SpeciesTree, q: float, trials: int, seed: int,
                       cap: int = DEFAULT_CAP) -> int:
    """The ceil(q * trials)-th order statistic of genes-to-cover outcomes."""
    if trials < 100:
        raise DomainError("need at least 100 trials for a quantile estimate")
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie strictly between 0 and 1")
    sample = sorted(cover_trials(tree, trials, seed, cap))
    value = sample[math.ceil(q * trials) - 1]
    if math.isinf(value):
        capped = sum(1 for v in sample if math.isinf(v))
        raise CapExceeded(
            cap,
            frozenset(),
            message=f"quantile undefined: {capped}/{trials} trials hit the "
            f"{cap} gene-tree cap",
        )
    return int(value)


class ProbabilityEstimate(NamedTuple):
    value: float
    se: float


def cover_probability(tree: SpeciesTree, n: int, trials: int,
                      seed: int) -> ProbabilityEstimate:
    """Fraction of trials in which `n` gene trees already cover, with its SE."""
    if n < 1:
        raise DomainError("need at least one gene tree")
    if trials < 100:
        raise DomainError("need at least 100 trials")
    target = nontrivial_bipartitions(tree)
    hits = 0
    for index in range(trials):
        rng = stream(seed, index, _PROB_TAG)
        missing = set(target)
        for _ in range(n):
            if not missing:
                break
            missing -= simulate_gene_tree(tree, rng)
        hits += not missing
    p_hat = hits / trials
    return ProbabilityEstimate(p_hat, math.sqrt(p_hat * (1.0 - p_hat) / trials))


@dataclass(frozen=True)
class CoverExperimentResult:
    """Empirical quantile next to the bounds it is meant to validate."""

    n_e: int
    m_o: int
    m_b: int
    ratio_o: float
    ratio_b: float
    trials: int
    seed: int
    capped: int

    def __post_init__(self) -> None:
        if self.n_e < 1:
            raise DomainError("empirical quantile must be >= 1")


def overestimation_experiment(tree: SpeciesTree, spec: BoundSpec, trials: int,
                              seed: int, cap: int = DEFAULT_CAP) -> CoverExperimentResult:
    """How far the bounds overshoot the empirical q-quantile on this tree."""
    if spec.k != tree.n_taxa:
        raise DomainError(f"spec.k={spec.k} but the tree has {tree.n_taxa} taxa")
    t_tree = tree.internal_min_branch
    if not math.isclose(spec.t_min, t_tree, rel_tol=1e-9, abs_tol=0.0):
        raise DomainError(
            f"spec.t_min={spec.t_min!r} but the tree's shortest internal "
            f"branch is {t_tree!r}"
        )
    if trials < 100:
        raise DomainError("need at least 100 trials for a quantile estimate")
    sample = sorted(cover_trials(tree, trials, seed, cap))
    value = sample[math.ceil(spec.q * trials) - 1]
    capped = sum(1 for v in sample if math.isinf(v))
    if math.isinf(value):
        raise CapExceeded(
            cap,
            frozenset(),
            message=f"quantile undefined: {capped}/{trials} trials hit the "
            f"{cap} gene-tree cap",
        )
    n_e = int(value)
    m_o = original_bound(spec)
    m_b = balanced_bound(spec)
    return CoverExperimentResult(
        n_e=n_e,
        m_o=m_o,
        m_b=m_b,
        ratio_o=m_o / n_e,
        ratio_b=m_b / n_e,
        trials=trials,
        seed=seed,
        capped=capped,
    )
