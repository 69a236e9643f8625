"""Rooted binary species trees and their bipartition structure.

Provides the tree constructions the sample-size bounds are evaluated on
(caterpillar, balanced, Yule), extraction of the descendant counts that feed
those bounds, enumeration of all leaf-labeled topologies for brute-force
extremality checks, and the single greedy rebalancing move used to compare a
tree against its balanced counterpart.

Conventions fixed here and relied on everywhere else:

* Trees are immutable.  `Node` is a frozen dataclass; `SpeciesTree` wraps the
  root and validates shape invariants once at construction.
* Taxa are indexed 0..k-1 in left-to-right leaf order; auto-generated labels
  are ``t0..t{k-1}``.
* A bipartition is stored as a bitmask over taxon indices, canonicalized to
  the side NOT containing taxon 0.  The two edges meeting at the root induce
  one and the same bipartition; descendant counts resolve the ambiguity by
  taking the smaller of the two root-subtree sizes.
* The minimum branch length of a tree is taken over internal edges only
  (edges whose child is not a leaf): a pendant edge carries a single lineage,
  so no coalescence can happen on it and it never enters the bounds.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .errors import AlreadyBalanced, DomainError

__all__ = [
    "Node",
    "SpeciesTree",
    "Bipartition",
    "caterpillar",
    "balanced",
    "yule",
    "descendant_counts",
    "all_edge_descendant_counts",
    "nontrivial_bipartitions",
    "enumerate_topologies",
    "rebalance_step",
    "is_balanced",
    "shape_key",
    "to_newick",
    "from_newick",
]


@dataclass(frozen=True)
class Node:
    """One vertex; `length` is the edge to the parent (0.0 at the root)."""

    children: tuple["Node", ...]
    label: str | None
    length: float
    n_leaves: int

    @staticmethod
    def leaf(label: str, length: float) -> "Node":
        return Node((), label, length, 1)

    @staticmethod
    def internal(left: "Node", right: "Node", length: float) -> "Node":
        return Node((left, right), None, length, left.n_leaves + right.n_leaves)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class SpeciesTree:
    root: Node
    _taxon_index: dict[str, int] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        labels = []
        stack = [(self.root, True)]
        while stack:
            node, is_root = stack.pop()
            if node.is_leaf:
                if node.label is None:
                    raise DomainError("leaf without a label")
                labels.append(node.label)
            elif len(node.children) != 2:
                raise DomainError("internal nodes must have exactly 2 children")
            if not is_root and not (node.length > 0.0):
                raise DomainError(f"branch length {node.length!r} must be positive")
            for child in reversed(node.children):
                stack.append((child, False))
        if len(set(labels)) != len(labels):
            raise DomainError("duplicate leaf labels")
        self._taxon_index.update({lab: i for i, lab in enumerate(labels)})

    @property
    def n_taxa(self) -> int:
        return self.root.n_leaves

    @property
    def leaf_labels(self) -> tuple[str, ...]:
        """Labels in left-to-right order; position equals taxon index."""
        ordered = sorted(self._taxon_index, key=self._taxon_index.get)
        return tuple(ordered)

    def taxon_index(self, label: str) -> int:
        return self._taxon_index[label]

    @property
    def internal_min_branch(self) -> float:
        """Shortest edge whose child is itself internal; requires k >= 3."""
        if self.n_taxa < 3:
            raise DomainError("internal_min_branch needs at least 3 leaves")
        best = math.inf
        for node, is_root in _walk(self.root):
            if not is_root and not node.is_leaf:
                best = min(best, node.length)
        return best


def _walk(root: Node) -> Iterator[tuple[Node, bool]]:
    stack = [(root, True)]
    while stack:
        node, is_root = stack.pop()
        yield node, is_root
        for child in node.children:
            stack.append((child, False))


@dataclass(frozen=True)
class Bipartition:
    """Split of taxa 0..n_taxa-1; `mask` is the side not containing taxon 0."""

    mask: int
    n_taxa: int

    def __post_init__(self) -> None:
        full = (1 << self.n_taxa) - 1
        if not 0 < self.mask < full:
            raise DomainError("a bipartition needs a taxon on each side")
        if self.mask & 1:
            object.__setattr__(self, "mask", full ^ self.mask)

    @property
    def side_sizes(self) -> tuple[int, int]:
        inside = self.mask.bit_count()
        return inside, self.n_taxa - inside

    @property
    def is_nontrivial(self) -> bool:
        return min(self.side_sizes) >= 2

    def taxa(self) -> frozenset[int]:
        """Canonical side as a set of taxon indices."""
        return frozenset(i for i in range(self.n_taxa) if self.mask >> i & 1)

    def __str__(self) -> str:
        side = sorted(self.taxa())
        return "{" + ",".join(map(str, side)) + "}"


def caterpillar(k: int, T: float) -> SpeciesTree:
    """Fully unbalanced tree ((((t0,t1),t2),t3),...); every edge has length T."""
    if k < 3:
        raise DomainError("caterpillar needs k >= 3")
    if not (T > 0.0):
        raise DomainError("branch length must be positive")
    node = Node.internal(Node.leaf("t0", T), Node.leaf("t1", T), T)
    for i in range(2, k):
        node = Node.internal(node, Node.leaf(f"t{i}", T), T)
    return SpeciesTree(node)


def balanced(k: int, T: float) -> SpeciesTree:
    """Recursive even split (left gets the extra leaf); every edge length T."""
    if k < 2:
        raise DomainError("balanced needs k >= 2")
    if not (T > 0.0):
        raise DomainError("branch length must be positive")

    def build(lo: int, hi: int) -> Node:
        if hi - lo == 1:
            return Node.leaf(f"t{lo}", T)
        mid = lo + (hi - lo + 1) // 2
        return Node.internal(build(lo, mid), build(mid, hi), T)

    return SpeciesTree(build(0, k))


def yule(k: int, t_min: float, seed: int) -> SpeciesTree:
    """Random pure-birth tree rescaled so the shortest internal edge is t_min.

    The process starts from the root split (2 lineages); every extant lineage
    splits at rate 1, so inter-event times are exponential with rate equal to
    the current lineage count and the splitting lineage is uniform.  After the
    k-th leaf appears one further exponential holding time is drawn so the
    youngest pendant edges have positive length.  All branch lengths are then
    multiplied by ``t_min / internal_min_branch``.
    """
    if k < 4:
        raise DomainError("yule needs k >= 4")
    if not (t_min > 0.0):
        raise DomainError("t_min must be positive")
    rng = random.Random(seed)

    # Growing lineages are [birth_time, left_child, right_child]; children are
    # filled in when the lineage splits, and remain None for final leaves.
    root_split = 0.0
    tips: list[list] = [[root_split, None, None], [root_split, None, None]]
    root_kids = (tips[0], tips[1])
    now = 0.0
    while len(tips) < k:
        now += rng.expovariate(len(tips))
        parent = tips.pop(rng.randrange(len(tips)))
        kids = ([now, None, None], [now, None, None])
        parent[1], parent[2] = kids
        tips.extend(kids)
    now += rng.expovariate(k)

    counter = iter(range(k))

    def freeze(rec: list) -> Node:
        birth = rec[0]
        if rec[1] is None:
            return Node.leaf(f"t{next(counter)}", now - birth)
        split = rec[1][0]
        return Node.internal(freeze(rec[1]), freeze(rec[2]), split - birth)

    draft = SpeciesTree(
        Node.internal(freeze(root_kids[0]), freeze(root_kids[1]), 0.0)
    )

    scale = t_min / draft.internal_min_branch
    return SpeciesTree(_rescale(draft.root, scale, at_root=True))


def _rescale(node: Node, scale: float, at_root: bool = False) -> Node:
    kids = tuple(_rescale(c, scale) for c in node.children)
    length = 0.0 if at_root else node.length * scale
    return Node(kids, node.label, length, node.n_leaves)


def descendant_counts(tree: SpeciesTree) -> list[int]:
    """Leaf count under each nontrivial bipartition's defining edge.

    Every internal edge not touching the root contributes the size of the
    subtree below it.  The two root edges share one bipartition and contribute
    the smaller root-subtree size, provided both sides have >= 2 leaves.
    Result is sorted; length is k - 3.
    """
    k = tree.n_taxa
    if k < 4:
        raise DomainError("descendant counts need k >= 4")
    out = []
    left, right = tree.root.children
    root_alpha = min(left.n_leaves, right.n_leaves)
    if root_alpha >= 2:
        out.append(root_alpha)
    for top in tree.root.children:
        for node, is_sub_root in _walk(top):
            if not is_sub_root and not node.is_leaf:
                out.append(node.n_leaves)
    out.sort()
    return out


def all_edge_descendant_counts(tree: SpeciesTree) -> list[int]:
    """Leaf count below every one of the 2k-2 edges (pendant edges give 1)."""
    out = [node.n_leaves for node, is_root in _walk(tree.root) if not is_root]
    out.sort()
    return out


def nontrivial_bipartitions(tree: SpeciesTree) -> frozenset[Bipartition]:
    """The k-3 canonical bipartitions induced by this tree's internal edges."""
    k = tree.n_taxa
    if k < 4:
        raise DomainError("bipartitions need k >= 4")
    masks: set[int] = set()

    def mask_of(node: Node) -> int:
        if node.is_leaf:
            return 1 << tree.taxon_index(node.label)
        m = 0
        for child in node.children:
            cm = mask_of(child)
            if min(child.n_leaves, k - child.n_leaves) >= 2:
                masks.add(cm)
            m |= cm
        return m

    mask_of(tree.root)
    return frozenset(Bipartition(m, k) for m in masks)


def enumerate_topologies(k: int) -> Iterator[SpeciesTree]:
    """All (2k-3)!! leaf-labeled rooted binary shapes, unit branch lengths."""
    if not 3 <= k <= 9:
        raise DomainError("topology enumeration supports 3 <= k <= 9")

    def grow(shape, new_leaf: str):
        # Attach the new leaf above any of the current nodes, root included.
        yield (shape, new_leaf)
        if isinstance(shape, tuple):
            left, right = shape
            for sub in grow(left, new_leaf):
                yield (sub, right)
            for sub in grow(right, new_leaf):
                yield (left, sub)

    def extend(shape, next_label: int):
        if next_label == k:
            yield shape
            return
        for bigger in grow(shape, f"t{next_label}"):
            yield from extend(bigger, next_label + 1)

    def build(shape) -> Node:
        if isinstance(shape, str):
            return Node.leaf(shape, 1.0)
        return Node.internal(build(shape[0]), build(shape[1]), 1.0)

    for shape in extend("t0", 1):
        yield SpeciesTree(build(shape))


def is_balanced(tree: SpeciesTree) -> bool:
    """True when every vertex splits its leaves as evenly as possible."""
    return _find_unbalanced(tree.root) is None


def _find_unbalanced(root: Node) -> Node | None:
    """Topmost vertex whose children differ by more than one leaf (BFS, left first)."""
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node.is_leaf:
            continue
        left, right = node.children
        if abs(left.n_leaves - right.n_leaves) > 1:
            return node
        queue.extend(node.children)
    return None


def rebalance_step(tree: SpeciesTree) -> SpeciesTree:
    """Move one cherry from the heavy side of the topmost unbalanced vertex.

    Walking always toward the larger child inside the heavy subtree locates a
    cherry; walking toward the smaller child inside the light subtree locates
    a leaf.  The cherry's pair of leaves is re-attached below that leaf's
    position, the cherry's own vertex collapses to a leaf, and the vertex
    imbalance drops by exactly 2.  Labels move with their leaves except that
    the collapsed vertex inherits the attachment leaf's label; edge lengths
    stay with their positions.
    """
    pivot = _find_unbalanced(tree.root)
    if pivot is None:
        raise AlreadyBalanced("every vertex already splits its leaves evenly")
    left, right = pivot.children
    heavy, light = (left, right) if left.n_leaves >= right.n_leaves else (right, left)

    cherry = heavy
    while not all(c.is_leaf for c in cherry.children):
        a, b = cherry.children
        # The larger child cannot be a leaf here, or both children would be.
        cherry = max((a, b), key=lambda n: (n.n_leaves, n is a))
    attach = light
    while not attach.is_leaf:
        a, b = attach.children
        attach = min((a, b), key=lambda n: (n.n_leaves, n is b))

    replacements = {
        id(cherry): Node.leaf(attach.label, cherry.length),
        id(attach): Node(cherry.children, None, attach.length, 2),
    }

    def rebuild(node: Node) -> Node:
        found = replacements.get(id(node))
        if found is not None:
            return found
        if node.is_leaf:
            return node
        kids = tuple(rebuild(c) for c in node.children)
        if all(k_new is k_old for k_new, k_old in zip(kids, node.children)):
            return node
        return Node(kids, node.label, node.length, sum(c.n_leaves for c in kids))

    return SpeciesTree(rebuild(tree.root))


def shape_key(tree: SpeciesTree):
    """Label-free canonical form; equal keys mean identical unlabeled shapes."""

    def key(node: Node):
        if node.is_leaf:
            return ()
        return tuple(sorted(key(c) for c in node.children))

    return key(tree.root)


def to_newick(tree: SpeciesTree) -> str:
    """Serialize with branch lengths at 17 significant digits."""

    def fmt(node: Node, at_root: bool) -> str:
        if node.is_leaf:
            body = node.label
        else:
            body = "(" + ",".join(fmt(c, False) for c in node.children) + ")"
            if node.label:
                body += node.label
        if at_root:
            return body
        return f"{body}:{node.length:.17g}"

    return fmt(tree.root, True) + ";"


def from_newick(text: str) -> SpeciesTree:
    """Parse the subset of Newick produced by `to_newick`.

    Labels are any run of characters outside ``(),:;`` and whitespace; branch
    lengths follow ``:``.  The root's length, if present, is ignored.
    """
    s = text.strip()
    if not s.endswith(";"):
        raise DomainError("Newick string must end with ';'")
    s = s[:-1]
    pos = 0

    def error(msg: str) -> DomainError:
        return DomainError(f"Newick parse error at offset {pos}: {msg}")

    def parse_node(at_root: bool) -> Node:
        nonlocal pos
        if pos < len(s) and s[pos] == "(":
            pos += 1
            children = [parse_node(False)]
            while pos < len(s) and s[pos] == ",":
                pos += 1
                children.append(parse_node(False))
            if pos >= len(s) or s[pos] != ")":
                raise error("expected ')'")
            pos += 1
            label = parse_label(optional=True)
            length = parse_length(at_root)
            return Node(
                tuple(children),
                label or None,
                length,
                sum(c.n_leaves for c in children),
            )
        label = parse_label(optional=False)
        return Node.leaf(label, parse_length(at_root))

    def parse_label(optional: bool) -> str:
        nonlocal pos
        start = pos
        while pos < len(s) and s[pos] not in "(),:;" and not s[pos].isspace():
            pos += 1
        if pos == start and not optional:
            raise error("expected a label")
        return s[start:pos]

    def parse_length(at_root: bool) -> float:
        nonlocal pos
        if pos < len(s) and s[pos] == ":":
            pos += 1
            start = pos
            while pos < len(s) and (s[pos] in "+-.eE" or s[pos].isdigit()):
                pos += 1
            try:
                value = float(s[start:pos])
            except ValueError:
                raise error("bad branch length") from None
            return 0.0 if at_root else value
        if at_root:
            return 0.0
        raise error("missing branch length")

    root = parse_node(True)
    if pos != len(s):
        raise error("trailing characters")
    return SpeciesTree(root)
