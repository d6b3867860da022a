"""Computational trees of pairwise sums.

A tree over n inputs is a binary tree with 2n-1 vertices: leaves 1..n
hold the inputs, internal nodes 2..n each add two children, numbered in
topological order (children before parents), and node n is the root.
The partial sum s_k of internal node k is the exact sum of the leaves
below it.  Each internal node carries its own precision, so a single
tree describes mono- and mixed-precision summation alike.

Child references are encoded as signed integers: leaf i is -i, internal
node k is +k.  Construction functions return immutable array-backed
trees cheap enough for n in the millions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .refsum import dd_add
from .rounding import Precision

__all__ = [
    "CompTree",
    "TreeStats",
    "build_sequential",
    "build_pairwise",
    "build_fabsum",
    "build_random_tree",
    "tree_stats",
    "exact_partial_sums",
    "exact_partial_sums_dd",
    "dump_tree",
    "load_tree",
]


def leaf_ref(i: int) -> int:
    return -i


def internal_ref(k: int) -> int:
    return k


def is_leaf_ref(ref: int) -> bool:
    return ref < 0


@dataclass(frozen=True)
class CompTree:
    """Array-backed computational tree.

    ``left[k]``/``right[k]`` hold the child references of internal node
    k (entries 0 and 1 unused); ``precision_t[k]`` its significand bits.
    """

    n: int
    left: np.ndarray
    right: np.ndarray
    precision_t: np.ndarray

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"a summation tree needs n >= 2 leaves, got {self.n}")
        for arr in (self.left, self.right, self.precision_t):
            if arr.shape != (self.n + 1,):
                raise ValueError("child/precision arrays must have length n+1")
            arr.setflags(write=False)

    @property
    def root(self) -> int:
        return self.n

    @property
    def internal_nodes(self) -> range:
        return range(2, self.n + 1)

    def node_precision(self, k: int) -> Precision:
        return Precision(int(self.precision_t[k]))

    def is_mono_precision(self) -> bool:
        t = self.precision_t[2:]
        return bool(np.all(t == t[0]))

    def children(self, k: int) -> tuple[int, int]:
        return int(self.left[k]), int(self.right[k])


def _empty_arrays(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    left = np.zeros(n + 1, dtype=np.int64)
    right = np.zeros(n + 1, dtype=np.int64)
    prec = np.zeros(n + 1, dtype=np.int64)
    return left, right, prec


def build_sequential(n: int, p: Precision = Precision(11)) -> CompTree:
    """Running-sum tree: node 2 adds leaves (1, 2); node k adds (node k-1, leaf k)."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    left, right, prec = _empty_arrays(n)
    left[2] = leaf_ref(1)
    right[2] = leaf_ref(2)
    for k in range(3, n + 1):
        left[k] = internal_ref(k - 1)
        right[k] = leaf_ref(k)
    prec[2:] = p.t
    return CompTree(n=n, left=left, right=right, precision_t=prec)


def build_pairwise(n: int, p: Precision = Precision(11)) -> CompTree:
    """Balanced reduction: each level pairs adjacent entries left to right.

    An odd element at the end of a level is promoted unchanged; promotion
    is a copy, not an addition, so it creates no node.  Height is
    ceil(log2 n).
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    left, right, prec = _empty_arrays(n)
    level = [leaf_ref(i) for i in range(1, n + 1)]
    next_id = 2
    while len(level) > 1:
        merged = []
        for i in range(0, len(level) - 1, 2):
            left[next_id] = level[i]
            right[next_id] = level[i + 1]
            merged.append(internal_ref(next_id))
            next_id += 1
        if len(level) % 2:
            merged.append(level[-1])
        level = merged
    prec[2:] = p.t
    return CompTree(n=n, left=left, right=right, precision_t=prec)


def build_fabsum(
    n: int,
    b: int,
    inner=build_sequential,
    outer=build_sequential,
    p_lo: Precision = Precision(11),
    p_hi: Precision = Precision(24),
) -> CompTree:
    """Blocked two-stage tree: inner blocks at p_lo, block combination at p_hi.

    Inputs are split into ceil(n/b) blocks of b (the last block may be
    ragged when b does not divide n).  Each block is summed by the
    ``inner`` builder with nodes tagged p_lo; the block results are then
    combined by the ``outer`` builder with nodes tagged p_hi.  A block of
    one element is promoted without an addition.
    """
    if b < 1:
        raise ValueError(f"block size must be >= 1, got {b}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    left, right, prec = _empty_arrays(n)
    next_id = 2

    def graft(template: CompTree, operands: list[int], t_bits: int) -> int:
        """Copy a builder-produced template tree onto the given operand refs."""
        nonlocal next_id
        local = {}
        for k in template.internal_nodes:
            l, r = template.children(k)
            lref = operands[-l - 1] if is_leaf_ref(l) else local[l]
            rref = operands[-r - 1] if is_leaf_ref(r) else local[r]
            left[next_id] = lref
            right[next_id] = rref
            prec[next_id] = t_bits
            local[k] = internal_ref(next_id)
            next_id += 1
        return local[template.root]

    block_refs = []
    for start in range(0, n, b):
        block = [leaf_ref(i) for i in range(start + 1, min(start + b, n) + 1)]
        if len(block) == 1:
            block_refs.append(block[0])
        else:
            block_refs.append(graft(inner(len(block)), block, p_lo.t))
    if len(block_refs) == 1:
        root_ref = block_refs[0]
    else:
        root_ref = graft(outer(len(block_refs)), block_refs, p_hi.t)
    assert next_id == n + 1 and root_ref == internal_ref(n)
    return CompTree(n=n, left=left, right=right, precision_t=prec)


def build_random_tree(n: int, rng, p: Precision = Precision(11)) -> CompTree:
    """Uniform random merge order over the current forest.

    Starts from n singleton leaves and repeatedly merges two forest
    members chosen uniformly at random; exercises the full generality of
    tree-shape-dependent results in property tests.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    left, right, prec = _empty_arrays(n)
    forest = [leaf_ref(i) for i in range(1, n + 1)]
    for k in range(2, n + 1):
        i = int(rng.integers(len(forest)))
        j = int(rng.integers(len(forest) - 1))
        if j >= i:
            j += 1
        a, c = forest[i], forest[j]
        for idx in sorted((i, j), reverse=True):
            forest.pop(idx)
        left[k] = a
        right[k] = c
        forest.append(internal_ref(k))
    prec[2:] = p.t
    return CompTree(n=n, left=left, right=right, precision_t=prec)


@dataclass(frozen=True)
class TreeStats:
    """Structural statistics of a computational tree.

    ``height``: longest root-to-leaf path in edges.
    ``leaf_pair_count``: internal nodes whose children are both leaves (L).
    ``n_reduced``: n - L - 1, the nodes with at least one internal child.
    ``weighted_height``: max over all vertices of the sum of u^2 over the
    vertex's strict internal ancestors; equals height * u^2 for a
    mono-precision tree.
    ``node_depths``/``node_weighted_depths``: per internal node, indexed
    by node id (entries 0, 1 unused).
    """

    height: int
    leaf_pair_count: int
    n_reduced: int
    weighted_height: float
    node_depths: np.ndarray = field(repr=False)
    node_weighted_depths: np.ndarray = field(repr=False)


def tree_stats(tree: CompTree) -> TreeStats:
    n = tree.n
    # Strict-ancestor accumulations, computed top-down: the root has no
    # ancestors; a child inherits the parent's tally plus the parent itself.
    anc_count = np.zeros(n + 1, dtype=np.int64)  # internal ancestors of internal node k
    anc_weight = np.zeros(n + 1)
    height = 0
    weighted_height = 0.0
    u_sq = np.ldexp(1.0, -2 * tree.precision_t.astype(np.int64))
    for k in range(n, 1, -1):
        depth_below = anc_count[k] + 1  # leaves under k sit >= 1 edge lower
        w_below = anc_weight[k] + u_sq[k]
        for c in tree.children(k):
            if is_leaf_ref(c):
                height = max(height, depth_below)
                weighted_height = max(weighted_height, w_below)
            else:
                anc_count[c] = depth_below
                anc_weight[c] = w_below
    both_leaves = np.logical_and(tree.left[2:] < 0, tree.right[2:] < 0)
    leaf_pairs = int(np.count_nonzero(both_leaves))
    return TreeStats(
        height=height,
        leaf_pair_count=leaf_pairs,
        n_reduced=n - leaf_pairs - 1,
        weighted_height=weighted_height,
        node_depths=anc_count,
        node_weighted_depths=anc_weight,
    )


def exact_partial_sums(tree: CompTree, x: np.ndarray) -> np.ndarray:
    """Reference partial sums s_k per internal node, as float64.

    Computed with double-double accumulation so the returned doubles are
    correctly rounded sums of the leaves below each node.  Entries 0 and
    1 of the returned array are NaN.
    """
    hi, lo = exact_partial_sums_dd(tree, x)
    s = hi + lo
    s[0] = s[1] = np.nan
    return s


def exact_partial_sums_dd(
    tree: CompTree, x: np.ndarray, x_lo: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Double-double partial sums (hi, lo arrays indexed by internal node).

    Leaves may themselves carry double-double values via x_lo.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.n,):
        raise ValueError(f"expected {tree.n} inputs, got shape {x.shape}")
    hi = np.zeros(tree.n + 1)
    lo = np.zeros(tree.n + 1)

    def value(ref: int) -> tuple[float, float]:
        if is_leaf_ref(ref):
            i = -ref - 1
            return float(x[i]), (0.0 if x_lo is None else float(x_lo[i]))
        return hi[ref], lo[ref]

    for k in tree.internal_nodes:
        l, r = tree.children(k)
        h, c = dd_add(value(l), value(r))
        hi[k] = h
        lo[k] = c
    return hi, lo


def dump_tree(tree: CompTree) -> str:
    """Line-oriented text form: one line `s<k> <left> <right> <precision_t>`.

    Child tokens are x<i> for leaf i and s<k> for internal node k; bare
    indices would be ambiguous because leaves and internal nodes share
    the ranges 1..n and 2..n.
    """

    def token(ref: int) -> str:
        return f"x{-ref}" if is_leaf_ref(ref) else f"s{ref}"

    lines = []
    for k in tree.internal_nodes:
        l, r = tree.children(k)
        lines.append(f"s{k} {token(l)} {token(r)} {int(tree.precision_t[k])}")
    return "\n".join(lines) + "\n"


def load_tree(text: str) -> CompTree:
    """Parse the dump_tree format; validates the topological ordering."""

    def parse_ref(tok: str, k: int) -> int:
        kind, idx = tok[0], tok[1:]
        if kind not in ("x", "s") or not idx.isdigit():
            raise ValueError(f"bad child token {tok!r} on node {k}")
        i = int(idx)
        if kind == "x":
            return leaf_ref(i)
        if i >= k:
            raise ValueError(f"node {k} references non-prior internal node {i}")
        return internal_ref(i)

    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4 or not parts[0].startswith("s"):
            raise ValueError(f"bad tree line: {line!r}")
        k = int(parts[0][1:])
        entries[k] = (parse_ref(parts[1], k), parse_ref(parts[2], k), int(parts[3]))
    n = len(entries) + 1
    if sorted(entries) != list(range(2, n + 1)):
        raise ValueError("internal nodes must be exactly s2..sn")
    left, right, prec = _empty_arrays(n)
    for k, (l, r, t) in entries.items():
        Precision(t)  # validate range
        left[k], right[k], prec[k] = l, r, t
    tree = CompTree(n=n, left=left, right=right, precision_t=prec)
    _validate_shape(tree)
    return tree


def _validate_shape(tree: CompTree) -> None:
    """Every leaf 1..n and internal 2..n-1 must have exactly one parent."""
    seen_leaf = np.zeros(tree.n + 1, dtype=bool)
    seen_internal = np.zeros(tree.n + 1, dtype=bool)
    for k in tree.internal_nodes:
        for c in tree.children(k):
            if is_leaf_ref(c):
                i = -c
                if not 1 <= i <= tree.n or seen_leaf[i]:
                    raise ValueError(f"leaf x{i} missing or referenced twice")
                seen_leaf[i] = True
            else:
                if seen_internal[c]:
                    raise ValueError(f"internal node s{c} referenced twice")
                seen_internal[c] = True
    if not seen_leaf[1:].all():
        raise ValueError("not all leaves are referenced")
    if not seen_internal[2 : tree.n].all():
        raise ValueError("not all internal nodes are referenced")
