"""Correlation-distance agglomerative clustering into a binary tree.

The tree is the scaffold for every hierarchical allocator. Linkage operates
on the condensed correlation-distance matrix directly via the Lance-Williams
update (no embedding into Euclidean coordinates), with distance ties broken
by the lowest (id, id) cluster pair so that the construction is deterministic
across platforms. Each internal node caches the sorted set of leaf indices
beneath it and its contiguous span in the quasi-diagonal leaf order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Optional

import numpy as np

from .core import CorrelationMatrix
from .errors import DegenerateUniverseError, ParameterError

LinkageRule = Literal["ward", "single", "complete", "average"]

_RULES = ("ward", "single", "complete", "average")


@dataclass(frozen=True)
class TreeNode:
    """One node of the binary cluster tree.

    ``leaves`` is the sorted tuple of original asset indices beneath the node;
    ``span`` is the half-open range the node occupies in the dendrogram's
    quasi-diagonal leaf order.
    """

    id: int
    leaves: tuple[int, ...]
    span: tuple[int, int]
    height: float
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    leaf: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    @property
    def size(self) -> int:
        return len(self.leaves)


@dataclass(frozen=True)
class Dendrogram:
    """Binary cluster tree plus the quasi-diagonal leaf order."""

    root: TreeNode
    leaf_order: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.leaf_order)

    @cached_property
    def post_order(self) -> tuple[TreeNode, ...]:
        """Children-before-parent node sequence (iterative; chain-safe)."""
        out: list[TreeNode] = []
        stack: list[tuple[TreeNode, bool]] = [(self.root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded or node.is_leaf:
                out.append(node)
            else:
                stack.append((node, True))
                stack.append((node.right, False))
                stack.append((node.left, False))
        return tuple(out)

    @cached_property
    def internal_nodes(self) -> tuple[TreeNode, ...]:
        return tuple(n for n in self.post_order if not n.is_leaf)


def corr_distance(corr: CorrelationMatrix) -> np.ndarray:
    """d_ij = sqrt((1 - C_ij) / 2): symmetric, zero diagonal, entries in [0, 1]."""
    d = np.sqrt(0.5 * (1.0 - corr.entries))
    np.fill_diagonal(d, 0.0)
    return d


def build_tree(corr: CorrelationMatrix, rule: LinkageRule = "ward") -> Dendrogram:
    """Agglomerate the correlation-distance matrix into a binary dendrogram.

    Deterministic: ties are broken by the lexicographically smallest pair of
    cluster ids, and the left child of every merge is the smaller id.
    """
    if rule not in _RULES:
        raise ParameterError(f"unknown linkage rule {rule!r}")
    n = corr.n
    if n < 2:
        raise DegenerateUniverseError("need at least two assets to build a tree")

    d = corr_distance(corr)
    # Ward's update runs on squared distances; the other rules on raw ones.
    work = d**2 if rule == "ward" else d.copy()

    ids = list(range(n))  # cluster id occupying each active slot
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    children: dict[int, tuple[int, int]] = {}
    heights: dict[int, float] = {}
    slot_of: dict[int, int] = {i: i for i in range(n)}

    big = np.inf
    for step in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], work, big)
        np.fill_diagonal(masked, big)
        m = masked.min()
        # candidate slots at the minimum; pick the smallest (id, id) pair
        cand = np.argwhere(masked == m)
        best = None
        for i, j in cand:
            if i >= j:
                continue
            pair = tuple(sorted((ids[i], ids[j])))
            if best is None or pair < best[0]:
                best = (pair, (int(i), int(j)))
        (id_a, id_b), (si, sj) = best
        if ids[si] != id_a:
            si, sj = sj, si

        new_id = n + step
        children[new_id] = (id_a, id_b)
        heights[new_id] = float(np.sqrt(m)) if rule == "ward" else float(m)

        na, nb = sizes[si], sizes[sj]
        others = active.copy()
        others[si] = others[sj] = False
        k = np.flatnonzero(others)
        if k.size:
            dak, dbk = work[si, k], work[sj, k]
            if rule == "ward":
                nk = sizes[k]
                new = ((na + nk) * dak + (nb + nk) * dbk - nk * work[si, sj]) / (na + nb + nk)
            elif rule == "single":
                new = np.minimum(dak, dbk)
            elif rule == "complete":
                new = np.maximum(dak, dbk)
            else:  # average
                new = (na * dak + nb * dbk) / (na + nb)
            work[si, k] = new
            work[k, si] = new

        ids[si] = new_id
        sizes[si] = na + nb
        active[sj] = False
        slot_of[new_id] = si

    return _assemble(n, children, heights)


def _assemble(n: int, children: dict[int, tuple[int, int]], heights: dict[int, float]) -> Dendrogram:
    root_id = 2 * n - 2
    # leaf order: iterative left-to-right traversal (smaller child id first)
    order: list[int] = []
    stack = [root_id]
    while stack:
        nid = stack.pop()
        if nid < n:
            order.append(nid)
        else:
            a, b = children[nid]
            stack.append(b)
            stack.append(a)
    pos = {leaf: p for p, leaf in enumerate(order)}

    nodes: dict[int, TreeNode] = {
        i: TreeNode(id=i, leaves=(i,), span=(pos[i], pos[i] + 1), height=0.0, leaf=i)
        for i in range(n)
    }
    for nid in range(n, root_id + 1):
        a, b = children[nid]
        left, right = nodes[a], nodes[b]
        nodes[nid] = TreeNode(
            id=nid,
            leaves=tuple(sorted(left.leaves + right.leaves)),
            span=(left.span[0], right.span[1]),
            height=heights[nid],
            left=left,
            right=right,
        )
    return Dendrogram(root=nodes[root_id], leaf_order=tuple(order))


def balanced_tree(n: int) -> Dendrogram:
    """Perfectly balanced synthetic tree over assets 0..n-1 (n a power of two).

    Used to study allocator identities and costs independently of any
    clustering; heights are the merge level.
    """
    if n < 2 or n & (n - 1):
        raise ParameterError("balanced_tree needs a power-of-two asset count >= 2")
    children: dict[int, tuple[int, int]] = {}
    heights: dict[int, float] = {}
    level = list(range(n))
    next_id = n
    depth = 1.0
    while len(level) > 1:
        nxt = []
        for a, b in zip(level[::2], level[1::2]):
            children[next_id] = (a, b)
            heights[next_id] = depth
            nxt.append(next_id)
            next_id += 1
        level = nxt
        depth += 1.0
    return _assemble(n, children, heights)
