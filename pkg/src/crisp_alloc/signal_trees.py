"""Signal-aware tree allocators.

Two recommended constructions on the same dendrogram and the same node-level
2x2 mean-variance system, differing in the branch representative:

* ``hrp_mu`` scores each branch with a signed inverse-variance portfolio
  (magnitudes from 1/variance, signs from the signal), splits budgets
  sum-to-one, and applies the signal sign at the leaves. Its aggregate branch
  signal is a weighted mean of |mu_i| and cannot cancel to zero.
* ``hrp_sigma_mu`` propagates the recursive local mean-variance optimum as
  the representative and re-normalises each node's raw budget pair by
  |a_l| + |a_r|, which is strictly positive and therefore sign-preserving.

``hsp`` is the closed-form gamma = 0 endpoint of ``hrp_mu``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .baselines import ClusterStats, raw_budgets, _block, _permuted, _unpermute
from .core import CovarianceMatrix, Signal, WeightVector, check_gamma
from .dendrogram import Dendrogram, TreeNode
from .errors import ParameterError


@dataclass(frozen=True)
class NodeBudget:
    """Normalized budget pair handed to one node's children."""

    alpha_l: float
    alpha_r: float
    normalization: Literal["sum_one", "l1_one"]

    def __post_init__(self):
        if self.normalization == "sum_one":
            ok = abs(self.alpha_l + self.alpha_r - 1.0) <= 1e-12
        elif self.normalization == "l1_one":
            ok = abs(abs(self.alpha_l) + abs(self.alpha_r) - 1.0) <= 1e-12
        else:
            raise ParameterError(f"unknown budget normalization {self.normalization!r}")
        if not ok:
            raise ParameterError("node budgets violate their normalization")


def solve_2x2(stats: ClusterStats, gamma: float) -> tuple[float, float]:
    """Raw Cramer budgets of the node system; diagonal fallback on degeneracy.

    alpha_l_raw = (v_r s_l - g c s_r) / delta, alpha_r_raw symmetric, with
    delta = v_l v_r - (g c)^2.
    """
    g = check_gamma(gamma)
    if stats.v_l <= 0.0 or stats.v_r <= 0.0:
        raise ParameterError("cluster variances must be strictly positive")
    a_l, a_r, _ = raw_budgets(stats.v_l, stats.v_r, stats.s_l, stats.s_r, stats.c, g)
    return a_l, a_r


def _signed_ivp(diag_perm, signs_perm, span):
    a = 1.0 / diag_perm[span[0] : span[1]]
    return signs_perm[span[0] : span[1]] * a / a.sum()


def _node_stats(sp, mperm, dperm, signs_perm, node: TreeNode, gamma: float) -> ClusterStats:
    left, right = node.left, node.right
    rep_l = _signed_ivp(dperm, signs_perm, left.span)
    rep_r = _signed_ivp(dperm, signs_perm, right.span)
    v_l = float(rep_l @ _block(sp, left.span, left.span) @ rep_l)
    v_r = float(rep_r @ _block(sp, right.span, right.span) @ rep_r)
    # signed rep against the signal: a weighted mean of |mu|, never negative
    s_l = float(rep_l @ mperm[left.span[0] : left.span[1]])
    s_r = float(rep_r @ mperm[right.span[0] : right.span[1]])
    c = float(rep_l @ _block(sp, left.span, right.span) @ rep_r)
    delta = v_l * v_r - (gamma * c) ** 2
    return ClusterStats(v_l=v_l, v_r=v_r, s_l=s_l, s_r=s_r, c=c, delta=delta)


def hrp_mu(
    sigma: CovarianceMatrix,
    mu: Signal,
    tree: Dendrogram,
    gamma: float,
    trace: dict | None = None,
) -> WeightVector:
    """Signed inverse-variance tree pass; magnitude from the tree, sign from mu.

    Budgets are non-negative and sum to one at every node, the leaf weight is
    the budget product times sign(mu_i) with sign(0) := +1, and the output has
    unit gross leverage. ``trace``, when given, collects node id ->
    ClusterStats for inspection.
    """
    g = check_gamma(gamma)
    sp = _permuted(sigma, tree)
    dperm = np.diag(sp).copy()
    order = np.asarray(tree.leaf_order, dtype=int)
    mperm = mu.values[order]
    signs_perm = np.where(mperm >= 0.0, 1.0, -1.0)
    w = np.empty(tree.n)
    stack: list[tuple[TreeNode, float]] = [(tree.root, 1.0)]
    while stack:
        node, budget = stack.pop()
        if node.is_leaf:
            w[node.span[0]] = budget * signs_perm[node.span[0]]
            continue
        st = _node_stats(sp, mperm, dperm, signs_perm, node, g)
        if trace is not None:
            trace[node.id] = st
        a_l, a_r, _ = raw_budgets(st.v_l, st.v_r, st.s_l, st.s_r, st.c, g)
        z = a_l + a_r
        if z == 0.0:
            a_l = a_r = 0.5
        else:
            a_l, a_r = a_l / z, a_r / z
        stack.append((node.left, budget * a_l))
        stack.append((node.right, budget * a_r))
    out = _unpermute(w, tree)
    # budgets are non-negative for any signal with a nonvanishing branch, so the
    # leaf magnitudes sum to one; fall back to an untagged vector otherwise
    tag = "l1_one" if abs(np.abs(out).sum() - 1.0) <= 1e-10 else "raw"
    return WeightVector(out, tag)


def hsp(sigma: CovarianceMatrix, mu: Signal, tree: Dendrogram) -> WeightVector:
    """Signed hierarchical signal parity: the decoupled endpoint of hrp_mu.

    Splits every node by alpha_l proportional to s_l / v_l using the signed
    inverse-variance statistics; no cross term enters. Coincides with hrp_mu
    at gamma = 0 and with plain HRP on a flat unit signal.
    """
    sp = _permuted(sigma, tree)
    dperm = np.diag(sp).copy()
    order = np.asarray(tree.leaf_order, dtype=int)
    mperm = mu.values[order]
    signs_perm = np.where(mperm >= 0.0, 1.0, -1.0)
    w = np.empty(tree.n)
    stack: list[tuple[TreeNode, float]] = [(tree.root, 1.0)]
    while stack:
        node, budget = stack.pop()
        if node.is_leaf:
            w[node.span[0]] = budget * signs_perm[node.span[0]]
            continue
        st = _node_stats(sp, mperm, dperm, signs_perm, node, 0.0)
        r_l, r_r = st.s_l / st.v_l, st.s_r / st.v_r
        z = r_l + r_r
        if z == 0.0:
            a_l = 0.5
        else:
            a_l = r_l / z
        stack.append((node.left, budget * a_l))
        stack.append((node.right, budget * (1.0 - a_l)))
    return WeightVector(_unpermute(w, tree), "l1_one")


def hrp_sigma_mu(
    sigma: CovarianceMatrix,
    mu: Signal,
    tree: Dendrogram,
    gamma: float,
    trace: dict | None = None,
) -> WeightVector:
    """Recursive mean-variance tree pass with L1 budget normalization.

    Bottom-up: each node solves the 2x2 system on its children's stacked
    representatives and rescales the raw pair by |a_l| + |a_r|, preserving
    both signs; the stacked root representative (unit gross leverage) is the
    output. Exact for diagonal covariances at any gamma and any tree.
    ``trace`` collects node id -> NodeBudget.
    """
    g = check_gamma(gamma)
    sp = _permuted(sigma, tree)
    order = np.asarray(tree.leaf_order, dtype=int)
    mperm = mu.values[order]
    w = np.empty(tree.n)
    n_ids = 2 * tree.n - 1
    vbuf = np.empty(n_ids)
    sbuf = np.empty(n_ids)
    for node in tree.post_order:
        if node.is_leaf:
            p = node.span[0]
            w[p] = 1.0
            vbuf[node.id] = sp[p, p]
            sbuf[node.id] = mperm[p]
            continue
        left, right = node.left, node.right
        l0, l1 = left.span
        r0, r1 = right.span
        c = float(w[l0:l1] @ sp[l0:l1, r0:r1] @ w[r0:r1])
        a_l, a_r, _ = raw_budgets(
            vbuf[left.id], vbuf[right.id], sbuf[left.id], sbuf[right.id], c, g
        )
        z = abs(a_l) + abs(a_r)
        if z == 0.0:
            a_l = a_r = 0.5
        else:
            a_l, a_r = a_l / z, a_r / z
        if trace is not None:
            trace[node.id] = NodeBudget(a_l, a_r, "l1_one")
        w[l0:l1] *= a_l
        w[r0:r1] *= a_r
        # exact update of the stacked representative's variance and signal
        vbuf[node.id] = (
            a_l * a_l * vbuf[left.id] + a_r * a_r * vbuf[right.id] + 2.0 * a_l * a_r * c
        )
        sbuf[node.id] = a_l * sbuf[left.id] + a_r * sbuf[right.id]
    return WeightVector(_unpermute(w, tree), "l1_one")
