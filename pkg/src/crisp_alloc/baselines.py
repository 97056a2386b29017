"""Signal-blind baseline allocators and the two diagnostic tree variants.

Contents: hierarchical risk parity (HRP), the Schur-complement allocator with
its gamma continuum and its condition-number product diagnostic, equal weight,
direct minimum variance, and two negative-result tree passes kept for
reproducibility: the flat-representative pass (``a2_flat_ivp_tree``) and the
sum-normalised recursive mean-variance pass (``a1_sum_norm_mvo``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import CovarianceMatrix, Signal, WeightVector, check_gamma
from .dendrogram import Dendrogram, TreeNode
from .errors import (
    DegenerateInputError,
    ParameterError,
    SchurBreakdownError,
    SingularCovarianceError,
)

# |delta| below this multiple of v_l * v_r counts as a degenerate determinant
# and triggers the decoupled diagonal fallback in every tree pass.
DELTA_DEGENERACY = 1e-10


@dataclass(frozen=True)
class ClusterStats:
    """Scalar statistics of one internal node's two children.

    v_l, v_r are cluster variances (return^2), s_l, s_r aggregate signals
    (return), c the cross-branch covariance scalar, and delta the Cramer
    determinant v_l * v_r - (gamma * c)^2 of the node system.
    """

    v_l: float
    v_r: float
    s_l: float
    s_r: float
    c: float
    delta: float


def raw_budgets(v_l: float, v_r: float, s_l: float, s_r: float, c: float, gamma: float):
    """Cramer solve of the node-level 2x2 system with diagonal fallback.

    Returns (alpha_l_raw, alpha_r_raw, delta). When |delta| falls below
    DELTA_DEGENERACY * v_l * v_r the decoupled budgets s_k / v_k are used.
    """
    delta = v_l * v_r - (gamma * c) ** 2
    if abs(delta) < DELTA_DEGENERACY * v_l * v_r:
        return s_l / v_l, s_r / v_r, delta
    a_l = (v_r * s_l - gamma * c * s_r) / delta
    a_r = (v_l * s_r - gamma * c * s_l) / delta
    return a_l, a_r, delta


def _permuted(sigma: CovarianceMatrix, tree: Dendrogram) -> np.ndarray:
    if sigma.n != tree.n:
        raise ParameterError("tree and covariance cover different asset counts")
    order = np.asarray(tree.leaf_order, dtype=int)
    return sigma.entries[np.ix_(order, order)]


def _unpermute(w_perm: np.ndarray, tree: Dendrogram) -> np.ndarray:
    w = np.empty_like(w_perm)
    w[np.asarray(tree.leaf_order, dtype=int)] = w_perm
    return w


def _sum_one_or_raw(values: np.ndarray) -> WeightVector:
    """Tag sum_one when the algebraic sum survived fp cancellation."""
    tag = "sum_one" if abs(values.sum() - 1.0) <= 1e-10 else "raw"
    return WeightVector(values, tag)


def _flat_ivp(diag_perm: np.ndarray, span: tuple[int, int]) -> np.ndarray:
    a = 1.0 / diag_perm[span[0] : span[1]]
    return a / a.sum()


def _block(sp: np.ndarray, rows: tuple[int, int], cols: tuple[int, int]) -> np.ndarray:
    return sp[rows[0] : rows[1], cols[0] : cols[1]]


def _cluster_variance(sp: np.ndarray, span: tuple[int, int], rep: np.ndarray) -> float:
    return float(rep @ _block(sp, span, span) @ rep)


def hrp(sigma: CovarianceMatrix, tree: Dendrogram) -> WeightVector:
    """Hierarchical risk parity: long-only, fully invested, signal-blind.

    At each internal node the flat inverse-variance portfolio on each child
    scores the cluster variance; the budget split is inverse cluster variance
    and the leaf weight is the product of the split factors on its path.
    """
    sp = _permuted(sigma, tree)
    dperm = np.diag(sp).copy()
    w = np.empty(tree.n)
    stack: list[tuple[TreeNode, float]] = [(tree.root, 1.0)]
    while stack:
        node, budget = stack.pop()
        if node.is_leaf:
            w[node.span[0]] = budget
            continue
        left, right = node.left, node.right
        v_l = _cluster_variance(sp, left.span, _flat_ivp(dperm, left.span))
        v_r = _cluster_variance(sp, right.span, _flat_ivp(dperm, right.span))
        alpha_l = (1.0 / v_l) / (1.0 / v_l + 1.0 / v_r)
        stack.append((left, budget * alpha_l))
        stack.append((right, budget * (1.0 - alpha_l)))
    return WeightVector(_unpermute(w, tree), "sum_one")


def equal_weight(n: int) -> WeightVector:
    if n < 1:
        raise ParameterError("need at least one asset")
    return WeightVector(np.full(n, 1.0 / n), "sum_one")


def direct_minvar(sigma: CovarianceMatrix) -> WeightVector:
    """Raw Sigma^-1 1 by symmetric factorization."""
    try:
        c, low = scipy.linalg.cho_factor(sigma.entries, lower=True, check_finite=False)
        w = scipy.linalg.cho_solve((c, low), np.ones(sigma.n), check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"covariance factorization failed: {exc}") from exc
    return WeightVector(w, "raw")


# ---------------------------------------------------------------------------
# Schur-complement allocator
# ---------------------------------------------------------------------------


def _solve_2x2_system(q: np.ndarray, b: np.ndarray, depth: int, gamma: float, strict: bool):
    det = q[0, 0] * q[1, 1] - q[0, 1] * q[1, 0]
    if strict and (q[0, 0] <= 0.0 or det <= 0.0):
        raise SchurBreakdownError(depth, gamma, "2x2 block not positive definite")
    if det == 0.0:
        if strict:
            raise SchurBreakdownError(depth, gamma, "singular 2x2 block")
        return np.zeros(2)
    return np.array(
        [
            (q[1, 1] * b[0] - q[0, 1] * b[1]) / det,
            (q[0, 0] * b[1] - q[0, 1] * b[0]) / det,
        ]
    )


def _kappa_or_inf(m: np.ndarray) -> float:
    eigs = scipy.linalg.eigvalsh(m)
    if eigs[0] <= 0.0:
        return np.inf
    return float(eigs[-1] / eigs[0])


def _schur_recurse(
    q: np.ndarray,
    b: np.ndarray,
    node: TreeNode,
    depth: int,
    gamma: float,
    strict: bool,
    kappas: list | None,
) -> np.ndarray:
    if node.is_leaf:
        if q[0, 0] == 0.0:
            raise SchurBreakdownError(depth, gamma, "zero variance at leaf")
        return b[:1] / q[0, 0]
    if node.size == 2:
        # closed-form bottom-out avoids a 1x1 Schur step
        return _solve_2x2_system(q, b, depth, gamma, strict)

    n_l = node.left.size
    a = q[:n_l, :n_l]
    d = q[n_l:, n_l:]
    off = q[:n_l, n_l:]
    b_l, b_r = b[:n_l], b[n_l:]

    if gamma == 0.0:
        a_c, b_a, d_c, b_d = a, b_l, d, b_r
    else:
        try:
            xd = np.linalg.solve(d, np.concatenate([off.T, b_r[:, None]], axis=1))
            xa = np.linalg.solve(a, np.concatenate([off, b_l[:, None]], axis=1))
        except np.linalg.LinAlgError as exc:
            if strict:
                raise SchurBreakdownError(depth, gamma, "singular child block") from exc
            if kappas is not None:
                kappas.append(np.inf)
            return np.zeros(node.size)
        a_c = a - gamma * off @ xd[:, :-1]
        b_a = b_l - gamma * off @ xd[:, -1]
        d_c = d - gamma * off.T @ xa[:, :-1]
        b_d = b_r - gamma * off.T @ xa[:, -1]
        a_c = 0.5 * (a_c + a_c.T)
        d_c = 0.5 * (d_c + d_c.T)

    if kappas is not None:
        kappas.append(_kappa_or_inf(a_c))
        kappas.append(_kappa_or_inf(d_c))
    if strict:
        for blk in (a_c, d_c):
            try:
                np.linalg.cholesky(blk)
            except np.linalg.LinAlgError as exc:
                raise SchurBreakdownError(depth, gamma) from exc

    w_l = _schur_recurse(a_c, b_a, node.left, depth + 1, gamma, strict, kappas)
    w_r = _schur_recurse(d_c, b_d, node.right, depth + 1, gamma, strict, kappas)
    return np.concatenate([w_l, w_r])


def cotton(sigma: CovarianceMatrix, tree: Dendrogram, gamma: float) -> WeightVector:
    """Schur-complement minimum-variance allocator with cross-block gamma.

    Each internal node hands its children the gamma-augmented Schur block
    A - gamma * B D^-1 B^T and the corrected right-hand side; stacking the
    child solutions reproduces Sigma^-1 1 exactly at gamma = 1. Raises
    SchurBreakdownError when an augmented block loses positive definiteness
    (a small-sample phenomenon on estimated covariances).
    """
    g = check_gamma(gamma)
    sp = _permuted(sigma, tree)
    w_perm = _schur_recurse(sp, np.ones(tree.n), tree.root, 0, g, strict=True, kappas=None)
    total = float(w_perm.sum())
    if total == 0.0:
        raise DegenerateInputError("Schur allocation sums to zero; cannot normalize")
    return _sum_one_or_raw(_unpermute(w_perm / total, tree))


def cotton_kappa_product(sigma: CovarianceMatrix, tree: Dendrogram, gamma: float) -> float:
    """Product of condition numbers of every augmented child block.

    Diagnostic only: bounds the error amplification the nested block solves
    can accumulate. Returns inf when any block loses positive definiteness.
    At gamma = 0 this is the product of the principal-block condition numbers.
    """
    g = check_gamma(gamma)
    sp = _permuted(sigma, tree)
    kappas: list[float] = []
    _schur_recurse(sp, np.ones(tree.n), tree.root, 0, g, strict=False, kappas=kappas)
    return float(np.prod(kappas)) if kappas else 1.0


# ---------------------------------------------------------------------------
# Diagnostic tree passes (documented negative results)
# ---------------------------------------------------------------------------


def a2_flat_ivp_tree(
    sigma: CovarianceMatrix, mu: Signal, tree: Dendrogram, gamma: float
) -> WeightVector:
    """Flat-representative signal pass: unstable under mixed-sign signals.

    Identical to the signed pass except the representatives are the unsigned
    inverse-variance portfolios, so the aggregate branch signal can cancel to
    zero and the budgets become noise-driven. Kept as a reproducible
    diagnostic; matches ``hrp`` exactly at gamma = 0 with a flat unit signal.
    """
    g = check_gamma(gamma)
    sp = _permuted(sigma, tree)
    dperm = np.diag(sp).copy()
    mperm = mu.values[np.asarray(tree.leaf_order, dtype=int)]
    w = np.empty(tree.n)
    stack: list[tuple[TreeNode, float]] = [(tree.root, 1.0)]
    while stack:
        node, budget = stack.pop()
        if node.is_leaf:
            w[node.span[0]] = budget
            continue
        left, right = node.left, node.right
        rep_l = _flat_ivp(dperm, left.span)
        rep_r = _flat_ivp(dperm, right.span)
        v_l = _cluster_variance(sp, left.span, rep_l)
        v_r = _cluster_variance(sp, right.span, rep_r)
        s_l = float(rep_l @ mperm[left.span[0] : left.span[1]])
        s_r = float(rep_r @ mperm[right.span[0] : right.span[1]])
        c = float(rep_l @ _block(sp, left.span, right.span) @ rep_r)
        a_l, a_r, _ = raw_budgets(v_l, v_r, s_l, s_r, c, g)
        z = a_l + a_r
        if z == 0.0:
            a_l = a_r = 0.5
        else:
            a_l, a_r = a_l / z, a_r / z
        stack.append((left, budget * a_l))
        stack.append((right, budget * a_r))
    return _sum_one_or_raw(_unpermute(w, tree))


def a1_sum_norm_mvo(
    sigma: CovarianceMatrix,
    mu: Signal,
    tree: Dendrogram,
    gamma: float,
    trace: dict | None = None,
) -> WeightVector:
    """Sum-normalised recursive mean-variance tree pass (sign-flip pathology).

    Normalising each node's raw budget pair by its algebraic sum flips both
    signs whenever that sum is negative; the flips compound along root-to-leaf
    paths and the output direction ends up uncorrelated with the target. Not a
    recommended method; retained as the counterexample the L1-normalised pass
    repairs. ``trace``, when given, records per node id whether the
    denominator was negative (a flip) for parity analysis.
    """
    g = check_gamma(gamma)
    sp = _permuted(sigma, tree)
    mperm = mu.values[np.asarray(tree.leaf_order, dtype=int)]
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
        z = a_l + a_r
        if trace is not None:
            trace[node.id] = {"raw": (a_l, a_r), "flipped": z < 0.0}
        if z == 0.0:
            a_l = a_r = 0.5
        else:
            a_l, a_r = a_l / z, a_r / z
        w[l0:l1] *= a_l
        w[r0:r1] *= a_r
        vbuf[node.id] = (
            a_l * a_l * vbuf[left.id] + a_r * a_r * vbuf[right.id] + 2.0 * a_l * a_r * c
        )
        sbuf[node.id] = a_l * sbuf[left.id] + a_r * sbuf[right.id]
    return _sum_one_or_raw(_unpermute(w, tree))
