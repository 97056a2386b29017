"""Scale-invariant and sign-sensitive portfolio comparison metrics.

The direction error dir(w, w*) = 1 - cos^2 of the angle between the lines
through w and w* is invariant to rescaling either argument by any nonzero
scalar, including -1. Because that sign blindness can hide a portfolio that
points the wrong way, the signed cosine and the coordinate-wise sign-match
fraction are provided as companions, along with the Sharpe measures used by
the experiment harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import CovarianceMatrix, Signal, WeightVector, markowitz_direct
from .errors import DegenerateInputError

VectorLike = Union[WeightVector, Signal, np.ndarray, list, tuple]


def _vec(w: VectorLike) -> np.ndarray:
    if isinstance(w, (WeightVector, Signal)):
        return w.values
    return np.asarray(w, dtype=float).reshape(-1)


def _nonzero(v: np.ndarray, name: str) -> np.ndarray:
    if not np.any(v):
        raise DegenerateInputError(f"{name} is the zero vector")
    return v


@dataclass(frozen=True)
class DirectionReport:
    """Direction error plus its sign-sensitive companions for one pair."""

    dir_error: float
    signed_cosine: float
    sign_match_fraction: float


def dir_error(w: VectorLike, w_star: VectorLike) -> float:
    """1 - (w . w*)^2 / (|w|^2 |w*|^2), the squared sine of the line angle."""
    a = _nonzero(_vec(w), "w")
    b = _nonzero(_vec(w_star), "w_star")
    num = float(a @ b) ** 2
    den = float(a @ a) * float(b @ b)
    return max(0.0, 1.0 - num / den)


def signed_cosine(w: VectorLike, w_star: VectorLike) -> float:
    a = _nonzero(_vec(w), "w")
    b = _nonzero(_vec(w_star), "w_star")
    return float(a @ b) / np.sqrt(float(a @ a) * float(b @ b))


def sign_match_fraction(w: VectorLike, w_star: VectorLike) -> float:
    """Fraction of coordinates whose signs agree, with sign(0) := +1."""
    a = _nonzero(_vec(w), "w")
    b = _nonzero(_vec(w_star), "w_star")
    sa = np.where(a >= 0.0, 1.0, -1.0)
    sb = np.where(b >= 0.0, 1.0, -1.0)
    return float(np.mean(sa == sb))


def direction_report(w: VectorLike, w_star: VectorLike) -> DirectionReport:
    c = signed_cosine(w, w_star)
    return DirectionReport(
        dir_error=max(0.0, 1.0 - c * c),
        signed_cosine=c,
        sign_match_fraction=sign_match_fraction(w, w_star),
    )


def dir_diag(sigma: CovarianceMatrix, mu: Signal) -> float:
    """Direction error between the diagonal solution mu/diag(Sigma) and Sigma^-1 mu.

    A dimensionless instance-difficulty diagnostic: near 0 means the instance
    is essentially diagonal-solvable, near 1 means the off-diagonal carries
    most of the signal.
    """
    a = mu.values / np.diag(sigma.entries)
    b = markowitz_direct(sigma, mu).values
    return dir_error(a, b)


def sharpe(w: VectorLike, sigma: CovarianceMatrix, mu: Signal) -> float:
    """w.mu / sqrt(w.Sigma.w); invariant under positive rescaling of w."""
    v = _vec(w)
    var = float(v @ sigma.entries @ v)
    if var <= 0.0:
        raise DegenerateInputError("zero-risk portfolio has no Sharpe ratio")
    return float(v @ mu.values) / np.sqrt(var)


def minvar_sharpe_sum1(w: VectorLike, sigma: CovarianceMatrix) -> float:
    """Sum-normalize w, then return 1 / sqrt(w.Sigma.w) (minimum-variance Sharpe)."""
    v = _vec(w)
    s = float(v.sum())
    if s == 0.0:
        raise DegenerateInputError("weights sum to zero; cannot sum-normalize")
    v = v / s
    var = float(v @ sigma.entries @ v)
    if var <= 0.0:
        raise DegenerateInputError("zero-risk portfolio has no Sharpe ratio")
    return 1.0 / np.sqrt(var)


def gross_leverage(w: VectorLike) -> float:
    """Sum of absolute weights."""
    return float(np.abs(_vec(w)).sum())
