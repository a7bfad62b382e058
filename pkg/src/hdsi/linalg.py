"""Least-squares helpers built on QR decompositions."""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

RANK_RTOL = 1e-9


def independent_columns(base: np.ndarray, extra: np.ndarray, rtol: float = RANK_RTOL) -> list[int]:
    """Columns of ``extra`` that add rank on top of ``base``.

    ``extra`` is projected off the span of ``base``; a pivoted QR of the
    remainder then picks a maximal independent subset. A column survives only
    if its remaining norm exceeds ``rtol`` times its original norm. Returned
    positions are sorted.
    """
    m = extra.shape[1]
    if m == 0:
        return []
    if base.shape[1]:
        Q, _ = np.linalg.qr(base)
        E = extra - Q @ (Q.T @ extra)
    else:
        E = extra
    norms = np.linalg.norm(extra, axis=0)
    norms[norms == 0] = 1.0
    # unit-norm columns make the pivoted diagonal directly comparable to rtol
    _, R, piv = sla.qr(E / norms, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > rtol))
    return sorted(int(j) for j in piv[:rank])


def ols(Z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and residuals for a full-rank ``Z``."""
    Q, R = np.linalg.qr(Z)
    coef = sla.solve_triangular(R, Q.T @ y)
    return coef, y - Z @ coef


def projection_rows(Z: np.ndarray) -> np.ndarray:
    """Return ``(Z'Z)^{-1} Z'`` for a full-rank ``Z``.

    Row ``k`` equals ``v_k / |v_k|^2`` where ``v_k`` is the residual of column
    ``k`` on the other columns, which is what the influence scores need.
    """
    Q, R = np.linalg.qr(Z)
    return sla.solve_triangular(R, Q.T)
