"""Double-selection estimates of target coefficients and their influence scores."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, constant_columns
from .errors import DataError, EstimationError
from .lasso import PenaltyConfig, lasso_arrays
from .linalg import independent_columns, projection_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectEstimates:
    """Point estimates, robust standard errors and per-observation scores.

    ``scores[i, k]`` is the influence contribution of observation ``i`` to
    ``theta_hat[k]``; ``std_err[k]**2 == mean(scores[:, k]**2) / n``.
    """

    theta_hat: np.ndarray
    std_err: np.ndarray
    t_stat: np.ndarray
    scores: np.ndarray | None
    names: tuple[str, ...]
    n: int
    selected_union: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        return len(self.theta_hat)

    @property
    def sigma(self) -> np.ndarray:
        return self.std_err * math.sqrt(self.n)

    def subset(self, index: Sequence[int]) -> "EffectEstimates":
        index = list(index)
        return EffectEstimates(
            theta_hat=self.theta_hat[index],
            std_err=self.std_err[index],
            t_stat=self.t_stat[index],
            scores=None if self.scores is None else self.scores[:, index],
            names=tuple(self.names[k] for k in index),
            n=self.n,
            selected_union=self.selected_union,
        )


def _t_stats(theta: np.ndarray, se: np.ndarray) -> np.ndarray:
    t = np.zeros_like(theta)
    ok = se > 0
    t[ok] = theta[ok] / se[ok]
    deg = ~ok & (theta != 0)
    t[deg] = np.sign(theta[deg]) * np.inf
    if (~ok).any():
        warnings.warn("zero standard error (perfect fit) for some targets", stacklevel=3)
    return t


VCOV_TYPES = ("HC0", "HC1")


def _influence(Z: np.ndarray, y: np.ndarray, rows: Sequence[int], vcov: str = "HC1"):
    """Coefficients, robust standard errors and scores for rows of a full-rank OLS.

    HC1 multiplies the scores by ``sqrt(n / (n - q))`` for ``q`` regressors,
    so ``mean(scores**2) / n`` stays the variance estimate either way.
    """
    if vcov not in VCOV_TYPES:
        raise ValueError(f"vcov must be one of {VCOV_TYPES}")
    n, q = Z.shape
    P = projection_rows(Z)
    coef = P @ y
    resid = y - Z @ coef
    rows = list(rows)
    # centered without adjustment: resid is orthogonal to every column of Z
    scores = n * P[rows].T * resid[:, None]
    if vcov == "HC1":
        scores *= math.sqrt(n / (n - q))
    se = np.sqrt(np.mean(scores**2, axis=0) / n)
    theta = coef[rows]
    return theta, se, scores


def _check_no_constants(data: Dataset) -> None:
    const = constant_columns(data.X)
    if const.any():
        names = [c for c, k in zip(data.column_names, const) if k]
        raise DataError(f"constant columns {names}; run drop_constants first")


def final_stage(data: Dataset, controls: Sequence[int], vcov: str = "HC1") -> EffectEstimates:
    """Least squares of ``y`` on intercept, all targets and ``controls``."""
    n = data.n
    T = list(data.target_index)
    names = data.target_names
    ones = np.ones((n, 1))
    D = data.X[:, T]
    kept_t = independent_columns(ones, D)
    if len(kept_t) < len(T):
        bad = [names[k] for k in range(len(T)) if k not in kept_t]
        raise EstimationError(f"targets {bad} are perfectly explained by the other targets and the intercept")
    controls = sorted(controls)
    if controls:
        kept_c = [controls[i] for i in independent_columns(np.column_stack([ones, D]), data.X[:, controls])]
        lost = sorted(set(controls) - set(kept_c))
        if lost:
            warnings.warn(
                f"dropping collinear controls from the final regression: {[data.column_names[j] for j in lost]}",
                stacklevel=2,
            )
    else:
        kept_c = []
    width = 1 + len(T) + len(kept_c)
    if width >= n:
        raise EstimationError(f"final regression has {width} columns but only {n} observations")
    Z = np.column_stack([ones, D, data.X[:, kept_c]])
    theta, se, scores = _influence(Z, data.y, range(1, 1 + len(T)), vcov)
    return EffectEstimates(
        theta_hat=theta,
        std_err=se,
        t_stat=_t_stats(theta, se),
        scores=scores,
        names=tuple(names),
        n=n,
        selected_union=tuple(data.column_names[j] for j in kept_c),
    )


def _selected_controls(data: Dataset, j: int, cfg: PenaltyConfig) -> set[int]:
    """Controls picked by the two auxiliary lassos belonging to target column ``j``."""
    others = [c for c in range(data.p) if c != j]
    controls = set(data.control_index)
    X_others = data.X[:, others]
    picked: set[int] = set()
    # (1) target on everything else, (2) outcome on everything but this target
    for response in (data.X[:, j], data.y):
        fit = lasso_arrays(X_others, response, cfg)
        picked.update(others[s] for s in fit.selected if others[s] in controls)
    return picked


def double_select_effects(
    data: Dataset, cfg: PenaltyConfig = PenaltyConfig(), *, vcov: str = "HC1", threads: int = 1
) -> EffectEstimates:
    """Double-selection estimates for every target column.

    For each target, one lasso of the target on all other columns and one
    lasso of the outcome on all columns except that target choose controls.
    The union of chosen controls enters a single joint least-squares
    regression with all targets. Standard errors are heteroscedasticity
    robust; ``vcov="HC1"`` (default) adds the ``n / (n - q)`` degrees of
    freedom factor to the plain sandwich ``"HC0"``.
    """
    _check_no_constants(data)
    union: set[int] = set()
    if data.control_index:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                picked = list(pool.map(lambda j: _selected_controls(data, j, cfg), data.target_index))
        else:
            picked = [_selected_controls(data, j, cfg) for j in data.target_index]
        for s in picked:
            union |= s
    # with no controls at all there is nothing to select and the auxiliary
    # lassos cannot change the final regression
    logger.debug("double selection kept %d controls", len(union))
    return final_stage(data, sorted(union), vcov)


def ols_effects(data: Dataset, index: Sequence[int] | None = None, *, vcov: str = "HC1") -> EffectEstimates:
    """OLS of ``y`` on every column, reported for columns ``index``.

    ``index`` holds 0-based column positions and defaults to the dataset's
    targets.
    """
    n, p = data.X.shape
    if p + 1 >= n:
        raise EstimationError(f"OLS needs more than p + 1 = {p + 1} observations, got {n}")
    index = list(data.target_index if index is None else index)
    if any(k < 0 or k >= p for k in index):
        raise DataError("index out of range")
    ones = np.ones((n, 1))
    kept = independent_columns(ones, data.X)
    if len(kept) < p:
        dependent = [data.column_names[j] for j in range(p) if j not in kept]
        raise EstimationError(f"design is rank deficient; dependent columns: {dependent}")
    Z = np.column_stack([ones, data.X])
    theta, se, scores = _influence(Z, data.y, [1 + k for k in index], vcov)
    return EffectEstimates(
        theta_hat=theta,
        std_err=se,
        t_stat=_t_stats(theta, se),
        scores=scores,
        names=tuple(data.column_names[k] for k in index),
        n=n,
        selected_union=tuple(c for j, c in enumerate(data.column_names) if j not in set(index)),
    )
