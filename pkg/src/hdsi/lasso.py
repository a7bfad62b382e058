"""Lasso with a theory-driven penalty, post-lasso refits and the sup-score test.

The objective is

    E_n[(y - b0 - x'b)^2] + (lam / n) * sum_j psi_j |b_j|

with an unpenalized intercept. Internally the solver works on columns that
are centered and scaled to unit root mean square; coefficients are reported
on the original scale.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.special import ndtri

from . import streams
from .dataset import Dataset, Standardization
from .errors import ConvergenceError, DataError, EstimationError
from .linalg import independent_columns, ols

logger = logging.getLogger(__name__)

KKT_RTOL = 1e-6


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty level and loading-iteration settings.

    ``gamma=None`` selects ``0.1 / log(max(n, p))`` at fit time.
    """

    c: float = 1.1
    gamma: float | None = None
    max_loading_iters: int = 15
    loading_tol: float = 1e-4
    homoscedastic: bool = False
    post_lasso: bool = True
    min_loading_iters: int = 2
    cd_tol: float = 1e-7
    max_passes: int = 1000

    def __post_init__(self) -> None:
        if not self.c >= 1:
            raise ValueError(f"c must be >= 1, got {self.c}")
        if self.gamma is not None and not 0 < self.gamma < 0.5:
            raise ValueError(f"gamma must lie in (0, 0.5), got {self.gamma}")
        if self.max_loading_iters < 1:
            raise ValueError("max_loading_iters must be positive")
        if not self.loading_tol > 0:
            raise ValueError("loading_tol must be positive")

    def resolved_gamma(self, n: int, p: int) -> float:
        if self.gamma is not None:
            return self.gamma
        return 0.1 / math.log(max(n, p))


@dataclass(frozen=True)
class LassoFit:
    """A penalized (or post-lasso) fit on the original scale of the data.

    ``loadings`` are on the scale of the original columns, so ``lambda_ *
    loadings[j] * |coefficients[j]|`` is the penalty paid by column ``j``.
    ``lasso_coefficients`` keeps the penalized solution when
    ``coefficients`` holds the post-lasso refit.
    """

    intercept: float
    coefficients: np.ndarray
    selected: tuple[int, ...]
    lambda_: float
    loadings: np.ndarray
    residuals: np.ndarray
    post_lasso: bool
    column_names: tuple[str, ...] = ()
    lasso_coefficients: np.ndarray | None = None
    loading_iterations: int = 0
    kkt_violation: float = 0.0
    r_squared: float = 0.0

    @property
    def selected_names(self) -> list[str]:
        return [self.column_names[j] for j in self.selected] if self.column_names else []


@dataclass(frozen=True)
class SupScoreResult:
    statistic: float
    critical_value: float
    p_value: float
    B: int
    alpha: float
    seed: int

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical_value


def theory_lambda(n: int, p: int, cfg: PenaltyConfig = PenaltyConfig()) -> float:
    """Penalty level ``2 c sqrt(n) Q(1 - gamma / (2p))``."""
    if n < 2 or p < 1:
        raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    gamma = cfg.resolved_gamma(n, p)
    return 2.0 * cfg.c * math.sqrt(n) * float(ndtri(1.0 - gamma / (2.0 * p)))


def _loadings(Xc: np.ndarray, resid: np.ndarray, homoscedastic: bool) -> np.ndarray:
    # Xc must already be centered
    if homoscedastic:
        sigma = math.sqrt(float(np.mean(resid**2)))
        psi = sigma * np.sqrt(np.mean(Xc**2, axis=0))
    else:
        psi = np.sqrt(np.mean(Xc**2 * (resid**2)[:, None], axis=0))
    return psi


def penalty_loadings(data: Dataset, residuals: np.ndarray, cfg: PenaltyConfig = PenaltyConfig()) -> np.ndarray:
    """Penalty loadings from residual moments.

    Homoscedastic: ``sigma * sqrt(E_n[x_j^2])`` with ``sigma^2 = E_n[e^2]``;
    otherwise ``sqrt(E_n[x_j^2 e^2])``. Columns are centered first because the
    intercept is not penalized.
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != (data.n,):
        raise ValueError(f"residuals must have length {data.n}")
    Xc = data.X - data.X.mean(axis=0)
    psi = _loadings(Xc, residuals, cfg.homoscedastic)
    if np.any(psi <= 0):
        bad = [data.column_names[j] for j in np.flatnonzero(psi <= 0)]
        raise EstimationError(f"zero penalty loading for {bad}")
    return psi


@numba.njit(cache=True, nogil=True)
def _coordinate_descent(X, r, b, thr, xsq, tol, max_passes):  # pragma: no cover - compiled
    """Cyclic soft-thresholding updates; ``r`` and ``b`` are updated in place.

    Returns (passes used, converged flag).
    """
    n, p = X.shape
    full = True
    passes = 0
    while passes < max_passes:
        passes += 1
        max_delta = 0.0
        for j in range(p):
            if not full and b[j] == 0.0:
                continue
            if xsq[j] == 0.0:
                continue
            g = 0.0
            for i in range(n):
                g += X[i, j] * r[i]
            z = g / n + xsq[j] * b[j]
            if z > thr[j]:
                new = (z - thr[j]) / xsq[j]
            elif z < -thr[j]:
                new = (z + thr[j]) / xsq[j]
            else:
                new = 0.0
            d = new - b[j]
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * X[i, j]
                b[j] = new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        if max_delta < tol:
            if full:
                return passes, True
            full = True
        else:
            full = False
    return passes, False


def kkt_violation(Xs: np.ndarray, resid: np.ndarray, coef: np.ndarray, thresholds: np.ndarray) -> float:
    """Largest relative KKT violation on the standardized scale.

    ``thresholds`` are ``(lam / n) * psi_j``; the gradient of the squared
    error is ``(2/n) x_j' r``. Unselected coordinates may not exceed their
    threshold and selected ones must sit on it with the sign of the
    coefficient. Violations are divided by the threshold (or by the RMS of the
    residual when the threshold is zero).
    """
    n = Xs.shape[0]
    grad = 2.0 * (Xs.T @ resid) / n
    scale = np.where(thresholds > 0, thresholds, max(float(np.sqrt(np.mean(resid**2))), 1e-300))
    active = coef != 0
    excess = np.where(
        active,
        np.abs(grad - thresholds * np.sign(coef)),
        np.maximum(np.abs(grad) - thresholds, 0.0),
    )
    return float(np.max(excess / scale)) if excess.size else 0.0


def _solve_standardized(Xs, yc, thr, b0, cfg: PenaltyConfig):
    """Run coordinate descent to the solver tolerance, then polish until KKT holds."""
    b = b0.copy()
    r = yc - Xs @ b
    xsq = np.mean(Xs**2, axis=0)
    tol = cfg.cd_tol
    passes_left = cfg.max_passes
    kkt_thr = 2.0 * thr  # lam*psi/n, the gradient threshold
    # unpenalized coordinates are measured against the residual scale, which
    # needs a tighter target to land on the least-squares solution
    target = KKT_RTOL if np.all(thr > 0) else KKT_RTOL * 1e-5
    while True:
        used, ok = _coordinate_descent(Xs, r, b, thr, xsq, tol, passes_left)
        passes_left -= used
        # refresh the residual to wash out accumulated rounding
        r = yc - Xs @ b
        viol = kkt_violation(Xs, r, b, kkt_thr)
        if not ok:
            raise ConvergenceError(
                f"coordinate descent did not converge in {cfg.max_passes} passes "
                f"(max KKT violation {viol:.3g})",
                coefficients=b,
                kkt_violation=viol,
            )
        if viol <= target or passes_left <= 0 or tol < 1e-15:
            return b, r, viol
        tol /= 100.0


def _refit(X: np.ndarray, y: np.ndarray, selected: list[int], names=()) -> tuple[float, np.ndarray, list[int]]:
    """Least squares on intercept + ``selected``; collinear columns are dropped."""
    n, p = X.shape
    coef = np.zeros(p)
    if len(selected) >= n:
        raise EstimationError(f"cannot refit {len(selected)} columns with {n} observations")
    if not selected:
        return float(np.mean(y)), coef, []
    ones = np.ones((n, 1))
    keep_pos = independent_columns(ones, X[:, selected])
    kept = [selected[i] for i in keep_pos]
    if len(kept) < len(selected):
        lost = sorted(set(selected) - set(kept))
        label = [names[j] for j in lost] if names else lost
        warnings.warn(f"dropping collinear columns from the refit: {label}", stacklevel=3)
    Z = np.column_stack([ones, X[:, kept]])
    beta, _ = ols(Z, y)
    coef[kept] = beta[1:]
    return float(beta[0]), coef, kept


def _r_squared(y, resid) -> float:
    tss = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum(resid**2)) / tss if tss > 0 else 0.0


def lasso_arrays(
    X: np.ndarray,
    y: np.ndarray,
    cfg: PenaltyConfig = PenaltyConfig(),
    *,
    lam: float | None = None,
    loadings: np.ndarray | None = None,
    column_names=(),
) -> LassoFit:
    """Array-level lasso fit; see :func:`fit_lasso`.

    Passing ``loadings`` (original scale) fixes them and skips the loading
    iteration. ``lam`` overrides the theory-driven penalty level.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    std = Standardization.fit(X)
    Xs = np.asfortranarray(std.apply(X))
    ybar = float(np.mean(y))
    yc = y - ybar
    lam = theory_lambda(n, p, cfg) if lam is None else float(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")

    def fit_with(psi_std, b_start):
        thr = lam * psi_std / (2.0 * n)
        b, r, viol = _solve_standardized(Xs, yc, thr, b_start, cfg)
        sel = np.flatnonzero(b).tolist()
        return b, r, viol, sel

    def residuals_for(b, r, sel):
        if cfg.post_lasso:
            b0, coef, _ = _refit(X, y, sel)
            return y - b0 - X @ coef
        return r

    b = np.zeros(p)
    iterations = 0
    if loadings is not None:
        psi_std = np.asarray(loadings, dtype=float) / std.scales
        if psi_std.shape != (p,) or np.any(psi_std <= 0):
            raise ValueError("loadings must be a positive vector of length p")
        b, r, viol, sel = fit_with(psi_std, b)
    else:
        psi_std = _loadings(Xs, yc, cfg.homoscedastic)
        if np.any(psi_std <= 0):
            # y constant: nothing to select
            psi_std = np.where(psi_std > 0, psi_std, 1.0)
        while True:
            iterations += 1
            b, r, viol, sel = fit_with(psi_std, b)
            res = residuals_for(b, r, sel)
            new = _loadings(Xs, res, cfg.homoscedastic)
            if np.any(new <= 0):
                break
            change = float(np.max(np.abs(new - psi_std) / psi_std))
            if iterations >= cfg.max_loading_iters:
                break
            psi_std = new
            if iterations >= cfg.min_loading_iters and change < cfg.loading_tol:
                b, r, viol, sel = fit_with(psi_std, b)
                iterations += 1
                break

    lasso_coef = b / std.scales
    if cfg.post_lasso:
        intercept, coef, _ = _refit(X, y, sel, column_names)
    else:
        coef = lasso_coef.copy()
        intercept = ybar - float(std.means @ coef)
    resid = y - intercept - X @ coef
    return LassoFit(
        intercept=intercept,
        coefficients=coef,
        selected=tuple(sel),
        lambda_=lam,
        loadings=psi_std * std.scales,
        residuals=resid,
        post_lasso=cfg.post_lasso,
        column_names=tuple(column_names),
        lasso_coefficients=lasso_coef,
        loading_iterations=iterations,
        kkt_violation=viol,
        r_squared=_r_squared(y, resid),
    )


def fit_lasso(
    data: Dataset,
    cfg: PenaltyConfig = PenaltyConfig(),
    *,
    lam: float | None = None,
    loadings: np.ndarray | None = None,
) -> LassoFit:
    """Lasso of ``data.y`` on all columns of ``data.X``.

    Loadings are iterated from the residuals of ``y`` on its mean until their
    largest relative change drops below ``cfg.loading_tol`` (at least
    ``cfg.min_loading_iters`` rounds). With ``cfg.post_lasso`` the selected
    coefficients are replaced by their least-squares refit.
    """
    return lasso_arrays(data.X, data.y, cfg, lam=lam, loadings=loadings, column_names=data.column_names)


def post_lasso_refit(data: Dataset, selected) -> LassoFit:
    """Least squares of ``y`` on the intercept and the ``selected`` columns."""
    selected = sorted(int(j) for j in selected)
    if any(j < 0 or j >= data.p for j in selected):
        raise DataError("selected index out of range")
    intercept, coef, kept = _refit(data.X, data.y, selected, data.column_names)
    resid = data.y - intercept - data.X @ coef
    return LassoFit(
        intercept=intercept,
        coefficients=coef,
        selected=tuple(kept),
        lambda_=0.0,
        loadings=np.ones(data.p),
        residuals=resid,
        post_lasso=True,
        column_names=data.column_names,
        r_squared=_r_squared(data.y, resid),
    )


def _order_stat_index(B: int, alpha: float) -> int:
    # 1-based order statistic m with  S > S*_(m)  <=>  (1 + #{S* >= S}) / (B + 1) < alpha
    return B + 2 - math.ceil(alpha * (B + 1))


def sup_score_test(
    data: Dataset,
    alpha: float = 0.1,
    B: int = 500,
    seed: int = 0,
    *,
    threads: int = 1,
    multipliers: np.ndarray | None = None,
) -> SupScoreResult:
    """Multiplier-bootstrap sup-score test of joint insignificance.

    ``S = max_j |sqrt(n) E_n[(y - mean(y)) x_j]|`` with unit-RMS centered
    columns. ``S*`` replaces each summand by its product with an i.i.d.
    standard normal. The p-value is ``(1 + #{S* >= S}) / (B + 1)`` and the
    critical value is the order statistic of ``S*`` that makes ``S > crit``
    and ``p < alpha`` the same decision.
    """
    if B < 100 and multipliers is None:
        raise ValueError("B must be at least 100")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    n = data.n
    Xs = data.standardization.apply(data.X)
    u = data.y - data.y.mean()
    score = Xs * u[:, None]
    stat = float(np.max(np.abs(score.sum(axis=0)))) / math.sqrt(n)
    if multipliers is None:
        G = streams.normal_multipliers(seed, streams.SUP_SCORE, B, n, threads)
    else:
        G = np.asarray(multipliers, dtype=float)
        B = G.shape[0]
    boot = np.max(np.abs(G @ score), axis=1) / math.sqrt(n)
    exceed = int(np.sum(boot >= stat))
    p_value = (1 + exceed) / (B + 1)
    m = _order_stat_index(B, alpha)
    if m > B:
        crit = math.inf
    else:
        crit = float(np.sort(boot)[max(m, 1) - 1])
    return SupScoreResult(statistic=stat, critical_value=crit, p_value=p_value, B=B, alpha=alpha, seed=seed)
