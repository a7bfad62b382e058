"""Simultaneous inference on a vector of effect estimates.

Classical adjustments (Bonferroni, Holm, Benjamini-Hochberg) work on raw
p-values alone. The Romano-Wolf stepdown and the joint confidence region use
a multiplier bootstrap of the influence scores, so they account for the
dependence between the test statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from . import streams
from .effects import EffectEstimates
from .errors import EstimationError

METHODS = ("none", "bonferroni", "holm", "BH", "RW")
_ALIASES = {m.lower(): m for m in METHODS} | {"fdr": "BH", "romano-wolf": "RW", "bh": "BH", "rw": "RW"}
DEFAULT_B = 1000


def canonical_method(method: str) -> str:
    try:
        return _ALIASES[method.lower()]
    except KeyError:
        raise ValueError(f"unknown adjustment method {method!r}; choose from {', '.join(METHODS)}") from None


@dataclass(frozen=True)
class AdjustedPValues:
    raw: np.ndarray
    adjusted: np.ndarray
    method: str
    names: tuple[str, ...] = ()
    estimates: np.ndarray | None = None
    alpha_meta: float | None = None
    B: int | None = None
    seed: int | None = None

    def rejected(self, alpha: float) -> np.ndarray:
        return reject(self.adjusted, alpha, self.method)


@dataclass(frozen=True)
class BootstrapDraws:
    t_star: np.ndarray
    B: int
    seed: int


@dataclass(frozen=True)
class JointConfidenceRegion:
    lower: np.ndarray
    upper: np.ndarray
    level: float
    critical: float
    B: int | None
    seed: int | None
    names: tuple[str, ...] = ()
    estimates: np.ndarray | None = None
    joint: bool = True

    def excludes_zero(self) -> np.ndarray:
        return (self.lower > 0) | (self.upper < 0)


def reject(adjusted: np.ndarray, alpha: float, method: str) -> np.ndarray:
    """Rejection set at level ``alpha``.

    Unadjusted and Bonferroni p-values reject when strictly below ``alpha``.
    Holm, BH and Romano-Wolf reject when at or below it, which reproduces
    their native stepwise cutoffs (and, for Romano-Wolf, agrees with the
    joint confidence region built from the same draws).
    """
    adjusted = np.asarray(adjusted)
    if canonical_method(method) in ("none", "bonferroni"):
        return adjusted < alpha
    return adjusted <= alpha


def raw_pvalues(est: EffectEstimates | np.ndarray) -> np.ndarray:
    """Two-sided normal p-values ``2 (1 - Phi(|t|))``."""
    t = est.t_stat if isinstance(est, EffectEstimates) else np.asarray(est, dtype=float)
    # ndtr(-|t|) avoids cancellation in 1 - Phi for large |t|
    return np.minimum(2.0 * ndtr(-np.abs(t)), 1.0)


def _check_p(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("p-values must be a vector")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    return p


def adjust_bonferroni(p) -> np.ndarray:
    p = _check_p(p)
    return np.minimum(len(p) * p, 1.0)


def adjust_holm(p) -> np.ndarray:
    """Holm stepdown: cumulative max of ``(K - j + 1) p_(j)`` in sorted order."""
    p = _check_p(p)
    K = len(p)
    order = np.argsort(p, kind="stable")
    q = np.minimum((K - np.arange(K)) * p[order], 1.0)
    out = np.empty(K)
    out[order] = np.maximum.accumulate(q)
    return out


def adjust_bh(p) -> np.ndarray:
    """Benjamini-Hochberg stepup: cumulative min from the top of ``K p_(j) / j``."""
    p = _check_p(p)
    K = len(p)
    order = np.argsort(p, kind="stable")
    # p * (K / j) rather than K * p / j: the rounded ratio never exceeds the
    # Holm factor, so BH <= Holm holds in floating point too
    q = np.minimum(p[order] * (K / np.arange(1, K + 1)), 1.0)
    out = np.empty(K)
    out[order] = np.minimum.accumulate(q[::-1])[::-1]
    return out


def multiplier_bootstrap(
    est: EffectEstimates,
    B: int = DEFAULT_B,
    seed: int = 0,
    *,
    threads: int = 1,
    multipliers: np.ndarray | None = None,
) -> BootstrapDraws:
    """Bootstrap t-statistics ``t*_k = sum_i g_i psi_ik / (sqrt(n) sigma_k)``.

    One vector of standard normal multipliers ``g`` is shared by all targets
    within a draw. ``multipliers`` (a ``B x n`` matrix) replaces the random
    draws, e.g. for tests.
    """
    if est.scores is None:
        raise EstimationError("effect estimates carry no scores; re-run with scores retained")
    n = est.n
    if est.scores.shape != (n, est.K):
        raise EstimationError(f"scores must be {n} x {est.K}")
    sigma = np.sqrt(np.mean(est.scores**2, axis=0))
    zero = np.flatnonzero(sigma == 0)
    if zero.size:
        raise EstimationError(f"zero score variance for targets {[est.names[k] for k in zero]}")
    if multipliers is None:
        if B < 100:
            raise ValueError("B must be at least 100")
        G = streams.normal_multipliers(seed, streams.MULTIPLIER, B, n, threads)
    else:
        G = np.asarray(multipliers, dtype=float)
        if G.ndim != 2 or G.shape[1] != n:
            raise ValueError(f"multipliers must be a B x {n} matrix")
        B = G.shape[0]
    t_star = (G @ est.scores) / (math.sqrt(n) * sigma)
    return BootstrapDraws(t_star=t_star, B=B, seed=seed)


def romano_wolf(t: np.ndarray, t_star: np.ndarray) -> np.ndarray:
    """Stepdown adjusted p-values from observed and bootstrapped statistics.

    ``t`` has length K and ``t_star`` is B x K. Hypotheses are ordered by
    decreasing ``|t|`` (ties by position); for each rank the bootstrap
    maximum runs over that hypothesis and all weaker ones.
    """
    t = np.abs(np.asarray(t, dtype=float))
    t_star = np.abs(np.asarray(t_star, dtype=float))
    B, K = t_star.shape
    if t.shape != (K,):
        raise ValueError("t and t_star disagree on K")
    order = np.argsort(-t, kind="stable")
    tail_max = np.maximum.accumulate(t_star[:, order][:, ::-1], axis=1)[:, ::-1]
    p_init = np.sum(tail_max >= t[order], axis=0) / B
    p_sorted = np.maximum.accumulate(p_init)
    out = np.empty(K)
    out[order] = p_sorted
    return out


def adjust_rw(
    est: EffectEstimates,
    B: int = DEFAULT_B,
    seed: int = 0,
    *,
    threads: int = 1,
    draws: BootstrapDraws | None = None,
) -> AdjustedPValues:
    """Romano-Wolf stepdown p-values from a multiplier bootstrap."""
    if draws is None:
        draws = multiplier_bootstrap(est, B, seed, threads=threads)
    adjusted = romano_wolf(est.t_stat, draws.t_star)
    raw = raw_pvalues(est)
    return AdjustedPValues(
        raw=raw,
        adjusted=adjusted,
        method="RW",
        names=est.names,
        estimates=est.theta_hat,
        B=draws.B,
        seed=draws.seed,
    )


def p_adjust(
    est: EffectEstimates,
    method: str = "RW",
    B: int = DEFAULT_B,
    seed: int = 0,
    *,
    threads: int = 1,
    draws: BootstrapDraws | None = None,
) -> AdjustedPValues:
    """Adjust the raw p-values of ``est`` with ``method``."""
    method = canonical_method(method)
    if method == "RW":
        return adjust_rw(est, B, seed, threads=threads, draws=draws)
    raw = raw_pvalues(est)
    adjusted = {
        "none": lambda p: p.copy(),
        "bonferroni": adjust_bonferroni,
        "holm": adjust_holm,
        "BH": adjust_bh,
    }[method](raw)
    return AdjustedPValues(raw=raw, adjusted=adjusted, method=method, names=est.names, estimates=est.theta_hat)


def empirical_quantile(values: np.ndarray, level: float) -> float:
    """Order statistic at 1-based index ``ceil(level * B)`` (no interpolation)."""
    v = np.sort(np.asarray(values, dtype=float))
    # guard the ceil against level * B landing a rounding error above an integer
    m = math.ceil(level * len(v) - 1e-9)
    return float(v[min(max(m, 1), len(v)) - 1])


def joint_confint(
    est: EffectEstimates,
    level: float = 0.95,
    B: int = DEFAULT_B,
    seed: int = 0,
    *,
    threads: int = 1,
    draws: BootstrapDraws | None = None,
) -> JointConfidenceRegion:
    """Rectangular region ``theta_k +/- c se_k`` with ``c`` the bootstrap
    ``level``-quantile of ``max_k |t*_k|``."""
    if not 0.5 < level < 1:
        raise ValueError("level must lie in (0.5, 1)")
    if draws is None:
        draws = multiplier_bootstrap(est, B, seed, threads=threads)
    crit = empirical_quantile(np.max(np.abs(draws.t_star), axis=1), level)
    half = crit * est.std_err
    return JointConfidenceRegion(
        lower=est.theta_hat - half,
        upper=est.theta_hat + half,
        level=level,
        critical=crit,
        B=draws.B,
        seed=draws.seed,
        names=est.names,
        estimates=est.theta_hat,
    )


def marginal_confint(est: EffectEstimates, level: float = 0.95) -> JointConfidenceRegion:
    """Per-coordinate normal intervals, without multiplicity correction."""
    crit = float(ndtri(0.5 + level / 2))
    half = crit * est.std_err
    return JointConfidenceRegion(
        lower=est.theta_hat - half,
        upper=est.theta_hat + half,
        level=level,
        critical=crit,
        B=None,
        seed=None,
        names=est.names,
        estimates=est.theta_hat,
        joint=False,
    )
