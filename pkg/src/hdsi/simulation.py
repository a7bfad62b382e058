"""Monte Carlo study of multiple-testing procedures after double selection.

The data follow ``y = beta0 + d'theta + e`` with Gaussian regressors whose
covariance is Toeplitz (``rho^|j-k|``) and Gaussian noise. Every regressor is
a target. Each replication records which hypotheses every method rejects;
the report averages correct and incorrect rejections and estimates the FWER
and FDR.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz

from . import streams
from .dataset import Dataset
from .effects import double_select_effects
from .errors import EstimationError, HdsiError
from .lasso import PenaltyConfig
from .multitest import (
    adjust_bh,
    adjust_bonferroni,
    adjust_holm,
    joint_confint,
    multiplier_bootstrap,
    raw_pvalues,
    reject,
    romano_wolf,
)

logger = logging.getLogger(__name__)

STUDY_METHODS = ("naive", "BH", "bonferroni", "holm", "RW", "jointCI")
MAX_FAILURE_SHARE = 0.05
_MAGNITUDES = (1.0, 0.8, 0.6)


def default_theta(K: int, s: int) -> tuple[float, ...]:
    """``s`` nonzero coefficients spread evenly over ``K`` positions.

    Magnitudes cycle through 1.0, 0.8, 0.6 and signs alternate, starting
    positive. For K=60, s=12 the support is columns 1, 6, ..., 56 (1-based).
    """
    if not 0 <= s <= K:
        raise ValueError(f"need 0 <= s <= K, got s={s}, K={K}")
    theta = [0.0] * K
    if s == 0:
        return tuple(theta)
    step = K // s
    for j in range(s):
        theta[j * step] = (1.0 if j % 2 == 0 else -1.0) * _MAGNITUDES[j % len(_MAGNITUDES)]
    return tuple(theta)


@dataclass(frozen=True)
class DgpConfig:
    n: int = 500
    K: int = 60
    rho: float = 0.9
    sigma2: float = 3.0
    theta: tuple[float, ...] = field(default_factory=lambda: default_theta(60, 12))
    beta0: float = 0.0
    seed: int = 42
    R: int = 500

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if len(self.theta) != self.K:
            raise ValueError(f"theta has length {len(self.theta)}, expected K={self.K}")
        if self.n < 2 or self.K < 1 or self.R < 1:
            raise ValueError("need n >= 2, K >= 1 and R >= 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")

    @classmethod
    def design(cls, n=500, K=60, rho=0.9, sigma2=3.0, s=12, seed=42, R=500, beta0=0.0) -> "DgpConfig":
        return cls(n=n, K=K, rho=rho, sigma2=sigma2, theta=default_theta(K, s), beta0=beta0, seed=seed, R=R)

    @property
    def support(self) -> np.ndarray:
        return np.asarray(self.theta) != 0

    @property
    def s(self) -> int:
        return int(self.support.sum())


@lru_cache(maxsize=16)
def _toeplitz_factor(K: int, rho: float) -> np.ndarray:
    sigma = toeplitz(rho ** np.arange(K))
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise EstimationError(f"Toeplitz covariance with rho={rho} is not positive definite") from None


def generate_dgp(cfg: DgpConfig, replication: int) -> Dataset:
    """Draw one dataset; the stream is keyed by ``(cfg.seed, replication)``."""
    L = _toeplitz_factor(cfg.K, float(cfg.rho))
    gen = streams.generator(cfg.seed, streams.DGP, replication)
    D = gen.standard_normal((cfg.n, cfg.K)) @ L.T
    eps = gen.standard_normal(cfg.n) * math.sqrt(cfg.sigma2)
    y = cfg.beta0 + D @ np.asarray(cfg.theta) + eps
    return Dataset(
        y=y,
        X=D,
        column_names=[f"d{k + 1}" for k in range(cfg.K)],
        target_index=range(cfg.K),
    )


@dataclass(frozen=True)
class MethodMetrics:
    correct_mean: float
    correct_sd: float
    incorrect_mean: float
    incorrect_sd: float
    fwer: float
    fdr: float


def aggregate_metrics(rejections: np.ndarray, truth: np.ndarray) -> MethodMetrics:
    """Summarize an R x K rejection matrix against the true non-null mask.

    The false discovery proportion of a replication without rejections is 0.
    Standard deviations use the ``R - 1`` denominator (0 for a single run).
    """
    rej = np.atleast_2d(np.asarray(rejections, dtype=bool))
    truth = np.asarray(truth, dtype=bool)
    if rej.shape[1] != truth.shape[0]:
        raise ValueError("rejections and truth disagree on K")
    correct = (rej & truth).sum(axis=1)
    incorrect = (rej & ~truth).sum(axis=1)
    total = correct + incorrect
    fdp = np.divide(incorrect, total, out=np.zeros(len(total)), where=total > 0)
    ddof = 1 if len(rej) > 1 else 0
    return MethodMetrics(
        correct_mean=float(correct.mean()),
        correct_sd=float(correct.std(ddof=ddof)),
        incorrect_mean=float(incorrect.mean()),
        incorrect_sd=float(incorrect.std(ddof=ddof)),
        fwer=float((incorrect >= 1).mean()),
        fdr=float(fdp.mean()),
    )


@dataclass(frozen=True)
class SimulationReport:
    metrics: dict[str, MethodMetrics]
    alpha: float
    R: int
    B: int
    failures: int
    config: DgpConfig

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "R": self.R,
            "B": self.B,
            "failures": self.failures,
            "config": {**asdict(self.config), "theta": list(self.config.theta)},
            "methods": {m: asdict(v) for m, v in self.metrics.items()},
        }


def replicate(cfg: DgpConfig, r: int, alpha: float, B: int, penalty: PenaltyConfig) -> dict[str, np.ndarray]:
    """Rejection vectors of every method for replication ``r``."""
    data = generate_dgp(cfg, r)
    est = double_select_effects(data, penalty)
    raw = raw_pvalues(est)
    draws = multiplier_bootstrap(est, B, streams.derive_seed(cfg.seed, streams.BOOTSTRAP_SEED, r))
    region = joint_confint(est, 1.0 - alpha, draws=draws)
    return {
        "naive": reject(raw, alpha, "none"),
        "BH": reject(adjust_bh(raw), alpha, "BH"),
        "bonferroni": reject(adjust_bonferroni(raw), alpha, "bonferroni"),
        "holm": reject(adjust_holm(raw), alpha, "holm"),
        "RW": reject(romano_wolf(est.t_stat, draws.t_star), alpha, "RW"),
        "jointCI": region.excludes_zero(),
    }


def _safe_replicate(args):
    cfg, r, alpha, B, penalty = args
    try:
        return replicate(cfg, r, alpha, B, penalty)
    except HdsiError as exc:
        logger.warning("replication %d failed: %s", r, exc)
        return None


def run_study(
    cfg: DgpConfig,
    alpha: float = 0.1,
    B: int = 500,
    *,
    threads: int = 1,
    penalty: PenaltyConfig | None = None,
    progress=None,
) -> SimulationReport:
    """Run ``cfg.R`` replications and aggregate per-method metrics.

    BH uses ``gamma = alpha``. Failed replications are excluded; more than
    5% failures is an error. ``progress`` is an optional callable taking the
    number of finished replications.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    penalty = penalty or PenaltyConfig(homoscedastic=True)
    jobs = [(cfg, r, alpha, B, penalty) for r in range(cfg.R)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_safe_replicate, jobs, chunksize=max(1, cfg.R // (4 * threads))))
    else:
        results = []
        for job in jobs:
            results.append(_safe_replicate(job))
            if progress is not None:
                progress(len(results))

    done = [res for res in results if res is not None]
    failures = len(results) - len(done)
    if failures > MAX_FAILURE_SHARE * cfg.R:
        raise EstimationError(f"{failures} of {cfg.R} replications failed")
    if not done:
        raise EstimationError("no replication succeeded")
    truth = cfg.support
    metrics = {m: aggregate_metrics(np.array([res[m] for res in done]), truth) for m in STUDY_METHODS}
    return SimulationReport(metrics=metrics, alpha=alpha, R=len(done), B=B, failures=failures, config=cfg)
