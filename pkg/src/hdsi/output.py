"""JSON documents and fixed-width text tables for every result type.

Every JSON document carries ``"schema": 1`` and a ``"kind"``. Floats are
written with ``repr`` precision so a document read back reproduces the
numbers exactly.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .effects import EffectEstimates
from .errors import DataError
from .lasso import LassoFit, SupScoreResult
from .multitest import AdjustedPValues, JointConfidenceRegion, raw_pvalues
from .simulation import STUDY_METHODS, SimulationReport

SCHEMA = 1


def fmt(v: float) -> str:
    return f"{float(v):.6g}"


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a).ravel()]


def lasso_doc(fit: LassoFit, sup: SupScoreResult | None = None) -> dict[str, Any]:
    doc = {
        "schema": SCHEMA,
        "kind": "lasso_fit",
        "column_names": list(fit.column_names),
        "intercept": float(fit.intercept),
        "coefficients": _floats(fit.coefficients),
        "selected": fit.selected_names,
        "lambda": float(fit.lambda_),
        "loadings": _floats(fit.loadings),
        "post_lasso": fit.post_lasso,
        "r_squared": float(fit.r_squared),
        "loading_iterations": fit.loading_iterations,
        "residuals": _floats(fit.residuals),
    }
    if sup is not None:
        doc["sup_score"] = {
            "statistic": sup.statistic,
            "critical_value": sup.critical_value,
            "p_value": sup.p_value,
            "alpha": sup.alpha,
            "B": sup.B,
            "seed": sup.seed,
            "reject": sup.reject,
        }
    return doc


def effects_doc(est: EffectEstimates, include_scores: bool = False) -> dict[str, Any]:
    doc = {
        "schema": SCHEMA,
        "kind": "effects",
        "n": est.n,
        "names": list(est.names),
        "theta_hat": _floats(est.theta_hat),
        "std_err": _floats(est.std_err),
        "t_stat": _floats(est.t_stat),
        "p_value": _floats(raw_pvalues(est)),
        "selected_union": list(est.selected_union),
    }
    if include_scores and est.scores is not None:
        doc["scores"] = [_floats(row) for row in est.scores]
    return doc


def effects_from_doc(doc: dict) -> EffectEstimates:
    if doc.get("schema") != SCHEMA or doc.get("kind") != "effects":
        raise DataError("not an effects document (expected schema 1, kind 'effects')")
    try:
        scores = doc.get("scores")
        return EffectEstimates(
            theta_hat=np.asarray(doc["theta_hat"], dtype=float),
            std_err=np.asarray(doc["std_err"], dtype=float),
            t_stat=np.asarray(doc["t_stat"], dtype=float),
            scores=None if scores is None else np.asarray(scores, dtype=float).reshape(doc["n"], -1),
            names=tuple(doc["names"]),
            n=int(doc["n"]),
            selected_union=tuple(doc.get("selected_union", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed effects document: {exc}") from None


def adjusted_doc(adj: AdjustedPValues) -> dict[str, Any]:
    doc = {
        "schema": SCHEMA,
        "kind": "adjusted_pvalues",
        "method": adj.method,
        "names": list(adj.names),
        "estimate": _floats(adj.estimates) if adj.estimates is not None else None,
        "raw": _floats(adj.raw),
        "adjusted": _floats(adj.adjusted),
    }
    if adj.method == "RW":
        doc["B"] = adj.B
        doc["seed"] = adj.seed
    return doc


def confint_doc(region: JointConfidenceRegion) -> dict[str, Any]:
    doc = {
        "schema": SCHEMA,
        "kind": "confint",
        "joint": region.joint,
        "level": region.level,
        "critical": region.critical,
        "names": list(region.names),
        "estimate": _floats(region.estimates) if region.estimates is not None else None,
        "lower": _floats(region.lower),
        "upper": _floats(region.upper),
    }
    if region.joint:
        doc["B"] = region.B
        doc["seed"] = region.seed
    return doc


def simulation_doc(report: SimulationReport) -> dict[str, Any]:
    return {"schema": SCHEMA, "kind": "simulation", **report.to_dict()}


def _table(header: list[str], rows: list[tuple[str, list[str]]]) -> str:
    width0 = max([len(r[0]) for r in rows] + [0])
    widths = [max(len(h), *(len(r[1][i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    lines = [" " * width0 + "".join(f"  {h:>{w}}" for h, w in zip(header, widths))]
    for label, cells in rows:
        lines.append(f"{label:<{width0}}" + "".join(f"  {c:>{w}}" for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def lasso_table(fit: LassoFit, sup: SupScoreResult | None = None) -> str:
    out = [
        f"Post-Lasso Estimation: {'TRUE' if fit.post_lasso else 'FALSE'}",
        f"Total number of variables: {len(fit.coefficients)}",
        f"Number of selected variables: {len(fit.selected)}",
        f"Penalty level (lambda): {fmt(fit.lambda_)}",
        "",
    ]
    rows = [("(Intercept)", [fmt(fit.intercept)])]
    rows += [(fit.column_names[j], [fmt(fit.coefficients[j])]) for j in fit.selected]
    text = "\n".join(out) + "\n" + _table(["Estimate"], rows)
    resid = fit.residuals
    text += f"\nResidual standard error: {fmt(np.sqrt(np.mean(resid**2)))}\n"
    text += f"Multiple R-squared: {fmt(fit.r_squared)}\n"
    if sup is not None:
        text += (
            "Joint significance test:\n"
            f" sup score statistic: {fmt(sup.statistic)}  p-value: {fmt(sup.p_value)}"
            f"  critical value ({fmt(1 - sup.alpha)}): {fmt(sup.critical_value)}  B: {sup.B}\n"
        )
    return text


def effects_table(est: EffectEstimates) -> str:
    p = raw_pvalues(est)
    rows = [
        (name, [fmt(est.theta_hat[k]), fmt(est.std_err[k]), fmt(est.t_stat[k]), fmt(p[k])])
        for k, name in enumerate(est.names)
    ]
    return _table(["Estimate", "Std. Error", "t value", "Pr(>|t|)"], rows)


def adjusted_table(adj: AdjustedPValues) -> str:
    est = adj.estimates if adj.estimates is not None else np.full(len(adj.adjusted), np.nan)
    rows = [(name, [fmt(est[k]), fmt(adj.adjusted[k])]) for k, name in enumerate(adj.names)]
    return _table(["Estimate", "pval"], rows)


def confint_table(region: JointConfidenceRegion) -> str:
    lo = f"{fmt(100 * (1 - region.level) / 2)} %"
    hi = f"{fmt(100 * (1 + region.level) / 2)} %"
    rows = [(name, [fmt(region.lower[k]), fmt(region.upper[k])]) for k, name in enumerate(region.names)]
    kind = "joint" if region.joint else "marginal"
    return f"{kind} {fmt(region.level)} confidence region, critical value {fmt(region.critical)}\n" + _table(
        [lo, hi], rows
    )


def simulation_table(report: SimulationReport) -> str:
    cfg = report.config
    head = (
        f"n={cfg.n} K={cfg.K} rho={fmt(cfg.rho)} sigma2={fmt(cfg.sigma2)} s={cfg.s} "
        f"R={report.R} B={report.B} alpha={fmt(report.alpha)} failures={report.failures}\n"
    )
    rows = []
    for m in STUDY_METHODS:
        v = report.metrics[m]
        rows.append(
            (
                m,
                [
                    fmt(v.correct_mean),
                    f"({fmt(v.correct_sd)})",
                    fmt(v.incorrect_mean),
                    f"({fmt(v.incorrect_sd)})",
                    fmt(v.fwer),
                    fmt(v.fdr),
                ],
            )
        )
    return head + _table(["correct", "sd", "incorrect", "sd", "FWER", "FDR"], rows)
