"""Command-line front end: ``hdsi fit|effects|adjust|confint|simulate``.

Exit status is 0 on success, 2 on usage errors and 1 when the data or a
numerical step fails. Tables go to standard output; ``--json`` prints the
JSON document instead and ``--out`` writes it to a file together with a
``<out>.manifest.json`` sidecar describing the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
import time
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__, output
from .dataset import Dataset, build_interactions, drop_constants, load_csv, match_columns
from .effects import double_select_effects, ols_effects
from .errors import DataError, HdsiError
from .lasso import PenaltyConfig, fit_lasso, sup_score_test
from .multitest import DEFAULT_B, canonical_method, joint_confint, marginal_confint, p_adjust
from .simulation import DgpConfig, run_study

logger = logging.getLogger("hdsi")


@dataclass
class RunManifest:
    command_line: list[str]
    config: dict
    seed: int | None
    version: str
    duration_seconds: float


class UsageError(Exception):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "t", "yes", "1"):
        return True
    if t in ("false", "f", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("HDSI_THREADS", "1")
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"HDSI_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("--threads must be at least 1")
    return n


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(31)
        print(f"seed: {args.seed}", file=sys.stderr)
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    return args.seed


def _add_common(p: argparse.ArgumentParser, seeded: bool = False) -> None:
    p.add_argument("--json", action="store_true", help="print the JSON document instead of a table")
    p.add_argument("--out", type=Path, help="also write the JSON document (and a manifest sidecar) here")
    p.add_argument("--threads", type=int, help="worker cap; falls back to $HDSI_THREADS, then 1")
    if seeded:
        p.add_argument("--seed", type=int, help="master seed (drawn from system entropy if absent)")


def _add_data(p: argparse.ArgumentParser, targets_required: bool) -> None:
    p.add_argument("--data", type=Path, required=True, help="CSV file with one header row")
    p.add_argument("--outcome", required=True, help="outcome column")
    p.add_argument(
        "--targets",
        required=targets_required,
        help="target columns: names or shell patterns (fem*), comma separated",
    )
    p.add_argument(
        "--interact",
        action="append",
        default=[],
        metavar="FOCAL=P1,P2",
        help="append FOCAL:Pj interaction columns before selecting targets (repeatable)",
    )


def _add_penalty(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hetero", type=_bool, default=True, help="heteroscedastic penalty loadings (default true)")
    p.add_argument("--c", type=float, default=1.1, help="penalty slack constant")
    p.add_argument("--gamma", type=float, help="quantile tail mass (default 0.1/log(max(n,p)))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdsi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hdsi {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="lasso with theory-driven penalty and sup-score test")
    _add_data(p, targets_required=False)
    _add_penalty(p)
    p.add_argument("--post-lasso", type=_bool, default=True)
    p.add_argument("--alpha", type=float, default=0.05, help="level of the sup-score test")
    p.add_argument("--B", type=int, default=500, help="sup-score bootstrap draws")
    _add_common(p, seeded=True)

    p = sub.add_parser("effects", help="double-selection (or OLS) estimates of target coefficients")
    _add_data(p, targets_required=True)
    _add_penalty(p)
    p.add_argument("--method", choices=("ds", "ols"), default="ds")
    p.add_argument("--vcov", choices=("HC1", "HC0"), default="HC1")
    p.add_argument("--scores", action="store_true", help="include per-observation scores in the JSON")
    _add_common(p)

    for name, help_ in (("adjust", "multiple-testing adjusted p-values"), ("confint", "confidence regions")):
        p = sub.add_parser(name, help=help_)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--effects", type=Path, help="effects JSON written by 'hdsi effects'")
        src.add_argument("--data", type=Path, help="CSV file; runs 'effects' inline")
        p.add_argument("--outcome")
        p.add_argument("--targets")
        p.add_argument("--interact", action="append", default=[], metavar="FOCAL=P1,P2")
        _add_penalty(p)
        p.add_argument("--effects-method", choices=("ds", "ols"), default="ds")
        p.add_argument("--vcov", choices=("HC1", "HC0"), default="HC1")
        p.add_argument("--B", type=int, help=f"bootstrap draws (default {DEFAULT_B})")
        if name == "adjust":
            p.add_argument("--method", default="RW", help="none, bonferroni, holm, BH or RW (default RW)")
            p.add_argument("--alpha", type=float, help="level reported alongside the table")
        else:
            p.add_argument("--level", type=float, default=0.95)
            p.add_argument("--joint", action="store_true", help="simultaneous region via multiplier bootstrap")
        _add_common(p, seeded=True)

    p = sub.add_parser("simulate", help="Monte Carlo study of all adjustment methods")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--K", type=int, default=60)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--sigma2", type=float, default=3.0)
    p.add_argument("--s", type=int, default=12)
    p.add_argument("--R", type=int, default=500)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--B", type=int, default=500)
    _add_common(p, seeded=True)
    return parser


def _penalty(args, homoscedastic: bool | None = None, post_lasso: bool = True) -> PenaltyConfig:
    return PenaltyConfig(
        c=args.c,
        gamma=args.gamma,
        homoscedastic=(not args.hetero) if homoscedastic is None else homoscedastic,
        post_lasso=post_lasso,
    )


def _load(args, need_targets: bool):
    if need_targets and not args.targets:
        raise UsageError("--targets is required")
    if not args.outcome:
        raise UsageError("--outcome is required with --data")
    data = load_csv(args.data, args.outcome, None)
    for item in args.interact:
        focal, sep, partners = item.partition("=")
        if not sep or not partners:
            raise UsageError(f"--interact expects FOCAL=P1,P2, got {item!r}")
        data = build_interactions(data, focal.strip(), [s.strip() for s in partners.split(",") if s.strip()])
    if args.targets:
        index = set(match_columns(data.column_names, args.targets))
        # interactions of a target column are targets as well
        chosen = {data.column_names[j] for j in index}
        index |= {j for j, c in enumerate(data.column_names) if c.partition(":")[0] in chosen and ":" in c}
        index = sorted(index)
        data = Dataset(y=data.y, X=data.X, column_names=data.column_names, target_index=index, outcome_name=data.outcome_name)
    return drop_constants(data)


def _estimates(args, threads: int):
    if getattr(args, "effects", None) is not None:
        path = args.effects
        if not path.is_file():
            raise DataError(f"no such file: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} is not valid JSON: {exc}") from None
        return output.effects_from_doc(doc)
    data = _load(args, need_targets=True)
    method = getattr(args, "effects_method", None) or args.method
    if method == "ols":
        return ols_effects(data, vcov=args.vcov)
    return double_select_effects(data, _penalty(args), vcov=args.vcov, threads=threads)


def _cmd_fit(args, threads):
    seed = _seed(args)
    data = _load(args, need_targets=False)
    fit = fit_lasso(data, _penalty(args, post_lasso=args.post_lasso))
    sup = sup_score_test(data, alpha=args.alpha, B=args.B, seed=seed, threads=threads)
    return output.lasso_doc(fit, sup), output.lasso_table(fit, sup), seed


def _cmd_effects(args, threads):
    est = _estimates(args, threads)
    return output.effects_doc(est, include_scores=args.scores), output.effects_table(est), None


def _bootstrap_B(args, method_uses_bootstrap: bool) -> int:
    if args.B is None:
        if method_uses_bootstrap:
            warnings.warn(f"--B not given; using B={DEFAULT_B}", stacklevel=2)
        return DEFAULT_B
    if args.B < 100:
        raise UsageError("--B must be at least 100")
    return args.B


def _cmd_adjust(args, threads):
    try:
        method = canonical_method(args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    B = _bootstrap_B(args, method == "RW")
    seed = _seed(args) if method == "RW" else args.seed
    est = _estimates(args, threads)
    adj = p_adjust(est, method, B, seed if seed is not None else 0, threads=threads)
    table = output.adjusted_table(adj)
    if args.alpha is not None:
        table += f"rejected at {output.fmt(args.alpha)}: {int(adj.rejected(args.alpha).sum())} of {len(adj.adjusted)}\n"
    return output.adjusted_doc(adj), table, seed


def _cmd_confint(args, threads):
    if not 0.5 < args.level < 1:
        raise UsageError("--level must lie in (0.5, 1)")
    est = _estimates(args, threads)
    if args.joint:
        B = _bootstrap_B(args, False)
        seed = _seed(args)
        region = joint_confint(est, args.level, B, seed, threads=threads)
    else:
        seed = None
        region = marginal_confint(est, args.level)
    return output.confint_doc(region), output.confint_table(region), seed


def _cmd_simulate(args, threads):
    seed = _seed(args)
    s = args.s
    if s > args.K:
        warnings.warn(f"--s {s} exceeds --K {args.K}; using s={args.K}", stacklevel=2)
        s = args.K
    try:
        cfg = DgpConfig.design(n=args.n, K=args.K, rho=args.rho, sigma2=args.sigma2, s=s, seed=seed, R=args.R)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.B < 100:
        raise UsageError("--B must be at least 100")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    report = run_study(cfg, args.alpha, args.B, threads=threads)
    return output.simulation_doc(report), output.simulation_table(report), seed


COMMANDS = {
    "fit": _cmd_fit,
    "effects": _cmd_effects,
    "adjust": _cmd_adjust,
    "confint": _cmd_confint,
    "simulate": _cmd_simulate,
}


def _resolved_config(args) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        cfg[k] = str(v) if isinstance(v, Path) else v
    return cfg


def dispatch(argv: list[str] | None = None) -> int:
    """Run one CLI invocation and return its exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="hdsi: %(message)s")
    start = time.perf_counter()
    try:
        threads = _threads(args)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: print(f"hdsi: warning: {msg}", file=sys.stderr)
            doc, table, seed = COMMANDS[args.command](args, threads)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hdsi: error: {exc}", file=sys.stderr)
        return 2
    except HdsiError as exc:
        print(f"hdsi: {exc.stage} error in '{args.command}': {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"hdsi: error: {exc}", file=sys.stderr)
        return 2

    text = output.dumps(doc)
    sys.stdout.write(text if args.json else table)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
        manifest = RunManifest(
            command_line=["hdsi", *argv],
            config=_resolved_config(args),
            seed=seed,
            version=__version__,
            duration_seconds=round(time.perf_counter() - start, 3),
        )
        sidecar = args.out.with_name(args.out.name + ".manifest.json")
        sidecar.write_text(json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")
    return 0


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
