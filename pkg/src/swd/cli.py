"""``swd`` command-line interface."""

from __future__ import annotations

import argparse
import os
import secrets
import sys
from pathlib import Path

from . import __version__
from .approx import approx_constants, fit_regression
from .config import COMMANDS, RunConfig, parse_config
from .errors import ConfigError, InvalidDesignError, NoQualifierError, NonEstimableError, TooLargeError
from .exact import exact_precision_matrix, exact_precision_scalar
from .geometry import (
    Allocation,
    ClusterSet,
    TrialConfig,
    allocation_from_canonical,
    build_geometry,
    canonical_form,
    derive_profile,
    format_canonical,
    parse_canonical,
)
from .moments import SizeMoments, approx_W, approx_Wbeta
from .optimal import optimal_P, optimal_P_equal_case, optimal_value_formula
from .report import EmptyResultError, emit_mapping, emit_report, emit_scatter
from .search import (
    DesignContext,
    SearchScheme,
    balanced_counts,
    enumerate_allocations,
    metrics,
    rank_key,
    recommend,
    sample,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_EMPTY = 3
EXIT_NON_ESTIMABLE = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swd", description="Efficient stepped wedge designs for unequal clusters.")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--periods")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--lambda", dest="lam")
    grp.add_argument("--icc")
    p.add_argument("--mu")
    p.add_argument("--sizes")
    p.add_argument("--mean")
    p.add_argument("--cv")
    p.add_argument("--alloc", help="sequence per cluster (1,1,2,...) or sizes per sequence (4,4,2;6;6,6)")
    p.add_argument("--mode", help="exhaustive, unrestricted or balanced")
    p.add_argument("--reps")
    p.add_argument("--seed")
    p.add_argument("--threshold")
    p.add_argument("--extra-rule", dest="extra_rule", help="outer, inner or free")
    p.add_argument("--mirror-dedup", dest="mirror_dedup", action="store_true", default=None)
    p.add_argument("--top-k", dest="top_k")
    p.add_argument("--output", choices=("table", "csv"))
    p.add_argument("--scatter", choices=("distance", "imbalance"),
                   help="emit two-column (axis, V) CSV instead of the report")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--version", action="version", version=f"swd {__version__}")
    return p


_FLAG_KEYS = {"periods": "periods", "lam": "lambda", "icc": "icc", "mu": "mu", "sizes": "sizes",
              "mean": "mean", "cv": "cv", "alloc": "alloc", "mode": "mode", "reps": "reps",
              "seed": "seed", "threshold": "threshold", "extra_rule": "extra_rule",
              "mirror_dedup": "mirror_dedup", "top_k": "top_k", "output": "output", "command": "command"}


def load_run_config(args: argparse.Namespace) -> RunConfig:
    text = args.config.read_text() if args.config else ""
    overrides = {key: getattr(args, attr) for attr, key in _FLAG_KEYS.items()}
    return parse_config(text, overrides)


def resolve_seed(rc: RunConfig) -> int:
    if rc.seed is not None:
        return rc.seed
    env = os.environ.get("SWD_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SWD_SEED must be an integer, got {env!r}", "seed") from None
    return secrets.randbits(63)


def parse_allocation(text: str, clusters: ClusterSet, S: int) -> Allocation:
    if ";" in text:
        canon = parse_canonical(text)
        if len(canon) != S:
            raise ConfigError(f"allocation lists {len(canon)} sequences, design has {S}", "alloc")
        alloc = allocation_from_canonical(clusters, canon)
    else:
        alloc = Allocation(tuple(int(x) for x in text.split(",") if x.strip()))
    try:
        alloc.validate(len(clusters), S)
    except InvalidDesignError as exc:
        raise ConfigError(str(exc), "alloc") from None
    return alloc


def _trial(rc: RunConfig) -> TrialConfig:
    if rc.lam is not None:
        return TrialConfig(rc.periods, lam=rc.lam, mu=rc.mu)
    return TrialConfig(rc.periods, icc=rc.icc, mu=rc.mu)


def _scheme(rc: RunConfig, seed: int | None, workers: int) -> SearchScheme:
    return SearchScheme(mode=rc.search_mode, reps=rc.reps, seed=seed, mirror_dedup=rc.mirror_dedup,
                        extra_cluster_rule=rc.extra_rule, exact_top_k=rc.top_k, workers=workers)


def _announce_seed(seed: int, rc: RunConfig, out, err) -> None:
    # keep CSV on stdout parseable
    print(f"# seed = {seed}", file=err if rc.output == "csv" else out)


def cmd_analyze(rc: RunConfig, out, err) -> int:
    config = _trial(rc)
    clusters = ClusterSet(rc.sizes)
    S = config.sequences
    alloc = parse_allocation(rc.alloc, clusters, S)
    scalar = exact_precision_scalar(config, clusters, alloc)
    matrix = exact_precision_matrix(config, clusters, alloc)
    if not matrix.estimable:
        print("error: treatment effect is not estimable for this allocation", file=err)
        return EXIT_NON_ESTIMABLE
    ctx = DesignContext.build(config, clusters)
    r = ctx.evaluate(alloc)
    m = metrics(alloc, config, clusters, ctx)
    items = [
        ("allocation", format_canonical(canonical_form(clusters, alloc, S))),
        ("W", float(ctx.fit.W)),
        ("beta", float(ctx.fit.beta)),
        ("Wbeta", float(ctx.fit.wbeta)),
        ("corr(q,p)", ctx.fit.corr),
        ("P", r.P),
        ("K", r.K),
        ("a", r.a),
        ("b", r.b),
        ("V_exact_scalar", scalar.v_exact),
        ("V_exact_matrix", matrix.v_exact),
        ("var_theta", scalar.var_theta),
        ("V_approx", r.v_approx),
        ("approx_error", abs(r.v_approx - scalar.v_exact) / scalar.v_exact),
        ("V_opt", r.v_opt),
        ("efficiency", r.efficiency),
        ("P_opt", r.p_opt),
        ("distance", m.distance),
        ("imbalance", m.imbalance),
        ("mean_size_per_sequence", m.mean_sizes),
        ("PtAP", r.terms.quadratic),
        ("h1_b_ztP", r.terms.linear),
        ("-h2_b2", r.terms.b_penalty),
        ("-W(1-beta)a", r.terms.a_gain),
    ]
    out.write(emit_mapping(items, rc.output))
    return EXIT_OK


class _MomentFit:
    """Stand-in for a regression fit built from moment approximations."""

    def __init__(self, W: float, wbeta: float):
        self.W = W
        self.beta = wbeta / W if W > 0 else 1.0
        self.wbeta = wbeta


def cmd_optimal(rc: RunConfig, out, err) -> int:
    config = _trial(rc)
    geom = build_geometry(config.sequences)
    S = geom.S
    items: list[tuple[str, object]] = []
    if rc.sizes is not None:
        clusters = ClusterSet(rc.sizes)
        fit = fit_regression(config, clusters)
        C = len(clusters)
        if rc.alloc:
            alloc = parse_allocation(rc.alloc, clusters, S)
            K = derive_profile(config, clusters, alloc).K
        else:
            K = [k / C for k in balanced_counts(C, S, rc.extra_rule)] if rc.extra_rule != "free" else [1 / S] * S
        items.append(("source", "cluster sizes"))
    else:
        moments = SizeMoments(rc.mean, rc.cv)
        fit = _MomentFit(approx_W(moments, rc.lam_value, rc.periods), approx_Wbeta(moments, rc.lam_value, rc.periods))
        K = [1 / S] * S
        items.append(("source", "mean/cv (second-order W)"))
    c = approx_constants(fit, geom)
    opt = optimal_P(fit, geom, K)
    items += [
        ("W", float(fit.W)),
        ("beta", float(fit.beta)),
        ("Wbeta", float(fit.W) * float(fit.beta)),
        ("h1", c.h1), ("h2", c.h2), ("h3", c.h3), ("gamma", c.gamma),
        ("K", K), ("a", opt.a), ("b", opt.b),
        ("P_opt", opt.p_opt),
        ("feasible", opt.feasible),
        ("V_opt", opt.v_opt),
        ("V_opt_formula", optimal_value_formula(fit, S, opt.a, opt.b)),
        ("P_opt_equal_P_K", optimal_P_equal_case(fit, geom)),
    ]
    if not opt.feasible:
        items += [("P_constrained", opt.p_constrained), ("V_constrained", opt.v_constrained)]
    out.write(emit_mapping(items, rc.output))
    return EXIT_OK


def _emit_ranked(results, rc: RunConfig, args, clusters: ClusterSet, out) -> None:
    if args.scatter:
        out.write(emit_scatter(results, args.scatter))
    else:
        out.write(emit_report(results, rc.output, N=clusters.total, C=len(clusters), top_k=rc.top_k))


def cmd_enumerate(rc: RunConfig, args, out, err) -> int:
    config = _trial(rc)
    clusters = ClusterSet(rc.sizes)
    results = enumerate_allocations(clusters, config, _scheme(rc, None, 1))
    _emit_ranked(results, rc, args, clusters, out)
    return EXIT_OK


def cmd_sample(rc: RunConfig, args, out, err) -> int:
    config = _trial(rc)
    clusters = ClusterSet(rc.sizes)
    seed = resolve_seed(rc)
    _announce_seed(seed, rc, out, err)
    ctx = DesignContext.build(config, clusters)
    results = list(sample(clusters, config, _scheme(rc, seed, args.workers), ctx))
    if args.scatter:
        out.write(emit_scatter(results, args.scatter))
        return EXIT_OK
    ranked = sorted(results, key=rank_key)
    unique, seen = [], set()
    for r in ranked:
        if r.canonical not in seen:
            seen.add(r.canonical)
            unique.append(ctx.with_exact(r) if len(unique) < rc.top_k else r)
        if len(unique) >= rc.top_k:
            break
    _emit_ranked(unique, rc, args, clusters, out)
    return EXIT_OK


def cmd_recommend(rc: RunConfig, args, out, err) -> int:
    config = _trial(rc)
    clusters = ClusterSet(rc.sizes)
    seed = resolve_seed(rc)
    _announce_seed(seed, rc, out, err)
    rec = recommend(clusters, config, _scheme(rc, seed, args.workers), rc.threshold)
    ch = rec.choice
    items = [
        ("allocation", format_canonical(ch.canonical)),
        ("assignment", ",".join(str(a) for a in ch.allocation.assignment)),
        ("V", ch.v_approx),
        ("V_opt", ch.v_opt),
        ("efficiency", ch.efficiency),
        ("distance", ch.distance),
        ("imbalance", ch.imbalance),
        ("P", ch.P),
        ("K", ch.K),
        *rec.audit().items(),
    ]
    out.write(emit_mapping(items, rc.output))
    return EXIT_OK


def cmd_moments(rc: RunConfig, out, err) -> int:
    if rc.sizes is not None:
        clusters = ClusterSet(rc.sizes)
        moments = SizeMoments(clusters.mean, clusters.cv, len(clusters))
    else:
        moments = SizeMoments(rc.mean, rc.cv)
    lam, T = rc.lam_value, rc.periods
    items = [
        ("M", moments.M),
        ("CV", moments.CV),
        ("W_first", approx_W(moments, lam, T, "first")),
        ("W_second", approx_W(moments, lam, T, "second")),
        ("Wbeta", approx_Wbeta(moments, lam, T)),
    ]
    if rc.sizes is not None:
        fit = fit_regression(_trial(rc), ClusterSet(rc.sizes), warn=False)
        items += [("W_actual", float(fit.W)), ("Wbeta_actual", float(fit.wbeta))]
    out.write(emit_mapping(items, rc.output))
    return EXIT_OK


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = load_run_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARSE
    try:
        if rc.command == "analyze":
            return cmd_analyze(rc, out, err)
        if rc.command == "optimal":
            return cmd_optimal(rc, out, err)
        if rc.command == "enumerate":
            return cmd_enumerate(rc, args, out, err)
        if rc.command == "sample":
            return cmd_sample(rc, args, out, err)
        if rc.command == "recommend":
            return cmd_recommend(rc, args, out, err)
        return cmd_moments(rc, out, err)
    except ConfigError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARSE
    except (NoQualifierError, EmptyResultError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_EMPTY
    except NonEstimableError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_NON_ESTIMABLE
    except (InvalidDesignError, TooLargeError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
