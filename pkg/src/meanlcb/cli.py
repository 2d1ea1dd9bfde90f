"""Command-line front end.

Every capability is reachable as a subcommand with file-based inputs and
machine-readable output on standard out.  Identical settings (including
the seed) produce byte-identical output.  Exit codes: 0 success,
2 invalid input, 3 oracle mismatch, 4 solver non-convergence, 5 cap
refusal.  Inputs are validated before any computation starts, so a
failing invocation never emits partial output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .analysis import (
    BoundFunction,
    PriorConfig,
    compare,
    simulate_coverage,
    verify_validity,
)
from .bounds import (
    Ordering,
    classify_admissibility,
    compute_bound_table,
    enumerate_admissible,
    load_order_file,
    standard_ordering,
    table_to_jsonable,
)
from .lattice import enumerate_sample_space, normalize_support, space_to_jsonable
from .likelihood import Distribution, build_subset_likelihood, contour_grid
from .solver import (
    CapExceededError,
    CentralProblem,
    NonConvergenceError,
    SolverConfig,
    grid_oracle,
)

THREADS_ENV = "MEANLCB_THREADS"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ORACLE = 3
EXIT_NONCONVERGENCE = 4
EXIT_CAP = 5


class OracleMismatchError(RuntimeError):
    """A solved bound disagreed with the exhaustive grid cross-check."""


@dataclass(frozen=True)
class RunConfig:
    """Merged settings for one invocation: explicit flags override the
    config file, which overrides built-in defaults."""

    support: tuple[float, ...]
    n: int
    alpha: float | None
    order_spec: str
    solver: SolverConfig
    output: str
    seed: int
    raw: bool


def _parse_reals(text: str, what: str) -> list[float]:
    items = [t.strip() for t in str(text).split(",")]
    if any(not t for t in items):
        raise ValueError(f"{what} must be a nonempty comma-separated list of numbers")
    try:
        return [float(t) for t in items]
    except ValueError:
        raise ValueError(f"could not parse {what}: {text!r}") from None


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib as toml
        except ModuleNotFoundError:
            import tomli as toml
        with open(path, "rb") as fh:
            data = toml.load(fh)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config file must hold a table/object at top level")
    return data


def _build_run(args, need_alpha: bool = True, default_output: str = "json"):
    """Merge flags over the config file, validate, and build the space."""
    cfg = _load_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(flag_name, cfg_key, default=None):
        val = getattr(args, flag_name, None)
        if val is not None:
            return val
        return cfg.get(cfg_key, default)

    support_in = pick("support", "support")
    if support_in is None:
        raise ValueError("--support is required (flag or config file)")
    values = (_parse_reals(support_in, "--support")
              if isinstance(support_in, str) else [float(v) for v in support_in])
    n = pick("n", "n")
    if n is None:
        raise ValueError("--n is required (flag or config file)")
    n = int(n)
    if n < 1:
        raise ValueError("--n must be >= 1")
    alpha = pick("alpha", "alpha")
    if alpha is None and need_alpha:
        raise ValueError("--alpha is required (flag or config file)")
    if alpha is not None:
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise ValueError("--alpha must lie strictly between 0 and 1")
    order_spec = str(pick("order", "order", "mean"))
    output = str(pick("output", "output", default_output))
    if output not in {"json", "csv", "table"}:
        raise ValueError("--output must be one of: json, csv, table")
    solver_cfg = cfg.get("solver", {})
    if not isinstance(solver_cfg, dict):
        raise ValueError("config 'solver' section must be a table/object")
    seed = pick("seed", "seed", solver_cfg.get("seed", 0))
    seed = int(seed)
    env_threads = os.environ.get(THREADS_ENV)
    threads = pick("threads", "threads",
                   int(env_threads) if env_threads else solver_cfg.get("threads", 1))
    threads = int(threads)
    solver = SolverConfig.from_dict(dict(solver_cfg)).with_overrides(
        seed=seed, threads=threads
    )
    raw = bool(getattr(args, "raw", False) or cfg.get("raw", False))
    support = normalize_support(values)
    space = enumerate_sample_space(support, n)
    run = RunConfig(support=tuple(values), n=n, alpha=alpha, order_spec=order_spec,
                    solver=solver, output=output, seed=seed, raw=raw)
    return run, space


def _ordering_from_spec(spec: str, space) -> Ordering:
    if spec == "lex":
        return standard_ordering(space, "lexicographic")
    if spec == "mean":
        return standard_ordering(space, "sample_mean")
    if spec.startswith("perm:"):
        body = spec[len("perm:"):]
        try:
            perm = tuple(int(t) for t in body.split(","))
        except ValueError:
            raise ValueError(f"bad permutation in order spec {spec!r}") from None
        return Ordering(perm=perm, label=spec)
    if spec.startswith("file:"):
        return load_order_file(spec[len("file:"):], space.size)
    raise ValueError(
        f"unknown order spec {spec!r}: use lex, mean, perm:i,j,..., or file:path"
    )


def _bound_from_spec(spec: str, space, alpha, config) -> BoundFunction:
    if spec.startswith("file:"):
        return BoundFunction.from_file(spec[len("file:"):], space)
    if alpha is None:
        raise ValueError("--alpha is required to compute a bound table from an order")
    ordering = _ordering_from_spec(spec, space)
    table = compute_bound_table(space, ordering, alpha, config)
    return BoundFunction.from_table(table)


def _sample_values_text(space, index: int, shift: float) -> str:
    sample = space.samples[index]
    return " ".join(jsonio._cell(v + shift) for v in sample.sorted_values)


def _table_text(header: list[str], rows: list[list]) -> str:
    cells = [[jsonio._cell(v) if isinstance(v, float) else str(v) for v in row]
             for row in rows]
    widths = [len(h) for h in header]
    for row in cells:
        for i, c in enumerate(row):
            widths[i] = max(widths[i], len(c))
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _emit(output: str, obj, header: list[str], rows: list[list]) -> str:
    if output == "json":
        return jsonio.dumps(obj)
    if output == "csv":
        return jsonio.csv_text(header, rows)
    return _table_text(header, rows)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_lattice(args) -> str:
    run, space = _build_run(args, need_alpha=False)
    shift = space.support.shift
    obj = space_to_jsonable(space)
    rows = [[i, " ".join(str(c) for c in space.samples[i].counts),
             _sample_values_text(space, i, shift)]
            for i in range(space.size)]
    return _emit(run.output, obj, ["index", "counts", "values"], rows)


def _check_against_oracle(space, table, alpha, resolution: int, tol: float, config):
    mismatches = []
    perm = table.ordering.perm
    for k, entry in enumerate(table.entries):
        problem = CentralProblem.from_member_ids(space, perm[k:], alpha)
        oracle = grid_oracle(problem, resolution, config)
        a, b = entry.bound, oracle.bound
        if math.isinf(a) != math.isinf(b):
            mismatches.append((k + 1, a, b))
        elif math.isfinite(a) and abs(a - b) > tol:
            mismatches.append((k + 1, a, b))
    if mismatches:
        lines = ", ".join(
            f"position {k}: solved {jsonio._cell(a)} vs grid {jsonio._cell(b)}"
            for k, a, b in mismatches
        )
        raise OracleMismatchError(
            f"grid oracle (resolution {resolution}, tolerance {tol}) disagrees: {lines}"
        )


def cmd_bound(args) -> str:
    run, space = _build_run(args)
    ordering = _ordering_from_spec(run.order_spec, space)
    table = compute_bound_table(space, ordering, run.alpha, run.solver)
    report = classify_admissibility(space, ordering, run.alpha, run.solver, table=table)
    if args.check_oracle is not None:
        _check_against_oracle(space, table, run.alpha, int(args.check_oracle),
                              float(args.oracle_tol), run.solver)
    obj = table_to_jsonable(space, table, report=report, raw=run.raw)
    shift = 0.0 if run.raw else space.support.shift
    rows = []
    for k, entry in enumerate(table.entries):
        b = entry.bound if math.isinf(entry.bound) else entry.bound + shift
        rows.append([k + 1, entry.sample_index,
                     _sample_values_text(space, entry.sample_index, space.support.shift),
                     float(b), entry.on_boundary])
    header = ["position", "index", "sample", "bound", "on_boundary"]
    return _emit(run.output, obj, header, rows)


def cmd_verify(args) -> str:
    run, space = _build_run(args)
    spec = args.bound_file and f"file:{args.bound_file}" or run.order_spec
    bound = _bound_from_spec(spec, space, run.alpha, run.solver)
    resolution = int(args.resolution)
    report = verify_validity(space, bound, run.alpha, resolution=resolution,
                             refine=not args.no_refine, config=run.solver)
    shift = 0.0 if run.raw else space.support.shift
    details = [{
        "cut": d["cut"] + shift,
        "cap": d["cap"] if math.isinf(d["cap"]) else d["cap"] + shift,
        "set_size": d["set_size"],
        "max_prob": d["max_prob"],
    } for d in report.details]
    obj = {
        "verdict": report.verdict,
        "alpha": report.alpha,
        "max_error_prob": report.max_error_prob,
        "witness": None if report.witness is None else list(report.witness.probs),
        "method": report.method,
        "resolution": report.resolution,
        "margin": report.margin,
        "bound_source": bound.provenance,
        "details": details,
    }
    header = ["verdict", "alpha", "max_error_prob", "method", "resolution", "margin"]
    rows = [[report.verdict, report.alpha, report.max_error_prob, report.method,
             report.resolution, report.margin]]
    return _emit(run.output, obj, header, rows)


def cmd_coverage(args) -> str:
    run, space = _build_run(args, need_alpha=args.bound_file is None)
    probs = _parse_reals(args.dist, "--dist")
    if len(probs) != space.support.size:
        raise ValueError(
            f"--dist needs {space.support.size} probabilities "
            "(one per distinct support value, ascending)"
        )
    dist = Distribution(np.array(probs))
    spec = args.bound_file and f"file:{args.bound_file}" or run.order_spec
    bound = _bound_from_spec(spec, space, run.alpha, run.solver)
    trials = int(args.trials)
    result = simulate_coverage(space, bound, dist, trials, seed=run.seed)
    shift = 0.0 if run.raw else space.support.shift
    obj = {
        "error_rate": result.error_rate,
        "standard_error": result.standard_error,
        "errors": result.errors,
        "trials": result.trials,
        "true_mean": result.true_mean + shift,
        "seed": run.seed,
        "bound_source": bound.provenance,
    }
    header = ["error_rate", "standard_error", "errors", "trials", "true_mean"]
    rows = [[result.error_rate, result.standard_error, result.errors,
             result.trials, result.true_mean + shift]]
    return _emit(run.output, obj, header, rows)


def cmd_compare(args) -> str:
    run, space = _build_run(
        args,
        need_alpha=not (str(args.bound_a).startswith("file:")
                        and str(args.bound_b).startswith("file:")),
    )
    a = _bound_from_spec(args.bound_a, space, run.alpha, run.solver)
    b = _bound_from_spec(args.bound_b, space, run.alpha, run.solver)
    prior = None
    if args.metric == "expected_value":
        conc = args.concentration
        concentration = (tuple(_parse_reals(conc, "--concentration"))
                         if conc is not None and "," in str(conc)
                         else float(conc) if conc is not None else 1.0)
        prior = PriorConfig(concentration=concentration, draws=int(args.draws),
                            seed=run.seed)
    result = compare(space, a, b, metric=args.metric, prior=prior)
    obj = {
        "metric": result.metric,
        "relation": result.relation,
        "witnesses": result.witnesses,
        "details": result.details,
        "bound_a": a.provenance,
        "bound_b": b.provenance,
    }
    header = ["metric", "relation", "a_gt_b", "b_gt_a"]
    wit_a = " ".join(str(i) for i in result.witnesses.get("a_gt_b", []))
    wit_b = " ".join(str(i) for i in result.witnesses.get("b_gt_a", []))
    rows = [[result.metric, result.relation, wit_a, wit_b]]
    return _emit(run.output, obj, header, rows)


def cmd_enumerate(args) -> str:
    run, space = _build_run(args)
    results = enumerate_admissible(space, run.alpha, run.solver, cap=int(args.cap))
    obj = {
        "count": len(results),
        "tables": [table_to_jsonable(space, t, report=r, raw=run.raw)
                   for _, t, r in results],
    }
    shift = 0.0 if run.raw else space.support.shift
    rows = []
    for ti, (ordering, table, _) in enumerate(results):
        for k, entry in enumerate(table.entries):
            b = entry.bound if math.isinf(entry.bound) else entry.bound + shift
            rows.append([ti, ordering.label, k + 1, entry.sample_index, float(b)])
    header = ["table", "ordering", "position", "index", "bound"]
    return _emit(run.output, obj, header, rows)


def _subset_ids(args, space) -> list[int]:
    if args.member_ids is not None:
        try:
            ids = [int(t) for t in str(args.member_ids).split(",")]
        except ValueError:
            raise ValueError("--member-ids must be comma-separated integers") from None
        for i in ids:
            if not 0 <= i < space.size:
                raise ValueError(f"member id {i} outside 0..{space.size - 1}")
        return ids
    if args.subset is None:
        raise ValueError("provide --subset or --member-ids")
    shift = space.support.shift
    support_orig = [v + shift for v in space.support.values]
    ids = []
    for part in str(args.subset).split(";"):
        vals = sorted(_parse_reals(part, "--subset entry"))
        if len(vals) != space.n:
            raise ValueError(
                f"subset entry {part!r} must list exactly {space.n} values"
            )
        counts = [0] * space.support.size
        for v in vals:
            hits = [j for j, sv in enumerate(support_orig) if abs(sv - v) <= 1e-9]
            if not hits:
                raise ValueError(f"subset value {v} is not in the support")
            counts[hits[0]] += 1
        ids.append(space.index_of_counts(tuple(counts)))
    return ids


def cmd_contour(args) -> str:
    run, space = _build_run(args, need_alpha=False, default_output="csv")
    ids = _subset_ids(args, space)
    resolution = int(args.resolution)
    poly = build_subset_likelihood(space, ids)
    pts, vals = contour_grid(poly, resolution, cell_cap=run.solver.grid_cell_cap)
    s = space.support.as_array()
    shift = 0.0 if run.raw else space.support.shift
    means = pts @ s + shift
    m = space.support.size
    header = [f"p_{i + 1}" for i in range(m)] + ["likelihood", "mean"]
    rows = [[float(x) for x in pts[i]] + [float(vals[i]), float(means[i])]
            for i in range(pts.shape[0])]
    obj = {
        "resolution": resolution,
        "member_ids": sorted(set(ids)),
        "columns": header,
        "rows": rows,
    }
    return _emit(run.output, obj, header, rows)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--support", help="comma-separated support values")
    common.add_argument("--n", type=int, help="sample size")
    common.add_argument("--config", help="JSON or TOML settings file "
                        "(explicit flags win; solver tolerances under 'solver')")
    common.add_argument("--output", choices=["json", "csv", "table"],
                        help="output format (default json)")
    common.add_argument("--seed", type=int, help="seed for every random stream")
    common.add_argument("--threads", type=int,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")
    common.add_argument("--raw", action="store_true",
                        help="report means in shifted units (least support value at 0) "
                        "instead of original units")

    alpha_arg = argparse.ArgumentParser(add_help=False)
    alpha_arg.add_argument("--alpha", type=float, help="error level in (0,1)")

    order_arg = argparse.ArgumentParser(add_help=False)
    order_arg.add_argument("--order",
                           help="sample order: lex | mean | perm:i,j,... | file:path "
                           "(default mean)")

    parser = argparse.ArgumentParser(
        prog="meanlcb",
        description="Lower confidence bounds for the mean of a distribution "
        "with known finite support.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lattice", parents=[common],
                       help="enumerate the sample space")
    p.set_defaults(handler=cmd_lattice)

    p = sub.add_parser("bound", parents=[common, alpha_arg, order_arg],
                       help="compute a bound table with its admissibility report")
    p.add_argument("--check-oracle", type=int, metavar="D",
                   help="cross-check every entry against the exhaustive grid "
                   "at resolution D (exit 3 on disagreement)")
    p.add_argument("--oracle-tol", type=float, default=2e-3,
                   help="allowed gap for --check-oracle (default 2e-3)")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("verify", parents=[common, alpha_arg, order_arg],
                       help="audit a bound function's coverage promise")
    p.add_argument("--bound-file", help="bound values file ('index value' lines) "
                   "instead of computing a table")
    p.add_argument("--resolution", type=int, default=500,
                   help="grid resolution for the error-probability search")
    p.add_argument("--no-refine", action="store_true",
                   help="skip gradient refinement (grid-only margins)")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("coverage", parents=[common, alpha_arg, order_arg],
                       help="Monte Carlo error rate of a bound under one distribution")
    p.add_argument("--dist", required=True,
                   help="comma-separated probabilities, one per support value")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--bound-file", help="bound values file instead of a table")
    p.set_defaults(handler=cmd_coverage)

    p = sub.add_parser("compare", parents=[common, alpha_arg],
                       help="compare two bound functions")
    p.add_argument("--metric", default="sample_aligned",
                   choices=["sample_aligned", "rank_ordered", "expected_value"])
    p.add_argument("--bound-a", required=True,
                   help="file:path or an order spec (lex | mean | perm:...)")
    p.add_argument("--bound-b", required=True,
                   help="file:path or an order spec (lex | mean | perm:...)")
    p.add_argument("--draws", type=int, default=10_000,
                   help="Monte Carlo draws for expected_value")
    p.add_argument("--concentration", default=None,
                   help="Dirichlet concentration: scalar or comma-separated vector")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("enumerate", parents=[common, alpha_arg],
                       help="list all distinct admissible bound tables")
    p.add_argument("--cap", type=int, default=5040,
                   help="refuse when (N-1)! exceeds this many orderings")
    p.set_defaults(handler=cmd_enumerate)

    p = sub.add_parser("contour", parents=[common],
                       help="emit a barycentric likelihood grid for one sample set")
    p.add_argument("--subset",
                   help="semicolon-separated samples, each a comma-separated "
                   "value list, e.g. '1,1,3;1,3,3;3,3,3'")
    p.add_argument("--member-ids", help="comma-separated sample indices")
    p.add_argument("--resolution", type=int, default=50)
    p.set_defaults(handler=cmd_contour)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.handler(args)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except OracleMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
