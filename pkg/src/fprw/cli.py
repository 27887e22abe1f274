"""Command-line interface.

Exit codes: 0 success, 1 a model is invalid or a check failed, 2 usage or
input errors (bad flags, unreadable files, unknown names).
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from .estimators import N_SIGMA
from .exits import DEFAULT_MARGIN
from .model import InvalidModel, ModelFileError, ModelSpec, load_model, validate
from .reporting import ArtifactError, dump_json, provenance, to_jsonable, write_manifest
from .scenarios import SCENARIOS, get_scenario
from .simulator import BudgetExceeded, exact_expected_range_series
from .solvers import StateBudgetExceeded, TruncationTooSmall
from .workflow import QUANTITIES, UnknownQuantity, analyze_files, simulate_to_dir, solve_quantities
from .words import CompositionError, EmptyWordError

USAGE_ERROR = 2


class UsageError(Exception):
    pass


def _resolve(model: str) -> tuple[ModelSpec, str]:
    """Scenario names win over file paths."""
    if model in SCENARIOS:
        return get_scenario(model).spec, model
    path = Path(model)
    if not path.exists():
        raise UsageError(f"{model!r} is neither a scenario ({', '.join(SCENARIOS)}) nor an existing file")
    try:
        return load_model(path), str(path)
    except (ModelFileError, OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read model {model}: {exc}") from None


def _print_json(obj) -> None:
    print(json.dumps(to_jsonable(obj), indent=2, sort_keys=True))


def cmd_scenarios(args) -> int:
    for s in SCENARIOS.values():
        print(f"{s.name}\t{s.spec.digest}\t{s.notes}")
    return 0


def cmd_validate(args) -> int:
    spec, _ = _resolve(args.model)
    diags = validate(spec)
    for d in diags:
        print(str(d), file=sys.stderr)
    if diags:
        return 1
    print(f"valid (digest {spec.digest})")
    return 0


def _require_valid(spec: ModelSpec) -> None:
    diags = validate(spec)
    if diags:
        raise InvalidModel(diags)


def cmd_simulate(args) -> int:
    spec, name = _resolve(args.model)
    _require_valid(spec)
    report = simulate_to_dir(
        spec,
        args.steps,
        args.replicas,
        args.seed,
        args.out,
        margin=args.margin,
        include_uncertified=args.include_uncertified,
        write_trajectories=not args.no_trajectories,
        model_name=name,
    )
    _print_estimates(report["estimates"])
    print(f"wrote {args.out}")
    return 0


def _print_estimates(est: dict) -> None:
    rep = est.get("range_report")
    if rep:
        for key in ("r_hat", "ell_hat", "ell_exit_hat", "r_tilde_hat"):
            e = rep[key]
            print(f"{key:13s} {e['mean']:.6f} +- {e['std_error']:.6f}  (n={e['n_samples']})")
        print(f"{'product_check':13s} {rep['product_check']:.3g} (3 se = {N_SIGMA * rep['product_std_error']:.3g})")
        print(f"{'overhead_tail':13s} {rep['overhead_tail']:.3g}")
    else:
        print("not enough data for a full range report")
    print(f"replicas ok: {est['replicas_ok']}, failed: {est['replicas_failed']}")


def cmd_analyze(args) -> int:
    spec, _ = _resolve(args.model)
    _require_valid(spec)
    paths = []
    for p in map(Path, args.inputs):
        if p.is_dir():
            paths.extend(sorted(p.glob("trajectory_*.csv")))
        elif p.exists():
            paths.append(p)
        else:
            raise UsageError(f"no such file or directory: {p}")
    if not paths:
        raise UsageError("no trajectory files found")
    report = analyze_files(
        spec, paths, args.out, margin=args.margin, include_uncertified=args.include_uncertified
    )
    _print_estimates(report["estimates"])
    return 0


def cmd_solve(args) -> int:
    spec, _ = _resolve(args.model)
    _require_valid(spec)
    quantities = [q.strip() for q in args.quantities.split(",") if q.strip()]
    try:
        report = solve_quantities(
            spec, quantities, args.truncation, start=args.start, target=args.target, method=args.method, tol=args.tol
        )
    except UnknownQuantity as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        dump_json(Path(args.out) / "solve.json", report)
        write_manifest(args.out, {"command": "solve", "spec_digest": spec.digest})
    if args.json:
        _print_json(report)
    else:
        _print_solve(report)
    return 0


def _print_solve(report: dict) -> None:
    print(f"truncation {report['truncation']}")
    flat = []
    for q, r in report["results"].items():
        if "value" in r:
            flat.append((q, r))
        else:
            flat.extend(r.items())
    for name, r in flat:
        line = f"{name:12s} {r['value']:.10g}  converged={r['converged']}  method={r['method']}"
        if r.get("residuals"):
            line += "  residuals: " + ", ".join(f"{k}={v:.3g}" for k, v in r["residuals"].items())
        print(line)
        for w in r.get("warnings", []):
            print(f"  warning: {w}")


def cmd_exact_range(args) -> int:
    spec, _ = _resolve(args.model)
    _require_valid(spec)
    series = exact_expected_range_series(spec, args.n, args.budget, exact=not args.float)
    rows = [{"n": k, "E[R_n]": str(v), "value": float(v)} for k, v in enumerate(series)]
    report = {"provenance": provenance(spec), "budget": args.budget, "series": rows}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        dump_json(Path(args.out) / "exact_range.json", report)
        write_manifest(args.out, {"command": "exact-range", "spec_digest": spec.digest})
    for r in rows:
        print(f"{r['n']}\t{r['E[R_n]']}\t{r['value']:.10g}")
    return 0


def cmd_reproduce(args) -> int:
    from .reproduce import reproduce

    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; available: {', '.join(SCENARIOS)}")
    results = reproduce(args.scenario, steps=args.steps, replicas=args.replicas, seed=args.seed)
    for r in results:
        print(r.line())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        spec = get_scenario(args.scenario).spec
        dump_json(
            Path(args.out) / "reproduce.json",
            {
                "provenance": provenance(spec, base_seed=args.seed),
                "scenario": args.scenario,
                "steps": args.steps,
                "replicas": args.replicas,
                "criteria": [
                    {"number": r.number, "title": r.title, "passed": r.passed, "measured": r.measured}
                    for r in results
                ],
            },
        )
        write_manifest(args.out, {"command": "reproduce", "spec_digest": spec.digest})
    return 0 if all(r.passed for r in results) else 1


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fprw", description="Random walks on free products of graphs.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scenarios", help="list built-in scenarios")
    s.set_defaults(func=cmd_scenarios)

    s = sub.add_parser("validate", help="check a model's invariants")
    s.add_argument("model", help="scenario name or JSON model file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="run replicas and write exports and a range report")
    s.add_argument("model")
    s.add_argument("--steps", type=_nonneg, default=100_000)
    s.add_argument("--replicas", type=_positive, default=64)
    s.add_argument("--seed", type=_nonneg, default=42)
    s.add_argument("--out", default="fprw-out")
    s.add_argument("--margin", type=_nonneg, default=DEFAULT_MARGIN)
    s.add_argument("--include-uncertified", action="store_true")
    s.add_argument("--no-trajectories", action="store_true", help="skip per-replica trajectory exports")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="re-run exit analysis on stored trajectory exports")
    s.add_argument("model")
    s.add_argument("inputs", nargs="+", help="trajectory CSV files or directories containing them")
    s.add_argument("--out", default=None)
    s.add_argument("--margin", type=_nonneg, default=DEFAULT_MARGIN)
    s.add_argument("--include-uncertified", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", help="truncated hitting, return and Green values")
    s.add_argument("model")
    s.add_argument("--quantities", default="u00,xi,group-range", help=f"comma list from {','.join(QUANTITIES)}")
    s.add_argument("--truncation", type=_positive, default=40)
    s.add_argument("--start", default=None, help="start word for green/hit")
    s.add_argument("--target", default=None, help="target word for green/hit")
    s.add_argument("--method", choices=("auto", "cone", "enumerate"), default="auto")
    s.add_argument("--tol", type=float, default=None, help="convergence tolerance between successive truncations")
    s.add_argument("--json", action="store_true", help="print the full report as JSON")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("exact-range", help="exact E[R_n] by path enumeration")
    s.add_argument("model")
    s.add_argument("--n", type=_nonneg, default=12)
    s.add_argument("--budget", type=_positive, default=10_000_000)
    s.add_argument("--float", action="store_true", help="floating point instead of exact fractions")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_exact_range)

    s = sub.add_parser("reproduce", help="run a scenario's acceptance recipe")
    s.add_argument("scenario")
    s.add_argument("--steps", type=_positive, default=100_000)
    s.add_argument("--replicas", type=_positive, default=64)
    s.add_argument("--seed", type=_nonneg, default=42)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except UsageError as exc:
        print(f"fprw: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except InvalidModel as exc:
        for d in exc.diagnostics:
            print(str(d), file=sys.stderr)
        return 1
    except (
        ArtifactError,
        BudgetExceeded,
        StateBudgetExceeded,
        TruncationTooSmall,
        CompositionError,
        EmptyWordError,
        ValueError,
    ) as exc:
        print(f"fprw: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
