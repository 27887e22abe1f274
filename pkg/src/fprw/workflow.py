"""End-to-end pipelines behind the command line: simulate, analyze, solve."""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .estimators import (
    NoCertifiedRecords,
    estimate_r_tilde,
    estimate_range,
    estimate_rate_of_escape,
    overhead_decay,
    range_report,
)
from .exits import DEFAULT_MARGIN, exit_times
from .model import ModelSpec, model_to_dict
from .reporting import (
    dump_json,
    provenance,
    read_trajectory_csv,
    write_exits_csv,
    write_manifest,
    write_trajectory_csv,
)
from .simulator import (
    DEFAULT_MAX_VISITED,
    ReplicaResult,
    TransienceWarning,
    run,
    split_seed,
    worker_count,
)
from .solvers import first_return, group_case_range, hitting_probability, truncated_green, xi
from .words import EMPTY

__all__ = ["QUANTITIES", "UnknownQuantity", "summarize", "simulate_to_dir", "analyze_files", "solve_quantities"]

QUANTITIES = ("u00", "xi", "group-range", "green", "hit")
SOLVER_CROSS_CHECK_TRUNCATION = 40


class UnknownQuantity(ValueError):
    pass


def _replica_files(args) -> ReplicaResult:
    spec, steps, index, seed, margin, out, write_traj, max_visited = args
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TransienceWarning)
            traj = run(spec, steps, seed, max_visited=max_visited)
    except MemoryError as exc:
        return ReplicaResult(index=index, seed=seed, n_steps=steps, error=f"{type(exc).__name__}: {exc}")
    summary = exit_times(traj, margin=margin)
    if out is not None:
        if write_traj:
            write_trajectory_csv(Path(out) / f"trajectory_{index:04d}.csv", traj)
        write_exits_csv(Path(out) / f"exits_{index:04d}.csv", summary, spec, seed)
    return ReplicaResult(
        index=index,
        seed=seed,
        n_steps=steps,
        final_length=int(traj.lengths[-1]),
        final_range=int(traj.ranges[-1]),
        returns_to_origin=traj.returns_to_origin,
        exits=summary,
    )


def _attempt(fn, *args):
    try:
        return fn(*args)
    except (ValueError, ZeroDivisionError):
        return None


def summarize(spec: ModelSpec, results: list[ReplicaResult], include_uncertified: bool = False) -> dict:
    """Estimates from replica results; any estimate the data cannot support is ``null``."""
    ok = [r for r in results if r.ok]
    out: dict = {"replicas_ok": len(ok), "replicas_failed": len(results) - len(ok)}
    if len(ok) >= 2 and ok[0].n_steps > 0:
        try:
            out["range_report"] = range_report(ok, include_uncertified).to_dict()
        except (ValueError, NoCertifiedRecords):
            out["range_report"] = None
    else:
        out["range_report"] = None
    if out["range_report"] is None:
        # partial estimates
        out["r_hat"] = _attempt(estimate_range, ok)
        pair = _attempt(estimate_rate_of_escape, ok)
        out["ell_hat"], out["ell_exit_hat"] = pair if pair else (None, None)
        summaries = [r.exits for r in ok if r.exits is not None]
        out["r_tilde_hat"] = _attempt(estimate_r_tilde, summaries, include_uncertified)
        out["overhead_tail"] = _attempt(overhead_decay, summaries, include_uncertified)
    out["per_replica"] = [
        {
            "index": r.index,
            "seed": r.seed,
            "final_range": r.final_range,
            "final_length": r.final_length,
            "returns_to_origin": r.returns_to_origin,
            "k_of_n": r.exits.k_of_n if r.exits is not None else None,
            "exit_records": len(r.exits.e) if r.exits is not None else None,
            "error": r.error,
        }
        for r in results
    ]
    return out


def _cross_reference(spec: ModelSpec) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TransienceWarning)
        g = group_case_range(spec, SOLVER_CROSS_CHECK_TRUNCATION)
    return {
        "truncation": SOLVER_CROSS_CHECK_TRUNCATION,
        "U(o,o)": g.details["U(o,o)"],
        "group_case_range": g.value,
        "converged": g.converged,
    }


def simulate_to_dir(
    spec: ModelSpec,
    steps: int,
    replicas: int,
    seed: int,
    out: str | Path | None,
    *,
    margin: int = DEFAULT_MARGIN,
    include_uncertified: bool = False,
    write_trajectories: bool = True,
    workers: int | None = None,
    max_visited: int = DEFAULT_MAX_VISITED,
    model_name: str | None = None,
) -> dict:
    """Run replicas, export their trajectories and exit records under ``out``, and write ``report.json``."""
    spec.require_valid()
    if steps < 0 or replicas < 1:
        raise ValueError("steps must be >= 0 and replicas >= 1")
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
    tasks = [
        (spec, steps, r, split_seed(seed, r), margin, None if out is None else str(out), write_trajectories, max_visited)
        for r in range(replicas)
    ]
    workers = min(worker_count() if workers is None else workers, replicas)
    if workers <= 1 or steps * replicas < 200_000:
        results = [_replica_files(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replica_files, tasks))
    report = {
        "provenance": provenance(spec, base_seed=seed, seeds=[r.seed for r in results]),
        "model_name": model_name,
        "model": model_to_dict(spec),
        "steps": steps,
        "replicas": replicas,
        "margin": margin,
        "include_uncertified": include_uncertified,
        "R_0": 1,
        "estimates": summarize(spec, results, include_uncertified),
        "solver_cross_reference": _cross_reference(spec),
    }
    if out is not None:
        dump_json(Path(out) / "report.json", report)
        write_manifest(out, {"command": "simulate", "spec_digest": spec.digest})
    return report


def analyze_files(
    spec: ModelSpec,
    paths,
    out: str | Path | None,
    *,
    margin: int = DEFAULT_MARGIN,
    include_uncertified: bool = False,
) -> dict:
    """Re-run exit analysis on stored trajectory exports."""
    paths = sorted(Path(p) for p in paths)
    if not paths:
        raise ValueError("no trajectory files given")
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
    results = []
    for i, p in enumerate(paths):
        traj = read_trajectory_csv(p, spec)
        summary = exit_times(traj, margin=margin)
        if out is not None:
            write_exits_csv(Path(out) / f"exits_{p.stem}.csv", summary, spec, traj.seed)
        results.append(
            ReplicaResult(
                index=i,
                seed=traj.seed,
                n_steps=traj.n_steps,
                final_length=int(traj.lengths[-1]),
                final_range=int(traj.ranges[-1]),
                returns_to_origin=traj.returns_to_origin,
                exits=summary,
            )
        )
    steps = {r.n_steps for r in results}
    report = {
        "provenance": provenance(spec, seeds=[r.seed for r in results]),
        "inputs": [p.name for p in paths],
        "steps": sorted(steps),
        "margin": margin,
        "include_uncertified": include_uncertified,
        "estimates": summarize(spec, results, include_uncertified),
    }
    if out is not None:
        dump_json(Path(out) / "analysis.json", report)
        write_manifest(out, {"command": "analyze", "spec_digest": spec.digest})
    return report


def solve_quantities(
    spec: ModelSpec,
    quantities,
    truncation: int,
    *,
    start: str | None = None,
    target: str | None = None,
    method: str = "auto",
    tol: float | None = None,
) -> dict:
    """Solver results keyed by quantity name.

    ``green`` uses ``start``/``target`` (default ``o``); ``hit`` needs both.
    """
    spec.require_valid()
    quantities = list(quantities)
    bad = [q for q in quantities if q not in QUANTITIES]
    if bad:
        raise UnknownQuantity(f"unknown quantity {', '.join(bad)}; choose from {', '.join(QUANTITIES)}")
    x = spec.parse_word(start) if start else EMPTY
    y = spec.parse_word(target) if target else EMPTY
    opts = {"method": method} if tol is None else {"method": method, "tol": tol}
    results = {}
    for q in quantities:
        if q == "u00":
            results[q] = first_return(spec, EMPTY, truncation, **opts).to_dict()
        elif q == "xi":
            results[q] = {f"xi_{i}": xi(spec, i, truncation, **opts).to_dict() for i in (1, 2)}
        elif q == "group-range":
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", TransienceWarning)
                d = group_case_range(spec, truncation, **opts).to_dict()
            d["warnings"] = [str(w.message) for w in caught if issubclass(w.category, TransienceWarning)]
            results[q] = d
        elif q == "green":
            results[q] = truncated_green(spec, x, y, truncation, **opts).to_dict()
        elif q == "hit":
            if not (start and target):
                raise ValueError("quantity 'hit' needs --start and --target")
            results[q] = hitting_probability(spec, x, y, truncation, **opts).to_dict()
    return {"provenance": provenance(spec), "truncation": truncation, "results": results}
