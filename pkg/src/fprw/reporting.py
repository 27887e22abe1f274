"""File artifacts: trajectory and exit CSVs, JSON reports and the output manifest.

Reports carry no timestamps or timings, so identical inputs give identical
bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .exits import ExitSummary
from .model import ModelSpec, model_to_dict
from .simulator import GENERATOR_NAME, Trajectory, replay

__all__ = [
    "TRAJECTORY_HEADER",
    "EXITS_HEADER",
    "ArtifactError",
    "tool_version",
    "provenance",
    "to_jsonable",
    "dump_json",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_exits_csv",
    "read_exits_csv",
    "file_digest",
    "write_manifest",
]

TRAJECTORY_HEADER = ["n", "factor", "target", "word_len", "range"]
EXITS_HEADER = ["k", "e_k", "w_factor", "w_vertex", "psi_size", "r_tilde", "overhead", "certified"]


class ArtifactError(ValueError):
    pass


def tool_version() -> str:
    from . import __version__

    return __version__


def provenance(spec: ModelSpec, **extra) -> dict:
    return {
        "tool": "fprw",
        "version": tool_version(),
        "generator": GENERATOR_NAME,
        "spec_digest": spec.digest,
        **extra,
    }


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become ``null``."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dump_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def _comment(spec: ModelSpec, seed) -> str:
    return f"# spec_digest={spec.digest} seed={'' if seed is None else seed} generator={GENERATOR_NAME}"


def write_trajectory_csv(path: str | Path, traj: Trajectory) -> Path:
    """One row per step ``n >= 1``; ``word_len`` and ``range`` are after the step."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(_comment(traj.spec, traj.seed) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        n = np.arange(1, traj.n_steps + 1)
        w.writerows(
            zip(
                n.tolist(),
                traj.factors.tolist(),
                traj.targets.tolist(),
                traj.lengths[1:].tolist(),
                traj.ranges[1:].tolist(),
            )
        )
    return path


def _read_comment(fh) -> dict:
    first = fh.readline()
    if not first.startswith("#"):
        raise ArtifactError("missing provenance comment line")
    fields = {}
    for part in first[1:].split():
        key, _, value = part.partition("=")
        fields[key] = value
    return fields


def read_trajectory_csv(path: str | Path, spec: ModelSpec) -> Trajectory:
    """Load and replay a trajectory export; the spec digest and stored columns must match."""
    path = Path(path)
    with path.open(newline="") as fh:
        meta = _read_comment(fh)
        if meta.get("spec_digest") != spec.digest:
            raise ArtifactError(f"{path}: spec digest {meta.get('spec_digest')} does not match {spec.digest}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise ArtifactError(f"{path}: unexpected header {header}")
        rows = np.array([[int(x) for x in row] for row in reader], dtype=np.int64).reshape(-1, 5)
    if not np.array_equal(rows[:, 0], np.arange(1, len(rows) + 1)):
        raise ArtifactError(f"{path}: step numbers are not 1..{len(rows)}")
    seed = int(meta["seed"]) if meta.get("seed") else None
    try:
        traj = replay(spec, rows[:, 1], rows[:, 2], seed)
    except ValueError as exc:
        raise ArtifactError(f"{path}: {exc}") from None
    if not (np.array_equal(traj.lengths[1:], rows[:, 3]) and np.array_equal(traj.ranges[1:], rows[:, 4])):
        raise ArtifactError(f"{path}: word_len/range columns disagree with the replayed steps")
    return traj


def write_exits_csv(path: str | Path, summary: ExitSummary, spec: ModelSpec, seed=None) -> Path:
    path = Path(path)
    L = len(summary.e)
    if summary.decomposed:
        psi, rt, oh = summary.psi_size.tolist(), summary.r_tilde.tolist(), summary.overhead.tolist()
    else:
        psi = rt = oh = [""] * L
    with path.open("w", newline="") as fh:
        fh.write(_comment(spec, seed) + f" margin={summary.margin} n_steps={summary.n_steps}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EXITS_HEADER)
        w.writerows(
            zip(
                range(1, L + 1),
                summary.e.tolist(),
                summary.w_factor.tolist(),
                summary.w_vertex.tolist(),
                psi,
                rt,
                oh,
                summary.certified.astype(int).tolist(),
            )
        )
    return path


def read_exits_csv(path: str | Path) -> ExitSummary:
    path = Path(path)
    with path.open(newline="") as fh:
        meta = _read_comment(fh)
        reader = csv.reader(fh)
        if next(reader, None) != EXITS_HEADER:
            raise ArtifactError(f"{path}: unexpected header")
        rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * len(EXITS_HEADER)

    def ints(i):
        return np.array([int(x) for x in cols[i]], dtype=np.int64)

    decomposed = not rows or rows[0][4] != ""
    return ExitSummary(
        n_steps=int(meta["n_steps"]),
        final_length=len(rows),
        margin=int(meta["margin"]),
        e=ints(1),
        w_factor=ints(2),
        w_vertex=ints(3),
        certified=ints(7).astype(bool),
        psi_size=ints(4) if decomposed else None,
        r_tilde=ints(5) if decomposed else None,
        overhead=ints(6) if decomposed else None,
    )


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str | Path, extra: dict | None = None) -> Path:
    """``manifest.json`` listing every other file under ``out_dir`` with its sha256."""
    out_dir = Path(out_dir)
    files = sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name != "manifest.json")
    artifacts = [
        {"path": p.relative_to(out_dir).as_posix(), "sha256": file_digest(p), "bytes": p.stat().st_size}
        for p in files
    ]
    return dump_json(out_dir / "manifest.json", {**(extra or {}), "artifacts": artifacts})
