"""Estimates of the asymptotic range, the rate of escape and the exit-piece mean.

Standard errors are across replicas by default (replicas are i.i.d.). A
single long run can use batch means instead.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .exits import ExitSummary
from .simulator import ReplicaResult

__all__ = [
    "N_SIGMA",
    "BATCH_COUNT",
    "Estimate",
    "RangeReport",
    "NoCertifiedRecords",
    "batch_means",
    "estimate_range",
    "mean_range_at",
    "estimate_rate_of_escape",
    "estimate_r_tilde",
    "overhead_decay",
    "range_report",
]

N_SIGMA = 3.0
BATCH_COUNT = 32


class NoCertifiedRecords(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n_samples: int
    method: str = "across_replicas"

    def __post_init__(self):
        if self.std_error < 0 or self.n_samples < 1:
            raise ValueError("invalid estimate")

    @classmethod
    def from_samples(cls, x) -> Estimate:
        x = np.asarray(x, dtype=float)
        if len(x) < 2:
            raise ValueError("need at least two samples")
        return cls(float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x))), len(x))

    def within(self, value: float, n_sigma: float = N_SIGMA) -> bool:
        return abs(self.mean - value) <= n_sigma * self.std_error


def batch_means(x, n_batches: int = BATCH_COUNT) -> Estimate:
    """Mean of ``x`` with the standard error from ``n_batches`` contiguous batches."""
    x = np.asarray(x, dtype=float)
    if len(x) < n_batches:
        raise ValueError(f"need at least {n_batches} observations for batch means")
    size = len(x) // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return Estimate(float(x.mean()), float(means.std(ddof=1) / np.sqrt(n_batches)), len(x), "batch_means")


def _ok(replicas: Sequence[ReplicaResult]) -> list[ReplicaResult]:
    good = [r for r in replicas if r.ok]
    if len(good) < 2:
        raise ValueError("need at least two successful replicas")
    return good


def estimate_range(replicas: Sequence[ReplicaResult]) -> Estimate:
    """``R_N / N`` across replicas."""
    good = _ok(replicas)
    n = good[0].n_steps
    if n == 0:
        return Estimate(1.0, 0.0, len(good))
    return Estimate.from_samples([r.final_range / r.n_steps for r in good])


def mean_range_at(replicas: Sequence[ReplicaResult], n: int) -> Estimate:
    """Monte Carlo mean of ``R_n`` (not normalised); needs stored range series."""
    good = _ok(replicas)
    if any(r.range_series is None for r in good):
        raise ValueError("replicas were run without range series")
    return Estimate.from_samples([r.range_series[n] for r in good])


def estimate_rate_of_escape(replicas: Sequence[ReplicaResult]) -> tuple[Estimate, Estimate]:
    """(``||X_N|| / N``, ``k(N) / e_{k(N)}``) across replicas.

    The second uses the largest certified exit of each replica and needs
    replicas run with exit analysis.
    """
    good = _ok(replicas)
    by_length = Estimate.from_samples([r.final_length / r.n_steps for r in good])
    ratios = []
    for r in good:
        s = r.exits
        if s is None:
            raise ValueError("replicas were run without exit analysis")
        k = s.k_of_n
        if k:
            ratios.append(k / s.e[k - 1])
    by_exits = Estimate.from_samples(ratios)
    return by_length, by_exits


def estimate_r_tilde(summaries: Sequence[ExitSummary], include_uncertified: bool = False) -> Estimate:
    """Pooled mean of the exit pieces ``R~_k``.

    With several summaries the standard error is that of a ratio estimator
    over replicas; a single summary falls back to batch means over ``k``.
    """
    pieces = []
    for s in summaries:
        if not s.decomposed:
            raise ValueError("exit summary was not decomposed")
        pieces.append(s.r_tilde[s.certified_slice(include_uncertified)].astype(float))
    counts = np.array([len(p) for p in pieces], dtype=float)
    total = counts.sum()
    if total == 0:
        raise NoCertifiedRecords("no certified exit records")
    sums = np.array([p.sum() for p in pieces])
    mean = float(sums.sum() / total)
    live = counts > 0
    if live.sum() >= 2:
        c, s = counts[live], sums[live]
        n = len(c)
        se = float(np.sqrt(np.sum((s - mean * c) ** 2) / (n * (n - 1))) / c.mean())
        return Estimate(mean, se, int(total))
    pooled = np.concatenate(pieces)
    if len(pooled) >= BATCH_COUNT:
        return batch_means(pooled)
    se = float(pooled.std(ddof=1) / np.sqrt(len(pooled))) if len(pooled) > 1 else 0.0
    return Estimate(mean, se, int(total), "batch_means")


def overhead_decay(summaries: Sequence[ExitSummary], include_uncertified: bool = False) -> float:
    """Mean of ``O_k / k`` over the last decile of certified ``k``, pooled over summaries."""
    vals = []
    for s in summaries:
        if not s.decomposed:
            raise ValueError("exit summary was not decomposed")
        sl = s.certified_slice(include_uncertified)
        oh = s.overhead[sl].astype(float)
        n = len(oh)
        if n < 10:
            continue
        start = n - max(1, n // 10)
        ks = np.arange(start + 1, n + 1)
        vals.append(oh[start:] / ks)
    if not vals:
        raise NoCertifiedRecords("need at least 10 certified records")
    return float(np.concatenate(vals).mean())


@dataclass(frozen=True)
class RangeReport:
    r_hat: Estimate
    ell_hat: Estimate
    ell_exit_hat: Estimate
    r_tilde_hat: Estimate
    product_check: float
    product_std_error: float
    overhead_tail: float

    @property
    def identity_holds(self) -> bool:
        return self.product_check <= N_SIGMA * self.product_std_error

    def to_dict(self) -> dict:
        d = asdict(self)
        d["identity_holds"] = self.identity_holds
        return d


def range_report(replicas: Sequence[ReplicaResult], include_uncertified: bool = False) -> RangeReport:
    """All estimates plus the check ``r = r~ * l``.

    ``product_std_error`` combines the standard errors of ``r_hat``, ``r_tilde_hat``
    and ``ell_hat`` as if independent (first-order error propagation).
    """
    good = _ok(replicas)
    r_hat = estimate_range(good)
    ell_hat, ell_exit = estimate_rate_of_escape(good)
    summaries = [r.exits for r in good]
    rt = estimate_r_tilde(summaries, include_uncertified)
    product = rt.mean * ell_hat.mean
    se = float(
        np.sqrt(r_hat.std_error**2 + (ell_hat.mean * rt.std_error) ** 2 + (rt.mean * ell_hat.std_error) ** 2)
    )
    try:
        tail = overhead_decay(summaries, include_uncertified)
    except NoCertifiedRecords:
        tail = float("nan")
    return RangeReport(r_hat, ell_hat, ell_exit, rt, abs(r_hat.mean - product), se, tail)
