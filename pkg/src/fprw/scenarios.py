"""Built-in models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Claims, FactorSpec, ModelSpec

__all__ = ["Scenario", "SCENARIOS", "get_scenario", "scenario_names"]


@dataclass(frozen=True)
class Scenario:
    name: str
    spec: ModelSpec
    notes: str
    # quantity -> (value, provenance)
    expected: dict = field(default_factory=dict)


def _counterexample() -> Scenario:
    f1 = FactorSpec(2, 0, np.array([[0.0, 1.0], [0.0, 1.0]]), labels=("o1", "a"))
    f2 = FactorSpec(3, 0, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]), labels=("o2", "b", "c"))
    spec = ModelSpec(f1, f2, 0.5, Claims(transient=True, green_radius_gt_one=True))
    return Scenario(
        "counterexample",
        spec,
        "p1(o1,a)=p1(a,a)=1, p2(o2,b)=p2(b,c)=p2(c,b)=1, alpha=1/2. No step ever reaches a factor root, "
        "so U(o,o)=0 and the group-case formula predicts range 1, while E[R_3n]/3n <= 1 - 1/24.",
        {
            "U(o,o)": (0.0, "published"),
            "group_case_range": (1.0, "published"),
            "range_upper_bound": (1.0 - 1.0 / 24.0, "published"),
            "rate_of_escape": (0.5, "derived"),
        },
    )


def _group_z2z3() -> Scenario:
    f1 = FactorSpec(2, 0, np.array([[0.0, 1.0], [1.0, 0.0]]), labels=("o1", "a"))
    f2 = FactorSpec(3, 0, np.full((3, 3), 0.5) - 0.5 * np.eye(3), labels=("o2", "b", "c"))
    spec = ModelSpec(f1, f2, 0.5, Claims(transient=True, green_radius_gt_one=True))
    return Scenario(
        "group-z2z3",
        spec,
        "Group-invariant walk on Z2*Z3: p1(o1,a)=p1(a,o1)=1, p2(x,y)=1/2 for y!=x, alpha=1/2. "
        "The group-case formula r = 1 - U(o,o) applies.",
    )


def _example1() -> Scenario:
    f1 = FactorSpec(2, 0, np.array([[0.0, 1.0], [1.0, 0.0]]), labels=("o1", "a"))
    f2 = FactorSpec(3, 0, np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0]]), labels=("o2", "b", "c"))
    spec = ModelSpec(f1, f2, 0.5)
    return Scenario(
        "example1",
        spec,
        "Edges o1<->a and o2->b, b<->c, c->o2. The edge structure is fixed; probabilities are uniform "
        "over out-edges (a modelling choice) and alpha=1/2.",
    )


SCENARIOS: dict[str, Scenario] = {s.name: s for s in (_example1(), _counterexample(), _group_z2z3())}


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(SCENARIOS)}") from None
