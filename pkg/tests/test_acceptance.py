"""Acceptance criteria 1-9 at their stated sizes and tolerances.

Each test prints one pass/fail line; the lines are repeated in the terminal
summary under "acceptance criteria".
"""
import pytest

import conftest
from oracles import COUNTEREXAMPLE, COUNTEREXAMPLE_EXPECTED_RANGE, HALF, brute_expected_ranges

from fprw.reproduce import (
    REFERENCE_REPLICAS,
    REFERENCE_SEED,
    REFERENCE_STEPS,
    ReplicaCache,
    counterexample_bound,
    determinism,
    exact_oracle_agreement,
    group_case,
    group_formula_contradiction,
    rate_of_escape,
    solver_consistency,
    structural_invariants,
    range_identity,
)
from fprw.scenarios import SCENARIOS
from fprw.simulator import exact_expected_range_series


@pytest.fixture(scope="session")
def cache():
    return ReplicaCache(REFERENCE_STEPS, REFERENCE_REPLICAS, REFERENCE_SEED)


def record(result):
    line = result.line()
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line
    return result


def test_criterion_1_counterexample_bound(cache):
    res = record(counterexample_bound(cache))
    assert res.measured["seconds"] < 60


def test_criterion_2_group_formula_contradiction(cache):
    res = record(group_formula_contradiction(cache))
    assert res.measured["U(o,o)"] == 0.0 and res.measured["prediction"] == 1.0


def test_criterion_3_exact_oracle(counterexample):
    exact = exact_expected_range_series(counterexample, 12)
    assert exact == COUNTEREXAMPLE_EXPECTED_RANGE
    assert exact == brute_expected_ranges(COUNTEREXAMPLE, HALF, 12)
    record(exact_oracle_agreement(replicas=10_000, n=12, seed=REFERENCE_SEED))


def test_criterion_4_rate_of_escape(cache):
    record(rate_of_escape(cache))


def test_criterion_5_range_identity(cache):
    record(range_identity(cache, ("counterexample", "group-z2z3")))


def test_criterion_6_group_case(cache):
    record(group_case(cache))


def test_criterion_7_structural_invariants():
    res = record(structural_invariants(1000, tuple(SCENARIOS), REFERENCE_SEED))
    assert res.measured["trajectories"] == 1000


def test_criterion_8_solver_consistency():
    record(solver_consistency(40))


def test_criterion_9_determinism():
    record(determinism("counterexample"))
