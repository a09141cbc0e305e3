import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_instance
from oracles import enumerate_selection, profit
from peergrid.equilibrium import entity_profit, nash_closed_form, nash_fixed_point
from peergrid.errors import AssumptionViolated, InvalidSize, TooLarge, UndefinedMetric
from peergrid.model import ModelInstance, build_topology
from peergrid.selection import (
    TreatmentAssignment,
    consumption_under_treatment,
    evaluate_assignments,
    exact_selection,
    exact_selection_sweep,
    heuristic_selection,
    performance_metric,
    treated_instance,
)

P = 7.5


def test_assignment_type():
    t = TreatmentAssignment.from_indices(4, [3, 1])
    assert t.flags == (0, 1, 0, 1) and t.m == 2 and t.indices == (1, 3)
    with pytest.raises(ValueError):
        TreatmentAssignment((0, 2))


def test_consumption_examples(i2):
    np.testing.assert_allclose(consumption_under_treatment(i2, P, TreatmentAssignment((0, 0))), 1.25, atol=1e-12)
    np.testing.assert_allclose(consumption_under_treatment(i2, P, TreatmentAssignment((1, 1))), nash_closed_form(i2, P), atol=1e-12)
    # x1 = (2.5 + 0.5 * 1.25) / 3
    x = consumption_under_treatment(i2, P, TreatmentAssignment((1, 0)))
    np.testing.assert_allclose(x, [25 / 24, 1.25], atol=1e-12)


def test_consumption_assumption(i2):
    with pytest.raises(AssumptionViolated):
        consumption_under_treatment(i2, 10.0, TreatmentAssignment((1, 0)))


def test_exact_examples(i2):
    m0 = exact_selection(i2, P, 0)
    assert m0.profit == pytest.approx(12.5, abs=1e-12) and m0.assignment.m == 0
    m1 = exact_selection(i2, P, 1)
    expected = profit([25 / 24, 1.25], P, 2.0)
    assert expected == pytest.approx(11.892361111111, abs=1e-9)
    assert m1.profit == pytest.approx(expected, abs=1e-12)
    assert m1.assignment.indices == (0,)
    m2 = exact_selection(i2, P, 2)
    assert m2.profit == pytest.approx(entity_profit(nash_closed_form(i2, P), P, i2.c), abs=1e-12)
    assert m1.baseline_profit == pytest.approx(12.5)


def test_exact_guards(i2):
    with pytest.raises(InvalidSize):
        exact_selection(i2, P, 3)
    big = ModelInstance.build(build_topology("ring", 20), 10, 1, 0.05, 2)
    with pytest.raises(TooLarge):
        exact_selection(big, P, 10, cap=1000)
    huge = ModelInstance.build(build_topology("ring", 26), 10, 1, 0.05, 2)
    with pytest.raises(TooLarge):
        exact_selection(huge, P, 1)


def test_heuristic_examples():
    # b = 1, c irrelevant; a chosen so x~ = (a - p)/2 = (2.25, 1.25, 0.25)
    inst = ModelInstance.build(build_topology("ring", 3), [12, 10, 8], 1, 0.05, 2)
    assert heuristic_selection(inst, P, 2, 1.25).assignment.indices == (0, 2)
    assert heuristic_selection(inst, P, 1, 1.25).assignment.indices == (0,)
    h0 = heuristic_selection(inst, P, 0, 1.25)
    assert h0.assignment.m == 0 and h0.profit == pytest.approx(h0.baseline_profit)


def test_performance_metric_examples():
    assert performance_metric(13.0, 13.0, 12.5) == 100.0
    assert performance_metric(12.5, 13.0, 12.5) == 0.0
    assert performance_metric(12.875, 13.0, 12.5) == pytest.approx(75.0)
    with pytest.raises(UndefinedMetric):
        performance_metric(12.5, 12.5, 12.5)


def test_outcome_profit_recomputable():
    rng = np.random.default_rng(4)
    inst = random_instance(rng, 8, gamma_max=0.2)
    for m in range(9):
        o = exact_selection(inst, P, m)
        assert o.profit == pytest.approx(entity_profit(o.consumption, P, inst.c), abs=1e-9)


def test_sweep_matches_single_calls():
    rng = np.random.default_rng(8)
    inst = random_instance(rng, 7, gamma_max=0.3)
    sweep = exact_selection_sweep(inst, P, range(8))
    for m, o in enumerate(sweep):
        single = exact_selection(inst, P, m)
        assert o.assignment == single.assignment
        assert o.profit == single.profit


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 7))
def test_dominance_and_untreated_consistency(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, gamma_max=0.3)
    free = (inst.a - P) / (2 * inst.b)
    for m in range(n + 1):
        flags = np.array([TreatmentAssignment.from_indices(n, c).flags for c in itertools.combinations(range(n), m)], float)
        xs, profits = evaluate_assignments(inst, P, flags)
        untreated = flags == 0
        np.testing.assert_allclose(xs[untreated], np.broadcast_to(free, xs.shape)[untreated], atol=1e-12)
        e = exact_selection(inst, P, m)
        h = heuristic_selection(inst, P, m, 1.25)
        assert e.profit >= h.profit - 1e-12
        assert h.profit >= profits.min() - 1e-12


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_exact_matches_fixed_point_enumeration(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, gamma_max=0.3)
    m = int(rng.integers(n + 1))
    combo, val, _ = enumerate_selection(inst.W, inst.a, inst.b, inst.gamma, inst.c, P, m)
    e = exact_selection(inst, P, m)
    assert e.profit == pytest.approx(val, abs=1e-9)
    assert e.assignment.indices == combo


@pytest.mark.parametrize("kind", ["fully_connected", "star", "ring"])
def test_treating_identical_users_lowers_total(kind):
    inst = ModelInstance.build(build_topology(kind, 6), 10, 1, 0.5, 2)
    base = ((10 - P) / 2) * 6
    for m in range(7):
        for combo in itertools.combinations(range(6), m):
            x = consumption_under_treatment(inst, P, TreatmentAssignment.from_indices(6, combo))
            assert x.sum() <= base + 1e-12


def test_treated_instance_uses_fixed_point_oracle(i2):
    t = TreatmentAssignment((1, 0))
    np.testing.assert_allclose(nash_fixed_point(treated_instance(i2, t), P), [25 / 24, 1.25], atol=1e-9)
