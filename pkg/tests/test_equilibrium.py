from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_instance
from oracles import equilibrium_fr, iterate_best_response
from peergrid.equilibrium import (
    best_response,
    check_assumption_1,
    entity_profit,
    evaluate,
    nash_closed_form,
    nash_fixed_point,
    probe_uniqueness,
    social_welfare,
    user_utility,
)
from peergrid.errors import AssumptionViolated, NoConvergence
from peergrid.model import ModelInstance, build_topology


def test_best_response_examples(swap, i2):
    assert best_response(0, [0, 5], 2.0, ModelInstance.build(swap, 10, 1, 0, 0)) == pytest.approx(4.0)
    assert best_response(0, [0, 3.2], 2.0, i2) == pytest.approx(3.2)
    assert best_response(0, [0, 0], 2.0, i2) == pytest.approx(8 / 3)


def test_best_response_assumption(i2, swap):
    with pytest.raises(AssumptionViolated):
        best_response(0, [0, 0], 10.0, i2)
    with pytest.raises(AssumptionViolated):
        best_response(1, [0, 0], 2.0, ModelInstance.build(swap, 10, 1, 1.0, 0))


def test_closed_form_i2_exact(i2):
    oracle = equilibrium_fr([[0, 1], [1, 0]], [10, 10], [1, 1], [Fraction(1, 2)] * 2, [2, 2])
    assert oracle == [Fraction(16, 5)] * 2
    np.testing.assert_allclose(nash_closed_form(i2, 2.0), [3.2, 3.2], atol=1e-12)


def test_closed_form_no_peer(swap):
    inst = ModelInstance.build(swap, [10, 9], [1, 2], 0, 0)
    np.testing.assert_allclose(nash_closed_form(inst, [2, 1]), [4.0, 2.0])


@pytest.mark.parametrize("kind", ["fully_connected", "star", "ring"])
def test_identical_users_any_topology(kind):
    inst = ModelInstance.build(build_topology(kind, 5), 10, 1, 0.5, 2)
    np.testing.assert_allclose(nash_closed_form(inst, 2.0), 3.2, atol=1e-12)


def test_fixed_point_examples(i2, swap):
    x, sweeps = nash_fixed_point(ModelInstance.build(swap, 10, 1, 0, 0), 2.0, full_output=True)
    assert sweeps == 2 and np.allclose(x, 4.0)  # first sweep lands, second confirms
    np.testing.assert_allclose(nash_fixed_point(i2, 2.0, tol=1e-10), [3.2, 3.2], atol=1e-9)
    with pytest.raises(NoConvergence):
        nash_fixed_point(i2, 2.0, max_iter=0)


def test_assumption_violation_reports_index(i2):
    with pytest.raises(AssumptionViolated) as info:
        check_assumption_1(i2, [2.0, 10.0])
    assert info.value.index == 1


def test_user_utility_examples(i2):
    assert user_utility(0, [0.0, 3.0], 2.0, i2) == 0.0
    # 32 - 10.24 - 6.4
    assert user_utility(0, [3.2, 3.2], 2.0, i2) == pytest.approx(15.36, abs=1e-12)
    inst = ModelInstance.build(build_topology("ring", 4), 10, 1, 0.5, 0)
    x = np.array([1.0, 2.0, 3.0, 2.0])  # user 2's neighbours average 2
    g0 = ModelInstance.build(build_topology("ring", 4), 10, 1, 0.0, 0)
    assert user_utility(1, x, 2.0, inst) == pytest.approx(user_utility(1, x, 2.0, g0))


def test_profit_examples(swap):
    assert entity_profit(np.zeros(2), 7.5, [2, 2]) == 0.0
    assert entity_profit([1.25, 1.25], 7.5, [2, 2]) == pytest.approx(12.5, abs=1e-12)
    assert entity_profit([10 / 9, 10 / 9], 65 / 9, [2, 2]) == pytest.approx(100 / 9, abs=1e-12)


def test_welfare_examples(i2):
    assert social_welfare(np.zeros(2), i2) == 0.0
    assert social_welfare([5 / 3, 5 / 3], i2) == pytest.approx(50 / 3, abs=1e-12)
    assert social_welfare([10 / 9, 10 / 9], i2) == pytest.approx(1200 / 81, abs=1e-12)


def test_evaluate_bundle(i2):
    out = evaluate(i2, 2.0)
    assert out.profit == pytest.approx(entity_profit(out.consumption, out.prices, i2.c), abs=1e-9)
    np.testing.assert_allclose(out.user_utilities, 15.36)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10))
def test_fixed_point_matches_closed_form(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n)
    p = rng.uniform(0, 7.9, n)
    x = nash_closed_form(inst, p)
    np.testing.assert_allclose(nash_fixed_point(inst, p), x, atol=1e-9)
    assert np.all(x > 0)
    for i in range(n):
        assert abs(x[i] - best_response(i, x, p[i], inst)) < 1e-9


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_closed_form_matches_gauss_seidel_oracle(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n)
    p = np.full(n, 5.0)
    oracle = iterate_best_response(inst.W, inst.a, inst.b, inst.gamma, p)
    np.testing.assert_allclose(nash_closed_form(inst, p), oracle, atol=1e-10)


def test_uniqueness_probe():
    rng = np.random.default_rng(11)
    for _ in range(20):
        inst = random_instance(rng, int(rng.integers(2, 11)))
        assert probe_uniqueness(inst, 4.0, rng, starts=10).unique
