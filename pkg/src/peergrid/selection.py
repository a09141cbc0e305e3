"""Choosing which m users receive peer-comparison treatment at a fixed price.

A treated user feels the peer term with its own gamma; an untreated user
does not. Treating the set D is therefore the same as solving the original
game with gamma replaced by ``delta * gamma``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .equilibrium import check_assumption_1, entity_profit, nash_closed_form
from .errors import InvalidSize, TooLarge, UndefinedMetric
from .model import ModelInstance

DEFAULT_CAP = 10**7
MAX_ENUMERATION_N = 25
TIE_RTOL = 1e-12
BATCH = 4096


@dataclass(frozen=True)
class TreatmentAssignment:
    flags: tuple[int, ...]

    def __post_init__(self):
        flags = tuple(int(f) for f in self.flags)
        if any(f not in (0, 1) for f in flags):
            raise ValueError("treatment flags must be 0 or 1")
        object.__setattr__(self, "flags", flags)

    @classmethod
    def from_indices(cls, n: int, indices) -> "TreatmentAssignment":
        flags = [0] * n
        for i in indices:
            flags[int(i)] = 1
        return cls(tuple(flags))

    @property
    def n(self) -> int:
        return len(self.flags)

    @property
    def m(self) -> int:
        return sum(self.flags)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.flags) if f)

    @property
    def delta(self) -> np.ndarray:
        return np.array(self.flags, dtype=float)


@dataclass(frozen=True)
class SelectionOutcome:
    assignment: TreatmentAssignment
    consumption: np.ndarray
    profit: float
    baseline_profit: float


def treated_instance(instance: ModelInstance, assignment: TreatmentAssignment) -> ModelInstance:
    if assignment.n != instance.n:
        raise InvalidSize(f"assignment has {assignment.n} flags, instance has {instance.n} users")
    return instance.with_gamma(assignment.delta * instance.gamma)


def consumption_under_treatment(instance: ModelInstance, price: float, assignment: TreatmentAssignment) -> np.ndarray:
    check_assumption_1(instance, price)
    return nash_closed_form(treated_instance(instance, assignment), price)


def untreated_consumption(instance: ModelInstance, price: float) -> np.ndarray:
    return (instance.a - price) / (2.0 * instance.b)


def baseline_profit(instance: ModelInstance, price: float) -> float:
    return entity_profit(untreated_consumption(instance, price), price, instance.c)


def _candidates(n: int, m: int) -> np.ndarray:
    combos = list(itertools.combinations(range(n), m))
    flags = np.zeros((len(combos), n))
    if m:
        flags[np.repeat(np.arange(len(combos)), m), np.array(combos).ravel()] = 1.0
    return flags


def evaluate_assignments(instance: ModelInstance, price: float, flags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Consumption and profit for a stack of 0/1 flag rows, solved in batches."""
    flags = np.atleast_2d(np.asarray(flags, dtype=float))
    alpha = instance.a - price
    base = np.diag(2.0 * instance.b)
    peer = instance.gamma[:, None] * (2.0 * np.eye(instance.n) - instance.W)
    xs = np.empty_like(flags)
    for start in range(0, len(flags), BATCH):
        block = flags[start : start + BATCH]
        xs[start : start + BATCH] = linalg.solve_batch(base[None] + block[:, :, None] * peer[None], alpha)
    # Row-wise sum (not a matrix product) so a profile's profit does not depend on the batch it sits in.
    profits = np.sum(price * xs - instance.c * xs**2, axis=1)
    return xs, profits


def _first_max(profits: np.ndarray) -> int:
    # First candidate within a relative hair of the maximum, so exact
    # symmetries resolve to the lowest indices despite rounding.
    top = profits.max()
    return int(np.flatnonzero(profits >= top - TIE_RTOL * max(1.0, abs(top)))[0])


def _guard(n: int, m: int, cap: int) -> None:
    if not 0 <= m <= n:
        raise InvalidSize(f"m={m} must lie in [0, {n}]")
    if n > MAX_ENUMERATION_N:
        raise TooLarge(f"exhaustive enumeration is limited to n <= {MAX_ENUMERATION_N}, got {n}")
    count = math.comb(n, m)
    if count > cap:
        raise TooLarge(f"C({n},{m}) = {count} candidates exceeds the cap {cap}")


def exact_selection(instance: ModelInstance, price: float, m: int, cap: int = DEFAULT_CAP) -> SelectionOutcome:
    """Best m-subset by exhaustive enumeration.

    Candidates are visited in ``itertools.combinations`` order, so ties go to
    the lexicographically smallest tuple of treated indices.
    """
    n = instance.n
    _guard(n, m, cap)
    check_assumption_1(instance, price)
    flags = _candidates(n, m)
    xs, profits = evaluate_assignments(instance, price, flags)
    k = _first_max(profits)
    return SelectionOutcome(TreatmentAssignment(flags[k]), xs[k], float(profits[k]), baseline_profit(instance, price))


def exact_selection_sweep(instance: ModelInstance, price: float, m_values, cap: int = DEFAULT_CAP) -> list[SelectionOutcome]:
    """:func:`exact_selection` for several m at once, sharing one batched solve."""
    n = instance.n
    m_values = [int(m) for m in m_values]
    for m in m_values:
        _guard(n, m, cap)
    check_assumption_1(instance, price)
    blocks = [_candidates(n, m) for m in m_values]
    xs, profits = evaluate_assignments(instance, price, np.concatenate(blocks))
    base = baseline_profit(instance, price)
    out, start = [], 0
    for flags in blocks:
        stop = start + len(flags)
        k = start + _first_max(profits[start:stop])
        out.append(SelectionOutcome(TreatmentAssignment(flags[k - start]), xs[k], float(profits[k]), base))
        start = stop
    return out


def heuristic_order(instance: ModelInstance, price: float, expected_consumption: float) -> np.ndarray:
    """Users sorted by |E[x] - (a_i - p)/(2 b_i)|, largest first, ties to the lower index."""
    dev = np.abs(expected_consumption - untreated_consumption(instance, price))
    return np.argsort(-dev, kind="stable")


def heuristic_selection(instance: ModelInstance, price: float, m: int, expected_consumption: float) -> SelectionOutcome:
    """Treat the m users whose no-peer consumption is farthest from the population mean."""
    n = instance.n
    if not 0 <= m <= n:
        raise InvalidSize(f"m={m} must lie in [0, {n}]")
    check_assumption_1(instance, price)
    chosen = heuristic_order(instance, price, expected_consumption)[:m]
    assignment = TreatmentAssignment.from_indices(n, chosen)
    xs, profits = evaluate_assignments(instance, price, assignment.delta)
    return SelectionOutcome(assignment, xs[0], float(profits[0]), baseline_profit(instance, price))


def performance_metric(heuristic_profit: float, exact_profit: float, baseline_profit: float) -> float:
    """Share (in percent) of the best achievable profit gain that the heuristic captures."""
    denom = exact_profit - baseline_profit
    if abs(denom) < 1e-12:
        raise UndefinedMetric("exact selection does not improve on the baseline")
    return 100.0 * (heuristic_profit - baseline_profit) / denom
