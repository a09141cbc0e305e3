"""Second-stage consumption game: best responses and the Nash equilibrium.

Consumption profiles and price vectors are plain 1-d float arrays. A scalar
price is broadcast to every user.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import AssumptionViolated, NoConvergence
from .model import CostProfile, ModelInstance

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
UNIQUENESS_TOL = 1e-8


def price_vector(instance: ModelInstance, prices) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    if p.ndim == 0:
        return np.full(instance.n, float(p))
    if p.shape != (instance.n,):
        raise ValueError(f"expected {instance.n} prices, got shape {p.shape}")
    return p


def check_assumption_1(instance: ModelInstance, prices) -> np.ndarray:
    """Return the price vector, raising AssumptionViolated for the first offending user."""
    p = price_vector(instance, prices)
    bad = np.flatnonzero(instance.a <= p)
    if bad.size:
        i = int(bad[0])
        raise AssumptionViolated(f"user {i + 1}: a={instance.a[i]:.12g} <= p={p[i]:.12g}", i)
    bad = np.flatnonzero(instance.b <= instance.gamma)
    if bad.size:
        i = int(bad[0])
        raise AssumptionViolated(f"user {i + 1}: b={instance.b[i]:.12g} <= gamma={instance.gamma[i]:.12g}", i)
    return p


def best_response(i: int, others, price: float, instance: ModelInstance) -> float:
    """Utility-maximizing consumption of user ``i`` given everyone else's.

    ``others`` is a full-length profile; entry ``i`` is ignored because the
    diagonal of W is zero.
    """
    a, b, g = instance.a[i], instance.b[i], instance.gamma[i]
    if a <= price:
        raise AssumptionViolated(f"user {i + 1}: a={a:.12g} <= p={price:.12g}", i)
    if b <= g:
        raise AssumptionViolated(f"user {i + 1}: b={b:.12g} <= gamma={g:.12g}", i)
    x = np.asarray(others, dtype=float)
    return float((a - price + g * (instance.W[i] @ x)) / (2.0 * (b + g)))


def best_responses(x, prices, instance: ModelInstance) -> np.ndarray:
    """All best responses at once (one simultaneous sweep)."""
    g = instance.gamma
    return (instance.a - prices + g * (instance.W @ x)) / (2.0 * (instance.b + g))


def nash_closed_form(instance: ModelInstance, prices) -> np.ndarray:
    p = check_assumption_1(instance, prices)
    x = linalg.solve_linear(instance.system_matrix, instance.a - p)
    if not np.all(x > 0):
        raise AssertionError(f"non-positive equilibrium consumption {x.min():.3e} under Assumption 1")
    return x


def nash_fixed_point(
    instance: ModelInstance,
    prices,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    x0=None,
    full_output: bool = False,
):
    """Iterate simultaneous best responses until the max-norm step is below ``tol``.

    Starts from zero unless ``x0`` is given. With ``full_output`` the number
    of sweeps is returned as well.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = check_assumption_1(instance, prices)
    x = np.zeros(instance.n) if x0 is None else np.array(x0, dtype=float)
    for sweep in range(1, max_iter + 1):
        x_new = best_responses(x, p, instance)
        step = np.abs(x_new - x).max()
        x = x_new
        if step < tol:
            return (x, sweep) if full_output else x
    raise NoConvergence(f"best-response iteration did not converge in {max_iter} sweeps")


@dataclass(frozen=True)
class UniquenessProbe:
    equilibrium: np.ndarray
    max_spread: float

    @property
    def unique(self) -> bool:
        return self.max_spread <= UNIQUENESS_TOL


def probe_uniqueness(instance: ModelInstance, prices, rng: np.random.Generator, starts: int = 10) -> UniquenessProbe:
    """Run the fixed-point iteration from random nonnegative starts and compare end points."""
    reference = nash_closed_form(instance, prices)
    scale = 2.0 * reference.max()
    spread = 0.0
    for _ in range(starts):
        x0 = rng.uniform(0.0, scale, instance.n)
        x = nash_fixed_point(instance, prices, x0=x0)
        spread = max(spread, float(np.abs(x - reference).max()))
    if spread > UNIQUENESS_TOL:
        log.warning("multi-start probe found equilibria %.3e apart", spread)
    return UniquenessProbe(reference, spread)


def user_utility(i: int, x, price: float, instance: ModelInstance) -> float:
    x = np.asarray(x, dtype=float)
    xi = x[i]
    peer = instance.W[i] @ x - xi
    return float(instance.a[i] * xi - instance.b[i] * xi**2 - price * xi + instance.gamma[i] * xi * peer)


def user_utilities(x, prices, instance: ModelInstance) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    p = price_vector(instance, prices)
    peer = instance.W @ x - x
    return instance.a * x - instance.b * x**2 - p * x + instance.gamma * x * peer


def entity_profit(x, prices, cost) -> float:
    """Profit sum_i p_i x_i - c_i x_i^2; ``cost`` is a CostProfile or array of slopes."""
    x = np.asarray(x, dtype=float)
    c = cost.c if isinstance(cost, CostProfile) else np.asarray(cost, dtype=float)
    p = np.broadcast_to(np.asarray(prices, dtype=float), x.shape)
    return float(np.sum(p * x - c * x**2))


def social_welfare(x, instance: ModelInstance) -> float:
    """Users' utilities plus profit; prices cancel as transfers."""
    x = np.asarray(x, dtype=float)
    peer = instance.W @ x - x
    return float(np.sum(instance.a * x - (instance.b + instance.c) * x**2 + instance.gamma * x * peer))


@dataclass(frozen=True)
class EquilibriumOutcome:
    prices: np.ndarray
    consumption: np.ndarray
    user_utilities: np.ndarray
    profit: float
    welfare: float


def evaluate(instance: ModelInstance, prices, consumption=None) -> EquilibriumOutcome:
    """Bundle prices, consumption (solved if not given), utilities, profit and welfare."""
    p = price_vector(instance, prices)
    x = nash_closed_form(instance, p) if consumption is None else np.asarray(consumption, dtype=float)
    return EquilibriumOutcome(
        prices=p,
        consumption=x,
        user_utilities=user_utilities(x, p, instance),
        profit=entity_profit(x, p, instance.cost),
        welfare=social_welfare(x, instance),
    )
