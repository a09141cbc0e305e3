"""First-stage pricing: perfect discrimination, single prices, subsidies.

Notation follows the model: ``A = B + 2 Gamma - Gamma W`` is the system
matrix of the consumption game and ``C = diag(c)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .equilibrium import nash_closed_form
from .errors import NegativeBound, NegativePrice, NotSymmetric
from .model import ModelInstance, Network


@dataclass(frozen=True)
class DistributionSpec:
    """Independent uniform supports for the intercepts a and curvatures b.

    ``low == high`` is accepted and gives a point mass.
    """

    a_low: float
    a_high: float
    b_low: float
    b_high: float

    def __post_init__(self):
        if not self.a_low <= self.a_high:
            raise ValueError("need a_low <= a_high")
        if not 0 < self.b_low <= self.b_high:
            raise ValueError("need 0 < b_low <= b_high")

    @property
    def mean_a(self) -> float:
        return 0.5 * (self.a_low + self.a_high)

    @property
    def mean_b(self) -> float:
        return 0.5 * (self.b_low + self.b_high)

    @property
    def var_a(self) -> float:
        return (self.a_high - self.a_low) ** 2 / 12.0

    def mean_inv_b(self) -> float:
        lo, hi = self.b_low, self.b_high
        return 1.0 / lo if hi == lo else math.log(hi / lo) / (hi - lo)

    def mean_inv_b2(self) -> float:
        return 1.0 / (self.b_low * self.b_high)


PAPER_DISTRIBUTION = DistributionSpec(8.0, 12.0, 0.75, 1.25)


def _warn_negative(prices, label):
    if np.any(np.asarray(prices) < 0):
        warnings.warn(f"{label}: unconstrained optimum has negative price {np.min(prices):.6g}", NegativePrice, stacklevel=3)


def _require_symmetric(W, what="network"):
    if not linalg.is_symmetric(W):
        raise NotSymmetric(f"{what} must be symmetric (W = W^T)")


# -- perfect price discrimination ---------------------------------------------

@dataclass(frozen=True)
class PriceTerms:
    """The four additive parts of the discriminating price vector."""

    constant: np.ndarray
    cost: np.ndarray
    influence_incentive: np.ndarray
    influenced_surcharge: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.constant + self.cost - self.influence_incentive + self.influenced_surcharge


def _ppd_matrix(instance: ModelInstance) -> np.ndarray:
    # C + B + 2 Gamma - (W^T Gamma + Gamma W) / 2
    A = instance.system_matrix
    return np.diag(instance.c) + 0.5 * (A + A.T)


def ppd_price_terms(instance: ModelInstance) -> PriceTerms:
    W, g, a = instance.W, instance.gamma, instance.a
    za = linalg.solve_linear(_ppd_matrix(instance), a)
    return PriceTerms(
        constant=a / 2.0,
        cost=instance.c * za / 2.0,
        influence_incentive=W.T @ (g * za) / 4.0,
        influenced_surcharge=g * (W @ za) / 4.0,
    )


def ppd_prices(instance: ModelInstance) -> np.ndarray:
    p = ppd_price_terms(instance).total
    _warn_negative(p, "perfect price discrimination")
    return p


def ppd_consumption(instance: ModelInstance) -> np.ndarray:
    return linalg.solve_linear(_ppd_matrix(instance), instance.a / 2.0)


def ppd_profit_symmetric(instance: ModelInstance) -> float:
    """Closed-form optimal discriminating profit on a symmetric network.

    The printed form uses ``C + B + 2 Gamma - Gamma W``; it matches the
    realized profit exactly when ``Gamma W`` is symmetric (e.g. common gamma).
    """
    _require_symmetric(instance.W)
    M = np.diag(instance.c) + instance.system_matrix
    return float(0.25 * instance.a @ linalg.solve_linear(M, instance.a))


# -- single price, complete information -----------------------------------------

def uniform_price_complete(instance: ModelInstance) -> float:
    """Profit-maximizing common price when every a_i and b_i is known.

    Consumption is affine in the price, x(p) = u - p v with u = A^-1 a and
    v = A^-1 1, so profit is a concave quadratic in p and this is its
    stationary point.
    """
    u, v = linalg.solve_linear(instance.system_matrix, np.column_stack([instance.a, np.ones(instance.n)])).T
    c = instance.c
    p = (u.sum() + 2.0 * np.sum(c * u * v)) / (2.0 * (v.sum() + np.sum(c * v * v)))
    _warn_negative(p, "single price")
    return float(p)


def uniform_price_mean_field(instance: ModelInstance) -> float:
    """Closed form ``[1 - 1'A^-1 1 / (2 * 1'(A^-1 + A^-1 C A^-1) 1)] * mean(a)``.

    Equals :func:`uniform_price_complete` when all a_i are equal and A is
    symmetric; otherwise it replaces every a_i by the mean and is only an
    approximation.
    """
    Ainv = linalg.invert(instance.system_matrix)
    one = np.ones(instance.n)
    s1 = one @ Ainv @ one
    s2 = one @ (Ainv + Ainv @ np.diag(instance.c) @ Ainv) @ one
    return float((1.0 - s1 / (2.0 * s2)) * instance.a.mean())


def uniform_consumption_complete(instance: ModelInstance, price: float | None = None) -> np.ndarray:
    p = uniform_price_complete(instance) if price is None else price
    return nash_closed_form(instance, p)


def uniform_consumption_symmetric(instance: ModelInstance) -> np.ndarray:
    """Two-term form A^-1 (a - mean(a) 1) + (C + A)^-1 mean(a)/2 1 on symmetric networks."""
    _require_symmetric(instance.W)
    A = instance.system_matrix
    abar = instance.a.mean()
    one = np.ones(instance.n)
    return linalg.solve_linear(A, instance.a - abar) + linalg.solve_linear(np.diag(instance.c) + A, abar / 2.0 * one)


# -- single price, incomplete information ----------------------------------------

def _gamma_vector(gamma, n) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    return np.full(n, float(g)) if g.ndim == 0 else g


def incomplete_price_lower_bound(spec: DistributionSpec, network: Network, gamma, c_scalar: float) -> float:
    """Lower bound on the optimal single price when only E[a], E[b] are known."""
    _require_symmetric(network.weights)
    if c_scalar < 0:
        raise ValueError("c_scalar must be non-negative")
    n = network.n
    g = _gamma_vector(gamma, n)
    M = np.diag(2.0 * g + 2.0 * spec.mean_b + c_scalar) - g[:, None] * network.weights
    s = linalg.solve_linear(M, np.ones(n)).sum()
    return float(spec.mean_a / 2.0 * (1.0 + c_scalar / n * s))


def incomplete_consumption_lower_bound(spec: DistributionSpec, network: Network, gamma, price_lb: float) -> float:
    _require_symmetric(network.weights)
    if price_lb > spec.mean_a:
        raise NegativeBound(f"price bound {price_lb:.6g} exceeds E[a] = {spec.mean_a:.6g}")
    n = network.n
    g = _gamma_vector(gamma, n)
    M = np.diag(2.0 * g + 2.0 * spec.mean_b) - g[:, None] * network.weights
    s = linalg.solve_linear(M, np.ones(n)).sum()
    return float((spec.mean_a - price_lb) / n * s)


def baseline_price_no_peer(spec: DistributionSpec, c_scalar: float) -> float:
    if c_scalar < 0:
        raise ValueError("c_scalar must be non-negative")
    return (spec.mean_b + c_scalar) / (2.0 * spec.mean_b + c_scalar) * spec.mean_a


def baseline_expected_consumption(spec: DistributionSpec, c_scalar: float) -> float:
    """Per-user expected consumption at the no-peer price, mean-field form.

    Uses (E[a] - p) / (2 E[b]); the exact expectation of (a - p) / (2b) is
    slightly larger because 1/b is convex.
    """
    if c_scalar < 0:
        raise ValueError("c_scalar must be non-negative")
    return spec.mean_a / (2.0 * (2.0 * spec.mean_b + c_scalar))


def expected_profit_no_peer(spec: DistributionSpec, price: float, c_scalar: float, n: int) -> float:
    """Exact E[profit] with no peer effects: n * E[p x - c x^2] at x = (a - p) / (2b)."""
    ea = spec.mean_a - price
    ea2 = spec.var_a + ea**2
    per_user = price * ea * spec.mean_inv_b() / 2.0 - c_scalar * ea2 * spec.mean_inv_b2() / 4.0
    return float(n * per_user)


# -- welfare -------------------------------------------------------------------------

def social_optimum(instance: ModelInstance) -> np.ndarray:
    """Welfare-maximizing consumption (C + B/2 + Gamma - (W^T Gamma + Gamma W)/2)^-1 a/2."""
    g, W = instance.gamma, instance.W
    M = np.diag(instance.c + instance.b + g) - 0.5 * (W.T * g[None, :] + g[:, None] * W)
    return linalg.solve_linear(M, instance.a / 2.0)


def pigouvian_subsidies(instance: ModelInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (instance.b + instance.gamma) * x**2 / 2.0


def subsidized_system_matrix(instance: ModelInstance) -> np.ndarray:
    """Best-response system of the subsidized game: diag(b) + Gamma - Gamma W."""
    g = instance.gamma
    return np.diag(instance.b + g) - g[:, None] * instance.W


def subsidized_equilibrium(instance: ModelInstance) -> tuple[np.ndarray, np.ndarray]:
    """Prices and consumption of the two-stage game once subsidies are paid.

    With the subsidy each user's first-order condition becomes
    ``F x = a - p`` with ``F = diag(b) + Gamma - Gamma W``. The discriminating
    monopolist then maximizes ``a'x - x'(F + C)x``, giving
    ``x = (2C + F + F^T)^-1 a`` and ``p = a - F x``.
    """
    F = subsidized_system_matrix(instance)
    x = linalg.solve_linear(2.0 * np.diag(instance.c) + F + F.T, instance.a)
    p = instance.a - F @ x
    return p, x
