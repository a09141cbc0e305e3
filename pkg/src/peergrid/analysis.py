"""Diagnostics for how peer sensitivity moves consumption and profit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .equilibrium import check_assumption_1, nash_closed_form, price_vector
from .errors import AssumptionViolated, GammaNotScalar, NotConnected, NotSymmetric, PremiseNotMet
from .model import ModelInstance, Network

FD_STEP = 1e-6
EQUAL_TOL = 1e-9


@dataclass(frozen=True)
class GammaSweep:
    gammas: np.ndarray
    consumption: np.ndarray  # shape (len(gammas), n)
    non_monotone: tuple[int, ...]

    @property
    def strictly_decreasing(self) -> bool:
        return not self.non_monotone


def gamma_sweep(instance: ModelInstance, prices, gamma_grid) -> GammaSweep:
    """Equilibrium consumption with a common gamma at each grid point.

    ``non_monotone`` lists users whose consumption fails to strictly decrease
    between some pair of consecutive grid points.
    """
    grid = np.asarray(gamma_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("gamma_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("gamma_grid must be strictly ascending")
    if grid.max() >= instance.b.min():
        raise AssumptionViolated(f"gamma={grid.max():.6g} is not below min(b)={instance.b.min():.6g}")
    table = np.array([nash_closed_form(instance.with_gamma(g), prices) for g in grid])
    steps = np.diff(table, axis=0)
    bad = tuple(int(i) for i in np.flatnonzero(np.any(steps >= 0, axis=0)))
    return GammaSweep(grid, table, bad)


@dataclass(frozen=True)
class BoomerangReport:
    gradient: np.ndarray
    increasing_users: tuple[int, ...]
    high_consumer: int | None = None
    fd_gradient: np.ndarray | None = None
    predicted_increasing: tuple[int, ...] | None = None

    @property
    def fd_relative_error(self) -> float:
        scale = max(np.abs(self.gradient).max(), np.finfo(float).tiny)
        return float(np.abs(self.gradient - self.fd_gradient).max() / scale)


def _consumption_common_gamma(instance: ModelInstance, alpha: np.ndarray, g: float) -> np.ndarray:
    # Raw solve, so the central difference may step to negative gamma.
    A = np.diag(2.0 * instance.b + 2.0 * g) - g * instance.W
    return linalg.solve_linear(A, alpha)


def boomerang_gradient(instance: ModelInstance, prices) -> BoomerangReport:
    """d x / d gamma at gamma = 0 for a common gamma shared by all users.

    In general this is ``-B^-1 (2I - W) B^-1 (a - p)``; with every b_i = 1 it
    reduces to ``-(2I - W)(a - p) / 4``. The report also carries a central
    finite difference of the closed-form equilibrium for comparison.
    """
    p = check_assumption_1(instance, prices)
    alpha = instance.a - p
    L = 2.0 * np.eye(instance.n) - instance.W
    inv_b = 1.0 / (2.0 * instance.b)
    grad = -inv_b * (L @ (inv_b * alpha))
    fd = (
        _consumption_common_gamma(instance, alpha, FD_STEP) - _consumption_common_gamma(instance, alpha, -FD_STEP)
    ) / (2.0 * FD_STEP)
    return BoomerangReport(grad, tuple(int(i) for i in np.flatnonzero(grad > 0)), fd_gradient=fd)


def classify_high_consumer(instance: ModelInstance, prices) -> BoomerangReport:
    """Find the single high consumer and predict which neighbours rebound.

    Requires equal-weight links, common b and gamma, and a population where
    one user j has ``a_j - p_j = alpha_bar`` and everyone else shares
    ``alpha`` with ``alpha_bar > n * alpha``. A neighbour i of j with m_i
    neighbours initially increases consumption iff
    ``alpha_bar > (m_i + 1) * alpha``.
    """
    W, n = instance.W, instance.n
    for i in range(n):
        row = W[i][W[i] > 0]
        if row.size and np.ptp(row) > EQUAL_TOL:
            raise PremiseNotMet(f"user {i + 1} has unequal link weights")
    if np.ptp(instance.b) > EQUAL_TOL or np.ptp(instance.gamma) > EQUAL_TOL:
        raise PremiseNotMet("b and gamma must be common to all users")
    p = price_vector(instance, prices)
    alpha = instance.a - p
    j = int(np.argmax(alpha))
    rest = np.delete(alpha, j)
    if np.ptp(rest) > EQUAL_TOL:
        raise PremiseNotMet("users other than the high consumer must share a - p")
    a_lo, a_hi = rest[0], alpha[j]
    if not a_hi - n * a_lo > EQUAL_TOL:
        raise PremiseNotMet(f"need alpha_bar > n * alpha, got {a_hi:.6g} vs {n * a_lo:.6g}")

    report = boomerang_gradient(instance, p)
    degree = (W > 0).sum(axis=1)
    neighbours = [i for i in range(n) if i != j and W[i, j] > 0]
    predicted = tuple(i for i in neighbours if a_hi > (degree[i] + 1) * a_lo)
    if set(predicted) != set(report.increasing_users):
        raise AssertionError(f"predicted rebound set {predicted} disagrees with gradient signs {report.increasing_users}")
    return BoomerangReport(report.gradient, report.increasing_users, j, report.fd_gradient, predicted)


@dataclass(frozen=True)
class PairConditions:
    pair: tuple[int, int]
    rhs: tuple[float, float]
    holds: tuple[bool, bool]
    untreated_sum: float
    treated_sum: float
    treated_consumption: tuple[float, float]


def targeted_pair_conditions(instance: ModelInstance, price: float, pair) -> PairConditions:
    """Sufficient conditions for treating two connected users to cut their total consumption.

    Everyone outside the pair is untreated and consumes (a_k - p) / (2 b_k).
    Each condition is equivalent to the treated user ending up at or below
    its untreated consumption; per-user gammas are allowed.
    """
    i, j = (int(k) for k in pair)
    if i == j:
        raise ValueError("pair must name two different users")
    W = instance.W
    if not (W[i, j] > 0 or W[j, i] > 0):
        raise NotConnected(f"users {i + 1} and {j + 1} are not linked")
    check_assumption_1(instance, price)
    a, b, gam = instance.a, instance.b, instance.gamma
    alpha = a - price
    x_free = alpha / (2.0 * b)
    others = np.ones(instance.n, dtype=bool)
    others[[i, j]] = False
    s_i = W[i, others] @ x_free[others]
    s_j = W[j, others] @ x_free[others]
    wij, wji = W[i, j], W[j, i]
    gi, gj = gam[i], gam[j]

    rhs_i = alpha[i] * (4 * (b[j] + gj) - gj * wij * wji) / (4 * (b[j] + gj) * s_i + 2 * wij * (alpha[j] + gj * s_j))
    rhs_j = alpha[j] * (4 * (b[i] + gi) - gi * wij * wji) / (4 * (b[i] + gi) * s_j + 2 * wji * (alpha[i] + gi * s_i))

    M = np.array([[2 * (b[i] + gi), -gi * wij], [-gj * wji, 2 * (b[j] + gj)]])
    x_pair = linalg.solve_linear(M, np.array([alpha[i] + gi * s_i, alpha[j] + gj * s_j]))
    return PairConditions(
        pair=(i, j),
        rhs=(float(rhs_i), float(rhs_j)),
        holds=(bool(b[i] <= rhs_i), bool(b[j] <= rhs_j)),
        untreated_sum=float(x_free[i] + x_free[j]),
        treated_sum=float(x_pair.sum()),
        treated_consumption=(float(x_pair[0]), float(x_pair[1])),
    )


@dataclass(frozen=True)
class MismatchReport:
    norm_gap: float
    bound: float
    realized_ratio: float


def uncertainty_bound(instance: ModelInstance, estimate: Network) -> MismatchReport:
    """Profit loss from pricing against an estimated network.

    The monopolist sets discriminating prices as if the network were
    ``estimate``; users respond on the true network. ``bound`` is the
    eigenvalue lower bound on the resulting profit ratio.
    """
    W, Wt = instance.W, estimate.weights
    if not linalg.is_symmetric(W):
        raise NotSymmetric("true network must be symmetric")
    if not linalg.is_symmetric(Wt):
        raise NotSymmetric("estimated network must be symmetric")
    if np.ptp(instance.gamma) > 0:
        raise GammaNotScalar("uncertainty bound needs a common gamma")
    g = float(instance.gamma[0])
    C = np.diag(instance.c)
    F = instance.system_matrix
    F_est = np.diag(2.0 * instance.b + 2.0 * g) - g * Wt
    lam = linalg.sym_eigenvalues(C + F)
    gap = linalg.spectral_norm(W - Wt)
    bound = lam[0] / (lam[-1] + g * gap)

    a = instance.a
    y = linalg.solve_linear(C + F_est, a / 2.0)
    p = a - F_est @ y
    x = linalg.solve_linear(F, F_est @ y)
    profit = p @ x - x @ (instance.c * x)
    x_true = linalg.solve_linear(C + 0.5 * (F + F.T), a / 2.0)
    p_true = a - F @ x_true
    profit_true = p_true @ x_true - x_true @ (instance.c * x_true)
    return MismatchReport(float(gap), float(bound), float(profit / profit_true))


def gershgorin_radius(M) -> float:
    """max_i sum_j |M_ij|, an upper bound on the spectral radius."""
    return float(np.abs(linalg.as_matrix(M)).sum(axis=1).max())
