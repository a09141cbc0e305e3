"""Consumer network, user parameters, and the derived system matrix.

Users are indexed from 0 internally. ``W[i, j]`` is the influence of user j
on user i; the adjacency matrix of the influence graph is ``W.T``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import linalg
from .errors import AlphaOutOfRange, InvalidNetwork, InvalidSize
from .fileio import atomic_write

TOPOLOGIES = ("fully_connected", "star", "ring", "custom")
ROW_SUM_TOL = 1e-12
RENORMALIZE_WARN_TOL = 1e-9


def _frozen_vector(values, n=None, name="vector") -> np.ndarray:
    v = np.array(values, dtype=float)
    if n is not None and v.ndim == 0:
        v = np.full(n, float(v))
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class Network:
    """Row-stochastic interaction matrix with zero diagonal.

    All-zero rows are accepted and mark isolated users (no neighbours).
    """

    weights: np.ndarray
    topology: str = "custom"

    def __post_init__(self):
        W = np.array(linalg.as_matrix(self.weights), dtype=float)
        if self.topology not in TOPOLOGIES:
            raise InvalidNetwork(f"unknown topology tag {self.topology!r}")
        if np.abs(np.diag(W)).max() > ROW_SUM_TOL:
            raise InvalidNetwork("diagonal entries must be zero")
        if W.min() < 0.0 or W.max() > 1.0 + ROW_SUM_TOL:
            raise InvalidNetwork("weights must lie in [0, 1]")
        sums = W.sum(axis=1)
        bad = (np.abs(sums - 1.0) > ROW_SUM_TOL) & (sums != 0.0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InvalidNetwork(f"row {i} sums to {sums[i]!r}, expected 1 (or 0 for an isolated user)")
        np.fill_diagonal(W, 0.0)
        W.flags.writeable = False
        object.__setattr__(self, "weights", W)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        return self.weights.T

    @property
    def isolated(self) -> np.ndarray:
        return self.weights.sum(axis=1) == 0.0

    def is_symmetric(self, tol: float = linalg.SYMMETRY_TOL) -> bool:
        return linalg.is_symmetric(self.weights, tol)


@dataclass(frozen=True)
class UserPopulation:
    a: np.ndarray
    b: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        a = _frozen_vector(self.a, name="a")
        n = a.shape[0]
        b = _frozen_vector(self.b, n, "b")
        gamma = _frozen_vector(self.gamma, n, "gamma")
        if np.any(a <= 0):
            raise ValueError("utility intercepts a must be positive")
        if np.any(b <= 0):
            raise ValueError("curvatures b must be positive")
        if np.any(gamma < 0):
            raise ValueError("peer sensitivities gamma must be non-negative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def B(self) -> np.ndarray:
        return np.diag(2.0 * self.b)

    @property
    def Gamma(self) -> np.ndarray:
        return np.diag(self.gamma)


@dataclass(frozen=True)
class CostProfile:
    c: np.ndarray

    def __post_init__(self):
        c = _frozen_vector(self.c, name="c")
        if np.any(c < 0):
            raise ValueError("cost slopes c must be non-negative")
        object.__setattr__(self, "c", c)

    @property
    def C(self) -> np.ndarray:
        return np.diag(self.c)

    def scalar(self) -> float | None:
        """The common cost slope, or None if costs differ across users."""
        return float(self.c[0]) if np.all(self.c == self.c[0]) else None


@dataclass(frozen=True)
class ModelInstance:
    network: Network
    population: UserPopulation
    cost: CostProfile

    def __post_init__(self):
        n = self.network.n
        if self.population.n != n or self.cost.c.shape[0] != n:
            raise InvalidSize(
                f"dimension mismatch: network {n}, population {self.population.n}, cost {self.cost.c.shape[0]}"
            )
        if not linalg.is_strictly_diag_dominant(self.system_matrix):
            raise InvalidNetwork("system matrix B + 2Gamma - Gamma W is not strictly diagonally dominant")

    @classmethod
    def build(cls, network: Network, a, b, gamma, c) -> "ModelInstance":
        """Construct from raw arrays; scalars broadcast to every user."""
        n = network.n
        pop = UserPopulation(_frozen_vector(a, n, "a"), _frozen_vector(b, n, "b"), _frozen_vector(gamma, n, "gamma"))
        return cls(network, pop, CostProfile(_frozen_vector(c, n, "c")))

    def with_gamma(self, gamma) -> "ModelInstance":
        return ModelInstance.build(self.network, self.a, self.b, gamma, self.c)

    @property
    def n(self) -> int:
        return self.network.n

    @property
    def W(self) -> np.ndarray:
        return self.network.weights

    @property
    def a(self) -> np.ndarray:
        return self.population.a

    @property
    def b(self) -> np.ndarray:
        return self.population.b

    @property
    def gamma(self) -> np.ndarray:
        return self.population.gamma

    @property
    def c(self) -> np.ndarray:
        return self.cost.c

    @cached_property
    def system_matrix(self) -> np.ndarray:
        A = system_matrix(self)
        A.flags.writeable = False
        return A


def build_topology(kind: str, n: int) -> Network:
    """Canonical equal-weight topologies. The star hub is user 0."""
    minimum = {"fully_connected": 2, "star": 3, "ring": 3}
    if kind not in minimum:
        raise InvalidNetwork(f"cannot build topology {kind!r}; expected one of {sorted(minimum)}")
    if int(n) != n or n < minimum[kind]:
        raise InvalidSize(f"{kind} needs n >= {minimum[kind]}, got {n}")
    n = int(n)
    W = np.zeros((n, n))
    if kind == "fully_connected":
        W[:] = 1.0 / (n - 1)
        np.fill_diagonal(W, 0.0)
    elif kind == "star":
        W[0, 1:] = 1.0 / (n - 1)
        W[1:, 0] = 1.0
    else:
        idx = np.arange(n)
        W[idx, (idx + 1) % n] = 0.5
        W[idx, (idx - 1) % n] = 0.5
    return Network(W, kind)


def subnetwork(n: int, members) -> Network:
    """Fully connected equal-weight clique on ``members``; everyone else isolated."""
    members = np.asarray(sorted(members), dtype=int)
    if len(members) < 2:
        raise InvalidSize("a clique needs at least two members")
    W = np.zeros((n, n))
    W[np.ix_(members, members)] = 1.0 / (len(members) - 1)
    W[members, members] = 0.0
    return Network(W, "custom")


def validate_assumption_1(instance: ModelInstance, prices) -> bool:
    p = np.broadcast_to(np.asarray(prices, dtype=float), (instance.n,))
    return bool(np.all(instance.a > p) and np.all(instance.b > instance.gamma))


def system_matrix(instance: ModelInstance) -> np.ndarray:
    """A = B + 2 Gamma - Gamma W."""
    g = instance.gamma
    return np.diag(2.0 * instance.b + 2.0 * g) - g[:, None] * instance.W


def katz_centrality(G, alpha: float, weights) -> np.ndarray:
    """Weighted Katz-Bonacich centrality ``(I - alpha G)^-1 w`` for a raw adjacency matrix."""
    G = linalg.as_matrix(G)
    w = _frozen_vector(weights, G.shape[0], "weight_vec")
    if alpha < 0:
        raise AlphaOutOfRange(f"alpha must be non-negative, got {alpha}")
    rho = linalg.spectral_norm(G)
    if rho > 0 and alpha >= 1.0 / rho:
        raise AlphaOutOfRange(f"alpha={alpha} must be below 1/rho(G) = {1.0 / rho}")
    return linalg.solve_linear(np.eye(G.shape[0]) - alpha * G, w)


def katz_bonacich(network: Network, alpha: float, weight_vec) -> np.ndarray:
    return katz_centrality(network.adjacency, alpha, weight_vec)


# -- file formats -----------------------------------------------------------

def format_float(x: float) -> str:
    return f"{x:.12g}"


def save_network(network: Network, path) -> None:
    lines = [",".join(format_float(v) for v in row) for row in network.weights]
    atomic_write(path, "\n".join(lines) + "\n")


def load_network(path, topology: str = "custom") -> Network:
    """Read a headerless n-by-n CSV of weights.

    Non-zero rows are rescaled to sum to 1; a warning is issued when a row
    was off by more than 1e-9 (smaller deviations are print rounding).
    """
    try:
        W = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise InvalidNetwork(f"{path}: {exc}") from exc
    if W.shape[0] != W.shape[1]:
        raise InvalidNetwork(f"{path}: expected a square matrix, got {W.shape}")
    if not np.all(np.isfinite(W)) or W.min() < 0:
        raise InvalidNetwork(f"{path}: weights must be finite and non-negative")
    sums = W.sum(axis=1)
    off = np.abs(sums - 1.0)
    nonzero = sums > 0
    drift = nonzero & (off > RENORMALIZE_WARN_TOL)
    if drift.any():
        rows = ", ".join(str(i) for i in np.flatnonzero(drift))
        warnings.warn(f"{path}: renormalizing rows {rows} to sum to 1", stacklevel=2)
    W[nonzero] /= sums[nonzero, None]
    return Network(W, topology)


USER_COLUMNS = ("a", "b", "gamma", "c")


def save_users(instance: ModelInstance, path) -> None:
    rows = [",".join(USER_COLUMNS)]
    for i in range(instance.n):
        rows.append(",".join(format_float(v) for v in (instance.a[i], instance.b[i], instance.gamma[i], instance.c[i])))
    atomic_write(path, "\n".join(rows) + "\n")


def load_instance(network_path, users_path) -> ModelInstance:
    """Load a network CSV plus a users CSV with header ``a,b,gamma,c``.

    Users with no neighbours are only accepted when their gamma is zero.
    """
    network = load_network(network_path)
    with open(users_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(USER_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InvalidNetwork(f"{users_path}: missing columns {sorted(missing)}")
        rows = list(reader)
    try:
        cols = {k: np.array([float(r[k]) for r in rows]) for k in USER_COLUMNS}
    except ValueError as exc:
        raise InvalidNetwork(f"{users_path}: {exc}") from exc
    if len(rows) != network.n:
        raise InvalidSize(f"{users_path} has {len(rows)} users, network has {network.n}")
    lonely = network.isolated & (cols["gamma"] > 0)
    if lonely.any():
        raise InvalidNetwork(f"users {[int(i) + 1 for i in np.flatnonzero(lonely)]} have gamma > 0 but no neighbours")
    return ModelInstance.build(network, cols["a"], cols["b"], cols["gamma"], cols["c"])
