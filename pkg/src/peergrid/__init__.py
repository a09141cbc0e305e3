"""Peer-effect demand response: equilibrium, pricing and treatment selection on consumer networks."""

__version__ = "0.1.0"

from .errors import PeerGridError  # noqa: E402
from .model import CostProfile, ModelInstance, Network, UserPopulation, build_topology  # noqa: E402

__all__ = ["CostProfile", "ModelInstance", "Network", "PeerGridError", "UserPopulation", "build_topology", "__version__"]
