"""Privacy-preserving onion-routed queries for wireless sensor networks."""
from .errors import OnionWSNError
from .netsim import EnergyParams, SimConfig, Simulator
from .onion import ProtocolParams, Query, Reading, RoutePlan
from .topology import TopologyGraph, generate_topology

__version__ = "0.1.0"

__all__ = ["OnionWSNError", "EnergyParams", "SimConfig", "Simulator", "ProtocolParams", "Query",
           "Reading", "RoutePlan", "TopologyGraph", "generate_topology"]
