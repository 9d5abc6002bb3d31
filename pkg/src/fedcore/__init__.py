"""Simulator and protocol engine for privacy-preserving decentralized k-core decomposition."""
from .engine import Federation, RunOptions, RunReport, Session, UsageError
from .graph import Graph, load_graph, oracle_core_decomposition, verify_core_map
from .simnet import SimConfig

__all__ = [
    "Federation", "Graph", "RunOptions", "RunReport", "Session", "SimConfig", "UsageError",
    "load_graph", "oracle_core_decomposition", "verify_core_map",
]
__version__ = "0.1.0"
