"""Randomized pairwise gossip for average consensus with privacy-motivated
oracles: binary comparisons, eps-gap responses and controlled noise insertion.
"""

from gossip_sim.duality import ConsensusProblem
from gossip_sim.graph import Graph, build_cycle, build_random_geometric, spectral_summary
from gossip_sim.protocols import (
    Adaptive,
    Binary,
    Constant,
    EpsGap,
    FixedHorizonOptimal,
    InverseSqrtT,
    InverseT,
    Noise,
    NoiseParams,
    ProtocolState,
    Standard,
    Trace,
    run,
    simulate,
)

__all__ = [
    "Adaptive",
    "Binary",
    "ConsensusProblem",
    "Constant",
    "EpsGap",
    "FixedHorizonOptimal",
    "Graph",
    "InverseSqrtT",
    "InverseT",
    "Noise",
    "NoiseParams",
    "ProtocolState",
    "Standard",
    "Trace",
    "build_cycle",
    "build_random_geometric",
    "run",
    "simulate",
    "spectral_summary",
]

__version__ = "0.1.0"
