"""Gossip-based group testing for defective sensor detection.

The subpackages layer up from bit-level linear algebra (``binmat``) through
test design and decoding (``gtcore``), network generation (``topology``),
the gossip protocol itself (``protocol``, ``trial``), competing schemes
(``baselines``) and closed-form analysis (``analysis``) to the experiment
harness and command line.
"""

from .analysis import comm_gp, p_error_bound, required_messages
from .binmat import BitMatrix, BitVector, RankAccumulator, gf2_rank
from .gtcore import (DecodeResult, DefectVector, TestMessage, distance_decode_single,
                     is_disjunct, multi_decode)
from .harness import ExperimentConfig, compare_schemes, run_experiment
from .protocol import ConfigError, ProtocolConfig
from .topology import Topology, assign_clusters, build_complete, build_k_regular, \
    build_random_geometric

__version__ = "0.1.0"

__all__ = [
    "BitMatrix", "BitVector", "ConfigError", "DecodeResult", "DefectVector", "ExperimentConfig",
    "ProtocolConfig", "RankAccumulator", "TestMessage", "Topology", "assign_clusters",
    "build_complete", "build_k_regular", "build_random_geometric", "comm_gp", "compare_schemes",
    "distance_decode_single", "gf2_rank", "is_disjunct", "multi_decode", "p_error_bound",
    "required_messages", "run_experiment",
]
