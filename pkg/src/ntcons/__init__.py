"""Non-trivial consensus on signed matrix-weighted networks with noisy measurements."""

__version__ = "0.1.0"

from .errors import ConsensusError  # noqa: E402
from .gain import GainSpec, validate_gain  # noqa: E402
from .graph import MatrixGraph, antagonized_set, laplacian, neighbor_sets  # noqa: E402
from .schedule import TopologySchedule, certify_schedule  # noqa: E402
from .structure import Decomposition, NoiseIntensity, find_decomposition, verify_decomposition  # noqa: E402
from .synthesis import Mode, ProtocolDesign, certify_design, synthesize  # noqa: E402

__all__ = [
    "ConsensusError", "GainSpec", "validate_gain", "MatrixGraph", "antagonized_set", "laplacian",
    "neighbor_sets", "TopologySchedule", "certify_schedule", "Decomposition", "NoiseIntensity",
    "find_decomposition", "verify_decomposition", "Mode", "ProtocolDesign", "certify_design",
    "synthesize",
]
