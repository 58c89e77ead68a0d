"""Estimate coherence and entanglement measures from compact feature vectors."""
from .errors import QrestError
from .qcore import DensityMatrix, PureState, partial_trace, partial_transpose, tensor

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "PureState",
    "QrestError",
    "partial_trace",
    "partial_transpose",
    "tensor",
]
