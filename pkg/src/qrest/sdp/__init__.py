from .programs import (
    check_certificate,
    default_bipartitions,
    max_fidelity_fixed,
    max_fidelity_incoherent,
    max_fidelity_ppt,
)
from .solver import SdpProblem, SdpSolution, Status, realify, solve_sdp

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "Status",
    "check_certificate",
    "default_bipartitions",
    "max_fidelity_fixed",
    "max_fidelity_incoherent",
    "max_fidelity_ppt",
    "realify",
    "solve_sdp",
]
