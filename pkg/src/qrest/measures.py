"""Coherence and entanglement measures, plus closed-form oracles."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NotBipartite, ParamOutOfRange
from .qcore import DensityMatrix, PureState, _entropy_bits, vn_entropy
from .sdp import default_bipartitions, max_fidelity_incoherent, max_fidelity_ppt
from .sdp.programs import DEFAULT_TOL


class Measure(str, enum.Enum):
    L1_COHERENCE = "L1Coherence"
    REL_ENT_COHERENCE = "RelEntCoherence"
    GEOM_COHERENCE = "GeomCoherence"
    GEOM_ENTANGLEMENT = "GeomEntanglement"


class Method(str, enum.Enum):
    ANALYTIC = "Analytic"
    SDP = "SDP"
    PURE_ORACLE = "PureOracle"


@dataclass(frozen=True)
class MeasureLabel:
    measure: Measure
    value: float
    method: Method
    tolerance: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))
        object.__setattr__(self, "method", Method(self.method))
        if self.value < -self.tolerance:
            raise ValueError(f"negative measure value {self.value}")
        bounded = self.measure in (Measure.GEOM_COHERENCE, Measure.GEOM_ENTANGLEMENT)
        if bounded and self.value > 1 + self.tolerance:
            raise ValueError(f"{self.measure.value} above 1: {self.value}")


def c_l1(rho: DensityMatrix) -> float:
    """Sum of the moduli of all off-diagonal entries."""
    a = np.abs(rho.mat)
    return float(a.sum() - np.trace(a))


def c_rel_ent(rho: DensityMatrix) -> float:
    """Entropy of the dephased state minus the entropy of the state (bits)."""
    return max(_entropy_bits(np.clip(rho.diag(), 0.0, None)) - vn_entropy(rho), 0.0)


def c_geometric(rho: DensityMatrix, tol: float = DEFAULT_TOL) -> float:
    fid, _ = max_fidelity_incoherent(rho, tol)
    return float(min(max(1.0 - fid * fid, 0.0), 1.0))


def cg_pure_oracle(psi: PureState) -> float:
    return float(1.0 - np.max(np.abs(psi.amps) ** 2))


def eg_lower(rho: DensityMatrix, bipartitions=None, tol: float = DEFAULT_TOL) -> float:
    """PPT lower bound on the geometric measure of entanglement.

    With no ``bipartitions`` every cut of the subsystems is constrained at
    once (for two parties that is the single A|B cut).
    """
    if bipartitions is None:
        bipartitions = default_bipartitions(rho.dims)
    fid = max_fidelity_ppt(rho, bipartitions, tol)
    return float(min(max(1.0 - fid * fid, 0.0), 1.0))


def eg_pure_oracle(psi: PureState) -> float:
    """``1 - (largest Schmidt coefficient)^2`` for a bipartite pure state."""
    if len(psi.dims) != 2:
        raise NotBipartite(f"expected two subsystems, got dims {psi.dims}")
    s = np.linalg.svd(psi.amps.reshape(psi.dims), compute_uv=False)
    return float(max(1.0 - s[0] ** 2, 0.0))


def eg_werner_analytic(f: float) -> float:
    if not (-1.0 <= f <= 0.0):
        raise ParamOutOfRange(f"Werner formula holds for f in [-1, 0], got {f}")
    return float(0.5 * (1.0 - np.sqrt(1.0 - f * f)))


def eg_isotropic_analytic(d: int, fid: float) -> float:
    """``1 - (sqrt(F) + sqrt((1-F)(d-1)))^2 / d`` for F >= 1/d."""
    if not (1.0 / d - 1e-12 <= fid <= 1.0):
        raise ParamOutOfRange(f"isotropic formula holds for F in [1/d, 1], got {fid}")
    val = 1.0 - (np.sqrt(fid) + np.sqrt((1.0 - fid) * (d - 1))) ** 2 / d
    return float(max(val, 0.0))


def label(rho: DensityMatrix, measure, tol: float = DEFAULT_TOL, bipartitions=None) -> MeasureLabel:
    """Ground-truth label with provenance: analytic where a formula exists, SDP otherwise."""
    measure = Measure(measure)
    if measure is Measure.L1_COHERENCE:
        return MeasureLabel(measure, c_l1(rho), Method.ANALYTIC, 1e-12)
    if measure is Measure.REL_ENT_COHERENCE:
        return MeasureLabel(measure, c_rel_ent(rho), Method.ANALYTIC, 1e-12)
    if measure is Measure.GEOM_COHERENCE:
        return MeasureLabel(measure, c_geometric(rho, tol), Method.SDP, tol)
    return MeasureLabel(measure, eg_lower(rho, bipartitions, tol), Method.SDP, tol)
