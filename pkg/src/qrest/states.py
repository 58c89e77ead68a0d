"""Seeded random and parametric state generators.

Every generator takes a ``seed`` that may be an ``int`` or an existing
``numpy.random.Generator``; the same integer seed reproduces the same matrix
bit for bit.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import DimensionMismatch, ParamOutOfRange
from .qcore import DensityMatrix, PureState, maximally_entangled, swap_operator, tensor


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _simplex(rng: np.random.Generator, k: int) -> np.ndarray:
    w = rng.exponential(size=k)
    return w / w.sum()


def _check_range(name, value, lo, hi):
    if not (lo <= value <= hi):
        raise ParamOutOfRange(f"{name}={value!r} outside [{lo}, {hi}]")


def haar_vector(d: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def haar_unitary(d: int, seed=None) -> np.ndarray:
    """Haar unitary from the QR decomposition of a complex Ginibre matrix."""
    rng = _rng(seed)
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph[None, :]


def random_pure(d: int, seed=None, dims: Sequence[int] | None = None) -> PureState:
    if d < 2:
        raise ParamOutOfRange("dimension must be at least 2")
    return PureState(haar_vector(d, seed), dims)


def random_mixed(d: int, k: int, seed=None, dims=None) -> DensityMatrix:
    """Simplex-uniform convex combination of ``k`` Haar-random pure states."""
    if k < 1:
        raise ParamOutOfRange("component count must be >= 1")
    rng = _rng(seed)
    vecs = np.stack([haar_vector(d, rng) for _ in range(k)], axis=1)
    w = _simplex(rng, k)
    return DensityMatrix((vecs * w[None, :]) @ vecs.conj().T, dims)


def random_diagonal(d: int, seed=None, dims=None) -> DensityMatrix:
    if d < 2:
        raise ParamOutOfRange("dimension must be at least 2")
    return DensityMatrix(np.diag(_simplex(_rng(seed), d)).astype(complex), dims)


def pure_diag_mix(d: int, seed=None, dims=None, lam: float | None = None) -> DensityMatrix:
    """``lam |psi><psi| + (1 - lam) diag(p)`` with lam uniform unless given."""
    rng = _rng(seed)
    psi = haar_vector(d, rng)
    diag = np.diag(_simplex(rng, d))
    if lam is None:
        lam = rng.uniform()
    _check_range("lam", lam, 0.0, 1.0)
    return DensityMatrix(lam * np.outer(psi, psi.conj()) + (1 - lam) * diag, dims)


def werner(d: int, f: float) -> DensityMatrix:
    """Werner state on d x d with ``Tr(rho F_swap) = f``."""
    _check_range("f", f, -1.0, 1.0)
    denom = d**4 - d**2
    rho = (d * d - f * d) / denom * np.eye(d * d) + (f * d * d - d) / denom * swap_operator(d)
    return DensityMatrix(rho.astype(complex), (d, d))


def isotropic(d: int, fid: float) -> DensityMatrix:
    """Isotropic state with singlet fraction ``fid`` (normalised |psi+>)."""
    _check_range("F", fid, 0.0, 1.0)
    psi = maximally_entangled(d)
    proj = np.outer(psi, psi.conj())
    rho = (1 - fid) / (d * d - 1) * (np.eye(d * d) - proj) + fid * proj
    return DensityMatrix(rho, (d, d))


_PAIRS3 = [(0, 1), (0, 2), (1, 2)]


def phi_vector(kind: int, b_diag: Sequence[complex], b_off: Sequence[complex] | None = None) -> np.ndarray:
    """Two-qutrit ``|phi_1>`` or ``|phi_2>``, renormalised.

    ``b_off`` holds the coefficients for the unordered pairs (0,1), (0,2),
    (1,2); each multiplies ``|ij> + |ji>``.
    """
    v = np.zeros(9, dtype=complex)
    for i, bi in enumerate(b_diag):
        v[4 * i] = bi
    if kind == 1:
        if b_off is None:
            raise ValueError("kind 1 needs off-diagonal coefficients")
        for (i, j), bij in zip(_PAIRS3, b_off):
            v[3 * i + j] += bij
            v[3 * j + i] += bij
    elif kind != 2:
        raise ValueError("kind must be 1 or 2")
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("phi coefficients vanish")
    return v / nrm


def phi1_alpha(alpha: float) -> dict:
    return {"b_diag": [np.sin(alpha) / np.sqrt(3)] * 3, "b_off": [np.cos(alpha) / np.sqrt(6)] * 3}


def phi2_alpha(alpha: float) -> dict:
    s = np.sin(alpha) * np.sqrt(2) / 2
    return {"b_diag": [s, s, np.cos(alpha)]}


def white_noise_mix(psi: np.ndarray, p: float, dims) -> DensityMatrix:
    _check_range("p", p, 0.0, 1.0)
    d = psi.size
    return DensityMatrix(p * np.outer(psi, psi.conj()) + (1 - p) / d * np.eye(d), dims)


def phi_family(kind: int, b_diag, b_off=None, p: float = 1.0) -> DensityMatrix:
    """``p |phi><phi| + (1-p) I/9`` on two qutrits."""
    return white_noise_mix(phi_vector(kind, b_diag, b_off), p, (3, 3))


def local_unitary(dims: Sequence[int], seed=None) -> np.ndarray:
    rng = _rng(seed)
    return tensor(*[haar_unitary(d, rng) for d in dims])


def apply_local_unitaries(rho: DensityMatrix, seed=None) -> DensityMatrix:
    if rho.n_sub < 2:
        raise DimensionMismatch("local unitaries need at least two subsystems")
    u = local_unitary(rho.dims, seed)
    return DensityMatrix(u @ rho.mat @ u.conj().T, rho.dims)


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(e, dtype=complex) for e in self.operators)
        shapes = {e.shape for e in ops}
        if len(shapes) != 1:
            raise DimensionMismatch("Kraus operators must share one shape")
        d = ops[0].shape[1]
        comp = sum(e.conj().T @ e for e in ops)
        if np.max(np.abs(comp - np.eye(d))) > 1e-10:
            raise ValueError("Kraus operators are not trace preserving")
        object.__setattr__(self, "operators", ops)

    def __matmul__(self, other: "KrausChannel") -> "KrausChannel":
        """Tensor product channel (independent action on two factors)."""
        return KrausChannel(tuple(np.kron(a, b) for a in self.operators for b in other.operators))

    def apply(self, mat: np.ndarray) -> np.ndarray:
        return sum(e @ mat @ e.conj().T for e in self.operators)


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel((np.eye(d),))


def qutrit_amplitude_damping(r: float) -> KrausChannel:
    """Qutrit damping to |0>; E0 damps both |1> and |2> so the set is complete."""
    _check_range("r", r, 0.0, 1.0)
    e0 = np.diag([1.0, np.sqrt(1 - r), np.sqrt(1 - r)])
    e1 = np.zeros((3, 3))
    e1[0, 1] = np.sqrt(r)
    e2 = np.zeros((3, 3))
    e2[0, 2] = np.sqrt(r)
    return KrausChannel((e0, e1, e2))


def amplitude_damp_qutrit(rho: DensityMatrix, r: float, both_subsystems: bool = True) -> DensityMatrix:
    if any(d != 3 for d in rho.dims):
        raise DimensionMismatch("amplitude damping is defined for qutrit subsystems")
    damp = qutrit_amplitude_damping(r)
    chans = [damp if (k == 0 or both_subsystems) else identity_channel(3) for k in range(rho.n_sub)]
    chan = chans[0]
    for c in chans[1:]:
        chan = chan @ c
    out = chan.apply(rho.mat)
    out = 0.5 * (out + out.conj().T)
    return DensityMatrix(out / np.real(np.trace(out)), rho.dims)


DEFAULT_SEPARABLE_TERMS = 10


def random_separable(dims: Sequence[int], k: int = DEFAULT_SEPARABLE_TERMS, seed=None) -> DensityMatrix:
    """Simplex-weighted mixture of ``k`` fully product pure states."""
    if k < 1:
        raise ParamOutOfRange("component count must be >= 1")
    rng = _rng(seed)
    dims = tuple(dims)
    w = _simplex(rng, k)
    d = int(np.prod(dims))
    out = np.zeros((d, d), dtype=complex)
    for wi in w:
        v = tensor(*[haar_vector(dk, rng) for dk in dims])
        out += wi * np.outer(v, v.conj())
    return DensityMatrix(out, dims)


def pure_separable_mix(dims: Sequence[int], seed=None, k: int = DEFAULT_SEPARABLE_TERMS, lam=None) -> DensityMatrix:
    """``lam |psi><psi| + (1-lam) sigma_sep`` with lam uniform unless given."""
    rng = _rng(seed)
    dims = tuple(dims)
    psi = haar_vector(int(np.prod(dims)), rng)
    sep = random_separable(dims, k, rng)
    if lam is None:
        lam = rng.uniform()
    _check_range("lam", lam, 0.0, 1.0)
    return DensityMatrix(lam * np.outer(psi, psi.conj()) + (1 - lam) * sep.mat, dims)


class Family(str, enum.Enum):
    HAAR_PURE = "HaarPure"
    CONVEX_MIXTURE = "ConvexMixture"
    DIAGONAL = "Diagonal"
    PURE_DIAG_MIX = "PureDiagMix"
    WERNER = "Werner"
    ISOTROPIC = "Isotropic"
    PHI1_NOISY = "Phi1Noisy"
    PHI2_NOISY = "Phi2Noisy"
    PURE_NOISY = "PureNoisy"
    SEPARABLE_MIX = "SeparableMix"
    LOCAL_UNITARY_ORBIT = "LocalUnitaryOrbit"
    AMPLITUDE_DAMPED = "AmplitudeDamped"


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _unjson(v):
    if isinstance(v, dict):
        if set(v) == {"re", "im"}:
            return complex(v["re"], v["im"])
        return {k: _unjson(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_unjson(x) for x in v]
    return v


@dataclass(frozen=True)
class StateRecipe:
    """Everything needed to rebuild one state: family, dimensions, parameters, seed."""

    family: Family
    dims: tuple
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        self._check_params()

    def _check_params(self):
        p = self.params
        for key in ("p", "r", "lam"):
            if key in p and p[key] is not None:
                _check_range(key, p[key], 0.0, 1.0)
        if "F" in p:
            _check_range("F", p["F"], 0.0, 1.0)
        if "f" in p:
            _check_range("f", p["f"], -1.0, 1.0)
        if "k" in p and p["k"] < 1:
            raise ParamOutOfRange("k must be >= 1")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def build(self) -> DensityMatrix:
        fam, dims, p, seed = self.family, self.dims, self.params, self.seed
        d = self.dim
        if fam is Family.HAAR_PURE:
            return random_pure(d, seed, dims).dm()
        if fam is Family.CONVEX_MIXTURE:
            return random_mixed(d, p["k"], seed, dims)
        if fam is Family.DIAGONAL:
            return random_diagonal(d, seed, dims)
        if fam is Family.PURE_DIAG_MIX:
            return pure_diag_mix(d, seed, dims, p.get("lam"))
        if fam is Family.WERNER:
            return werner(dims[0], p["f"])
        if fam is Family.ISOTROPIC:
            return isotropic(dims[0], p["F"])
        if fam in (Family.PHI1_NOISY, Family.PHI2_NOISY):
            kind = 1 if fam is Family.PHI1_NOISY else 2
            return phi_family(kind, p["b_diag"], p.get("b_off"), p["p"])
        if fam is Family.PURE_NOISY:
            return white_noise_mix(haar_vector(d, seed), p["p"], dims)
        if fam is Family.SEPARABLE_MIX:
            return pure_separable_mix(dims, seed, p.get("k", DEFAULT_SEPARABLE_TERMS), p.get("lam"))
        if fam is Family.LOCAL_UNITARY_ORBIT:
            return apply_local_unitaries(StateRecipe.from_dict(p["base"]).build(), seed)
        if fam is Family.AMPLITUDE_DAMPED:
            base = StateRecipe.from_dict(p["base"]).build()
            return amplitude_damp_qutrit(base, p["r"], p.get("both", True))
        raise ValueError(f"unhandled family {fam}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "dims": list(self.dims),
            "params": _jsonable(self.params),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StateRecipe":
        return cls(obj["family"], tuple(obj["dims"]), _unjson(obj.get("params", {})), obj.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
