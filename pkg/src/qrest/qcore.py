"""Dense linear algebra on density matrices.

Everything here works on plain ``numpy`` complex arrays; the two small
container types only carry a subsystem-dimension signature and enforce the
density-matrix invariants on construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidSubsystem, NotHermitian

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_CLIP = 1e-9


def _as_dims(dims: Iterable[int]) -> tuple[int, ...]:
    return tuple(int(d) for d in dims)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix tagged with its subsystem dimensions.

    Eigenvalues in ``[-1e-9, 0)`` are clipped to zero and the trace is
    renormalised, so channel round-off never trips the invariants.  Anything
    further from a valid state raises.
    """

    mat: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, mat, dims: Sequence[int] | None = None, *, check: bool = True):
        m = np.array(mat, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"density matrix must be square, got {m.shape}")
        d = m.shape[0]
        dims = (d,) if dims is None else _as_dims(dims)
        if int(np.prod(dims)) != d:
            raise DimensionMismatch(f"dims {dims} do not multiply to {d}")
        if not np.all(np.isfinite(m)):
            raise ValueError("density matrix has non-finite entries")
        if check:
            m = _sanitize(m)
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "dims", dims)
        m.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def n_sub(self) -> int:
        return len(self.dims)

    def diag(self) -> np.ndarray:
        return np.real(np.diag(self.mat)).copy()

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, dims={self.dims})"


def _sanitize(m: np.ndarray) -> np.ndarray:
    herm_err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if herm_err > HERM_TOL:
        raise NotHermitian(f"matrix deviates from Hermitian by {herm_err:.3e}")
    m = 0.5 * (m + m.conj().T)
    tr = np.real(np.trace(m))
    if abs(tr - 1.0) > 1e-6:
        raise ValueError(f"trace {tr!r} is not 1")
    w, v = np.linalg.eigh(m)
    if w[0] < -PSD_CLIP:
        raise ValueError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        m = (v * w) @ v.conj().T
        m = 0.5 * (m + m.conj().T)
        tr = np.real(np.trace(m))
    if tr != 1.0:
        m = m / tr
    return m


@dataclass(frozen=True, eq=False)
class PureState:
    amps: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, amps, dims: Sequence[int] | None = None):
        a = np.array(amps, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(a)
        if nrm == 0:
            raise ValueError("zero vector is not a state")
        if abs(nrm**2 - 1.0) > 1e-12:
            a = a / nrm
        dims = (a.size,) if dims is None else _as_dims(dims)
        if int(np.prod(dims)) != a.size:
            raise DimensionMismatch(f"dims {dims} do not multiply to {a.size}")
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.amps.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amps, self.amps.conj())

    def dm(self) -> DensityMatrix:
        return DensityMatrix(self.projector(), self.dims)


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices (or vectors)."""
    if not ops:
        raise ValueError("tensor() needs at least one operand")
    return reduce(np.kron, (np.asarray(o) for o in ops))


def _check_subsystems(idx: Iterable[int], n: int) -> list[int]:
    out = sorted({int(i) for i in idx})
    if not out:
        raise InvalidSubsystem("empty subsystem set")
    for i in out:
        if i < 0 or i >= n:
            raise InvalidSubsystem(f"subsystem {i} out of range for {n} subsystems")
    return out


def partial_trace(rho: DensityMatrix, keep: int | Iterable[int]) -> DensityMatrix:
    """Reduced state on the subsystems listed in ``keep`` (in ascending order)."""
    if isinstance(keep, (int, np.integer)):
        keep = [keep]
    dims = rho.dims
    n = len(dims)
    keep = _check_subsystems(keep, n)
    t = rho.mat.reshape(dims + dims)
    # trace out from the highest index down so axis numbers stay valid
    cur = n
    for ax in reversed(range(n)):
        if ax in keep:
            continue
        t = np.trace(t, axis1=ax, axis2=ax + cur)
        cur -= 1
    dk = int(np.prod([dims[i] for i in keep]))
    red = t.reshape(dk, dk)
    return DensityMatrix(red, [dims[i] for i in keep])


def partial_transpose(rho, subsystem: int | Iterable[int], dims: Sequence[int] | None = None) -> np.ndarray:
    """Transpose the indices of one or several subsystems.

    ``rho`` may be a :class:`DensityMatrix` or a bare square array, in which
    case ``dims`` is required.
    """
    if isinstance(rho, DensityMatrix):
        mat, dims = rho.mat, rho.dims
    else:
        mat = np.asarray(rho)
        if dims is None:
            raise DimensionMismatch("dims are required for a bare array")
        dims = _as_dims(dims)
    if isinstance(subsystem, (int, np.integer)):
        subsystem = [subsystem]
    n = len(dims)
    sub = _check_subsystems(subsystem, n)
    perm = list(range(2 * n))
    for s in sub:
        perm[s], perm[n + s] = n + s, s
    d = mat.shape[0]
    return mat.reshape(dims + dims).transpose(perm).reshape(d, d)


def herm_eig(m: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors of a Hermitian matrix."""
    m = np.asarray(m)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
        raise NotHermitian("herm_eig requires a Hermitian matrix")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w[::-1].copy(), v[:, ::-1].copy()


def eigvals(rho: DensityMatrix) -> np.ndarray:
    return np.clip(np.linalg.eigvalsh(rho.mat), 0.0, None)


def trace_power(rho: DensityMatrix, m: int) -> float:
    """Tr(rho^m) evaluated from the spectrum."""
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    return float(np.sum(eigvals(rho) ** int(m)))


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def vn_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits."""
    return max(_entropy_bits(eigvals(rho)), 0.0)


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity_exact(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``.

    Evaluated as the trace norm of ``sqrt(rho) sqrt(sigma)``, which is
    symmetric in its arguments up to round-off.
    """
    a = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    b = sigma.mat if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    s = np.linalg.svd(sqrtm_psd(a) @ sqrtm_psd(b), compute_uv=False)
    return float(min(max(np.sum(s), 0.0), 1.0))


def basis_ket(index: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def maximally_entangled(d: int) -> np.ndarray:
    """Normalised ``sum_i |ii> / sqrt(d)``."""
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1.0 / np.sqrt(d)
    return v


def swap_operator(d: int) -> np.ndarray:
    """``sum_ij |ij><ji|`` on d x d."""
    f = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            f[i * d + j, j * d + i] = 1.0
    return f
