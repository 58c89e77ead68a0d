"""Fidelity-maximisation programs built on :mod:`qrest.sdp.solver`.

All three programs share the block ``[[rho, Z], [Z^dag, sigma]] >= 0`` with
objective ``Re Tr Z``.  Before building, ``rho`` is compressed onto its
support: if ``rho = V diag(lam) V^dag`` then ``Z = V W`` and the block is
congruent to ``[[diag(lam), W], [W^dag, sigma]]``.  The reduction is exact and
gives every program a strictly feasible point, so rank-deficient inputs (pure
states, low-rank mixtures) need no regularisation.
"""
from __future__ import annotations

import os
from itertools import combinations

import numpy as np
import scipy.linalg as sla

from ..errors import DimensionMismatch, SolverFailure
from ..qcore import DensityMatrix, partial_transpose
from .solver import SdpProblem, SdpSolution, solve_sdp

SUPPORT_CUTOFF = 1e-12
DEFAULT_TOL = 1e-7

# re-checks every returned solution against its certificate (set by the tests)
CHECK_SOLUTIONS = os.environ.get("QREST_SDP_CHECK", "") in ("1", "true", "yes")


def _support(mat: np.ndarray, cutoff: float = SUPPORT_CUTOFF):
    w, v = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    keep = w > cutoff
    if not keep.any():
        raise ValueError("matrix has empty support")
    return w[keep], v[:, keep]


class _Lmi:
    """Accumulates a complex Hermitian LMI ``F0 + sum_k y_k F_k >= 0``."""

    def __init__(self, sizes):
        self.sizes = list(sizes)
        self.const = [np.zeros((n, n), dtype=complex) for n in self.sizes]
        self._var, self._blk, self._r, self._c, self._v = [], [], [], [], []
        self.b = []

    @property
    def n_vars(self):
        return len(self.b)

    def new_vars(self, obj):
        start = len(self.b)
        self.b.extend(np.asarray(obj, dtype=float).ravel())
        return np.arange(start, len(self.b))

    def add(self, var, blk, r, c, val):
        """Entry ``val`` at ``(r, c)`` of block ``blk`` in ``F_var`` (both triangles given)."""
        var, r, c, val = np.broadcast_arrays(var, r, c, np.asarray(val, dtype=complex))
        self._var.append(var.ravel())
        self._blk.append(np.full(var.size, blk))
        self._r.append(r.ravel())
        self._c.append(c.ravel())
        self._v.append(val.ravel())

    def add_hermitian_pair(self, var, blk, r, c, val):
        """``val`` at (r, c) and ``conj(val)`` at (c, r)."""
        self.add(var, blk, r, c, val)
        self.add(var, blk, c, r, np.conj(val))

    def build(self, check=True) -> SdpProblem:
        sizes = np.array(self.sizes)
        roff = np.concatenate([[0], np.cumsum(2 * sizes)])
        var = np.concatenate(self._var)
        blk = np.concatenate(self._blk)
        r = np.concatenate(self._r)
        c = np.concatenate(self._c)
        v = np.concatenate(self._v)
        n = sizes[blk]
        base = roff[blk]
        rows = np.concatenate([base + r, base + n + r, base + r, base + n + r])
        cols = np.concatenate([base + c, base + n + c, base + n + c, base + c])
        # S = C - sum y_k A_k, so A_k = -realify(F_k)
        vals = -np.concatenate([v.real, v.real, -v.imag, v.imag])
        var4 = np.tile(var, 4)
        big = int(roff[-1])
        key = (var4 * big + rows) * big + cols
        order = np.argsort(key, kind="stable")
        key, vals = key[order], vals[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals, start) if vals.size else vals
        nz = np.abs(summed) > 1e-15
        uniq, summed = uniq[nz], summed[nz]
        u_var, rem = np.divmod(uniq, big * big)
        u_row, u_col = np.divmod(rem, big)
        ptr = np.concatenate([[0], np.cumsum(np.bincount(u_var, minlength=self.n_vars))])
        c_mat = sla.block_diag(*[_realify_unchecked(h) for h in self.const])
        return SdpProblem(2 * sizes, c_mat, ptr, u_row, u_col, summed, np.array(self.b), check=check)


def _realify_unchecked(h):
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def _add_z_block(lmi: _Lmi, blk: int, r: int, d2: int, t: np.ndarray):
    """Variables for the complex ``r x d2`` off-diagonal block ``W``.

    Objective ``Re Tr(T W)`` with ``T`` of shape ``(d2, r)``.
    """
    ii, jj = np.meshgrid(np.arange(r), np.arange(d2), indexing="ij")
    tt = t.T  # tt[i, j] = T[j, i]
    xv = lmi.new_vars(tt.real)
    yv = lmi.new_vars(-tt.imag)
    lmi.add_hermitian_pair(xv, blk, ii.ravel(), r + jj.ravel(), 1.0)
    lmi.add_hermitian_pair(yv, blk, ii.ravel(), r + jj.ravel(), 1.0j)
    return xv, yv


def _solve(prob: SdpProblem, tol: float, what: str) -> SdpSolution:
    sol = solve_sdp(prob, tol=tol)
    if not sol.optimal:
        raise SolverFailure(f"{what}: solver ended with {sol.status.value} (gap {sol.gap:.2e})", sol)
    if CHECK_SOLUTIONS:
        check_certificate(prob, sol, tol)
    return sol


def check_certificate(prob: SdpProblem, sol: SdpSolution, tol: float):
    """Assert primal/dual feasibility, PSD-ness and the gap of an optimal solution."""
    xf = sla.block_diag(*sol.x)
    sf = sla.block_diag(*sol.s)
    assert np.max(np.abs(prob.apply(xf) - prob.b), initial=0.0) <= tol
    assert np.linalg.eigvalsh(xf)[0] >= -tol
    assert np.linalg.eigvalsh(sf)[0] >= -tol
    assert np.max(np.abs(prob.c - sf - prob.adjoint(sol.y))) <= tol
    assert sol.gap <= tol


def _value(sol: SdpSolution) -> float:
    return float(min(max(sol.dual_obj, 0.0), 1.0))


def _mat(x):
    return x.mat if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def max_fidelity_fixed(rho, sigma, tol: float = DEFAULT_TOL) -> float:
    """Fidelity of two fixed states as the optimum of the block-PSD program."""
    a, s = _mat(rho), _mat(sigma)
    if a.shape != s.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {s.shape}")
    la, va = _support(a)
    ls, vs = _support(s)
    r, q = la.size, ls.size
    lmi = _Lmi([r + q])
    lmi.const[0][:r, :r] = np.diag(la)
    lmi.const[0][r:, r:] = np.diag(ls)
    # Z = va W vs^dag  =>  Tr Z = Tr(vs^dag va W)
    _add_z_block(lmi, 0, r, q, vs.conj().T @ va)
    return _value(_solve(lmi.build(), tol, "fidelity"))


def max_fidelity_incoherent(rho, tol: float = DEFAULT_TOL) -> tuple[float, np.ndarray]:
    """``max F(rho, diag(q))`` over the probability simplex, and the maximiser."""
    a = _mat(rho)
    d = a.shape[0]
    la, va = _support(a)
    r = la.size
    lmi = _Lmi([r + d])
    lmi.const[0][:r, :r] = np.diag(la)
    lmi.const[0][r:, r:] = np.eye(d) / d
    _add_z_block(lmi, 0, r, d, va)
    if d > 1:
        tv = lmi.new_vars(np.zeros(d - 1))
        idx = np.arange(d - 1)
        lmi.add(tv, 0, r + idx, r + idx, 1.0)
        lmi.add(tv, 0, r + d - 1, r + d - 1, -1.0)
    sol = _solve(lmi.build(), tol, "incoherent fidelity")
    t = sol.y[lmi.n_vars - (d - 1):] if d > 1 else np.zeros(0)
    q = np.append(1.0 / d + t, 1.0 / d - t.sum())
    return _value(sol), np.clip(q, 0.0, None)


def default_bipartitions(dims) -> list[tuple[int, ...]]:
    """Every cut of the subsystems, each given by the side not containing 0."""
    n = len(dims)
    out = []
    for k in range(1, n):
        out.extend(combinations(range(1, n), k))
    return out


def max_fidelity_ppt(rho, bipartitions=None, tol: float = DEFAULT_TOL, dims=None) -> float:
    """``max F(rho, sigma)`` over unit-trace sigma >= 0 whose partial transposes
    across every listed cut are also PSD."""
    if isinstance(rho, DensityMatrix):
        a, dims = rho.mat, rho.dims
    else:
        a = np.asarray(rho, dtype=complex)
        if dims is None:
            raise DimensionMismatch("dims are required for a bare array")
    dims = tuple(dims)
    if len(dims) < 2:
        raise DimensionMismatch("PPT fidelity needs at least two subsystems")
    if bipartitions is None:
        bipartitions = [(len(dims) - 1,)]
    cuts = [tuple(sorted(c)) if not isinstance(c, (int, np.integer)) else (int(c),) for c in bipartitions]
    if not cuts:
        raise ValueError("at least one bipartition is required")
    d = a.shape[0]
    la, va = _support(a)
    r = la.size
    lmi = _Lmi([r + d] + [d] * len(cuts))
    lmi.const[0][:r, :r] = np.diag(la)
    lmi.const[0][r:, r:] = np.eye(d) / d
    for k in range(len(cuts)):
        lmi.const[1 + k][:] = np.eye(d) / d
    _add_z_block(lmi, 0, r, d, va)

    # sigma = I/d + sum of traceless Hermitian directions
    flat = np.arange(d * d).reshape(d, d)
    pt_maps = []
    for cut in cuts:
        src = partial_transpose(flat, cut, dims).ravel()
        dest = np.empty(d * d, dtype=np.int64)
        dest[src] = np.arange(d * d)
        pt_maps.append(dest)

    def place(var, rr, cc, val):
        lmi.add(var, 0, r + rr, r + cc, val)
        for k, dest in enumerate(pt_maps):
            pr, pc = np.divmod(dest[rr * d + cc], d)
            lmi.add(var, 1 + k, pr, pc, val)

    if d > 1:
        idx = np.arange(d - 1)
        tv = lmi.new_vars(np.zeros(d - 1))
        place(tv, idx, idx, 1.0)
        place(tv, np.full(d - 1, d - 1), np.full(d - 1, d - 1), -1.0)
        kk, ll = np.triu_indices(d, 1)
        uv = lmi.new_vars(np.zeros(kk.size))
        place(uv, kk, ll, 1.0)
        place(uv, ll, kk, 1.0)
        wv = lmi.new_vars(np.zeros(kk.size))
        place(wv, kk, ll, 1.0j)
        place(wv, ll, kk, -1.0j)
    return _value(_solve(lmi.build(), tol, "PPT fidelity"))
