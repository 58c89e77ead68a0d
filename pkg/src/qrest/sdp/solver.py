"""Dense primal-dual interior-point solver for block-diagonal real SDPs.

Problem form (primal / dual)::

    min <C, X>  s.t. <A_i, X> = b_i,  X >= 0
    max b'y     s.t. C - sum_i y_i A_i = S >= 0

Search directions use Nesterov-Todd scaling with a Mehrotra
predictor-corrector step.  All matrices are real symmetric; complex Hermitian
blocks are embedded with :func:`realify` before they get here.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .. import kernels
from ..errors import NotHermitian


def realify(h: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Embed a Hermitian ``A + iB`` as the real symmetric ``[[A, -B], [B, A]]``."""
    h = np.asarray(h)
    if np.max(np.abs(h - h.conj().T), initial=0.0) > tol:
        raise NotHermitian("realify requires a Hermitian matrix")
    a, b = h.real, h.imag
    return np.block([[a, -b], [b, a]])


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


class SdpProblem:
    """Standard-form SDP with sparse constraint matrices.

    Constraint ``i`` is stored CSR-style as the entries
    ``ptr[i]:ptr[i+1]`` of ``(rows, cols, vals)`` in the coordinates of the
    full block-diagonal matrix; both triangles are stored.
    """

    def __init__(self, blocks, c, ptr, rows, cols, vals, b, *, check=True):
        self.blocks = [int(n) for n in blocks]
        self.offsets = np.concatenate([[0], np.cumsum(self.blocks)]).astype(np.int64)
        self.size = int(self.offsets[-1])
        self.c = np.asarray(c, dtype=float)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=float)
        self.b = np.asarray(b, dtype=float)
        n = self.size
        self.op = sp.csr_matrix(
            (self.vals, self.rows * n + self.cols, self.ptr), shape=(self.m, n * n)
        )
        if check:
            self.validate()

    @property
    def m(self) -> int:
        return self.ptr.size - 1

    @classmethod
    def from_dense(cls, blocks, c_blocks, a_blocks, b, check=True):
        """Build from per-block dense matrices (``a_blocks[i][k]`` is block ``k`` of A_i)."""
        offs = np.concatenate([[0], np.cumsum(blocks)])
        c = sla.block_diag(*[np.asarray(x, dtype=float) for x in c_blocks])
        ptr, rows, cols, vals = [0], [], [], []
        for mats in a_blocks:
            for k, mat in enumerate(mats):
                r, cc = np.nonzero(mat)
                rows.extend(r + offs[k])
                cols.extend(cc + offs[k])
                vals.extend(np.asarray(mat)[r, cc])
            ptr.append(len(rows))
        return cls(blocks, c, ptr, rows, cols, vals, b, check=check)

    def block_of(self, idx: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.offsets, idx, side="right") - 1

    def validate(self, tol=1e-12):
        c = self.c
        if c.shape != (self.size, self.size):
            raise ValueError("objective does not match block structure")
        if np.max(np.abs(c - c.T), initial=0.0) > tol:
            raise ValueError("objective is not symmetric")
        mask = np.zeros_like(c, dtype=bool)
        for lo, hi in zip(self.offsets[:-1], self.offsets[1:]):
            mask[lo:hi, lo:hi] = True
        if np.any(c[~mask] != 0):
            raise ValueError("objective has entries outside the diagonal blocks")
        if np.any(self.block_of(self.rows) != self.block_of(self.cols)):
            raise ValueError("constraint entry crosses blocks")
        n = self.size
        asym = self.op - _transpose_rows(self.op, n)
        if asym.nnz and np.max(np.abs(asym.data)) > tol:
            raise ValueError("constraint matrix is not symmetric")
        if self.b.size != self.m:
            raise ValueError("b has the wrong length")
        gram = (self.op @ self.op.T).toarray()
        try:
            low = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            raise ValueError("constraints are linearly dependent") from None
        if np.min(np.diag(low)) ** 2 <= 1e-10 * max(np.max(np.diag(gram)), 1.0):
            raise ValueError("constraints are linearly dependent")

    def apply(self, x: np.ndarray) -> np.ndarray:
        """A(X) = (<A_i, X>)_i."""
        return self.op @ x.reshape(-1)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """A*(y) = sum_i y_i A_i."""
        return (self.op.T @ y).reshape(self.size, self.size)

    def to_json(self) -> str:
        """Debug dump for cross-checking against external solvers."""
        n = self.size
        cons = []
        for i in range(self.m):
            lo, hi = self.ptr[i], self.ptr[i + 1]
            cons.append(
                {
                    "entries": [
                        [int(r), int(c), float(v)]
                        for r, c, v in zip(self.rows[lo:hi], self.cols[lo:hi], self.vals[lo:hi])
                        if r <= c
                    ],
                    "b": float(self.b[i]),
                }
            )
        r, c = np.nonzero(np.triu(self.c))
        return json.dumps(
            {
                "blocks": self.blocks,
                "size": n,
                "objective": [[int(i), int(j), float(self.c[i, j])] for i, j in zip(r, c)],
                "constraints": cons,
            }
        )


def _transpose_rows(op, n):
    coo = op.tocoo()
    r, c = np.divmod(coo.col, n)
    return sp.csr_matrix((coo.data, (coo.row, c * n + r)), shape=op.shape)


@dataclass
class SdpSolution:
    x: list
    y: np.ndarray
    s: list
    primal_obj: float
    dual_obj: float
    gap: float
    primal_residual: float
    dual_residual: float
    status: Status
    iterations: int
    history: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def solve_sdp(p: SdpProblem, tol: float = 1e-7, max_iter: int = 200, *, backend=None) -> SdpSolution:
    """Solve ``p``; returns the final iterate (or the best one seen on failure)."""
    slices = [slice(lo, hi) for lo, hi in zip(p.offsets[:-1], p.offsets[1:])]
    n_tot = p.size
    c_blk = [p.c[s, s] for s in slices]

    x, s = _initial_point(p, slices, c_blk)
    y = np.zeros(p.m)
    best = None
    history = []
    status = Status.MAX_ITER
    it = 0

    for it in range(max_iter + 1):
        xf = sla.block_diag(*x)
        sf = sla.block_diag(*s)
        rp = p.b - p.apply(xf)
        rd = p.c - sf - p.adjoint(y)
        pobj = float(np.sum(p.c * xf))
        dobj = float(p.b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = float(np.max(np.abs(rp), initial=0.0))
        dinf = float(np.max(np.abs(rd), initial=0.0))
        score = max(relgap, pinf, dinf)
        history.append((pobj, dobj, pinf, dinf))
        if best is None or score < best[0]:
            best = (score, [b.copy() for b in x], y.copy(), [b.copy() for b in s], pobj, dobj, gap, pinf, dinf, it)
        if gap <= tol and pinf <= tol and dinf <= tol:
            status = Status.OPTIMAL
            break
        if max(np.max(np.abs(xf)), np.max(np.abs(sf))) > 1e12:
            status = Status.INFEASIBLE
            break
        if it == max_iter:
            break

        try:
            scal = [_nt_scaling(xb, sb) for xb, sb in zip(x, s)]
        except np.linalg.LinAlgError:
            break
        wf = sla.block_diag(*[sc[2] for sc in scal])
        mu = float(np.sum(xf * sf)) / n_tot

        mmat = kernels.schur_complement(p.ptr, p.rows, p.cols, p.vals, wf, backend=backend)
        try:
            fac = sla.cho_factor(mmat, lower=True, check_finite=False)
            solve_m = lambda r: sla.cho_solve(fac, r, check_finite=False)  # noqa: E731
        except np.linalg.LinAlgError:
            lu = sla.lu_factor(mmat + 1e-14 * np.trace(mmat) / p.m * np.eye(p.m))
            solve_m = lambda r: sla.lu_solve(lu, r)  # noqa: E731
        wrdw = p.apply(wf @ rd @ wf)

        def direction(rc_blocks):
            h = [2.0 * r / (lam[:, None] + lam[None, :]) for r, (_, _, _, lam) in zip(rc_blocks, scal)]
            ghg = [g @ hb @ g.T for hb, (g, _, _, _) in zip(h, scal)]
            rhs = rp - p.apply(sla.block_diag(*ghg)) + wrdw
            dy = solve_m(rhs)
            ds_full = rd - p.adjoint(dy)
            ds = [ds_full[sl, sl] for sl in slices]
            dx = [gb - w @ d @ w for gb, d, (_, _, w, _) in zip(ghg, ds, scal)]
            dx = [0.5 * (d + d.T) for d in dx]
            ds = [0.5 * (d + d.T) for d in ds]
            return dx, dy, ds

        # predictor
        rc = [-np.diag(lam * lam) for (_, _, _, lam) in scal]
        dx, dy, ds = direction(rc)
        dxs, dss = _scaled(dx, ds, scal)
        ap = _max_step(dxs, scal)
        ad = _max_step(dss, scal)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(
            float(np.sum((xb + ap * dxb) * (sb + ad * dsb))) for xb, dxb, sb, dsb in zip(x, dx, s, ds)
        ) / n_tot
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        rc = []
        for (_, _, _, lam), a, bb in zip(scal, dxs, dss):
            ab = a @ bb
            rc.append(sigma * mu * np.eye(lam.size) - np.diag(lam * lam) - 0.5 * (ab + ab.T))
        dx, dy, ds = direction(rc)
        dxs, dss = _scaled(dx, ds, scal)
        ap = _max_step(dxs, scal)
        ad = _max_step(dss, scal)
        gamma = 0.9 + 0.09 * min(min(ap, 1.0), min(ad, 1.0))
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        x = [xb + ap * d for xb, d in zip(x, dx)]
        s = [sb + ad * d for sb, d in zip(s, ds)]
        y = y + ad * dy

    if status is Status.OPTIMAL:
        return SdpSolution(x, y, s, pobj, dobj, gap, pinf, dinf, status, it, history)
    _, bx, by, bs, bp, bd, bg, bpi, bdi, bit = best
    return SdpSolution(bx, by, bs, bp, bd, bg, bpi, bdi, status, it, history)


def _initial_point(p, slices, c_blk):
    blk_of_entry = p.block_of(p.rows)
    cons_of_entry = np.repeat(np.arange(p.m), np.diff(p.ptr))
    x, s = [], []
    for k, sl in enumerate(slices):
        n = sl.stop - sl.start
        sel = blk_of_entry == k
        norms = np.zeros(p.m)
        np.add.at(norms, cons_of_entry[sel], p.vals[sel] ** 2)
        norms = np.sqrt(norms)
        xi = max(10.0, np.sqrt(n), n * np.max((1.0 + np.abs(p.b)) / (1.0 + norms), initial=0.0))
        eta = max(10.0, np.sqrt(n), np.max(norms, initial=0.0), np.linalg.norm(c_blk[k]))
        x.append(xi * np.eye(n))
        s.append(eta * np.eye(n))
    return x, s


def _nt_scaling(xb, sb):
    lx = np.linalg.cholesky(xb)
    ls = np.linalg.cholesky(sb)
    _, sv, vt = np.linalg.svd(ls.T @ lx)
    rt = np.sqrt(sv)
    g = (lx @ vt.T) / rt[None, :]
    ginv = (rt[:, None] * vt) @ sla.solve_triangular(lx, np.eye(lx.shape[0]), lower=True)
    w = g @ g.T
    return g, ginv, 0.5 * (w + w.T), sv


def _scaled(dx, ds, scal):
    dxs = [gi @ d @ gi.T for d, (_, gi, _, _) in zip(dx, scal)]
    dss = [g.T @ d @ g for d, (g, _, _, _) in zip(ds, scal)]
    return dxs, dss


def _max_step(dirs, scal):
    """Largest alpha with diag(lam) + alpha * D >= 0 over all blocks."""
    amax = np.inf
    for d, (_, _, _, lam) in zip(dirs, scal):
        r = 1.0 / np.sqrt(lam)
        e = np.linalg.eigvalsh(r[:, None] * d * r[None, :])
        if e[0] < 0:
            amax = min(amax, -1.0 / e[0])
    return amax
