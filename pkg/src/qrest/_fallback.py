"""Pure numpy versions of the hot kernels.

These mirror ``qrest._ext`` exactly (same arguments, same results up to
floating-point summation order) and are used when the extension is not built.
"""
import numpy as np


def schur_complement(ptr, rows, cols, vals, w):
    """M[i, j] = <A_i, W A_j W> for sparse symmetric A_i stored in full.

    ``A_i`` is given CSR-style: entries ``ptr[i]:ptr[i+1]`` of ``rows``,
    ``cols``, ``vals`` index the global (block-diagonal) matrix.
    """
    ptr = np.asarray(ptr, dtype=np.int64)
    m = ptr.size - 1
    counts = np.diff(ptr)
    out = np.zeros((m, m))
    if m == 0 or counts.max(initial=0) == 0:
        return out
    # group constraints by entry count so padding never wastes work
    for ci in np.unique(counts):
        gi = np.nonzero(counts == ci)[0]
        ri, coli, vi = _gather(ptr, rows, cols, vals, gi, ci)
        for cj in np.unique(counts):
            gj = np.nonzero(counts == cj)[0]
            rj, colj, vj = _gather(ptr, rows, cols, vals, gj, cj)
            blk = np.zeros((gi.size, gj.size))
            for k in range(ci):
                a = ri[:, k][:, None]
                b = coli[:, k][:, None]
                for l in range(cj):
                    blk += (vi[:, k][:, None] * vj[:, l][None, :]) * (
                        w[a, rj[:, l][None, :]] * w[b, colj[:, l][None, :]]
                    )
            out[np.ix_(gi, gj)] = blk
    return out


def _gather(ptr, rows, cols, vals, idx, count):
    sel = ptr[idx][:, None] + np.arange(count)[None, :]
    return rows[sel], cols[sel], vals[sel]


def smo_solve(k, p, z, cap, tol, max_iter):
    """SMO for ``min 1/2 a'Qa + p'a  s.t.  z'a = 0, 0 <= a <= cap``.

    ``Q[t, s] = z[t] z[s] k[t % n, s % n]`` with ``n = k.shape[0]``; the
    problem has ``len(p) == 2n`` variables (SVR / quantile SVR layout).
    Working pair: ``i`` maximises the KKT violation, ``j`` the second-order
    gain.  Returns ``(alpha, grad, iterations, gap)``.
    """
    n = k.shape[0]
    nn = p.size
    kd = np.diag(k)
    src = np.arange(nn) % n
    alpha = np.zeros(nn)
    grad = p.astype(float).copy()
    zpos = z > 0
    it = 0
    gap = np.inf
    while it < max_iter:
        yg = -z * grad
        up = np.where(zpos, alpha < cap, alpha > 0)
        low = np.where(zpos, alpha > 0, alpha < cap)
        if not up.any() or not low.any():
            gap = 0.0
            break
        cand = np.where(up, yg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        gmin = np.min(np.where(low, yg, np.inf))
        gap = gmax - gmin
        if gap < tol:
            break
        si = src[i]
        krow = k[si][src]
        b = gmax - yg
        okj = low & (b > 0)
        a = kd[si] + kd[src] - 2.0 * krow
        a = np.where(a > 0, a, 1e-12)
        score = np.where(okj, -(b * b) / a, np.inf)
        j = int(np.argmin(score))
        if not np.isfinite(score[j]):
            break
        sj = src[j]
        _pair_update(i, j, si, sj, k, kd, z, alpha, grad, cap, src)
        it += 1
    return alpha, grad, it, float(gap)


def _pair_update(i, j, si, sj, k, kd, z, alpha, grad, cap, src):
    zi, zj = z[i], z[j]
    kij = k[si, sj]
    quad = kd[si] + kd[sj] - 2.0 * kij
    if quad <= 0:
        quad = 1e-12
    ai_old, aj_old = alpha[i], alpha[j]
    ci, cj = cap[i], cap[j]
    if zi != zj:
        delta = (-grad[i] - grad[j]) / quad
        diff = ai_old - aj_old
        ai = ai_old + delta
        aj = aj_old + delta
        if diff > 0:
            if aj < 0:
                aj = 0.0
                ai = diff
        else:
            if ai < 0:
                ai = 0.0
                aj = -diff
        if diff > ci - cj:
            if ai > ci:
                ai = ci
                aj = ci - diff
        else:
            if aj > cj:
                aj = cj
                ai = cj + diff
    else:
        delta = (grad[i] - grad[j]) / quad
        total = ai_old + aj_old
        ai = ai_old - delta
        aj = aj_old + delta
        if total > ci:
            if ai > ci:
                ai = ci
                aj = total - ci
        else:
            if aj < 0:
                aj = 0.0
                ai = total
        if total > cj:
            if aj > cj:
                aj = cj
                ai = total - cj
        else:
            if ai < 0:
                ai = 0.0
                aj = total
    dai = ai - ai_old
    daj = aj - aj_old
    alpha[i] = ai
    alpha[j] = aj
    # grad_t += Q[t, i] dai + Q[t, j] daj
    grad += z * (zi * dai * k[si][src] + zj * daj * k[sj][src])
