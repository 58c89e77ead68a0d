# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Semantics are defined by ``qrest._fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def schur_complement(const long long[::1] ptr, const long long[::1] rows,
                     const long long[::1] cols, const double[::1] vals,
                     const double[:, ::1] w):
    cdef Py_ssize_t m = ptr.shape[0] - 1
    out_arr = np.zeros((m, m))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k, l
    cdef long long a, b
    cdef double s, v
    with nogil:
        for i in range(m):
            for j in range(i, m):
                s = 0.0
                for k in range(ptr[i], ptr[i + 1]):
                    a = rows[k]
                    b = cols[k]
                    v = vals[k]
                    for l in range(ptr[j], ptr[j + 1]):
                        s += v * vals[l] * w[a, rows[l]] * w[b, cols[l]]
                out[i, j] = s
                out[j, i] = s
    return out_arr


def smo_solve(const double[:, ::1] k, p_in, z_in, cap_in, double tol, long long max_iter):
    cdef Py_ssize_t n = k.shape[0]
    cdef Py_ssize_t nn = p_in.shape[0]
    cdef double[::1] z = np.ascontiguousarray(z_in, dtype=float)
    cdef double[::1] cap = np.ascontiguousarray(cap_in, dtype=float)
    alpha_arr = np.zeros(nn)
    grad_arr = np.array(p_in, dtype=float, copy=True)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] grad = grad_arr
    cdef long long it = 0
    cdef double gap = INFINITY
    cdef double gmax, gmin, yg, bdiff, quad, score, best, kdi
    cdef Py_ssize_t t, i, j, si, sj, s, h
    cdef bint is_up, is_low
    cdef double zi, zj, kij, ai_old, aj_old, ai, aj, ci, cj, delta, diff, total, dai, daj
    cdef double ci_, cj_
    cdef double[::1] kd = np.ascontiguousarray(np.diag(np.asarray(k)))
    cdef const double[:] krow_i
    cdef const double[:] krow_j
    with nogil:
        while it < max_iter:
            gmax = -INFINITY
            gmin = INFINITY
            i = -1
            for t in range(nn):
                yg = -z[t] * grad[t]
                if z[t] > 0:
                    is_up = alpha[t] < cap[t]
                    is_low = alpha[t] > 0
                else:
                    is_up = alpha[t] > 0
                    is_low = alpha[t] < cap[t]
                if is_up and yg > gmax:
                    gmax = yg
                    i = t
                if is_low and yg < gmin:
                    gmin = yg
            if i < 0 or gmin == INFINITY:
                gap = 0.0
                break
            gap = gmax - gmin
            if gap < tol:
                break
            si = i % n
            kdi = kd[si]
            krow_i = k[si]
            j = -1
            best = INFINITY
            for h in range(2):
                for s in range(n):
                    t = s + h * n
                    if z[t] > 0:
                        is_low = alpha[t] > 0
                    else:
                        is_low = alpha[t] < cap[t]
                    if not is_low:
                        continue
                    bdiff = gmax + z[t] * grad[t]
                    if bdiff <= 0:
                        continue
                    quad = kdi + kd[s] - 2.0 * krow_i[s]
                    if quad <= 0:
                        quad = 1e-12
                    score = -(bdiff * bdiff) / quad
                    if score < best:
                        best = score
                        j = t
            if j < 0:
                break
            sj = j % n
            krow_j = k[sj]
            zi = z[i]
            zj = z[j]
            kij = k[si, sj]
            quad = kd[si] + kd[sj] - 2.0 * kij
            if quad <= 0:
                quad = 1e-12
            ai_old = alpha[i]
            aj_old = alpha[j]
            ci = cap[i]
            cj = cap[j]
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
            ci_ = zi * dai
            cj_ = zj * daj
            for h in range(2):
                for s in range(n):
                    t = s + h * n
                    grad[t] += z[t] * (ci_ * krow_i[s] + cj_ * krow_j[s])
            it += 1
    return alpha_arr, grad_arr, int(it), float(gap)
