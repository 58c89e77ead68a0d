import numpy as np
import pytest

from qrest import kernels
from qrest.qcore import DensityMatrix
from qrest.sdp import max_fidelity_ppt
from qrest.sdp.programs import _Lmi
from qrest.svm import KernelSpec, solve_dual

needs_ext = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")


def random_csr(rng, m, n):
    ptr, rows, cols, vals = [0], [], [], []
    for _ in range(m):
        k = int(rng.integers(1, 6))
        r = rng.integers(0, n, k)
        c = rng.integers(0, n, k)
        rows += list(r) + list(c)
        cols += list(c) + list(r)
        v = rng.normal(size=k)
        vals += list(v) + list(v)
        ptr.append(len(rows))
    return map(np.asarray, (ptr, rows, cols, vals))


def dense_schur(ptr, rows, cols, vals, w, n):
    mats = []
    for i in range(len(ptr) - 1):
        a = np.zeros((n, n))
        np.add.at(a, (rows[ptr[i] : ptr[i + 1]], cols[ptr[i] : ptr[i + 1]]), vals[ptr[i] : ptr[i + 1]])
        mats.append(a)
    return np.array([[np.sum(a * (w @ b @ w)) for b in mats] for a in mats])


def test_python_schur_matches_dense(rng):
    n = 7
    ptr, rows, cols, vals = random_csr(rng, 12, n)
    g = rng.normal(size=(n, n))
    w = g @ g.T
    got = kernels.schur_complement(ptr, rows, cols, vals, w, backend="python")
    assert np.allclose(got, dense_schur(ptr, rows, cols, vals, w, n), atol=1e-10)


@needs_ext
def test_backends_agree_on_schur(rng):
    n = 20
    ptr, rows, cols, vals = random_csr(rng, 40, n)
    g = rng.normal(size=(n, n))
    w = g @ g.T
    a = kernels.schur_complement(ptr, rows, cols, vals, w, backend="python")
    b = kernels.schur_complement(ptr, rows, cols, vals, w, backend="cython")
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@needs_ext
@pytest.mark.parametrize("eps,caps", [(0.05, (2.0, 2.0)), (0.0, (0.2, 9.8))])
def test_backends_agree_on_smo(eps, caps):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(120, 3))
    y = np.sin(x[:, 0]) + 0.1 * rng.normal(size=120)
    k = KernelSpec("rbf", tau=1.0).gram(x, x)
    a = solve_dual(k, y, *caps, eps, 1e-6, 100_000, backend="python")
    b = solve_dual(k, y, *caps, eps, 1e-6, 100_000, backend="cython")
    assert a[2] == b[2]  # identical iteration count
    assert np.allclose(a[0], b[0], atol=1e-10)
    assert a[1] == pytest.approx(b[1], abs=1e-10)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.smo_solve(np.eye(2), np.zeros(4), np.array([1.0, 1, -1, -1]), np.ones(4), 1e-3, 10, backend="fortran")


def test_lmi_builder_merges_duplicates():
    lmi = _Lmi([2])
    v = lmi.new_vars(np.zeros(1))
    lmi.add(v, 0, np.array([0]), np.array([0]), 1.0)
    lmi.add(v, 0, np.array([0]), np.array([0]), 1.0)
    lmi.const[0][:] = np.eye(2)
    prob = lmi.build()
    a = prob.adjoint(np.array([1.0]))
    # realified: the real part appears on both diagonal copies, sign flipped into S = C - A*y
    assert a[0, 0] == -2.0 and a[2, 2] == -2.0
    assert np.count_nonzero(a) == 2


def test_ppt_value_independent_of_backend(monkeypatch):
    rho = DensityMatrix(np.eye(9) / 9 * 0.5 + 0.5 * np.diag([1.0] + [0] * 8), (3, 3))
    ref = max_fidelity_ppt(rho)
    monkeypatch.setattr(kernels, "_impl", kernels._fallback)
    assert max_fidelity_ppt(rho) == pytest.approx(ref, abs=1e-9)
