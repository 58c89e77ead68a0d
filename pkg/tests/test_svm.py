import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrest.errors import MapeUndefined, SchemaMismatch
from qrest.svm import (
    KernelSpec,
    ModelKind,
    Scaler,
    SvrModel,
    TrainConfig,
    _caps,
    evaluate,
    grid_search,
    kfold_indices,
    pinball_loss,
    predict,
    solve_dual,
    train_svqr,
    train_svr,
)


def project_box_hyperplane(v, z, cap):
    """Euclidean projection onto {0 <= a <= cap, z.a = 0} by bisection on the multiplier."""
    lo, hi = -1.0, 1.0
    f = lambda lam: z @ np.clip(v - lam * z, 0, cap)  # noqa: E731
    while f(lo) < 0:
        lo *= 2
    while f(hi) > 0:
        hi *= 2
    while hi - lo > 1e-15 * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * z, 0, cap)


def dense_qp_oracle(k, y, c_up, c_down, eps, iters=200_000, tol=1e-12):
    """Accelerated projected gradient on the 2N-variable dual."""
    n = y.size
    z = np.concatenate([np.ones(n), -np.ones(n)])
    q = np.outer(z, z) * np.tile(k, (2, 2))
    p = np.concatenate([eps - y, eps + y])
    cap = np.concatenate([np.full(n, c_up), np.full(n, c_down)])
    step = 1.0 / max(np.linalg.eigvalsh(q)[-1], 1e-12)
    a = np.zeros(2 * n)
    prev, mom, t = a.copy(), a.copy(), 1.0
    obj = lambda v: 0.5 * v @ q @ v + p @ v  # noqa: E731
    best = obj(a)
    for _ in range(iters):
        a = project_box_hyperplane(mom - step * (q @ mom + p), z, cap)
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        mom = a + (t - 1) / t_next * (a - prev)
        cur = obj(a)
        if abs(best - cur) <= tol * max(1.0, abs(cur)) and cur <= best:
            best = cur
            break
        best = min(best, cur)
        prev, t = a, t_next
    return best


def sin_data(n=200, noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, size=(n, 1))
    return x, np.sin(x[:, 0]) + noise * rng.normal(size=n)


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("kind", [ModelKind.SVR, ModelKind.SVQR])
def test_smo_matches_dense_qp_oracle(seed, kind):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 41))
    x = rng.normal(size=(n, 3))
    y = np.tanh(x[:, 0]) + 0.3 * x[:, 1] + 0.1 * rng.normal(size=n)
    cfg = TrainConfig(c=float(rng.choice([0.5, 2.0, 10.0])), epsilon=0.05, delta=0.2)
    k = KernelSpec("rbf", tau=1.0).gram(x, x)
    c_up, c_down, eps = _caps(kind, cfg)
    _, _, _, gap, obj = solve_dual(k, y, c_up, c_down, eps, 1e-9, 10_000_000)
    assert gap < 1e-9
    want = dense_qp_oracle(k, y, c_up, c_down, eps)
    assert abs(obj - want) <= 1e-6 * max(1.0, abs(want))


def test_constant_target_svr():
    x = np.random.default_rng(1).normal(size=(30, 2))
    y = np.full(30, 0.7)
    m = train_svr(x, y, TrainConfig(c=1000, epsilon=0.01))
    assert m.beta.size == 0
    assert m.bias == pytest.approx(0.7, abs=1e-12)
    assert np.allclose(predict(m, x), 0.7, atol=0.01)


def test_constant_target_svqr_is_exact():
    x = np.random.default_rng(1).normal(size=(30, 2))
    m = train_svqr(x, np.full(30, -0.25), TrainConfig(c=10, delta=0.02))
    assert np.all(predict(m, x) == -0.25)


def test_three_point_linear_example():
    x = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.0, 1.0, 2.0])
    m = train_svr(x, y, TrainConfig(c=1e3, epsilon=1e-3, kernel=KernelSpec("linear"), tol=1e-8), scale=False)
    assert np.allclose(predict(m, x), y, atol=2e-3)


def test_noisy_sine_fit():
    x, y = sin_data()
    m = train_svr(x, y, TrainConfig(c=10, epsilon=0.05, kernel=KernelSpec("rbf", tau=0.5)), scale=False)
    assert np.mean((predict(m, x) - y) ** 2) <= 2 * 0.1**2


def test_kkt_conditions_on_training_set():
    x, y = sin_data(seed=3)
    cfg = TrainConfig(c=5, epsilon=0.05, kernel=KernelSpec("rbf", tau=0.7), tol=1e-6)
    m = train_svr(x, y, cfg, scale=False)
    f = predict(m, x)
    sv = {tuple(row): b for row, b in zip(m.support_x, m.beta)}
    slack = 1e-5
    for xi, yi, fi in zip(x, y, f):
        b = sv.get(tuple(xi), 0.0)
        r = abs(fi - yi)
        if b == 0:
            assert r <= cfg.epsilon + slack
        elif abs(b) < cfg.c * (1 - 1e-9):
            assert abs(r - cfg.epsilon) <= slack
        else:
            assert r >= cfg.epsilon - slack


def test_dual_invariants():
    x, y = sin_data(seed=4)
    m = train_svqr(x, y, TrainConfig(c=10, delta=0.1))
    assert abs(m.beta.sum()) <= 1e-9 * 10
    assert np.all(m.beta <= 10 * 0.1 + 1e-12) and np.all(m.beta >= -10 * 0.9 - 1e-12)


def test_svqr_median_antisymmetry():
    x, y = sin_data(n=80, seed=5)
    cfg = TrainConfig(c=10, delta=0.5, kernel=KernelSpec("rbf", tau=0.8), tol=1e-8)
    up = train_svqr(x, y, cfg)
    down = train_svqr(x, -y, cfg)
    assert np.allclose(predict(up, x), -predict(down, x), atol=1e-5)


def test_svqr_low_quantile_calibration():
    rng = np.random.default_rng(6)
    x = rng.uniform(0, 1, size=(500, 1))
    y = x[:, 0] + rng.uniform(0, 1, 500)
    m = train_svqr(x, y, TrainConfig(c=10, delta=0.02, kernel=KernelSpec("rbf", tau=1.0)))
    assert np.mean(predict(m, x) > y) <= 0.06


def test_svqr_training_overestimate_fraction():
    # 20 synthetic regressions: overestimates stay below delta + 2/sqrt(N) + 0.01
    n, delta = 300, 0.02
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng([7, seed])
        x = rng.uniform(-1, 1, size=(n, 2))
        y = np.sin(2 * x[:, 0]) + x[:, 1] ** 2 + rng.normal(scale=0.2, size=n)
        m = train_svqr(x, y, TrainConfig(c=10, delta=delta, kernel=KernelSpec("rbf", tau=1.0)))
        worst = max(worst, float(np.mean(predict(m, x) > y)))
    assert worst <= delta + 2 / np.sqrt(n) + 0.01


def test_svqr_monotone_in_delta():
    x, y = sin_data(n=150, noise=0.3, seed=7)
    base = dict(c=10, kernel=KernelSpec("rbf", tau=1.0), tol=1e-6)
    lo = predict(train_svqr(x, y, TrainConfig(delta=0.02, **base)), x)
    mid = predict(train_svqr(x, y, TrainConfig(delta=0.5, **base)), x)
    assert np.all(lo <= mid + 1e-3)


def test_pinball_loss():
    assert pinball_loss([1.0], [0.0], 0.1) == pytest.approx(0.1)
    assert pinball_loss([0.0], [1.0], 0.1) == pytest.approx(0.9)


def test_metric_examples():
    rep = evaluate([1.0, 3.0], [2.0, 2.0])
    assert rep.mse == 1.0 and rep.r2 == 0.0 and rep.p_over == 0.5
    assert evaluate([2.0], [1.0]).mape == 0.5
    perfect = evaluate([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (perfect.mse, perfect.mape, perfect.r2, perfect.p_over) == (0.0, 0.0, 1.0, 0.0)


def test_mape_undefined_for_zero_label():
    with pytest.warns(MapeUndefined):
        rep = evaluate([0.0, 1.0], [0.1, 1.0])
    assert rep.mape is None and rep.mse == pytest.approx(0.005)


def test_model_json_roundtrip_is_bit_exact():
    x, y = sin_data(n=60, seed=8)
    m = train_svqr(x, y, TrainConfig(c=3, delta=0.02), schema_id="CoherenceZPatterns:2x2")
    m.target = "GeomCoherence"
    again = SvrModel.from_json(m.to_json())
    assert again.to_json() == m.to_json()
    assert np.array_equal(again.support_x, m.support_x) and np.array_equal(again.beta, m.beta)
    assert again.bias == m.bias and again.target == "GeomCoherence"
    assert np.array_equal(predict(again, x), predict(m, x))


def test_predict_checks_width_and_is_pure():
    x, y = sin_data(n=40, seed=9)
    m = train_svr(x, y, TrainConfig())
    with pytest.raises(SchemaMismatch):
        predict(m, np.zeros((3, 2)))
    batch = predict(m, x)
    assert np.allclose(batch, [predict(m, row) for row in x], atol=1e-14)


def test_bias_only_model():
    m = train_svr(np.zeros((5, 1)), np.full(5, 2.0), TrainConfig(epsilon=0.1))
    assert np.all(predict(m, np.random.default_rng(0).normal(size=(4, 1))) == m.bias)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scaler_roundtrip(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(20, 4)) * rng.uniform(0.01, 100, 4) + rng.normal(size=4)
    x[:, 2] = 1.5  # zero-variance column
    s = Scaler.fit(x)
    assert s.std[2] == 1.0
    assert np.max(np.abs(s.inverse(s.transform(x)) - x)) <= 1e-12 * max(1.0, np.abs(x).max())


def test_kfold_partition():
    parts = kfold_indices(23, 5, seed=1)
    assert sorted(np.concatenate(parts).tolist()) == list(range(23))
    assert [p.tolist() for p in parts] == [p.tolist() for p in kfold_indices(23, 5, seed=1)]


def test_grid_search_single_point():
    x, y = sin_data(n=60)
    cfg, table = grid_search(x, y, {"c": [2.0], "epsilon": [0.02], "tau": [0.7]}, folds=3, seed=0)
    assert (cfg.c, cfg.epsilon, cfg.kernel.tau) == (2.0, 0.02, 0.7)
    assert len(table) == 1


def test_grid_search_prefers_true_bandwidth():
    rng = np.random.default_rng(10)
    centers = rng.normal(size=(6, 2))
    x = rng.normal(size=(150, 2))
    y = KernelSpec("rbf", tau=1.0).gram(x, centers) @ rng.normal(size=6)
    grid = {"c": [10.0], "epsilon": [0.01], "tau": [0.1, 1.0]}
    _, table = grid_search(x, y, grid, folds=3, seed=0)
    mse = {row["tau"]: row["cv_mse"] for row in table}
    assert mse[1.0] <= mse[0.1]


def test_quantile_grid_search_scores_by_pinball_loss():
    x, y = sin_data(n=80)
    grid = {"c": [0.1, 1.0, 10.0], "tau": [0.3, 1.0, 3.0]}
    best, table = grid_search(x, y, grid, folds=3, seed=0, kind="Svqr", base=TrainConfig(delta=0.05))
    winner = min(table, key=lambda r: r["cv_pinball"])
    assert (best.c, best.kernel.tau) == (winner["c"], winner["tau"])
    for row in table:
        assert row["cv_pinball"] >= 0 and row["delta"] == 0.05


def test_grid_search_deterministic_and_tie_break():
    x, y = sin_data(n=50)
    grid = {"c": [1.0, 10.0], "epsilon": [0.5, 0.9], "tau": [1.0]}
    a = grid_search(x, y, grid, folds=3, seed=4)
    b = grid_search(x, y, grid, folds=3, seed=4)
    assert a[0] == b[0] and a[1] == b[1]
    # a tube wider than the signal leaves every cell at the same constant fit
    y0 = np.full(50, 0.3)
    cfg, _ = grid_search(x, y0, grid, folds=3, seed=4)
    assert cfg.c == 1.0 and cfg.epsilon == 0.9


def test_grid_search_workers_match_serial():
    x, y = sin_data(n=60)
    grid = {"c": [1.0, 10.0], "epsilon": [0.05], "tau": [0.5, 1.0]}
    assert grid_search(x, y, grid, folds=3, seed=2, workers=2) == grid_search(x, y, grid, folds=3, seed=2)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("rbf", tau=0.0)
    with pytest.raises(ValueError):
        KernelSpec("poly", degree=0)
    lin = KernelSpec("linear").gram(np.eye(2), np.eye(2))
    assert np.array_equal(lin, np.eye(2))


def test_warning_free_metrics():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        evaluate([1.0, 2.0], [1.5, 2.5])
