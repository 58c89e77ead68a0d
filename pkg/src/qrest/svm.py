"""Kernel support vector regression and support vector quantile regression.

Both models share one dual::

    min  1/2 beta' K beta + eps * sum(a + a*) - y' beta
    s.t. sum(beta) = 0,  0 <= a <= C_up,  0 <= a* <= C_down,  beta = a - a*

SVR uses ``C_up = C_down = C``.  The quantile model comes from the pinball
loss with ``eps = 0``, ``C_up = C * delta`` and ``C_down = C * (1 - delta)``,
so only about a ``delta`` fraction of training labels can lie below the fit.
The dual is solved by SMO (see :mod:`qrest.kernels`).
"""
from __future__ import annotations

import enum
import hashlib
import itertools
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .errors import MapeUndefined, NonConvergence, SchemaMismatch

log = logging.getLogger(__name__)


class ModelKind(str, enum.Enum):
    SVR = "Svr"
    SVQR = "Svqr"


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    tau: float = 1.0
    degree: int = 3
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear", "poly"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.tau > 0:
            raise ValueError("RBF bandwidth must be positive")
        if self.kind == "poly" and self.degree < 1:
            raise ValueError("polynomial degree must be >= 1")

    def gram(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        if self.kind == "linear":
            return a @ b.T
        if self.kind == "poly":
            return (a @ b.T + self.offset) ** self.degree
        sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * self.tau**2))


@dataclass(frozen=True)
class TrainConfig:
    c: float = 10.0
    epsilon: float = 0.01
    delta: float = 0.5
    kernel: KernelSpec = field(default_factory=KernelSpec)
    tol: float = 1e-3
    max_iter: int = 10_000_000

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("C must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if isinstance(self.kernel, dict):
            object.__setattr__(self, "kernel", KernelSpec(**self.kernel))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Scaler":
        x = np.asarray(x, dtype=float)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(x.mean(axis=0), std)

    @classmethod
    def identity(cls, n: int) -> "Scaler":
        return cls(np.zeros(n), np.ones(n))

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def inverse(self, x):
        return np.asarray(x, dtype=float) * self.std + self.mean


@dataclass
class SvrModel:
    kind: ModelKind
    support_x: np.ndarray
    beta: np.ndarray
    bias: float
    kernel: KernelSpec
    scaler: Scaler
    config: TrainConfig
    schema_id: str | None = None
    converged: bool = True
    iterations: int = 0
    dual_objective: float = float("nan")
    manifest_hash: str | None = None
    target: str | None = None

    @property
    def n_features(self) -> int:
        return self.scaler.mean.size

    def decision(self, x: np.ndarray) -> np.ndarray:
        """Predictions for a batch of raw (unscaled) inputs."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_features:
            raise SchemaMismatch(f"model expects {self.n_features} features, got {x.shape[1]}")
        if self.beta.size == 0:
            return np.full(x.shape[0], self.bias)
        xs = self.scaler.transform(x)
        out = np.empty(x.shape[0])
        step = 2048
        for lo in range(0, x.shape[0], step):
            out[lo : lo + step] = self.kernel.gram(xs[lo : lo + step], self.support_x) @ self.beta + self.bias
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "kernel": asdict(self.kernel),
            "scaler": {"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist()},
            "support_x": self.support_x.tolist(),
            "beta": self.beta.tolist(),
            "bias": self.bias,
            "config": self.config.to_dict(),
            "schema": self.schema_id,
            "converged": self.converged,
            "iterations": self.iterations,
            "dual_objective": self.dual_objective,
            "train_manifest_hash": self.manifest_hash,
            "target": self.target,
        }

    def to_json(self) -> str:
        # json writes floats with repr(), which round-trips exactly
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        nfeat = len(d["scaler"]["mean"])
        sx = np.array(d["support_x"], dtype=float).reshape(-1, nfeat)
        return cls(
            kind=ModelKind(d["kind"]),
            support_x=sx,
            beta=np.array(d["beta"], dtype=float),
            bias=float(d["bias"]),
            kernel=KernelSpec(**d["kernel"]),
            scaler=Scaler(np.array(d["scaler"]["mean"], dtype=float), np.array(d["scaler"]["std"], dtype=float)),
            config=TrainConfig(**d["config"]),
            schema_id=d.get("schema"),
            converged=d.get("converged", True),
            iterations=d.get("iterations", 0),
            dual_objective=d.get("dual_objective", float("nan")),
            manifest_hash=d.get("train_manifest_hash"),
            target=d.get("target"),
        )

    @classmethod
    def from_json(cls, s: str) -> "SvrModel":
        return cls.from_dict(json.loads(s))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def predict(model: SvrModel, x) -> float | np.ndarray:
    """Scalar input gives a float, a 2-D batch gives an array."""
    arr = np.asarray(x, dtype=float)
    out = model.decision(arr)
    return float(out[0]) if arr.ndim == 1 else out


def _caps(kind: ModelKind, cfg: TrainConfig) -> tuple[float, float, float]:
    if kind is ModelKind.SVR:
        return cfg.c, cfg.c, cfg.epsilon
    return cfg.c * cfg.delta, cfg.c * (1.0 - cfg.delta), 0.0


def solve_dual(k: np.ndarray, y: np.ndarray, c_up: float, c_down: float, eps: float, tol: float, max_iter: int, backend=None):
    """Run SMO on a precomputed kernel; returns ``(beta, bias, iters, gap, objective)``."""
    n = y.size
    p = np.concatenate([eps - y, eps + y])
    z = np.concatenate([np.ones(n), -np.ones(n)])
    cap = np.concatenate([np.full(n, c_up), np.full(n, c_down)])
    alpha, grad, iters, gap = kernels.smo_solve(k, p, z, cap, tol, max_iter, backend=backend)
    beta = alpha[:n] - alpha[n:]
    bias = -_rho(alpha, grad, z, cap)
    obj = 0.5 * float(alpha @ (grad + p))
    return beta, bias, iters, gap, obj


def _rho(alpha, grad, z, cap):
    yg = z * grad
    at_ub = alpha >= cap
    at_lb = alpha <= 0
    free = ~(at_ub | at_lb)
    if free.any():
        return float(yg[free].mean())
    ub_mask = (at_ub & (z < 0)) | (at_lb & (z > 0))
    lb_mask = (at_ub & (z > 0)) | (at_lb & (z < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return float(0.5 * (ub + lb))


def _train(x, y, cfg: TrainConfig, kind: ModelKind, scale: bool, schema_id, backend) -> SvrModel:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.size or y.size < 2:
        raise ValueError("need at least two samples with matching labels")
    scaler = Scaler.fit(x) if scale else Scaler.identity(x.shape[1])
    xs = scaler.transform(x)
    c_up, c_down, eps = _caps(kind, cfg)
    k = cfg.kernel.gram(xs, xs)
    beta, bias, iters, gap, obj = solve_dual(k, y, c_up, c_down, eps, cfg.tol, cfg.max_iter, backend)
    del k
    converged = gap < cfg.tol
    sv = beta != 0
    model = SvrModel(
        kind=kind,
        support_x=xs[sv],
        beta=beta[sv],
        bias=bias,
        kernel=cfg.kernel,
        scaler=scaler,
        config=cfg,
        schema_id=schema_id,
        converged=converged,
        iterations=iters,
        dual_objective=obj,
    )
    check_dual_feasible(model)
    if not converged:
        log.warning("SMO stopped after %d iterations with KKT gap %.3e", iters, gap)
    return model


def check_dual_feasible(model: SvrModel, slack: float = 1e-9):
    c_up, c_down, _ = _caps(model.kind, model.config)
    scale = max(1.0, c_up, c_down)
    if abs(model.beta.sum()) > slack * scale * max(1, model.beta.size):
        raise AssertionError(f"sum(beta) = {model.beta.sum():.3e}")
    if np.any(model.beta > c_up * (1 + 1e-12)) or np.any(model.beta < -c_down * (1 + 1e-12)):
        raise AssertionError("dual coefficient outside its box")


def train_svr(x, y, cfg: TrainConfig, *, scale: bool = True, schema_id=None, backend=None, strict=False) -> SvrModel:
    """epsilon-insensitive SVR."""
    model = _train(x, y, cfg, ModelKind.SVR, scale, schema_id, backend)
    if strict and not model.converged:
        raise NonConvergence("SVR did not converge", model)
    return model


def train_svqr(x, y, cfg: TrainConfig, *, scale: bool = True, schema_id=None, backend=None, strict=False) -> SvrModel:
    """Quantile SVR with pinball loss at level ``cfg.delta``."""
    model = _train(x, y, cfg, ModelKind.SVQR, scale, schema_id, backend)
    if strict and not model.converged:
        raise NonConvergence("SVQR did not converge", model)
    return model


@dataclass(frozen=True)
class EvalReport:
    mse: float
    mape: float | None
    r2: float
    p_over: float
    n: int

    def to_dict(self):
        return asdict(self)


def evaluate(y_true, y_pred) -> EvalReport:
    """MSE, MAPE, R^2 and the fraction of strict overestimates."""
    y = np.asarray(y_true, dtype=float).ravel()
    f = np.asarray(y_pred, dtype=float).ravel()
    if y.size != f.size or y.size < 1:
        raise ValueError("y_true and y_pred must be non-empty and equally long")
    resid = f - y
    mse = float(np.mean(resid**2))
    if np.any(y == 0):
        warnings.warn("MAPE undefined: a true label is exactly zero", MapeUndefined, stacklevel=2)
        mape = None
    else:
        mape = float(np.mean(np.abs(resid) / np.abs(y)))
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else float("nan")
    p_over = float(np.mean(f > y))
    return EvalReport(mse, mape, r2, p_over, int(y.size))


DEFAULT_GRID = {
    "c": [0.1, 1.0, 10.0, 100.0, 1000.0],
    "epsilon": [0.001, 0.01, 0.05, 0.1],
    "tau": [0.1, 0.5, 1.0, 2.0, 5.0],
}


def kfold_indices(n: int, folds: int, seed) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def _cv_unit(args):
    """SSE and summed pinball loss per (c, eps, delta) cell for one fold and one bandwidth."""
    x, y, test, kern, cells, kind, base, backend = args
    train = np.setdiff1d(np.arange(y.size), test)
    scaler = Scaler.fit(x[train])
    xtr, xte = scaler.transform(x[train]), scaler.transform(x[test])
    ktr = kern.gram(xtr, xtr)
    kte = kern.gram(xte, xtr)
    out = []
    for c, eps, delta in cells:
        cfg = replace(base, c=c, epsilon=eps, delta=delta, kernel=kern)
        c_up, c_down, e = _caps(kind, cfg)
        beta, bias, _, gap, _ = solve_dual(ktr, y[train], c_up, c_down, e, cfg.tol, cfg.max_iter, backend)
        pred = kte @ beta + bias
        sse = float(np.sum((pred - y[test]) ** 2))
        pin = pinball_loss(y[test], pred, delta) * test.size
        out.append(((c, eps, kern.tau, delta), sse, pin, test.size, gap < cfg.tol))
    return out


def grid_search(
    x,
    y,
    grid: dict | None = None,
    folds: int = 5,
    seed=0,
    kind: ModelKind | str = ModelKind.SVR,
    base: TrainConfig | None = None,
    backend=None,
    workers: int = 1,
):
    """Exhaustive k-fold search; returns ``(best config, table of rows)``.

    Ties go to the smaller C, then the larger epsilon.  SVR cells are scored
    by CV MSE.  Quantile cells are scored by CV pinball loss at their own
    delta, since MSE favours near-interpolating fits whose test residuals no
    longer sit at the requested quantile.  For the quantile model
    ``epsilon`` is ignored and ``delta`` may be listed in the grid.
    Each (fold, bandwidth) pair is an independent unit of work, so
    ``workers > 1`` fans them out over processes.
    """
    if folds < 2:
        raise ValueError("need at least two folds")
    kind = ModelKind(kind)
    grid = dict(DEFAULT_GRID if grid is None else grid)
    base = base or TrainConfig()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    cs = sorted(grid.get("c", [base.c]))
    epss = sorted(grid.get("epsilon", [base.epsilon])) if kind is ModelKind.SVR else [base.epsilon]
    taus = sorted(grid.get("tau", [base.kernel.tau]))
    deltas = sorted(grid.get("delta", [base.delta]))
    if not (cs and epss and taus and deltas):
        raise ValueError("grid must be non-empty")
    cells = list(itertools.product(cs, epss, deltas))
    units = [
        (x, y, test, replace(base.kernel, tau=tau), cells, kind, base, backend)
        for test in kfold_indices(y.size, folds, seed)
        for tau in taus
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cv_unit, units))
    else:
        results = [_cv_unit(u) for u in units]
    sums: dict[tuple, list] = {}
    for part in results:
        for key, sse, pin, cnt, conv in part:
            acc = sums.setdefault(key, [0.0, 0.0, 0, True])
            acc[0] += sse
            acc[1] += pin
            acc[2] += cnt
            acc[3] = acc[3] and conv
    table = []
    for (c, eps, tau, delta), (sse, pin, cnt, conv) in sorted(sums.items()):
        table.append(
            {"c": c, "epsilon": eps, "tau": tau, "delta": delta, "cv_mse": sse / cnt, "cv_pinball": pin / cnt, "converged": conv}
        )
    score = "cv_mse" if kind is ModelKind.SVR else "cv_pinball"
    best = min(table, key=lambda r: (r[score], r["c"], -r["epsilon"], r["tau"], r["delta"]))
    cfg = replace(base, c=best["c"], epsilon=best["epsilon"], delta=best["delta"], kernel=replace(base.kernel, tau=best["tau"]))
    return cfg, table


def pinball_loss(y, f, delta: float) -> float:
    r = np.asarray(y, dtype=float) - np.asarray(f, dtype=float)
    return float(np.mean(np.where(r > 0, delta * r, (delta - 1.0) * r)))
