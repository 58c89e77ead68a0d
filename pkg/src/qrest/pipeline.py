"""Dataset generation, labeling, training and evaluation with on-disk artifacts.

Datasets are JSON Lines files, one record per line, sorted by ``id``::

    {"id": ..., "recipe": {...}, "schema": "...", "features": [...],
     "label": {"GeomCoherence": 0.12}, "method": {"GeomCoherence": "SDP"},
     "split": "train"}

Every artifact gets a sibling ``<name>.manifest.json`` that records the
seed, parameters, tolerances and content hashes of inputs and outputs.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import measures, svm
from .errors import (
    FailureBudgetExceeded,
    MapeUndefined,
    MissingArtifacts,
    SchemaMismatch,
    SolverFailure,
    UnsupportedSystem,
)
from .features import FeatureSchema, SchemaKind, features_for, perturb_array
from .measures import Measure
from .states import Family, StateRecipe

log = logging.getLogger(__name__)

TRAIN, TEST = "train", "test"
TRAIN_FRACTION = 0.75
COHERENCE_MEASURES = (Measure.L1_COHERENCE, Measure.REL_ENT_COHERENCE, Measure.GEOM_COHERENCE)
ENTANGLEMENT_MEASURES = (Measure.GEOM_ENTANGLEMENT,)
# pure-state count in each convex mixture, by qubit number
MIXTURE_TERMS = {2: 8, 3: 6, 4: 35, 5: 50}


@dataclass(frozen=True)
class SystemSpec:
    name: str
    dims: tuple
    schema: SchemaKind
    default_count: int
    split: str  # "random", "train" or "test"
    sampler: str

    @property
    def measures(self):
        return COHERENCE_MEASURES if self.schema is SchemaKind.COHERENCE else ENTANGLEMENT_MEASURES


def _coh(n):
    return SystemSpec(f"coherence-{n}q", (2,) * n, SchemaKind.COHERENCE, 10_000, "random", "coherence")


SYSTEMS = {
    s.name: s
    for s in [
        _coh(2),
        _coh(3),
        _coh(4),
        _coh(5),
        SystemSpec("qutrit-class1", (3, 3), SchemaKind.ENTANGLEMENT, 9048, TRAIN, "class1"),
        SystemSpec("qutrit-class1-general", (3, 3), SchemaKind.ENTANGLEMENT, 2000, TEST, "class1"),
        SystemSpec("qutrit-class1-werner", (3, 3), SchemaKind.ENTANGLEMENT, 2000, TEST, "werner"),
        SystemSpec("qutrit-class1-isotropic", (3, 3), SchemaKind.ENTANGLEMENT, 2000, TEST, "isotropic"),
        SystemSpec("qutrit-class1-noisy-pure", (3, 3), SchemaKind.ENTANGLEMENT, 2000, TEST, "noisy-pure"),
        SystemSpec("qutrit-pair", (3, 3), SchemaKind.ENTANGLEMENT, 5000, "random", "separable-mix"),
        SystemSpec("4x4", (4, 4), SchemaKind.ENTANGLEMENT, 5000, "random", "separable-mix"),
        SystemSpec("4-qubit", (2, 2, 2, 2), SchemaKind.ENTANGLEMENT, 5000, "random", "separable-mix"),
    ]
}


def get_system(name: str) -> SystemSpec:
    try:
        return SYSTEMS[name]
    except KeyError:
        raise UnsupportedSystem(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None


# ---------------------------------------------------------------- hashing & IO


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_hash(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_records(records) -> str:
    ordered = sorted(records, key=lambda r: r["id"])
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in ordered)


def write_records(path, records):
    _atomic_write(path, dumps_records(records))


def read_records(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifacts(f"dataset not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def manifest_path(artifact) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + ".manifest.json")


@dataclass
class RunManifest:
    """Provenance for one artifact: the ordered stages that produced it."""

    artifact: str
    master_seed: int | None = None
    system: str | None = None
    stages: list = field(default_factory=list)

    def add_stage(self, command: str, params: dict, outputs: dict, inputs: dict | None = None, **extra):
        stage = {
            "command": command,
            "params": params,
            "inputs": inputs or {},
            "outputs": outputs,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        stage.update(extra)
        self.stages.append(stage)

    def to_dict(self):
        return {"artifact": self.artifact, "master_seed": self.master_seed, "system": self.system, "stages": self.stages}

    def save(self):
        _atomic_write(manifest_path(self.artifact), json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, artifact) -> "RunManifest":
        p = manifest_path(artifact)
        if not p.exists():
            return cls(str(artifact))
        d = json.loads(p.read_text())
        return cls(d["artifact"], d.get("master_seed"), d.get("system"), d.get("stages", []))


# ---------------------------------------------------------------- generation


def _system_code(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")


def record_seeds(seed: int, system: str, count: int) -> np.ndarray:
    """Independent 64-bit seeds, one per record, derived from the master seed."""
    ss = np.random.SeedSequence([int(seed), _system_code(system)])
    return ss.generate_state(count, dtype=np.uint64) if count else np.zeros(0, dtype=np.uint64)


def _cplx(rng, n):
    return list(rng.normal(size=n) + 1j * rng.normal(size=n))


def _class1_base(kind: Family, rng, seed):
    dims = (3, 3)
    if kind is Family.WERNER:
        return StateRecipe(kind, dims, {"f": float(rng.uniform(-1, 1))})
    if kind is Family.ISOTROPIC:
        return StateRecipe(kind, dims, {"F": float(rng.uniform(0, 1))})
    if kind is Family.HAAR_PURE:
        return StateRecipe(kind, dims, {}, seed)
    if kind is Family.PHI1_NOISY:
        return StateRecipe(kind, dims, {"b_diag": _cplx(rng, 3), "b_off": _cplx(rng, 3), "p": float(rng.uniform())})
    return StateRecipe(kind, dims, {"b_diag": _cplx(rng, 3), "p": float(rng.uniform())})


_CLASS1_BASES = (Family.WERNER, Family.ISOTROPIC, Family.HAAR_PURE, Family.PHI1_NOISY, Family.PHI2_NOISY)


def _block_sizes(count: int, fractions) -> list[int]:
    sizes = [int(round(count * f)) for f in fractions[:-1]]
    return sizes + [count - sum(sizes)]


def make_recipes(spec: SystemSpec, count: int, seed: int) -> list[StateRecipe]:
    """Recipes for ``count`` states of one system, in generation order."""
    seeds = record_seeds(seed, spec.name, count)
    out = []
    if spec.sampler == "coherence":
        n = len(spec.dims)
        families = []
        for fam, size in zip(
            (Family.CONVEX_MIXTURE, Family.HAAR_PURE, Family.PURE_DIAG_MIX), _block_sizes(count, (0.6, 0.2, 0.2))
        ):
            families += [fam] * size
        for fam, s in zip(families, seeds):
            params = {"k": MIXTURE_TERMS[n]} if fam is Family.CONVEX_MIXTURE else {}
            out.append(StateRecipe(fam, spec.dims, params, int(s)))
        return out
    if spec.sampler == "class1":
        # five base families, each once as is and once under a random local unitary
        groups = [(f, False) for f in _CLASS1_BASES] + [(f, True) for f in _CLASS1_BASES]
        sizes = [len(a) for a in np.array_split(np.arange(count), len(groups))]
        i = 0
        for (fam, orbit), size in zip(groups, sizes):
            for _ in range(size):
                s = int(seeds[i])
                rng = np.random.default_rng(s)
                base = _class1_base(fam, rng, int(rng.integers(2**63)))
                if orbit:
                    base = StateRecipe(Family.LOCAL_UNITARY_ORBIT, spec.dims, {"base": base.to_dict()}, s)
                out.append(base)
                i += 1
        return out
    for s in seeds:
        s = int(s)
        rng = np.random.default_rng(s)
        if spec.sampler == "werner":
            out.append(StateRecipe(Family.WERNER, spec.dims, {"f": float(rng.uniform(-1, 1))}))
        elif spec.sampler == "isotropic":
            out.append(StateRecipe(Family.ISOTROPIC, spec.dims, {"F": float(rng.uniform(0, 1))}))
        elif spec.sampler == "noisy-pure":
            out.append(StateRecipe(Family.PURE_NOISY, spec.dims, {"p": float(rng.uniform())}, int(rng.integers(2**63))))
        else:
            out.append(StateRecipe(Family.SEPARABLE_MIX, spec.dims, {}, s))
    return out


def record_id(system: str, index: int, recipe: StateRecipe) -> str:
    return sha256_bytes(f"{system}:{index}:{recipe.to_json()}".encode())[:16]


def assign_splits(ids, split_seed: int, fraction: float = TRAIN_FRACTION) -> dict[str, str]:
    """Deterministic 75/25 split.

    Ids are ranked by a keyed hash, so the result depends only on the id
    set and ``split_seed``; the train count is ``round(fraction * n)``.
    """
    ids = sorted(ids)
    keyed = sorted(ids, key=lambda i: sha256_bytes(f"{split_seed}:{i}".encode()))
    n_train = int(round(fraction * len(ids)))
    train = set(keyed[:n_train])
    return {i: TRAIN if i in train else TEST for i in ids}


def generate_dataset(system: str, count: int | None, seed: int, split_seed: int | None = None) -> list[dict]:
    spec = get_system(system)
    count = spec.default_count if count is None else int(count)
    if count < 0:
        raise ValueError("count must be non-negative")
    schema = FeatureSchema.entanglement(spec.dims) if spec.schema is SchemaKind.ENTANGLEMENT else FeatureSchema.coherence(len(spec.dims))
    records = []
    for i, rec in enumerate(make_recipes(spec, count, seed)):
        rho = rec.build()
        fv = features_for(rho, spec.schema)
        records.append(
            {
                "id": record_id(spec.name, i, rec),
                "recipe": rec.to_dict(),
                "schema": schema.id,
                "features": fv.values.tolist(),
                "label": {},
                "method": {},
                "split": None,
            }
        )
    if spec.split == "random":
        splits = assign_splits([r["id"] for r in records], seed if split_seed is None else split_seed)
        for r in records:
            r["split"] = splits[r["id"]]
    else:
        for r in records:
            r["split"] = spec.split
    return sorted(records, key=lambda r: r["id"])


def family_counts(records) -> dict[str, int]:
    out: dict[str, int] = {}
    for r in records:
        fam = r["recipe"]["family"]
        if fam == Family.LOCAL_UNITARY_ORBIT.value:
            fam = f"{fam}({r['recipe']['params']['base']['family']})"
        out[fam] = out.get(fam, 0) + 1
    return dict(sorted(out.items()))


def cmd_gen(system: str, count: int | None, seed: int, out_dir, name: str | None = None, split_seed=None) -> Path:
    t0 = time.perf_counter()
    records = generate_dataset(system, count, seed, split_seed)
    path = Path(out_dir) / f"{name or system}.jsonl"
    write_records(path, records)
    man = RunManifest(str(path), seed, system)
    man.add_stage(
        "gen",
        {"system": system, "count": len(records), "seed": seed, "split_seed": seed if split_seed is None else split_seed},
        {path.name: file_hash(path)},
        families=family_counts(records),
        splits={s: sum(r["split"] == s for r in records) for s in (TRAIN, TEST)},
        elapsed_s=round(time.perf_counter() - t0, 3),
    )
    man.save()
    return path


# ---------------------------------------------------------------- labeling


def parse_measure(name) -> Measure:
    aliases = {
        "l1": Measure.L1_COHERENCE,
        "relent": Measure.REL_ENT_COHERENCE,
        "geom": Measure.GEOM_COHERENCE,
        "cg": Measure.GEOM_COHERENCE,
        "eg": Measure.GEOM_ENTANGLEMENT,
    }
    if isinstance(name, Measure):
        return name
    return aliases.get(str(name).lower()) or Measure(name)


def _label_one(args):
    recipe, measure, tol = args
    try:
        rho = StateRecipe.from_dict(recipe).build()
        lab = measures.label(rho, measure, tol)
        return lab.value, lab.method.value, None
    except SolverFailure as exc:
        return None, "Failed", str(exc)


def label_records(records, measure, tol: float = 1e-7, workers: int = 1, force: bool = False, checkpoint=None, every: int = 200):
    """Attach labels for ``measure`` in place; returns the number of failures.

    Records that already carry the label are skipped unless ``force``.
    ``checkpoint(records)`` is called every ``every`` newly labeled records.
    """
    measure = parse_measure(measure)
    todo = [r for r in records if force or r["label"].get(measure.value) is None]
    failures = 0

    def apply(rec, res):
        nonlocal failures
        value, method, err = res
        rec["label"][measure.value] = value
        rec["method"][measure.value] = method
        errs = rec.pop("error", {}) or {}
        errs.pop(measure.value, None)
        if err is not None:
            failures += 1
            errs[measure.value] = err
        if errs:
            rec["error"] = errs

    jobs = [(r["recipe"], measure, tol) for r in todo]
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 and len(jobs) > 1 else None
    try:
        for lo in range(0, len(todo), every):
            chunk = jobs[lo : lo + every]
            if pool is not None:
                results = list(pool.map(_label_one, chunk, chunksize=max(1, len(chunk) // (4 * workers))))
            else:
                results = [_label_one(j) for j in chunk]
            for rec, res in zip(todo[lo : lo + every], results):
                apply(rec, res)
            if checkpoint is not None:
                checkpoint(records)
    finally:
        if pool is not None:
            pool.shutdown()
    return failures


def _measures_for(records, measure):
    if measure != "all":
        return [parse_measure(measure)]
    if not records:
        return []
    kind = FeatureSchema.from_id(records[0]["schema"]).kind
    return list(COHERENCE_MEASURES if kind is SchemaKind.COHERENCE else ENTANGLEMENT_MEASURES)


def cmd_label(dataset, measure="all", tol: float = 1e-7, workers: int = 1, failure_budget: float = 0.01, force=False):
    """Label a dataset file in place, checkpointing as it goes."""
    path = Path(dataset)
    before = file_hash(path) if path.exists() else None
    records = read_records(path)
    summary = {}
    t0 = time.perf_counter()
    for m in _measures_for(records, measure):
        summary[m.value] = label_records(records, m, tol, workers, force, checkpoint=lambda rs: write_records(path, rs))
    write_records(path, records)
    man = RunManifest.load(path)
    man.add_stage(
        "label",
        {"measure": measure, "tol": tol, "workers": workers, "force": force, "failure_budget": failure_budget},
        {path.name: file_hash(path)},
        inputs={path.name: before},
        failures=summary,
        elapsed_s=round(time.perf_counter() - t0, 3),
    )
    man.save()
    budget = failure_budget * max(len(records), 1)
    over = {k: v for k, v in summary.items() if v > budget}
    if over:
        raise FailureBudgetExceeded(f"solver failures {over} exceed budget of {budget:g} records")
    return path, summary


# ---------------------------------------------------------------- training & evaluation


def design_matrix(records, measure, split=None):
    """Features and labels of labeled, unfailed records in ``split`` (all if None)."""
    measure = parse_measure(measure)
    rows = [
        r
        for r in records
        if (split is None or r["split"] == split) and r["label"].get(measure.value) is not None
    ]
    schema = {r["schema"] for r in rows}
    if len(schema) > 1:
        raise SchemaMismatch(f"mixed schemas in dataset: {sorted(schema)}")
    x = np.array([r["features"] for r in rows], dtype=float).reshape(len(rows), -1)
    y = np.array([r["label"][measure.value] for r in rows], dtype=float)
    return rows, x, y, (schema.pop() if schema else None)


def parse_grid(text: str | None) -> dict | None:
    """``"default"``, ``"none"`` or ``"c=1,10;epsilon=0.01;tau=0.5,1"``."""
    if text is None or text == "none":
        return None
    if text == "default":
        return dict(svm.DEFAULT_GRID)
    grid = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        key, vals = part.split("=")
        key = key.strip()
        if key not in ("c", "epsilon", "tau", "delta"):
            raise ValueError(f"unknown grid key {key!r}")
        grid[key] = [float(v) for v in vals.split(",")]
    return grid


def parse_kind(kind) -> svm.ModelKind:
    if isinstance(kind, svm.ModelKind):
        return kind
    return svm.ModelKind(str(kind).capitalize())


def train_model(
    records,
    measure,
    kind="svr",
    grid=None,
    folds: int = 5,
    seed: int = 0,
    base: svm.TrainConfig | None = None,
    cv_max: int | None = None,
    workers: int = 1,
):
    """Grid-search (optionally on a subsample) then fit on the whole train split."""
    measure = parse_measure(measure)
    kind = parse_kind(kind)
    rows, x, y, schema_id = design_matrix(records, measure, TRAIN)
    if y.size < 2:
        raise ValueError(f"need at least two labeled training records for {measure.value}")
    base = base or svm.TrainConfig()
    table = []
    if grid:
        idx = np.arange(y.size)
        if cv_max is not None and y.size > cv_max:
            idx = np.sort(np.random.default_rng(seed).choice(y.size, cv_max, replace=False))
        base, table = svm.grid_search(x[idx], y[idx], grid, folds, seed, kind, base, workers=workers)
    fit = svm.train_svr if kind is svm.ModelKind.SVR else svm.train_svqr
    model = fit(x, y, base, schema_id=schema_id)
    model.target = measure.value
    return model, table


def _stem(path) -> str:
    name = Path(path).name
    for suffix in (".model.json", ".jsonl", ".json"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def _csv_text(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_train(dataset, measure, kind, grid, folds, seed, out_dir, base=None, cv_max=None, workers=1) -> Path:
    t0 = time.perf_counter()
    dataset = Path(dataset)
    records = read_records(dataset)
    model, table = train_model(records, measure, kind, grid, folds, seed, base, cv_max, workers)
    model.manifest_hash = file_hash(dataset)
    tag = f"{_stem(dataset)}.{model.target}.{model.kind.value.lower()}"
    path = Path(out_dir) / f"{tag}.model.json"
    _atomic_write(path, model.to_json() + "\n")
    cv_path = Path(out_dir) / f"{tag}.cv.csv"
    cols = ["c", "epsilon", "tau", "delta", "cv_mse", "cv_pinball", "converged"]
    _atomic_write(cv_path, _csv_text([[r[c] for c in cols] for r in table], cols))
    src = RunManifest.load(dataset)
    man = RunManifest(str(path), seed, src.system)
    man.add_stage(
        "train",
        {
            "measure": model.target,
            "kind": model.kind.value,
            "grid": grid,
            "folds": folds,
            "seed": seed,
            "cv_max": cv_max,
            "config": model.config.to_dict(),
        },
        {path.name: file_hash(path), cv_path.name: file_hash(cv_path)},
        inputs={dataset.name: model.manifest_hash},
        converged=model.converged,
        iterations=model.iterations,
        n_support=int(model.beta.size),
        elapsed_s=round(time.perf_counter() - t0, 3),
    )
    man.save()
    return path


def load_model(path) -> svm.SvrModel:
    path = Path(path)
    if not path.exists():
        raise MissingArtifacts(f"model not found: {path}")
    return svm.SvrModel.from_json(path.read_text())


def evaluate_model(model: svm.SvrModel, records, split=TEST, level: float = 0.0, seed: int = 0):
    """Predictions and metrics on one split, optionally with perturbed features."""
    if not model.target:
        raise ValueError("model has no target measure")
    rows, x, y, schema_id = design_matrix(records, model.target, None if split == "all" else split)
    if not rows:
        raise ValueError(f"no labeled {split} records to evaluate")
    if model.schema_id and schema_id != model.schema_id:
        raise SchemaMismatch(f"model schema {model.schema_id} does not match dataset schema {schema_id}")
    if level > 0:
        x = perturb_array(FeatureSchema.from_id(schema_id), x, level, np.random.default_rng(seed))
    pred = model.decision(x)
    rep = svm.evaluate(y, pred) if np.all(y != 0) else _evaluate_quiet(y, pred)
    return rows, y, pred, rep


def _evaluate_quiet(y, pred):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MapeUndefined)
        return svm.evaluate(y, pred)


def cmd_eval(model_path, dataset, out_dir, split=TEST, level: float = 0.0, seed: int = 0) -> Path:
    model_path, dataset = Path(model_path), Path(dataset)
    model = load_model(model_path)
    records = read_records(dataset)
    rows, y, pred, rep = evaluate_model(model, records, split, level, seed)
    tag = f"{_stem(model_path)}.on.{_stem(dataset)}.{split}"
    if level > 0:
        tag += f".noise{level:g}"
    pred_path = Path(out_dir) / f"{tag}.predictions.csv"
    _atomic_write(
        pred_path,
        _csv_text([[r["id"], repr(float(t)), repr(float(p)), repr(float(p - t))] for r, t, p in zip(rows, y, pred)], ["id", "true", "predicted", "residual"]),
    )
    src = RunManifest.load(dataset)
    report = {
        "system": src.system or _stem(dataset),
        "dataset": dataset.name,
        "schema": model.schema_id,
        "measure": model.target,
        "model": model.kind.value,
        "model_digest": model.digest(),
        "split": split,
        "noise": level,
        "noise_seed": seed if level > 0 else None,
        "metrics": rep.to_dict(),
    }
    rep_path = Path(out_dir) / f"{tag}.report.json"
    _atomic_write(rep_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    man = RunManifest(str(rep_path), seed, report["system"])
    man.add_stage(
        "perturb-eval" if level > 0 else "eval",
        {"split": split, "level": level, "seed": seed},
        {rep_path.name: file_hash(rep_path), pred_path.name: file_hash(pred_path)},
        inputs={model_path.name: file_hash(model_path), dataset.name: file_hash(dataset)},
    )
    man.save()
    return rep_path


# ---------------------------------------------------------------- reporting

_MEASURE_ORDER = {m.value: i for i, m in enumerate(Measure)}
REPORT_COLUMNS = ["system", "dataset", "split", "noise", "measure", "model", "n", "mse", "mape", "r2", "p_over"]


def collect_reports(run_dir) -> list[dict]:
    run_dir = Path(run_dir)
    paths = sorted(run_dir.glob("*.report.json")) if run_dir.is_dir() else []
    if not paths:
        raise MissingArtifacts(f"no *.report.json files in {run_dir}; run `qrest eval` first")
    rows = []
    for p in paths:
        d = json.loads(p.read_text())
        m = d["metrics"]
        rows.append(
            {
                "system": d["system"],
                "dataset": d["dataset"],
                "split": d["split"],
                "noise": d.get("noise", 0.0),
                "measure": d["measure"],
                "model": d["model"],
                "n": m["n"],
                "mse": m["mse"],
                "mape": m["mape"],
                "r2": m["r2"],
                "p_over": m["p_over"],
            }
        )
    rows.sort(key=lambda r: (r["system"], r["dataset"], r["noise"], r["model"], _MEASURE_ORDER.get(r["measure"], 99), r["split"]))
    return rows


def _fmt(key, v):
    if v is None:
        return "n/a"
    if key == "mse":
        return f"{v:.3e}"
    if key in ("mape", "p_over"):
        return f"{100 * v:.2f}%"
    if key == "r2":
        return f"{v:.4f}"
    return str(v)


def render_markdown(rows) -> str:
    lines = ["# qrest results", ""]
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r["system"], r["dataset"], r["noise"], r["model"]), []).append(r)
    for (system, dataset, noise, model), rs in groups.items():
        title = f"## {system}: {model} on {dataset}"
        if noise:
            title += f" ({100 * noise:g}% feature noise)"
        lines += [title, "", "| measure | split | n | MSE | MAPE | R² | P_over |", "|---|---|---|---|---|---|---|"]
        for r in rs:
            cells = [r["measure"], r["split"], str(r["n"])] + [_fmt(k, r[k]) for k in ("mse", "mape", "r2", "p_over")]
            lines.append("| " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def cmd_report(run_dir, out_dir=None) -> tuple[Path, Path]:
    rows = collect_reports(run_dir)
    out_dir = Path(out_dir or run_dir)
    md = out_dir / "report.md"
    cs = out_dir / "report.csv"
    _atomic_write(md, render_markdown(rows))
    _atomic_write(cs, _csv_text([[r[c] for c in REPORT_COLUMNS] for r in rows], REPORT_COLUMNS))
    return md, cs


def replay(manifest_file, out_dir) -> Path:
    """Re-run the gen and label stages recorded in a dataset manifest."""
    d = json.loads(Path(manifest_file).read_text())
    path = None
    for st in d["stages"]:
        p = st["params"]
        if st["command"] == "gen":
            name = _stem(d["artifact"])
            path = cmd_gen(p["system"], p["count"], p["seed"], out_dir, name=name, split_seed=p.get("split_seed"))
        elif st["command"] == "label":
            if path is None:
                raise ValueError("label stage before gen stage")
            cmd_label(path, p["measure"], p["tol"], 1, p.get("failure_budget", 1.0), p.get("force", False))
    if path is None:
        raise ValueError("manifest has no gen stage")
    return path


def default_base(c=None, epsilon=None, tau=None, delta=None, tol=None) -> svm.TrainConfig:
    base = svm.TrainConfig()
    kw = {k: v for k, v in dict(c=c, epsilon=epsilon, delta=delta, tol=tol).items() if v is not None}
    base = replace(base, **kw)
    if tau is not None:
        base = replace(base, kernel=replace(base.kernel, tau=tau))
    return base
