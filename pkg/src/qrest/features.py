"""Compact feature vectors: sigma_z correlators, diagonal projectors, moments."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import SchemaMismatch, WrongSystem
from .qcore import DensityMatrix, partial_trace, trace_power

# first-order sigma_z slots in the order the coherence tables print them;
# higher orders are lexicographic
_WEIGHT_ONE_ORDER = {
    2: (1, 0),
    3: (2, 0, 1),
    4: (3, 0, 1, 2),
    5: (0, 1, 2, 3, 4),
}
ENTANGLEMENT_DIMS = ((3, 3), (4, 4), (2, 2, 2, 2))


class SchemaKind(str, enum.Enum):
    COHERENCE = "CoherenceZPatterns"
    ENTANGLEMENT = "EntanglementDiagMoments"


@lru_cache(maxsize=None)
def z_patterns(n: int) -> tuple[tuple[int, ...], ...]:
    """sigma_z slot sets for an n-qubit coherence vector."""
    if n not in _WEIGHT_ONE_ORDER:
        raise WrongSystem(f"coherence features are defined for 2..5 qubits, got {n}")
    pats = [(q,) for q in _WEIGHT_ONE_ORDER[n]]
    for w in range(2, min(3, n) + 1):
        pats.extend(combinations(range(n), w))
    return tuple(pats)


def _pattern_label(pat, n):
    return "<" + "".join("Z" if q in pat else "I" for q in range(n)) + ">"


@dataclass(frozen=True)
class FeatureSchema:
    kind: SchemaKind
    dims: tuple
    names: tuple

    @property
    def id(self) -> str:
        return f"{self.kind.value}:{'x'.join(map(str, self.dims))}"

    def __len__(self):
        return len(self.names)

    @classmethod
    def coherence(cls, n: int) -> "FeatureSchema":
        names = [_pattern_label(p, n) for p in z_patterns(n)] + ["Tr[rho^2]", "Tr[rho^3]"]
        return cls(SchemaKind.COHERENCE, (2,) * n, tuple(names))

    @classmethod
    def entanglement(cls, dims) -> "FeatureSchema":
        dims = tuple(dims)
        if dims not in ENTANGLEMENT_DIMS:
            raise WrongSystem(f"entanglement features are defined for {ENTANGLEMENT_DIMS}, got {dims}")
        idx = np.array(np.unravel_index(np.arange(int(np.prod(dims))), dims)).T
        names = ["<P_" + "".join(map(str, row)) + ">" for row in idx]
        names += ["Tr[rho^2]", "Tr[rho^3]"]
        for k in range(len(dims)):
            sub = "ABCD"[k]
            names += [f"Tr[rho_{sub}^2]", f"Tr[rho_{sub}^3]"]
        return cls(SchemaKind.ENTANGLEMENT, dims, tuple(names))

    @classmethod
    def from_id(cls, schema_id: str) -> "FeatureSchema":
        kind, dims = schema_id.split(":")
        dims = tuple(int(x) for x in dims.split("x"))
        if SchemaKind(kind) is SchemaKind.COHERENCE:
            return cls.coherence(len(dims))
        return cls.entanglement(dims)

    def moment_mask(self) -> np.ndarray:
        return np.array([n.startswith("Tr[") for n in self.names])

    def z_mask(self) -> np.ndarray:
        return np.array([n.startswith("<") and not n.startswith("<P") for n in self.names])


@dataclass(frozen=True)
class FeatureVector:
    schema: FeatureSchema
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.schema),):
            raise SchemaMismatch(f"expected {len(self.schema)} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector has non-finite entries")
        object.__setattr__(self, "values", v)


@lru_cache(maxsize=None)
def _sign_table(n: int) -> np.ndarray:
    """rows: patterns, cols: bitstrings k; entry (-1)^(parity of k on the pattern)."""
    bits = (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    table = np.empty((len(z_patterns(n)), 2**n))
    for r, pat in enumerate(z_patterns(n)):
        table[r] = 1 - 2 * (bits[:, list(pat)].sum(axis=1) % 2)
    return table


def coherence_features(rho: DensityMatrix) -> FeatureVector:
    n = len(rho.dims)
    if any(d != 2 for d in rho.dims) or n not in _WEIGHT_ONE_ORDER:
        raise WrongSystem(f"coherence features need 2..5 qubits, got dims {rho.dims}")
    probs = rho.diag()
    z = _sign_table(n) @ probs
    vals = np.concatenate([z, [trace_power(rho, 2), trace_power(rho, 3)]])
    return FeatureVector(FeatureSchema.coherence(n), vals)


def entanglement_features(rho: DensityMatrix) -> FeatureVector:
    schema = FeatureSchema.entanglement(rho.dims)
    vals = [rho.diag(), [trace_power(rho, 2), trace_power(rho, 3)]]
    for k in range(len(rho.dims)):
        red = partial_trace(rho, [k])
        vals.append([trace_power(red, 2), trace_power(red, 3)])
    return FeatureVector(schema, np.concatenate(vals))


def features_for(rho: DensityMatrix, kind: SchemaKind | str) -> FeatureVector:
    if SchemaKind(kind) is SchemaKind.COHERENCE:
        return coherence_features(rho)
    return entanglement_features(rho)


def perturb_features(fv: FeatureVector, level: float, seed=None) -> FeatureVector:
    """Multiply each entry by ``1 + u``, ``u ~ U[-level, level]``, then clip to range."""
    if level < 0:
        raise ValueError("noise level must be non-negative")
    if level == 0:
        return FeatureVector(fv.schema, fv.values.copy())
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return FeatureVector(fv.schema, perturb_array(fv.schema, fv.values[None, :], level, rng)[0])


def perturb_array(schema: FeatureSchema, x: np.ndarray, level: float, rng) -> np.ndarray:
    """Row-wise version of :func:`perturb_features` for a feature matrix."""
    x = np.asarray(x, dtype=float)
    if level == 0:
        return x.copy()
    out = x * (1.0 + rng.uniform(-level, level, size=x.shape))
    mom = schema.moment_mask()
    zm = schema.z_mask()
    pm = ~(mom | zm)
    tiny = np.finfo(float).tiny
    out[:, mom] = np.clip(out[:, mom], tiny, 1.0)
    out[:, zm] = np.clip(out[:, zm], -1.0, 1.0)
    out[:, pm] = np.clip(out[:, pm], 0.0, 1.0)
    return out
