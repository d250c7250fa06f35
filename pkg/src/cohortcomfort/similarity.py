"""Occupant-pair similarity: response-distribution divergence, cross-model
performance, RBF normalization and weighted blending into affinity matrices."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .data import OccupantRecord, response_distribution
from .errors import AlignmentError, ConfigurationError, NormalizationError, ValidationError
from .learn import FittedForest, f1_micro

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9
DEGENERATE_STD = 1e-12  # below this the off-diagonal entries count as all equal


class AffinityKind(str, Enum):
    DISTRIBUTION = "distribution"
    CROSS_MODEL = "cross_model"
    BLENDED = "blended"


@dataclass(frozen=True)
class BlendWeights:
    alpha: float = 0.5  # cross-model weight
    beta: float = 0.5  # response-distribution weight

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ValidationError(f"alpha + beta must equal 1, got {self.alpha + self.beta}")

    @classmethod
    def from_alpha(cls, alpha: float) -> "BlendWeights":
        return cls(alpha=alpha, beta=1.0 - alpha)


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    occupant_ids: tuple[str, ...]
    values: np.ndarray
    kind: AffinityKind
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        q = len(self.occupant_ids)
        if v.shape != (q, q):
            raise ValidationError(f"affinity matrix shape {v.shape} does not match {q} occupants")
        if not np.allclose(v, v.T, rtol=0.0, atol=SYMMETRY_TOL):
            raise ValidationError("affinity matrix is not symmetric")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValidationError("affinity entries must lie in [0, 1]")
        if not np.all(np.diag(v) == 1.0):
            raise ValidationError("affinity diagonal must be 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "occupant_ids", tuple(self.occupant_ids))
        object.__setattr__(self, "kind", AffinityKind(self.kind))
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return len(self.occupant_ids)


def _check_distribution(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise NormalizationError(f"{name} is not a probability vector: {p}")
    return p


def _kl2(p, m):
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / m[mask])))


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence with log base 2, bounded in [0, 1]."""
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    if p.shape != q.shape:
        raise NormalizationError("distributions differ in length")
    m = 0.5 * (p + q)
    value = 0.5 * _kl2(p, m) + 0.5 * _kl2(q, m)
    return min(max(value, 0.0), 1.0)


def offdiag_std(z: np.ndarray) -> float:
    q = z.shape[0]
    if q < 2:
        return 0.0
    return float(np.std(z[~np.eye(q, dtype=bool)]))


def rbf_kernel(z, center: float, mu: float):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-((z - center) ** 2) / (2.0 * mu**2))


def rbf_normalize(divergences, center_c: float = 0.0) -> np.ndarray:
    """Map a divergence matrix to affinities with exp(-(z-c)^2 / (2 mu^2)).

    ``mu`` is the standard deviation of the off-diagonal entries.  When it is
    numerically zero every pair is equally similar and the result is all ones.
    """
    z = np.asarray(divergences, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ValidationError("divergence matrix must be square")
    mu = offdiag_std(z)
    if mu <= DEGENERATE_STD:
        warnings.warn("all off-diagonal divergences are equal; affinity is all ones", RuntimeWarning)
        return np.ones_like(z)
    out = rbf_kernel(z, center_c, mu)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return out


def cross_model_scores(records: Sequence[OccupantRecord], pcms: Mapping[str, FittedForest]) -> np.ndarray:
    """Raw s[i, j] = F1-micro of occupant i's PCM on occupant j's rows."""
    missing = [r.occupant_id for r in records if r.occupant_id not in pcms]
    if missing:
        raise ConfigurationError(f"no PCM for occupant(s) {missing}")
    q = len(records)
    s = np.zeros((q, q))
    for i, ri in enumerate(records):
        model = pcms[ri.occupant_id]
        for j, rj in enumerate(records):
            s[i, j] = f1_micro(rj.labels, model.predict(rj.feature_matrix(model.feature_names)))
    return s


def cross_model_matrix(records: Sequence[OccupantRecord], pcms: Mapping[str, FittedForest]) -> AffinityMatrix:
    s = cross_model_scores(records, pcms)
    values = 0.5 * (s + s.T)
    np.fill_diagonal(values, 1.0)
    return AffinityMatrix(tuple(r.occupant_id for r in records), values, AffinityKind.CROSS_MODEL,
                          meta={"symmetrization": "mean"})


def distribution_matrix(records: Sequence[OccupantRecord], center_c: float = 0.0) -> AffinityMatrix:
    if len(records) < 2:
        raise ValidationError("need at least 2 occupants")
    dists = [response_distribution(r) for r in records]
    q = len(records)
    z = np.zeros((q, q))
    for i in range(q):
        for j in range(i + 1, q):
            z[i, j] = z[j, i] = js_divergence(dists[i], dists[j])
    return AffinityMatrix(tuple(r.occupant_id for r in records), rbf_normalize(z, center_c),
                          AffinityKind.DISTRIBUTION, meta={"c": center_c, "mu": offdiag_std(z)})


def blend(cross: AffinityMatrix, dist: AffinityMatrix, w: BlendWeights) -> AffinityMatrix:
    if cross.occupant_ids != dist.occupant_ids:
        raise AlignmentError("affinity matrices do not share one occupant ordering")
    if cross.kind is not AffinityKind.CROSS_MODEL or dist.kind is not AffinityKind.DISTRIBUTION:
        raise ValidationError("blend expects a cross-model and a distribution matrix")
    values = w.alpha * cross.values + w.beta * dist.values
    values = np.clip(values, 0.0, 1.0)
    np.fill_diagonal(values, 1.0)
    meta = {"alpha": w.alpha, "beta": w.beta, **{f"dist_{k}": v for k, v in dist.meta.items()}}
    return AffinityMatrix(cross.occupant_ids, values, AffinityKind.BLENDED, meta=meta)


def save_affinity(matrix: AffinityMatrix, path) -> Path:
    """Delimited table with ids as header row/column plus a JSON metadata sidecar."""
    path = Path(path)
    frame = pd.DataFrame(matrix.values, index=list(matrix.occupant_ids), columns=list(matrix.occupant_ids))
    frame.index.name = "occupant_id"
    frame.to_csv(path, float_format="%.17g")
    meta = {"kind": matrix.kind.value, **matrix.meta}
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def load_affinity(path) -> AffinityMatrix:
    path = Path(path)
    frame = pd.read_csv(path, index_col=0, dtype={"occupant_id": str}, float_precision="round_trip")
    meta = json.loads(path.with_name(path.name + ".meta.json").read_text())
    kind = meta.pop("kind")
    return AffinityMatrix(tuple(map(str, frame.index)), frame.to_numpy(np.float64), kind, meta)
