"""Spectral clustering of affinity matrices, silhouette scoring and choice of k."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .data import OnboardingProfile
from .errors import (
    DegenerateClusteringError,
    NoUsableFeaturesError,
    ParameterError,
    SchemaError,
    UndefinedMetricError,
    ValidationError,
)
from .similarity import DEGENERATE_STD, AffinityMatrix, offdiag_std, rbf_kernel

logger = logging.getLogger(__name__)

KMEANS_RESTARTS = 100
KMEANS_TOL = 1e-8
KMEANS_MAX_ITER = 300
EMPTY_CLUSTER_ATTEMPTS = 20


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    occupant_ids: tuple[str, ...]
    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if self.k < 2:
            raise ValidationError("a cluster assignment needs k >= 2")
        if labels.shape != (len(self.occupant_ids),):
            raise ValidationError("one label per occupant required")
        if labels.min(initial=0) < 0 or labels.max(initial=0) >= self.k:
            raise ValidationError("labels must lie in [0, k)")
        if len(np.unique(labels)) != self.k:
            raise ValidationError("every cluster index must be non-empty")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "occupant_ids", tuple(self.occupant_ids))

    def members(self, c: int) -> tuple[str, ...]:
        return tuple(o for o, l in zip(self.occupant_ids, self.labels) if l == c)


@dataclass(frozen=True, eq=False)
class KSelectionTrace:
    candidate_ks: tuple[int, ...]
    mean_silhouettes: Mapping[int, float]
    chosen_k: int
    assignments: Mapping[int, ClusterAssignment] = field(default_factory=dict, repr=False)

    def to_frame(self) -> pd.DataFrame:
        ks = [k for k in self.candidate_ks if k in self.mean_silhouettes]
        return pd.DataFrame({"k": ks, "mean_silhouette": [self.mean_silhouettes[k] for k in ks]})

    def save(self, path) -> Path:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return Path(path)


def canonical_labels(labels) -> np.ndarray:
    """Relabel clusters in order of first appearance."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, l in enumerate(labels.tolist()):
        out[i] = mapping.setdefault(l, len(mapping))
    return out


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------


def _kmeans_pp(X, k, rng):
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            i = rng.integers(n)
        else:
            i = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            i = min(i, n - 1)
        centers[c] = X[i]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _lloyd(X, centers, tol, max_iter):
    k = len(centers)
    for _ in range(max_iter):
        d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d, axis=1)
        new = centers.copy()
        for c in range(k):
            members = X[labels == c]
            if len(members):
                new[c] = members.mean(axis=0)
        shift = float(np.sum((new - centers) ** 2))
        centers = new
        if shift <= tol:
            break
    d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d, axis=1)
    inertia = float(d[np.arange(len(X)), labels].sum())
    return labels, inertia


def kmeans(X, k: int, seed, n_init: int = KMEANS_RESTARTS, tol: float = KMEANS_TOL,
           max_iter: int = KMEANS_MAX_ITER) -> np.ndarray:
    """Best-inertia Lloyd k-means over `n_init` k-means++ starts.

    A best partition with an empty cluster triggers a fresh, re-seeded round
    of restarts, up to ``EMPTY_CLUSTER_ATTEMPTS`` rounds.
    """
    X = np.asarray(X, dtype=np.float64)
    for attempt in range(EMPTY_CLUSTER_ATTEMPTS):
        rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), attempt])
        best_labels, best_inertia = None, np.inf
        for _ in range(n_init):
            labels, inertia = _lloyd(X, _kmeans_pp(X, k, rng), tol, max_iter)
            if inertia < best_inertia - 1e-12:
                best_labels, best_inertia = labels, inertia
        if len(np.unique(best_labels)) == k:
            return best_labels
        logger.debug("k-means attempt %d left a cluster empty; re-seeding", attempt)
    raise DegenerateClusteringError(f"k-means could not produce {k} non-empty clusters")


# --------------------------------------------------------------------------
# spectral clustering
# --------------------------------------------------------------------------


def normalized_laplacian(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    d = A.sum(axis=1)
    if np.any(d <= 0):
        raise DegenerateClusteringError("affinity has an isolated node with zero degree")
    s = 1.0 / np.sqrt(d)
    return np.eye(len(A)) - s[:, None] * A * s[None, :]


def spectral_embedding(A, k: int) -> np.ndarray:
    """Row-normalized eigenvectors of the k smallest normalized-Laplacian eigenvalues."""
    L = normalized_laplacian(A)
    _, vecs = np.linalg.eigh(0.5 * (L + L.T))
    U = vecs[:, :k]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    return np.divide(U, norms, out=np.zeros_like(U), where=norms > 0)


def _affinity_values(affinity) -> tuple[tuple[str, ...], np.ndarray]:
    if isinstance(affinity, AffinityMatrix):
        return affinity.occupant_ids, affinity.values
    A = np.asarray(affinity, dtype=np.float64)
    return tuple(str(i) for i in range(len(A))), A


def _check_k(k, q):
    if not 2 <= k <= q - 1:
        raise ParameterError(f"k={k} outside [2, {q - 1}] for {q} occupants")


def spectral_partition(A, k: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Labels (first-appearance order) and the embedding they were computed from."""
    _check_k(k, len(A))
    U = spectral_embedding(A, k)
    return canonical_labels(kmeans(U, k, seed)), U


def spectral_cluster(affinity, k: int, seed=0) -> ClusterAssignment:
    ids, A = _affinity_values(affinity)
    labels, _ = spectral_partition(A, k, seed)
    return ClusterAssignment(ids, labels, k)


# --------------------------------------------------------------------------
# survey-score features
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StandardizedScores:
    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    values: np.ndarray

    def transform(self, profile: OnboardingProfile) -> np.ndarray:
        raw = np.array([profile.numeric(n) for n in self.names])
        return (raw - self.mean) / self.std


def standardize_scores(profiles: Sequence[OnboardingProfile], feature_set: Sequence[str]) -> StandardizedScores:
    """Zero-mean / unit-variance scores; zero-variance features are dropped."""
    missing = sorted({n for p in profiles for n in feature_set if not p.has(n)})
    if missing:
        raise SchemaError(f"survey score(s) missing: {missing}", missing=missing)
    raw = np.array([[p.numeric(n) for n in feature_set] for p in profiles], dtype=np.float64)
    std = raw.std(axis=0)
    keep = std > 0
    for name in np.asarray(feature_set)[~keep]:
        logger.warning("dropping zero-variance clustering feature %s", name)
    if not keep.any():
        raise NoUsableFeaturesError("every clustering feature has zero variance")
    mean = raw.mean(axis=0)[keep]
    std = std[keep]
    return StandardizedScores(tuple(np.asarray(feature_set)[keep].tolist()), mean, std,
                              (raw[:, keep] - mean) / std)


def pairwise_distances(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    d = np.sqrt(np.maximum(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2), 0.0))
    np.fill_diagonal(d, 0.0)
    return d


def feature_affinity(Z) -> np.ndarray:
    """RBF affinity of Euclidean distances, centered at 0, width = std of distances."""
    d = pairwise_distances(Z)
    mu = offdiag_std(d)
    if mu <= DEGENERATE_STD:
        raise DegenerateClusteringError("all pairwise profile distances are equal")
    A = rbf_kernel(d, 0.0, mu)
    A = 0.5 * (A + A.T)
    np.fill_diagonal(A, 1.0)
    return A


def feature_spectral_cluster(profiles: Sequence[OnboardingProfile], feature_set: Sequence[str],
                             k: int, seed=0) -> ClusterAssignment:
    scores = standardize_scores(profiles, feature_set)
    labels, _ = spectral_partition(feature_affinity(scores.values), k, seed)
    return ClusterAssignment(tuple(p.occupant_id for p in profiles), labels, k)


# --------------------------------------------------------------------------
# silhouette and k selection
# --------------------------------------------------------------------------


def silhouette(data, labels, kind: str = "points") -> float:
    """Mean silhouette coefficient.

    `kind` says what `data` holds: ``"points"`` (rows, Euclidean),
    ``"distance"`` (square distance matrix) or ``"affinity"`` (distance is
    ``1 - affinity``).  Singleton clusters score 0, as does a = b = 0.
    """
    if isinstance(labels, ClusterAssignment):
        labels = labels.labels
    labels = np.asarray(labels)
    if isinstance(data, AffinityMatrix):
        data, kind = data.values, "affinity"
    data = np.asarray(data, dtype=np.float64)
    if kind == "points":
        D = pairwise_distances(data)
    elif kind == "distance":
        D = data
    elif kind == "affinity":
        D = 1.0 - data
        np.fill_diagonal(D, 0.0)
    else:
        raise ParameterError(f"unknown silhouette input kind {kind!r}")
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise UndefinedMetricError("silhouette requires at least 2 non-empty clusters")
    n = len(labels)
    s = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        n_own = own.sum()
        if n_own == 1:
            continue
        a = D[i, own].sum() / (n_own - 1)
        b = min(D[i, labels == c].mean() for c in clusters if c != labels[i])
        m = max(a, b)
        s[i] = (b - a) / m if m > 0 else 0.0
    return float(s.mean())


def choose_k(mean_silhouettes: Mapping[int, float]) -> int:
    """Highest mean silhouette; ties go to the smaller k."""
    best = None
    for k in sorted(mean_silhouettes):
        v = mean_silhouettes[k]
        if np.isnan(v):
            continue
        if best is None or v > mean_silhouettes[best]:
            best = k
    if best is None:
        raise DegenerateClusteringError("no candidate k produced a valid clustering")
    return best


def clip_k_range(k_range, q: int) -> tuple[int, ...]:
    lo, hi = k_range
    ks = tuple(range(max(2, lo), min(hi, q - 1) + 1))
    if not ks:
        raise ParameterError(f"k range {k_range} is empty after clipping to [2, {q - 1}]")
    return ks


def select_k(affinity_or_features, k_range=(2, 10), seed=0, space: str = "embedding",
             occupant_ids: Sequence[str] | None = None) -> KSelectionTrace:
    """Cluster at each candidate k and keep the k with the best mean silhouette.

    `space` picks where silhouettes are measured: ``"embedding"`` (the
    spectral embedding at that k), ``"affinity"`` (1 - affinity) or
    ``"features"``, in which case `affinity_or_features` is a standardized
    feature matrix and its RBF affinity is what gets clustered.
    """
    if space == "features":
        Z = np.asarray(affinity_or_features, dtype=np.float64)
        A = feature_affinity(Z)
        ids = tuple(occupant_ids) if occupant_ids is not None else tuple(str(i) for i in range(len(Z)))
    else:
        ids, A = _affinity_values(affinity_or_features)
        if occupant_ids is not None:
            ids = tuple(occupant_ids)
    ks = clip_k_range(k_range, len(A))
    scores, assignments = {}, {}
    for k in ks:
        try:
            labels, U = spectral_partition(A, k, [*np.atleast_1d(seed).tolist(), k])
        except DegenerateClusteringError as exc:
            logger.info("k=%d skipped: %s", k, exc)
            scores[k] = float("nan")
            continue
        if space == "embedding":
            scores[k] = silhouette(U, labels, "points")
        elif space == "affinity":
            scores[k] = silhouette(A, labels, "affinity")
        elif space == "features":
            scores[k] = silhouette(Z, labels, "points")
        else:
            raise ParameterError(f"unknown silhouette space {space!r}")
        assignments[k] = ClusterAssignment(ids, labels, k)
    return KSelectionTrace(ks, scores, choose_k(scores), assignments)
