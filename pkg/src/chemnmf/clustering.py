"""K-means over activation-map columns plus ACC / NMI scoring.

Accuracy uses the optimal one-to-one mapping between predicted clusters
and true classes (Hungarian assignment on the confusion matrix), so it is
invariant to any relabeling of the prediction. NMI uses natural-log
entropies with the sqrt normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigurationError, InvalidValueError, ShapeMismatchError
from .matrix import NonNegMatrix


@dataclass(frozen=True)
class LabelVector:
    """Integer labels in [0, k) for a sequence of samples."""

    labels: tuple[int, ...]
    k: int

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        if len(self.labels) < 1:
            raise InvalidValueError("label vector must be non-empty")
        if self.k < 1:
            raise InvalidValueError(f"k must be positive, got {self.k}")
        if any(v < 0 or v >= self.k for v in self.labels):
            raise InvalidValueError(f"labels must lie in [0, {self.k})")

    @classmethod
    def from_sequence(cls, values, k: int | None = None) -> "LabelVector":
        values = [int(v) for v in values]
        if k is None:
            k = max(values) + 1 if values else 0
        return cls(tuple(values), k)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class ClusterReport:
    predicted: LabelVector
    acc: float
    nmi: float
    mapping: dict[int, int] = field(repr=False)
    confusion: np.ndarray = field(repr=False)


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    wcss = float(d2[np.arange(len(points)), labels].sum())
    return labels, wcss


def _update_centroids(
    points: np.ndarray, labels: np.ndarray, centroids: np.ndarray
) -> np.ndarray:
    k = centroids.shape[0]
    out = centroids.copy()
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            out[j] = points[labels == j].mean(axis=0)
    empties = [j for j in range(k) if counts[j] == 0]
    if empties:
        # Re-seed each empty centroid on the point currently farthest from
        # its own centroid, skipping points already used this round.
        dist = ((points - out[labels]) ** 2).sum(axis=1)
        taken: set[int] = set()
        for j in empties:
            order = np.argsort(-dist, kind="stable")
            pick = next(int(i) for i in order if int(i) not in taken)
            out[j] = points[pick]
            taken.add(pick)
            dist[pick] = -1.0
    return out


def lloyd_iterations(
    points: np.ndarray, centroids: np.ndarray, max_iter: int
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's algorithm from explicit starting centroids.

    Returns final labels, centroids, and the per-iteration objective
    (which never increases). Exposed for the objective-descent tests.
    """
    labels = None
    history: list[float] = []
    for _ in range(max_iter):
        new_labels, wcss = _assign(points, centroids)
        history.append(wcss)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = _update_centroids(points, labels, centroids)
    return labels, centroids, history


def kmeans(
    points: NonNegMatrix,
    k: int,
    seed: int,
    restarts: int = 10,
    max_iter: int = 300,
) -> LabelVector:
    """Cluster the columns of ``points`` into ``k`` groups.

    Initial centroids are drawn uniformly from distinct columns; the best
    of ``restarts`` runs by within-cluster sum of squares wins, ties going
    to the earliest restart. Deterministic for a given seed.
    """
    samples = points.a.T.copy()
    n = samples.shape[0]
    if not 1 <= k <= n:
        raise ConfigurationError(f"k must lie in [1, {n}], got {k}")
    if restarts < 1 or max_iter < 1:
        raise ConfigurationError("restarts and max_iter must be >= 1")
    best_labels = None
    best_wcss = np.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        idx = rng.choice(n, size=k, replace=False)
        labels, _, history = lloyd_iterations(samples, samples[idx].copy(), max_iter)
        if history[-1] < best_wcss:
            best_wcss = history[-1]
            best_labels = labels
    return LabelVector.from_sequence(best_labels, k)


def _confusion(pred: LabelVector, truth: LabelVector) -> np.ndarray:
    if len(pred) != len(truth):
        raise ShapeMismatchError(
            f"label lengths {len(pred)} and {len(truth)} must match"
        )
    size = max(pred.k, truth.k)
    counts = np.zeros((size, size), dtype=np.int64)
    for p, t in zip(pred.labels, truth.labels):
        counts[p, t] += 1
    return counts


def accuracy(pred: LabelVector, truth: LabelVector) -> tuple[float, dict[int, int]]:
    """Best-mapping clustering accuracy and the cluster-to-class mapping."""
    counts = _confusion(pred, truth)
    rows, cols = linear_sum_assignment(-counts)
    matched = int(counts[rows, cols].sum())
    mapping = {int(r): int(c) for r, c in zip(rows, cols)}
    return matched / len(pred), mapping


def nmi(pred: LabelVector, truth: LabelVector) -> float:
    """Normalized mutual information, I(U;V) / sqrt(H(U) H(V)).

    Two single-cluster partitions score 1; a single-cluster partition
    against a split one scores 0.
    """
    counts = _confusion(pred, truth).astype(np.float64)
    n = counts.sum()
    pu = counts.sum(axis=1) / n
    pv = counts.sum(axis=0) / n
    hu = -float(np.sum(pu[pu > 0] * np.log(pu[pu > 0])))
    hv = -float(np.sum(pv[pv > 0] * np.log(pv[pv > 0])))
    if hu == 0.0 and hv == 0.0:
        return 1.0
    if hu == 0.0 or hv == 0.0:
        return 0.0
    joint = counts / n
    mask = joint > 0
    outer = np.outer(pu, pv)
    mi = float(np.sum(joint[mask] * np.log(joint[mask] / outer[mask])))
    return min(max(mi / np.sqrt(hu * hv), 0.0), 1.0)


def evaluate_clustering(pred: LabelVector, truth: LabelVector) -> ClusterReport:
    """Bundle predicted labels with their ACC, NMI, mapping, and confusion."""
    acc, mapping = accuracy(pred, truth)
    return ClusterReport(
        predicted=pred,
        acc=acc,
        nmi=nmi(pred, truth),
        mapping=mapping,
        confusion=_confusion(pred, truth),
    )
