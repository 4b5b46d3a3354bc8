"""Scoring a candidate rigid motion against a target cloud.

The score is an aggregate (mean by default, lower median optionally) of the
nearest-neighbour distances from every moved source point to the target.
All source points contribute; the distance threshold only feeds the reported
overlap percentage.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateCloudError
from .geometry import RigidMotion, as_cloud
from .spatial import KDTree


class FitnessKind(str, enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"


@dataclass(frozen=True)
class FitnessReport:
    score: float
    overlap_percent: float
    per_point_distances: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, FitnessReport):
            return NotImplemented
        return (self.score == other.score and self.overlap_percent == other.overlap_percent
                and np.array_equal(self.per_point_distances, other.per_point_distances))

    __hash__ = None


def aggregate(distances: np.ndarray, kind=FitnessKind.MEAN) -> np.ndarray:
    """Reduce the last axis of a distance array to scores.

    Mean sums in point order. Median is the lower median, i.e. element
    ``(n - 1) // 2`` of the sorted distances, so it is always an observed value.
    """
    kind = FitnessKind(kind)
    d = np.asarray(distances, dtype=float)
    n = d.shape[-1]
    if kind is FitnessKind.MEAN:
        return np.add.reduce(d, axis=-1) / n
    return np.partition(d, (n - 1) // 2, axis=-1)[..., (n - 1) // 2]


def overlap_percent(distances: np.ndarray, threshold: float) -> float:
    d = np.asarray(distances)
    return 100.0 * np.count_nonzero(d < threshold) / d.size


def overlap_threshold_default(target) -> float:
    """Twice the median nearest-neighbour spacing inside ``target``."""
    target = as_cloud(target)
    if len(target) < 2:
        raise DegenerateCloudError("overlap threshold needs at least 2 target points")
    _, spacing = KDTree(target).query(target.points, exclude_self=True)
    return 2.0 * float(np.median(spacing))


def evaluate_motion(motion: RigidMotion, source, target_index: KDTree,
                    kind=FitnessKind.MEAN, overlap_threshold: float | None = None) -> FitnessReport:
    """Move ``source`` by ``motion`` and score it against the indexed target."""
    source = as_cloud(source).require_nonempty()
    if overlap_threshold is None:
        overlap_threshold = overlap_threshold_default(target_index.cloud)
    if not overlap_threshold > 0:
        raise ValueError("overlap_threshold must be positive")
    dist = target_index.motion_distances(source.points, motion.matrix[None], motion.vector[None])[0]
    return FitnessReport(
        score=float(aggregate(dist, kind)),
        overlap_percent=overlap_percent(dist, overlap_threshold),
        per_point_distances=dist,
    )


def score_motions(rotations, translations, source: np.ndarray, target_index: KDTree,
                  kind=FitnessKind.MEAN) -> np.ndarray:
    """Scores for a batch of motions given as ``(k, 3, 3)`` and ``(k, 3)`` arrays."""
    dist = target_index.motion_distances(source, rotations, translations)
    return aggregate(dist, kind)
