"""Ground-truth tooling: closed-form rigid fit from a few marked
correspondences, refined by point-to-point ICP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateConfigurationError, TooFewPairsError
from .geometry import RigidMotion, as_cloud, transform_points
from .spatial import KDTree
from .validation import as_points


@dataclass(frozen=True)
class CorrespondencePair:
    source_point: tuple
    target_point: tuple

    def __post_init__(self):
        s = as_points(self.source_point, "source_point")
        t = as_points(self.target_point, "target_point")
        if s.shape[0] != 1 or t.shape[0] != 1:
            raise ValueError("a correspondence pairs exactly one point with one point")
        object.__setattr__(self, "source_point", tuple(s[0]))
        object.__setattr__(self, "target_point", tuple(t[0]))


@dataclass(frozen=True)
class IcpConfig:
    max_iterations: int = 50
    convergence_epsilon: float = 1e-4
    correspondence_cutoff: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.convergence_epsilon > 0:
            raise ValueError("convergence_epsilon must be positive")
        if self.correspondence_cutoff is not None and not self.correspondence_cutoff > 0:
            raise ValueError("correspondence_cutoff must be positive")


def fit_rigid_arrays(source, target) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation and translation with ``R @ s + t ~ target``.

    Cross-covariance of the centred point sets, SVD, and a determinant sign
    correction so the result is always a proper rotation.
    """
    src = as_points(source, "source")
    tgt = as_points(target, "target")
    if src.shape != tgt.shape:
        raise ValueError("source and target must pair up one-to-one")
    if src.shape[0] < 3:
        raise TooFewPairsError(f"need at least 3 correspondences, got {src.shape[0]}")
    cs = src.mean(axis=0)
    ct = tgt.mean(axis=0)
    a = src - cs
    b = tgt - ct
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0 or sv[1] <= 1e-10 * sv[0]:
        raise DegenerateConfigurationError("source points are coincident or collinear")
    H = a.T @ b
    U, _, Vt = np.linalg.svd(H)
    d = 1.0 if np.linalg.det(Vt.T @ U.T) > 0 else -1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return R, ct - R @ cs


def fit_rigid(pairs) -> RigidMotion:
    pairs = list(pairs)
    if len(pairs) < 3:
        raise TooFewPairsError(f"need at least 3 correspondences, got {len(pairs)}")
    src = np.array([p.source_point for p in pairs], dtype=float)
    tgt = np.array([p.target_point for p in pairs], dtype=float)
    R, t = fit_rigid_arrays(src, tgt)
    return RigidMotion.from_matrix(R, t)


@dataclass
class IcpResult:
    motion: RigidMotion
    rms: float
    iterations: int
    rms_history: list = field(default_factory=list)
    rotation_matrix: np.ndarray | None = None
    translation_vector: np.ndarray | None = None


def _correspond(index, src, R, t, cutoff):
    idx, dist = index.query(transform_points(R, t, src))
    mask = np.ones(len(dist), bool) if cutoff is None else dist <= cutoff
    if not mask.any():
        return idx, mask, np.inf
    return idx, mask, float(np.sqrt(np.mean(dist[mask] ** 2)))


def icp_refine(source, target, init: RigidMotion | None = None,
               config: IcpConfig | None = None) -> IcpResult:
    """Point-to-point ICP from ``init``.

    Each iteration matches every (moved) source point to its nearest target
    point, refits the motion in closed form and re-matches. An update that
    would raise the RMS is rejected, so ``rms_history`` never increases.
    Stops when the RMS drops by less than ``convergence_epsilon``.
    """
    config = IcpConfig() if config is None else config
    init = RigidMotion.identity() if init is None else init
    src = as_cloud(source, "source").require_nonempty().points
    tgt_cloud = as_cloud(target, "target").require_nonempty()
    index = KDTree(tgt_cloud)
    tgt = tgt_cloud.points
    cutoff = config.correspondence_cutoff

    R, t = init.matrix, init.vector
    idx, mask, rms = _correspond(index, src, R, t, cutoff)
    history = [rms]
    iterations = 0
    for it in range(1, config.max_iterations + 1):
        if mask.sum() < 3:
            break
        R_new, t_new = fit_rigid_arrays(src[mask], tgt[idx[mask]])
        idx_new, mask_new, rms_new = _correspond(index, src, R_new, t_new, cutoff)
        if rms_new > rms:
            break
        improvement = rms - rms_new
        R, t, idx, mask, rms = R_new, t_new, idx_new, mask_new, rms_new
        history.append(rms)
        iterations = it
        if improvement < config.convergence_epsilon:
            break
    return IcpResult(RigidMotion.from_matrix(R, t), rms, iterations, history, R, t)
