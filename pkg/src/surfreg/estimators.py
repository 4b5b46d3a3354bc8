"""scikit-learn style wrappers.

Both estimators are fitted on a pair of point arrays, ``fit(source, target)``,
and afterwards ``transform`` moves arbitrary points from the source frame into
the target frame.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .fitness import FitnessKind, evaluate_motion
from .genetic import Full6Dof, GaConfig, ReducedTranslationOnly, register
from .geometry import EulerAngles, PointCloud, RigidMotion, inverse_matrix, transform_points
from .icp import IcpConfig, fit_rigid_arrays, icp_refine
from .spatial import KDTree, set_threads
from .validation import as_points


class _RigidTransformMixin(TransformerMixin):
    def transform(self, X):
        check_is_fitted(self, "rotation_")
        return transform_points(self.rotation_, self.translation_, as_points(X))

    def inverse_transform(self, X):
        check_is_fitted(self, "rotation_")
        R, t = inverse_matrix(self.rotation_, self.translation_)
        return transform_points(R, t, as_points(X))

    def score(self, X, y):
        """Negative mean nearest-neighbour distance of the moved ``X`` to ``y`` (higher is better)."""
        check_is_fitted(self, "rotation_")
        report = evaluate_motion(self.motion_, PointCloud(as_points(X)), KDTree(as_points(y)),
                                 FitnessKind.MEAN, overlap_threshold=np.inf)
        return -report.score


class GeneticRegistration(_RigidTransformMixin, BaseEstimator):
    """Two-stage GA registration.

    Parameters
    ----------
    known_rotation : sequence of 3 floats or None
        Euler angles (degrees) of the source-to-target rotation. When given,
        only the translation is searched.
    fitness : {"mean", "median"}
    downsample : int
        Points kept per cloud during the search.
    overlap_threshold : float or None
        Distance (mm) under which a point counts towards the overlap
        percentage; default is twice the target's median point spacing.
    config : GaConfig or None
        GA settings; its ``seed`` is overridden by ``random_state``.
    random_state : int
    n_threads : int or None
        Cap on worker threads for fitness evaluation. Results do not depend on it.
    """

    def __init__(self, known_rotation=None, fitness="mean", downsample=2000,
                 overlap_threshold=None, config=None, random_state=0, n_threads=None):
        self.known_rotation = known_rotation
        self.fitness = fitness
        self.downsample = downsample
        self.overlap_threshold = overlap_threshold
        self.config = config
        self.random_state = random_state
        self.n_threads = n_threads

    def _mode(self):
        if self.known_rotation is None:
            return Full6Dof()
        return ReducedTranslationOnly(EulerAngles(*self.known_rotation))

    def fit(self, X, y):
        source = PointCloud(as_points(X, "X"), "source")
        target = PointCloud(as_points(y, "y"), "target")
        if self.n_threads is not None:
            set_threads(self.n_threads)
        config = (self.config or GaConfig()).replace(seed=int(self.random_state))
        result = register(source, target, self._mode(), config, kind=FitnessKind(self.fitness),
                          downsample_to=self.downsample, overlap_threshold=self.overlap_threshold)
        self.result_ = result
        self.motion_ = result.motion
        self.rotation_ = result.motion.matrix
        self.translation_ = result.motion.vector
        self.fitness_ = result.fitness
        self.overlap_percent_ = result.overlap_percent
        self.n_generations_ = result.generations_used
        return self


class IcpRegistration(_RigidTransformMixin, BaseEstimator):
    """Point-to-point ICP, optionally seeded from marked correspondences.

    ``fit(X, y, correspondences=(src_pts, tgt_pts))`` first fits the closed-form
    motion to the correspondences and uses it as the starting point; otherwise
    ``init`` (a :class:`RigidMotion`, default identity) is used.
    """

    def __init__(self, init=None, max_iterations=50, tol=1e-4, cutoff=None):
        self.init = init
        self.max_iterations = max_iterations
        self.tol = tol
        self.cutoff = cutoff

    def fit(self, X, y, correspondences=None):
        init = self.init if self.init is not None else RigidMotion.identity()
        if correspondences is not None:
            R0, t0 = fit_rigid_arrays(*correspondences)
            init = RigidMotion.from_matrix(R0, t0)
        self.init_motion_ = init
        res = icp_refine(as_points(X, "X"), as_points(y, "y"), init,
                         IcpConfig(self.max_iterations, self.tol, self.cutoff))
        self.motion_ = res.motion
        self.rotation_ = res.rotation_matrix
        self.translation_ = res.translation_vector
        self.rms_ = res.rms
        self.n_iter_ = res.iterations
        self.rms_history_ = res.rms_history
        return self
