"""Exact nearest-neighbour search over a static cloud with a balanced KD-tree.

The tree is implicit: points are permuted so that every subrange
``[lo, hi)`` is a node whose splitting point sits at ``mid = (lo + hi) // 2``,
the left child is ``[lo, mid)`` and the right child ``[mid + 1, hi)``. The
split axis cycles x, y, z with depth and the median point is kept in the
node itself. Subranges of at most ``_LEAF`` points are scanned linearly
instead of descended. Each node also stores the tight bounding box of its
subrange, which is what the query prunes against.

Ties between equidistant points resolve to the smallest original index, so
results never depend on tree layout.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

from .geometry import PointCloud, as_cloud

_STACK = 128
_LEAF = 8

# tbb is often too old on stock installs and only triggers a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def _build_layout(points: np.ndarray):
    n = points.shape[0]
    perm = np.arange(n)
    bmin = np.empty((n, 3))
    bmax = np.empty((n, 3))
    stack = [(0, n, 0)]
    while stack:
        lo, hi, depth = stack.pop()
        if hi <= lo:
            continue
        sub = perm[lo:hi]
        block = points[sub]
        mid = (lo + hi) // 2
        bmin[mid] = block.min(axis=0)
        bmax[mid] = block.max(axis=0)
        # secondary key on the original index keeps the layout deterministic
        order = np.lexsort((sub, block[:, depth % 3]))
        perm[lo:hi] = sub[order]
        stack.append((lo, mid, depth + 1))
        stack.append((mid + 1, hi, depth + 1))
    return perm, bmin, bmax


@njit(cache=True, inline="always")
def _box_dist2(bmin, bmax, m, qx, qy, qz):
    d = 0.0
    v = bmin[m, 0] - qx
    if v > 0.0:
        d += v * v
    else:
        v = qx - bmax[m, 0]
        if v > 0.0:
            d += v * v
    v = bmin[m, 1] - qy
    if v > 0.0:
        d += v * v
    else:
        v = qy - bmax[m, 1]
        if v > 0.0:
            d += v * v
    v = bmin[m, 2] - qz
    if v > 0.0:
        d += v * v
    else:
        v = qz - bmax[m, 2]
        if v > 0.0:
            d += v * v
    return d


@njit(cache=True)
def _query(tp, perm, bmin, bmax, qx, qy, qz, skip):
    """Return (original index, squared distance) of the nearest point.

    ``skip`` is an original index to ignore (-1 for none).
    """
    n = tp.shape[0]
    best = np.inf
    best_i = -1
    stk_lo = np.empty(_STACK, np.int64)
    stk_hi = np.empty(_STACK, np.int64)
    stk_d = np.empty(_STACK, np.float64)
    stk_lo[0] = 0
    stk_hi[0] = n
    stk_d[0] = 0.0
    sp = 1
    while sp > 0:
        sp -= 1
        lo = stk_lo[sp]
        hi = stk_hi[sp]
        # '>' rather than '>=': equidistant candidates must still be visited
        if stk_d[sp] > best:
            continue
        while hi > lo:
            if hi - lo <= _LEAF:
                for m in range(lo, hi):
                    idx = perm[m]
                    if idx != skip:
                        dx = qx - tp[m, 0]
                        dy = qy - tp[m, 1]
                        dz = qz - tp[m, 2]
                        d2 = dx * dx + dy * dy + dz * dz
                        if d2 < best or (d2 == best and idx < best_i):
                            best = d2
                            best_i = idx
                break
            mid = (lo + hi) >> 1
            idx = perm[mid]
            if idx != skip:
                dx = qx - tp[mid, 0]
                dy = qy - tp[mid, 1]
                dz = qz - tp[mid, 2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best or (d2 == best and idx < best_i):
                    best = d2
                    best_i = idx
            llo = lo
            lhi = mid
            rlo = mid + 1
            rhi = hi
            dl = np.inf
            dr = np.inf
            if lhi > llo:
                dl = _box_dist2(bmin, bmax, (llo + lhi) >> 1, qx, qy, qz)
            if rhi > rlo:
                dr = _box_dist2(bmin, bmax, (rlo + rhi) >> 1, qx, qy, qz)
            if dl <= dr:
                if dr <= best:
                    stk_lo[sp] = rlo
                    stk_hi[sp] = rhi
                    stk_d[sp] = dr
                    sp += 1
                if dl > best:
                    break
                lo = llo
                hi = lhi
            else:
                if dl <= best:
                    stk_lo[sp] = llo
                    stk_hi[sp] = lhi
                    stk_d[sp] = dl
                    sp += 1
                if dr > best:
                    break
                lo = rlo
                hi = rhi
    return best_i, best


@njit(cache=True)
def _query_many(tp, perm, bmin, bmax, queries, exclude_self):
    m = queries.shape[0]
    idx = np.empty(m, np.int64)
    dist = np.empty(m, np.float64)
    for i in range(m):
        skip = i if exclude_self else -1
        j, d2 = _query(tp, perm, bmin, bmax, queries[i, 0], queries[i, 1], queries[i, 2], skip)
        idx[i] = j
        dist[i] = np.sqrt(d2)
    return idx, dist


@njit(cache=True, parallel=True)
def _motion_distances(tp, perm, bmin, bmax, source, rotations, translations, out):
    """Fill ``out[k, i]`` with the NN distance of source point ``i`` moved by motion ``k``.

    Each row is computed by one worker in point order, so the values do not
    depend on the thread count.
    """
    n_motions = rotations.shape[0]
    n = source.shape[0]
    for k in prange(n_motions):
        R = rotations[k]
        t = translations[k]
        for i in range(n):
            sx = source[i, 0]
            sy = source[i, 1]
            sz = source[i, 2]
            x = R[0, 0] * sx + R[0, 1] * sy + R[0, 2] * sz + t[0]
            y = R[1, 0] * sx + R[1, 1] * sy + R[1, 2] * sz + t[1]
            z = R[2, 0] * sx + R[2, 1] * sy + R[2, 2] * sz + t[2]
            _, d2 = _query(tp, perm, bmin, bmax, x, y, z, -1)
            out[k, i] = np.sqrt(d2)


class KDTree:
    """Read-only spatial index answering exact nearest-neighbour queries.

    Build with :func:`build`; query with :meth:`nearest` or
    :meth:`query`. Point indices refer to the order of the indexed cloud.
    """

    def __init__(self, cloud):
        cloud = as_cloud(cloud).require_nonempty()
        self.cloud = cloud
        pts = cloud.points
        perm, bmin, bmax = _build_layout(pts)
        self._perm = perm
        self._tp = np.ascontiguousarray(pts[perm])
        self._bmin = bmin
        self._bmax = bmax
        for arr in (self._perm, self._tp, self._bmin, self._bmax):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.cloud)

    @property
    def points(self) -> np.ndarray:
        return self.cloud.points

    def nearest(self, query) -> tuple[int, float]:
        """Nearest indexed point to one query: ``(index, distance_mm)``."""
        q = np.asarray(query, dtype=float).reshape(3)
        i, d2 = _query(self._tp, self._perm, self._bmin, self._bmax, q[0], q[1], q[2], -1)
        return int(i), float(np.sqrt(d2))

    def query(self, queries, exclude_self: bool = False):
        """Vectorised :meth:`nearest`.

        With ``exclude_self=True`` query ``i`` ignores indexed point ``i``;
        used for intra-cloud spacing where queries are the indexed points.
        """
        q = np.ascontiguousarray(np.asarray(queries, dtype=float).reshape(-1, 3))
        if exclude_self and q.shape[0] != len(self):
            raise ValueError("exclude_self requires querying the indexed points themselves")
        return _query_many(self._tp, self._perm, self._bmin, self._bmax, q, exclude_self)

    def motion_distances(self, source: np.ndarray, rotations: np.ndarray,
                         translations: np.ndarray) -> np.ndarray:
        """NN distances for every (motion, source point) pair, shape ``(k, n)``."""
        source = np.ascontiguousarray(source, dtype=float)
        rotations = np.ascontiguousarray(rotations, dtype=float).reshape(-1, 3, 3)
        translations = np.ascontiguousarray(translations, dtype=float).reshape(-1, 3)
        out = np.empty((rotations.shape[0], source.shape[0]))
        _motion_distances(self._tp, self._perm, self._bmin, self._bmax,
                          source, rotations, translations, out)
        return out


def build(cloud) -> KDTree:
    return KDTree(cloud)


def nearest(index: KDTree, query) -> tuple[int, float]:
    return index.nearest(query)


def set_threads(n: int | None) -> int:
    """Cap worker threads used for batch evaluation; returns the effective count."""
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n is None else max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n


__all__ = ["KDTree", "build", "nearest", "set_threads", "PointCloud"]
