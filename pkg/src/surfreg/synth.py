"""Synthetic two-view scans with exactly known motions, and trial runners.

A surface is sampled with a 2D footprint parameter ``(u, v)`` in the unit
square attached to every point. Two views are carved from it as crossing
bands: the source keeps ``v`` in ``[c, 1 - c]``, the target keeps ``u`` in
``[c, 1 - c]`` with ``c = (1 - overlap) / 2``, so a fraction ``overlap`` of
each view lies in the shared square. Each view gets its own noise draw and
the target is then moved by the ground-truth motion.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .fitness import FitnessKind
from .genetic import (
    Full6Dof,
    GaConfig,
    ReducedTranslationOnly,
    register,
    rotation_error,
    translation_error,
)
from .geometry import EulerAngles, PointCloud, RigidMotion, bounding_box, transform_points
from .icp import CorrespondencePair


class Shape(str, enum.Enum):
    WAVY_SHEET = "wavy_sheet"
    SPHERE_PATCH = "sphere_patch"
    BOX = "box"


@dataclass(frozen=True)
class SurfaceSpec:
    shape: Shape = Shape.WAVY_SHEET
    extent: float = 500.0
    point_count: int = 4000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if self.point_count < 100:
            raise ValueError("point_count must be >= 100")
        if not self.extent > 0:
            raise ValueError("extent must be positive")


@dataclass(frozen=True)
class PairSpec:
    surface: SurfaceSpec = field(default_factory=SurfaceSpec)
    motion: RigidMotion = field(default_factory=RigidMotion)
    overlap_fraction: float = 0.5
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.overlap_fraction <= 1.0:
            raise ValueError("overlap_fraction must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def wavy_height(x, y, extent):
    return 0.1 * extent * np.sin(2 * np.pi * x / extent) * np.cos(2 * np.pi * y / extent)


def sample_surface(spec: SurfaceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Points ``(n, 3)`` and their footprint parameters ``(n, 2)``."""
    rng = np.random.default_rng(spec.seed)
    n, e = spec.point_count, spec.extent
    if spec.shape is Shape.WAVY_SHEET:
        uv = rng.uniform(0.0, 1.0, (n, 2))
        x, y = uv[:, 0] * e, uv[:, 1] * e
        pts = np.column_stack([x, y, wavy_height(x, y, e)])
    elif spec.shape is Shape.SPHERE_PATCH:
        # height uniform in [0, r] gives uniform area on the hemisphere
        uv = rng.uniform(0.0, 1.0, (n, 2))
        r = e / 2.0
        phi = 2 * np.pi * uv[:, 0]
        z = r * uv[:, 1]
        rho = np.sqrt(r * r - z * z)
        pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    else:
        # three faces of a cube meeting at the origin, unrolled side by side in u
        face = rng.integers(0, 3, n)
        ab = rng.uniform(0.0, 1.0, (n, 2))
        a, b = ab[:, 0] * e, ab[:, 1] * e
        zero = np.zeros(n)
        pts = np.where(face[:, None] == 0, np.column_stack([zero, a, b]),
                       np.where(face[:, None] == 1, np.column_stack([a, zero, b]),
                                np.column_stack([a, b, zero])))
        uv = np.column_stack([(face + ab[:, 0]) / 3.0, ab[:, 1]])
    return pts, uv


def generate_surface(spec: SurfaceSpec) -> PointCloud:
    pts, _ = sample_surface(spec)
    return PointCloud(pts, source_id=f"{spec.shape.value}-{spec.seed}")


def view_masks(uv: np.ndarray, overlap_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    c = (1.0 - overlap_fraction) / 2.0
    src = (uv[:, 1] >= c) & (uv[:, 1] <= 1.0 - c)
    tgt = (uv[:, 0] >= c) & (uv[:, 0] <= 1.0 - c)
    return src, tgt


def make_pair(spec: PairSpec) -> tuple[PointCloud, PointCloud, RigidMotion]:
    """Source view, target view and the motion mapping source onto target."""
    pts, uv = sample_surface(spec.surface)
    src_mask, tgt_mask = view_masks(uv, spec.overlap_fraction)
    rng = np.random.default_rng(spec.seed)
    src = pts[src_mask]
    tgt = pts[tgt_mask]
    if spec.noise_sigma > 0:
        src = src + rng.normal(0.0, spec.noise_sigma, src.shape)
        tgt = tgt + rng.normal(0.0, spec.noise_sigma, tgt.shape)
    m = spec.motion
    tgt = transform_points(m.matrix, m.translation, tgt)
    return PointCloud(src, "source"), PointCloud(tgt, "target"), m


def marked_correspondences(spec: PairSpec, count: int = 4, seed: int = 0) -> list:
    """Noise-free correspondences picked in the shared region, as if marked by hand."""
    pts, uv = sample_surface(spec.surface)
    src_mask, tgt_mask = view_masks(uv, spec.overlap_fraction)
    shared = np.flatnonzero(src_mask & tgt_mask)
    if len(shared) < count:
        raise ValueError(f"only {len(shared)} shared points, cannot mark {count}")
    pick = np.sort(np.random.default_rng(seed).choice(shared, size=count, replace=False))
    m = spec.motion
    moved = transform_points(m.matrix, m.translation, pts[pick])
    return [CorrespondencePair(tuple(a), tuple(b)) for a, b in zip(pts[pick], moved)]


def surface_diagonal(surface: SurfaceSpec) -> float:
    return bounding_box(generate_surface(surface)).diagonal


def default_pair_spec(seed: int, *, shape=Shape.WAVY_SHEET, extent: float = 500.0,
                      points_per_view: int = 2000, overlap: float = 0.5,
                      noise_fraction: float = 0.002, rotation=(0.0, 57.0, 0.0),
                      translation_fraction: float = 0.3) -> PairSpec:
    """Benchmark pair: one dominant rotation about y, translation 30% of the
    diagonal in a seed-dependent direction, 50% overlap, noise 0.2% of the diagonal.
    """
    # each view is a band covering a fraction `overlap` of the footprint square
    surface = SurfaceSpec(shape, extent, int(round(points_per_view / overlap)), seed)
    diag = surface_diagonal(surface)
    rng = np.random.default_rng(seed + 7919)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    motion = RigidMotion(EulerAngles(*rotation), tuple(translation_fraction * diag * direction))
    return PairSpec(surface, motion, overlap, noise_fraction * diag, seed)


@dataclass(frozen=True)
class TrialOutcome:
    mode: str
    seed: int
    translation_error: tuple
    rotation_error: tuple
    rotation_error_deg: float
    fitness_final: float
    generations_used: int
    wall_time: float
    diagonal: float = 0.0
    # error of the best coarse-stage individual, to show what the fine stage added
    coarse_translation_error_norm: float = math.nan

    @property
    def translation_error_norm(self) -> float:
        return float(np.linalg.norm(self.translation_error))


CSV_HEADER = ("mode", "seed", "tx_err", "ty_err", "tz_err", "t_err_norm",
              "rot_err_deg", "fitness", "generations", "seconds")


def resolve_mode(mode, known: EulerAngles):
    if isinstance(mode, (Full6Dof, ReducedTranslationOnly)):
        return mode
    name = str(mode).lower()
    if name == "full":
        return Full6Dof()
    if name == "reduced":
        return ReducedTranslationOnly(known)
    raise ValueError(f"unknown search mode {mode!r}")


def run_trials(pair: PairSpec, modes, config: GaConfig | None = None, repeats: int = 1,
               *, kind=FitnessKind.MEAN, downsample_to: int = 2000) -> list[TrialOutcome]:
    """Register the pair once per (mode, repeat); repeat ``r`` uses seed ``config.seed + r``.

    ``modes`` items are search modes or the names ``"full"``/``"reduced"``;
    reduced mode is given the pair's true rotation.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    config = GaConfig() if config is None else config
    source, target, truth = make_pair(pair)
    diag = bounding_box(source).diagonal
    out = []
    for mode in modes:
        mode = resolve_mode(mode, truth.rotation)
        for r in range(repeats):
            cfg = config.replace(seed=config.seed + r)
            res = register(source, target, mode, cfg, kind=kind, downsample_to=downsample_to)
            per_axis, geo = rotation_error(res.motion, truth)
            out.append(TrialOutcome(
                mode=mode.name,
                seed=cfg.seed,
                translation_error=tuple(float(v) for v in translation_error(res.motion, truth)),
                rotation_error=tuple(float(v) for v in per_axis),
                rotation_error_deg=geo,
                fitness_final=res.fitness,
                generations_used=res.generations_used,
                wall_time=res.wall_time,
                diagonal=diag,
                coarse_translation_error_norm=float(np.linalg.norm(
                    translation_error(res.coarse_trace.best[-1].motion, truth))),
            ))
    return out


def run_bench(seed: int, pairs: int = 1, modes=("full", "reduced"), config: GaConfig | None = None,
              repeats: int = 1, *, kind=FitnessKind.MEAN, downsample_to: int = 2000,
              **pair_options) -> list[TrialOutcome]:
    """Run :func:`run_trials` on ``pairs`` default pairs seeded ``seed, seed + 1, ...``."""
    config = GaConfig() if config is None else config
    out = []
    for p in range(pairs):
        spec = default_pair_spec(seed + p, **pair_options)
        out.extend(run_trials(spec, modes, config.replace(seed=seed + p), repeats,
                              kind=kind, downsample_to=downsample_to))
    return out


def outcome_row(o: TrialOutcome) -> list:
    return [o.mode, o.seed, *o.translation_error, o.translation_error_norm,
            o.rotation_error_deg, o.fitness_final, o.generations_used, o.wall_time]


def outcomes_to_csv(outcomes) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for o in outcomes:
        w.writerow([repr(v) if isinstance(v, float) else v for v in outcome_row(o)])
    return buf.getvalue()


def read_outcomes_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({k: (row[k] if k == "mode" else
                         int(row[k]) if k in ("seed", "generations") else float(row[k]))
                     for k in CSV_HEADER})
    return rows


def _rms(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(math.sqrt(np.mean(v * v)))


def summarize(rows) -> list[dict]:
    """Per-mode deviation table from CSV-style rows (dicts keyed by ``CSV_HEADER``).

    Deviations are root-mean-square errors against ground truth. Modes are
    listed in first-appearance order.
    """
    rows = [r if isinstance(r, dict) else dict(zip(CSV_HEADER, outcome_row(r))) for r in rows]
    order = []
    for r in rows:
        if r["mode"] not in order:
            order.append(r["mode"])
    table = []
    for mode in order:
        sel = [r for r in rows if r["mode"] == mode]
        table.append({
            "mode": mode,
            "trials": len(sel),
            "x": _rms([r["tx_err"] for r in sel]),
            "y": _rms([r["ty_err"] for r in sel]),
            "z": _rms([r["tz_err"] for r in sel]),
            "t_norm": _rms([r["t_err_norm"] for r in sel]),
            "rot_deg": None if mode == "reduced" else _rms([r["rot_err_deg"] for r in sel]),
            "median_t_norm": float(np.median([r["t_err_norm"] for r in sel])),
            "median_generations": float(np.median([r["generations"] for r in sel])),
            "median_seconds": float(np.median([r["seconds"] for r in sel])),
        })
    return table


def format_summary(table) -> str:
    header = f"{'':8}{'x/mm':>10}{'y/mm':>10}{'z/mm':>10}{'|t|/mm':>10}{'rot/deg':>10}" \
             f"{'gens':>8}{'time/s':>10}{'trials':>8}"
    lines = [header]
    for row in table:
        rot = "known" if row["rot_deg"] is None else f"{row['rot_deg']:.3f}"
        lines.append(f"{row['mode']:8}{row['x']:10.3f}{row['y']:10.3f}{row['z']:10.3f}"
                     f"{row['t_norm']:10.3f}{rot:>10}{row['median_generations']:8.1f}"
                     f"{row['median_seconds']:10.2f}{row['trials']:8d}")
    return "\n".join(lines) + "\n"
