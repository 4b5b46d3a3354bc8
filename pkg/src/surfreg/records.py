"""Result records: a YAML document with everything that is deterministic
for a given manifest, plus a sidecar holding the wall time."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from . import __version__
from .exceptions import ParseError
from .fitness import FitnessKind
from .genetic import Full6Dof, GaConfig, ReducedTranslationOnly, RegistrationResult
from .geometry import EulerAngles, RigidMotion


@dataclass(frozen=True)
class RunManifest:
    inputs: tuple = ()  # ((path, sha256), ...)
    config: dict = field(default_factory=dict)
    tool_version: str = __version__

    def as_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "inputs": [{"path": p, "sha256": h} for p, h in self.inputs],
            "config": dict(self.config),
        }


def _angles(a: EulerAngles) -> dict:
    return {"alpha": a.alpha, "beta": a.beta, "psi": a.psi}


def motion_to_dict(m: RigidMotion) -> dict:
    x, y, z = m.translation
    return {"translation": {"x": x, "y": y, "z": z}, "rotation": _angles(m.rotation)}


def motion_from_dict(d: dict) -> RigidMotion:
    t, r = d["translation"], d["rotation"]
    return RigidMotion(EulerAngles(r["alpha"], r["beta"], r["psi"]), (t["x"], t["y"], t["z"]))


def mode_to_dict(mode) -> dict:
    if isinstance(mode, ReducedTranslationOnly):
        return {"name": "reduced", "known_rotation": _angles(mode.known)}
    return {"name": "full"}


def mode_from_dict(d: dict):
    if d["name"] == "reduced":
        r = d["known_rotation"]
        return ReducedTranslationOnly(EulerAngles(r["alpha"], r["beta"], r["psi"]))
    if d["name"] == "full":
        return Full6Dof()
    raise ParseError(f"unknown mode {d['name']!r}")


def result_to_dict(result: RegistrationResult, manifest: RunManifest | None = None) -> dict:
    doc = {
        "tool": f"surfreg {__version__}",
        "mode": mode_to_dict(result.mode),
        "motion": motion_to_dict(result.motion),
        "fitness": {
            "kind": result.fitness_kind.value,
            "score": result.fitness,
            "overlap_percent": result.overlap_percent,
            "overlap_threshold": result.overlap_threshold,
        },
        "generations": {
            "coarse": result.coarse_generations,
            "fine": result.fine_generations,
            "total": result.generations_used,
        },
        "downsample": result.downsample,
        "seed": result.seed,
        "config": dataclasses.asdict(result.config),
    }
    if manifest is not None:
        doc["manifest"] = manifest.as_dict()
    return doc


def dump_result(result: RegistrationResult, manifest: RunManifest | None = None) -> tuple[str, str]:
    """Return ``(payload, sidecar)``; the payload excludes wall time and is byte-stable."""
    payload = yaml.safe_dump(result_to_dict(result, manifest), sort_keys=False,
                             default_flow_style=False)
    sidecar = yaml.safe_dump({"wall_time_seconds": result.wall_time}, sort_keys=False)
    return payload, sidecar


def load_result(payload: str, sidecar: str | None = None) -> RegistrationResult:
    try:
        doc = yaml.safe_load(payload)
        fit = doc["fitness"]
        gens = doc["generations"]
        result = RegistrationResult(
            motion=motion_from_dict(doc["motion"]),
            fitness=fit["score"],
            overlap_percent=fit["overlap_percent"],
            fitness_kind=FitnessKind(fit["kind"]),
            overlap_threshold=fit["overlap_threshold"],
            coarse_generations=gens["coarse"],
            fine_generations=gens["fine"],
            mode=mode_from_dict(doc["mode"]),
            config=GaConfig(**doc["config"]),
            downsample=doc["downsample"],
        )
    except (yaml.YAMLError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed result record: {exc}") from exc
    if sidecar:
        result.wall_time = float(yaml.safe_load(sidecar)["wall_time_seconds"])
    return result


TABLE_HEADER = ("x", "y", "z", "alpha", "beta", "psi", "overlap_percent")


def result_table_row(result: RegistrationResult) -> str:
    """Header plus one row in the x y z alpha beta psi % layout."""
    m = result.motion
    values = (*m.translation, *m.rotation.as_tuple(), result.overlap_percent)
    return ",".join(TABLE_HEADER) + "\n" + ",".join(repr(float(v)) for v in values) + "\n"


def trace_csv(result: RegistrationResult) -> str:
    lines = ["stage,generation,best_fitness,tx,ty,tz,alpha,beta,psi"]
    for trace in (result.coarse_trace, result.fine_trace):
        if trace is None:
            continue
        for g, (f, c) in enumerate(zip(trace.best_fitness, trace.best)):
            genes = ",".join(repr(float(v)) for v in c.genes)
            lines.append(f"{trace.stage},{g},{float(f)!r},{genes}")
    return "\n".join(lines) + "\n"
