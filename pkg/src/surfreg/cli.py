"""Command-line front end.

Subcommands: ``register``, ``ground-truth``, ``bench`` and ``synth``.
Exit codes: 0 success, 2 usage, 3 I/O, 4 parse, 5 degenerate input,
6 internal error. Failures print one line to stderr of the form
``surfreg: error code=<n> kind=<ExceptionName> message="<text>"``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import yaml

from . import __version__
from .exceptions import CloudIOError, SurfregError, UsageError
from .fileio import (
    atomic_write_text,
    file_sha256,
    format_correspondences,
    load_cloud,
    load_correspondences,
    save_cloud,
)
from .fitness import FitnessKind
from .genetic import Full6Dof, GaConfig, ReducedTranslationOnly, register
from .geometry import EulerAngles, apply_motion
from .icp import IcpConfig, fit_rigid, icp_refine
from .records import RunManifest, dump_result, motion_to_dict, result_table_row, trace_csv
from .spatial import set_threads
from .synth import (
    Shape,
    default_pair_spec,
    format_summary,
    make_pair,
    marked_correspondences,
    outcomes_to_csv,
    run_bench,
    summarize,
)


def _ga_config(args, seed) -> GaConfig:
    changes = {"seed": seed}
    if args.coarse_gens is not None:
        changes["coarse_generations"] = args.coarse_gens
    if args.fine_gens is not None:
        changes["fine_generations"] = args.fine_gens
    return GaConfig(**changes)


def _add_ga_options(p):
    p.add_argument("--fitness", choices=[k.value for k in FitnessKind], default="mean")
    p.add_argument("--overlap-threshold", type=float, metavar="MM",
                   help="distance under which a point counts as overlapping (default: 2x median target spacing)")
    p.add_argument("--downsample", type=int, default=2000, metavar="N",
                   help="points kept per cloud during the search (default 2000)")
    p.add_argument("--coarse-gens", type=int, metavar="N")
    p.add_argument("--fine-gens", type=int, metavar="N")
    p.add_argument("--threads", type=int, metavar="N", help="cap on worker threads")


def cmd_register(args) -> int:
    source = load_cloud(args.source, args.source_format)
    target = load_cloud(args.target, args.target_format)
    if args.known_rotation is not None:
        mode = ReducedTranslationOnly(EulerAngles(*args.known_rotation))
    else:
        mode = Full6Dof()
    config = _ga_config(args, args.seed)
    set_threads(args.threads)
    manifest = RunManifest(
        inputs=tuple((p, file_sha256(p)) for p in (args.source, args.target)),
        config={"fitness": args.fitness, "downsample": args.downsample,
                "overlap_threshold": args.overlap_threshold,
                "known_rotation": None if args.known_rotation is None else list(args.known_rotation),
                "ga": dataclasses.asdict(config)},
    )
    result = register(source, target, mode, config, kind=args.fitness,
                      downsample_to=args.downsample, overlap_threshold=args.overlap_threshold)
    payload, sidecar = dump_result(result, manifest)
    if args.output:
        atomic_write_text(args.output, payload)
        atomic_write_text(args.output + ".timing", sidecar)
    else:
        sys.stdout.write(payload)
        sys.stderr.write(sidecar)
    if args.transformed:
        save_cloud(apply_motion(result.motion, source), args.transformed)
    if args.trace:
        atomic_write_text(args.trace, trace_csv(result))
    if args.csv:
        atomic_write_text(args.csv, result_table_row(result))
    return 0


def cmd_ground_truth(args) -> int:
    source = load_cloud(args.source, args.source_format)
    target = load_cloud(args.target, args.target_format)
    pairs = load_correspondences(args.correspondences)
    rough = fit_rigid(pairs)
    res = icp_refine(source, target, rough,
                     IcpConfig(args.max_iterations, args.epsilon, args.cutoff))
    doc = {
        "tool": f"surfreg {__version__}",
        "correspondences": len(pairs),
        "fitted": motion_to_dict(rough),
        "refined": motion_to_dict(res.motion),
        "rms": res.rms,
        "iterations": res.iterations,
    }
    text = yaml.safe_dump(doc, sort_keys=False)
    if args.output:
        atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)
    if args.transformed:
        save_cloud(apply_motion(res.motion, source), args.transformed)
    return 0


_BENCH_KEYS = {"pairs", "repeats", "modes", "shape", "points", "overlap", "noise", "rotation",
               "translation", "coarse_gens", "fine_gens", "downsample", "fitness", "extent"}


def _apply_bench_config(args):
    if not args.config:
        return
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise CloudIOError(f"cannot read {args.config}: {exc.strerror or exc}") from exc
    unknown = set(doc) - _BENCH_KEYS
    if unknown:
        raise UsageError(f"unknown bench config keys: {sorted(unknown)}")
    for key, value in doc.items():
        setattr(args, key, value)


def _pair_options(args) -> dict:
    return dict(shape=Shape(args.shape), extent=args.extent, points_per_view=args.points,
                overlap=args.overlap, noise_fraction=args.noise, rotation=tuple(args.rotation),
                translation_fraction=args.translation)


def cmd_bench(args) -> int:
    _apply_bench_config(args)
    modes = [m.strip() for m in (args.modes.split(",") if isinstance(args.modes, str) else args.modes)]
    for m in modes:
        if m not in ("full", "reduced"):
            raise UsageError(f"unknown mode {m!r}")
    set_threads(args.threads)
    outcomes = run_bench(args.seed, args.pairs, modes, _ga_config(args, args.seed), args.repeats,
                         kind=args.fitness, downsample_to=args.downsample, **_pair_options(args))
    table_text = outcomes_to_csv(outcomes)
    summary = format_summary(summarize(outcomes))
    if args.csv:
        atomic_write_text(args.csv, table_text)
    if args.summary:
        atomic_write_text(args.summary, summary)
    sys.stdout.write(summary)
    return 0


def cmd_synth(args) -> int:
    spec = default_pair_spec(args.seed, **_pair_options(args))
    source, target, truth = make_pair(spec)
    save_cloud(source, args.source)
    save_cloud(target, args.target)
    if args.truth:
        atomic_write_text(args.truth, yaml.safe_dump({"ground_truth": motion_to_dict(truth)},
                                                     sort_keys=False))
    if args.correspondences:
        pairs = marked_correspondences(spec, args.marks, seed=args.seed)
        atomic_write_text(args.correspondences, format_correspondences(pairs))
    return 0


def _add_pair_options(p):
    p.add_argument("--shape", choices=[s.value for s in Shape], default="wavy_sheet")
    p.add_argument("--extent", type=float, default=500.0, metavar="MM")
    p.add_argument("--points", type=int, default=2000, help="points per view")
    p.add_argument("--overlap", type=float, default=0.5, help="shared fraction of each view")
    p.add_argument("--noise", type=float, default=0.002, help="noise sigma as a fraction of the diagonal")
    p.add_argument("--rotation", type=float, nargs=3, default=[0.0, 57.0, 0.0],
                   metavar=("ALPHA", "BETA", "PSI"))
    p.add_argument("--translation", type=float, default=0.3,
                   help="translation length as a fraction of the diagonal")


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as a one-line diagnostic like every other failure."""

    def error(self, message):
        self.exit(UsageError.exit_code, _diagnostic(UsageError.exit_code, "UsageError", message))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surfreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"surfreg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="register SOURCE onto TARGET with the two-stage GA")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--source-format", choices=["xyz", "ply"])
    p.add_argument("--target-format", choices=["xyz", "ply"])
    p.add_argument("--known-rotation", type=float, nargs=3, metavar=("ALPHA", "BETA", "PSI"),
                   help="rotation in degrees known a priori; searches the translation only")
    p.add_argument("--seed", type=int, default=0)
    _add_ga_options(p)
    p.add_argument("-o", "--output", help="result record (YAML); wall time goes to OUTPUT.timing")
    p.add_argument("--transformed", help="write the moved source cloud here")
    p.add_argument("--trace", help="write the per-generation best fitness CSV here")
    p.add_argument("--csv", help="write the x,y,z,alpha,beta,psi,%% row here")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("ground-truth", help="closed-form fit from marked pairs, refined by ICP")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("correspondences", help="text file, one 'sx sy sz tx ty tz' pair per line")
    p.add_argument("--source-format", choices=["xyz", "ply"])
    p.add_argument("--target-format", choices=["xyz", "ply"])
    p.add_argument("--max-iterations", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=1e-4, metavar="MM")
    p.add_argument("--cutoff", type=float, default=None, metavar="MM")
    p.add_argument("-o", "--output")
    p.add_argument("--transformed")
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("bench", help="synthetic full vs reduced comparison")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="YAML file overriding the options below")
    p.add_argument("--pairs", type=int, default=1)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--modes", default="full,reduced")
    _add_pair_options(p)
    _add_ga_options(p)
    p.add_argument("--csv", help="per-trial CSV")
    p.add_argument("--summary", help="summary table")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic view pair")
    p.add_argument("--seed", type=int, default=0)
    _add_pair_options(p)
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--truth", help="ground-truth motion (YAML)")
    p.add_argument("--correspondences", help="noise-free marked pairs in the shared region")
    p.add_argument("--marks", type=int, default=4)
    p.set_defaults(func=cmd_synth)
    return parser


def _diagnostic(code: int, kind: str, message: str) -> str:
    return f"surfreg: error code={code} kind={kind} message={json.dumps(message)}\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SurfregError as exc:
        sys.stderr.write(_diagnostic(exc.exit_code, type(exc).__name__, str(exc)))
        return exc.exit_code
    except ValueError as exc:
        sys.stderr.write(_diagnostic(UsageError.exit_code, "UsageError", str(exc)))
        return UsageError.exit_code
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(_diagnostic(6, type(exc).__name__, str(exc)))
        return 6


if __name__ == "__main__":
    sys.exit(main())
