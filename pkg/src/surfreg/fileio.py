"""Reading and writing clouds, correspondence lists and result records.

Formats
-------
XYZ
    One point per line, three whitespace-separated decimals. ``#`` starts a
    comment; blank lines are ignored.
PLY
    ASCII 1.0 only. The ``vertex`` element must have ``x``, ``y`` and ``z``
    properties; other properties and elements are skipped on read and never
    written.
Correspondences
    One pair per line, ``sx sy sz tx ty tz``; ``#`` comments allowed.

Every write goes to a temporary file in the destination directory that is
then renamed over the target, so readers never see a truncated file.
"""

from __future__ import annotations

import hashlib
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import CloudIOError, NonFiniteCoordinateError, ParseError
from .geometry import PointCloud
from .icp import CorrespondencePair

FORMATS = ("xyz", "ply")


def detect_format(path, fmt=None) -> str:
    if fmt:
        fmt = fmt.lower()
        if fmt not in FORMATS:
            raise ParseError(f"unknown cloud format {fmt!r}", path=path)
        return fmt
    return "ply" if str(path).lower().endswith(".ply") else "xyz"


def _read_text(path) -> str:
    try:
        with open(path, encoding="ascii", errors="strict") as fh:
            return fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError("file is not ASCII text (binary PLY is not supported)", path=path) from exc
    except OSError as exc:
        raise CloudIOError(f"cannot read {path}: {exc.strerror or exc}") from exc


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    except OSError as exc:
        raise CloudIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise CloudIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _parse_floats(tokens, path, lineno, expected):
    if len(tokens) < expected:
        raise ParseError(f"expected {expected} numbers, found {len(tokens)}", path, lineno, 1)
    values = []
    for k, tok in enumerate(tokens[:expected]):
        try:
            v = float(tok)
        except ValueError:
            raise ParseError(f"not a number: {tok!r}", path, lineno, k + 1) from None
        if not math.isfinite(v):
            raise NonFiniteCoordinateError(f"non-finite coordinate {tok!r}", path, lineno, k + 1)
        values.append(v)
    return values


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def read_xyz(path) -> PointCloud:
    text = _read_text(path)
    rows = []
    for lineno, tokens in _data_lines(text):
        if len(tokens) != 3:
            raise ParseError(f"expected 3 numbers, found {len(tokens)}", path, lineno, 1)
        rows.append(_parse_floats(tokens, path, lineno, 3))
    return PointCloud(np.array(rows, dtype=float).reshape(-1, 3), source_id=str(path))


_PLY_SCALARS = {"char", "uchar", "short", "ushort", "int", "uint", "float", "double",
                "int8", "uint8", "int16", "uint16", "int32", "uint32", "float32", "float64"}


def read_ply(path) -> PointCloud:
    lines = _read_text(path).splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic line", path, 1, 1)
    elements = []  # (name, count, [(prop_name, is_list)])
    lineno = 1
    body_start = None
    seen_format = False
    for lineno in range(2, len(lines) + 1):
        tokens = lines[lineno - 1].split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "format":
            if tokens[1:] != ["ascii", "1.0"]:
                raise ParseError(f"unsupported PLY format {' '.join(tokens[1:])!r}", path, lineno, 8)
            seen_format = True
        elif key == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", path, lineno, 1)
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad element count {tokens[2]!r}", path, lineno, 3) from None
            if count < 0:
                raise ParseError("negative element count", path, lineno, 3)
            elements.append((tokens[1], count, []))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", path, lineno, 1)
            if len(tokens) >= 2 and tokens[1] == "list":
                if len(tokens) != 5:
                    raise ParseError("malformed list property", path, lineno, 1)
                elements[-1][2].append((tokens[4], True))
            else:
                if len(tokens) != 3 or tokens[1] not in _PLY_SCALARS:
                    raise ParseError("malformed property line", path, lineno, 1)
                elements[-1][2].append((tokens[2], False))
        elif key == "end_header":
            body_start = lineno
            break
        else:
            raise ParseError(f"unexpected header keyword {key!r}", path, lineno, 1)
    if body_start is None:
        raise ParseError("missing end_header", path, lineno, 1)
    if not seen_format:
        raise ParseError("missing format line", path, body_start, 1)

    vertex = next((e for e in elements if e[0] == "vertex"), None)
    if vertex is None:
        raise ParseError("no vertex element", path, body_start, 1)
    names = [p[0] for p in vertex[2]]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise ParseError(f"vertex element lacks property {axis!r}", path, body_start, 1)
    if any(is_list for _, is_list in vertex[2]):
        raise ParseError("list properties on vertex are not supported", path, body_start, 1)
    cols = [names.index(a) for a in ("x", "y", "z")]

    cursor = body_start
    rows = []
    for name, count, props in elements:
        for _ in range(count):
            # skip blank lines between records
            while cursor < len(lines) and not lines[cursor].strip():
                cursor += 1
            if cursor >= len(lines):
                raise ParseError(f"file ends inside element {name!r}", path, cursor, 1)
            tokens = lines[cursor].split()
            cursor += 1
            if name != "vertex":
                continue
            if len(tokens) != len(props):
                raise ParseError(f"expected {len(props)} values, found {len(tokens)}", path, cursor, 1)
            picked = [tokens[c] for c in cols]
            values = []
            for k, tok in zip(cols, picked):
                try:
                    v = float(tok)
                except ValueError:
                    raise ParseError(f"not a number: {tok!r}", path, cursor, k + 1) from None
                if not math.isfinite(v):
                    raise NonFiniteCoordinateError(f"non-finite coordinate {tok!r}", path, cursor, k + 1)
                values.append(v)
            rows.append(values)
    return PointCloud(np.array(rows, dtype=float).reshape(-1, 3), source_id=str(path))


def load_cloud(path, fmt=None) -> PointCloud:
    """Load a cloud; ``fmt`` is ``"xyz"`` or ``"ply"`` (default: by extension)."""
    fmt = detect_format(path, fmt)
    if not os.path.exists(path):
        raise CloudIOError(f"no such file: {path}")
    return read_ply(path) if fmt == "ply" else read_xyz(path)


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def format_xyz(cloud: PointCloud) -> str:
    return "".join(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n" for x, y, z in cloud.points)


def format_ply(cloud: PointCloud) -> str:
    header = ("ply\nformat ascii 1.0\n"
              f"element vertex {len(cloud)}\n"
              "property double x\nproperty double y\nproperty double z\n"
              "end_header\n")
    return header + format_xyz(cloud)


def save_cloud(cloud: PointCloud, path, fmt=None) -> None:
    fmt = detect_format(path, fmt)
    atomic_write_text(path, format_ply(cloud) if fmt == "ply" else format_xyz(cloud))


def load_correspondences(path) -> list[CorrespondencePair]:
    if not os.path.exists(path):
        raise CloudIOError(f"no such file: {path}")
    pairs = []
    for lineno, tokens in _data_lines(_read_text(path)):
        if len(tokens) != 6:
            raise ParseError(f"expected 6 numbers, found {len(tokens)}", path, lineno, 1)
        v = _parse_floats(tokens, path, lineno, 6)
        pairs.append(CorrespondencePair(tuple(v[:3]), tuple(v[3:])))
    return pairs


def format_correspondences(pairs) -> str:
    lines = ["# sx sy sz tx ty tz"]
    for p in pairs:
        lines.append(" ".join(_fmt(v) for v in (*p.source_point, *p.target_point)))
    return "\n".join(lines) + "\n"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b""):
                h.update(chunk)
    except OSError as exc:
        raise CloudIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return h.hexdigest()
