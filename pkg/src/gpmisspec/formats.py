"""Text formats: point files, data vectors, CSV tables and run manifests.

All floats are written with 17 significant digits so that every value reads
back as the same double.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
import re
from pathlib import Path

import numpy as np

from .designs import Design
from .errors import DomainError

__all__ = [
    "RunManifest",
    "build_digest",
    "fmt",
    "read_data",
    "read_design",
    "read_points",
    "sha256_file",
    "write_csv",
    "write_data",
    "write_json",
    "write_points",
]

_HEADER = re.compile(r"#\s*d\s*=\s*(\d+)\s+n\s*=\s*(\d+)\s*$")


def fmt(x):
    """17-significant-digit text for a float; integers stay integers."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_points(path, points):
    pts = np.asarray(points.points if isinstance(points, Design) else points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    with open(path, "w") as fh:
        fh.write(f"# d={pts.shape[1]} n={pts.shape[0]}\n")
        for row in pts:
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def read_points(path):
    """Read a point file into an (n, d) array, checking the header if present."""
    header = None
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                m = _HEADER.match(s)
                if m and header is None and not rows:
                    header = int(m.group(1)), int(m.group(2))
                continue
            try:
                rows.append([float(t) for t in s.split()])
            except ValueError:
                raise DomainError(f"{path}:{lineno}: non-numeric coordinate") from None
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DomainError(f"{path}: rows have differing numbers of coordinates {sorted(widths)}")
    d = widths.pop() if widths else (header[0] if header else 1)
    pts = np.array(rows, dtype=float).reshape(len(rows), d)
    if header is not None and (header[0] != d or header[1] != len(rows)):
        raise DomainError(f"{path}: header says d={header[0]} n={header[1]}, file has d={d} n={len(rows)}")
    return pts


def read_design(path, provenance="user-supplied"):
    return Design(read_points(path), provenance)


def write_data(path, values):
    with open(path, "w") as fh:
        for v in np.asarray(values, dtype=float).ravel():
            fh.write(fmt(v) + "\n")


def read_data(path):
    vals = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            try:
                vals.extend(float(t) for t in s.replace(",", " ").split())
            except ValueError:
                raise DomainError(f"{path}:{lineno}: non-numeric value") from None
    return np.array(vals, dtype=float)


def write_csv(path_or_file, header, rows):
    """CSV with a header row; floats at 17 significant digits."""
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_json(obj):
    # Python's float repr is the shortest string that round-trips
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_json(obj) + "\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def build_digest():
    """Short digest of the package sources, identifying the exact build."""
    h = hashlib.sha256()
    here = Path(__file__).parent
    for p in sorted(here.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        t = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        t = _dt.datetime.now(tz=_dt.timezone.utc)
    return t.isoformat(timespec="seconds")


class RunManifest:
    """Configuration, version, seed, timestamps and input digests of one run.

    Timestamps follow SOURCE_DATE_EPOCH when it is set, which makes the
    manifest itself reproducible.
    """

    def __init__(self, command, config, argv, version, seed=None):
        self.command = command
        self.config = dict(config)
        self.argv = list(argv)
        self.version = version
        self.seed = seed
        self.started = _timestamp()
        self.finished = None
        self.inputs = {}
        self.outputs = {}

    def add_input(self, path):
        if path is not None:
            self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path):
        if path is not None:
            self.outputs[str(path)] = None

    def to_dict(self):
        return {
            "command": self.command,
            "config": self.config,
            "argv": self.argv,
            "version": self.version,
            "build": build_digest(),
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "inputs": self.inputs,
            "outputs": self.outputs,
        }

    def finalize(self):
        """Hash the outputs and write ``<output>.manifest.json`` beside each one."""
        self.finished = _timestamp()
        for out in self.outputs:
            self.outputs[out] = sha256_file(out)
        written = []
        for out in self.outputs:
            path = f"{out}.manifest.json"
            write_json(path, self.to_dict())
            written.append(path)
        return written
