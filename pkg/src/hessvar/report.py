"""CSV/JSON emission with a bit-stable dialect, plus run manifests.

CSV files use comma separators, '.' decimals, a header row, LF line
endings, and 17 significant digits for reals, so re-running a
deterministic computation reproduces byte-identical artifacts.  Every
run directory gets exactly one manifest listing the files it emitted
(wall time lives only in the manifest, which is therefore excluded from
byte comparisons).
"""

from __future__ import annotations

import json
import math
import os
import platform
import time
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


class RunDir:
    """Accumulates emitted files and closes with a manifest."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.t0 = time.time()

    def csv(self, name, header, rows):
        p = write_csv(self.dir / name, header, rows)
        self.files.append(name)
        return p

    def json(self, name, payload):
        p = write_json(self.dir / name, payload)
        self.files.append(name)
        return p

    def manifest(self, config: dict):
        from . import __version__

        payload = {
            "config": _jsonable(config),
            "files": sorted(self.files),
            "versions": {
                "hessvar": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "wall_time_s": time.time() - self.t0,
        }
        return write_json(self.dir / "manifest.json", payload)
