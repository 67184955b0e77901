"""File formats: CSV tables, stable JSON, accumulator bundles and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .empirics import EcdfAccumulator
from .errors import DataError


def fmt(v) -> str:
    """9 significant digits for floats, plain text for everything else."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.9g}"
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(data) -> str:
    return json.dumps(_plain(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(path, header, rows) -> Path:
    return write_text(path, csv_text(header, rows))


def write_json(path, data) -> Path:
    return write_text(path, json_text(data))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def ecdf_rows(acc: EcdfAccumulator, theory=None):
    ecdf = acc.ecdf_on_grid()
    if theory is None:
        return list(zip(acc.grid, ecdf))
    return list(zip(acc.grid, ecdf, theory(acc.grid)))


# -------------------------------------------------------------- accumulators

def accumulator_bundle(accs: dict) -> dict:
    return {"format": "voronoi-extremes/accumulators", "version": 1,
            "streams": {k: a.to_dict() for k, a in accs.items()}}


def load_accumulators(path) -> dict[str, EcdfAccumulator]:
    """Read an accumulator bundle (or a single accumulator record)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    if isinstance(data, dict) and "streams" in data:
        return {k: EcdfAccumulator.from_dict(v).seal() for k, v in data["streams"].items()}
    if isinstance(data, dict) and "counts" in data:
        return {"data": EcdfAccumulator.from_dict(data).seal()}
    raise DataError(f"{path}: not an accumulator file")


def load_raw_values(path) -> np.ndarray:
    """One positive value per line (first column of a CSV); one header line allowed."""
    values = []
    header_allowed = True
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            field = text.split(",")[0].strip()
            try:
                v = float(field)
            except ValueError:
                if header_allowed:
                    header_allowed = False
                    continue
                raise DataError(f"{path}:{lineno}: cannot parse {field!r} as a number") from None
            if not (math.isfinite(v) and v > 0):
                raise DataError(f"{path}:{lineno}: value {field!r} is not finite and positive")
            header_allowed = False
            values.append(v)
    if not values:
        raise DataError(f"{path}: no numeric values found")
    return np.asarray(values)


# ------------------------------------------------------------------ manifest

def build_manifest(command: str, argv: list, config: dict, outputs: list,
                   started: datetime, wall_time_s: float | None = None) -> dict:
    files = {}
    for p in outputs:
        p = Path(p)
        files[p.name] = {"sha256": sha256_file(p), "bytes": p.stat().st_size}
    return {
        "tool": "voronoi-extremes",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "config": config,
        "started_utc": started.isoformat(timespec="seconds"),
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": wall_time_s,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "outputs": files,
    }
