"""Deterministic CSV/JSON artifacts and content-hashed manifests.

Floats are written with ``repr`` (shortest round-trip form), so reading a
file back and writing it again reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError


def _cell(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns: Mapping[str, Sequence]) -> Path:
    """Write equal-length columns with a header row and ``\\n`` line ends."""
    path = Path(path)
    names = list(columns)
    data = [list(columns[n]) for n in names]
    n = {len(c) for c in data}
    if len(n) > 1:
        raise ValueError(f"columns differ in length: {sorted(n)}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*data):
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a numeric CSV written by :func:`write_csv`.

    Columns holding only integer literals come back as ``int64``, all others
    as ``float``, so that :func:`write_csv` reproduces the file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    try:
        cols = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric or ragged data: {exc}") from exc
    out = {}
    for k, name in enumerate(header):
        cells = [r[k] for r in body]
        integral = bool(cells) and all(c.lstrip("-").isdigit() for c in cells)
        out[name] = np.array([int(c) for c in cells], dtype=np.int64) if integral else cols[:, k]
    return out


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj) -> Path:
    """Sorted-key JSON; non-finite floats become ``null``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n")
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def prepare_out_dir(path, overwrite: bool) -> Path:
    """Create ``path``; refuse a non-empty directory unless ``overwrite``."""
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise ConfigError(f"output path {path} exists and is not a directory")
    if path.is_dir() and any(path.iterdir()) and not overwrite:
        raise ConfigError(f"output directory {path} is not empty; pass --overwrite to replace")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(out_dir, files: Iterable[Path], extra: Mapping | None = None) -> Path:
    """List every file with its size and SHA-256, relative to ``out_dir``."""
    out_dir = Path(out_dir)
    entries = []
    for f in sorted({Path(f) for f in files}, key=lambda p: p.relative_to(out_dir).as_posix()):
        entries.append({"path": f.relative_to(out_dir).as_posix(), "bytes": f.stat().st_size,
                        "sha256": sha256_file(f)})
    doc = {"files": entries}
    if extra:
        doc.update(extra)
    return write_json(out_dir / "manifest.json", doc)
