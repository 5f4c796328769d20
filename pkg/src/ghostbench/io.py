"""File output: 16-bit PGM images, CSV tables and run manifests.

Everything written here is a pure function of its inputs (no timestamps,
sorted JSON keys, fixed line endings) so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = ["write_pgm", "read_pgm", "write_csv", "read_bucket_csv", "write_manifest", "sha256_file"]

PGM_MAX = 65535


def write_pgm(path, img, window: Optional[tuple] = (0.0, 1.0), pitch_mm: Optional[float] = None) -> Path:
    """Write a binary 16-bit big-endian PGM (P5).

    Values are mapped linearly from ``window = (lo, hi)`` to ``0..65535``
    and clipped; ``window=None`` uses the image range.  The window and pitch
    are recorded as comment lines so :func:`read_pgm` can invert the map.
    """
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("PGM output needs a 2-D image")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains non-finite values")
    if window is None:
        lo, hi = float(a.min()), float(a.max())
    else:
        lo, hi = (float(v) for v in window)
    if hi <= lo:
        hi = lo + 1.0
    q = np.rint(np.clip((a - lo) / (hi - lo), 0.0, 1.0) * PGM_MAX).astype(">u2")
    h, w = a.shape
    header = ["P5", f"# window {lo!r} {hi!r}"]
    if pitch_mm is not None:
        header.append(f"# pitch_mm {float(pitch_mm)!r}")
    header += [f"{w} {h}", str(PGM_MAX)]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(q.tobytes())
    return path


def read_pgm(path) -> tuple[np.ndarray, dict]:
    """Read a PGM written by :func:`write_pgm`.

    Returns the image in window units (``lo + q/65535 * (hi - lo)``) and a
    dict with ``window``, ``pitch_mm`` (if present) and the raw ``counts``.
    """
    data = Path(path).read_bytes()
    pos = 0
    tokens, meta = [], {}
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n|\S+)").match(data, pos)
        if m is None:
            raise ValueError("truncated PGM header")
        tok = m.group(1)
        pos = m.end()
        if tok.startswith(b"#"):
            parts = tok[1:].decode("ascii").split()
            if parts and parts[0] == "window" and len(parts) == 3:
                meta["window"] = (float(parts[1]), float(parts[2]))
            elif parts and parts[0] == "pitch_mm" and len(parts) == 2:
                meta["pitch_mm"] = float(parts[1])
        else:
            tokens.append(tok.decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pos += 1  # single whitespace byte after maxval
    dtype = ">u2" if maxval > 255 else "u1"
    count = w * h
    q = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(h, w)
    lo, hi = meta.get("window", (0.0, float(maxval)))
    meta["counts"] = q
    return lo + q.astype(np.float64) / maxval * (hi - lo), meta


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV with ``\\n`` line endings."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
    return path


def read_bucket_csv(path) -> np.ndarray:
    """Read the ``value`` column of a bucket CSV (columns ``j,value``)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or "value" not in rd.fieldnames:
            raise ValueError(f"{path}: expected a 'value' column")
        return np.array([float(r["value"]) for r in rd])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_manifest(path, config: dict, outputs: Sequence, results: Optional[dict] = None) -> Path:
    """Write ``manifest.json`` with the resolved config and output checksums."""
    path = Path(path)
    base = path.parent
    files = {os.path.relpath(p, base): sha256_file(p) for p in outputs}
    doc = {"config": _jsonable(config), "outputs": dict(sorted(files.items())),
           "results": _jsonable(results or {})}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
