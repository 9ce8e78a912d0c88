"""Field persistence: lossless flat binary with a JSON sidecar, and ASCII
PGM dumps for eyeballing.

Binary format: 64-bit little-endian floats, row-major, no header; the
sidecar ``<stem>.json`` records ``{"height": h, "width": w, "dtype": "f64"}``.
PGM dumps are min-max scaled to 8 bits; the same scaling rule feeds the
selection UI so previews agree everywhere.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .fields import Field


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def write_field_binary(field: Field, path) -> Path:
    """Write ``path`` (flat f64-LE binary) plus its JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(field.data.astype("<f8").tobytes(order="C"))
    meta = {"height": field.height, "width": field.width, "dtype": "f64"}
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")
    return path


def read_field_binary(path) -> Field:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    if meta.get("dtype") != "f64":
        raise InvalidInputError(f"unsupported dtype {meta.get('dtype')!r} in {sidecar_path(path)}")
    h, w = int(meta["height"]), int(meta["width"])
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    if raw.size != h * w:
        raise InvalidInputError(
            f"{path}: expected {h * w} values for {h}x{w}, found {raw.size}"
        )
    return Field(raw.reshape(h, w).astype(np.float64))


def scale_unit(field: Field) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant field maps to all zeros.

    This is the single scaling rule shared by PGM dumps and the HTTP
    candidate/output payloads.
    """
    a = field.data
    lo, hi = float(a.min()), float(a.max())
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def write_pgm(field: Field, path) -> Path:
    """ASCII PGM (P2), maxval 255, min-max scaled."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pix = np.rint(scale_unit(field) * 255.0).astype(int)
    lines = [f"P2", f"{field.width} {field.height}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pix]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_pgm(path) -> np.ndarray:
    """Read an ASCII PGM back as an integer array (test convenience)."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    if not tokens or tokens[0] != "P2":
        raise InvalidInputError(f"{path} is not an ASCII PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    vals = np.array([int(t) for t in tokens[4 : 4 + w * h]])
    if vals.size != w * h:
        raise InvalidInputError(f"{path}: truncated pixel data")
    if maxval < 1:
        raise InvalidInputError(f"{path}: bad maxval {maxval}")
    return vals.reshape(h, w)
