"""Field dumps: a JSON header (``.rwf``) plus a raw payload (``.rwf.bin``).

The payload holds little-endian float64 pairs ``(re, im)`` in row-major
(C) order over the grid axes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .grid import ComplexField, GridSpec, build_grid

__all__ = ["write_field", "read_field", "sha256_file"]

FORMAT = "rwf-1"


def write_field(f: ComplexField, path, params=None) -> list[Path]:
    """Write ``path`` (header, suffix ``.rwf`` appended if missing) and its payload."""
    path = Path(path)
    if path.suffix != ".rwf":
        path = path.with_name(path.name + ".rwf")
    payload = path.with_name(path.name + ".bin")
    spec = f.grid.spec
    header = {
        "format": FORMAT,
        "dim": spec.dim,
        "points": list(spec.points),
        "half_widths": list(spec.half_widths),
        "dtype": "<f8",
        "layout": "row-major (re, im) pairs",
        "payload": payload.name,
    }
    if params is not None:
        header["gamma_perp"] = params.gamma_perp
        header["gamma_perp2"] = params.gamma_2
        header["gamma_rest"] = list(params.gamma_rest)
        header["omega"] = params.omega
    re_im = np.empty(f.values.shape + (2,), dtype="<f8")
    re_im[..., 0] = f.values.real
    re_im[..., 1] = f.values.imag
    payload.write_bytes(np.ascontiguousarray(re_im).tobytes(order="C"))
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return [path, payload]


def read_field(path) -> tuple[ComplexField, dict]:
    """Read a dump written by :func:`write_field`; returns ``(field, header)``."""
    path = Path(path)
    header = json.loads(path.read_text())
    if header.get("format") != FORMAT:
        raise ValueError(f"unsupported field format {header.get('format')!r}")
    spec = GridSpec(header["dim"], tuple(header["half_widths"]), tuple(header["points"]))
    grid = build_grid(spec)
    raw = np.frombuffer((path.parent / header["payload"]).read_bytes(), dtype="<f8")
    expected = 2 * int(np.prod(spec.points))
    if raw.size != expected:
        raise ValueError(f"payload has {raw.size} floats, expected {expected}")
    pairs = raw.reshape(spec.points + (2,))
    return ComplexField(grid, pairs[..., 0] + 1j * pairs[..., 1]), header


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
