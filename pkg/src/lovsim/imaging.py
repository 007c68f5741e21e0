"""Deterministic 16-bit portable graymap output with plain-text sidecars.

PGM keeps the images human-inspectable and byte-diffable in tests; the
sidecar records the linear scaling so values are recoverable.  Raw CSV
dumps are available for every image.
"""

from __future__ import annotations

import numpy as np

from .core import Grid
from .errors import NumericalError

PGM_MAXVAL = 65535


def scale_to_u16(values: np.ndarray, lo=None, hi=None):
    """Linear scaling to the 16-bit range; a constant image maps to full scale."""
    if not np.all(np.isfinite(values)):
        raise NumericalError("image contains non-finite values")
    lo = float(values.min()) if lo is None else float(lo)
    hi = float(values.max()) if hi is None else float(hi)
    if hi <= lo:
        return np.full(values.shape, PGM_MAXVAL, dtype=np.uint16), lo, hi
    scaled = np.round((np.clip(values, lo, hi) - lo) / (hi - lo) * PGM_MAXVAL)
    return scaled.astype(np.uint16), lo, hi


def pgm_bytes(values: np.ndarray, lo=None, hi=None) -> bytes:
    """16-bit big-endian binary PGM; row 0 of the file is the top (+y) row."""
    pixels, _, _ = scale_to_u16(values, lo, hi)
    flipped = pixels[::-1, :]  # array row 0 is -y; file wants +y on top
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + flipped.astype(">u2").tobytes()


def sidecar_text(values: np.ndarray, grid: Grid, kind, lo=None, hi=None) -> str:
    _, lo, hi = scale_to_u16(values, lo, hi)
    lines = [
        f"kind: {kind}",
        f"nx: {grid.nx}",
        f"ny: {grid.ny}",
        f"pitch_x_mm: {grid.dx!r}",
        f"pitch_y_mm: {grid.dy!r}",
        f"min: {lo!r}",
        f"max: {hi!r}",
        "orientation: top row = +y",
        f"scale: value = min + pixel / {PGM_MAXVAL} * (max - min)",
    ]
    return "\n".join(lines) + "\n"


def csv_text(values: np.ndarray) -> str:
    """Row-major CSV dump, top row = +y, repr-precision floats."""
    rows = []
    for row in values[::-1, :]:
        rows.append(",".join(repr(float(v)) for v in row))
    return "\n".join(rows) + "\n"


def write_image(values: np.ndarray, grid: Grid, path, kind="intensity", lo=None, hi=None):
    """Write the PGM and its sidecar; returns both paths."""
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(pgm_bytes(values, lo, hi))
    meta_path = path + ".meta.txt"
    with open(meta_path, "w") as fh:
        fh.write(sidecar_text(values, grid, kind, lo, hi))
    return path, meta_path


def phase_image_bytes(values: np.ndarray) -> bytes:
    """Phase map scaled over the fixed principal branch (-pi, pi]."""
    return pgm_bytes(values, lo=-np.pi, hi=np.pi)
