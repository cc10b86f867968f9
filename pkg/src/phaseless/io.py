"""File output for image maps: CSV (ix, iy, value) and plain PGM."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .music import ImageMap


def export_image(image: ImageMap, path, fmt: str | None = None) -> Path:
    """Write ``image`` as ``csv`` or ``pgm`` (inferred from the suffix when ``fmt`` is None)."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        write_image_csv(image, path)
    elif fmt == "pgm":
        write_image_pgm(image, path)
    else:
        raise ValueError(f"unsupported image format {fmt!r}")
    return path


def write_image_csv(image: ImageMap, path) -> None:
    nx, ny = image.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ix", "iy", "value"])
        for k, v in enumerate(image.values):
            iy, ix = divmod(k, nx)
            w.writerow([ix, iy, repr(float(v))])


def read_image_csv(path, kind: str = "music") -> ImageMap:
    with open(path, newline="") as fh:
        rows = [(int(r["ix"]), int(r["iy"]), float(r["value"])) for r in csv.DictReader(fh)]
    nx = max(r[0] for r in rows) + 1
    ny = max(r[1] for r in rows) + 1
    values = np.zeros(nx * ny)
    for ix, iy, v in rows:
        values[iy * nx + ix] = v
    return ImageMap(values, (nx, ny), kind)


def write_image_pgm(image: ImageMap, path) -> None:
    """Plain (P2) PGM, linearly scaled so the map minimum is 0 and the maximum 255."""
    nx, ny = image.shape
    v = image.values
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        pix = np.rint((v - lo) / (hi - lo) * 255).astype(int)
    else:
        pix = np.full(v.shape, 255, dtype=int)
    rows = pix.reshape(ny, nx)
    lines = ["P2", f"{nx} {ny}", "255"] + [" ".join(map(str, r)) for r in rows]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
