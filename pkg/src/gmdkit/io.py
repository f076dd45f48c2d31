"""Dense CSV matrix I/O with optional JSON sidecar descriptors.

Matrices are stored header-free, row-major, comma-separated.  A descriptor
is a small JSON object {"rows": int, "cols": int, "role": "X"|"H"|"Q"|"y"}
that, when present, pins the expected shape.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .exceptions import DimensionError, GmdkitError

ROLES = ("X", "H", "Q", "y")


def load_matrix(path: str, descriptor: dict | None = None) -> np.ndarray:
    """Parse a dense CSV matrix, rejecting NaN/Inf and ragged rows.

    Parse failures name the 1-based line and column; a descriptor enforces
    the expected shape.
    """
    rows: list[list[float]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            out = []
            for colno, tok in enumerate(line.split(","), start=1):
                try:
                    val = float(tok)
                except ValueError:
                    raise GmdkitError(
                        f"{path}: parse failure at line {lineno}, "
                        f"column {colno}: {tok.strip()!r}"
                    ) from None
                if not math.isfinite(val):
                    raise GmdkitError(
                        f"{path}: non-finite value at line {lineno}, "
                        f"column {colno}"
                    )
                out.append(val)
            if rows and len(out) != len(rows[0]):
                raise GmdkitError(
                    f"{path}: ragged row {lineno}: expected "
                    f"{len(rows[0])} columns, got {len(out)}"
                )
            rows.append(out)
    if not rows:
        raise GmdkitError(f"{path}: empty matrix file")
    M = np.array(rows, dtype=float)
    if descriptor is not None:
        want = (int(descriptor["rows"]), int(descriptor["cols"]))
        if M.shape != want:
            raise DimensionError(
                f"{path}: descriptor expects shape {want}, file has {M.shape}"
            )
        role = descriptor.get("role")
        if role is not None and role not in ROLES:
            raise GmdkitError(f"{path}: unknown role {role!r}")
    return M


def write_matrix(path: str, M: np.ndarray) -> None:
    """Write a matrix as dense CSV with 17 significant digits (lossless)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def write_descriptor(path: str, rows: int, cols: int, role: str) -> None:
    if role not in ROLES:
        raise GmdkitError(f"unknown role {role!r}")
    with open(path, "w") as fh:
        json.dump({"rows": rows, "cols": cols, "role": role}, fh, sort_keys=True)


def load_with_sidecar(path: str) -> np.ndarray:
    """Load a matrix, honoring ``<path>.json`` as its descriptor if present."""
    sidecar = path + ".json"
    descriptor = None
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            descriptor = json.load(fh)
    return load_matrix(path, descriptor)
