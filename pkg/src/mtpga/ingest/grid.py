"""Regular-grid scalar fields and the ``.grid`` text format.

A field lives on an nx x ny x nz vertex grid with 6-neighborhood
connectivity (4-neighborhood when nz == 1, a path when ny == nz == 1).
Values are stored flat in x-fastest order: vertex (ix, iy, iz) sits at
index ix + nx * (iy + ny * iz).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GridParseError(ValueError):
    """A ``.grid`` file could not be parsed; the message names the line."""


@dataclass
class ScalarFieldGrid:
    """A piecewise-linear scalar field sampled on a regular grid.

    Parameters
    ----------
    dims : tuple of int
        Grid extents (nx, ny, nz), all positive.
    values : ndarray
        Flat float64 array of length nx*ny*nz, x-fastest order.
    id : str
        Member label, defaults to empty.
    """

    dims: tuple[int, int, int]
    values: np.ndarray
    id: str = ""

    def __post_init__(self) -> None:
        nx, ny, nz = (int(d) for d in self.dims)
        self.dims = (nx, ny, nz)
        if min(self.dims) < 1:
            raise ValueError(f"grid dims must be positive, got {self.dims}")
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (nx * ny * nz,):
            raise ValueError(
                f"expected {nx * ny * nz} values, got {self.values.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def n_vertices(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def neighbor_lists(self) -> list[np.ndarray]:
        """Per-vertex arrays of adjacent vertex indices (face neighbors)."""
        nx, ny, nz = self.dims
        out: list[np.ndarray] = []
        for v in range(self.n_vertices):
            ix = v % nx
            iy = (v // nx) % ny
            iz = v // (nx * ny)
            nbrs = []
            if ix > 0:
                nbrs.append(v - 1)
            if ix < nx - 1:
                nbrs.append(v + 1)
            if iy > 0:
                nbrs.append(v - nx)
            if iy < ny - 1:
                nbrs.append(v + nx)
            if iz > 0:
                nbrs.append(v - nx * ny)
            if iz < nz - 1:
                nbrs.append(v + nx * ny)
            out.append(np.asarray(nbrs, dtype=np.int64))
        return out


def load_scalar_field(path: str | Path, member_id: str | None = None) -> ScalarFieldGrid:
    """Parse a ``.grid`` text file.

    Line 1 must read ``dims nx ny nz``; the remaining lines hold
    whitespace-separated scalars in x-fastest order. Raises
    :class:`GridParseError` naming the offending line on malformed input.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise GridParseError(f"{path}: line 1: empty file, expected 'dims nx ny nz'")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "dims":
        raise GridParseError(
            f"{path}: line 1: malformed header {lines[0]!r}, expected 'dims nx ny nz'"
        )
    try:
        nx, ny, nz = (int(tok) for tok in header[1:])
    except ValueError:
        raise GridParseError(
            f"{path}: line 1: non-integer dimension in {lines[0]!r}"
        ) from None
    if min(nx, ny, nz) < 1:
        raise GridParseError(f"{path}: line 1: dims must be positive, got {nx} {ny} {nz}")

    expected = nx * ny * nz
    values: list[float] = []
    last_line = 1
    for lineno, line in enumerate(lines[1:], start=2):
        toks = line.split()
        if toks:
            last_line = lineno
        for tok in toks:
            try:
                x = float(tok)
            except ValueError:
                raise GridParseError(
                    f"{path}: line {lineno}: not a number: {tok!r}"
                ) from None
            if not np.isfinite(x):
                raise GridParseError(f"{path}: line {lineno}: non-finite value {tok!r}")
            values.append(x)
            if len(values) > expected:
                raise GridParseError(
                    f"{path}: line {lineno}: expected {expected} values, got more"
                )
    if len(values) != expected:
        raise GridParseError(
            f"{path}: line {last_line}: expected {expected} values, got {len(values)}"
        )
    if member_id is None:
        member_id = path.stem
    return ScalarFieldGrid(dims=(nx, ny, nz), values=np.asarray(values), id=member_id)
