"""Applications on top of a fitted basis: the data-reduction codec,
2D layouts, variance and correlation views, the SIM indicator, and the
principal geodesic surface."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .ingest.bdt import Bdt, denormalized_points
from .metrics import wt2_bdts
from .pga import (
    PgaBasis,
    basis_from_archive_dict,
    basis_to_archive_dict,
    dumps_canonical,
    reconstruct,
)
from ._parallel import ordered_map


# ---------------------------------------------------------------------------
# codec

def archive_scalar_count(basis: PgaBasis) -> int:
    """Stored value scalars: origin points, axis vectors, coordinates."""
    nb = basis.origin.n_branches
    d = basis.d_max
    return 2 * nb + 4 * nb * d + basis.n_members * d


def input_scalar_count(ensemble: list[Bdt]) -> int:
    return sum(2 * b.n_branches for b in ensemble)


def compress(ensemble: list[Bdt], basis: PgaBasis) -> tuple[bytes, dict[str, Any]]:
    """Serialize the basis (origin, axes, coordinates) and report the
    compression factor as the ratio of value scalars; structural scalars
    (parent indices) appear identically on both sides and cancel."""
    blob = dumps_canonical(basis_to_archive_dict(basis))
    inp = input_scalar_count(ensemble)
    arc = archive_scalar_count(basis)
    stats = {
        "inputScalars": int(inp),
        "archiveScalars": int(arc),
        "compressionFactor": inp / arc,
        "archiveBytes": len(blob),
    }
    return blob, stats


def decompress(blob: bytes) -> PgaBasis:
    import json

    return basis_from_archive_dict(json.loads(blob.decode("utf-8")))


def reconstruction_error(
    ensemble: list[Bdt], basis: PgaBasis, workers: int = 1
) -> tuple[np.ndarray, float]:
    """Per-member W distance to its reconstruction, relative to the largest
    pairwise input distance; returns (per-member errors, mean)."""
    if len(ensemble) < 2:
        raise ValueError("reconstruction error needs at least 2 members")
    if basis.coords.shape[0] != len(ensemble):
        raise ValueError("basis coordinates do not cover the ensemble")
    scale = float(basis.params.get("maxPairwiseDistance", 0.0))
    if scale == 0.0:
        from .metrics import pairwise_wt2_sq

        scale = float(np.sqrt(pairwise_wt2_sq(ensemble, workers).max()))

    def one(jm):
        j, member = jm
        return wt2_bdts(reconstruct(basis, basis.coords[j]), member)[0]

    raw = np.asarray(ordered_map(one, list(enumerate(ensemble)), workers))
    if scale == 0.0:
        # identical members: reconstructions coincide and the error is null
        errs = np.zeros_like(raw)
    else:
        errs = raw / scale
    return errs, float(errs.mean())


# ---------------------------------------------------------------------------
# layout and variance

@dataclass
class Layout2D:
    points: np.ndarray
    axis_lengths: np.ndarray
    labels: list[str] | None = None

    def to_json_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "points": [[float(x), float(y)] for x, y in self.points],
            "axisLengths": [float(x) for x in self.axis_lengths],
        }
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out


def layout_2d(basis: PgaBasis, labels: list[str] | None = None) -> Layout2D:
    """Members at (coord_1 * length_1, coord_2 * length_2)."""
    if basis.d_max < 2:
        raise ValueError("layout needs at least 2 axes")
    lengths = basis.axis_lengths[:2]
    pts = basis.coords[:, :2] * lengths[None, :]
    if labels is not None and len(labels) != basis.n_members:
        raise ValueError("one label per member expected")
    return Layout2D(points=pts, axis_lengths=lengths.copy(), labels=labels)


def projected_variance(basis: PgaBasis, k: int) -> float:
    """Variance of the scaled projections along axis k over the global
    variance (mean squared distance of the members to the origin)."""
    if not 1 <= k <= basis.d_max:
        raise ValueError(f"axis {k} out of range")
    gv = float(basis.params.get("globalVariance", 0.0))
    if gv == 0.0:
        return 0.0
    scaled = basis.coords[:, k - 1] * float(basis.axis_lengths[k - 1])
    return float(scaled.var() / gv)


# ---------------------------------------------------------------------------
# persistence correlation

@dataclass
class CorrelationView:
    arrows: np.ndarray
    flags: list[bool] = field(default_factory=list)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "arrows": [[float(x), float(y)] for x, y in self.arrows],
            "flags": [bool(f) for f in self.flags],
        }


def _pearson_rows(p: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Population Pearson correlation of each row of p against vector a."""
    pc = p - p.mean(axis=1, keepdims=True)
    ac = a - a.mean()
    sp = np.sqrt((pc**2).mean(axis=1))
    sa = float(np.sqrt((ac**2).mean()))
    out = np.zeros(p.shape[0])
    ok = (sp > 0.0) & (sa > 0.0)
    if ok.any():
        cov = (pc[ok] * ac[None, :]).mean(axis=1)
        out[ok] = cov / (sp[ok] * sa)
    return out


def persistence_matrix(ensemble: list[Bdt], basis: PgaBasis, workers: int = 1) -> np.ndarray:
    """P[i, j] = persistence in input tree j of the feature matched to
    origin branch i, or 0 when the branch has no counterpart there.

    Assignments are recomputed between each member and its reconstruction
    at the fitted coordinates.
    """
    nb = basis.origin.n_branches

    def one(jm):
        j, member = jm
        rec = reconstruct(basis, basis.coords[j])
        _, asg = wt2_bdts(rec, member)
        raw = denormalized_points(member)
        pers = raw[:, 1] - raw[:, 0]
        col = np.zeros(nb)
        for i, jj in asg.pairs:
            if i is not None and jj is not None and i < nb:
                col[i] = pers[jj]
        return col

    cols = ordered_map(one, list(enumerate(ensemble)), workers)
    return np.column_stack(cols)


def persistence_correlation(
    basis: PgaBasis, ensemble: list[Bdt], workers: int = 1
) -> CorrelationView:
    """Correlation arrows (rho against axis-1 and axis-2 coordinates) per
    origin branch; a constant persistence row is flagged and drawn at the
    origin. Arrows are rescaled onto the unit disk in the rare case the
    two correlations jointly exceed it."""
    if basis.d_max < 2:
        raise ValueError("persistence correlation needs at least 2 axes")
    if len(ensemble) < 2:
        raise ValueError("persistence correlation needs at least 2 members")
    p = persistence_matrix(ensemble, basis, workers)
    rho1 = _pearson_rows(p, basis.coords[:, 0])
    rho2 = _pearson_rows(p, basis.coords[:, 1])
    arrows = np.column_stack([rho1, rho2])
    norms = np.linalg.norm(arrows, axis=1)
    over = norms > 1.0
    if over.any():
        arrows[over] /= norms[over, None]
    flags = [bool(sp == 0.0) for sp in p.std(axis=1)]
    return CorrelationView(arrows=arrows, flags=flags)


# ---------------------------------------------------------------------------
# SIM indicator

def sim_indicator(layout: Layout2D, ensemble: list[Bdt], workers: int = 1) -> float:
    """1 - mean normalized distortion between layout distances and the true
    pairwise distances, over unordered member pairs."""
    n = len(ensemble)
    if n < 2:
        raise ValueError("SIM needs at least 2 members")
    if layout.points.shape[0] != n:
        raise ValueError("layout does not cover the ensemble")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def delta(ij):
        i, j = ij
        true = wt2_bdts(ensemble[i], ensemble[j])[0]
        emb = float(np.linalg.norm(layout.points[i] - layout.points[j]))
        return (emb - true) ** 2

    deltas = np.asarray(ordered_map(delta, pairs, workers))
    top = deltas.max()
    if top == 0.0:
        return 1.0
    return float(1.0 - (deltas / top).mean())


# ---------------------------------------------------------------------------
# principal geodesic surface

def cyclic_jacobi(
    a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns,
    unsorted. Plain textbook scheme: sweep the upper triangle, zero each
    pivot with a Givens rotation, stop when the off-diagonal mass falls
    under tol relative to the Frobenius norm.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix expected")
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    if scale == 0.0 or n == 1:
        return np.diag(a).copy(), v
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.sqrt((a[off_mask] ** 2).sum()))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                elif theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def classical_mds(sq_dists: np.ndarray, k: int = 3) -> np.ndarray:
    """Torgerson embedding from a squared-distance matrix.

    Double-center, eigendecompose with cyclic Jacobi, take the top-k
    eigenpairs (negative eigenvalues clamp to zero), and fix each column's
    sign so its largest-magnitude component is positive.
    """
    d2 = np.asarray(sq_dists, dtype=np.float64)
    n = d2.shape[0]
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ d2 @ j
    b = 0.5 * (b + b.T)
    w, vecs = cyclic_jacobi(b)
    order = np.argsort(w)[::-1][:k]
    coords = np.zeros((n, k))
    for col, idx in enumerate(order):
        lam = max(float(w[idx]), 0.0)
        coords[:, col] = vecs[:, idx] * np.sqrt(lam)
    for col in range(k):
        pivot = int(np.argmax(np.abs(coords[:, col])))
        if coords[pivot, col] < 0.0:
            coords[:, col] = -coords[:, col]
    return coords


@dataclass
class PgsMesh:
    grid_dims: tuple[int, int]
    vertices: np.ndarray
    source_alphas: np.ndarray

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "gridDims": [int(self.grid_dims[0]), int(self.grid_dims[1])],
            "vertices": [[float(x) for x in row] for row in self.vertices],
            "sourceAlphas": [[float(x) for x in row] for row in self.source_alphas],
        }


def pgs_surface(basis: PgaBasis, nx: int, ny: int, workers: int = 1) -> PgsMesh:
    """Reconstruct an nx-by-ny lattice on the first two axes and embed its
    pairwise distance matrix in 3D by classical MDS."""
    if basis.d_max < 2:
        raise ValueError("the surface needs at least 2 axes")
    if nx < 2 or ny < 2:
        raise ValueError("grid dims must be at least 2")
    a1 = np.linspace(0.0, 1.0, nx)
    a2 = np.linspace(0.0, 1.0, ny)
    alphas = np.array([[x, y] for y in a2 for x in a1])
    trees = [reconstruct(basis, row) for row in alphas]
    m = len(trees)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]

    def dist(ij):
        i, j = ij
        return wt2_bdts(trees[i], trees[j])[0]

    vals = ordered_map(dist, pairs, workers)
    d2 = np.zeros((m, m))
    for (i, j), v in zip(pairs, vals):
        d2[i, j] = d2[j, i] = v * v
    verts = classical_mds(d2, k=3)
    return PgsMesh(grid_dims=(nx, ny), vertices=verts, source_alphas=alphas)
