"""Principal geodesic analysis over the BDT metric space.

A basis is an origin (the Fréchet barycenter) plus d_max geodesic axes.
Every axis stores two displacement fields g and gPrime of fixed length
2 x |origin| (one 2D entry per origin branch); after constraint
enforcement they are exactly negatively collinear and the direction
vectors V = g - gPrime of distinct axes are mutually orthogonal.

A point on axis i at coordinate a sits at origin + a*g + (1-a)*gPrime.
Multi-axis reconstruction applies the axes sequentially from the
accumulated position, rescaling each branch's displacement by the largest
lambda in (0,1] that keeps both translated extremities inside the valid
normalized region (birth >= 0, death <= 1, birth < death); the region is
convex, so the output is always a valid normalized BDT.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .ingest.bdt import Bdt, bdt_from_json_dict, bdt_to_json_dict
from .metrics import (
    Assignment,
    diagonal_projection,
    frechet_barycenter,
    geodesic,
    pairwise_wt2_sq,
    wt2_bdts,
)
from ._parallel import ordered_map

FORMAT_VERSION = 1


@dataclass
class GeodesicAxis:
    """One geodesic axis: displacement fields toward extremities E and E'."""

    g: np.ndarray
    g_prime: np.ndarray
    degenerate: bool = False

    def __post_init__(self) -> None:
        self.g = np.ascontiguousarray(self.g, dtype=np.float64).reshape(-1)
        self.g_prime = np.ascontiguousarray(self.g_prime, dtype=np.float64).reshape(-1)
        if self.g.size != self.g_prime.size:
            raise ValueError("g and gPrime must have equal length")

    @property
    def direction(self) -> np.ndarray:
        """Direction vector V = g - gPrime."""
        return self.g - self.g_prime


@dataclass
class PgaBasis:
    origin: Bdt
    axes: list[GeodesicAxis]
    axis_lengths: np.ndarray
    coords: np.ndarray
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.axis_lengths = np.ascontiguousarray(self.axis_lengths, dtype=np.float64)
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)

    @property
    def d_max(self) -> int:
        return len(self.axes)

    @property
    def n_members(self) -> int:
        return int(self.coords.shape[0])


@dataclass
class FitReport:
    """Fit diagnostics: (dimension, iteration, energy) rows plus convergence
    flags per dimension, closed-form fallback events, and degenerate axes."""

    energy_trace: list[tuple[int, int, float]] = field(default_factory=list)
    converged: list[bool] = field(default_factory=list)
    fallback_events: list[tuple[int, int]] = field(default_factory=list)
    degenerate_axes: list[int] = field(default_factory=list)

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "energyTrace": [[d, i, e] for d, i, e in self.energy_trace],
            "converged": list(self.converged),
            "fallbackEvents": [[d, i] for d, i in self.fallback_events],
            "degenerateAxes": list(self.degenerate_axes),
        }


# ---------------------------------------------------------------------------
# sequential axis application with per-branch validity rescaling

_DIAG_MARGIN = 1e-9


def _valid_lambda_single(pos: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Largest lambda in [0,1] per branch with pos + lambda*w still valid."""
    lam = np.ones(pos.shape[0], dtype=np.float64)
    wx, wy = w[:, 0], w[:, 1]
    px, py = pos[:, 0], pos[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        m = wx < 0
        if m.any():
            lam[m] = np.minimum(lam[m], px[m] / -wx[m])
        m = wy > 0
        if m.any():
            lam[m] = np.minimum(lam[m], (1.0 - py[m]) / wy[m])
        closing = wx - wy  # positive when the displacement narrows the gap
        m = closing > 0
        if m.any():
            gap = py[m] - px[m]
            lam[m] = np.minimum(lam[m], gap * (1.0 - _DIAG_MARGIN) / closing[m])
    return np.clip(lam, 0.0, 1.0)


def _valid_lambda(pos: np.ndarray, g: np.ndarray, gp: np.ndarray) -> np.ndarray:
    return np.minimum(_valid_lambda_single(pos, g), _valid_lambda_single(pos, gp))


def _apply_axes(
    origin_pts: np.ndarray, axes: list[GeodesicAxis], alpha: np.ndarray
) -> np.ndarray:
    pos = origin_pts.copy()
    for a, axis in zip(alpha, axes):
        g = axis.g.reshape(-1, 2)
        gp = axis.g_prime.reshape(-1, 2)
        lam = _valid_lambda(pos, g, gp)
        pos = pos + lam[:, None] * (a * g + (1.0 - a) * gp)
    return pos


def _as_bdt(origin: Bdt, pts: np.ndarray) -> Bdt:
    return Bdt(
        births=pts[:, 0],
        deaths=pts[:, 1],
        parent=origin.parent.copy(),
        normalized=True,
        root_interval=origin.root_interval if origin.root_interval else (0.0, 1.0),
    )


def reconstruct(basis: PgaBasis, alpha) -> Bdt:
    """Evaluate the basis at coordinates alpha (length <= d_max)."""
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    if alpha.size > basis.d_max:
        raise ValueError(f"alpha has {alpha.size} entries but d_max is {basis.d_max}")
    if alpha.size and (alpha.min() < 0.0 or alpha.max() > 1.0):
        raise ValueError("alpha out of [0,1]")
    pts = _apply_axes(basis.origin.points, basis.axes[: alpha.size], alpha)
    return _as_bdt(basis.origin, pts)


def materialize_extremity(origin: Bdt, w: np.ndarray) -> Bdt:
    """origin + w with per-branch rescaling into the valid region."""
    w = np.asarray(w, dtype=np.float64).reshape(-1, 2)
    pos = origin.points
    lam = _valid_lambda_single(pos, w)
    return _as_bdt(origin, pos + lam[:, None] * w)


# ---------------------------------------------------------------------------
# projection

def _project_member(
    member: Bdt,
    origin: Bdt,
    axes: list[GeodesicAxis],
    prev_coords: np.ndarray,
    n2: int,
) -> tuple[float, Bdt, Assignment, float]:
    """Search the N2 lattice on the last axis from the translated position.

    Returns (alpha, sample, assignment, distance); ties keep the smallest
    alpha. The assignment's left side indexes the sample (origin) branches.
    """
    d_prime = len(axes)
    pos_prev = _apply_axes(origin.points, axes[:-1], prev_coords)
    axis = axes[-1]
    g = axis.g.reshape(-1, 2)
    gp = axis.g_prime.reshape(-1, 2)
    lam = _valid_lambda(pos_prev, g, gp)[:, None]
    best: tuple[float, float, Bdt, Assignment] | None = None
    for a in np.linspace(0.0, 1.0, n2):
        pts = pos_prev + lam * (a * g + (1.0 - a) * gp)
        sample = _as_bdt(origin, pts)
        dist, asg = wt2_bdts(sample, member)
        if best is None or dist < best[0]:
            best = (dist, float(a), sample, asg)
    dist, a, sample, asg = best
    return a, sample, asg, dist


def project_tree(
    member: Bdt, basis: PgaBasis, d_prime: int, prev_coords
) -> tuple[float, Bdt]:
    """Project one BDT on axis d_prime given its earlier coordinates."""
    if not 1 <= d_prime <= basis.d_max:
        raise ValueError(f"dimension {d_prime} out of range")
    prev = np.asarray(prev_coords, dtype=np.float64).reshape(-1)
    if prev.size != d_prime - 1:
        raise ValueError(f"expected {d_prime - 1} previous coordinates, got {prev.size}")
    n2 = int(basis.params.get("n2", 16))
    alpha, sample, _, _ = _project_member(
        member, basis.origin, basis.axes[:d_prime], prev, n2
    )
    return alpha, sample


def fitting_energy(ensemble: list[Bdt], basis: PgaBasis, coords, workers: int = 1) -> float:
    """Sum of squared distances between members and their reconstructions."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[0] != len(ensemble):
        raise ValueError("coords must be shaped (N, d)")

    def one(jm):
        j, member = jm
        rec = reconstruct(basis, coords[j])
        return wt2_bdts(rec, member)[0] ** 2

    return float(sum(ordered_map(one, list(enumerate(ensemble)), workers)))


# ---------------------------------------------------------------------------
# axis initialization, closed-form update, constraint enforcement

def _restricted_geodesic(origin: Bdt, target: Bdt) -> np.ndarray:
    """Geodesic displacement restricted to the origin's own branches."""
    gv = geodesic(origin, target)
    return gv.vectors[: origin.n_branches].reshape(-1).copy()


def _init_axis(
    ensemble: list[Bdt],
    origin: Bdt,
    axes: list[GeodesicAxis],
    n2: int,
    base_dists: np.ndarray,
    workers: int = 1,
) -> GeodesicAxis:
    """Extremity = member farthest from everything fitted so far."""
    if not axes:
        dists = base_dists
    else:
        samples: list[Bdt] = []
        for axis in axes:
            for a in np.linspace(0.0, 1.0, n2):
                pts = _apply_axes(origin.points, [axis], np.asarray([a]))
                samples.append(_as_bdt(origin, pts))

        def dist_to_axes(member: Bdt) -> float:
            return min(wt2_bdts(s, member)[0] for s in samples)

        dists = np.asarray(ordered_map(dist_to_axes, ensemble, workers))
    e = int(np.argmax(dists))
    g = _restricted_geodesic(origin, ensemble[e])
    return GeodesicAxis(g=g, g_prime=-g)


def init_axis(ensemble: list[Bdt], basis: PgaBasis) -> GeodesicAxis:
    """Initialize the next axis after the ones already in the basis."""
    n2 = int(basis.params.get("n2", 16))
    base = np.asarray([wt2_bdts(basis.origin, m)[0] for m in ensemble])
    return _init_axis(ensemble, basis.origin, basis.axes, n2, base)


def _solve_axis_entries(
    alpha: np.ndarray, residuals: np.ndarray
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Per-entry 2x2 solve of the quadratic update.

    Minimizes sum_j || r_j - (a_j*g + (1-a_j)*g') ||^2 independently per
    entry; the normal matrix [[sum a^2, sum a(1-a)], [sum a(1-a), sum
    (1-a)^2]] is shared by every entry. Returns (g, gPrime, underflow);
    underflow means the system was singular (all alpha identical) and the
    caller should keep its current entries.
    """
    a = alpha.reshape(-1, 1, 1)
    b = 1.0 - a
    s11 = float((alpha**2).sum())
    s22 = float(((1.0 - alpha) ** 2).sum())
    s12 = float((alpha * (1.0 - alpha)).sum())
    det = s11 * s22 - s12 * s12
    if det <= 1e-12 * max(1.0, s11 * s22):
        shape = residuals.shape[1:]
        return np.zeros(shape), np.zeros(shape), True
    rhs1 = (a * residuals).sum(axis=0)
    rhs2 = (b * residuals).sum(axis=0)
    g = (s22 * rhs1 - s12 * rhs2) / det
    gp = (-s12 * rhs1 + s11 * rhs2) / det
    return g, gp, False


def _member_targets(
    origin: Bdt, member: Bdt, sample: Bdt, asg: Assignment
) -> np.ndarray:
    """Per-origin-branch target points under a fixed assignment.

    Matched branches pull toward the member's point; branches destroyed in
    the member pull toward the diagonal projection of their sample position
    (a fixed 2D point). Member branches with no counterpart contribute
    constant creation cost and no target.
    """
    n = origin.n_branches
    targets = np.empty((n, 2), dtype=np.float64)
    mpts = member.points
    spts = sample.points
    seen = np.zeros(n, dtype=bool)
    for i, j in asg.pairs:
        if i is None or i >= n:
            continue
        targets[i] = mpts[j] if j is not None else diagonal_projection(spts[i])
        seen[i] = True
    if not seen.all():
        raise AssertionError("assignment must cover every origin branch")
    return targets


def update_axis(
    ensemble: list[Bdt],
    basis: PgaBasis,
    d_prime: int,
    coords: np.ndarray,
    assignments: list[Assignment],
    samples: list[Bdt] | None = None,
) -> tuple[GeodesicAxis, bool]:
    """Closed-form re-fit of axis d_prime's vectors under fixed assignments.

    Returns (axis, underflow). Residuals subtract the origin and the raw
    contributions of axes 1..d_prime-1; the per-entry solve then yields the
    energy-minimizing g, gPrime for axis d_prime. On denominator underflow
    the incoming entries are kept unchanged.
    """
    coords = np.asarray(coords, dtype=np.float64)
    origin = basis.origin
    n = origin.n_branches
    if samples is None:
        samples = [reconstruct(basis, coords[j, :d_prime]) for j in range(len(ensemble))]
    base = origin.points[None, :, :].copy()
    prev = np.repeat(base, len(ensemble), axis=0)
    for k in range(d_prime - 1):
        ax = basis.axes[k]
        gk = ax.g.reshape(-1, 2)
        gpk = ax.g_prime.reshape(-1, 2)
        ak = coords[:, k].reshape(-1, 1, 1)
        prev = prev + ak * gk[None] + (1.0 - ak) * gpk[None]
    targets = np.stack(
        [
            _member_targets(origin, member, sample, asg)
            for member, sample, asg in zip(ensemble, samples, assignments)
        ]
    )
    residuals = targets - prev
    g, gp, underflow = _solve_axis_entries(coords[:, d_prime - 1], residuals)
    old = basis.axes[d_prime - 1]
    if underflow:
        return GeodesicAxis(old.g.copy(), old.g_prime.copy(), old.degenerate), True
    g[0] = 0.0
    gp[0] = 0.0
    return GeodesicAxis(g=g.reshape(-1), g_prime=gp.reshape(-1)), False


def enforce_geodesic(axis: GeodesicAxis, origin: Bdt) -> GeodesicAxis:
    """Re-derive g and gPrime from optimal assignments to their extremities."""
    if axis.degenerate:
        return axis
    e = materialize_extremity(origin, axis.g)
    g = _restricted_geodesic(origin, e)
    ep = materialize_extremity(origin, axis.g_prime)
    gp = _restricted_geodesic(origin, ep)
    return GeodesicAxis(g=g, g_prime=gp, degenerate=axis.degenerate)


def enforce_collinearity(axis: GeodesicAxis) -> GeodesicAxis:
    """Snap g, gPrime onto the line through V = g - gPrime.

    beta' = |g| / (|g| + |gPrime|) keeps the origin's relative position on
    the axis; a zero direction vector marks the axis degenerate.
    """
    v = axis.direction
    nv = float(np.linalg.norm(v))
    ng = float(np.linalg.norm(axis.g))
    ngp = float(np.linalg.norm(axis.g_prime))
    if nv == 0.0 or ng + ngp == 0.0:
        zero = np.zeros_like(axis.g)
        return GeodesicAxis(g=zero, g_prime=zero.copy(), degenerate=True)
    beta = ng / (ng + ngp)
    return GeodesicAxis(g=beta * v, g_prime=-(1.0 - beta) * v, degenerate=axis.degenerate)


def enforce_orthogonality(
    axis: GeodesicAxis, previous: list[GeodesicAxis]
) -> GeodesicAxis:
    """Gram-Schmidt the direction vector against all previous axes."""
    if axis.degenerate:
        return axis
    v = axis.direction.copy()
    scale = float(np.linalg.norm(v))
    for prev in previous:
        if prev.degenerate:
            continue
        vp = prev.direction
        denom = float(vp @ vp)
        if denom > 0.0:
            v -= (float(v @ vp) / denom) * vp
    nv = float(np.linalg.norm(v))
    if scale == 0.0 or nv <= 1e-12 * scale:
        zero = np.zeros_like(axis.g)
        return GeodesicAxis(g=zero, g_prime=zero.copy(), degenerate=True)
    ng = float(np.linalg.norm(axis.g))
    ngp = float(np.linalg.norm(axis.g_prime))
    beta = 0.5 if ng + ngp == 0.0 else ng / (ng + ngp)
    return GeodesicAxis(g=beta * v, g_prime=-(1.0 - beta) * v, degenerate=axis.degenerate)


def _constraint_loop(
    axis: GeodesicAxis, origin: Bdt, previous: list[GeodesicAxis], rounds: int = 4
) -> GeodesicAxis:
    for _ in range(rounds):
        axis = enforce_geodesic(axis, origin)
        axis = enforce_collinearity(axis)
        axis = enforce_orthogonality(axis, previous)
        if axis.degenerate:
            break
    return axis


# ---------------------------------------------------------------------------
# the fit loop

def fit_basis(
    ensemble: list[Bdt],
    d_max: int,
    n1: int,
    n2: int,
    *,
    workers: int = 1,
    extra_params: dict[str, Any] | None = None,
    max_inner: int = 50,
) -> tuple[PgaBasis, FitReport]:
    """Fit an orthogonal basis of geodesic axes to the ensemble.

    Per dimension: initialize at the farthest member, run the constraint
    loop, then alternate projection (per-member lattice search), closed-form
    update and constraints until the energy decrease falls under 1%, two
    consecutive increases occur, or the energy hits zero. The best
    (axis, coordinates) state seen is restored at the end of each dimension,
    so the terminal energy never exceeds the dimension's first evaluation.
    """
    n = len(ensemble)
    if n < 2:
        raise ValueError("fit_basis needs at least 2 members")
    for b in ensemble:
        if not b.normalized:
            raise ValueError("fit_basis expects normalized BDTs")
    if d_max < 1:
        raise ValueError("d_max must be at least 1")
    if n2 < 2:
        raise ValueError("n2 must be at least 2")

    pairwise = pairwise_wt2_sq(ensemble, workers)
    origin, bary_assigns = frechet_barycenter(
        ensemble, n1, pairwise_sq=pairwise, workers=workers
    )
    nb = origin.n_branches
    if d_max > 2 * nb:
        raise ValueError(f"d_max must be at most 2*|origin| = {2 * nb}")

    base_dists = np.sqrt(np.asarray([a.cost for a in bary_assigns]))
    global_variance = float(np.mean([a.cost for a in bary_assigns]))
    max_pairwise = float(np.sqrt(pairwise.max())) if n > 1 else 0.0

    report = FitReport()
    axes: list[GeodesicAxis] = []
    coords = np.zeros((n, 0), dtype=np.float64)

    for dp in range(1, d_max + 1):
        axis = _init_axis(ensemble, origin, axes, n2, base_dists, workers)
        axis = _constraint_loop(axis, origin, axes)

        best_state = None  # (energy, axis, alphas)
        prev_energy = None
        increase_streak = 0
        converged = False
        it = 0
        while True:
            trial = axes + [axis]

            def project(jm):
                j, member = jm
                return _project_member(member, origin, trial, coords[j], n2)

            proj = ordered_map(project, list(enumerate(ensemble)), workers)
            alphas = np.asarray([p[0] for p in proj])
            p_samples = [p[1] for p in proj]
            p_assigns = [p[2] for p in proj]
            energy = float(sum(p[3] ** 2 for p in proj))
            report.energy_trace.append((dp, it, energy))

            if best_state is None or energy < best_state[0]:
                best_state = (energy, axis, alphas)

            if prev_energy is not None:
                if energy > prev_energy:
                    increase_streak += 1
                    if increase_streak >= 2:
                        # second increase in a row: the probe is rejected, so it
                        # is not part of the accepted trajectory
                        report.energy_trace.pop()
                        break
                else:
                    increase_streak = 0
                    if (prev_energy - energy) < 0.01 * prev_energy:
                        converged = True
                        break
            if energy < 1e-30:
                converged = True
                break
            if it >= max_inner:
                break
            prev_energy = energy

            tmp_basis = PgaBasis(
                origin=origin,
                axes=trial,
                axis_lengths=np.zeros(dp),
                coords=np.column_stack([coords, alphas]),
                params={"n2": n2},
            )
            axis, underflow = update_axis(
                ensemble,
                tmp_basis,
                dp,
                np.column_stack([coords, alphas]),
                p_assigns,
                p_samples,
            )
            if underflow:
                report.fallback_events.append((dp, it))
            axis = _constraint_loop(axis, origin, axes)
            it += 1

        final_energy = report.energy_trace[-1][2]
        if best_state[0] < final_energy:
            _, axis, alphas = best_state
            report.energy_trace.append((dp, it + 1, best_state[0]))
        report.converged.append(converged)
        if axis.degenerate:
            report.degenerate_axes.append(dp)
        axes.append(axis)
        coords = np.column_stack([coords, alphas])

    lengths = []
    for axis in axes:
        e = materialize_extremity(origin, axis.g)
        ep = materialize_extremity(origin, axis.g_prime)
        lengths.append(wt2_bdts(e, ep)[0])

    params: dict[str, Any] = {
        "dMax": int(d_max),
        "n1": int(n1),
        "n2": int(n2),
        "globalVariance": global_variance,
        "maxPairwiseDistance": max_pairwise,
    }
    if extra_params:
        params.update(extra_params)
    basis = PgaBasis(
        origin=origin,
        axes=axes,
        axis_lengths=np.asarray(lengths),
        coords=coords,
        params=params,
    )
    return basis, report


# ---------------------------------------------------------------------------
# archive serialization

def dumps_canonical(obj: Any) -> bytes:
    """Canonical JSON bytes: sorted keys, no whitespace, shortest floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode(
        "utf-8"
    )


def basis_to_archive_dict(basis: PgaBasis) -> dict[str, Any]:
    return {
        "formatVersion": FORMAT_VERSION,
        "origin": bdt_to_json_dict(basis.origin),
        "axes": [
            {"g": [float(x) for x in ax.g], "gPrime": [float(x) for x in ax.g_prime]}
            for ax in basis.axes
        ],
        "axisLengths": [float(x) for x in basis.axis_lengths],
        "coords": [[float(x) for x in row] for row in basis.coords],
        "params": basis.params,
    }


def basis_from_archive_dict(obj: dict[str, Any]) -> PgaBasis:
    if not isinstance(obj, dict) or "origin" not in obj:
        raise ValueError("archive must be an object with an 'origin' BDT")
    version = obj.get("formatVersion")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported archive formatVersion {version!r}")
    origin = bdt_from_json_dict(obj["origin"])
    axes = [
        GeodesicAxis(
            g=np.asarray(ax["g"], dtype=np.float64),
            g_prime=np.asarray(ax["gPrime"], dtype=np.float64),
        )
        for ax in obj.get("axes", [])
    ]
    n_axes = len(axes)
    coords = np.asarray(obj.get("coords", []), dtype=np.float64)
    if coords.size == 0:
        coords = coords.reshape(0, n_axes)
    basis = PgaBasis(
        origin=origin,
        axes=axes,
        axis_lengths=np.asarray(obj.get("axisLengths", []), dtype=np.float64),
        coords=coords,
        params=dict(obj.get("params", {})),
    )
    return basis
