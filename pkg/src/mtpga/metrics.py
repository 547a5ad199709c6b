"""Distances between persistence diagrams and branch decomposition trees.

The diagram metric solves one exact assignment over diagonally augmented
point sets. The BDT metric is a bottom-up dynamic program whose assignments
are constrained to rooted partial isomorphisms: a branch can only match a
branch whose parent matches its parent's match, and destroying a branch
destroys its whole subtree. Geodesics, interpolation and the Fréchet
barycenter all live in the same normalized birth/death space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ingest.bdt import Bdt, InvalidBdtError, absolute_persistence
from ._parallel import ordered_map


@dataclass
class Assignment:
    """Branch/point correspondences realizing a transport cost.

    Each pair is (left index, right index); None on one side stands for the
    diagonal: (i, None) destroys left item i, (None, j) creates right item j.
    cost is the total squared transport cost of the pairs.
    """

    pairs: list[tuple[int | None, int | None]]
    cost: float

    def matched(self) -> dict[int, int]:
        return {i: j for i, j in self.pairs if i is not None and j is not None}

    def destroyed(self) -> list[int]:
        return [i for i, j in self.pairs if i is not None and j is None]

    def created(self) -> list[int]:
        return [j for i, j in self.pairs if i is None and j is not None]

    def to_json_list(self) -> list[list]:
        return [[i, j] for i, j in self.pairs]


@dataclass
class GeodesicVector:
    """Flat per-branch displacement field anchored at a BDT.

    entries has length 2 x anchor branch count; entries[2k:2k+2] displaces
    branch k of the anchor in (birth, death) coordinates.
    """

    anchor: Bdt
    entries: np.ndarray

    def __post_init__(self) -> None:
        self.entries = np.ascontiguousarray(self.entries, dtype=np.float64).reshape(-1)
        if self.entries.size != 2 * self.anchor.n_branches:
            raise ValueError(
                f"expected {2 * self.anchor.n_branches} entries, got {self.entries.size}"
            )

    @property
    def vectors(self) -> np.ndarray:
        return self.entries.reshape(-1, 2)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def diagonal_projection(p) -> np.ndarray:
    """Midpoint projection of a birth/death point onto the diagonal."""
    p = np.asarray(p, dtype=np.float64)
    m = 0.5 * (p[..., 0] + p[..., 1])
    return np.stack([m, m], axis=-1)


def ground_distance(p, q, q_exp: float = 2.0) -> float:
    """Lq norm between two birth/death points, 0 between diagonal points."""
    if q_exp <= 0:
        raise ValueError("exponent must be positive")
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p[0] == p[1] and q[0] == q[1]:
        return 0.0
    d = np.abs(p - q)
    return float((d[0] ** q_exp + d[1] ** q_exp) ** (1.0 / q_exp))


def _as_diagram(d) -> np.ndarray:
    arr = np.asarray(d, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    return arr.reshape(-1, 2)


def _destruction_sq(points: np.ndarray) -> np.ndarray:
    """Squared d2 cost of moving each point to its diagonal projection."""
    return 0.5 * (points[:, 1] - points[:, 0]) ** 2


def w2_diagrams(di, dj) -> tuple[float, Assignment]:
    """Exact 2-Wasserstein distance between persistence diagrams.

    Both diagrams are augmented with the other's diagonal projections and a
    single square assignment is solved: point-to-point moves cost squared d2,
    moving to the diagonal costs the squared destruction distance, and
    diagonal-to-diagonal slots are free.
    """
    pi = _as_diagram(di)
    pj = _as_diagram(dj)
    n, m = pi.shape[0], pj.shape[0]
    if n == 0 and m == 0:
        return 0.0, Assignment([], 0.0)
    size = n + m
    cost = np.full((size, size), np.inf)
    if n and m:
        block = ((pi[:, None, :] - pj[None, :, :]) ** 2).sum(axis=-1)
        on_diag_i = pi[:, 0] == pi[:, 1]
        on_diag_j = pj[:, 0] == pj[:, 1]
        if on_diag_i.any() and on_diag_j.any():
            block[np.ix_(on_diag_i, on_diag_j)] = 0.0
        cost[:n, :m] = block
    if n:
        cost[np.arange(n), m + np.arange(n)] = _destruction_sq(pi)
    if m:
        cost[n + np.arange(m), np.arange(m)] = _destruction_sq(pj)
    cost[n:, m:] = 0.0
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    pairs: list[tuple[int | None, int | None]] = []
    for r, c in zip(rows, cols):
        if r < n and c < m:
            pairs.append((int(r), int(c)))
        elif r < n:
            pairs.append((int(r), None))
        elif c < m:
            pairs.append((None, int(c)))
    return float(np.sqrt(max(total, 0.0))), Assignment(pairs, total)


def _subtree_destruction_sq(bdt: Bdt, children: list[list[int]]) -> np.ndarray:
    out = _destruction_sq(bdt.points)
    for i in range(bdt.n_branches - 1, -1, -1):
        for c in children[i]:
            out[i] += out[c]
    return out


def _forest_solve(
    ci: list[int],
    cj: list[int],
    dist: np.ndarray,
    destr_i: np.ndarray,
    destr_j: np.ndarray,
) -> tuple[float, list[tuple[int | None, int | None]]]:
    """Optimal matching of two child forests; unmatched subtrees are
    destroyed (left) or created (right). Returns cost and child-level picks
    as indices into ci / cj."""
    k1, k2 = len(ci), len(cj)
    sub = dist[np.ix_(ci, cj)]
    di = destr_i[ci]
    dj = destr_j[cj]
    if k1 == 1 and k2 == 1:
        if sub[0, 0] <= di[0] + dj[0]:
            return float(sub[0, 0]), [(0, 0)]
        return float(di[0] + dj[0]), [(0, None), (None, 0)]
    if k1 == 1:
        base = float(dj.sum())
        gains = sub[0, :] - dj
        b = int(np.argmin(gains))
        if gains[b] <= di[0]:
            picks = [(0, b)] + [(None, x) for x in range(k2) if x != b]
            return base + float(gains[b]), picks
        picks = [(0, None)] + [(None, x) for x in range(k2)]
        return float(di[0]) + base, picks
    if k2 == 1:
        base = float(di.sum())
        gains = sub[:, 0] - di
        a = int(np.argmin(gains))
        if gains[a] <= dj[0]:
            picks = [(a, 0)] + [(x, None) for x in range(k1) if x != a]
            return base + float(gains[a]), picks
        picks = [(None, 0)] + [(x, None) for x in range(k1)]
        return float(dj[0]) + base, picks
    size = k1 + k2
    mat = np.full((size, size), np.inf)
    mat[:k1, :k2] = sub
    mat[np.arange(k1), k2 + np.arange(k1)] = di
    mat[k1 + np.arange(k2), np.arange(k2)] = dj
    mat[k1:, k2:] = 0.0
    rows, cols = linear_sum_assignment(mat)
    total = float(mat[rows, cols].sum())
    picks: list[tuple[int | None, int | None]] = []
    for r, c in zip(rows, cols):
        if r < k1 and c < k2:
            picks.append((int(r), int(c)))
        elif r < k1:
            picks.append((int(r), None))
        elif c < k2:
            picks.append((None, int(c)))
    return total, picks


def _require_normalized(*bdts: Bdt) -> None:
    for b in bdts:
        if not b.normalized:
            raise InvalidBdtError("this metric operates on normalized BDTs")


def wt2_bdts(bi: Bdt, bj: Bdt) -> tuple[float, Assignment]:
    """Constrained 2-Wasserstein distance between two normalized BDTs.

    dist2(a, b) = d2(a, b)^2 + forest cost of their child sets, computed
    bottom-up; a destroyed branch takes its whole subtree to the diagonal at
    precomputed cost. Roots always match. Returns the distance and the full
    branch assignment (every branch of both trees appears exactly once).
    """
    _require_normalized(bi, bj)
    ni, nj = bi.n_branches, bj.n_branches
    pi, pj = bi.points, bj.points
    chi, chj = bi.children_lists(), bj.children_lists()
    ground = ((pi[:, None, :] - pj[None, :, :]) ** 2).sum(axis=-1)
    zi = bi.persistence == 0
    zj = bj.persistence == 0
    if zi.any() and zj.any():
        ground[np.ix_(zi, zj)] = 0.0
    destr_i = _subtree_destruction_sq(bi, chi)
    destr_j = _subtree_destruction_sq(bj, chj)
    csum_i = np.array([sum(destr_i[c] for c in ch) for ch in chi])
    csum_j = np.array([sum(destr_j[c] for c in ch) for ch in chj])

    dist = ground.copy()
    internal_i = [i for i in range(ni) if chi[i]]
    internal_j = [j for j in range(nj) if chj[j]]
    for j in internal_j:
        dist[:, j] += csum_j[j]
    for i in internal_i:
        dist[i, :] += csum_i[i]

    choices: dict[tuple[int, int], list[tuple[int | None, int | None]]] = {}
    for i in reversed(internal_i):
        for j in reversed(internal_j):
            forest, picks = _forest_solve(chi[i], chj[j], dist, destr_i, destr_j)
            dist[i, j] = ground[i, j] + forest
            choices[(i, j)] = picks

    total = float(dist[0, 0])

    pairs: list[tuple[int | None, int | None]] = []

    def emit_subtree(root: int, side: str) -> None:
        stack = [root]
        while stack:
            x = stack.pop()
            pairs.append((x, None) if side == "left" else (None, x))
            kids = chi[x] if side == "left" else chj[x]
            stack.extend(reversed(kids))

    queue: list[tuple[int, int]] = [(0, 0)]
    while queue:
        i, j = queue.pop(0)
        pairs.append((i, j))
        ci, cj = chi[i], chj[j]
        if ci and cj:
            for a, b in choices[(i, j)]:
                if a is not None and b is not None:
                    queue.append((ci[a], cj[b]))
                elif a is not None:
                    emit_subtree(ci[a], "left")
                else:
                    emit_subtree(cj[b], "right")
        elif ci:
            for c in ci:
                emit_subtree(c, "left")
        elif cj:
            for c in cj:
                emit_subtree(c, "right")

    return float(np.sqrt(max(total, 0.0))), Assignment(pairs, total)


def assignment_cost(pairs, pts_i: np.ndarray, pts_j: np.ndarray) -> float:
    """Recompute the squared transport cost of an assignment from scratch."""
    total = 0.0
    for i, j in pairs:
        if i is not None and j is not None:
            total += float(((pts_i[i] - pts_j[j]) ** 2).sum())
        elif i is not None:
            total += 0.5 * float((pts_i[i, 1] - pts_i[i, 0]) ** 2)
        else:
            total += 0.5 * float((pts_j[j, 1] - pts_j[j, 0]) ** 2)
    return total


def geodesic(bi: Bdt, bj: Bdt) -> GeodesicVector:
    """Geodesic from Bi toward Bj under the optimal branch assignment.

    The anchor is Bi augmented with one zero-persistence diagonal branch per
    branch created in Bj (appended in Bj index order, attached under the
    image of its Bj parent). Entry k is the displacement taking anchor branch
    k to its target; the vector's Euclidean norm equals the distance.
    """
    _, asg = wt2_bdts(bi, bj)
    ni = bi.n_branches
    pi, pj = bi.points, bj.points
    match_of_j = {j: i for i, j in asg.pairs if i is not None and j is not None}
    created = sorted(asg.created())

    n_aug = ni + len(created)
    anchor_pts = np.zeros((n_aug, 2), dtype=np.float64)
    anchor_pts[:ni] = pi
    anchor_parent = np.full(n_aug, -1, dtype=np.int64)
    anchor_parent[:ni] = bi.parent
    vectors = np.zeros((n_aug, 2), dtype=np.float64)

    for i, j in asg.pairs:
        if i is not None and j is not None:
            vectors[i] = pj[j] - pi[i]
        elif i is not None:
            vectors[i] = diagonal_projection(pi[i]) - pi[i]

    aug_index: dict[int, int] = {}
    for k, j in enumerate(created):
        idx = ni + k
        aug_index[j] = idx
        target = pj[j]
        base = diagonal_projection(target)
        anchor_pts[idx] = base
        vectors[idx] = target - base
        pjj = int(bj.parent[j])
        anchor_parent[idx] = aug_index[pjj] if pjj in aug_index else match_of_j[pjj]

    anchor = Bdt(
        births=anchor_pts[:, 0],
        deaths=anchor_pts[:, 1],
        parent=anchor_parent,
        normalized=True,
        root_interval=(0.0, 1.0) if bi.root_interval is None else bi.root_interval,
    )
    return GeodesicVector(anchor=anchor, entries=vectors.reshape(-1))


def interpolate(b: Bdt, g: GeodesicVector, t: float) -> Bdt:
    """Displace each branch of B by t times its geodesic entry.

    B must be the vector's anchor. Drift beyond [0,1] or past the diagonal of
    more than 1e-12 raises InvalidBdtError; smaller drift is clamped.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0,1], got {t}")
    if b.n_branches != g.anchor.n_branches or not np.allclose(
        b.points, g.anchor.points, atol=1e-12, rtol=0.0
    ):
        raise InvalidBdtError("vector is not anchored at this BDT")
    pts = b.points + t * g.vectors
    tol = 1e-12
    if pts.min() < -tol or pts.max() > 1.0 + tol:
        raise InvalidBdtError("interpolation leaves the unit interval")
    np.clip(pts, 0.0, 1.0, out=pts)
    gap = pts[:, 1] - pts[:, 0]
    if gap.min() < -tol:
        raise InvalidBdtError("interpolation crosses the diagonal")
    bad = gap < 0
    if bad.any():
        mid = 0.5 * (pts[bad, 0] + pts[bad, 1])
        pts[bad, 0] = mid
        pts[bad, 1] = mid
    return Bdt(
        births=pts[:, 0],
        deaths=pts[:, 1],
        parent=b.parent.copy(),
        normalized=True,
        root_interval=b.root_interval,
    )


def pairwise_wt2_sq(ensemble: list[Bdt], workers: int = 1) -> np.ndarray:
    """Symmetric matrix of squared pairwise BDT distances."""
    n = len(ensemble)
    idx = [(j, k) for j in range(n) for k in range(j + 1, n)]
    vals = ordered_map(
        lambda jk: wt2_bdts(ensemble[jk[0]], ensemble[jk[1]])[0] ** 2, idx, workers
    )
    out = np.zeros((n, n), dtype=np.float64)
    for (j, k), v in zip(idx, vals):
        out[j, k] = out[k, j] = v
    return out


def frechet_barycenter(
    ensemble: list[Bdt],
    n1: int,
    *,
    pairwise_sq: np.ndarray | None = None,
    workers: int = 1,
    max_iter: int = 100,
) -> tuple[Bdt, list[Assignment]]:
    """Fréchet barycenter of an ensemble under the BDT metric.

    Starts from the member with least sum of squared distances to the rest,
    then alternates assignment and arithmetic-mean updates (destroyed
    branches pull toward their current diagonal projection) until the energy
    decrease drops below 1%. Afterwards, branches that received only diagonal
    matches are deleted with their subtrees and the N1 most persistent
    branches (by absolute persistence) are kept. The returned assignments
    pair the final barycenter (left side) with each member.
    """
    if not ensemble:
        raise ValueError("empty ensemble")
    _require_normalized(*ensemble)
    if n1 < 1:
        raise ValueError("branch budget N1 must be at least 1")
    n = len(ensemble)

    if n == 1:
        bary = ensemble[0]
    else:
        d2 = pairwise_sq if pairwise_sq is not None else pairwise_wt2_sq(ensemble, workers)
        bary = ensemble[int(np.argmin(d2.sum(axis=1)))]
    bary = Bdt(
        births=bary.births.copy(),
        deaths=bary.deaths.copy(),
        parent=bary.parent.copy(),
        normalized=True,
        root_interval=(0.0, 1.0),
    )

    def assign_all(b: Bdt) -> list[Assignment]:
        return ordered_map(lambda m: wt2_bdts(b, m)[1], ensemble, workers)

    assigns = assign_all(bary)
    prev = sum(a.cost for a in assigns)
    for _ in range(max_iter):
        if prev == 0.0:
            break
        pts = bary.points
        acc = np.zeros_like(pts)
        for member, asg in zip(ensemble, assigns):
            mpts = member.points
            for i, j in asg.pairs:
                if i is None:
                    continue  # branch created in the member: constant cost
                if j is not None:
                    acc[i] += mpts[j]
                else:
                    acc[i] += diagonal_projection(pts[i])
        newpts = acc / n
        bary = Bdt(
            births=newpts[:, 0],
            deaths=newpts[:, 1],
            parent=bary.parent.copy(),
            normalized=True,
            root_interval=(0.0, 1.0),
        )
        assigns = assign_all(bary)
        energy = sum(a.cost for a in assigns)
        done = (prev - energy) < 0.01 * prev
        prev = energy
        if done:
            break

    # delete branches that only ever matched the diagonal (with their
    # subtrees: a branch destroyed in every member destroys its children in
    # every member too), then keep the N1 most persistent branches
    nb = bary.n_branches
    matched_any = np.zeros(nb, dtype=bool)
    matched_any[0] = True
    for asg in assigns:
        for i, j in asg.pairs:
            if i is not None and j is not None:
                matched_any[i] = True
    ap = absolute_persistence(bary)
    depths = bary.depths()
    alive = [i for i in range(nb) if matched_any[i]]
    ranked = sorted(alive, key=lambda i: (-ap[i], depths[i], i))
    kept = sorted(ranked[: min(n1, len(ranked))])
    keep_set = set(kept)
    for i in kept:
        p = int(bary.parent[i])
        if p >= 0 and p not in keep_set:
            raise AssertionError("branch truncation must be ancestor-closed")
    if len(kept) != nb:
        remap = {old: new for new, old in enumerate(kept)}
        bary = Bdt(
            births=bary.births[kept],
            deaths=bary.deaths[kept],
            parent=np.asarray(
                [remap[int(bary.parent[i])] if int(bary.parent[i]) >= 0 else -1 for i in kept],
                dtype=np.int64,
            ),
            normalized=True,
            root_interval=(0.0, 1.0),
        )
        assigns = assign_all(bary)
    return bary, assigns
