"""Independent reference implementations used to cross-check the package.

Everything here is deliberately brute force: exhaustive enumeration for the
small-instance metrics, generic least squares for the axis update, finite
differences for gradients, and numpy's eigensolver for the MDS embedding.
None of it shares code with the package internals.
"""

from __future__ import annotations

import numpy as np


def _sq(x: float) -> float:
    return float(x) * float(x)


def _ground_sq(p, q) -> float:
    """Squared L2 ground distance with the diagonal convention."""
    if p[0] == p[1] and q[0] == q[1]:
        return 0.0
    return _sq(p[0] - q[0]) + _sq(p[1] - q[1])


def _destroy_sq(p) -> float:
    return 0.5 * _sq(p[1] - p[0])


def w2_diagrams_brute(pts_i, pts_j) -> float:
    """Exhaustive augmented matching between two small diagrams."""
    pts_i = np.asarray(pts_i, dtype=float).reshape(-1, 2)
    pts_j = np.asarray(pts_j, dtype=float).reshape(-1, 2)

    def rec(i: int, used: int) -> float:
        if i == len(pts_i):
            rest = 0.0
            for j in range(len(pts_j)):
                if not used >> j & 1:
                    rest += _destroy_sq(pts_j[j])
            return rest
        best = _destroy_sq(pts_i[i]) + rec(i + 1, used)
        for j in range(len(pts_j)):
            if not used >> j & 1:
                c = _ground_sq(pts_i[i], pts_j[j]) + rec(i + 1, used | 1 << j)
                if c < best:
                    best = c
        return best

    return float(np.sqrt(rec(0, 0)))


def wt2_bdts_brute(bi, bj) -> float:
    """Exhaustive rooted partial-isomorphism matching between two small BDTs.

    Roots are forced to match; every other branch is either matched to a
    branch of the same depth-compatible position (parent matched to parent)
    or charged its diagonal destruction/creation cost together with its
    whole subtree.
    """
    ci = [[] for _ in range(bi.n_branches)]
    cj = [[] for _ in range(bj.n_branches)]
    for k in range(1, bi.n_branches):
        ci[int(bi.parent[k])].append(k)
    for k in range(1, bj.n_branches):
        cj[int(bj.parent[k])].append(k)
    pi = bi.points
    pj = bj.points

    def destroy_subtree(b, children, pts, r) -> float:
        total = _destroy_sq(pts[r])
        for c in children[r]:
            total += destroy_subtree(b, children, pts, c)
        return total

    def match(i: int, j: int) -> float:
        return _ground_sq(pi[i], pj[j]) + forest(tuple(ci[i]), tuple(cj[j]))

    def forest(fs: tuple, gs: tuple) -> float:
        if not fs:
            return sum(destroy_subtree(bj, cj, pj, g) for g in gs)
        head, rest = fs[0], fs[1:]
        best = destroy_subtree(bi, ci, pi, head) + forest(rest, gs)
        for k, g in enumerate(gs):
            c = match(head, g) + forest(rest, gs[:k] + gs[k + 1 :])
            if c < best:
                best = c
        return best

    return float(np.sqrt(match(0, 0)))


def lstsq_axis_update(alpha, residuals):
    """Generic least-squares solve of the per-entry axis update.

    Minimizes sum_j || r_j - (a_j g + (1 - a_j) g') ||^2 with numpy's
    lstsq on the (N, 2) design matrix [a_j, 1 - a_j].
    """
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    residuals = np.asarray(residuals, dtype=float)
    n = alpha.size
    design = np.column_stack([alpha, 1.0 - alpha])
    flat = residuals.reshape(n, -1)
    sol, *_ = np.linalg.lstsq(design, flat, rcond=None)
    g = sol[0].reshape(residuals.shape[1:])
    gp = sol[1].reshape(residuals.shape[1:])
    return g, gp


def update_objective(alpha, residuals, g, gp) -> float:
    alpha = np.asarray(alpha, dtype=float).reshape(-1, 1, 1)
    model = alpha * g[None] + (1.0 - alpha) * gp[None]
    return float(((residuals - model) ** 2).sum())


def fd_update_gradient(alpha, residuals, g, gp, h: float = 1e-6) -> float:
    """Max |central finite difference| of the update objective at (g, gp)."""
    worst = 0.0
    for arr in (g, gp):
        flat = arr.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = update_objective(alpha, residuals, g, gp)
            flat[k] = orig - h
            dn = update_objective(alpha, residuals, g, gp)
            flat[k] = orig
            worst = max(worst, abs(up - dn) / (2.0 * h))
    return worst


def mds_eigh(sq_dists, k: int = 3):
    """Classical MDS through numpy's symmetric eigensolver."""
    d2 = np.asarray(sq_dists, dtype=float)
    n = d2.shape[0]
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ d2 @ j
    w, v = np.linalg.eigh(b)
    order = np.argsort(w)[::-1][:k]
    coords = np.zeros((n, k))
    for col, idx in enumerate(order):
        lam = max(w[idx], 0.0)
        coords[:, col] = v[:, idx] * np.sqrt(lam)
    for col in range(k):
        pivot = np.argmax(np.abs(coords[:, col]))
        if coords[pivot, col] < 0:
            coords[:, col] = -coords[:, col]
    return coords


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
