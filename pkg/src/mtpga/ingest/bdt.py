"""Branch decomposition trees: nesting, normalization, and inversion.

A Bdt stores one (birth, death) interval per branch plus a parent index.
Branches are kept in decreasing persistence order with the root first,
parents before children on ties, so top-down passes can run by index.
Normalization maps every branch into its parent's frame: the root becomes
(0, 1) and a child (x, y) of parent (x', y') becomes
((x - x') / (y' - x'), (y - x') / (y' - x')).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np


class InvalidBdtError(ValueError):
    """A BDT violates normalization or nesting constraints."""


@dataclass(eq=False)
class Bdt:
    births: np.ndarray
    deaths: np.ndarray
    parent: np.ndarray
    normalized: bool = False
    root_interval: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        self.births = np.ascontiguousarray(self.births, dtype=np.float64)
        self.deaths = np.ascontiguousarray(self.deaths, dtype=np.float64)
        self.parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        if not (self.births.shape == self.deaths.shape == self.parent.shape):
            raise ValueError("births, deaths and parent must have equal length")
        if self.root_interval is not None:
            a, b = self.root_interval
            self.root_interval = (float(a), float(b))

    @property
    def n_branches(self) -> int:
        return int(self.births.size)

    @property
    def points(self) -> np.ndarray:
        """Branch intervals as an (n, 2) array."""
        return np.column_stack([self.births, self.deaths])

    @property
    def persistence(self) -> np.ndarray:
        return self.deaths - self.births

    def children_lists(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(self.n_branches)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                ch[int(p)].append(i)
        return ch

    def depths(self) -> np.ndarray:
        out = np.zeros(self.n_branches, dtype=np.int64)
        for i in range(self.n_branches):
            p = int(self.parent[i])
            if p >= 0:
                out[i] = out[p] + 1
        return out

    def copy(self) -> "Bdt":
        return Bdt(
            births=self.births.copy(),
            deaths=self.deaths.copy(),
            parent=self.parent.copy(),
            normalized=self.normalized,
            root_interval=self.root_interval,
        )


def denormalized_points(bdt: Bdt) -> np.ndarray:
    """Branch intervals mapped back to one common frame.

    For a normalized BDT this composes each branch's parent frames down from
    the root interval, or from (0, 1) when no root interval is stored. For an
    unnormalized BDT the stored intervals are returned as-is.
    """
    pts = bdt.points.copy()
    if not bdt.normalized:
        return pts
    lo, hi = bdt.root_interval if bdt.root_interval is not None else (0.0, 1.0)
    out = np.empty_like(pts)
    out[0] = (lo, hi)
    for i in range(1, bdt.n_branches):
        p = int(bdt.parent[i])
        plo, phi = out[p]
        span = phi - plo
        out[i, 0] = plo + pts[i, 0] * span
        out[i, 1] = plo + pts[i, 1] * span
    return out


def absolute_persistence(bdt: Bdt) -> np.ndarray:
    """Persistence of each branch in the common frame (root frame (0,1) for
    normalized BDTs, raw values otherwise)."""
    if not bdt.normalized:
        return bdt.persistence.copy()
    out = np.empty(bdt.n_branches, dtype=np.float64)
    out[0] = 1.0
    for i in range(1, bdt.n_branches):
        out[i] = (bdt.deaths[i] - bdt.births[i]) * out[int(bdt.parent[i])]
    return out


def validate_bdt(bdt: Bdt, tol: float = 1e-9) -> None:
    """Check the structural invariants and raise InvalidBdtError on failure."""
    n = bdt.n_branches
    if n == 0:
        raise InvalidBdtError("empty BDT")
    if int(bdt.parent[0]) != -1:
        raise InvalidBdtError("branch 0 must be the root (parent -1)")
    for i in range(1, n):
        p = int(bdt.parent[i])
        if not 0 <= p < i:
            raise InvalidBdtError(
                f"branch {i} parent {p} must point to an earlier branch"
            )
    if np.count_nonzero(bdt.parent == -1) != 1:
        raise InvalidBdtError("exactly one root branch expected")
    if bdt.normalized:
        if bdt.root_interval is None:
            raise InvalidBdtError("normalized BDT must store its root interval")
        if abs(bdt.births[0]) > tol or abs(bdt.deaths[0] - 1.0) > tol:
            raise InvalidBdtError("normalized root must be (0, 1)")
        for i in range(1, n):
            if bdt.births[i] < -tol or bdt.deaths[i] > 1.0 + tol:
                raise InvalidBdtError(f"branch {i} outside [0,1]")
            if not bdt.births[i] < bdt.deaths[i]:
                raise InvalidBdtError(f"branch {i} must satisfy birth < death")
    else:
        if np.any(bdt.deaths < bdt.births):
            raise InvalidBdtError("birth must not exceed death")
        # raw intervals nest directly; normalized ones nest through the
        # parent frames, which the [0,1] bounds above already guarantee
        for i in range(1, n):
            p = int(bdt.parent[i])
            if (
                bdt.births[i] < bdt.births[p] - tol
                or bdt.deaths[i] > bdt.deaths[p] + tol
            ):
                raise InvalidBdtError(
                    f"branch {i} interval not nested in parent {p}: "
                    f"({bdt.births[i]}, {bdt.deaths[i]}) vs "
                    f"({bdt.births[p]}, {bdt.deaths[p]})"
                )


def normalize(bdt: Bdt) -> Bdt:
    """Map every branch into its parent's frame; root becomes (0, 1).

    Raises InvalidBdtError when a parent has zero persistence (the frame
    would be degenerate) or when a non-root branch itself has zero
    persistence (it could not satisfy birth < death afterwards).
    """
    if bdt.normalized:
        raise InvalidBdtError("BDT is already normalized")
    n = bdt.n_branches
    b, d = bdt.births, bdt.deaths
    root_pers = float(d[0] - b[0])
    if n > 1 and root_pers == 0.0:
        raise InvalidBdtError("degenerate branch: root has zero persistence")
    nb = np.zeros(n, dtype=np.float64)
    nd = np.ones(n, dtype=np.float64)
    for i in range(1, n):
        p = int(bdt.parent[i])
        span = float(d[p] - b[p])
        if span == 0.0:
            raise InvalidBdtError(f"degenerate branch: parent {p} has zero persistence")
        if d[i] - b[i] == 0.0:
            raise InvalidBdtError(f"degenerate branch: branch {i} has zero persistence")
        nb[i] = (b[i] - b[p]) / span
        nd[i] = (d[i] - b[p]) / span
    np.clip(nb, 0.0, 1.0, out=nb)
    np.clip(nd, 0.0, 1.0, out=nd)
    return Bdt(
        births=nb,
        deaths=nd,
        parent=bdt.parent.copy(),
        normalized=True,
        root_interval=(float(b[0]), float(d[0])),
    )


def preprocess_bdt(bdt: Bdt, eps2: float, eps3: float) -> Bdt:
    """Move aggressive branches up the tree, one level per qualifying check.

    A non-root branch is reattached to its grandparent when its persistence
    ratio to its parent exceeds eps2 while its ratio to the global maximum
    persistence stays at or below eps3. Passes repeat until a fixpoint, so a
    branch can climb several levels over successive passes. Operates on
    unnormalized BDTs; persistences (and the storage order) never change.
    """
    if bdt.normalized:
        raise InvalidBdtError("preprocess_bdt expects an unnormalized BDT")
    if not (0.0 <= eps2 <= 1.0 and 0.0 <= eps3 <= 1.0):
        raise ValueError("eps2 and eps3 must be in [0,1]")
    out = bdt.copy()
    pers = out.persistence
    pmax = float(pers[0])
    if pmax == 0.0:
        return out
    changed = True
    while changed:
        changed = False
        for i in range(1, out.n_branches):
            p = int(out.parent[i])
            gp = int(out.parent[p]) if p >= 0 else -1
            if gp < 0:
                continue
            pp = float(pers[p])
            if pp == 0.0:
                continue
            if pers[i] / pp > eps2 and pers[i] / pmax <= eps3:
                out.parent[i] = gp
                changed = True
    return out


def bdt_to_merge_tree(bdt: Bdt):
    """Invert a normalized BDT into a join-kind merge tree.

    Branch intervals are denormalized top-down through parent frames and the
    stored root interval; each branch contributes a leaf at its birth value,
    each non-root branch a saddle placed on its parent's monotone path at its
    death value. Vertex ids are synthetic, assigned so the sweep order stays
    strictly monotone along arcs.
    """
    from .merge_tree import MergeTree, ROLE_LEAF, ROLE_SADDLE, ROLE_ROOT

    if not bdt.normalized:
        raise InvalidBdtError("bdt_to_merge_tree expects a normalized BDT")
    if bdt.root_interval is None:
        raise InvalidBdtError("normalized BDT must store its root interval")
    n = bdt.n_branches
    for i in range(1, n):
        if bdt.births[i] < 0.0 or bdt.deaths[i] > 1.0:
            raise InvalidBdtError(f"branch {i} outside [0,1]")
        if not bdt.births[i] < bdt.deaths[i]:
            raise InvalidBdtError(f"branch {i} must satisfy birth < death")

    pts = denormalized_points(bdt)
    children = bdt.children_lists()

    # nodes: one leaf per branch, one death node per branch (saddle, or the
    # root node for branch 0)
    n_nodes = 2 * n
    leaf_of = list(range(n))
    death_of = [n + i for i in range(n)]
    value = np.empty(n_nodes, dtype=np.float64)
    role = [ROLE_LEAF] * n + [ROLE_SADDLE] * n
    role[death_of[0]] = ROLE_ROOT
    parent = np.full(n_nodes, -1, dtype=np.int64)
    for i in range(n):
        value[leaf_of[i]] = pts[i, 0]
        value[death_of[i]] = pts[i, 1]

    for i in range(n):
        path = [leaf_of[i]]
        kids = sorted(children[i], key=lambda c: (pts[c, 1], c))
        path.extend(death_of[c] for c in kids)
        for a, b in zip(path, path[1:]):
            parent[a] = b
        parent[path[-1]] = death_of[i]
    parent[death_of[0]] = -1

    depth = np.zeros(n_nodes, dtype=np.int64)
    kids_of: list[list[int]] = [[] for _ in range(n_nodes)]
    for a in range(n_nodes):
        if parent[a] >= 0:
            kids_of[int(parent[a])].append(a)
    stack = [death_of[0]]
    while stack:
        nid = stack.pop()
        for c in kids_of[nid]:
            depth[c] = depth[nid] + 1
            stack.append(c)

    by_key = sorted(range(n_nodes), key=lambda a: (value[a], -int(depth[a]), a))
    vertex = np.empty(n_nodes, dtype=np.int64)
    for vid, a in enumerate(by_key):
        vertex[a] = vid

    return MergeTree(
        kind="join",
        node_vertex=vertex,
        node_value=value,
        node_parent=parent,
        node_role=role,
    )


def bdt_to_json_dict(bdt: Bdt) -> dict[str, Any]:
    branches = []
    for i in range(bdt.n_branches):
        p = int(bdt.parent[i])
        branches.append(
            {
                "birth": float(bdt.births[i]),
                "death": float(bdt.deaths[i]),
                "parent": p if p >= 0 else None,
            }
        )
    ri = bdt.root_interval
    return {
        "branches": branches,
        "normalized": bool(bdt.normalized),
        "rootInterval": [float(ri[0]), float(ri[1])] if ri is not None else None,
    }


def bdt_from_json_dict(obj: dict[str, Any]) -> Bdt:
    if not isinstance(obj, dict) or "branches" not in obj:
        raise InvalidBdtError("BDT JSON must be an object with a 'branches' list")
    branches = obj["branches"]
    if not isinstance(branches, list) or not branches:
        raise InvalidBdtError("'branches' must be a non-empty list")
    births, deaths, parent = [], [], []
    for i, row in enumerate(branches):
        try:
            births.append(float(row["birth"]))
            deaths.append(float(row["death"]))
            p = row["parent"]
        except (KeyError, TypeError, ValueError):
            raise InvalidBdtError(f"branch {i}: expected birth/death/parent") from None
        parent.append(-1 if p is None else int(p))
    ri = obj.get("rootInterval")
    root_interval = None if ri is None else (float(ri[0]), float(ri[1]))
    bdt = Bdt(
        births=np.asarray(births),
        deaths=np.asarray(deaths),
        parent=np.asarray(parent),
        normalized=bool(obj.get("normalized", False)),
        root_interval=root_interval,
    )
    return bdt


def bdt_to_json(bdt: Bdt) -> str:
    return json.dumps(bdt_to_json_dict(bdt), sort_keys=True, separators=(",", ":"))
