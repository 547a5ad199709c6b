"""Merge trees of grid scalar fields.

The join tree tracks connected components of sublevel sets, the split tree
those of superlevel sets. Ties in scalar values are broken by vertex index,
which makes the sweep order a total order and every tree deterministic.

Saddle merging (`merge_saddles`) does not rewrite node values: it records
equivalence groups of nearby saddles on the tree, and `branch_decomposition`
resolves branch parents through each group's representative. This keeps the
multiset of persistence pairs exactly unchanged while still collapsing the
parent structure, down to a depth-1 decomposition when eps1 is 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .grid import ScalarFieldGrid
from .bdt import Bdt

ROLE_LEAF = "leaf"
ROLE_SADDLE = "saddle"
ROLE_ROOT = "root"


@dataclass
class MergeTree:
    """A rooted merge tree with parent arcs pointing toward the root.

    Attributes
    ----------
    kind : str
        "join" (root at the global maximum) or "split" (root at the global
        minimum).
    node_vertex : ndarray
        Grid vertex index of each node (synthetic for inverted BDTs).
    node_value : ndarray
        Scalar value at each node.
    node_parent : ndarray
        Parent node index, -1 at the root.
    node_role : list of str
        "leaf", "saddle" or "root" per node.
    saddle_group : ndarray or None
        Optional representative node per node, produced by
        :func:`merge_saddles`; None means no grouping.
    """

    kind: str
    node_vertex: np.ndarray
    node_value: np.ndarray
    node_parent: np.ndarray
    node_role: list[str]
    saddle_group: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.node_vertex = np.asarray(self.node_vertex, dtype=np.int64)
        self.node_value = np.asarray(self.node_value, dtype=np.float64)
        self.node_parent = np.asarray(self.node_parent, dtype=np.int64)
        if self.kind not in ("join", "split"):
            raise ValueError(f"kind must be 'join' or 'split', got {self.kind!r}")

    @property
    def n_nodes(self) -> int:
        return int(self.node_value.size)

    @property
    def root(self) -> int:
        roots = np.flatnonzero(self.node_parent == -1)
        if roots.size != 1:
            raise ValueError(f"tree must have exactly one root, found {roots.size}")
        return int(roots[0])

    @property
    def field_range(self) -> float:
        # The global pair always survives, so min and max node values span
        # the original field range even after simplification.
        return float(self.node_value.max() - self.node_value.min())

    def children_lists(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for i, p in enumerate(self.node_parent):
            if p >= 0:
                ch[int(p)].append(i)
        return ch

    def sweep_keys(self) -> list[tuple[float, int]]:
        """Total-order keys: nodes sort ascending in sweep (leaf-first) order."""
        sign = 1.0 if self.kind == "join" else -1.0
        return [
            (sign * float(self.node_value[i]), int(self.node_vertex[i]))
            for i in range(self.n_nodes)
        ]


def compute_merge_tree(field: ScalarFieldGrid, kind: str = "join") -> MergeTree:
    """Union-find sweep over the grid in sorted vertex order.

    A vertex with no processed neighbor starts a component (leaf node); a
    vertex joining two or more components becomes a saddle node; the last
    vertex closes the sweep at the root (a node is created there unless the
    sweep already placed one on that vertex).
    """
    if kind not in ("join", "split"):
        raise ValueError(f"kind must be 'join' or 'split', got {kind!r}")
    values = field.values
    n = field.n_vertices
    order = np.argsort(values if kind == "join" else -values, kind="stable")
    nbrs = field.neighbor_lists()

    uf = np.arange(n, dtype=np.int64)

    def find(a: int) -> int:
        root = a
        while uf[root] != root:
            root = uf[root]
        while uf[a] != root:
            uf[a], a = root, uf[a]
        return root

    processed = np.zeros(n, dtype=bool)
    comp_top: dict[int, int] = {}
    node_vertex: list[int] = []
    node_value: list[float] = []
    node_parent: list[int] = []
    node_role: list[str] = []

    def new_node(v: int, role: str) -> int:
        node_vertex.append(int(v))
        node_value.append(float(values[v]))
        node_parent.append(-1)
        node_role.append(role)
        return len(node_vertex) - 1

    for v in order:
        v = int(v)
        roots: list[int] = []
        for u in nbrs[v]:
            if processed[u]:
                r = find(int(u))
                if r not in roots:
                    roots.append(r)
        if not roots:
            nid = new_node(v, ROLE_LEAF)
            comp_top[v] = nid
        elif len(roots) == 1:
            uf[v] = roots[0]
        else:
            nid = new_node(v, ROLE_SADDLE)
            keep = roots[0]
            for r in roots:
                node_parent[comp_top.pop(r)] = nid
                if r != keep:
                    uf[r] = keep
            uf[v] = keep
            comp_top[keep] = nid
        processed[v] = True

    v_last = int(order[-1])
    top = comp_top[find(v_last)]
    if node_vertex[top] == v_last:
        node_role[top] = ROLE_ROOT
    else:
        rid = new_node(v_last, ROLE_ROOT)
        node_parent[top] = rid

    return MergeTree(
        kind=kind,
        node_vertex=np.asarray(node_vertex),
        node_value=np.asarray(node_value),
        node_parent=np.asarray(node_parent),
        node_role=node_role,
    )


def validate_merge_tree(tree: MergeTree) -> None:
    """Check the structural invariants: single root, connectivity, and
    strict monotonicity of sweep keys along every arc toward the root."""
    m = tree.n_nodes
    if m == 0:
        raise ValueError("empty merge tree")
    root = tree.root
    if tree.node_role[root] != ROLE_ROOT:
        raise ValueError("root node must have role 'root'")
    keys = tree.sweep_keys()
    seen = 0
    for i in range(m):
        p = int(tree.node_parent[i])
        if i == root:
            continue
        if not 0 <= p < m:
            raise ValueError(f"node {i} has invalid parent {p}")
        if not keys[i] < keys[p]:
            raise ValueError(
                f"sweep order not monotone along arc {i} -> {p}: "
                f"{keys[i]} !< {keys[p]}"
            )
    # acyclicity and connectivity: every node reaches the root
    for i in range(m):
        j, hops = i, 0
        while j != root:
            j = int(tree.node_parent[j])
            hops += 1
            if hops > m:
                raise ValueError("cycle in parent links")
        seen += 1
    if seen != m:
        raise ValueError("disconnected merge tree")


class _Decomposition(NamedTuple):
    leaf_node: list[int]      # founding leaf per branch
    death_node: list[int]     # node where the branch's component dies
    birth_val: list[float]    # value at the founding leaf
    death_val: list[float]    # value at the death node
    surviving: list[int]      # branch passing through each node
    global_branch: int


def _elder_decomposition(tree: MergeTree) -> _Decomposition:
    """Elder-rule pass: one branch per leaf, younger components die at each
    merge node, and the overall elder dies at the root."""
    m = tree.n_nodes
    children = tree.children_lists()
    keys = tree.sweep_keys()
    node_order = sorted(range(m), key=lambda i: keys[i])

    leaf_ids = [nid for nid in node_order if not children[nid]]
    branch_idx = {leaf: b for b, leaf in enumerate(leaf_ids)}
    k = len(leaf_ids)
    death_node = [-1] * k
    founder = [-1] * m
    surviving = [-1] * m

    for nid in node_order:
        ch = children[nid]
        if not ch:
            founder[nid] = nid
        else:
            fs = [founder[c] for c in ch]
            elder = min(fs, key=lambda f: keys[f])
            for f in fs:
                if f != elder:
                    death_node[branch_idx[f]] = nid
            founder[nid] = elder
        surviving[nid] = branch_idx[founder[nid]]

    root = node_order[-1]
    if int(tree.node_parent[root]) != -1:
        raise ValueError("last node in sweep order is not the root")
    global_branch = surviving[root]
    death_node[global_branch] = root

    birth_val = [float(tree.node_value[leaf]) for leaf in leaf_ids]
    death_val = [float(tree.node_value[d]) for d in death_node]
    return _Decomposition(leaf_ids, death_node, birth_val, death_val, surviving, global_branch)


def extract_pairs(tree: MergeTree) -> np.ndarray:
    """Elder-rule persistence pairs as an array of (birth, death) rows with
    birth <= death, sorted by decreasing persistence."""
    dec = _elder_decomposition(tree)
    b = np.asarray(dec.birth_val)
    d = np.asarray(dec.death_val)
    lo = np.minimum(b, d)
    hi = np.maximum(b, d)
    pairs = np.column_stack([lo, hi])
    leaf_vertex = tree.node_vertex[np.asarray(dec.leaf_node, dtype=np.int64)]
    order = sorted(
        range(pairs.shape[0]),
        key=lambda i: (-(hi[i] - lo[i]), lo[i], hi[i], int(leaf_vertex[i])),
    )
    return pairs[order]


def simplify(tree: MergeTree, threshold: float) -> MergeTree:
    """Remove every non-global pair with persistence < threshold x field range.

    Removal runs deepest-branch-first, so each removed leaf hangs directly
    under its death saddle by the time it goes; saddles left with a single
    child are spliced out. The root node is never spliced. Any saddle groups
    are dropped (saddle merging runs after simplification in the pipeline).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0,1], got {threshold}")
    dec = _elder_decomposition(tree)
    rng = tree.field_range
    cut = threshold * rng
    k = len(dec.leaf_node)
    pers = [abs(dec.death_val[b] - dec.birth_val[b]) for b in range(k)]
    removable = [b for b in range(k) if b != dec.global_branch and pers[b] < cut]
    if not removable:
        return MergeTree(
            kind=tree.kind,
            node_vertex=tree.node_vertex.copy(),
            node_value=tree.node_value.copy(),
            node_parent=tree.node_parent.copy(),
            node_role=list(tree.node_role),
            saddle_group=None,
        )

    # branch depth in the decomposition (root branch depth 0)
    parent_branch = [-1] * k
    for b in range(k):
        if b != dec.global_branch:
            parent_branch[b] = dec.surviving[dec.death_node[b]]
    depth = [-1] * k
    for b in range(k):
        d, x = 0, b
        while parent_branch[x] != -1:
            x = parent_branch[x]
            d += 1
        depth[b] = d

    removable.sort(key=lambda b: (-depth[b], int(tree.node_vertex[dec.leaf_node[b]])))

    m = tree.n_nodes
    parent = tree.node_parent.copy()
    children = tree.children_lists()
    alive = [True] * m
    for b in removable:
        leaf = dec.leaf_node[b]
        s = int(parent[leaf])
        if s != dec.death_node[b]:
            raise AssertionError("removal order left a live node on a removed branch path")
        children[s].remove(leaf)
        alive[leaf] = False
        if tree.node_role[s] == ROLE_SADDLE and len(children[s]) == 1:
            only = children[s][0]
            p = int(parent[s])
            parent[only] = p
            if p >= 0:
                children[p][children[p].index(s)] = only
            alive[s] = False

    keep = [i for i in range(m) if alive[i]]
    remap = {old: new for new, old in enumerate(keep)}
    new_parent = np.asarray(
        [remap[int(parent[i])] if int(parent[i]) >= 0 else -1 for i in keep],
        dtype=np.int64,
    )
    return MergeTree(
        kind=tree.kind,
        node_vertex=tree.node_vertex[keep].copy(),
        node_value=tree.node_value[keep].copy(),
        node_parent=new_parent,
        node_role=[tree.node_role[i] for i in keep],
        saddle_group=None,
    )


def merge_saddles(tree: MergeTree, eps1: float) -> MergeTree:
    """Group adjacent saddles whose relative value difference is below eps1.

    The difference is normalized by the global field range (relative
    difference 0 when the range is 0). The parent endpoint may be the root,
    which is what lets eps1 = 1 collapse everything onto the root branch.
    Groups are connected subtrees; the representative is the group's
    root-most node, where the elder branch finally absorbs the others.
    """
    if not 0.0 <= eps1 <= 1.0:
        raise ValueError(f"eps1 must be in [0,1], got {eps1}")
    m = tree.n_nodes
    rng = tree.field_range
    uf = np.arange(m, dtype=np.int64)

    def find(a: int) -> int:
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = int(uf[a])
        return a

    merged_any = False
    for s in range(m):
        if tree.node_role[s] != ROLE_SADDLE:
            continue
        p = int(tree.node_parent[s])
        if p < 0 or tree.node_role[p] == ROLE_LEAF:
            continue
        if eps1 >= 1.0:
            ok = True
        else:
            diff = abs(float(tree.node_value[s]) - float(tree.node_value[p]))
            rel = 0.0 if rng == 0.0 else diff / rng
            ok = rel < eps1
        if ok:
            ra, rb = find(s), find(p)
            if ra != rb:
                uf[ra] = rb
            merged_any = True

    if not merged_any:
        group = None
    else:
        depth = np.zeros(m, dtype=np.int64)
        children = tree.children_lists()
        root = tree.root
        stack = [root]
        while stack:
            nid = stack.pop()
            for c in children[nid]:
                depth[c] = depth[nid] + 1
                stack.append(c)
        rep: dict[int, int] = {}
        for nid in range(m):
            g = find(nid)
            if g not in rep or depth[nid] < depth[rep[g]]:
                rep[g] = nid
        group = np.asarray([rep[find(nid)] for nid in range(m)], dtype=np.int64)

    return MergeTree(
        kind=tree.kind,
        node_vertex=tree.node_vertex.copy(),
        node_value=tree.node_value.copy(),
        node_parent=tree.node_parent.copy(),
        node_role=list(tree.node_role),
        saddle_group=group,
    )


def branch_decomposition(tree: MergeTree) -> Bdt:
    """Persistence-driven branch decomposition.

    Every Elder-rule pair becomes a branch; the parent of a branch is the
    branch containing the saddle it dies at (resolved through the saddle
    group representative when `merge_saddles` ran). Branches are stored in
    decreasing persistence order, parents before children on ties.
    """
    dec = _elder_decomposition(tree)
    m = tree.n_nodes
    if tree.saddle_group is not None:
        rep = tree.saddle_group
    else:
        rep = np.arange(m, dtype=np.int64)

    k = len(dec.leaf_node)
    parent_branch = [-1] * k
    for b in range(k):
        if b == dec.global_branch:
            continue
        parent_branch[b] = dec.surviving[int(rep[dec.death_node[b]])]
        if parent_branch[b] == b:
            raise AssertionError("branch cannot parent itself")

    births = np.minimum(dec.birth_val, dec.death_val)
    deaths = np.maximum(dec.birth_val, dec.death_val)
    pers = deaths - births
    depth = [0] * k
    for b in range(k):
        d, x = 0, b
        while parent_branch[x] != -1:
            x = parent_branch[x]
            d += 1
        depth[b] = d
    leaf_vertex = [int(tree.node_vertex[leaf]) for leaf in dec.leaf_node]
    order = sorted(range(k), key=lambda b: (-pers[b], depth[b], leaf_vertex[b]))
    pos = {old: new for new, old in enumerate(order)}
    new_parent = np.asarray(
        [pos[parent_branch[b]] if parent_branch[b] != -1 else -1 for b in order],
        dtype=np.int64,
    )
    return Bdt(
        births=births[order],
        deaths=deaths[order],
        parent=new_parent,
        normalized=False,
        root_interval=None,
    )
