"""Ensemble manifests and the ingest pipeline from raw inputs to
normalized BDTs ready for fitting."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .ingest.bdt import Bdt, bdt_from_json_dict, normalize, preprocess_bdt
from .ingest.grid import load_scalar_field
from .ingest.merge_tree import (
    MergeTree,
    branch_decomposition,
    compute_merge_tree,
    merge_saddles,
    simplify,
)
from ._parallel import ordered_map

DEFAULTS = {
    "simplify": 0.0025,
    "eps1": 0.05,
    "eps2": 0.95,
    "eps3": 0.9,
    "treeKind": "join",
    "n1Ratio": 0.20,
    "n2": 16,
}

TREE_KINDS = ("join", "split", "diagram")


@dataclass
class EnsembleManifest:
    members: list[tuple[str, str]]  # (id, path)
    tree_kind: str = "join"
    simplify: float = 0.0025
    eps1: float = 0.05
    eps2: float = 0.95
    eps3: float = 0.9
    base_dir: str = "."
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("manifest needs at least one member")
        ids = [m[0] for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("member ids must be unique")
        if self.tree_kind not in TREE_KINDS:
            raise ValueError(f"treeKind must be one of {TREE_KINDS}")

    def member_path(self, idx: int) -> str:
        p = self.members[idx][1]
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)


def load_manifest(path: str) -> EnsembleManifest:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "members" not in obj:
        raise ValueError(f"{path}: manifest must be an object with 'members'")
    members = []
    for k, m in enumerate(obj["members"]):
        if isinstance(m, dict):
            mid = str(m.get("id", k))
            mpath = m["path"]
        else:
            mid, mpath = str(k), str(m)
        members.append((mid, mpath))
    known = {"members", "treeKind", "simplify", "eps1", "eps2", "eps3"}
    extra = {k: v for k, v in obj.items() if k not in known}
    return EnsembleManifest(
        members=members,
        tree_kind=obj.get("treeKind", DEFAULTS["treeKind"]),
        simplify=float(obj.get("simplify", DEFAULTS["simplify"])),
        eps1=float(obj.get("eps1", DEFAULTS["eps1"])),
        eps2=float(obj.get("eps2", DEFAULTS["eps2"])),
        eps3=float(obj.get("eps3", DEFAULTS["eps3"])),
        base_dir=os.path.dirname(os.path.abspath(path)),
        extra=extra,
    )


def tree_to_bdt(
    tree: MergeTree,
    *,
    simplify_threshold: float,
    eps1: float,
    eps2: float,
    eps3: float,
) -> Bdt:
    """Simplification, saddle merging, branch decomposition, preprocessing
    and normalization in one pass."""
    if simplify_threshold > 0.0:
        tree = simplify(tree, simplify_threshold)
    tree = merge_saddles(tree, eps1)
    bdt = branch_decomposition(tree)
    bdt = preprocess_bdt(bdt, eps2, eps3)
    return normalize(bdt)


def load_member(
    path: str,
    member_id: str,
    *,
    tree_kind: str,
    simplify_threshold: float,
    eps1: float,
    eps2: float,
    eps3: float,
) -> Bdt:
    """One member: a .grid scalar field or a BDT JSON file."""
    if path.endswith(".grid"):
        grid = load_scalar_field(path, member_id=member_id)
        kind = "join" if tree_kind == "diagram" else tree_kind
        tree = compute_merge_tree(grid, kind)
        return tree_to_bdt(
            tree,
            simplify_threshold=simplify_threshold,
            eps1=eps1,
            eps2=eps2,
            eps3=eps3,
        )
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    bdt = bdt_from_json_dict(obj)
    if bdt.normalized:
        return bdt
    bdt = preprocess_bdt(bdt, eps2, eps3)
    return normalize(bdt)


def load_ensemble(
    manifest: EnsembleManifest, workers: int = 1
) -> tuple[list[str], list[Bdt]]:
    """All members in manifest order; treeKind 'diagram' forces eps1 = 1
    so the BDT metric degenerates to the diagram metric."""
    eps1 = 1.0 if manifest.tree_kind == "diagram" else manifest.eps1

    def one(idx: int) -> Bdt:
        return load_member(
            manifest.member_path(idx),
            manifest.members[idx][0],
            tree_kind=manifest.tree_kind,
            simplify_threshold=manifest.simplify,
            eps1=eps1,
            eps2=manifest.eps2,
            eps3=manifest.eps3,
        )

    bdts = ordered_map(one, list(range(len(manifest.members))), workers)
    return [m[0] for m in manifest.members], list(bdts)


def default_n1(ensemble: list[Bdt], ratio: float = 0.20) -> int:
    """Origin size: a fraction of the total branch count over all members."""
    total = sum(b.n_branches for b in ensemble)
    return max(1, int(round(ratio * total)))
