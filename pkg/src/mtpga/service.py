"""Read-only HTTP service over one fitted basis archive.

The archive is loaded once and treated as immutable shared state; every
request handler is pure, so concurrent requests need no locking.
"""

from __future__ import annotations

import json
import os
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .analysis import layout_2d, persistence_correlation
from .ingest.bdt import Bdt, bdt_from_json_dict, bdt_to_json_dict, bdt_to_merge_tree
from .ingest.merge_tree import MergeTree
from .pga import PgaBasis, basis_from_archive_dict, reconstruct

_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>mtpga service</title></head>
<body style="font-family: sans-serif; margin: 2rem;">
<h1>mtpga service</h1>
<p>No explorer bundle found. The JSON API is live:</p>
<ul>
<li><code>GET /api/layout</code></li>
<li><code>GET /api/correlation</code></li>
<li><code>GET /api/basis/meta</code></li>
<li><code>GET /api/member/{j}</code></li>
<li><code>POST /api/reconstruct</code> body <code>{"alpha":[...]}</code></li>
</ul>
</body></html>"""


def merge_tree_to_json_dict(tree: MergeTree) -> dict[str, Any]:
    nodes = []
    for i in range(len(tree.node_vertex)):
        p = int(tree.node_parent[i])
        nodes.append(
            {
                "vertex": int(tree.node_vertex[i]),
                "value": float(tree.node_value[i]),
                "role": tree.node_role[i],
                "parent": None if p < 0 else p,
            }
        )
    return {"kind": tree.kind, "nodes": nodes}


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


class _ArchiveState:
    def __init__(self, archive: dict[str, Any]):
        self.basis: PgaBasis = basis_from_archive_dict(archive)
        self.member_ids: list[str] = []
        self.member_bdts: list[Bdt] = []
        self.member_errors: list[float] = []
        for m in archive.get("members", []):
            self.member_ids.append(str(m["id"]))
            self.member_bdts.append(bdt_from_json_dict(m["bdt"]))
            self.member_errors.append(float(m["error"]))
        self._correlation = None

    def correlation(self):
        if self._correlation is None:
            self._correlation = persistence_correlation(self.basis, self.member_bdts)
        return self._correlation


def create_app(archive_path: str, ui_dir: str | None = None) -> FastAPI:
    with open(archive_path, "r", encoding="utf-8") as fh:
        archive = json.load(fh)
    state = _ArchiveState(archive)
    app = FastAPI(title="mtpga", docs_url=None, redoc_url=None)

    @app.get("/api/basis/meta")
    def basis_meta():
        b = state.basis
        return {
            "formatVersion": archive.get("formatVersion"),
            "dMax": b.d_max,
            "nBranches": b.origin.n_branches,
            "nMembers": b.n_members,
            "axisLengths": [float(x) for x in b.axis_lengths],
            "memberIds": state.member_ids,
            "params": b.params,
        }

    @app.get("/api/layout")
    def layout():
        b = state.basis
        if b.d_max < 2:
            return _error(400, "layout needs at least 2 axes")
        labels = state.member_ids if state.member_ids else None
        return layout_2d(b, labels=labels).to_json_dict()

    @app.get("/api/correlation")
    def correlation():
        if state.basis.d_max < 2:
            return _error(400, "correlation needs at least 2 axes")
        if not state.member_bdts:
            return _error(400, "archive carries no member BDTs")
        return state.correlation().to_json_dict()

    @app.get("/api/member/{j}")
    def member(j: int):
        if not state.member_bdts:
            return _error(400, "archive carries no member BDTs")
        if not 0 <= j < len(state.member_bdts):
            return _error(404, f"member {j} out of range")
        rec = reconstruct(state.basis, state.basis.coords[j])
        return {
            "id": state.member_ids[j],
            "coords": [float(x) for x in state.basis.coords[j]],
            "error": state.member_errors[j],
            "input": bdt_to_json_dict(state.member_bdts[j]),
            "reconstruction": bdt_to_json_dict(rec),
        }

    @app.post("/api/reconstruct")
    async def reconstruct_endpoint(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be JSON")
        if not isinstance(body, dict) or "alpha" not in body:
            return _error(400, "body must be an object with 'alpha'")
        alpha = body["alpha"]
        if not isinstance(alpha, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in alpha
        ):
            return _error(400, "alpha must be a list of numbers")
        if len(alpha) > state.basis.d_max:
            return _error(400, f"alpha longer than d_max = {state.basis.d_max}")
        if any(not 0.0 <= float(x) <= 1.0 for x in alpha):
            return _error(400, "alpha out of [0,1]")
        bdt = reconstruct(state.basis, [float(x) for x in alpha])
        tree = bdt_to_merge_tree(bdt)
        return {
            "bdt": bdt_to_json_dict(bdt),
            "mergeTree": merge_tree_to_json_dict(tree),
        }

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app
