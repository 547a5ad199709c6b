"""Command-line driver: fit, reconstruct, layout, stats, serve, distance.

Flag precedence is command line over manifest over built-in defaults.
Exit codes: 0 ok, 1 internal or data error, 2 usage error.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace

import click
import numpy as np

from . import __version__
from .analysis import (
    compress,
    layout_2d,
    persistence_correlation,
    projected_variance,
    reconstruction_error,
    sim_indicator,
)
from .ensemble import DEFAULTS, default_n1, load_ensemble, load_manifest, load_member
from .ingest.bdt import bdt_to_json_dict, bdt_to_merge_tree
from .metrics import wt2_bdts
from .pga import (
    basis_from_archive_dict,
    basis_to_archive_dict,
    dumps_canonical,
    fit_basis,
    reconstruct,
)
from .service import create_app, merge_tree_to_json_dict


def _fail(exc: BaseException) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _load_archive(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _pick(cli_value, manifest_value, default):
    if cli_value is not None:
        return cli_value
    if manifest_value is not None:
        return manifest_value
    return default


_shared_eps = [
    click.option("--eps1", type=float, default=None, help="saddle merge threshold (default 0.05)"),
    click.option("--eps2", type=float, default=None, help="parent move threshold (default 0.95)"),
    click.option("--eps3", type=float, default=None, help="parent move persistence cap (default 0.9)"),
    click.option("--simplify", "simplify_t", type=float, default=None,
                 help="persistence simplification threshold (default 0.0025)"),
    click.option("--tree-kind", type=click.Choice(["join", "split", "diagram"]), default=None,
                 help="merge tree kind; 'diagram' runs the diagram metric (eps1 = 1)"),
]


def _with_eps(fn):
    for opt in reversed(_shared_eps):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="mtpga")
def main() -> None:
    """Principal geodesic analysis of merge trees."""


@main.command("fit")
@click.option("-m", "--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dmax", type=click.IntRange(min=1), default=2, show_default=True, help="number of geodesic axes")
@click.option("--n1-ratio", type=click.FloatRange(min=0.0, min_open=True), default=None,
              help="origin size as a fraction of the total branch count (default 0.20)")
@click.option("--n2", type=click.IntRange(min=2), default=None, help="lattice samples per axis (default 16)")
@_with_eps
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("-o", "--out", "out_path", required=True, type=click.Path(dir_okay=False, writable=True))
def cmd_fit(manifest_path, dmax, n1_ratio, n2, eps1, eps2, eps3, simplify_t, tree_kind, workers, out_path):
    """Ingest a manifest, fit a basis, write the archive and a fit report."""
    try:
        manifest = load_manifest(manifest_path)
        manifest = replace(
            manifest,
            tree_kind=_pick(tree_kind, manifest.tree_kind, DEFAULTS["treeKind"]),
            simplify=_pick(simplify_t, manifest.simplify, DEFAULTS["simplify"]),
            eps1=_pick(eps1, manifest.eps1, DEFAULTS["eps1"]),
            eps2=_pick(eps2, manifest.eps2, DEFAULTS["eps2"]),
            eps3=_pick(eps3, manifest.eps3, DEFAULTS["eps3"]),
        )
        ratio = _pick(n1_ratio, manifest.extra.get("n1Ratio"), DEFAULTS["n1Ratio"])
        n2_eff = int(_pick(n2, manifest.extra.get("n2"), DEFAULTS["n2"]))

        ids, ensemble = load_ensemble(manifest, workers)
        n1 = default_n1(ensemble, ratio)
        eff_eps1 = 1.0 if manifest.tree_kind == "diagram" else manifest.eps1
        basis, report = fit_basis(
            ensemble,
            dmax,
            n1,
            n2_eff,
            workers=workers,
            extra_params={
                "eps1": eff_eps1,
                "eps2": manifest.eps2,
                "eps3": manifest.eps3,
                "simplify": manifest.simplify,
                "treeKind": manifest.tree_kind,
                "n1Ratio": float(ratio),
            },
        )
        errors, mean_err = reconstruction_error(ensemble, basis, workers)
        archive = basis_to_archive_dict(basis)
        archive["members"] = [
            {"id": ids[j], "bdt": bdt_to_json_dict(ensemble[j]), "error": float(errors[j])}
            for j in range(len(ensemble))
        ]
        with open(out_path, "wb") as fh:
            fh.write(dumps_canonical(archive))
        _, stats = compress(ensemble, basis)
        report_path = os.path.splitext(out_path)[0] + ".report.json"
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "fitReport": report.to_json_dict(),
                    "codec": stats,
                    "meanRelativeError": mean_err,
                    "n1": n1,
                    "n2": n2_eff,
                },
                fh,
                indent=2,
            )
        click.echo(
            f"fitted {dmax} axes on {len(ensemble)} members "
            f"(origin {basis.origin.n_branches} branches, mean relative error {mean_err:.2e})"
        )
        click.echo(f"archive: {out_path}")
        click.echo(f"report:  {report_path}")
    except click.ClickException:
        raise
    except Exception as exc:
        _fail(exc)


@main.command("reconstruct")
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-a", "--alpha", "alphas", type=float, multiple=True, required=True,
              help="one value per axis, repeatable")
def cmd_reconstruct(basis_path, alphas):
    """Print the BDT and merge tree reconstructed at the given coordinates."""
    alphas = list(alphas)
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise click.UsageError("alpha out of [0,1]")
    try:
        basis = basis_from_archive_dict(_load_archive(basis_path))
    except Exception as exc:
        _fail(exc)
    if len(alphas) > basis.d_max:
        raise click.UsageError(f"alpha has {len(alphas)} entries but d_max is {basis.d_max}")
    try:
        bdt = reconstruct(basis, alphas)
        tree = bdt_to_merge_tree(bdt)
        click.echo(
            json.dumps(
                {"bdt": bdt_to_json_dict(bdt), "mergeTree": merge_tree_to_json_dict(tree)},
                indent=2,
            )
        )
    except Exception as exc:
        _fail(exc)


def _sibling(path: str, ext: str) -> str:
    return os.path.splitext(path)[0] + ext


@main.command("layout")
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", "out_path", default="layout.json", show_default=True,
              type=click.Path(dir_okay=False, writable=True))
def cmd_layout(basis_path, out_path):
    """Write the 2D layout as JSON plus a PNG figure and a CSV table."""
    try:
        archive = _load_archive(basis_path)
        basis = basis_from_archive_dict(archive)
        ids = [str(m["id"]) for m in archive.get("members", [])]
        labels = ids if ids else None
        layout = layout_2d(basis, labels=labels)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(layout.to_json_dict(), fh, indent=2)
        from .figures import save_layout_csv, save_layout_figure

        png = _sibling(out_path, ".png")
        csv_path = _sibling(out_path, ".csv")
        save_layout_figure(layout, png)
        save_layout_csv(layout, ids or [str(j) for j in range(basis.n_members)], csv_path)
        click.echo(f"layout: {out_path} {png} {csv_path}")
    except Exception as exc:
        _fail(exc)


@main.command("stats")
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("-o", "--out", "out_path", default="stats.json", show_default=True,
              type=click.Path(dir_okay=False, writable=True))
def cmd_stats(basis_path, workers, out_path):
    """Projected variance, SIM, and persistence correlation of an archive."""
    try:
        archive = _load_archive(basis_path)
        basis = basis_from_archive_dict(archive)
        members = archive.get("members", [])
        if not members:
            raise ValueError("archive carries no member BDTs; refit with cmd_fit")
        from .ingest.bdt import bdt_from_json_dict

        ids = [str(m["id"]) for m in members]
        ensemble = [bdt_from_json_dict(m["bdt"]) for m in members]
        pv = [projected_variance(basis, k) for k in range(1, basis.d_max + 1)]
        layout = layout_2d(basis, labels=ids)
        sim = sim_indicator(layout, ensemble, workers)
        view = persistence_correlation(basis, ensemble, workers)
        _, codec_stats = compress(ensemble, basis)
        out = {
            "projectedVariance": pv,
            "sim": sim,
            "correlation": view.to_json_dict(),
            "codec": codec_stats,
        }
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2)
        from .figures import save_correlation_csv, save_stats_figure

        png = _sibling(out_path, ".png")
        csv_path = _sibling(out_path, ".csv")
        save_stats_figure(pv, view, sim, png)
        save_correlation_csv(view, csv_path)
        click.echo(f"stats: {out_path} {png} {csv_path}")
        click.echo("projected variance: " + ", ".join(f"{v:.4f}" for v in pv))
        click.echo(f"SIM: {sim:.4f}")
    except Exception as exc:
        _fail(exc)


@main.command("serve")
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui-dir", default=None, type=click.Path(file_okay=False),
              help="explorer bundle directory (default: ./frontend/dist)")
def cmd_serve(basis_path, port, host, ui_dir):
    """Serve the archive over HTTP together with the explorer UI."""
    import uvicorn

    if ui_dir is None:
        ui_dir = os.path.join(os.getcwd(), "frontend", "dist")
    try:
        app = create_app(basis_path, ui_dir=ui_dir)
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except Exception as exc:
        _fail(exc)


@main.command("distance")
@click.argument("path_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("path_b", type=click.Path(exists=True, dir_okay=False))
@_with_eps
def cmd_distance(path_a, path_b, eps1, eps2, eps3, simplify_t, tree_kind):
    """Distance between two inputs (.grid fields or BDT JSON files)."""
    kind = tree_kind or DEFAULTS["treeKind"]
    eff_eps1 = 1.0 if kind == "diagram" else _pick(eps1, None, DEFAULTS["eps1"])
    try:
        kwargs = dict(
            tree_kind=kind,
            simplify_threshold=_pick(simplify_t, None, DEFAULTS["simplify"]),
            eps1=eff_eps1,
            eps2=_pick(eps2, None, DEFAULTS["eps2"]),
            eps3=_pick(eps3, None, DEFAULTS["eps3"]),
        )
        ba = load_member(path_a, "a", **kwargs)
        bb = load_member(path_b, "b", **kwargs)
        dist, _ = wt2_bdts(ba, bb)
        click.echo(json.dumps({"distance": dist}))
    except Exception as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
