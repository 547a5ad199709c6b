"""End-to-end acceptance checks for the toolkit.

Each test prints a single pass/fail line so the whole gate can be read off
the test log at a glance. Tolerances, instance counts and time budgets are
part of the contract; do not loosen them to make a failing check pass.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from mtpga.analysis import (
    Layout2D,
    _pearson_rows,
    compress,
    decompress,
    projected_variance,
    reconstruction_error,
    sim_indicator,
)
from mtpga.cli import main
from mtpga.ensemble import tree_to_bdt
from mtpga.ingest.bdt import Bdt, bdt_from_json_dict, bdt_to_json_dict
from mtpga.ingest.grid import ScalarFieldGrid
from mtpga.ingest.merge_tree import compute_merge_tree
from mtpga.metrics import geodesic, interpolate, w2_diagrams, wt2_bdts
from mtpga.pga import (
    GeodesicAxis,
    PgaBasis,
    _solve_axis_entries,
    basis_to_archive_dict,
    dumps_canonical,
    fit_basis,
    reconstruct,
)
from mtpga.service import create_app

from conftest import (
    planted_directions,
    planted_ensemble,
    planted_origin,
    random_bdt,
    random_diagram,
    two_bump_grid,
    write_manifest,
)
from oracles import (
    fd_update_gradient,
    lstsq_axis_update,
    w2_diagrams_brute,
    wt2_bdts_brute,
)


@contextmanager
def criterion(label):
    try:
        yield
    except BaseException:
        print(f"acceptance  {label}: FAIL")
        raise
    print(f"acceptance  {label}: PASS")


def collinearity_residual(axis):
    ng = np.linalg.norm(axis.g)
    ngp = np.linalg.norm(axis.g_prime)
    if ng == 0.0 or ngp == 0.0:
        return 0.0
    return float(np.linalg.norm(axis.g / ng + axis.g_prime / ngp))


def noisy_member(rng, base, scale):
    """Copy of `base` with jittered intervals, kept valid and normalized."""
    pts = base.points + rng.normal(0.0, scale, base.points.shape)
    b = np.clip(pts[:, 0], 0.0, 0.9)
    d = np.clip(pts[:, 1], b + 0.05, 1.0)
    b[0], d[0] = 0.0, 1.0
    return Bdt(
        births=b,
        deaths=d,
        parent=base.parent.copy(),
        normalized=True,
        root_interval=(0.0, 1.0),
    )


# ---------------------------------------------------------------------------
# shared fitted ensembles (several criteria inspect every fit made here)


@pytest.fixture(scope="module")
def discipline_runs():
    """Twenty noisy synthetic ensembles, N=12 members each, fitted at d=2."""
    runs = []
    for k in range(20):
        rng = np.random.default_rng(7000 + k)
        base = random_bdt(rng, n_max=16, n_min=6)
        members = [noisy_member(rng, base, 0.03) for _ in range(12)]
        t0 = time.perf_counter()
        basis, report = fit_basis(members, 2, base.n_branches, 16)
        runs.append((basis, report, time.perf_counter() - t0))
    return runs


@pytest.fixture(scope="module")
def planted_fit():
    members, origin, v1, v2, a1, a2 = planted_ensemble(n2=64)
    basis, report = fit_basis(members, 2, origin.n_branches, 64)
    return members, basis, report


@pytest.fixture(scope="module")
def anisotropic_runs():
    """Planted ensembles whose first axis is three times longer than the
    second, with matched coordinate spreads (the second axis reuses the first
    axis draws in permuted order)."""
    runs = []
    for k in range(20):
        rng = np.random.default_rng(9100 + k)
        origin = planted_origin(4)
        v1, v2 = planted_directions(scale1=0.15, scale2=0.05)
        seed = PgaBasis(
            origin=origin,
            axes=[
                GeodesicAxis(g=0.5 * v1, g_prime=-0.5 * v1),
                GeodesicAxis(g=0.5 * v2, g_prime=-0.5 * v2),
            ],
            axis_lengths=np.zeros(2),
            coords=np.zeros((0, 2)),
            params={"n2": 16},
        )
        m = 15
        s = rng.integers(0, 16, 6)
        t = rng.permutation(s)
        pairs = list(zip(s, t)) + [(m - a, b) for a, b in zip(s, t)]
        members = [reconstruct(seed, [a / m, b / m]) for a, b in pairs]
        basis, _ = fit_basis(members, 2, 4, 16)
        runs.append(basis)
    return runs


@pytest.fixture(scope="module")
def codec_runs():
    """Ten small random ensembles with their fitted bases."""
    runs = []
    for k in range(10):
        rng = np.random.default_rng(1100 + k)
        base = random_bdt(rng, n_max=6, n_min=2)
        members = [noisy_member(rng, base, 0.04) for _ in range(5)]
        basis, _ = fit_basis(members, 2, base.n_branches, 8)
        runs.append((members, basis))
    return runs


# ---------------------------------------------------------------------------
# metric layer


def test_diagram_metric_matches_brute_force():
    rng = np.random.default_rng(101)
    with criterion("diagram metric vs exhaustive matching, 500 pairs"):
        t0 = time.perf_counter()
        for _ in range(500):
            di = random_diagram(rng, n_max=5)
            dj = random_diagram(rng, n_max=5)
            fast = w2_diagrams(di, dj)[0]
            assert abs(fast - w2_diagrams_brute(di, dj)) <= 1e-9
        assert time.perf_counter() - t0 < 30.0


def test_tree_metric_matches_brute_force():
    rng = np.random.default_rng(202)
    with criterion("tree metric vs exhaustive matching, 200 pairs"):
        for _ in range(200):
            bi = random_bdt(rng, n_max=4)
            bj = random_bdt(rng, n_max=4)
            fast = wt2_bdts(bi, bj)[0]
            assert abs(fast - wt2_bdts_brute(bi, bj)) <= 1e-9


def test_flat_trees_reduce_to_diagram_metric():
    rng = np.random.default_rng(303)
    with criterion("saddle merging at 1.0 reduces to the diagram metric"):
        for _ in range(100):
            # two members from random fields, built at both saddle settings
            ga = ScalarFieldGrid(dims=(10, 8, 1), values=rng.uniform(0.0, 1.0, 80))
            gb = ScalarFieldGrid(dims=(10, 8, 1), values=rng.uniform(0.0, 1.0, 80))
            ta = compute_merge_tree(ga, "join")
            tb = compute_merge_tree(gb, "join")
            flat_a = tree_to_bdt(ta, simplify_threshold=0.05, eps1=1.0, eps2=1.0, eps3=0.9)
            flat_b = tree_to_bdt(tb, simplify_threshold=0.05, eps1=1.0, eps2=1.0, eps3=0.9)
            assert (flat_a.parent[1:] == 0).all()
            assert (flat_b.parent[1:] == 0).all()
            d_tree = wt2_bdts(flat_a, flat_b)[0]
            d_diag = w2_diagrams(flat_a.points[1:], flat_b.points[1:])[0]
            assert abs(d_tree - d_diag) <= 1e-9

            deep_a = tree_to_bdt(ta, simplify_threshold=0.05, eps1=0.05, eps2=1.0, eps3=0.9)
            deep_b = tree_to_bdt(tb, simplify_threshold=0.05, eps1=0.05, eps2=1.0, eps3=0.9)
            d_deep = wt2_bdts(deep_a, deep_b)[0]
            d_low = w2_diagrams(deep_a.points[1:], deep_b.points[1:])[0]
            assert d_deep + 1e-12 >= d_low


def test_metric_axioms():
    rng = np.random.default_rng(404)
    with criterion("metric axioms on 200 random triples"):
        for _ in range(200):
            a = random_bdt(rng, n_max=4)
            b = random_bdt(rng, n_max=4)
            c = random_bdt(rng, n_max=4)
            dab = wt2_bdts(a, b)[0]
            dba = wt2_bdts(b, a)[0]
            assert dab >= 0.0
            assert abs(dab - dba) <= 1e-9
            assert wt2_bdts(a, a)[0] <= 1e-9
            dac = wt2_bdts(a, c)[0]
            dbc = wt2_bdts(b, c)[0]
            assert dac <= dab + dbc + 1e-9


def test_geodesic_proportionality():
    rng = np.random.default_rng(505)
    with criterion("geodesic distance grows linearly in t, 50 pairs"):
        for _ in range(50):
            bi = random_bdt(rng, n_max=5)
            bj = random_bdt(rng, n_max=5)
            d = wt2_bdts(bi, bj)[0]
            g = geodesic(bi, bj)
            for t in (0.25, 0.5, 0.75):
                bt = interpolate(g.anchor, g, t)
                assert abs(wt2_bdts(bi, bt)[0] - t * d) <= 1e-6


# ---------------------------------------------------------------------------
# fitting layer


def test_axis_update_matches_least_squares():
    rng = np.random.default_rng(606)
    with criterion("closed-form axis update vs least squares, 100 instances"):
        for _ in range(100):
            n = int(rng.integers(3, 9))
            k = int(rng.integers(1, 5))
            alpha = rng.uniform(0.0, 1.0, n)
            if np.ptp(alpha) < 1e-3:
                alpha[0], alpha[-1] = 0.0, 1.0
            residuals = rng.normal(size=(n, k, 2))
            g, gp, underflow = _solve_axis_entries(alpha, residuals)
            assert not underflow
            og, ogp = lstsq_axis_update(alpha, residuals)
            np.testing.assert_allclose(g, og, atol=1e-8)
            np.testing.assert_allclose(gp, ogp, atol=1e-8)
            assert fd_update_gradient(alpha, residuals, g, gp) <= 1e-5


def test_energy_trace_discipline(discipline_runs):
    with criterion("energy trace discipline over 20 fits"):
        assert len(discipline_runs) == 20
        for basis, report, seconds in discipline_runs:
            assert seconds < 60.0
            rows = report.energy_trace
            assert rows
            assert rows[-1][2] <= rows[0][2]
            by_dim = {}
            for d, _, e in rows:
                by_dim.setdefault(d, []).append(e)
            for seq in by_dim.values():
                assert seq[-1] <= seq[0]
                for x, y, z in zip(seq, seq[1:], seq[2:]):
                    assert not (y > x and z > y)


def test_axes_orthogonal_and_collinear_after_every_fit(
    discipline_runs, planted_fit, anisotropic_runs, codec_runs
):
    bases = [b for b, _, _ in discipline_runs]
    bases.append(planted_fit[1])
    bases.extend(anisotropic_runs)
    bases.extend(b for _, b in codec_runs)
    with criterion(f"axis orthogonality and collinearity over {len(bases)} fits"):
        for basis in bases:
            dirs = [axis.g - axis.g_prime for axis in basis.axes]
            for i in range(len(dirs)):
                assert collinearity_residual(basis.axes[i]) <= 1e-9
                for j in range(i + 1, len(dirs)):
                    raw = abs(float(np.dot(dirs[i], dirs[j])))
                    assert raw <= 1e-6
                    ni, nj = np.linalg.norm(dirs[i]), np.linalg.norm(dirs[j])
                    if ni > 0.0 and nj > 0.0:
                        assert raw / (ni * nj) <= 1e-6


def test_planted_basis_recovery(planted_fit):
    members, basis, _ = planted_fit
    with criterion("planted two-axis ensemble recovered at d=2"):
        errs, mean = reconstruction_error(members, basis)
        assert errs.shape == (len(members),)
        assert mean <= 1e-3


def test_projected_variance_ordering(anisotropic_runs):
    with criterion("projected variance ordering in 20/20 anisotropic runs"):
        assert len(anisotropic_runs) == 20
        for basis in anisotropic_runs:
            pv1 = projected_variance(basis, 1)
            pv2 = projected_variance(basis, 2)
            assert pv1 > pv2


# ---------------------------------------------------------------------------
# analysis and tooling layer


def test_codec_round_trip_and_factor(codec_runs):
    with criterion("compression round trip and scalar-count factor, 10 runs"):
        for members, basis in codec_runs:
            blob, stats = compress(members, basis)
            back = decompress(blob)
            assert dumps_canonical(basis_to_archive_dict(back)) == blob
            nb = basis.origin.n_branches
            d = basis.d_max
            assert stats["inputScalars"] == sum(2 * m.n_branches for m in members)
            assert stats["archiveScalars"] == 2 * nb + 4 * nb * d + len(members) * d
            assert stats["compressionFactor"] == (
                stats["inputScalars"] / stats["archiveScalars"]
            )
            for j in range(len(members)):
                np.testing.assert_array_equal(
                    reconstruct(basis, basis.coords[j]).points,
                    reconstruct(back, back.coords[j]).points,
                )


def test_layout_similarity_and_correlation_examples():
    with criterion("exact layout scores 1 and correlation hand values"):
        # three one-child members over dyadic coordinates: the layout reuses
        # the child intervals, so embedded and true distances go through the
        # same float operations and the distortion is exactly zero
        pts = np.array([[0.125, 0.875], [0.25, 0.875], [0.125, 0.625]])
        members = [
            Bdt(
                births=np.array([0.0, b]),
                deaths=np.array([1.0, d]),
                parent=np.array([-1, 0]),
                normalized=True,
                root_interval=(0.0, 1.0),
            )
            for b, d in pts
        ]
        lay = Layout2D(points=pts.copy(), axis_lengths=np.ones(2))
        assert sim_indicator(lay, members) == 1.0

        rho = _pearson_rows(
            np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0], [1.0, 1.0, 2.0]]),
            np.array([1.0, 2.0, 3.0]),
        )
        assert abs(rho[0] - 1.0) <= 1e-6
        assert abs(rho[1] + 1.0) <= 1e-6
        assert abs(rho[2] - np.sqrt(3.0) / 2.0) <= 1e-6


def test_fit_archive_deterministic_across_workers(tmp_path):
    with criterion("fit archives byte-identical, twice at 1 and 8 workers"):
        for j, (d1, d2) in enumerate([(0.9, 0.3), (0.7, 0.5), (0.5, 0.7), (0.3, 0.9)]):
            two_bump_grid(str(tmp_path / f"m{j}.grid"), d1, d2)
        manifest = write_manifest(
            tmp_path, [{"id": f"m{j}", "path": f"m{j}.grid"} for j in range(4)], n2=8
        )
        runner = CliRunner()
        blobs = []
        for tag, w in (("a", "1"), ("b", "1"), ("c", "8"), ("d", "8")):
            out = tmp_path / f"basis_{tag}.json"
            r = runner.invoke(
                main, ["fit", "-m", manifest, "--workers", w, "-o", str(out)]
            )
            assert r.exit_code == 0, r.output
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1] == blobs[2] == blobs[3]


def test_service_member_view_round_trip(tmp_path, planted_fit):
    members, _, _ = planted_fit
    origin_branches = planted_origin(4).n_branches
    with criterion("served member view: branch count and recorded error"):
        ids = []
        for j, member in enumerate(members):
            mid = f"p{j:02d}"
            with open(tmp_path / f"{mid}.json", "w", encoding="utf-8") as fh:
                json.dump(bdt_to_json_dict(member), fh)
            ids.append(mid)
        manifest = write_manifest(
            tmp_path, [{"id": i, "path": f"{i}.json"} for i in ids], n2=64
        )
        out = tmp_path / "basis.json"
        r = CliRunner().invoke(main, ["fit", "-m", manifest, "-o", str(out)])
        assert r.exit_code == 0, r.output
        with open(out) as fh:
            scale = json.load(fh)["params"]["maxPairwiseDistance"]

        client = TestClient(create_app(str(out)))
        meta = client.get("/api/basis/meta").json()
        assert meta["nBranches"] == origin_branches
        for j in (0, 5, len(members) - 1):
            obj = client.get(f"/api/member/{j}").json()
            rec = bdt_from_json_dict(obj["reconstruction"])
            assert rec.n_branches == origin_branches
            member = bdt_from_json_dict(obj["input"])
            d, _ = wt2_bdts(rec, member)
            assert abs(d / scale - obj["error"]) <= 1e-6
