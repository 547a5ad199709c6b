import json
import os

import numpy as np
import pytest

from mtpga.ingest.bdt import Bdt
from mtpga.pga import GeodesicAxis, PgaBasis, reconstruct


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_diagram(rng, n_max=5):
    n = int(rng.integers(0, n_max + 1))
    b = rng.uniform(0.0, 1.0, n)
    d = b + rng.uniform(0.0, 1.0, n)
    return np.column_stack([b, d]) if n else np.zeros((0, 2))


def random_bdt(rng, n_max=4, n_min=1):
    """Random normalized BDT: random parent forest, strict birth < death."""
    n = int(rng.integers(n_min, n_max + 1))
    parent = [-1] + [int(rng.integers(0, i)) for i in range(1, n)]
    lo = rng.uniform(0.0, 0.45, n)
    hi = rng.uniform(0.55, 1.0, n)
    lo[0], hi[0] = 0.0, 1.0
    return Bdt(
        births=lo,
        deaths=hi,
        parent=np.asarray(parent),
        normalized=True,
        root_interval=(0.0, 1.0),
    )


def random_raw_bdt(rng, n_max=6, n_min=1):
    """Random unnormalized BDT with properly nested raw intervals."""
    n = int(rng.integers(n_min, n_max + 1))
    births = np.empty(n)
    deaths = np.empty(n)
    parent = np.empty(n, dtype=np.int64)
    births[0], deaths[0] = 0.0, float(rng.uniform(2.0, 4.0))
    parent[0] = -1
    for i in range(1, n):
        p = int(rng.integers(0, i))
        span = deaths[p] - births[p]
        a = births[p] + span * rng.uniform(0.02, 0.5)
        b = births[p] + span * rng.uniform(0.55, 0.98)
        births[i], deaths[i] = a, b
        parent[i] = p
    order = np.argsort(-(deaths - births), kind="stable")
    remap = np.empty(n, dtype=np.int64)
    remap[order] = np.arange(n)
    return Bdt(
        births=births[order],
        deaths=deaths[order],
        parent=np.asarray([-1] + [int(remap[parent[i]]) for i in order[1:]]),
        normalized=False,
    )


def grid_file(path, values, dims):
    values = np.asarray(values, dtype=float).ravel()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dims {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write(" ".join(repr(float(v)) for v in values) + "\n")
    return path


def two_bump_grid(path, d1, d2, nx=16, ny=12):
    x, y = np.meshgrid(np.linspace(0, 1, nx), np.linspace(0, 1, ny), indexing="ij")
    f = (
        1.0
        - d1 * np.exp(-((x - 0.25) ** 2 + (y - 0.5) ** 2) / 0.02)
        - d2 * np.exp(-((x - 0.75) ** 2 + (y - 0.5) ** 2) / 0.02)
    )
    return grid_file(path, f.ravel(order="F"), (nx, ny, 1))


def write_manifest(dirpath, members, **params):
    man = {"members": members}
    man.update(params)
    path = os.path.join(dirpath, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(man, fh)
    return path


def planted_origin(n_branches=4):
    """Small origin with comfortable margins for planted-axis tests."""
    if n_branches == 2:
        births = np.array([0.0, 0.2])
        deaths = np.array([1.0, 0.6])
        parent = np.array([-1, 0])
    elif n_branches == 3:
        births = np.array([0.0, 0.2, 0.55])
        deaths = np.array([1.0, 0.45, 0.9])
        parent = np.array([-1, 0, 0])
    else:
        births = np.array([0.0, 0.1, 0.5, 0.3])
        deaths = np.array([1.0, 0.4, 0.85, 0.45])
        parent = np.array([-1, 0, 0, 1])
    return Bdt(
        births=births,
        deaths=deaths,
        parent=parent,
        normalized=True,
        root_interval=(0.0, 1.0),
    )


def planted_directions(scale1=0.18, scale2=0.05):
    """Two orthogonal directions on disjoint branches of the 4-branch origin."""
    v1 = np.zeros(8)
    v1[2] = v1[3] = scale1
    v2 = np.zeros(8)
    v2[4], v2[5] = -scale2, scale2
    return v1, v2


def planted_ensemble(n2=64):
    """Ensemble built exactly on two orthogonal axes through the origin.

    The coordinate sequences are mirror pairs (zero covariance, means 1/2,
    so the barycenter lands on the planted origin) and the farthest member
    sits on axis 1, which keeps the initialization untilted. Returns
    (members, origin, v1, v2, a1, a2).
    """
    origin = planted_origin(4)
    v1, v2 = planted_directions()
    axes = [
        GeodesicAxis(g=0.5 * v1, g_prime=-0.5 * v1),
        GeodesicAxis(g=0.5 * v2, g_prime=-0.5 * v2),
    ]
    basis = PgaBasis(
        origin=origin,
        axes=axes,
        axis_lengths=np.zeros(2),
        coords=np.zeros((0, 2)),
        params={"n2": n2},
    )
    m = n2 - 1
    base = [(0, 31), (21, 63), (9, 42), (31, 0), (14, 53), (5, 0)]
    pairs = base + [(m - s, t) for s, t in base]
    a1 = np.array([p[0] for p in pairs]) / m
    a2 = np.array([p[1] for p in pairs]) / m
    members = [reconstruct(basis, [x, y]) for x, y in zip(a1, a2)]
    return members, origin, v1, v2, a1, a2
