import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtpga.ingest.bdt import (
    Bdt,
    InvalidBdtError,
    absolute_persistence,
    bdt_from_json_dict,
    bdt_to_json,
    bdt_to_json_dict,
    bdt_to_merge_tree,
    denormalized_points,
    normalize,
    preprocess_bdt,
    validate_bdt,
)
from mtpga.ingest.merge_tree import (
    branch_decomposition,
    extract_pairs,
    validate_merge_tree,
)

from conftest import random_bdt, random_raw_bdt


def raw(births, deaths, parent):
    return Bdt(
        births=np.asarray(births, dtype=float),
        deaths=np.asarray(deaths, dtype=float),
        parent=np.asarray(parent, dtype=np.int64),
    )


# ---------------------------------------------------------------- normalize


def test_normalize_child_into_parent_frame():
    b = normalize(raw([0.0, 1.0], [3.0, 2.0], [-1, 0]))
    assert b.normalized
    assert b.root_interval == (0.0, 3.0)
    np.testing.assert_allclose(b.births, [0.0, 1 / 3])
    np.testing.assert_allclose(b.deaths, [1.0, 2 / 3])
    validate_bdt(b)


def test_normalize_child_spanning_parent_becomes_unit():
    b = normalize(raw([2.0, 2.0], [5.0, 5.0], [-1, 0]))
    np.testing.assert_allclose(b.points[1], [0.0, 1.0])


def test_normalize_keeps_raw_root_interval():
    b = normalize(raw([-5.0, -1.0], [7.0, 3.0], [-1, 0]))
    assert b.root_interval == (-5.0, 7.0)
    np.testing.assert_allclose(b.points[0], [0.0, 1.0])
    np.testing.assert_allclose(b.points[1], [4 / 12, 8 / 12])


def test_normalize_rejects_zero_persistence_parent():
    t = raw([0.0, 1.0, 1.0], [3.0, 1.0, 1.0], [-1, 0, 1])
    with pytest.raises(InvalidBdtError, match="zero persistence"):
        normalize(t)


def test_normalize_rejects_zero_persistence_root():
    t = raw([2.0, 2.0], [2.0, 2.0], [-1, 0])
    with pytest.raises(InvalidBdtError, match="root has zero persistence"):
        normalize(t)


def test_normalize_rejects_already_normalized():
    b = normalize(raw([0.0], [1.0], [-1]))
    with pytest.raises(InvalidBdtError, match="already normalized"):
        normalize(b)


def test_single_branch_normalizes_to_unit():
    b = normalize(raw([4.0], [9.0], [-1]))
    np.testing.assert_allclose(b.points, [[0.0, 1.0]])
    assert b.root_interval == (4.0, 9.0)


# ------------------------------------------------------- frame composition


def test_denormalized_points_composes_parent_frames():
    b = Bdt(
        births=np.array([0.0, 0.2, 0.5]),
        deaths=np.array([1.0, 0.7, 1.0]),
        parent=np.array([-1, 0, 1]),
        normalized=True,
        root_interval=(10.0, 20.0),
    )
    pts = denormalized_points(b)
    np.testing.assert_allclose(pts[0], [10.0, 20.0])
    np.testing.assert_allclose(pts[1], [12.0, 17.0])
    # grandchild (0.5, 1.0) inside the (12, 17) frame
    np.testing.assert_allclose(pts[2], [14.5, 17.0])


def test_absolute_persistence_multiplies_spans():
    b = Bdt(
        births=np.array([0.0, 0.25, 0.0]),
        deaths=np.array([1.0, 0.75, 0.5]),
        parent=np.array([-1, 0, 1]),
        normalized=True,
        root_interval=(0.0, 1.0),
    )
    np.testing.assert_allclose(absolute_persistence(b), [1.0, 0.5, 0.25])


def test_absolute_persistence_raw_passthrough():
    t = raw([0.0, 1.0], [4.0, 2.0], [-1, 0])
    np.testing.assert_allclose(absolute_persistence(t), [4.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_then_denormalize_round_trips(seed):
    rng = np.random.default_rng(seed)
    t = random_raw_bdt(rng)
    b = normalize(t)
    validate_bdt(b)
    np.testing.assert_allclose(denormalized_points(b), t.points, atol=1e-12)
    # absolute persistence lives in the root's unit frame
    root_span = t.deaths[0] - t.births[0]
    np.testing.assert_allclose(
        absolute_persistence(b) * root_span, t.persistence, atol=1e-12
    )


# ----------------------------------------------------------------- validate


def test_validate_rejects_empty():
    with pytest.raises(InvalidBdtError, match="empty"):
        validate_bdt(Bdt(births=np.zeros(0), deaths=np.zeros(0), parent=np.zeros(0)))


def test_validate_rejects_forward_parent():
    t = raw([0.0, 0.1, 0.2], [1.0, 0.9, 0.8], [-1, 2, 0])
    with pytest.raises(InvalidBdtError, match="earlier branch"):
        validate_bdt(t)


def test_validate_rejects_rootless():
    t = Bdt(births=np.array([0.0]), deaths=np.array([1.0]), parent=np.array([0]))
    with pytest.raises(InvalidBdtError, match="root"):
        validate_bdt(t)


def test_validate_rejects_non_unit_normalized_root():
    t = Bdt(
        births=np.array([0.1]),
        deaths=np.array([1.0]),
        parent=np.array([-1]),
        normalized=True,
        root_interval=(0.0, 1.0),
    )
    with pytest.raises(InvalidBdtError, match=r"root must be \(0, 1\)"):
        validate_bdt(t)


def test_validate_requires_root_interval_when_normalized():
    t = Bdt(
        births=np.array([0.0]),
        deaths=np.array([1.0]),
        parent=np.array([-1]),
        normalized=True,
    )
    with pytest.raises(InvalidBdtError, match="root interval"):
        validate_bdt(t)


def test_validate_rejects_out_of_unit_child():
    t = Bdt(
        births=np.array([0.0, 0.5]),
        deaths=np.array([1.0, 1.3]),
        parent=np.array([-1, 0]),
        normalized=True,
        root_interval=(0.0, 1.0),
    )
    with pytest.raises(InvalidBdtError, match=r"outside \[0,1\]"):
        validate_bdt(t)


def test_validate_rejects_flat_normalized_child():
    t = Bdt(
        births=np.array([0.0, 0.5]),
        deaths=np.array([1.0, 0.5]),
        parent=np.array([-1, 0]),
        normalized=True,
        root_interval=(0.0, 1.0),
    )
    with pytest.raises(InvalidBdtError, match="birth < death"):
        validate_bdt(t)


def test_validate_rejects_unnested_raw_child():
    t = raw([0.0, 2.0], [3.0, 5.0], [-1, 0])
    with pytest.raises(InvalidBdtError, match="not nested"):
        validate_bdt(t)


def test_validate_accepts_raw_zero_persistence():
    validate_bdt(raw([0.0, 1.0], [3.0, 1.0], [-1, 0]))


def test_mismatched_array_lengths_rejected():
    with pytest.raises(ValueError, match="equal length"):
        Bdt(births=np.zeros(2), deaths=np.zeros(3), parent=np.array([-1, 0]))


# --------------------------------------------------------------- preprocess


def chain(pers):
    """Root plus a chain of descendants with the given persistences."""
    n = len(pers)
    births = np.zeros(n)
    deaths = np.asarray(pers, dtype=float)
    return Bdt(
        births=births, deaths=deaths, parent=np.arange(-1, n - 1, dtype=np.int64)
    )


def test_preprocess_eps2_one_is_identity():
    t = chain([1.0, 0.99, 0.98])
    out = preprocess_bdt(t, eps2=1.0, eps3=1.0)
    np.testing.assert_array_equal(out.parent, t.parent)


def test_preprocess_keeps_modest_child():
    # 0.86 ratio stays below the 0.95 gate
    t = chain([1.0, 0.86])
    out = preprocess_bdt(t, eps2=0.95, eps3=0.9)
    np.testing.assert_array_equal(out.parent, [-1, 0])


def test_preprocess_moves_aggressive_grandchild_up():
    # grandchild/parent = 0.88/0.9 > 0.95, grandchild/max = 0.88 <= 0.9
    t = chain([1.0, 0.9, 0.88])
    out = preprocess_bdt(t, eps2=0.95, eps3=0.9)
    np.testing.assert_array_equal(out.parent, [-1, 0, 0])
    # intervals and order are untouched
    np.testing.assert_array_equal(out.points, t.points)


def test_preprocess_eps3_shields_near_global_branch():
    # same ratios but a tiny eps3 keeps the chain intact
    t = chain([1.0, 0.9, 0.88])
    out = preprocess_bdt(t, eps2=0.95, eps3=0.5)
    np.testing.assert_array_equal(out.parent, [-1, 0, 1])


def test_preprocess_climbs_multiple_levels():
    # 0.97/0.98 and 0.96/0.97 both exceed eps2; after the child reattaches
    # to the root the next pass runs 0.96/0.98 which still exceeds it
    t = chain([1.0, 0.98, 0.97, 0.96])
    out = preprocess_bdt(t, eps2=0.9, eps3=0.99)
    np.testing.assert_array_equal(out.parent, [-1, 0, 0, 0])


def test_preprocess_rejects_normalized_input():
    b = normalize(raw([0.0, 1.0], [3.0, 2.0], [-1, 0]))
    with pytest.raises(InvalidBdtError, match="unnormalized"):
        preprocess_bdt(b, 0.95, 0.9)


def test_preprocess_rejects_out_of_range_eps():
    t = chain([1.0, 0.5])
    with pytest.raises(ValueError, match=r"\[0,1\]"):
        preprocess_bdt(t, 1.5, 0.9)


# ------------------------------------------------------------- merge tree


def test_bdt_to_merge_tree_single_branch():
    b = normalize(raw([2.0], [5.0], [-1]))
    t = bdt_to_merge_tree(b)
    validate_merge_tree(t)
    pairs = extract_pairs(t)
    np.testing.assert_allclose(pairs, [[2.0, 5.0]])


def test_bdt_to_merge_tree_requires_normalized():
    with pytest.raises(InvalidBdtError, match="normalized"):
        bdt_to_merge_tree(raw([0.0], [1.0], [-1]))


def test_bdt_to_merge_tree_rejects_out_of_unit():
    b = Bdt(
        births=np.array([0.0, -0.25]),
        deaths=np.array([1.0, 0.5]),
        parent=np.array([-1, 0]),
        normalized=True,
        root_interval=(0.0, 1.0),
    )
    with pytest.raises(InvalidBdtError, match=r"outside \[0,1\]"):
        bdt_to_merge_tree(b)


def test_bdt_to_merge_tree_rejects_flat_branch():
    b = Bdt(
        births=np.array([0.0, 0.5]),
        deaths=np.array([1.0, 0.5]),
        parent=np.array([-1, 0]),
        normalized=True,
        root_interval=(0.0, 1.0),
    )
    with pytest.raises(InvalidBdtError, match="birth < death"):
        bdt_to_merge_tree(b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_bdt_merge_tree_round_trip_preserves_intervals(seed):
    rng = np.random.default_rng(seed)
    b = random_bdt(rng, n_max=6)
    t = bdt_to_merge_tree(b)
    validate_merge_tree(t)
    back = branch_decomposition(t)
    want = denormalized_points(b)
    got = back.points
    assert sorted(map(tuple, got.tolist())) == pytest.approx(
        sorted(map(tuple, want.tolist()))
    )


def test_bdt_merge_tree_round_trip_keeps_nesting_depths(rng):
    for _ in range(20):
        b = random_bdt(rng, n_max=6)
        back = branch_decomposition(bdt_to_merge_tree(b))
        # the reconstructed decomposition nests: every child interval sits
        # inside its parent's interval in the common frame
        validate_bdt(back)


# -------------------------------------------------------------------- json


def test_json_round_trip():
    b = normalize(raw([0.0, 1.0, 1.5], [4.0, 3.0, 2.5], [-1, 0, 1]))
    obj = bdt_to_json_dict(b)
    back = bdt_from_json_dict(obj)
    assert back.normalized
    assert back.root_interval == b.root_interval
    np.testing.assert_array_equal(back.births, b.births)
    np.testing.assert_array_equal(back.deaths, b.deaths)
    np.testing.assert_array_equal(back.parent, b.parent)


def test_json_parent_none_is_root():
    obj = {
        "branches": [
            {"birth": 0.0, "death": 2.0, "parent": None},
            {"birth": 0.5, "death": 1.0, "parent": 0},
        ]
    }
    b = bdt_from_json_dict(obj)
    assert not b.normalized
    np.testing.assert_array_equal(b.parent, [-1, 0])


def test_json_text_is_canonical():
    b = normalize(raw([0.0], [1.0], [-1]))
    txt = bdt_to_json(b)
    assert txt == json.dumps(
        json.loads(txt), sort_keys=True, separators=(",", ":")
    )


def test_json_missing_branches_rejected():
    with pytest.raises(InvalidBdtError, match="'branches'"):
        bdt_from_json_dict({"normalized": True})


def test_json_empty_branches_rejected():
    with pytest.raises(InvalidBdtError, match="non-empty"):
        bdt_from_json_dict({"branches": []})


def test_json_malformed_branch_rejected():
    with pytest.raises(InvalidBdtError, match="branch 1"):
        bdt_from_json_dict(
            {"branches": [{"birth": 0.0, "death": 1.0, "parent": None}, {"birth": 0.5}]}
        )
