#!/usr/bin/env python3
"""
Tests for deep seam carving: the DP, admissibility and the hierarchical plan
"""

import itertools
import json

import numpy as np
import pytest

import deep_carver as dc
import feature_network as fn
import synthetic_images as synth


def brute_force_min_cost(values):
    """Cheapest 8-connected vertical path by enumerating every step sequence"""
    h, w = values.shape
    best = np.inf
    for start in range(w):
        for steps in itertools.product((-1, 0, 1), repeat=h - 1):
            columns = [start]
            for step in steps:
                columns.append(columns[-1] + step)
            if min(columns) < 0 or max(columns) >= w:
                continue
            best = min(best, sum(values[r, c] for r, c in enumerate(columns)))
    return best


def synthetic_hierarchy(deep_map, seed=0):
    """Tinyvgg-shaped hierarchy for a 64x96 image whose deepest tap norm is deep_map"""
    rng = np.random.default_rng(seed)
    spec = fn.build_tinyvgg()
    features = [
        (rng.random((64, 96, 8)) + 0.1).astype(np.float32),
        (rng.random((32, 48, 16)) + 0.1).astype(np.float32),
        synth.map_as_feature(deep_map, 32),
    ]
    return fn.FeatureHierarchy(features=features, geometry=fn.build_rf_geometry(spec, 64, 96),
                               image_shape=(64, 96, 3))


@pytest.fixture(scope="module")
def ramp_hierarchy():
    return synthetic_hierarchy(synth.make_alternating_ramp_map(16, 24))


def test_min_seam_examples():
    seam, cost = dc.min_seam(np.ones((3, 3)))
    assert seam.tolist() == [0, 0, 0] and cost == 3.0

    diagonal = np.array([[1, 9, 9], [9, 1, 9], [9, 9, 1]], dtype=np.float64)
    seam, cost = dc.min_seam(diagonal)
    assert seam.tolist() == [0, 1, 2] and cost == 3.0


@pytest.mark.parametrize("shape", [(5, 5), (6, 7)])
def test_min_seam_matches_brute_force(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(100):
        values = rng.integers(0, 10, size=shape).astype(np.float64)
        seam, cost = dc.min_seam(values)
        dc.validate_seam(seam, *shape)
        assert cost == sum(values[r, c] for r, c in enumerate(seam))
        assert cost == brute_force_min_cost(values)


def test_min_seam_needs_two_columns():
    with pytest.raises(ValueError, match="width >= 2"):
        dc.min_seam(np.ones((4, 1)))


def test_remove_seam_drops_one_value_per_row():
    rng = np.random.default_rng(3)
    feature = rng.random((5, 6, 2))
    seam = np.array([2, 3, 3, 4, 5])
    carved = dc.remove_seam(feature, seam)
    assert carved.shape == (5, 5, 2)
    for r in range(5):
        expected = np.delete(feature[r], seam[r], axis=0)
        assert np.array_equal(carved[r], expected)
    with pytest.raises(ValueError, match="8-connected"):
        dc.remove_seam(feature, np.array([0, 2, 2, 2, 2]))


def test_nearest_rank_percentile():
    values = np.arange(1, 11, dtype=np.float64)
    assert dc.nearest_rank_percentile(values, 20) == 2.0
    assert dc.nearest_rank_percentile(values, 100) == 10.0
    assert dc.nearest_rank_percentile(values, 1) == 1.0


def test_seam_admissible():
    values = np.full((4, 4), 10.0)
    values[:, 0] = 0.0
    assert dc.seam_admissible(values, np.zeros(4, dtype=np.intp), 20)
    assert not dc.seam_admissible(values, np.ones(4, dtype=np.intp), 20)


def test_seam_counts():
    assert dc.seam_counts(1 / 16, [64, 32, 16]) == [4, 2, 1]
    assert dc.seam_counts(0.5, [3]) == [2]


def test_create_carve_config_validates():
    with pytest.raises(ValueError, match="percentile"):
        dc.create_carve_config(percentile=0)
    with pytest.raises(ValueError, match="alpha"):
        dc.create_carve_config(alpha=1.0)
    with pytest.raises(ValueError, match="max_ratio"):
        dc.create_carve_config(max_ratio=1.0)


def test_apply_seams_replays_original_coordinates():
    feature = np.arange(12, dtype=np.float64).reshape(2, 6, 1)
    first = np.array([1, 2])
    second = np.array([2, 3])
    carved = dc.apply_seams(feature, [first, second])
    assert carved[:, :, 0].tolist() == [[0, 3, 4, 5], [6, 7, 10, 11]]
    with pytest.raises(ValueError, match="already removed"):
        dc.apply_seams(feature, [first, first])


def test_alternating_ramp_removes_exactly_one_deep_seam(ramp_hierarchy):
    result = dc.plan(ramp_hierarchy, dc.create_carve_config())
    assert [entry["count"] for entry in result["taps"]] == [4, 2, 1]
    assert result["ratio"] == pytest.approx(1 / 24)
    assert result["intermediate_width"] == 92
    stopped = [e for e in result["history"] if e["event_type"] == "deep_carving_stopped"]
    assert stopped[0]["reason"] == "inadmissible"
    assert [f.shape for f in result["carved_features"]] == [(64, 92, 8), (32, 46, 16), (16, 23, 32)]


def test_zero_deep_map_stops_at_the_ratio_cap():
    hierarchy = synthetic_hierarchy(np.zeros((16, 24), dtype=np.float32), seed=1)
    result = dc.plan(hierarchy, dc.create_carve_config(max_ratio=0.25))
    assert [entry["count"] for entry in result["taps"]] == [24, 12, 6]
    assert result["ratio"] == 0.25
    events = [e["event_type"] for e in result["history"]]
    assert "ratio_clamped" in events
    stopped = [e for e in result["history"] if e["event_type"] == "deep_carving_stopped"]
    assert stopped[0]["reason"] == "ratio_cap"


def test_finer_seams_follow_the_counts_ratio(ramp_hierarchy):
    result = dc.plan(ramp_hierarchy, dc.create_carve_config())
    widths = [f.shape[1] for f in ramp_hierarchy.features]
    for entry, width, carved in zip(result["taps"], widths, result["carved_features"]):
        assert entry["count"] == int(np.floor(result["ratio"] * width + 0.5))
        assert len(entry["seams"]) == entry["count"]
        assert carved.shape[1] == width - entry["count"]


def test_zero_alpha_keeps_finer_seams_inside_the_deeper_fields(ramp_hierarchy):
    result = dc.plan(ramp_hierarchy, dc.create_carve_config(alpha=0.0))
    geom = ramp_hierarchy.geometry
    for tap in (1, 0):
        deeper = [np.asarray(s) for s in result["taps"][tap + 1]["seams"]]
        mask = dc.attenuation_mask(geom, tap + 1, deeper)
        for seam in result["taps"][tap]["seams"]:
            assert all(mask[r, c] for r, c in enumerate(seam)), tap


def test_independent_plan_has_unattenuated_maps(ramp_hierarchy):
    result = dc.plan(ramp_hierarchy, dc.create_carve_config(hierarchical=False))
    assert result["hierarchical"] is False
    assert all(m.kind == "base" for m in result["carver_maps"])


def test_plan_is_deterministic(ramp_hierarchy):
    cfg = dc.create_carve_config()
    first = dc.plan(ramp_hierarchy, cfg)
    second = dc.plan(ramp_hierarchy, cfg)
    assert first["taps"] == second["taps"]


def test_plan_survives_json_and_replays(ramp_hierarchy):
    result = dc.plan(ramp_hierarchy, dc.create_carve_config())
    document = json.loads(json.dumps(dc.plan_to_json(result)))
    restored = dc.plan_from_json(document)
    assert restored["carved_features"] is None
    replayed = dc.replay_plan(ramp_hierarchy, restored)
    for a, b in zip(result["carved_features"], replayed["carved_features"]):
        assert np.array_equal(a, b)
    assert replayed["history"][-1]["event_type"] == "plan_replayed"


def test_plan_from_json_rejects_bad_documents(ramp_hierarchy):
    document = dc.plan_to_json(dc.plan(ramp_hierarchy, dc.create_carve_config()))
    missing = {k: v for k, v in document.items() if k != "ratio"}
    with pytest.raises(ValueError, match="ratio"):
        dc.plan_from_json(missing)
    broken = json.loads(json.dumps(document))
    broken["taps"][2]["seams"][0][0] = 99
    with pytest.raises(ValueError, match="Seam columns"):
        dc.plan_from_json(broken)
    miscounted = json.loads(json.dumps(document))
    miscounted["taps"][0]["count"] = 7
    with pytest.raises(ValueError, match="count"):
        dc.plan_from_json(miscounted)
