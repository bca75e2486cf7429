#!/usr/bin/env python3
"""
Tests for per-cell scaling factors and the column warp
"""

import logging

import numpy as np
import pytest

import grid_warp as gw
from importance import ImportanceMap


def effective_from_columns(column_values, height=4):
    values = np.tile(np.asarray(column_values, dtype=np.float32)[None, :], (height, 1))
    return ImportanceMap(values=values, tap=-1, kind="effective")


def test_cell_widths():
    assert gw.cell_widths(40, 16) == [16, 16, 8]
    assert gw.cell_widths(32, 16) == [16, 16]
    with pytest.raises(ValueError, match="positive"):
        gw.cell_widths(10, 0)


def test_apportion_widths_largest_remainder():
    assert gw.apportion_widths(np.array([1.5, 1.5]), 3) == [2, 1]
    assert gw.apportion_widths(np.array([2.2, 3.7, 1.1]), 7) == [2, 4, 1]
    assert gw.apportion_widths(np.array([4.0, 4.0]), 8) == [4, 4]


def test_uniform_importance_halves_every_cell():
    plan = gw.column_sigmas(effective_from_columns(np.ones(96)), 16, 48)
    assert plan["sigma"] == pytest.approx([0.5] * 6)
    assert plan["target_cell_widths"] == [8] * 6
    assert plan["event_type"] == "warp_plan"


def test_clamped_cell_hands_its_excess_to_the_others():
    columns = [3.0] * 16 + [1.0] * 16
    plan = gw.column_sigmas(effective_from_columns(columns), 16, 24)
    assert plan["sigma"][0] == 1.0
    assert plan["sigma"][1] == pytest.approx(0.5)
    assert plan["target_cell_widths"] == [16, 8]


def test_same_width_is_the_identity():
    rng = np.random.default_rng(6)
    effective = ImportanceMap(rng.random((8, 40)).astype(np.float32), tap=-1, kind="effective")
    plan = gw.column_sigmas(effective, 16, 40)
    assert plan["target_cell_widths"] == [16, 16, 8]
    assert all(s == pytest.approx(1.0) for s in plan["sigma"])
    image = rng.random((8, 40, 3)).astype(np.float32)
    assert np.array_equal(gw.warp_image(image, plan), image)


def test_all_zero_importance_falls_back_to_uniform(caplog):
    with caplog.at_level(logging.WARNING, logger="grid_warp"):
        plan = gw.column_sigmas(effective_from_columns(np.zeros(64)), 16, 48)
    assert plan["sigma"] == [0.75] * 4
    assert plan["target_cell_widths"] == [12] * 4
    assert "all zero" in caplog.text


def test_target_widths_always_sum_to_the_new_width():
    rng = np.random.default_rng(12)
    for _ in range(100):
        width = int(rng.integers(20, 120))
        new_width = int(rng.integers(1, width + 1))
        cell = int(rng.integers(1, 33))
        values = rng.random((3, width)) ** 4
        plan = gw.column_sigmas(ImportanceMap(values, tap=-1), cell, new_width)
        assert sum(plan["target_cell_widths"]) == new_width
        assert all(0.0 <= s <= 1.0 for s in plan["sigma"])
        assert all(t <= c for t, c in zip(plan["target_cell_widths"], plan["cell_widths"]))


def test_more_important_cells_shrink_less():
    rng = np.random.default_rng(13)
    for _ in range(20):
        values = rng.random((4, 128)) * rng.random(128)[None, :] * 5
        plan = gw.column_sigmas(ImportanceMap(values, tap=-1), 16, 70)
        order = np.argsort(plan["mu"])
        sigmas = np.array(plan["sigma"])[order]
        assert np.all(np.diff(sigmas) >= -1e-12)


def test_only_shrinking_is_supported():
    with pytest.raises(ValueError, match="only shrinking"):
        gw.column_sigmas(effective_from_columns(np.ones(16)), 8, 17)
    with pytest.raises(ValueError, match="positive"):
        gw.column_sigmas(effective_from_columns(np.ones(16)), 8, 0)


def test_linear_resize_width_ramp():
    ramp = np.tile(np.arange(8, dtype=np.float64)[None, :, None], (2, 1, 1))
    resized = gw.linear_resize_width(ramp, 4)
    assert resized[0, :, 0].tolist() == [0.5, 2.5, 4.5, 6.5]
    assert np.array_equal(gw.linear_resize_width(ramp, 8), ramp)
    single = gw.linear_resize_width(ramp, 1)
    assert single[0, 0, 0] == 3.5


def test_warp_keeps_a_constant_image_constant():
    image = np.full((6, 50, 3), 0.4, dtype=np.float32)
    rng = np.random.default_rng(14)
    plan = gw.column_sigmas(ImportanceMap(rng.random((6, 50)), tap=-1), 16, 31)
    warped = gw.warp_image(image, plan)
    assert warped.shape == (6, 31, 3)
    np.testing.assert_allclose(warped, 0.4, rtol=1e-6)


def test_warp_of_a_piecewise_ramp_matches_per_cell_resampling():
    offsets, slopes = [0.0, 5.0, -3.0, 2.0], [1.0, -0.5, 2.0, 0.25]
    local = np.arange(16, dtype=np.float64)
    row = np.concatenate([a + b * local for a, b in zip(offsets, slopes)])
    image = np.tile(row[None, :, None], (3, 1, 2))
    plan = gw.column_sigmas(effective_from_columns(np.ones(64), height=3), 16, 32)
    assert plan["target_cell_widths"] == [8] * 4

    warped = gw.warp_image(image, plan)
    assert warped.shape == (3, 32, 2)
    # each 16-column cell is sampled at pixel centres 2j + 0.5
    centres = 2.0 * np.arange(8) + 0.5
    expected = np.concatenate([a + b * centres for a, b in zip(offsets, slopes)])
    np.testing.assert_allclose(warped[:, :, 0], np.tile(expected, (3, 1)), atol=1e-9)
    per_cell = np.concatenate([gw.linear_resize_width(image[:, 16 * i:16 * (i + 1)], 8) for i in range(4)], axis=1)
    np.testing.assert_allclose(warped, per_cell, atol=1e-12)


def test_warp_rejects_a_mismatched_image():
    plan = gw.column_sigmas(effective_from_columns(np.ones(32)), 16, 20)
    with pytest.raises(ValueError, match="does not match"):
        gw.warp_image(np.zeros((4, 30, 3)), plan)
