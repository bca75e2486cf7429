#!/usr/bin/env python3
"""
End-to-end tests for the retargeting pipeline
"""

import json
import time

import numpy as np
import pytest

import feature_network as fn
import image_io
import importance as imp
import retarget_config as rconf
import retarget_pipeline as pipeline
import synthetic_images as synth


def quick_config(**overrides):
    config = rconf.create_retarget_config()
    config.update({"iterations": 3, "refine_iterations": 2, "snapshot_every": 0})
    config.update(overrides)
    return rconf.validate_config(config)


@pytest.fixture(scope="module")
def net():
    return pipeline.load_network(quick_config())


@pytest.fixture(scope="module")
def valley():
    return synth.make_planted_valley_pixels(64, 96)


@pytest.fixture(scope="module")
def retargeted(net, valley):
    return pipeline.retarget_image(valley, quick_config(), net)


def test_crop_to_multiple():
    pixels = np.zeros((67, 98, 3), dtype=np.uint8)
    cropped, crop = pipeline.crop_to_multiple(pixels, 4)
    assert cropped.shape == (64, 96, 3)
    assert crop == {"rows": 3, "columns": 2}
    with pytest.raises(image_io.ImageDecodeError, match="smaller than"):
        pipeline.crop_to_multiple(np.zeros((3, 8, 3), dtype=np.uint8), 4)


def test_full_width_is_the_identity(net, valley):
    output, report = pipeline.retarget_image(valley, quick_config(width_fraction=1.0), net)
    assert np.array_equal(output, valley)
    assert report["ss"]["dnr"] == pytest.approx(1.0, abs=1e-6)
    assert report["seam_counts"] == [0, 0, 0]
    assert report["history"][-1]["event_type"] == "identity_fast_path"


def test_three_quarter_width(retargeted):
    output, report = retargeted
    assert output.shape == (64, 72, 3) and output.dtype == np.uint8
    assert report["target_width"] == 72
    counts = report["seam_counts"]
    assert counts[2] >= 1
    assert report["intermediate_width"] == 96 - counts[0] >= 72
    assert sum(report["sigma"]) * 16 == pytest.approx(72, abs=16)
    assert set(report["ss"]) == {"dnr", "image_space_carve", "linear_scale"}
    assert all(value >= 0 for value in report["ss"].values())
    assert "timings" not in report
    json.dumps(report)


def test_report_is_deterministic(net, valley, retargeted):
    output, report = pipeline.retarget_image(valley, quick_config(), net)
    assert np.array_equal(output, retargeted[0])
    assert json.dumps(report, sort_keys=True) == json.dumps(retargeted[1], sort_keys=True)


def test_timings_only_when_requested(net, valley):
    _, report = pipeline.retarget_image(valley, quick_config(report_timings=True), net)
    assert report["timings"]["total"] > 0
    assert "wall_clock" in report["reconstruct"]


def test_same_output_for_any_thread_count(net, valley, monkeypatch):
    monkeypatch.setenv("DNR_THREADS", "1")
    single, _ = pipeline.retarget_image(valley, quick_config(), net)
    monkeypatch.setenv("DNR_THREADS", "4")
    multi, _ = pipeline.retarget_image(valley, quick_config(), net)
    assert np.array_equal(single, multi)


def test_vertical_axis_is_the_transposed_problem(net, valley, retargeted):
    transposed = np.ascontiguousarray(valley.transpose(1, 0, 2))
    output, report = pipeline.retarget_image(transposed, quick_config(axis="vertical"), net)
    assert output.shape == (72, 64, 3)
    assert np.array_equal(output, retargeted[0].transpose(1, 0, 2))
    assert report["seam_counts"] == retargeted[1]["seam_counts"]


def test_dumped_plan_replays_to_the_same_output(net, valley, retargeted, tmp_path):
    output, report = pipeline.retarget_image(valley, quick_config(), net, dump_dir=str(tmp_path))
    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"seam_plan.json", "warp_plan.json", "intermediate.ppm",
                     "loss_reconstruct.csv", "loss_refine.csv"}
    document = json.loads((tmp_path / "seam_plan.json").read_text())
    assert [entry["count"] for entry in document["taps"]] == report["seam_counts"]

    replayed, replay_report = pipeline.retarget_image(valley, quick_config(), net, seam_plan=document)
    assert np.array_equal(replayed, output)
    assert any(e["event_type"] == "plan_replayed" for e in replay_report["history"])
    warp = json.loads((tmp_path / "warp_plan.json").read_text())
    assert sum(warp["target_cell_widths"]) == 72


def test_snapshots_go_to_the_snapshot_directory(net, valley, tmp_path):
    config = quick_config(snapshot_every=2)
    _, report = pipeline.retarget_image(valley, config, net, snapshot_dir=str(tmp_path))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert "reconstruct_0000.ppm" in names and "refine_0000.ppm" in names
    assert report["reconstruct"]["snapshots"] == len([n for n in names if n.startswith("reconstruct")])


def test_inspect_writes_every_artifact(net, valley, retargeted, tmp_path):
    record = pipeline.inspect_image(valley, quick_config(), net, str(tmp_path))
    expected = {"energy.ppm", "effective.ppm", "seam_plan.json", "warp_plan.json"}
    for tap in range(3):
        expected |= {f"tap{tap}_importance.ppm", f"tap{tap}_seams.ppm"}
    assert set(record["files"]) == expected
    assert {p.name for p in tmp_path.iterdir()} == expected
    assert record["seam_counts"] == retargeted[1]["seam_counts"]
    deepest = image_io.read_ppm(str(tmp_path / "tap2_seams.ppm"))
    assert deepest.shape == (16, 24, 3)
    assert np.any(np.all(deepest == pipeline.SEAM_COLOR, axis=2))


def test_score_images(net, valley):
    report = pipeline.score_images(net, valley, valley, name="valley.ppm", method="identity")
    assert report == {"image": "valley.ppm", "method": "identity", "tap": 2, "ss": 1.0}


def test_retarget_files_keeps_job_order(net, valley, tmp_path):
    jobs = []
    for stem in ("first", "second"):
        image_io.write_ppm(str(tmp_path / f"{stem}.ppm"), valley)
        jobs.append((str(tmp_path / f"{stem}.ppm"), str(tmp_path / f"{stem}_out.png")))
    reports = pipeline.retarget_files(jobs, quick_config(), net, dump_dir=str(tmp_path / "dumps"))
    assert [r["input"] for r in reports] == ["first.ppm", "second.ppm"]
    assert image_io.read_image(str(tmp_path / "second_out.png")).shape == (64, 72, 3)
    assert (tmp_path / "dumps" / "first" / "seam_plan.json").is_file()
    assert (tmp_path / "dumps" / "second" / "seam_plan.json").is_file()


def test_inspect_is_deterministic(net, valley, tmp_path):
    first = pipeline.inspect_image(valley, quick_config(), net, str(tmp_path / "a"))
    second = pipeline.inspect_image(valley, quick_config(), net, str(tmp_path / "b"))
    assert first["files"] == second["files"]
    for name in first["files"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# Deepest-tap scores of the default run on the planted valley:
# dnr 0.9955, image-space carve 0.9987, linear scale 0.9279
CARVE_MARGIN = 0.005
LINEAR_MARGIN = 0.03


def test_default_settings_on_the_planted_valley(net, valley, tmp_path, monkeypatch):
    monkeypatch.setenv("DNR_THREADS", "1")
    config = rconf.validate_config(rconf.create_retarget_config())
    started = time.perf_counter()
    output, report = pipeline.retarget_image(valley, config, net, dump_dir=str(tmp_path))
    elapsed = time.perf_counter() - started

    assert output.shape == (64, 72, 3)
    assert elapsed < 60.0
    reconstruct, refine = report["reconstruct"], report["refine"]
    assert reconstruct["iterations"] <= 300
    assert reconstruct["best_loss"] <= 0.9 * reconstruct["initial_loss"]
    assert refine["best_loss"] <= refine["initial_loss"]

    document = json.loads((tmp_path / "seam_plan.json").read_text())
    geometry = fn.build_rf_geometry(net.spec, 64, 96)
    for tap in (1, 0):
        deeper = [np.asarray(s, dtype=np.intp) for s in document["taps"][tap + 1]["seams"]]
        mask = imp.attenuation_mask(geometry, tap + 1, deeper)
        for seam in document["taps"][tap]["seams"]:
            assert all(mask[r, c] for r, c in enumerate(seam)), tap

    ss = report["ss"]
    assert ss["dnr"] >= ss["image_space_carve"] - CARVE_MARGIN
    assert ss["dnr"] >= ss["linear_scale"] + LINEAR_MARGIN
