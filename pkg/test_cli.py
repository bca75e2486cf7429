#!/usr/bin/env python3
"""
Tests for the dnr command line
"""

import json
import logging

import pytest
from click.testing import CliRunner

import dnr
import feature_network as fn
import image_io
import retarget_config as rconf
import synthetic_images as synth
from reconstructor import DivergenceError

FAST = ["--iterations", "2", "--refine-iterations", "1"]


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler.formatter, rconf.ColorFormatter):
            root.removeHandler(handler)
    root.setLevel(logging.WARNING)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def valley_path(tmp_path):
    path = tmp_path / "valley.ppm"
    image_io.write_ppm(str(path), synth.make_planted_valley_pixels(64, 96))
    return str(path)


def test_version(runner):
    result = runner.invoke(dnr.cli, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.output


def test_print_config_shows_the_merged_values(runner, tmp_path):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"alpha": 0.25, "cell_width": 8}))
    result = runner.invoke(dnr.cli, ["retarget", "in.ppm", "--out", "out.ppm", "--config", str(config_path),
                                     "--cell-width", "12", "--weights", "0.5,0.5,0", "--print-config"])
    assert result.exit_code == 0
    config = json.loads(result.output)
    assert config["alpha"] == 0.25
    assert config["cell_width"] == 12
    assert config["weights"] == [0.5, 0.5, 0.0]


def test_invalid_values_exit_with_config_code(runner, valley_path, tmp_path):
    result = runner.invoke(dnr.cli, ["retarget", valley_path, "--out", str(tmp_path / "o.ppm"), "--alpha", "1.5"])
    assert result.exit_code == 3
    assert "alpha" in result.output

    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"colour": "red"}))
    result = runner.invoke(dnr.cli, ["score", "--original", valley_path, "--candidate", valley_path,
                                     "--config", str(config_path)])
    assert result.exit_code == 3
    assert "colour" in result.output


@pytest.mark.parametrize("flags", [
    ["--taps", "3,99"],
    ["--taps=-1,3"],
    ["--score-tap", "7"],
])
def test_out_of_range_taps_exit_with_config_code(runner, valley_path, tmp_path, flags):
    result = runner.invoke(dnr.cli, ["retarget", valley_path, "--out", str(tmp_path / "o.ppm")] + FAST + flags)
    assert result.exit_code == 3, result.output
    assert "out of range" in result.output


def test_image_below_the_pooling_factor_exits_with_decode_code(runner, tmp_path):
    tiny = tmp_path / "tiny.ppm"
    image_io.write_ppm(str(tiny), synth.make_planted_valley_pixels(2, 2))
    result = runner.invoke(dnr.cli, ["retarget", str(tiny), "--out", str(tmp_path / "o.ppm")] + FAST)
    assert result.exit_code == 2, result.output
    assert "smaller than the pooling factor" in result.output


def test_corrupt_weight_file_exits_with_config_code(runner, valley_path, tmp_path):
    weights = tmp_path / "bad.dnrw"
    weights.write_bytes(b"nope")
    result = runner.invoke(dnr.cli, ["score", "--original", valley_path, "--candidate", valley_path,
                                     "--network", str(weights)])
    assert result.exit_code == 3


def test_unreadable_images_exit_with_decode_code(runner, tmp_path):
    garbage = tmp_path / "garbage.ppm"
    garbage.write_bytes(b"P5\n1 1\n255\n\x00")
    result = runner.invoke(dnr.cli, ["retarget", str(garbage), "--out", str(tmp_path / "o.ppm")] + FAST)
    assert result.exit_code == 2
    result = runner.invoke(dnr.cli, ["inspect", str(tmp_path / "missing.ppm"), "--out-dir", str(tmp_path / "a")])
    assert result.exit_code == 2


def test_divergence_exits_with_its_own_code(runner, valley_path, tmp_path, monkeypatch):
    def diverge(*args, **kwargs):
        raise DivergenceError("reconstruct", 3, "loss is nan")

    monkeypatch.setattr(dnr.pipeline, "retarget_file", diverge)
    result = runner.invoke(dnr.cli, ["retarget", valley_path, "--out", str(tmp_path / "o.ppm")])
    assert result.exit_code == 4
    assert "reconstruct diverged at iteration 3" in result.output


def test_retarget_writes_image_and_report(runner, valley_path, tmp_path):
    out = tmp_path / "out.png"
    report_path = tmp_path / "report.json"
    result = runner.invoke(dnr.cli, ["retarget", valley_path, "--out", str(out), "--report", str(report_path),
                                     "--dump-dir", str(tmp_path / "dump")] + FAST)
    assert result.exit_code == 0, result.output
    assert image_io.read_image(str(out)).shape == (64, 72, 3)
    report = json.loads(report_path.read_text())
    assert report["target_width"] == 72
    assert report["input"] == "valley.ppm"

    replay = tmp_path / "replay.png"
    result = runner.invoke(dnr.cli, ["retarget", valley_path, "--out", str(replay),
                                     "--plan", str(tmp_path / "dump" / "seam_plan.json")] + FAST)
    assert result.exit_code == 0, result.output
    assert (image_io.read_image(str(replay)) == image_io.read_image(str(out))).all()


def test_plan_with_several_inputs_is_rejected(runner, valley_path, tmp_path):
    result = runner.invoke(dnr.cli, ["retarget", valley_path, valley_path, "--out", str(tmp_path / "outs"),
                                     "--plan", "plan.json"])
    assert result.exit_code == 3


def test_score_identity(runner, valley_path):
    result = runner.invoke(dnr.cli, ["score", "--original", valley_path, "--candidate", valley_path,
                                     "--method", "identity"])
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["ss"] == 1.0 and report["method"] == "identity"


def test_inspect_lists_its_artifacts(runner, valley_path, tmp_path):
    result = runner.invoke(dnr.cli, ["inspect", valley_path, "--out-dir", str(tmp_path / "art")])
    assert result.exit_code == 0, result.output
    record = json.loads(result.output)
    assert "effective.ppm" in record["files"]
    assert len(record["seam_counts"]) == 3


def test_export_weights(runner, tmp_path):
    path = tmp_path / "tinyvgg.dnrw"
    result = runner.invoke(dnr.cli, ["export-weights", str(path), "--weight-seed", "7"])
    assert result.exit_code == 0
    net = fn.load_weights(fn.build_tinyvgg(), str(path))
    seeded = fn.init_weights_xorshift(fn.build_tinyvgg(), 7)
    for (_, a), (_, b) in zip(net.kernels, seeded.kernels):
        assert (a.weights == b.weights).all()
