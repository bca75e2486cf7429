#!/usr/bin/env python3
"""
Deep Feature Retargeting API

This module runs the whole retargeting pipeline on in-memory images: crop to
the pooling multiple, collect the feature hierarchy, plan deep seam carving,
reconstruct the intermediate image from the carved feature maps, refine it
through a sampling grid and finally warp column cells to the target width.

Usage:
    import retarget_config as rc
    import retarget_pipeline as pipeline
    from image_io import read_image, write_image

    config = rc.validate_config(rc.create_retarget_config())
    config["width_fraction"] = 0.75

    # Load the network once and reuse it for every image
    net = pipeline.load_network(config)

    pixels = read_image("in.ppm")
    output, report = pipeline.retarget_image(pixels, config, net)
    write_image("out.ppm", output)
    print(report["seam_counts"], report["ss"])
"""

__version__ = "0.1.0"
__author__ = "System Two Digital"

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

import deep_carver
import evaluator
import grid_warp
import reconstructor
from feature_network import (FeatureNetwork, build_tinyvgg, describe_network, forward_collect, init_weights_xorshift,
                             load_weights, with_taps)
from image_io import ImageDecodeError, gray_to_rgb, read_image, to_float, to_uint8, write_image, write_ppm
from importance import aggregate_effective, channel_l2, gradient_magnitude, to_gray8
from retarget_config import resolve_taps, resolve_target_width, resolve_weights
from tensor_engine import as_tensor, get_thread_count

logger = logging.getLogger(__name__)

SEAM_COLOR = np.array([255, 0, 0], dtype=np.uint8)


def load_network(config: dict[str, Any]) -> FeatureNetwork:
    """
    Build the configured network

    Args:
        config: Validated RetargetConfig; "network" is "tinyvgg" (seeded
            weights) or the path of a DNRW weight file for tinyvgg's layers

    Returns:
        The network with the configured taps
    """
    spec = build_tinyvgg()
    taps = resolve_taps(config)
    if taps is not None:
        spec = with_taps(spec, taps)
    if config["network"] == "tinyvgg":
        return init_weights_xorshift(spec, config["weight_seed"])
    return load_weights(spec, config["network"])


def crop_to_multiple(pixels: np.ndarray, factor: int) -> Tuple[np.ndarray, dict[str, int]]:
    """
    Crop rows from the bottom and columns from the right to a multiple of factor

    Returns:
        Tuple of (cropped pixels, record of removed rows and columns)
    """
    h, w = pixels.shape[:2]
    new_h, new_w = h - h % factor, w - w % factor
    if new_h == 0 or new_w == 0:
        raise ImageDecodeError(f"Image {h}x{w} is smaller than the pooling factor {factor}")
    return pixels[:new_h, :new_w], {"rows": h - new_h, "columns": w - new_w}


def _transpose(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image.transpose(1, 0, 2))


def _run_summary(run: dict[str, Any], timings: bool) -> dict[str, Any]:
    summary = {
        "initial_loss": run["loss_trace"][0],
        "best_loss": run["best_loss"],
        "best_iteration": run["best_iteration"],
        "iterations": run["iterations"],
        "stop_reason": run["stop_reason"],
        "snapshots": len(run["snapshots"]),
    }
    if "max_displacement" in run:
        summary["max_displacement"] = run["max_displacement"]
    if timings:
        summary["wall_clock"] = run["wall_clock"]
    return summary


def _optim_configs(config: dict[str, Any], snapshot_dir: Optional[str]):
    common = {
        "stop_window": int(config["stop_window"]),
        "stop_tolerance": float(config["stop_tolerance"]),
        "snapshot_every": int(config["snapshot_every"]),
        "snapshot_dir": snapshot_dir,
        "grid_clamp": float(config["grid_clamp"]),
    }
    pixel_opt = reconstructor.create_optim_config(learning_rate=config["learning_rate"],
                                                  iterations=int(config["iterations"]), **common)
    grid_opt = reconstructor.create_optim_config(learning_rate=config["refine_learning_rate"],
                                                 iterations=int(config["refine_iterations"]), **common)
    return pixel_opt, grid_opt


def plan_for(image: np.ndarray, config: dict[str, Any], net: FeatureNetwork, target_width: int,
             seam_plan: Optional[dict[str, Any]] = None):
    """
    Collect the hierarchy and plan (or replay) deep seam carving

    The carving cap is tightened to (w - w') / w so the intermediate image is
    never narrower than the target.
    """
    hierarchy = forward_collect(net, image)
    if seam_plan is not None:
        return hierarchy, deep_carver.replay_plan(hierarchy, deep_carver.plan_from_json(seam_plan))
    width = image.shape[1]
    cap = min(float(config["max_ratio"]), (width - target_width) / width)
    carve_cfg = deep_carver.create_carve_config(percentile=config["percentile"], alpha=config["alpha"],
                                                max_ratio=cap, hierarchical=config["hierarchical"])
    return hierarchy, deep_carver.plan(hierarchy, carve_cfg)


def warp_plan_for(seam_plan: dict[str, Any], height: int, config: dict[str, Any], target_width: int):
    """WarpPlan from the summed importance of the carved feature maps at the intermediate size"""
    maps = [channel_l2(feature, tap) for tap, feature in enumerate(seam_plan["carved_features"])]
    effective = aggregate_effective(maps, height, seam_plan["intermediate_width"])
    return grid_warp.column_sigmas(effective, int(config["cell_width"]), target_width)


def _write_json(path: str, record: dict[str, Any]) -> None:
    with open(path, "w") as handle:
        json.dump(record, handle, indent=2, sort_keys=True)
        handle.write("\n")


def retarget_image(pixels: np.ndarray, config: dict[str, Any], net: FeatureNetwork,
                   seam_plan: Optional[dict[str, Any]] = None, dump_dir: Optional[str] = None,
                   snapshot_dir: Optional[str] = None) -> Tuple[np.ndarray, dict[str, Any]]:
    """
    Retarget one image to the configured width (or height)

    Args:
        pixels: uint8 (h, w, 3) input
        config: Validated RetargetConfig
        net: Network from load_network
        seam_plan: SeamPlan document to replay instead of planning
        dump_dir: Directory for stage dumps
        snapshot_dir: Directory for optimiser snapshots

    Returns:
        Tuple of (uint8 output, report record)

    Raises:
        DivergenceError: If an optimisation stage diverges
    """
    started = time.perf_counter()
    history = []
    cropped, crop = crop_to_multiple(pixels, net.spec.pool_factor())
    vertical = config["axis"] == "vertical"
    work = _transpose(cropped) if vertical else cropped
    image = as_tensor(to_float(work))
    h, w, _ = image.shape
    target_width = resolve_target_width(config, w)
    history.append({"event_type": "cropped", "rows": crop["rows"], "columns": crop["columns"]})
    report = {
        "event_type": "retarget_report",
        "axis": config["axis"],
        "crop": crop,
        "source": {"height": h, "width": w},
        "target_width": target_width,
        "network": describe_network(net),
        "history": history,
    }
    score_tap = int(config["score_tap"])

    if target_width == w:
        history.append({"event_type": "identity_fast_path"})
        report.update({
            "seam_counts": [0] * len(net.spec.taps),
            "ratio": 0.0,
            "intermediate_width": w,
            "sigma": [],
            "ss": {"dnr": evaluator.semantic_score(net, image, image, score_tap)},
        })
        return cropped.copy(), report

    hierarchy, plan = plan_for(image, config, net, target_width, seam_plan)
    history.extend(plan["history"])
    weights = resolve_weights(config, len(net.spec.taps))
    targets = reconstructor.build_targets(plan["carved_features"], weights)

    init = reconstructor.init_estimate(image, config["init_mode"], plan, seed=int(config["seed"]))
    history.append({"event_type": "initialised", "mode": config["init_mode"], "width": init.shape[1]})
    pixel_opt, grid_opt = _optim_configs(config, snapshot_dir)
    reconstructed, pixel_run = reconstructor.reconstruct(net, init, targets, pixel_opt)
    history.append({"event_type": "reconstructed", "stop_reason": pixel_run["stop_reason"]})
    refined, _, grid_run = reconstructor.refine(net, reconstructed, targets, grid_opt)
    history.append({"event_type": "refined", "stop_reason": grid_run["stop_reason"]})

    warp_plan = warp_plan_for(plan, h, config, target_width)
    output = grid_warp.warp_image(refined, warp_plan)
    history.append({"event_type": "warped", "width": output.shape[1]})

    scores = {"dnr": evaluator.semantic_score(net, image, output, score_tap)}
    finest = plan["taps"][0]
    if (finest["height"], finest["width"]) == (h, w):
        carved = evaluator.baseline_image_space_carve(image, plan, warp_plan)
        scores["image_space_carve"] = evaluator.semantic_score(net, image, carved, score_tap)
    else:
        history.append({"event_type": "baseline_skipped", "reason": "finest tap is below image resolution"})
    linear = evaluator.baseline_linear_scale(image, target_width)
    scores["linear_scale"] = evaluator.semantic_score(net, image, linear, score_tap)

    result = to_uint8(output)
    if vertical:
        result = _transpose(result)
    report.update({
        "seam_counts": [entry["count"] for entry in plan["taps"]],
        "ratio": plan["ratio"],
        "intermediate_width": plan["intermediate_width"],
        "reconstruct": _run_summary(pixel_run, config["report_timings"]),
        "refine": _run_summary(grid_run, config["report_timings"]),
        "sigma": warp_plan["sigma"],
        "ss": scores,
    })
    if config["report_timings"]:
        report["timings"] = {"total": time.perf_counter() - started}

    if dump_dir:
        os.makedirs(dump_dir, exist_ok=True)
        _write_json(os.path.join(dump_dir, "seam_plan.json"), deep_carver.plan_to_json(plan))
        _write_json(os.path.join(dump_dir, "warp_plan.json"), grid_warp.warp_plan_to_json(warp_plan))
        write_ppm(os.path.join(dump_dir, "intermediate.ppm"), to_uint8(refined))
        reconstructor.write_loss_trace(pixel_run, os.path.join(dump_dir, "loss_reconstruct.csv"))
        reconstructor.write_loss_trace(grid_run, os.path.join(dump_dir, "loss_refine.csv"))
        history.append({"event_type": "dumped", "directory": dump_dir})
    logger.info("Retargeted %dx%d to width %d (seams %s)", h, w, target_width, report["seam_counts"])
    return result, report


def _seam_overlay(importance: np.ndarray, seams: Sequence[Sequence[int]]) -> np.ndarray:
    overlay = gray_to_rgb(to_gray8(importance))
    for seam in seams:
        overlay[np.arange(len(seam)), np.asarray(seam, dtype=np.intp)] = SEAM_COLOR
    return overlay


def inspect_image(pixels: np.ndarray, config: dict[str, Any], net: FeatureNetwork, out_dir: str) -> dict[str, Any]:
    """
    Write importance artifacts for one image without synthesising anything

    Per tap: the importance map the carver used and a seam overlay on it.
    Also the effective map (the carver's raw per-tap maps upsampled and
    summed, normalised once), the image-space gradient energy, the SeamPlan and the WarpPlan.

    Returns:
        Record of the files written and the per-tap seam counts
    """
    os.makedirs(out_dir, exist_ok=True)
    cropped, crop = crop_to_multiple(pixels, net.spec.pool_factor())
    work = _transpose(cropped) if config["axis"] == "vertical" else cropped
    image = as_tensor(to_float(work))
    h, w, _ = image.shape
    target_width = resolve_target_width(config, w)
    files = []

    def emit(name: str, rgb: np.ndarray) -> None:
        path = os.path.join(out_dir, name)
        write_ppm(path, rgb)
        files.append(name)

    record = {"event_type": "inspect_report", "crop": crop, "target_width": target_width, "files": files}
    emit("energy.ppm", gray_to_rgb(to_gray8(gradient_magnitude(image).values)))
    if target_width < w:
        _, plan = plan_for(image, config, net, target_width)
        effective = aggregate_effective(plan["carver_maps"], h, w)
        emit("effective.ppm", gray_to_rgb(to_gray8(effective.values)))
        for entry, importance in zip(plan["taps"], plan["carver_maps"]):
            emit(f"tap{entry['tap']}_importance.ppm", gray_to_rgb(to_gray8(importance.values)))
            emit(f"tap{entry['tap']}_seams.ppm", _seam_overlay(importance.values, entry["seams"]))
        warp_plan = warp_plan_for(plan, h, config, target_width)
        _write_json(os.path.join(out_dir, "seam_plan.json"), deep_carver.plan_to_json(plan))
        _write_json(os.path.join(out_dir, "warp_plan.json"), grid_warp.warp_plan_to_json(warp_plan))
        files.extend(["seam_plan.json", "warp_plan.json"])
        record["seam_counts"] = [entry["count"] for entry in plan["taps"]]
    else:
        hierarchy = forward_collect(net, image)
        base_maps = [channel_l2(feature, tap) for tap, feature in enumerate(hierarchy.features)]
        emit("effective.ppm", gray_to_rgb(to_gray8(aggregate_effective(base_maps, h, w).values)))
        for tap, importance in enumerate(base_maps):
            emit(f"tap{tap}_importance.ppm", gray_to_rgb(to_gray8(importance.values)))
        record["seam_counts"] = [0] * len(base_maps)
    logger.info("Inspected %dx%d: %d files in %s", h, w, len(files), out_dir)
    return record


def score_images(net: FeatureNetwork, original: np.ndarray, candidate: np.ndarray, tap: int = -1,
                 name: str = "", method: str = "candidate") -> dict[str, Any]:
    """ScoreReport for a candidate against its original (both uint8, cropped to the pooling multiple)"""
    factor = net.spec.pool_factor()
    original_image = as_tensor(to_float(crop_to_multiple(original, factor)[0]))
    candidate_image = as_tensor(to_float(candidate))
    ss = evaluator.semantic_score(net, original_image, candidate_image, tap)
    index = tap + len(net.spec.taps) if tap < 0 else tap
    return evaluator.create_score_report(name, method, index, ss)


def retarget_file(input_path: str, output_path: str, config: dict[str, Any], net: FeatureNetwork,
                  seam_plan: Optional[dict[str, Any]] = None, dump_dir: Optional[str] = None,
                  snapshot_dir: Optional[str] = None) -> dict[str, Any]:
    """Read, retarget and write one file; returns the report"""
    pixels = read_image(input_path)
    output, report = retarget_image(pixels, config, net, seam_plan, dump_dir, snapshot_dir)
    write_image(output_path, output)
    report["input"] = os.path.basename(input_path)
    report["output"] = os.path.basename(output_path)
    return report


def retarget_files(jobs: Sequence[Tuple[str, str]], config: dict[str, Any], net: FeatureNetwork,
                   dump_dir: Optional[str] = None, snapshot_dir: Optional[str] = None) -> List[dict[str, Any]]:
    """
    Retarget several files concurrently, each with its own state

    Stage dumps and snapshots go to per-input subdirectories. Reports come
    back in job order.
    """
    def run(job: Tuple[str, str]) -> dict[str, Any]:
        input_path, output_path = job
        stem = os.path.splitext(os.path.basename(input_path))[0]
        return retarget_file(input_path, output_path, config, net,
                             dump_dir=os.path.join(dump_dir, stem) if dump_dir else None,
                             snapshot_dir=os.path.join(snapshot_dir, stem) if snapshot_dir else None)

    if len(jobs) == 1:
        return [run(jobs[0])]
    with ThreadPoolExecutor(max_workers=min(len(jobs), get_thread_count())) as pool:
        return list(pool.map(run, jobs))


def write_report(path: str, record: dict[str, Any]) -> None:
    """Write a report as sorted, indented JSON"""
    _write_json(path, record)
