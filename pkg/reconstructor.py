"""
Image reconstruction from target feature maps

The intermediate image is found by minimising the weighted per-tap L2 gap
between its activations and the carved target maps with Adam on the pixels.
A second stage freezes the pixels and optimises a bilinear sampling grid
placed in front of the network instead.
"""

import csv
import logging
import math
import os
import time
from typing import Any, Optional, Sequence, Tuple

import numpy as np

from deep_carver import apply_seams
from feature_network import FeatureNetwork, loss_and_input_gradient
from grid_warp import linear_resize_width
from image_io import to_uint8, write_ppm
from tensor_engine import (adam_step, bilinear_sample, bilinear_sample_backward_grid, create_adam_state,
                           identity_grid)

logger = logging.getLogger(__name__)

INIT_MODES = ("linear", "seam", "noise")


class DivergenceError(RuntimeError):
    """The optimiser produced a non-finite loss or gradient"""

    def __init__(self, stage: str, iteration: int, detail: str):
        self.stage = stage
        self.iteration = iteration
        super().__init__(f"{stage} diverged at iteration {iteration}: {detail}")


def create_optim_config(learning_rate: float = 0.05, iterations: int = 300, stop_window: int = 25,
                        stop_tolerance: float = 1e-4, snapshot_every: int = 50,
                        snapshot_dir: Optional[str] = None, grid_clamp: float = 2.0) -> dict[str, Any]:
    """Optimiser settings shared by reconstruct and refine"""
    if learning_rate <= 0:
        raise ValueError(f"learning_rate must be positive, got {learning_rate}")
    if iterations < 0:
        raise ValueError(f"iterations must be non-negative, got {iterations}")
    if stop_window < 1:
        raise ValueError(f"stop_window must be at least 1, got {stop_window}")
    if grid_clamp < 0:
        raise ValueError(f"grid_clamp must be non-negative, got {grid_clamp}")
    return {
        "learning_rate": learning_rate,
        "iterations": iterations,
        "stop_window": stop_window,
        "stop_tolerance": stop_tolerance,
        "snapshot_every": snapshot_every,
        "snapshot_dir": snapshot_dir,
        "grid_clamp": grid_clamp,
    }


def create_optim_run(stage: str) -> dict[str, Any]:
    """Empty OptimRun record for one optimisation stage"""
    return {
        "event_type": "optim_run",
        "stage": stage,
        "loss_trace": [],
        "iterations": 0,
        "best_iteration": 0,
        "best_loss": None,
        "stop_reason": None,
        "snapshots": [],
        "wall_clock": 0.0,
    }


def build_targets(features: Sequence[np.ndarray], weights: Sequence[float]) -> list:
    """
    TargetFeatures as (tap, tensor, weight) triples

    Raises:
        ValueError: On a count mismatch, a negative weight or all-zero weights
    """
    if len(features) != len(weights):
        raise ValueError(f"Got {len(features)} target maps but {len(weights)} weights")
    if any(weight < 0 for weight in weights):
        raise ValueError(f"Tap weights must be non-negative, got {list(weights)}")
    if not any(weight > 0 for weight in weights):
        raise ValueError(f"At least one tap weight must be positive, got {list(weights)}")
    return [(tap, feature, float(weight)) for tap, (feature, weight) in enumerate(zip(features, weights))]


def init_estimate(image: np.ndarray, mode: str, seam_plan: Optional[dict[str, Any]] = None,
                  width: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """
    Initial estimate of the intermediate image

    Args:
        image: Source image (h, w, c) in [0, 1]
        mode: "linear" (1-D linear resample), "seam" (finest-tap seams
            removed in image space) or "noise" (seeded uniform [0, 1))
        seam_plan: SeamPlan; required for "seam", and supplies the
            intermediate width when `width` is not given
        width: Intermediate width w''
        seed: Seed for "noise"

    Returns:
        The estimate, float32 (h, w'', c)
    """
    if mode not in INIT_MODES:
        raise ValueError(f"Unknown init mode '{mode}', expected one of {INIT_MODES}")
    if width is None:
        if seam_plan is None:
            raise ValueError(f"Init mode '{mode}' needs a seam plan or an explicit width")
        width = seam_plan["intermediate_width"]

    if mode == "linear":
        return linear_resize_width(image, width)
    if mode == "seam":
        if seam_plan is None:
            raise ValueError("Seam initialisation needs a seam plan")
        finest = seam_plan["taps"][0]
        if finest["width"] != image.shape[1] or finest["height"] != image.shape[0]:
            raise ValueError(
                f"Finest tap is {finest['height']}x{finest['width']}, image is {image.shape[0]}x{image.shape[1]}; "
                f"seam initialisation needs a full-resolution finest tap"
            )
        return apply_seams(image, [np.asarray(s, dtype=np.intp) for s in finest["seams"]])
    rng = np.random.default_rng(seed)
    return rng.random((image.shape[0], width, image.shape[2])).astype(np.float32)


def _snapshot(run: dict[str, Any], opt: dict[str, Any], iteration: int, image_fn) -> None:
    if not opt.get("snapshot_dir") or not opt.get("snapshot_every"):
        return
    if iteration % opt["snapshot_every"]:
        return
    os.makedirs(opt["snapshot_dir"], exist_ok=True)
    path = os.path.join(opt["snapshot_dir"], f"{run['stage']}_{iteration:04d}.ppm")
    write_ppm(path, to_uint8(image_fn()))
    run["snapshots"].append(path)


def _plateaued(trace: list, window: int, tolerance: float) -> bool:
    if len(trace) <= window:
        return False
    before = trace[-1 - window]
    if before <= 0:
        return True
    return (before - trace[-1]) / before < tolerance


def _check_finite(stage: str, iteration: int, loss: float, grad: np.ndarray) -> None:
    if not math.isfinite(loss):
        raise DivergenceError(stage, iteration, f"loss is {loss}")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError(stage, iteration, "gradient has non-finite entries")


def reconstruct(net: FeatureNetwork, init: np.ndarray, targets: Sequence[Tuple[int, np.ndarray, float]],
                opt: dict[str, Any]) -> Tuple[np.ndarray, dict[str, Any]]:
    """
    Reconstruct an image whose activations match the targets

    Adam on the pixels, which are clamped to [0, 1] after every step. Stops
    after opt["iterations"] steps or when the loss improved by less than
    opt["stop_tolerance"] (relative) over the last opt["stop_window"] steps.
    A zero initial loss returns the estimate untouched.

    Args:
        net: The network
        init: Initial estimate (h, w'', c)
        targets: (tap, target map, weight) triples
        opt: Settings from create_optim_config

    Returns:
        Tuple of (best image seen, OptimRun)

    Raises:
        DivergenceError: On a non-finite loss or gradient
    """
    run = create_optim_run("reconstruct")
    started = time.perf_counter()
    image = init.astype(np.float32, copy=True)
    loss, grad = loss_and_input_gradient(net, image, targets)
    _check_finite("reconstruct", 0, loss, grad)
    run["loss_trace"].append(loss)
    best, best_loss, best_iteration = image.copy(), loss, 0
    _snapshot(run, opt, 0, lambda: image)

    stop_reason = "max_iterations"
    if loss == 0.0:
        stop_reason = "zero_loss"
    else:
        state = create_adam_state(image)
        for iteration in range(1, opt["iterations"] + 1):
            image = np.clip(adam_step(image, grad, state, opt["learning_rate"]), 0.0, 1.0)
            loss, grad = loss_and_input_gradient(net, image, targets)
            _check_finite("reconstruct", iteration, loss, grad)
            run["loss_trace"].append(loss)
            if loss < best_loss:
                best, best_loss, best_iteration = image.copy(), loss, iteration
            _snapshot(run, opt, iteration, lambda: image)
            if _plateaued(run["loss_trace"], opt["stop_window"], opt["stop_tolerance"]):
                stop_reason = "plateau"
                break

    run["iterations"] = len(run["loss_trace"]) - 1
    run["best_loss"] = best_loss
    run["best_iteration"] = best_iteration
    run["stop_reason"] = stop_reason
    run["wall_clock"] = time.perf_counter() - started
    logger.info("reconstruct: %d iterations, loss %.6g -> %.6g (%s)", run["iterations"],
                run["loss_trace"][0], best_loss, stop_reason)
    return best, run


def _clamp_grid(grid: np.ndarray, identity: np.ndarray, clamp: float) -> np.ndarray:
    return identity + np.clip(grid - identity, -clamp, clamp).astype(grid.dtype, copy=False)


def refine(net: FeatureNetwork, image: np.ndarray, targets: Sequence[Tuple[int, np.ndarray, float]],
           opt: dict[str, Any]) -> Tuple[np.ndarray, np.ndarray, dict[str, Any]]:
    """
    Grid-sampler refinement

    The pixels of `image` stay fixed; only a sampling grid, starting at the
    identity and kept within opt["grid_clamp"] pixels of it, is optimised.
    The best grid seen is returned, so the loss never rises above the
    identity grid's.

    Args:
        net: The network
        image: Reconstructed image (h, w'', c)
        targets: (tap, target map, weight) triples
        opt: Settings from create_optim_config

    Returns:
        Tuple of (sampled output, best grid, OptimRun)
    """
    run = create_optim_run("refine")
    started = time.perf_counter()
    h, w, _ = image.shape
    identity = identity_grid(h, w, dtype=image.dtype)
    grid = identity.copy()

    def evaluate(current: np.ndarray) -> Tuple[float, np.ndarray]:
        sampled = bilinear_sample(image, current)
        value, image_grad = loss_and_input_gradient(net, sampled, targets)
        return value, bilinear_sample_backward_grid(image, current, image_grad)

    loss, grad = evaluate(grid)
    _check_finite("refine", 0, loss, grad)
    run["loss_trace"].append(loss)
    best_grid, best_loss, best_iteration = grid.copy(), loss, 0
    _snapshot(run, opt, 0, lambda: bilinear_sample(image, grid))

    stop_reason = "max_iterations"
    if loss == 0.0:
        stop_reason = "zero_loss"
    else:
        state = create_adam_state(grid)
        for iteration in range(1, opt["iterations"] + 1):
            grid = _clamp_grid(adam_step(grid, grad, state, opt["learning_rate"]), identity, opt["grid_clamp"])
            loss, grad = evaluate(grid)
            _check_finite("refine", iteration, loss, grad)
            run["loss_trace"].append(loss)
            if loss < best_loss:
                best_grid, best_loss, best_iteration = grid.copy(), loss, iteration
            _snapshot(run, opt, iteration, lambda: bilinear_sample(image, grid))
            if _plateaued(run["loss_trace"], opt["stop_window"], opt["stop_tolerance"]):
                stop_reason = "plateau"
                break

    run["iterations"] = len(run["loss_trace"]) - 1
    run["best_loss"] = best_loss
    run["best_iteration"] = best_iteration
    run["stop_reason"] = stop_reason
    run["max_displacement"] = float(np.abs(best_grid - identity).max())
    run["wall_clock"] = time.perf_counter() - started
    logger.info("refine: %d iterations, loss %.6g -> %.6g, max shift %.3f px", run["iterations"],
                run["loss_trace"][0], best_loss, run["max_displacement"])
    return bilinear_sample(image, best_grid), best_grid, run


def write_loss_trace(run: dict[str, Any], path: str) -> None:
    """Write an OptimRun's loss trace as CSV (iteration,loss)"""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "loss"])
        for iteration, loss in enumerate(run["loss_trace"]):
            writer.writerow([iteration, repr(float(loss))])
