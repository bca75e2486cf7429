"""
Evaluation: Semantic Score and the comparison baselines
"""

import logging
from typing import Any, Optional

import numpy as np

from deep_carver import apply_seams
from feature_network import FeatureNetwork, forward_taps
from grid_warp import linear_resize_width, warp_image

logger = logging.getLogger(__name__)


def _tap_index(net: FeatureNetwork, tap: int) -> int:
    count = len(net.spec.taps)
    index = tap + count if tap < 0 else tap
    if not 0 <= index < count:
        raise ValueError(f"Tap {tap} out of range for {count} taps")
    return index


def semantic_score(net: FeatureNetwork, original: np.ndarray, retargeted: np.ndarray, tap: int = -1) -> float:
    """
    Semantic Score: ||F_tap(retargeted)|| / ||F_tap(original)||

    Whole-tensor Frobenius norms. Negative taps count from the deepest.

    Raises:
        ValueError: If the original's activations at the tap are all zero
    """
    index = _tap_index(net, tap)
    (*_, original_tap), _ = forward_taps(net, original, upto_tap=index)
    (*_, retargeted_tap), _ = forward_taps(net, retargeted, upto_tap=index)
    denominator = float(np.linalg.norm(original_tap.astype(np.float64)))
    if denominator == 0.0:
        raise ValueError(f"Original image has zero activation norm at tap {index}; semantic score is undefined")
    return float(np.linalg.norm(retargeted_tap.astype(np.float64))) / denominator


def baseline_image_space_carve(image: np.ndarray, seam_plan: dict[str, Any],
                               warp_plan: Optional[dict[str, Any]] = None) -> np.ndarray:
    """
    Remove the finest-tap seams straight from the image, then warp

    Without a warp plan the carved image of width w - k_1 is returned.
    """
    finest = seam_plan["taps"][0]
    if (finest["height"], finest["width"]) != image.shape[:2]:
        raise ValueError(
            f"Finest tap is {finest['height']}x{finest['width']}, image is {image.shape[0]}x{image.shape[1]}"
        )
    carved = apply_seams(image, [np.asarray(s, dtype=np.intp) for s in finest["seams"]])
    if warp_plan is None:
        return carved
    return warp_image(carved, warp_plan)


def baseline_linear_scale(image: np.ndarray, new_width: int) -> np.ndarray:
    """Uniform 1-D linear rescale to the final width"""
    return linear_resize_width(image, new_width)


def create_score_report(image: str, method: str, tap: int, ss: float) -> dict[str, Any]:
    """ScoreReport record"""
    if ss < 0:
        raise ValueError(f"Semantic score must be non-negative, got {ss}")
    return {"image": image, "method": method, "tap": tap, "ss": ss}
