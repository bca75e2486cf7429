"""
Deep seam carving

Minimal vertical seams by dynamic programming, seam removal across all
channels, the percentile admissibility test that terminates carving, and the
hierarchical plan that carves the deepest tap first and then every finer tap
with the same ratio of removed seams, guided by attenuated importance.
"""

import logging
import math
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from feature_network import FeatureHierarchy
from importance import ImportanceMap, attenuation_mask, attenuate_with_mask, channel_l2

logger = logging.getLogger(__name__)


def create_carve_config(percentile: float = 20.0, alpha: float = 0.5, max_ratio: float = 0.5,
                        hierarchical: bool = True) -> dict[str, Any]:
    """
    Settings for deep seam carving

    Args:
        percentile: Admissibility threshold tau in (0, 100]
        alpha: Attenuation factor in [0, 1)
        max_ratio: Largest fraction of any tap's width that may be removed
        hierarchical: Attenuate finer taps by the deeper seams

    Returns:
        The carve configuration record
    """
    if not 0.0 < percentile <= 100.0:
        raise ValueError(f"percentile must lie in (0, 100], got {percentile}")
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0.0 < max_ratio < 1.0:
        raise ValueError(f"max_ratio must lie in (0, 1), got {max_ratio}")
    return {"percentile": percentile, "alpha": alpha, "max_ratio": max_ratio, "hierarchical": hierarchical}


def _map_values(importance) -> np.ndarray:
    return importance.values if isinstance(importance, ImportanceMap) else np.asarray(importance)


def validate_seam(seam: np.ndarray, height: int, width: int, connected: bool = True) -> None:
    """Check length, bounds and (unless disabled) 8-connectivity of a seam"""
    if seam.shape != (height,):
        raise ValueError(f"Seam length {seam.shape} does not match height {height}")
    if seam.min() < 0 or seam.max() >= width:
        raise ValueError(f"Seam columns must lie in [0, {width - 1}], got [{seam.min()}, {seam.max()}]")
    if connected and height > 1 and np.abs(np.diff(seam)).max() > 1:
        raise ValueError("Seam is not 8-connected")


def min_seam(importance) -> Tuple[np.ndarray, float]:
    """
    Minimal vertical seam by row-wise dynamic programming

    Every DP choice and the final column prefer the smallest column on ties.

    Args:
        importance: ImportanceMap or (h, w) array

    Returns:
        Tuple of (seam column per row, total importance along it)
    """
    values = _map_values(importance).astype(np.float64)
    h, w = values.shape
    if w < 2:
        raise ValueError(f"min_seam needs width >= 2, got {w}")
    cost = values[0].copy()
    back = np.zeros((h, w), dtype=np.intp)
    columns = np.arange(w)
    for i in range(1, h):
        left = np.concatenate(([np.inf], cost[:-1]))
        right = np.concatenate((cost[1:], [np.inf]))
        choices = np.stack([left, cost, right])
        step = np.argmin(choices, axis=0)
        back[i] = columns + step - 1
        cost = values[i] + choices[step, columns]

    seam = np.empty(h, dtype=np.intp)
    seam[-1] = int(np.argmin(cost))
    for i in range(h - 1, 0, -1):
        seam[i - 1] = back[i, seam[i]]
    return seam, float(cost[seam[-1]])


def remove_seam(feature: np.ndarray, seam: np.ndarray) -> np.ndarray:
    """
    Remove one seam from every channel

    Args:
        feature: Array (h, w) or (h, w, c)
        seam: Column per row

    Returns:
        The array one column narrower, rows otherwise in order
    """
    h, w = feature.shape[0], feature.shape[1]
    validate_seam(seam, h, w)
    keep = np.ones((h, w), dtype=bool)
    keep[np.arange(h), seam] = False
    return feature[keep].reshape((h, w - 1) + feature.shape[2:])


def nearest_rank_percentile(values: np.ndarray, percentile: float) -> float:
    """The value at rank ceil(p / 100 * n) of the sorted values"""
    flat = np.sort(values, axis=None)
    rank = max(1, math.ceil(percentile / 100.0 * flat.size))
    return float(flat[rank - 1])


def seam_admissible(importance, seam: np.ndarray, percentile: float) -> bool:
    """
    Whether a seam is cheap enough to remove

    True iff the mean importance along the seam is at most the nearest-rank
    percentile of the whole map.
    """
    values = _map_values(importance)
    along = values[np.arange(values.shape[0]), seam].astype(np.float64)
    return float(along.mean()) <= nearest_rank_percentile(values, percentile)


def seam_counts(ratio: float, widths: Sequence[int]) -> List[int]:
    """Seams to remove per tap for a removal ratio: round half up of ratio * width"""
    return [int(math.floor(ratio * width + 0.5)) for width in widths]


def original_columns(shape: Tuple[int, int]) -> np.ndarray:
    """Per-row index map from current to original columns (identity before carving)"""
    h, w = shape
    return np.tile(np.arange(w, dtype=np.intp), (h, 1))


def to_current_columns(index_map: np.ndarray, seam: np.ndarray) -> np.ndarray:
    """Translate a seam in original coordinates into the current carved coordinates"""
    hits = index_map == seam[:, None]
    if not np.all(hits.any(axis=1)):
        raise ValueError("Seam refers to columns that were already removed")
    return np.argmax(hits, axis=1)


def apply_seams(feature: np.ndarray, seams: Sequence[np.ndarray]) -> np.ndarray:
    """Remove seams recorded in original coordinates, in their recorded order"""
    index_map = original_columns(feature.shape[:2])
    for seam in seams:
        current = to_current_columns(index_map, np.asarray(seam, dtype=np.intp))
        feature = remove_seam(feature, current)
        index_map = remove_seam(index_map, current)
    return feature


def _carve_tap(feature: np.ndarray, tap: int, count: int, alpha: float,
               mask: Optional[np.ndarray]) -> Tuple[np.ndarray, List[np.ndarray]]:
    # Recompute importance and the DP after every removal; the mask and the
    # index map are carved along with the features.
    index_map = original_columns(feature.shape[:2])
    seams = []
    for _ in range(count):
        importance = channel_l2(feature, tap)
        if mask is not None:
            importance = attenuate_with_mask(importance, mask, alpha)
        seam, _ = min_seam(importance)
        seams.append(index_map[np.arange(feature.shape[0]), seam])
        feature = remove_seam(feature, seam)
        index_map = remove_seam(index_map, seam)
        if mask is not None:
            mask = remove_seam(mask, seam)
    return feature, seams


def plan(hierarchy: FeatureHierarchy, cfg: dict[str, Any]) -> dict[str, Any]:
    """
    Plan deep seam carving over every tap

    The deepest tap loses at least one seam and keeps losing seams while the
    next one is admissible and the ratio cap allows. Its removal ratio then
    fixes the seam count of every finer tap; finer taps are carved on their
    importance attenuated by the seams of the tap above.

    Args:
        hierarchy: Feature maps from forward_collect
        cfg: Carve configuration from create_carve_config

    Returns:
        SeamPlan record; "carved_features" holds the target feature maps
    """
    features = hierarchy.features
    geom = hierarchy.geometry
    deepest = len(features) - 1
    widths = [f.shape[1] for f in features]
    history = []

    # Deepest tap: admissibility-terminated carving
    deep = features[deepest]
    if deep.shape[1] < 2:
        raise ValueError(f"Deepest tap is only {deep.shape[1]} column(s) wide; nothing can be carved")
    cap = max(1, int(math.floor(cfg["max_ratio"] * widths[deepest] + 1e-9)))
    index_map = original_columns(deep.shape[:2])
    deep_seams = []
    stop_reason = "inadmissible"
    while True:
        if deep.shape[1] < 2:
            stop_reason = "exhausted"
            break
        importance = channel_l2(deep, deepest)
        seam, cost = min_seam(importance)
        if deep_seams and not seam_admissible(importance, seam, cfg["percentile"]):
            break
        if len(deep_seams) >= cap:
            stop_reason = "ratio_cap"
            logger.warning("Deep seam removal clamped at %d seams by max_ratio %.3f", cap, cfg["max_ratio"])
            history.append({"event_type": "ratio_clamped", "tap": deepest, "count": cap,
                            "max_ratio": cfg["max_ratio"]})
            break
        deep_seams.append(index_map[np.arange(deep.shape[0]), seam])
        history.append({"event_type": "deep_seam_removed", "tap": deepest, "cost": cost,
                        "mean": cost / deep.shape[0]})
        deep = remove_seam(deep, seam)
        index_map = remove_seam(index_map, seam)

    ratio = len(deep_seams) / widths[deepest]
    counts = seam_counts(ratio, widths)
    counts[deepest] = len(deep_seams)
    for tap in range(deepest):
        limit = int(math.floor(cfg["max_ratio"] * widths[tap] + 1e-9))
        if counts[tap] > limit:
            logger.warning("Tap %d seam count %d clamped to %d by max_ratio", tap, counts[tap], limit)
            history.append({"event_type": "ratio_clamped", "tap": tap, "count": limit,
                            "requested": counts[tap], "max_ratio": cfg["max_ratio"]})
            counts[tap] = limit
    history.append({"event_type": "deep_carving_stopped", "reason": stop_reason,
                    "count": len(deep_seams), "ratio": ratio})

    # Finer taps, deepest-first
    carved = [None] * len(features)
    seams = [None] * len(features)
    carved[deepest] = deep
    seams[deepest] = deep_seams
    carver_maps = [None] * len(features)
    carver_maps[deepest] = channel_l2(features[deepest], deepest)
    for tap in range(deepest - 1, -1, -1):
        mask = None
        if cfg["hierarchical"]:
            mask = attenuation_mask(geom, tap + 1, seams[tap + 1])
        base = channel_l2(features[tap], tap)
        carver_maps[tap] = attenuate_with_mask(base, mask, cfg["alpha"]) if mask is not None else base
        carved[tap], seams[tap] = _carve_tap(features[tap], tap, counts[tap], cfg["alpha"], mask)
        history.append({"event_type": "tap_carved", "tap": tap, "count": counts[tap]})
        logger.debug("Tap %d: removed %d of %d columns", tap, counts[tap], widths[tap])

    return {
        "event_type": "seam_plan",
        "ratio": ratio,
        "hierarchical": bool(cfg["hierarchical"]),
        "intermediate_width": widths[0] - counts[0],
        "taps": [
            {"tap": tap, "height": features[tap].shape[0], "width": widths[tap],
             "count": counts[tap], "seams": [s.tolist() for s in seams[tap]]}
            for tap in range(len(features))
        ],
        "history": history,
        "carved_features": carved,
        "carver_maps": carver_maps,
    }


def replay_plan(hierarchy: FeatureHierarchy, seam_plan: dict[str, Any]) -> dict[str, Any]:
    """
    Re-apply a recorded SeamPlan to a freshly collected hierarchy

    Produces the same carved features as the run that recorded the plan.
    """
    features = hierarchy.features
    if len(seam_plan["taps"]) != len(features):
        raise ValueError(f"Plan has {len(seam_plan['taps'])} taps, hierarchy has {len(features)}")
    carved = []
    for entry, feature in zip(seam_plan["taps"], features):
        if (entry["height"], entry["width"]) != feature.shape[:2]:
            raise ValueError(
                f"Plan tap {entry['tap']} is {entry['height']}x{entry['width']}, "
                f"hierarchy tap is {feature.shape[0]}x{feature.shape[1]}"
            )
        carved.append(apply_seams(feature, [np.asarray(s, dtype=np.intp) for s in entry["seams"]]))
    replayed = dict(seam_plan)
    replayed["carved_features"] = carved
    replayed["carver_maps"] = None
    replayed["history"] = list(seam_plan.get("history", [])) + [{"event_type": "plan_replayed"}]
    return replayed


def plan_to_json(seam_plan: dict[str, Any]) -> dict[str, Any]:
    """The JSON-ready part of a SeamPlan (carved tensors and maps are dropped)"""
    return {key: value for key, value in seam_plan.items() if key not in ("carved_features", "carver_maps")}


def plan_from_json(document: dict[str, Any]) -> dict[str, Any]:
    """
    Validate a SeamPlan document read back from JSON

    Checks the fields replay_plan relies on and that every seam is valid for
    its tap's original size. Seams in original coordinates need not stay
    8-connected once earlier seams are gone. The returned plan has no carved
    features yet.
    """
    for key in ("ratio", "taps", "intermediate_width"):
        if key not in document:
            raise ValueError(f"Seam plan is missing '{key}'")
    for entry in document["taps"]:
        height, width = entry["height"], entry["width"]
        if len(entry["seams"]) != entry["count"]:
            raise ValueError(f"Tap {entry['tap']} lists {len(entry['seams'])} seams but count {entry['count']}")
        for seam in entry["seams"]:
            validate_seam(np.asarray(seam, dtype=np.intp), height, width, connected=False)
    return {
        "event_type": "seam_plan",
        "ratio": float(document["ratio"]),
        "hierarchical": bool(document.get("hierarchical", True)),
        "intermediate_width": int(document["intermediate_width"]),
        "taps": [dict(entry) for entry in document["taps"]],
        "history": list(document.get("history", [])),
        "carved_features": None,
        "carver_maps": None,
    }
