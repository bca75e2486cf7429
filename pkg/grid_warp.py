"""
Column-cell grid warping

The image is split into column cells of width w_G (the last one may be
narrower). Each cell gets a scaling factor proportional to the importance it
holds; factors above 1 are clamped and the deficit is handed to the remaining
cells until nothing changes. The warp then resamples every cell linearly to
its integer target width.
"""

import logging
from typing import Any, List

import numpy as np

from importance import ImportanceMap

logger = logging.getLogger(__name__)


def cell_widths(width: int, cell_width: int) -> List[int]:
    """Widths of the column cells covering `width` columns"""
    if cell_width < 1:
        raise ValueError(f"Cell width must be positive, got {cell_width}")
    full, rest = divmod(width, cell_width)
    return [cell_width] * full + ([rest] if rest else [])


def apportion_widths(targets: np.ndarray, total: int) -> List[int]:
    """
    Integer widths summing to `total` by largest remainder

    Every target is floored, then the leftover columns go to the largest
    fractional parts; ties go to the lower cell index.
    """
    floors = np.floor(targets).astype(np.int64)
    leftover = total - int(floors.sum())
    if leftover < 0 or leftover > len(targets):
        raise ValueError(f"Cannot apportion {total} columns over targets summing to {float(targets.sum()):.3f}")
    remainders = targets - floors
    order = sorted(range(len(targets)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        floors[i] += 1
    return [int(v) for v in floors]


def _redistribute(mu: np.ndarray, widths: np.ndarray, new_width: int) -> np.ndarray:
    # Fixed point of: clamp sigma at 1, share the rest of the width among the
    # unclamped cells in proportion to their importance.
    clamped = np.zeros(len(mu), dtype=bool)
    while True:
        if clamped.all():
            return widths.copy()
        remaining = new_width - widths[clamped].sum()
        free_mu = mu[~clamped]
        if free_mu.sum() > 0:
            share = np.where(clamped, 0.0, mu / free_mu.sum())
        else:
            share = np.where(clamped, 0.0, widths / widths[~clamped].sum())
        targets = np.where(clamped, widths, remaining * share)
        over = (~clamped) & (targets > widths)
        if not over.any():
            return targets
        clamped |= over


def column_sigmas(effective: ImportanceMap, cell_width: int, new_width: int) -> dict[str, Any]:
    """
    Per-cell scaling factors for shrinking to `new_width`

    sigma_i = t_i / c_i where t_i = w' * mu_i / sum(mu) is cell i's share of
    the target width and c_i its true width. Cells that would stretch are
    clamped to 1 and the rest re-normalised. All-zero importance falls back
    to the uniform factor w' / w.

    Args:
        effective: Importance at image resolution
        cell_width: Column cell width w_G
        new_width: Target width w'

    Returns:
        WarpPlan record
    """
    values = effective.values if isinstance(effective, ImportanceMap) else np.asarray(effective)
    width = values.shape[1]
    if new_width > width:
        raise ValueError(f"Target width {new_width} exceeds source width {width}; only shrinking is supported")
    if new_width <= 0:
        raise ValueError(f"Target width must be positive, got {new_width}")
    widths = np.array(cell_widths(width, cell_width), dtype=np.float64)
    bounds = np.concatenate(([0], np.cumsum(widths).astype(np.int64)))
    column_mu = values.astype(np.float64).sum(axis=0)
    mu = np.array([column_mu[bounds[i]:bounds[i + 1]].sum() for i in range(len(widths))])

    if mu.sum() <= 0:
        logger.warning("Effective importance is all zero; using uniform scaling %d/%d", new_width, width)
        targets = widths * (new_width / width)
    else:
        targets = _redistribute(mu, widths, new_width)
    sigmas = np.clip(targets / widths, 0.0, 1.0)
    return {
        "event_type": "warp_plan",
        "cell_width": cell_width,
        "source_width": width,
        "target_width": new_width,
        "cell_widths": [int(c) for c in widths],
        "mu": [float(m) for m in mu],
        "sigma": [float(s) for s in sigmas],
        "target_cell_widths": apportion_widths(sigmas * widths, new_width),
    }


def linear_resize_width(image: np.ndarray, new_width: int) -> np.ndarray:
    """
    Resample an (h, w, c) image horizontally by 1-D linear interpolation

    Output column j samples source position (j + 0.5) * w / w' - 0.5 clamped
    to [0, w - 1], so equal widths reproduce the input exactly.
    """
    width = image.shape[1]
    if new_width < 1:
        raise ValueError(f"Target width must be positive, got {new_width}")
    if new_width == width:
        return image.copy()
    positions = np.clip((np.arange(new_width) + 0.5) * (width / new_width) - 0.5, 0.0, width - 1)
    left = np.floor(positions).astype(np.intp)
    right = np.minimum(left + 1, width - 1)
    frac = (positions - left).astype(image.dtype)[None, :, None]
    return (image[:, left] * (1 - frac) + image[:, right] * frac).astype(image.dtype, copy=False)


def warp_image(image: np.ndarray, warp_plan: dict[str, Any]) -> np.ndarray:
    """
    Apply a WarpPlan: each cell is linearly resampled to its target width

    Args:
        image: Image (h, w, c) with w equal to the plan's source width
        warp_plan: Record from column_sigmas

    Returns:
        The warped image with exactly the plan's target width
    """
    if image.shape[1] != warp_plan["source_width"]:
        raise ValueError(f"Image width {image.shape[1]} does not match warp plan width {warp_plan['source_width']}")
    pieces = []
    start = 0
    for source, target in zip(warp_plan["cell_widths"], warp_plan["target_cell_widths"]):
        if target > 0:
            pieces.append(linear_resize_width(image[:, start:start + source], target))
        start += source
    return np.concatenate(pieces, axis=1)


def warp_plan_to_json(warp_plan: dict[str, Any]) -> dict[str, Any]:
    """WarpPlan as a JSON-ready dict"""
    return dict(warp_plan)
