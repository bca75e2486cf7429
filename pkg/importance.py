"""
Importance maps for deep seam carving

Base maps are the channel-wise L2 norm of a tap's activations. Finer taps use
a modified map in which every position inside the receptive field of a seam
removed at the next deeper tap is scaled by alpha. Maps of all taps can be
upsampled and summed into an effective importance map at image resolution.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from feature_network import RFGeom, rf_project
from tensor_engine import upsample_bilinear


@dataclass(frozen=True)
class ImportanceMap:
    """Non-negative (h, w) importance values of one tap"""

    values: np.ndarray
    tap: int
    kind: str = "base"  # "base", "modified", "effective" or "energy"

    @property
    def shape(self):
        return self.values.shape


def channel_l2(feature: np.ndarray, tap: int = 0) -> ImportanceMap:
    """
    Base importance: S(i, j) = ||F(i, j, *)||_2

    Args:
        feature: Feature map (h, w, c)
        tap: Tap index the map belongs to

    Returns:
        The base importance map
    """
    values = np.sqrt(np.sum(feature * feature, axis=2))
    return ImportanceMap(values=values.astype(np.float32, copy=False), tap=tap, kind="base")


def attenuation_mask(geom: RFGeom, deep_tap: int, seams: Sequence[np.ndarray]) -> np.ndarray:
    """
    Positions of tap deep_tap - 1 inside the receptive field of any seam

    A seam pixel (r, c) at the deeper tap covers the finer rows projected from
    r and the finer columns projected from c.

    Args:
        geom: Geometry of the uncarved hierarchy
        deep_tap: Tap the seams were removed from (must be >= 1)
        seams: Seams in the deeper tap's original coordinates

    Returns:
        Boolean mask with the finer tap's original shape
    """
    if deep_tap < 1:
        raise ValueError(f"Seams at tap {deep_tap} have no finer tap to attenuate")
    deep_rows, deep_cols = geom.tap_size(deep_tap)
    finer_shape = geom.tap_size(deep_tap - 1)
    row_spans = [rf_project(geom, deep_tap, r, r, axis="rows") for r in range(deep_rows)]
    col_spans = [rf_project(geom, deep_tap, c, c, axis="columns") for c in range(deep_cols)]
    mask = np.zeros(finer_shape, dtype=bool)
    for seam in seams:
        for r, c in enumerate(seam):
            r0, r1 = row_spans[r]
            c0, c1 = col_spans[int(c)]
            mask[r0:r1 + 1, c0:c1 + 1] = True
    return mask


def attenuate_with_mask(base: ImportanceMap, mask: np.ndarray, alpha: float) -> ImportanceMap:
    """Scale masked positions by alpha exactly once"""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if mask.shape != base.shape:
        raise ValueError(f"Attenuation mask shape {mask.shape} does not match map shape {base.shape}")
    values = np.where(mask, np.float32(alpha) * base.values, base.values)
    return ImportanceMap(values=values.astype(np.float32, copy=False), tap=base.tap, kind="modified")


def attenuate(base: ImportanceMap, seams: Sequence[np.ndarray], geom: RFGeom, alpha: float) -> ImportanceMap:
    """
    Modified importance of a finer tap from the seams of the tap above it

    MS(i, j) = alpha * S(i, j) if (i, j) is in the receptive field of a
    removed seam, else S(i, j). Overlapping fields do not compound.

    Args:
        base: Base map of tap l - 1 in its original coordinates
        seams: Seams removed at tap l, in tap l's original coordinates
        geom: Geometry of the uncarved hierarchy
        alpha: Scaling factor in [0, 1)

    Returns:
        The modified map
    """
    mask = attenuation_mask(geom, base.tap + 1, seams)
    return attenuate_with_mask(base, mask, alpha)


def aggregate_effective(maps: Sequence[ImportanceMap], h: int, w: int) -> ImportanceMap:
    """
    Upsample every map bilinearly to (h, w) and sum

    Args:
        maps: Per-tap importance maps
        h: Output height
        w: Output width

    Returns:
        The effective importance map
    """
    if not maps:
        raise ValueError("aggregate_effective needs at least one map")
    total = np.zeros((h, w), dtype=np.float32)
    for importance in maps:
        total += upsample_bilinear(importance.values.astype(np.float32, copy=False), h, w)
    return ImportanceMap(values=total, tap=-1, kind="effective")


def gradient_magnitude(image: np.ndarray) -> ImportanceMap:
    """Image-space energy |dI/dx| + |dI/dy| summed over channels"""
    values = np.zeros(image.shape[:2], dtype=np.float32)
    for channel in range(image.shape[2]):
        plane = image[:, :, channel].astype(np.float32, copy=False)
        if plane.shape[0] > 1:
            values += np.abs(np.gradient(plane, axis=0))
        if plane.shape[1] > 1:
            values += np.abs(np.gradient(plane, axis=1))
    return ImportanceMap(values=values, tap=-1, kind="energy")


def to_gray8(values: np.ndarray) -> np.ndarray:
    """Min-max normalise a map to 8-bit grey levels (a constant map becomes black)"""
    low = float(values.min())
    span = float(values.max()) - low
    if span <= 0:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.clip(np.rint((values - low) / span * 255.0), 0, 255).astype(np.uint8)
