"""
Synthetic test images and importance maps
"""

import numpy as np

VALLEY_COLUMNS = (24, 72)


def make_planted_valley_image(height: int = 64, width: int = 96, valley=VALLEY_COLUMNS) -> np.ndarray:
    """
    Bright textured background with one flat dark vertical band

    The background varies smoothly in both directions within [0.55, 1];
    columns valley[0]..valley[1]-1 are a constant 0.05 in every channel.

    Returns:
        float32 (height, width, 3) image in [0, 1]
    """
    rows = np.arange(height, dtype=np.float64)[:, None]
    cols = np.arange(width, dtype=np.float64)[None, :]
    channels = []
    for phase in (0.0, 1.3, 2.6):
        texture = np.sin(cols * 0.9 + phase) * np.cos(rows * 0.7 - phase)
        channels.append(0.775 + 0.225 * texture)
    image = np.stack(channels, axis=2)
    image[:, valley[0]:valley[1]] = 0.05
    return image.astype(np.float32)


def make_planted_valley_pixels(height: int = 64, width: int = 96) -> np.ndarray:
    """The planted-valley image as uint8 pixels"""
    image = make_planted_valley_image(height, width)
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def make_alternating_ramp_map(height: int = 16, width: int = 24) -> np.ndarray:
    """
    Map holding 1..width in every row, ascending in even rows and descending in odd ones

    The values are uniformly distributed, yet every pair of consecutive rows
    on a connected seam sums to at least width, so no seam stays near the
    low percentiles.
    """
    ascending = np.arange(1, width + 1, dtype=np.float32)
    rows = [ascending if i % 2 == 0 else ascending[::-1] for i in range(height)]
    return np.stack(rows)


def map_as_feature(values: np.ndarray, channels: int) -> np.ndarray:
    """Feature tensor whose channel-wise L2 norm equals the non-negative map"""
    feature = np.zeros(values.shape + (channels,), dtype=np.float32)
    feature[:, :, 0] = values
    return feature
