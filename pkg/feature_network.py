"""
Convolutional feature hierarchy

Defines straight-line conv/relu/pool networks, the seeded "tinyvgg" reference
network, the DNRW weight file format, forward passes that collect feature maps
at tap layers, the reverse pass of the weighted feature loss with respect to
the network input, and receptive-field geometry between taps.
"""

import logging
import struct
import zlib
from dataclasses import dataclass, replace
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from tensor_engine import (
    Kernel,
    conv2d,
    conv2d_backward_input,
    crop_even,
    l2_loss,
    l2_loss_gradient,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
)

logger = logging.getLogger(__name__)

DNRW_MAGIC = b"DNRW"
DNRW_VERSION = 1

DEFAULT_WEIGHT_SEED = 2019


class WeightFormatError(ValueError):
    """A DNRW weight file could not be loaded"""


class BadMagicError(WeightFormatError):
    """Wrong magic bytes or unsupported format version"""


class MissingTensorError(WeightFormatError):
    """A tensor required by the network is absent from the file"""


class DimensionMismatchError(WeightFormatError):
    """A tensor in the file has dimensions the network does not expect"""


class ChecksumError(WeightFormatError):
    """The file is truncated or its CRC32 does not match"""


class NonFiniteWeightError(WeightFormatError):
    """A tensor in the file holds NaN or Inf values"""


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a straight-line network"""

    kind: str  # "conv", "relu" or "pool"
    name: str
    kh: int = 0
    kw: int = 0
    c_in: int = 0
    c_out: int = 0
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layers plus the layer indices whose activations are taps"""

    name: str
    layers: Tuple[LayerSpec, ...]
    taps: Tuple[int, ...]

    def __post_init__(self):
        validate_network_spec(self)

    @property
    def in_channels(self) -> int:
        return next(layer.c_in for layer in self.layers if layer.kind == "conv")

    def tap_channels(self, tap: int) -> int:
        channels = self.in_channels
        for layer in self.layers[:self.taps[tap] + 1]:
            if layer.kind == "conv":
                channels = layer.c_out
        return channels

    def pool_factor(self, tap: Optional[int] = None) -> int:
        """Total pooling factor between the image and a tap (default: the deepest)"""
        last = self.taps[-1 if tap is None else tap]
        return 2 ** sum(1 for layer in self.layers[:last + 1] if layer.kind == "pool")


@dataclass(frozen=True)
class FeatureNetwork:
    """A network spec with its convolution kernels installed (keyed by layer index)"""

    spec: NetworkSpec
    kernels: Tuple[Tuple[int, Kernel], ...]

    def kernel(self, layer_index: int) -> Kernel:
        for index, kernel in self.kernels:
            if index == layer_index:
                return kernel
        raise KeyError(f"No kernel installed for layer {layer_index}")


@dataclass(frozen=True)
class RFGeom:
    """
    Receptive-field geometry of a network evaluated at one input size

    sizes[k] is the (height, width) entering layer k; sizes[-1] leaves the
    last layer. Per tap, stride/radius/offset give the unclipped affine map
    from a tap index j to the image interval
    [offset + stride * j - radius, offset + stride * j + radius].
    """

    spec: NetworkSpec
    sizes: Tuple[Tuple[int, int], ...]
    stride: Tuple[Tuple[int, int], ...]
    radius: Tuple[Tuple[float, float], ...]
    offset: Tuple[Tuple[float, float], ...]

    def tap_size(self, tap: int) -> Tuple[int, int]:
        return self.sizes[self.spec.taps[tap] + 1]


@dataclass
class FeatureHierarchy:
    """Feature maps collected at every tap plus the geometry they came from"""

    features: List[np.ndarray]
    geometry: RFGeom
    image_shape: Tuple[int, int, int]


def validate_network_spec(spec: NetworkSpec) -> None:
    """Check tap ordering and the channel chain of a network spec"""
    if not spec.layers:
        raise ValueError(f"Network '{spec.name}' has no layers")
    if not spec.taps:
        raise ValueError(f"Network '{spec.name}' needs at least one tap")
    if any(b <= a for a, b in zip(spec.taps, spec.taps[1:])):
        raise ValueError(f"Network '{spec.name}' taps must be strictly increasing, got {list(spec.taps)}")
    if spec.taps[0] < 0 or spec.taps[-1] >= len(spec.layers):
        raise ValueError(f"Network '{spec.name}' taps {list(spec.taps)} out of range for {len(spec.layers)} layers")
    channels = None
    for index, layer in enumerate(spec.layers):
        if layer.kind not in ("conv", "relu", "pool"):
            raise ValueError(f"Layer {index} ({layer.name}) has unknown kind '{layer.kind}'")
        if layer.kind != "conv":
            continue
        if channels is not None and layer.c_in != channels:
            raise ValueError(
                f"Layer {index} ({layer.name}) expects {layer.c_in} input channels but receives {channels}"
            )
        if layer.kh % 2 == 0 or layer.kw % 2 == 0:
            raise ValueError(f"Layer {index} ({layer.name}) kernel must be odd, got {layer.kh}x{layer.kw}")
        channels = layer.c_out
    if channels is None:
        raise ValueError(f"Network '{spec.name}' has no conv layers")


def build_tinyvgg() -> NetworkSpec:
    """
    The small reference network

    Three blocks of [conv, relu, conv, relu, pool] with widths 8/16/32 and
    3x3 kernels (stride 1, pad 1). Taps sit at the second relu of each block.
    """
    layers = []
    taps = []
    c_in = 3
    for block, width in enumerate((8, 16, 32), start=1):
        layers.append(LayerSpec("conv", f"block{block}_conv1", 3, 3, c_in, width, 1, 1))
        layers.append(LayerSpec("relu", f"block{block}_relu1"))
        layers.append(LayerSpec("conv", f"block{block}_conv2", 3, 3, width, width, 1, 1))
        layers.append(LayerSpec("relu", f"block{block}_relu2"))
        taps.append(len(layers) - 1)
        layers.append(LayerSpec("pool", f"block{block}_pool"))
        c_in = width
    return NetworkSpec(name="tinyvgg", layers=tuple(layers), taps=tuple(taps))


def with_taps(spec: NetworkSpec, taps: Sequence[int]) -> NetworkSpec:
    """Copy of a spec with different tap layers"""
    return replace(spec, taps=tuple(int(t) for t in taps))


def xorshift32_uniform(seed: int, count: int) -> np.ndarray:
    """
    Deterministic uniform [0, 1) stream from a 32-bit xorshift generator

    state ^= state << 13; state ^= state >> 17; state ^= state << 5 (mod 2^32),
    each output is the top 24 bits of the state divided by 2^24. A zero seed
    is replaced by 0x9E3779B9.
    """
    state = (seed & 0xFFFFFFFF) or 0x9E3779B9
    values = np.empty(count, dtype=np.float64)
    for i in range(count):
        state ^= (state << 13) & 0xFFFFFFFF
        state ^= state >> 17
        state ^= (state << 5) & 0xFFFFFFFF
        values[i] = (state >> 8) / 16777216.0
    return values


def init_weights_xorshift(spec: NetworkSpec, seed: int = DEFAULT_WEIGHT_SEED) -> FeatureNetwork:
    """
    Seeded deterministic weights for a network spec

    Conv weights are drawn layer by layer from one xorshift32 stream,
    uniform in [-a, a] with a = sqrt(6 / (kh * kw * c_in)), in (kh, kw, c_in,
    c_out) row-major order. Biases are zero.
    """
    conv_layers = [(i, layer) for i, layer in enumerate(spec.layers) if layer.kind == "conv"]
    total = sum(layer.kh * layer.kw * layer.c_in * layer.c_out for _, layer in conv_layers)
    stream = xorshift32_uniform(seed, total)
    kernels = []
    position = 0
    for index, layer in conv_layers:
        size = layer.kh * layer.kw * layer.c_in * layer.c_out
        bound = np.sqrt(6.0 / (layer.kh * layer.kw * layer.c_in))
        weights = ((stream[position:position + size] * 2.0 - 1.0) * bound).astype(np.float32)
        position += size
        kernels.append((index, Kernel(weights.reshape(layer.kh, layer.kw, layer.c_in, layer.c_out),
                                      np.zeros(layer.c_out, dtype=np.float32))))
    return FeatureNetwork(spec=spec, kernels=tuple(kernels))


def network_tensors(net: FeatureNetwork) -> dict[str, np.ndarray]:
    """Named weight tensors of a network, in layer order"""
    tensors = {}
    for index, kernel in net.kernels:
        name = net.spec.layers[index].name
        tensors[f"{name}.weight"] = kernel.weights
        tensors[f"{name}.bias"] = kernel.bias
    return tensors


def save_weights(tensors: dict[str, np.ndarray], path: str) -> None:
    """
    Write named float32 tensors as a DNRW file

    Layout: magic "DNRW" | version u32 | tensor count u32 | per tensor:
    name length u16, UTF-8 name, ndim u8, dims u32 each, raw f32 payload |
    CRC32 of all preceding bytes. Everything little-endian.
    """
    body = bytearray(DNRW_MAGIC)
    body += struct.pack("<II", DNRW_VERSION, len(tensors))
    for name, tensor in tensors.items():
        encoded = name.encode("utf-8")
        array = np.ascontiguousarray(tensor, dtype="<f4")
        body += struct.pack("<H", len(encoded)) + encoded
        body += struct.pack("<B", array.ndim)
        body += struct.pack(f"<{array.ndim}I", *array.shape)
        body += array.tobytes()
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(bytes(body))


def read_weight_file(path: str) -> dict[str, np.ndarray]:
    """
    Parse a DNRW file into named tensors

    Raises:
        BadMagicError: wrong magic or version
        ChecksumError: truncated file or CRC mismatch
        NonFiniteWeightError: a tensor holds NaN or Inf
        WeightFormatError: malformed tensor records
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != DNRW_MAGIC:
        raise BadMagicError(f"{path}: not a DNRW file (magic {data[:4]!r})")
    if len(data) < 16:
        raise ChecksumError(f"{path}: file truncated at {len(data)} bytes")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError(f"{path}: CRC32 mismatch (file truncated or corrupted)")
    version, count = struct.unpack("<II", data[4:12])
    if version != DNRW_VERSION:
        raise BadMagicError(f"{path}: unsupported DNRW version {version}, expected {DNRW_VERSION}")

    tensors = {}
    position = 12
    end = len(data) - 4
    try:
        for _ in range(count):
            (name_length,) = struct.unpack_from("<H", data, position)
            position += 2
            name = data[position:position + name_length].decode("utf-8")
            position += name_length
            (ndim,) = struct.unpack_from("<B", data, position)
            position += 1
            dims = struct.unpack_from(f"<{ndim}I", data, position)
            position += 4 * ndim
            size = int(np.prod(dims)) * 4
            if position + size > end:
                raise WeightFormatError(f"{path}: tensor '{name}' payload runs past the end of the file")
            tensors[name] = np.frombuffer(data, dtype="<f4", count=size // 4, offset=position).reshape(dims).astype(np.float32)
            if not np.all(np.isfinite(tensors[name])):
                raise NonFiniteWeightError(f"{path}: tensor '{name}' contains NaN or Inf values")
            position += size
    except (struct.error, UnicodeDecodeError) as exc:
        raise WeightFormatError(f"{path}: malformed tensor record ({exc})")
    if position != end:
        raise WeightFormatError(f"{path}: {end - position} unexpected trailing bytes")
    return tensors


def load_weights(spec: NetworkSpec, path: str) -> FeatureNetwork:
    """
    Load a network's kernels from a DNRW file

    Nothing is installed unless every tensor is present with the right dims.

    Args:
        spec: The network the weights belong to
        path: DNRW file path

    Returns:
        A FeatureNetwork with the file's weights
    """
    tensors = read_weight_file(path)
    kernels = []
    for index, layer in enumerate(spec.layers):
        if layer.kind != "conv":
            continue
        expected = {
            f"{layer.name}.weight": (layer.kh, layer.kw, layer.c_in, layer.c_out),
            f"{layer.name}.bias": (layer.c_out,),
        }
        for name, dims in expected.items():
            if name not in tensors:
                raise MissingTensorError(f"{path}: missing tensor '{name}'")
            if tensors[name].shape != dims:
                raise DimensionMismatchError(
                    f"{path}: tensor '{name}' has dims {tensors[name].shape}, expected {dims}"
                )
        kernels.append((index, Kernel(tensors[f"{layer.name}.weight"], tensors[f"{layer.name}.bias"])))
    logger.info("Loaded %d kernels for %s from %s", len(kernels), spec.name, path)
    return FeatureNetwork(spec=spec, kernels=tuple(kernels))


def apply_layer(net: FeatureNetwork, index: int, x: np.ndarray) -> np.ndarray:
    """Evaluate one layer; pooling runs in floor mode (a trailing odd row/column is dropped)"""
    layer = net.spec.layers[index]
    if layer.kind == "conv":
        return conv2d(x, net.kernel(index), layer.stride, layer.pad)
    if layer.kind == "relu":
        return relu(x)
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError(f"Layer {index} ({layer.name}) cannot pool a {x.shape[0]}x{x.shape[1]} map")
    return maxpool2(crop_even(x))


def run_layers(net: FeatureNetwork, x: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Evaluate layers start..stop-1 on x"""
    for index in range(start, stop):
        x = apply_layer(net, index, x)
    return x


def forward_taps(net: FeatureNetwork, x: np.ndarray, upto_tap: Optional[int] = None,
                 keep_inputs: bool = False) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Forward pass collecting tap activations

    Args:
        net: The network
        x: Input image (h, w, c)
        upto_tap: Last tap to evaluate (default: the deepest)
        keep_inputs: Whether to keep every layer's input for a reverse pass

    Returns:
        Tuple of (tap activations, layer inputs or an empty list)
    """
    spec = net.spec
    last_tap = len(spec.taps) - 1 if upto_tap is None else upto_tap
    if not 0 <= last_tap < len(spec.taps):
        raise ValueError(f"Tap {upto_tap} out of range for {len(spec.taps)} taps")
    if x.shape[2] != spec.in_channels:
        raise ValueError(f"Network '{spec.name}' expects {spec.in_channels} input channels, got shape {x.shape}")
    taps = []
    inputs = []
    for index in range(spec.taps[last_tap] + 1):
        if keep_inputs:
            inputs.append(x)
        x = apply_layer(net, index, x)
        if index in spec.taps:
            taps.append(x)
    return taps, inputs


def forward_collect(net: FeatureNetwork, image: np.ndarray) -> FeatureHierarchy:
    """
    Collect the feature maps of every tap for an image

    Args:
        net: The network
        image: Image (h, w, c) whose height and width are multiples of the
            deepest tap's pooling factor

    Returns:
        The feature hierarchy with its receptive-field geometry
    """
    h, w, _ = image.shape
    factor = net.spec.pool_factor()
    if h % factor or w % factor:
        raise ValueError(f"Image dims {h}x{w} must be multiples of {factor} for network '{net.spec.name}'")
    features, _ = forward_taps(net, image)
    return FeatureHierarchy(features=features, geometry=build_rf_geometry(net.spec, h, w), image_shape=image.shape)


def match_widths(actual: np.ndarray, target: np.ndarray, tap: int) -> Tuple[slice, slice]:
    """
    Column slices that make a tap activation and its target comparable

    Whichever is wider by one column is centre-cropped; a larger gap, or any
    height or channel difference, is an error.
    """
    if actual.shape[0] != target.shape[0] or actual.shape[2] != target.shape[2]:
        raise ValueError(f"Tap {tap} target shape {target.shape} does not match activation shape {actual.shape}")
    gap = actual.shape[1] - target.shape[1]
    if abs(gap) > 1:
        raise ValueError(
            f"Tap {tap} target width {target.shape[1]} differs from activation width {actual.shape[1]} by more than 1"
        )
    width = min(actual.shape[1], target.shape[1])
    a0 = (actual.shape[1] - width) // 2
    t0 = (target.shape[1] - width) // 2
    return slice(a0, a0 + width), slice(t0, t0 + width)


def feature_loss(taps: List[np.ndarray], targets: Sequence[Tuple[int, np.ndarray, float]]) -> float:
    """Weighted sum of per-tap L2 distances to the targets"""
    total = 0.0
    for tap, target, weight in targets:
        if weight == 0:
            continue
        a_cols, t_cols = match_widths(taps[tap], target, tap)
        total += weight * l2_loss(taps[tap][:, a_cols], target[:, t_cols])
    return total


def loss_and_input_gradient(net: FeatureNetwork, x: np.ndarray,
                            targets: Sequence[Tuple[int, np.ndarray, float]]) -> Tuple[float, np.ndarray]:
    """
    Weighted feature loss and its gradient with respect to the input

    loss = sum_i weight_i * ||F_i(x) - target_i||, differentiated by
    reverse-mode accumulation through the conv/relu/pool chain. Only layers up
    to the deepest tap with a non-zero weight are evaluated.

    Args:
        net: The network
        x: Input image (h, w, c)
        targets: (tap index, target tensor, weight) triples

    Returns:
        Tuple of (loss, gradient with the shape of x)
    """
    spec = net.spec
    active = [(tap, target, weight) for tap, target, weight in targets if weight != 0]
    for tap, _, weight in targets:
        if not 0 <= tap < len(spec.taps):
            raise ValueError(f"Tap {tap} out of range for {len(spec.taps)} taps")
        if weight < 0:
            raise ValueError(f"Tap {tap} weight must be non-negative, got {weight}")
    if not active:
        return 0.0, np.zeros_like(x)

    deepest = max(tap for tap, _, _ in active)
    taps, inputs = forward_taps(net, x, upto_tap=deepest, keep_inputs=True)
    loss = feature_loss(taps, active)

    tap_grads = {}
    for tap, target, weight in active:
        a_cols, t_cols = match_widths(taps[tap], target, tap)
        grad = np.zeros_like(taps[tap])
        grad[:, a_cols] = weight * l2_loss_gradient(taps[tap][:, a_cols], target[:, t_cols])
        layer_index = spec.taps[tap]
        tap_grads[layer_index] = tap_grads[layer_index] + grad if layer_index in tap_grads else grad

    grad = None
    for index in range(spec.taps[deepest], -1, -1):
        if index in tap_grads:
            grad = tap_grads[index] if grad is None else grad + tap_grads[index]
        layer = spec.layers[index]
        layer_input = inputs[index]
        if layer.kind == "conv":
            grad = conv2d_backward_input(grad, net.kernel(index), layer_input.shape, layer.stride, layer.pad)
        elif layer.kind == "relu":
            grad = relu_backward(grad, layer_input)
        else:
            grad = maxpool2_backward(grad, layer_input)
    return loss, grad.astype(x.dtype, copy=False)


def input_gradient(net: FeatureNetwork, x: np.ndarray,
                   targets: Sequence[Tuple[int, np.ndarray, float]]) -> np.ndarray:
    """Gradient of the weighted feature loss with respect to the network input"""
    _, grad = loss_and_input_gradient(net, x, targets)
    return grad


def build_rf_geometry(spec: NetworkSpec, h: int, w: int) -> RFGeom:
    """
    Receptive-field geometry of a network for an h x w input

    Uses the usual jump/size/start recurrence per axis: a conv layer grows the
    field by (k - 1) * jump and shifts its start by ((k - 1) / 2 - pad) * jump;
    a 2x2 pool grows it by jump, shifts it by jump / 2 and doubles the jump.
    """
    sizes = [(h, w)]
    for layer in spec.layers:
        rows, cols = sizes[-1]
        if layer.kind == "conv":
            rows = (rows + 2 * layer.pad - layer.kh) // layer.stride + 1
            cols = (cols + 2 * layer.pad - layer.kw) // layer.stride + 1
        elif layer.kind == "pool":
            rows, cols = rows // 2, cols // 2
        sizes.append((rows, cols))

    strides, radii, offsets = [], [], []
    for tap_layer in spec.taps:
        per_axis = []
        for axis in (0, 1):
            jump, size, start = 1, 1.0, 0.0
            for layer in spec.layers[:tap_layer + 1]:
                if layer.kind == "conv":
                    k = layer.kh if axis == 0 else layer.kw
                    size += (k - 1) * jump
                    start += ((k - 1) / 2 - layer.pad) * jump
                    jump *= layer.stride
                elif layer.kind == "pool":
                    size += jump
                    start += jump / 2
                    jump *= 2
            per_axis.append((jump, (size - 1) / 2, start))
        strides.append((per_axis[0][0], per_axis[1][0]))
        radii.append((per_axis[0][1], per_axis[1][1]))
        offsets.append((per_axis[0][2], per_axis[1][2]))
    return RFGeom(spec=spec, sizes=tuple(sizes), stride=tuple(strides), radius=tuple(radii), offset=tuple(offsets))


def _axis_index(axis: str) -> int:
    if axis not in ("rows", "columns"):
        raise ValueError(f"axis must be 'rows' or 'columns', got '{axis}'")
    return 0 if axis == "rows" else 1


def rf_project(geom: RFGeom, tap: int, lo: int, hi: int, axis: str = "columns") -> Tuple[int, int]:
    """
    Project an index range at a tap to the next finer level

    Returns the inclusive range of indices at tap - 1 (or at the image when
    tap is 0) that can influence any index in [lo, hi], walking the layers in
    between backwards and clipping to each layer's valid extent.

    Args:
        geom: Geometry from build_rf_geometry
        tap: Tap index (0 is the finest)
        lo: First index of the range
        hi: Last index of the range (inclusive)
        axis: "columns" or "rows"

    Returns:
        Tuple (lo, hi) at the finer level
    """
    spec = geom.spec
    a = _axis_index(axis)
    if not 0 <= tap < len(spec.taps):
        raise ValueError(f"Tap {tap} out of range for {len(spec.taps)} taps")
    extent = geom.tap_size(tap)[a]
    if not 0 <= lo <= hi < extent:
        raise ValueError(f"Range [{lo}, {hi}] outside tap {tap} {axis} extent {extent}")
    first_layer = spec.taps[tap - 1] + 1 if tap > 0 else 0
    for index in range(spec.taps[tap], first_layer - 1, -1):
        layer = spec.layers[index]
        limit = geom.sizes[index][a] - 1
        if layer.kind == "conv":
            k = layer.kh if a == 0 else layer.kw
            lo = max(0, lo * layer.stride - layer.pad)
            hi = min(limit, hi * layer.stride - layer.pad + k - 1)
        elif layer.kind == "pool":
            lo = min(limit, 2 * lo)
            hi = min(limit, 2 * hi + 1)
    return lo, hi


def rf_project_to_image(geom: RFGeom, tap: int, lo: int, hi: int, axis: str = "columns") -> Tuple[int, int]:
    """Project a tap range all the way down to the image"""
    for level in range(tap, -1, -1):
        lo, hi = rf_project(geom, level, lo, hi, axis)
    return lo, hi


def rf_project_to_tap(geom: RFGeom, tap: int, lo: int, hi: int, finer: int, axis: str = "columns") -> Tuple[int, int]:
    """Project a tap range down to a finer tap"""
    if not 0 <= finer <= tap:
        raise ValueError(f"Finer tap {finer} must lie between 0 and {tap}")
    for level in range(tap, finer, -1):
        lo, hi = rf_project(geom, level, lo, hi, axis)
    return lo, hi


def affine_image_interval(geom: RFGeom, tap: int, index: int, axis: str = "columns") -> Tuple[int, int]:
    """Image interval of a tap index from the closed-form stride/radius/offset, clipped to the image"""
    a = _axis_index(axis)
    centre = geom.offset[tap][a] + geom.stride[tap][a] * index
    lo = int(np.floor(centre - geom.radius[tap][a]))
    hi = int(np.ceil(centre + geom.radius[tap][a]))
    return max(0, lo), min(geom.sizes[0][a] - 1, hi)


def describe_network(net: FeatureNetwork) -> dict[str, Any]:
    """Summary record of a network for reports"""
    spec = net.spec
    return {
        "name": spec.name,
        "taps": [
            {"tap": i, "layer": spec.taps[i], "name": spec.layers[spec.taps[i]].name, "channels": spec.tap_channels(i)}
            for i in range(len(spec.taps))
        ],
        "pool_factor": spec.pool_factor(),
    }
