"""
Numeric kernel for deep feature retargeting

Rank-3 tensors (height x width x channels) are plain numpy arrays. This module
provides the forward operations the retargeting pipeline needs (conv2d, relu,
maxpool2, bilinear_sample, upsample_bilinear, l2_loss), their reverse passes
with respect to the network input and to a sampling grid, and an Adam step.

Reductions use a fixed summation order (window offsets row-major, input
channels innermost, bias added last). Work may be split across threads over
independent output channels only, so results are bit-identical for any
DNR_THREADS setting.
"""

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

logger = logging.getLogger(__name__)

_executors: dict[int, ThreadPoolExecutor] = {}
_executors_lock = threading.Lock()

# Below this many output elements per band, splitting is not worth a thread
MIN_BAND_ELEMENTS = 16384


def get_thread_count() -> int:
    """
    Number of worker threads for internal parallelism

    Reads DNR_THREADS; falls back to the CPU count.
    """
    value = os.environ.get("DNR_THREADS")
    if value is None or value.strip() == "":
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        raise ValueError(f"DNR_THREADS must be a positive integer, got {value!r}")
    if threads < 1:
        raise ValueError(f"DNR_THREADS must be a positive integer, got {threads}")
    return threads


def _executor(threads: int) -> ThreadPoolExecutor:
    """Shared pool of the given size, created once even under concurrent jobs"""
    with _executors_lock:
        if threads not in _executors:
            logger.debug("Starting %d tensor worker threads", threads)
            _executors[threads] = ThreadPoolExecutor(max_workers=threads, thread_name_prefix="dnr")
        return _executors[threads]


def _run_bands(work: Callable[[int, int], None], count: int, elements_per_item: int) -> None:
    """Run work(lo, hi) over [0, count), split into contiguous bands across threads."""
    threads = min(get_thread_count(), count, max(1, (count * elements_per_item) // MIN_BAND_ELEMENTS))
    if threads <= 1:
        work(0, count)
        return
    executor = _executor(threads)
    bounds = np.linspace(0, count, threads + 1).astype(int)
    futures = [
        executor.submit(work, int(lo), int(hi))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    for future in futures:
        future.result()


def as_tensor(data, dtype=np.float32) -> np.ndarray:
    """
    Validate external data as a rank-3 tensor

    Args:
        data: Array-like of shape (h, w, c)
        dtype: Element type of the result

    Returns:
        A contiguous array of the requested dtype
    """
    tensor = np.ascontiguousarray(data, dtype=dtype)
    if tensor.ndim != 3:
        raise ValueError(f"Tensor must have rank 3 (h, w, c), got shape {tensor.shape}")
    if min(tensor.shape) < 1:
        raise ValueError(f"Tensor dimensions must be >= 1, got shape {tensor.shape}")
    if not np.all(np.isfinite(tensor)):
        raise ValueError("Tensor contains NaN or Inf values")
    return tensor


@dataclass(frozen=True)
class Kernel:
    """Convolution weights of shape (kh, kw, c_in, c_out) plus c_out biases"""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weights.ndim != 4:
            raise ValueError(f"Kernel weights must have rank 4, got shape {self.weights.shape}")
        kh, kw, _, c_out = self.weights.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"Kernel height and width must be odd, got {kh}x{kw}")
        if self.bias.shape != (c_out,):
            raise ValueError(f"Kernel bias must have shape ({c_out},), got {self.bias.shape}")

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.weights.shape


def _conv_output_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def conv2d(x: np.ndarray, kernel: Kernel, stride: int = 1, pad: int = 0) -> np.ndarray:
    """
    2-D convolution (cross-correlation) with zero padding

    out(i, j, o) = sum over window of x * w, accumulated window offset by
    window offset in row-major order with input channels innermost; the bias
    is added after the window sum.

    Args:
        x: Input tensor (h, w, c_in)
        kernel: Kernel with weights (kh, kw, c_in, c_out)
        stride: Positive stride
        pad: Zero padding on every side

    Returns:
        Output tensor (oh, ow, c_out)
    """
    h, w, c = x.shape
    kh, kw, c_in, c_out = kernel.shape
    if c != c_in:
        raise ValueError(f"conv2d shape mismatch: input {x.shape} vs kernel {kernel.shape}")
    if stride < 1 or pad < 0:
        raise ValueError(f"conv2d needs stride >= 1 and pad >= 0, got stride={stride}, pad={pad}")
    oh = _conv_output_size(h, kh, stride, pad)
    ow = _conv_output_size(w, kw, stride, pad)
    if oh < 1 or ow < 1:
        raise ValueError(f"conv2d output would be empty: input {x.shape} vs kernel {kernel.shape}")

    dtype = np.result_type(x.dtype, kernel.weights.dtype)
    padded = np.pad(x.astype(dtype, copy=False), ((pad, pad), (pad, pad), (0, 0)))
    out = np.empty((oh, ow, c_out), dtype=dtype)
    weights = kernel.weights.astype(dtype, copy=False)
    bias = kernel.bias.astype(dtype, copy=False)

    def band(lo: int, hi: int) -> None:
        acc = np.zeros((oh, ow, hi - lo), dtype=dtype)
        for ky in range(kh):
            for kx in range(kw):
                window = padded[ky:ky + stride * (oh - 1) + 1:stride, kx:kx + stride * (ow - 1) + 1:stride, :]
                for ci in range(c_in):
                    acc += window[:, :, ci:ci + 1] * weights[ky, kx, ci, lo:hi]
        out[:, :, lo:hi] = acc + bias[lo:hi]

    _run_bands(band, c_out, oh * ow)
    return out


def conv2d_backward_input(grad_out: np.ndarray, kernel: Kernel, input_shape: Tuple[int, int, int],
                          stride: int = 1, pad: int = 0) -> np.ndarray:
    """
    Gradient of a conv2d output with respect to its input

    Args:
        grad_out: Upstream gradient (oh, ow, c_out)
        kernel: The kernel used in the forward pass
        input_shape: Shape (h, w, c_in) of the forward input
        stride: Forward stride
        pad: Forward padding

    Returns:
        Gradient with respect to the input, shape input_shape
    """
    h, w, c_in = input_shape
    kh, kw, _, c_out = kernel.shape
    oh, ow, _ = grad_out.shape
    dtype = np.result_type(grad_out.dtype, kernel.weights.dtype)
    weights = kernel.weights.astype(dtype, copy=False)
    grad_padded = np.zeros((h + 2 * pad, w + 2 * pad, c_in), dtype=dtype)

    def band(lo: int, hi: int) -> None:
        for ky in range(kh):
            for kx in range(kw):
                target = grad_padded[ky:ky + stride * (oh - 1) + 1:stride, kx:kx + stride * (ow - 1) + 1:stride, lo:hi]
                for co in range(c_out):
                    target += grad_out[:, :, co:co + 1] * weights[ky, kx, lo:hi, co]

    _run_bands(band, c_in, (h + 2 * pad) * (w + 2 * pad))
    return grad_padded[pad:pad + h, pad:pad + w, :]


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)"""
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Route the gradient through positions where the forward input was positive"""
    return grad_out * (x > 0)


def crop_even(x: np.ndarray) -> np.ndarray:
    """Drop a trailing odd row and column so the result pools evenly"""
    h, w = x.shape[0], x.shape[1]
    return x[:h - h % 2, :w - w % 2]


def _pool_windows(x: np.ndarray) -> np.ndarray:
    # (h, w, c) -> (h/2, w/2, c, 4) with window elements in row-major order
    h, w, c = x.shape
    blocks = x.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 4, 1, 3)
    return blocks.reshape(h // 2, w // 2, c, 4)


def maxpool2(x: np.ndarray) -> np.ndarray:
    """
    2x2 max pooling with stride 2, per channel

    Args:
        x: Input tensor with even height and width

    Returns:
        Pooled tensor at half resolution
    """
    h, w, _ = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2 needs even height and width, got {h}x{w}")
    return _pool_windows(x).max(axis=3)


def maxpool2_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Route each window's gradient to its argmax element

    Ties go to the first element of the window in row-major order. A trailing
    odd row or column of x (dropped by floor-mode pooling) receives zero.
    """
    h, w, c = x.shape
    even = crop_even(x)
    eh, ew = even.shape[0], even.shape[1]
    argmax = _pool_windows(even).argmax(axis=3)
    routed = np.zeros((eh // 2, ew // 2, c, 4), dtype=grad_out.dtype)
    np.put_along_axis(routed, argmax[..., None], grad_out[..., None], axis=3)
    routed = routed.reshape(eh // 2, ew // 2, c, 2, 2).transpose(0, 3, 1, 4, 2).reshape(eh, ew, c)
    grad_in = np.zeros((h, w, c), dtype=grad_out.dtype)
    grad_in[:eh, :ew] = routed
    return grad_in


def identity_grid(h: int, w: int, dtype=np.float32) -> np.ndarray:
    """Sampling grid (h, w, 2) with x(i, j) = j and y(i, j) = i"""
    ys, xs = np.meshgrid(np.arange(h, dtype=dtype), np.arange(w, dtype=dtype), indexing="ij")
    return np.stack([xs, ys], axis=2)


def _bilinear_terms(image: np.ndarray, grid: np.ndarray):
    h, w, _ = image.shape
    x = np.clip(grid[:, :, 0], 0, w - 1)
    y = np.clip(grid[:, :, 1], 0, h - 1)
    x0 = np.minimum(np.floor(x).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0).astype(image.dtype)[:, :, None]
    fy = (y - y0).astype(image.dtype)[:, :, None]
    return image[y0, x0], image[y0, x1], image[y1, x0], image[y1, x1], fx, fy


def bilinear_sample(image: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """
    Sample an image at continuous source coordinates

    Pixel centres sit at integer coordinates; coordinates outside the image
    are clamped to the valid rectangle, so the identity grid reproduces the
    image exactly.

    Args:
        image: Source tensor (h, w, c)
        grid: Source coordinates (h_out, w_out, 2), x first then y

    Returns:
        Sampled tensor (h_out, w_out, c)
    """
    top_left, top_right, bottom_left, bottom_right, fx, fy = _bilinear_terms(image, grid)
    top = (1 - fx) * top_left + fx * top_right
    bottom = (1 - fx) * bottom_left + fx * bottom_right
    return (1 - fy) * top + fy * bottom


def bilinear_sample_backward_grid(image: np.ndarray, grid: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """
    Gradient of a bilinear_sample output with respect to the grid coordinates

    Coordinates clamped at the image border have zero gradient along the
    clamped axis. At integer coordinates the derivative toward the next pixel
    is used.
    """
    h, w, _ = image.shape
    top_left, top_right, bottom_left, bottom_right, fx, fy = _bilinear_terms(image, grid)
    d_dx = (1 - fy) * (top_right - top_left) + fy * (bottom_right - bottom_left)
    d_dy = ((1 - fx) * bottom_left + fx * bottom_right) - ((1 - fx) * top_left + fx * top_right)
    inside_x = (grid[:, :, 0] >= 0) & (grid[:, :, 0] <= w - 1) & (w > 1)
    inside_y = (grid[:, :, 1] >= 0) & (grid[:, :, 1] <= h - 1) & (h > 1)
    grad_x = np.sum(grad_out * d_dx, axis=2) * inside_x
    grad_y = np.sum(grad_out * d_dy, axis=2) * inside_y
    return np.stack([grad_x, grad_y], axis=2).astype(grid.dtype, copy=False)


def l2_loss(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean norm of the elementwise difference"""
    if a.shape != b.shape:
        raise ValueError(f"l2_loss shape mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.sum(diff * diff)))


def l2_loss_gradient(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of l2_loss(a, b) with respect to a; zero where a equals b"""
    norm = l2_loss(a, b)
    if norm == 0.0:
        return np.zeros_like(a)
    return ((a - b) / norm).astype(a.dtype, copy=False)


def _linear_axis(size: int, new_size: int):
    # Corner-aligned: output index k maps to k * (size - 1) / (new_size - 1)
    if new_size == 1 or size == 1:
        pos = np.zeros(new_size)
    else:
        pos = np.arange(new_size) * (size - 1) / (new_size - 1)
    lo = np.minimum(np.floor(pos).astype(np.intp), max(size - 2, 0))
    hi = np.minimum(lo + 1, size - 1)
    return lo, hi, pos - lo


def upsample_bilinear(values: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """
    Bilinear resize of a single-channel map, corner-aligned

    The corner samples of the input and output coincide: output index k
    reads input coordinate k * (n - 1) / (n' - 1). Resizing to the same size
    is the identity.

    Args:
        values: Map of shape (h, w) or (h, w, 1)
        new_h: Output height
        new_w: Output width

    Returns:
        Resized map with the same rank as the input
    """
    squeeze = values.ndim == 2
    grid = values if squeeze else values[:, :, 0]
    if values.ndim == 3 and values.shape[2] != 1:
        raise ValueError(f"upsample_bilinear needs a single-channel map, got shape {values.shape}")
    h, w = grid.shape
    y0, y1, fy = _linear_axis(h, new_h)
    x0, x1, fx = _linear_axis(w, new_w)
    fy = fy.astype(grid.dtype)[:, None]
    fx = fx.astype(grid.dtype)[None, :]
    rows = (1 - fy) * grid[y0, :] + fy * grid[y1, :]
    out = (1 - fx) * rows[:, x0] + fx * rows[:, x1]
    return out if squeeze else out[:, :, None]


@dataclass
class AdamState:
    """First and second moment accumulators plus the step counter"""

    m: np.ndarray
    v: np.ndarray
    t: int = 0


def create_adam_state(param: np.ndarray) -> AdamState:
    """Zero-initialised Adam state for a parameter tensor"""
    return AdamState(m=np.zeros_like(param), v=np.zeros_like(param), t=0)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> np.ndarray:
    """
    One bias-corrected Adam update

    Args:
        param: Current parameter tensor
        grad: Gradient with the same shape
        state: Optimizer state, mutated in place
        lr: Learning rate
        beta1: First moment decay
        beta2: Second moment decay
        eps: Denominator stabiliser

    Returns:
        The updated parameter tensor
    """
    if param.shape != grad.shape or state.m.shape != param.shape:
        raise ValueError(f"adam_step shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError(f"adam_step received a non-finite gradient at step {state.t + 1}")
    state.t += 1
    state.m = beta1 * state.m + (1 - beta1) * grad
    state.v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = state.m / (1 - beta1 ** state.t)
    v_hat = state.v / (1 - beta2 ** state.t)
    return (param - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype, copy=False)

