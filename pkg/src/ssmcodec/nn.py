"""Dense tensor primitives used by the codec transforms.

All operators act on numpy arrays with channels-last layout (H, W, C) and are
pure functions: identical inputs produce bit-identical outputs. The codec path
runs in float32; every op also accepts float64 inputs for oracle and gradient
work and preserves the input dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

LAYER_NORM_EPS = 1e-5


class ShapeError(ValueError):
    """Raised when an operand's shape disagrees with the declared geometry."""


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one convolution stage.

    direction "down" is a strided convolution; "up" is the strided transposed
    convolution. out_pad extends the output of an up stage by a few rows and
    columns (0..stride-1) so that stride-2 stages map extent n to exactly 2n.
    """

    kernel: int
    stride: int
    padding: int
    in_channels: int
    out_channels: int
    direction: str = "down"
    out_pad: int = 0

    def __post_init__(self) -> None:
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError(f"bad conv geometry {self}")
        if self.direction not in ("down", "up"):
            raise ValueError(f"conv direction must be down or up, got {self.direction!r}")
        if not 0 <= self.out_pad < self.stride:
            raise ValueError(f"out_pad must lie in [0, stride), got {self.out_pad}")

    def out_extent(self, n: int) -> int:
        """Output spatial extent along one axis for input extent n."""
        if self.direction == "down":
            m = (n + 2 * self.padding - self.kernel) // self.stride + 1
        else:
            m = (n - 1) * self.stride - 2 * self.padding + self.kernel + self.out_pad
        if m < 1:
            raise ShapeError(f"extent {n} too small for {self}")
        return m


def _check_channels(name: str, x: np.ndarray, want: int) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{name}: expected rank-3 (H, W, C) input, got shape {x.shape}")
    if x.shape[2] != want:
        raise ShapeError(f"{name}: input has {x.shape[2]} channels on axis 2, spec wants {want}")


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Strided 2D convolution (cross-correlation), zero padding.

    x: (H, W, Cin), w: (k, k, Cin, Cout), b: (Cout,). Returns (H', W', Cout)
    with H' = (H + 2p - k) // s + 1.
    """
    _check_channels("conv2d", x, spec.in_channels)
    if spec.direction != "down":
        raise ShapeError("conv2d: spec direction must be down")
    k, s, p = spec.kernel, spec.stride, spec.padding
    if w.shape != (k, k, spec.in_channels, spec.out_channels):
        raise ShapeError(f"conv2d: weight shape {w.shape} != {(k, k, spec.in_channels, spec.out_channels)}")
    h_out = spec.out_extent(x.shape[0])
    w_out = spec.out_extent(x.shape[1])
    xp = np.pad(x, ((p, p), (p, p), (0, 0))) if p else x
    win = sliding_window_view(xp, (k, k), axis=(0, 1))[::s, ::s]
    # win axes: (H', W', Cin, kh, kw) -> flatten as (kh, kw, Cin) to match w
    cols = win.transpose(0, 1, 3, 4, 2).reshape(h_out * w_out, k * k * spec.in_channels)
    out = cols @ w.reshape(k * k * spec.in_channels, spec.out_channels)
    out += b
    return out.reshape(h_out, w_out, spec.out_channels)


def conv_transpose2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Strided transposed convolution, the adjoint map of conv2d.

    x: (H, W, Cin), w: (k, k, Cin, Cout), b: (Cout,). Realized by zero
    stuffing the input at the stride and convolving with the spatially
    flipped kernel at stride 1 and padding k - 1 - p.
    """
    _check_channels("conv_transpose2d", x, spec.in_channels)
    if spec.direction != "up":
        raise ShapeError("conv_transpose2d: spec direction must be up")
    k, s, p = spec.kernel, spec.stride, spec.padding
    if k - 1 - p < 0:
        raise ValueError(f"conv_transpose2d requires padding <= kernel - 1, got {spec}")
    if w.shape != (k, k, spec.in_channels, spec.out_channels):
        raise ShapeError(f"conv_transpose2d: weight shape {w.shape} != {(k, k, spec.in_channels, spec.out_channels)}")
    h, wd = x.shape[:2]
    stuffed = np.zeros(((h - 1) * s + 1 + spec.out_pad, (wd - 1) * s + 1 + spec.out_pad, spec.in_channels), dtype=x.dtype)
    stuffed[:: s, :: s][:h, :wd] = x
    inner = ConvSpec(k, 1, k - 1 - p, spec.in_channels, spec.out_channels)
    return conv2d(stuffed, w[::-1, ::-1], b, inner)


def depthwise_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-channel k x k convolution, stride 1, zero padding k // 2.

    x: (H, W, C), w: (k, k, C), b: (C,).
    """
    if x.ndim != 3:
        raise ShapeError(f"depthwise_conv2d: expected (H, W, C), got {x.shape}")
    k = w.shape[0]
    if w.shape != (k, k, x.shape[2]):
        raise ShapeError(f"depthwise_conv2d: weight shape {w.shape} mismatches input channels {x.shape[2]}")
    p = k // 2
    h, wd, c = x.shape
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    out = np.zeros_like(x)
    for a in range(k):
        for bb in range(k):
            out += xp[a : a + h, bb : bb + wd] * w[a, bb]
    out += b
    return out


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map over the trailing axis: x[..., i] w[i, j] + b[j]."""
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear: trailing axis {x.shape[-1]} != weight rows {w.shape[0]}")
    return x @ w + b


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    """Normalize the trailing axis to zero mean, unit variance; scale and shift."""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError(f"layer_norm: parameter shapes {gamma.shape}/{beta.shape} mismatch channels {x.shape[-1]}")
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    dtype = x.dtype if x.dtype in (np.float32, np.float64) else np.float64
    return centered / np.sqrt(var + np.asarray(eps, dtype=dtype)) * gamma + beta


def silu(x: np.ndarray) -> np.ndarray:
    """x * sigmoid(x), with the numerically stable sigmoid."""
    return x * expit(x)


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) without overflow for large x."""
    return np.logaddexp(np.asarray(0, dtype=np.asarray(x).dtype), x)
