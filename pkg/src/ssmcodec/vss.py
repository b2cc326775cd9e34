"""Visual state-space layer and block.

One layer computes, from input f of shape (H, W, C):

    t        = LN1(f)
    hidden   = LN2(scan2d(SiLU(DWConv(Linear1(t)))))     main branch, width E*C
    gate     = SiLU(Linear2(t))
    f_out    = Linear3(hidden * gate) + f

A block is L >= 1 layers applied in sequence at constant width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ShapeError, depthwise_conv2d, layer_norm, linear, silu
from .scan2d import Scan2dWeights, scan2d


@dataclass(frozen=True)
class VssLayerWeights:
    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    w_in: np.ndarray      # (C, E*C)
    b_in: np.ndarray
    dw_kernel: np.ndarray  # (k, k, E*C)
    dw_bias: np.ndarray
    w_gate: np.ndarray    # (C, E*C)
    b_gate: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray
    w_out: np.ndarray     # (E*C, C)
    b_out: np.ndarray
    scan: Scan2dWeights


@dataclass(frozen=True)
class VssBlockConfig:
    """Depth and width of one block; layer count must be >= 1."""

    layers: int
    channels: int

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError(f"a VSS block needs at least one layer, got {self.layers}")
        if self.channels < 1:
            raise ValueError(f"channel count must be positive, got {self.channels}")


def vss_layer_forward(f: np.ndarray, w: VssLayerWeights, parallel: bool = True) -> np.ndarray:
    """One VSS layer; output shape and dtype equal the input's."""
    if f.ndim != 3 or f.shape[2] != w.w_in.shape[0]:
        raise ShapeError(f"vss layer: input {f.shape} mismatches width {w.w_in.shape[0]}")
    t = layer_norm(f, w.ln1_gamma, w.ln1_beta)
    u = linear(t, w.w_in, w.b_in)
    u = silu(depthwise_conv2d(u, w.dw_kernel, w.dw_bias))
    hidden = layer_norm(scan2d(u, w.scan, parallel=parallel), w.ln2_gamma, w.ln2_beta)
    gate = silu(linear(t, w.w_gate, w.b_gate))
    return linear(hidden * gate, w.w_out, w.b_out) + f


def vss_block_forward(f: np.ndarray, layers: tuple[VssLayerWeights, ...], parallel: bool = True) -> np.ndarray:
    """Apply a stack of VSS layers in order."""
    if not layers:
        raise ValueError("a VSS block needs at least one layer")
    for w in layers:
        f = vss_layer_forward(f, w, parallel=parallel)
    return f
