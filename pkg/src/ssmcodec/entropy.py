"""Entropy models: quantizer, Gaussian conditionals, factorized prior, RD loss.

Rates are expressed in bits. The coder-facing helpers turn continuous bin
masses into 16-bit cumulative tables over the clamped symbol alphabet
[-255, 255], folding tail mass into the edge bins and guaranteeing every
symbol a nonzero quantized frequency.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit, ndtr

from .nn import softplus
from .rangecoder import TOTAL, CdfTable

SIGMA_MIN = 0.11
SYMBOL_MIN = -255
SYMBOL_MAX = 255
SCALE_LEVELS = 64
SCALE_MAX = 256.0
LAMBDAS = (0.0035, 0.0067, 0.013, 0.025, 0.05)

_FACTORIZED_DIMS = (1, 3, 3, 3, 1)  # four stacked monotone layers of width 3


def round_half_away_from_zero(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer with ties going away from zero."""
    x = np.asarray(x)
    return np.trunc(x + np.copysign(np.asarray(0.5, dtype=x.dtype), x))


def quantize(v: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Mean-offset scalar quantizer: round_half_away_from_zero(v - mu) + mu.

    Idempotent: quantizing the output again returns it unchanged, and the
    residual v_hat - mu is exactly integer valued.
    """
    v = np.asarray(v)
    mu = np.asarray(mu)
    return round_half_away_from_zero(v - mu) + mu


def gaussian_bin_mass(value, mu, sigma) -> np.ndarray:
    """Mass of the unit bin centered at `value` under N(mu, sigma^2).

    Phi((value - mu + 1/2) / sigma) - Phi((value - mu - 1/2) / sigma); the
    codec evaluates it on the integer lattice of (y_hat - mu).
    """
    value = np.asarray(value, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    centered = value - mu
    return ndtr((centered + 0.5) / sigma) - ndtr((centered - 0.5) / sigma)


@dataclass(frozen=True)
class FactorizedModel:
    """Per-channel monotone CDF built from four softplus/tanh-gated layers.

    For each channel, matrices h[k] of shape (d_out, d_in) pass through
    softplus, biases b[k] shift, and gates a[k] add tanh(a) * tanh(x) between
    layers; a final sigmoid maps to (0, 1). The construction is strictly
    increasing in the input, so bin masses are nonnegative.

    h: tuple of arrays (C, d_out, d_in), b: (C, d_out), a: (C, d_out) for the
    three gated layers.
    """

    h: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]
    a: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.h) != 4 or len(self.b) != 4 or len(self.a) != 3:
            raise ValueError("factorized model needs 4 layers and 3 gates")
        c = self.h[0].shape[0]
        for k, (do, di) in enumerate(zip(_FACTORIZED_DIMS[1:], _FACTORIZED_DIMS[:-1])):
            if self.h[k].shape != (c, do, di):
                raise ValueError(f"layer {k} matrix shape {self.h[k].shape} != {(c, do, di)}")
            if self.b[k].shape != (c, do):
                raise ValueError(f"layer {k} bias shape {self.b[k].shape} != {(c, do)}")
        for k in range(3):
            if self.a[k].shape != (c, _FACTORIZED_DIMS[k + 1]):
                raise ValueError(f"gate {k} shape {self.a[k].shape}")

    @property
    def channels(self) -> int:
        return self.h[0].shape[0]

    def cdf(self, v: np.ndarray, channel: int | None = None) -> np.ndarray:
        """Evaluate the CDF at points v: (C, P) for all channels, or (P,) for one."""
        v = np.asarray(v, dtype=np.float64)
        if channel is None:
            if v.ndim != 2 or v.shape[0] != self.channels:
                raise ValueError(f"cdf input must be (C, P) with C={self.channels}, got {v.shape}")
            sel = slice(None)
            x = v[:, None, :]
        else:
            if not 0 <= channel < self.channels:
                raise ValueError(f"channel {channel} outside [0, {self.channels})")
            sel = slice(channel, channel + 1)
            x = v.reshape(1, 1, -1)
        for k in range(4):
            x = softplus(self.h[k][sel]) @ x + self.b[k][sel][:, :, None]
            if k < 3:
                x = x + np.tanh(self.a[k][sel])[:, :, None] * np.tanh(x)
        out = expit(x[:, 0, :])
        return out if channel is None else out[0]


def factorized_bin_mass(k: np.ndarray, channel: int, model: FactorizedModel) -> np.ndarray:
    """Mass of unit bins centered at integers k for one channel."""
    k = np.asarray(k, dtype=np.float64).ravel()
    return model.cdf(k + 0.5, channel) - model.cdf(k - 0.5, channel)


def estimate_rate(symbols: np.ndarray, masses: np.ndarray) -> float:
    """Ideal code length in bits: sum of -log2(mass) over coded symbols."""
    masses = np.asarray(masses, dtype=np.float64)
    if np.asarray(symbols).size != masses.size:
        raise ValueError(f"{np.asarray(symbols).size} symbols but {masses.size} masses")
    if masses.size == 0:
        return 0.0
    if np.any(masses <= 0):
        raise ValueError("every coded symbol needs positive mass")
    return float(-np.log2(masses).sum())


def rd_loss(x: np.ndarray, x_hat: np.ndarray, bits: float, lam: float) -> float:
    """Rate-distortion objective: lam * 255^2 * MSE + bits per pixel.

    x, x_hat are images in [0, 1] of shape (H, W, C); bits is the total coded
    size of the image's latents.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {x_hat.shape}")
    mse = float(np.mean((x - x_hat) ** 2))
    pixels = x.shape[0] * x.shape[1]
    return lam * 255.0**2 * mse + bits / pixels


# ---------------------------------------------------------------------------
# Coder-facing quantized tables


def pmf_to_cdf_table(pmf: np.ndarray, offset: int) -> CdfTable:
    """Quantize a pmf to 16-bit counts (largest-remainder rounding, floor 1)."""
    pmf = np.asarray(pmf, dtype=np.float64)
    if pmf.ndim != 1 or pmf.size < 1:
        raise ValueError("pmf must be a nonempty vector")
    if np.any(pmf < 0):
        raise ValueError("pmf entries must be nonnegative")
    if pmf.size > TOTAL:
        raise ValueError(f"alphabet of {pmf.size} symbols cannot get nonzero 16-bit counts")
    target = pmf * TOTAL
    freq = np.maximum(np.floor(target).astype(np.int64), 1)
    diff = TOTAL - int(freq.sum())
    if diff > 0:
        order = np.argsort(freq - target, kind="stable")  # most-underpaid first
        for i in range(diff):
            freq[order[i % pmf.size]] += 1
    while diff < 0:
        overpaid = np.where(freq > 1, freq - target, -np.inf)
        j = int(np.argmax(overpaid))
        take = min(-diff, int(freq[j]) - 1)
        freq[j] -= take
        diff += take
    cum = np.concatenate([[0], np.cumsum(freq)])
    return CdfTable(cum.tolist(), offset)


def scale_table() -> np.ndarray:
    """Geometric grid of coder sigmas from SIGMA_MIN to SCALE_MAX."""
    return np.exp(np.linspace(np.log(SIGMA_MIN), np.log(SCALE_MAX), SCALE_LEVELS))


def sigma_to_scale_index(sigma: np.ndarray) -> np.ndarray:
    """Smallest table scale >= sigma (clamped to the table ends)."""
    table = scale_table()
    idx = np.searchsorted(table, np.asarray(sigma, dtype=np.float64), side="left")
    return np.minimum(idx, SCALE_LEVELS - 1).astype(np.int32)


@lru_cache(maxsize=1)
def gaussian_cdf_tables() -> tuple[CdfTable, ...]:
    """One quantized table per scale grid point over [-255, 255]."""
    ks = np.arange(SYMBOL_MIN, SYMBOL_MAX + 1, dtype=np.float64)
    tables = []
    for sigma in scale_table():
        pmf = gaussian_bin_mass(ks, 0.0, sigma)
        pmf[0] = ndtr((SYMBOL_MIN + 0.5) / sigma)  # fold lower tail
        pmf[-1] = 1.0 - ndtr((SYMBOL_MAX - 0.5) / sigma)  # fold upper tail
        tables.append(pmf_to_cdf_table(np.maximum(pmf, 0.0), SYMBOL_MIN))
    return tuple(tables)


def factorized_pmf(model: FactorizedModel) -> np.ndarray:
    """(C, nsym) bin masses over the clamped alphabet with tails folded in."""
    ks = np.arange(SYMBOL_MIN, SYMBOL_MAX + 1, dtype=np.float64)
    edges = np.concatenate([ks - 0.5, [SYMBOL_MAX + 0.5]])
    cdf = model.cdf(np.broadcast_to(edges, (model.channels, edges.size)))
    pmf = cdf[:, 1:] - cdf[:, :-1]
    pmf[:, 0] = cdf[:, 1]
    pmf[:, -1] = 1.0 - cdf[:, -2]
    return pmf


def factorized_cdf_tables(model: FactorizedModel) -> tuple[CdfTable, ...]:
    """One quantized coder table per prior channel."""
    return tuple(pmf_to_cdf_table(np.maximum(row, 0.0), SYMBOL_MIN) for row in factorized_pmf(model))
