"""Evaluation metrics and latent diagnostics.

psnr/bd_rate evaluate rate-distortion results; latent_correlation,
kl_to_standard_normal and quantize_deviation probe codec internals through
the normalized latent (y - mu) / sigma.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ndtr


class MetricError(ValueError):
    pass


def psnr(x: np.ndarray, x_hat: np.ndarray, peak: float = 255.0) -> float:
    """10 log10(peak^2 / MSE); inf when the inputs are identical."""
    if x.shape != x_hat.shape:
        raise MetricError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    mse = float(np.mean((x.astype(np.float64) - x_hat.astype(np.float64)) ** 2))
    return psnr_from_mse(mse, peak)


def psnr_from_mse(mse: float, peak: float = 255.0) -> float:
    if mse < 0:
        raise MetricError(f"negative MSE {mse}")
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))


def bd_rate(rate_anchor, psnr_anchor, rate_test, psnr_test) -> float:
    """Average bitrate difference of the test curve vs the anchor, percent.

    Fits natural cubic splines to log10(rate) as a function of PSNR and
    integrates both over the common quality interval. Negative means the test
    curve spends fewer bits at equal quality.
    """
    curves = []
    for rates, quals in ((rate_anchor, psnr_anchor), (rate_test, psnr_test)):
        r = np.asarray(rates, dtype=np.float64)
        q = np.asarray(quals, dtype=np.float64)
        if r.shape != q.shape or r.ndim != 1:
            raise MetricError("each curve needs matching 1-d rate and PSNR arrays")
        if r.size < 4:
            raise MetricError(f"need at least 4 RD points per curve, got {r.size}")
        if np.any(r <= 0):
            raise MetricError("rates must be positive")
        order = np.argsort(q)
        q, r = q[order], r[order]
        if np.any(np.diff(q) <= 0):
            raise MetricError("PSNR values must be distinct within a curve")
        curves.append((q, np.log10(r)))
    lo = max(curves[0][0][0], curves[1][0][0])
    hi = min(curves[0][0][-1], curves[1][0][-1])
    if hi <= lo:
        raise MetricError(f"PSNR ranges do not overlap ([{lo:.3f}, {hi:.3f}])")
    ints = [CubicSpline(q, lr, bc_type="natural").integrate(lo, hi) for q, lr in curves]
    avg_diff = (ints[1] - ints[0]) / (hi - lo)
    return float((10.0 ** avg_diff - 1.0) * 100.0)


def normalize_latent(y: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    if np.any(sigma <= 0):
        raise MetricError("sigma must be positive")
    return (np.asarray(y, dtype=np.float64) - mu) / sigma


def latent_correlation(y_norm: np.ndarray, max_offset: int = 4) -> np.ndarray:
    """Spatial cross-correlation map of a normalized latent (H, W, C).

    Entry [K + i, K + j] is the mean over valid positions of the cosine
    between the channel vector at (x, y) and at (x + i, y + j). The center is
    exactly 1; the map is clipped to [-1, 1] and symmetric under offset
    negation. Zero-norm positions are excluded from the averages.
    """
    v = np.asarray(y_norm, dtype=np.float64)
    if v.ndim != 3:
        raise MetricError(f"expected (H, W, C) latent, got shape {v.shape}")
    h, w, _ = v.shape
    k = int(max_offset)
    if k < 0 or (2 * k + 1 > h) or (2 * k + 1 > w):
        raise MetricError(f"max_offset {k} too large for {h}x{w} latent")
    ns = np.sum(v * v, axis=-1)
    out = np.empty((2 * k + 1, 2 * k + 1), dtype=np.float64)
    for di in range(-k, k + 1):
        for dj in range(-k, k + 1):
            a0, a1 = max(0, -di), min(h, h - di)
            b0, b1 = max(0, -dj), min(w, w - dj)
            p = v[a0:a1, b0:b1]
            q = v[a0 + di : a1 + di, b0 + dj : b1 + dj]
            dot = np.sum(p * q, axis=-1)
            denom = np.sqrt(ns[a0:a1, b0:b1] * ns[a0 + di : a1 + di, b0 + dj : b1 + dj])
            valid = denom > 0
            if not np.any(valid):
                raise MetricError("all latent positions have zero norm")
            out[k + di, k + dj] = np.mean(dot[valid] / denom[valid])
    return np.clip(out, -1.0, 1.0)


def kl_to_standard_normal(samples: np.ndarray, bins: int = 201, support: float = 6.0, eps: float = 1e-12) -> float:
    """KL(empirical || N(0,1)) in nats over a fixed binning of [-support, support].

    Samples beyond the support are counted in the edge bins so no mass is
    dropped; both distributions get add-eps smoothing and renormalization.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise MetricError("no samples")
    if bins < 2:
        raise MetricError(f"need at least 2 bins, got {bins}")
    edges = np.linspace(-support, support, bins + 1)
    clipped = np.clip(x, edges[0], edges[-1])
    hist, _ = np.histogram(clipped, bins=edges)
    p = hist.astype(np.float64) + eps
    p /= p.sum()
    ref = np.diff(ndtr(edges))
    # fold the tails so the reference also sums to 1 over the binning
    ref[0] += ndtr(edges[0])
    ref[-1] += 1.0 - ndtr(edges[-1])
    q = ref + eps
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def quantize_deviation(y: np.ndarray, y_hat: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-position mean absolute deviation over channels, plus its mean.

    The returned map is unscaled; use scale_map_for_export for visualization.
    """
    if y.shape != y_hat.shape:
        raise MetricError(f"shape mismatch {y.shape} vs {y_hat.shape}")
    dev = np.mean(np.abs(np.asarray(y, dtype=np.float64) - y_hat), axis=-1)
    return dev, float(dev.mean())


def scale_map_for_export(m: np.ndarray) -> np.ndarray:
    """Min-max scale a float map to uint8 for PGM export (flat maps go to 0)."""
    m = np.asarray(m, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    if hi <= lo:
        return np.zeros(m.shape, dtype=np.uint8)
    return np.clip(np.rint((m - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)
