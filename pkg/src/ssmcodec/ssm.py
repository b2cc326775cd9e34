"""Selective state-space scan: discretization, forward scans, backward pass.

The continuous model per channel d with diagonal state matrix A is
    h'(t) = A h(t) + B x(t),    y(t) = C h(t) + skip * x(t)
with input-dependent step delta, B and C. Zero-order hold over one step gives
    Abar = exp(delta A),    Bbar = (exp(delta A) - 1) / A * B
and the recurrence h_t = Abar_t h_{t-1} + Bbar_t x_t with h_0 = 0.

A is stored as a_log with A = -exp(a_log), so the spectrum stays negative and
every discrete pole satisfies 0 < Abar < 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ShapeError, linear, softplus

SMALL_GATE = 1e-6  # |delta * A| below this uses the series form of Bbar

# Channel blocks in the parallel scan are sized so one (L, block, N) buffer
# stays under ~2^24 elements; results are identical for any block size.
_BLOCK_ELEMS = 1 << 24


@dataclass(frozen=True)
class ScanParams:
    """Per-token scan inputs for one sequence.

    a_log: (D, N), delta: (L, D), b: (L, N), c: (L, N), skip: (D,).
    """

    a_log: np.ndarray
    delta: np.ndarray
    b: np.ndarray
    c: np.ndarray
    skip: np.ndarray

    def check(self, x: np.ndarray) -> tuple[int, int, int]:
        if x.ndim != 2:
            raise ShapeError(f"scan input must be (L, D), got {x.shape}")
        length, d = x.shape
        n = self.a_log.shape[1]
        if self.a_log.shape != (d, n):
            raise ShapeError(f"a_log shape {self.a_log.shape} mismatches D={d}")
        if self.delta.shape != (length, d):
            raise ShapeError(f"delta shape {self.delta.shape} != {(length, d)}")
        if self.b.shape != (length, n) or self.c.shape != (length, n):
            raise ShapeError(f"b/c shapes {self.b.shape}/{self.c.shape} != {(length, n)}")
        if self.skip.shape != (d,):
            raise ShapeError(f"skip shape {self.skip.shape} != ({d},)")
        return length, d, n


@dataclass(frozen=True)
class S6Weights:
    """Input projections and state parameters for one scan direction.

    w_delta: (D, D), b_delta: (D,), w_b: (D, N), w_c: (D, N),
    a_log: (D, N), skip: (D,).
    """

    w_delta: np.ndarray
    b_delta: np.ndarray
    w_b: np.ndarray
    w_c: np.ndarray
    a_log: np.ndarray
    skip: np.ndarray


def discretize(a: np.ndarray, b: np.ndarray, delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of diagonal dynamics; broadcasts.

    Returns (Abar, Bbar) = (exp(delta a), expm1(delta a) / a * b). Where
    |delta a| < 1e-6 the second factor switches to the series
    delta (1 + delta a / 2), which agrees with the closed form to O((delta a)^2)
    and stays defined at a = 0.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    delta = np.asarray(delta)
    gate = delta * a
    a_bar = np.exp(gate)
    small = np.abs(gate) < SMALL_GATE
    a_safe = np.where(small, np.ones_like(a), a)
    series = delta * (1.0 + 0.5 * gate)
    phi = np.where(small, series, np.expm1(gate) / a_safe)
    return a_bar, phi * b


def _discrete_terms(x: np.ndarray, p: ScanParams, d_lo: int, d_hi: int) -> tuple[np.ndarray, np.ndarray]:
    """(Abar, Bbar x) for channels [d_lo, d_hi), each (L, block, N)."""
    a = -np.exp(p.a_log[d_lo:d_hi])
    a_bar, b_bar = discretize(a[None], p.b[:, None, :], p.delta[:, d_lo:d_hi, None])
    b_bar *= x[:, d_lo:d_hi, None]
    return a_bar, b_bar


def selective_scan_seq(x: np.ndarray, p: ScanParams) -> np.ndarray:
    """Reference scan: literal recurrence over t. x, result: (L, D)."""
    length, d, n = p.check(x)
    a_bar, u = _discrete_terms(x, p, 0, d)
    h = np.zeros((d, n), dtype=x.dtype)
    y = np.empty_like(x)
    for t in range(length):
        h = a_bar[t] * h + u[t]
        y[t] = h @ p.c[t]
    y += p.skip * x
    return y


def _blelloch_state(a_bar: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Hidden states for h_t = a_t h_{t-1} + u_t via a work-efficient scan.

    Runs the two-pass up-sweep/down-sweep schedule over the associative
    operator (a1, b1) o (a2, b2) = (a2 a1, a2 b1 + b2) on pairs padded to a
    power of two with the identity (1, 0). The fixed schedule makes the
    floating-point result reproducible for a given length.
    """
    length = a_bar.shape[0]
    levels = max(1, (length - 1).bit_length())
    m = 1 << levels
    if m != length:
        pad = [(0, m - length)] + [(0, 0)] * (a_bar.ndim - 1)
        aw = np.pad(a_bar, pad, constant_values=1)
        bw = np.pad(u, pad)
    else:
        aw = a_bar.copy()
        bw = u.copy()
    for lvl in range(levels):  # up-sweep: reduce pairs left into right
        step = 2 << lvl
        half = 1 << lvl
        al = aw[half - 1 :: step]
        ar = aw[step - 1 :: step]
        bl = bw[half - 1 :: step]
        br = bw[step - 1 :: step]
        br += ar * bl
        ar *= al
    aw[m - 1] = 1
    bw[m - 1] = 0
    for lvl in reversed(range(levels)):  # down-sweep: spread exclusive prefixes
        step = 2 << lvl
        half = 1 << lvl
        al = aw[half - 1 :: step]
        ar = aw[step - 1 :: step]
        bl = bw[half - 1 :: step]
        br = bw[step - 1 :: step]
        ta = al.copy()
        tb = bl.copy()
        al[...] = ar
        bl[...] = br
        br *= ta
        br += tb
        ar *= ta
    # inclusive state: h_t = a_t * (exclusive prefix)_t + u_t
    h = bw[:length]
    h *= a_bar
    h += u
    return h


def selective_scan_par(x: np.ndarray, p: ScanParams) -> np.ndarray:
    """Parallel-scan evaluation of the same recurrence as selective_scan_seq.

    Channels are processed in blocks only to bound peak memory; per-channel
    arithmetic is unchanged by the block split.
    """
    length, d, n = p.check(x)
    block = max(1, min(d, _BLOCK_ELEMS // max(1, length * n)))
    y = np.empty_like(x)
    for lo in range(0, d, block):
        hi = min(d, lo + block)
        a_bar, u = _discrete_terms(x, p, lo, hi)
        h = _blelloch_state(a_bar, u)
        y[:, lo:hi] = np.einsum("ln,lbn->lb", p.c, h)
    y += p.skip * x
    return y


def selective_scan_backward(
    x: np.ndarray, p: ScanParams, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Hand-derived reverse-mode gradients of selective_scan_seq.

    Given the cotangent dy of the output, returns
    (dx, d_delta, d_b, d_c, d_a_log, d_skip). The adjoint state runs the
    reverse-time recurrence dh_t = c_t dy_t + Abar_{t+1} dh_{t+1}.
    """
    length, d, n = p.check(x)
    if dy.shape != x.shape:
        raise ShapeError(f"dy shape {dy.shape} != {x.shape}")
    a = -np.exp(p.a_log)
    gate = p.delta[:, :, None] * a[None]
    a_bar = np.exp(gate)
    small = np.abs(gate) < SMALL_GATE
    a_safe = np.where(small, 1.0, a[None])
    phi = np.where(small, p.delta[:, :, None] * (1.0 + 0.5 * gate), np.expm1(gate) / a_safe)
    u = phi * p.b[:, None, :] * x[:, :, None]

    h = np.empty((length, d, n), dtype=x.dtype)
    acc = np.zeros((d, n), dtype=x.dtype)
    for t in range(length):
        acc = a_bar[t] * acc + u[t]
        h[t] = acc

    dh = np.empty_like(h)
    out_term = p.c[:, None, :] * dy[:, :, None]
    acc = out_term[length - 1]
    dh[length - 1] = acc
    for t in range(length - 2, -1, -1):
        acc = out_term[t] + a_bar[t + 1] * acc
        dh[t] = acc

    h_prev = np.concatenate([np.zeros((1, d, n), dtype=x.dtype), h[:-1]], axis=0)
    d_a_bar = dh * h_prev
    du = dh

    d_c = np.einsum("ld,ldn->ln", dy, h)
    d_skip = np.einsum("ld,ld->d", dy, x)
    d_b = np.einsum("ldn,ldn,ld->ln", du, phi, x)
    dx = np.einsum("ldn,ldn,ln->ld", du, phi, p.b) + p.skip * dy

    # phi partials: d(phi)/d(delta) = exp(gate); d(phi)/d(a) has the same
    # removable singularity as phi and uses the matching series branch.
    dphi_ddelta = np.where(small, 1.0 + gate, a_bar)
    dphi_da = np.where(
        small,
        0.5 * p.delta[:, :, None] ** 2,
        (gate * a_bar - np.expm1(gate)) / (a_safe * a_safe),
    )
    d_phi = du * p.b[:, None, :] * x[:, :, None]
    d_delta = np.einsum("ldn,dn->ld", d_a_bar * a_bar, a) + np.einsum("ldn->ld", d_phi * dphi_ddelta)
    d_a = np.einsum("ldn,ld->dn", d_a_bar * a_bar, p.delta) + np.einsum("ldn->dn", d_phi * dphi_da)
    d_a_log = d_a * a  # a = -exp(a_log)
    return dx, d_delta, d_b, d_c, d_a_log, d_skip


def s6_forward(x: np.ndarray, w: S6Weights, parallel: bool = True) -> np.ndarray:
    """Selective scan with input-dependent delta, B, C projections.

    x: (L, D). delta_t = softplus(x_t W_delta + b_delta); B_t = x_t W_b;
    C_t = x_t W_c. Returns (L, D).
    """
    if x.ndim != 2 or x.shape[1] != w.w_delta.shape[0]:
        raise ShapeError(f"s6_forward: input {x.shape} mismatches W_delta {w.w_delta.shape}")
    delta = softplus(linear(x, w.w_delta, w.b_delta))
    zero_bias = np.zeros(w.w_b.shape[1], dtype=x.dtype)
    p = ScanParams(
        a_log=w.a_log,
        delta=delta,
        b=linear(x, w.w_b, zero_bias),
        c=linear(x, w.w_c, zero_bias),
        skip=w.skip,
    )
    scan = selective_scan_par if parallel else selective_scan_seq
    return scan(x, p)
