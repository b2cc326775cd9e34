"""Codec transforms: analysis/synthesis pair, hyper pair, and slice heads.

The analysis transform g_a stacks four stride-2 convolutions, each followed by
a VSS block; the synthesis transform g_s is its literal mirror (VSS block,
then stride-2 transposed convolution, per stage). The hyper transforms h_a and
h_s use two stride-2 stages each with fixed-depth VSS blocks. Latents are
split into S channel slices coded in order; each slice head predicts
(mu_i, sigma_i) from the hyper output and previously reconstructed slices,
then a residual refinement from the decoded slice itself.

All architecture knobs live in TransformConfig. parameter_specs enumerates
every weight tensor (name, shape, init rule) in one fixed order; the builders
assemble structured weights from a flat name -> array mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .entropy import SIGMA_MIN, SYMBOL_MAX, SYMBOL_MIN, FactorizedModel, round_half_away_from_zero
from .nn import ConvSpec, ShapeError, conv2d, conv_transpose2d, linear, silu, softplus
from .scan2d import Scan2dWeights
from .ssm import S6Weights
from .vss import VssLayerWeights, vss_block_forward


@dataclass(frozen=True)
class TransformConfig:
    """Channel schedule, depths, and coding layout of one model family.

    channels = (C1..C6): the four analysis widths (C4 is the latent width M)
    and the two hyper widths. vss_layers = (L1..L4) are the block depths tied
    to the four analysis stages and mirrored in synthesis.
    """

    channels: tuple[int, int, int, int, int, int] = (256, 256, 256, 320, 256, 192)
    vss_layers: tuple[int, int, int, int] = (2, 2, 9, 2)
    ga_strides: tuple[int, int, int, int] = (2, 2, 2, 2)
    ha_strides: tuple[int, int] = (2, 2)
    slices: int = 5
    state_dim: int = 16
    expand: int = 2
    conv_kernel: int = 3
    dw_kernel: int = 3
    hyper_vss_layers: int = 2

    def __post_init__(self) -> None:
        if len(self.channels) != 6 or any(c < 1 for c in self.channels):
            raise ValueError(f"need six positive channel counts, got {self.channels}")
        if len(self.vss_layers) != 4 or any(l < 1 for l in self.vss_layers):
            raise ValueError(f"need four positive VSS depths, got {self.vss_layers}")
        if self.slices < 1 or self.latent_channels % self.slices:
            raise ValueError(
                f"latent channels {self.latent_channels} must divide into {self.slices} slices"
            )
        if self.state_dim < 1 or self.expand < 1 or self.hyper_vss_layers < 1:
            raise ValueError("state_dim, expand and hyper_vss_layers must be positive")

    @property
    def latent_channels(self) -> int:
        return self.channels[3]

    @property
    def hyper_channels(self) -> int:
        return self.channels[5]

    @property
    def slice_channels(self) -> int:
        return self.latent_channels // self.slices

    @property
    def cam_hidden(self) -> int:
        return self.latent_channels

    @property
    def ga_stride(self) -> int:
        return math.prod(self.ga_strides)

    @property
    def total_stride(self) -> int:
        return self.ga_stride * math.prod(self.ha_strides)

    @classmethod
    def full(cls) -> "TransformConfig":
        return cls()

    @classmethod
    def small(cls) -> "TransformConfig":
        return cls(channels=(32, 32, 32, 48, 32, 24), vss_layers=(1, 1, 2, 1), slices=4, state_dim=8)

    @classmethod
    def tiny(cls) -> "TransformConfig":
        return cls(channels=(12, 12, 12, 16, 12, 8), vss_layers=(1, 1, 1, 1), slices=4, state_dim=4)

    @classmethod
    def preset(cls, name: str) -> "TransformConfig":
        try:
            return {"full": cls.full, "small": cls.small, "tiny": cls.tiny}[name]()
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose full, small or tiny") from None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "TransformConfig":
        kwargs = {}
        for f in fields(cls):
            v = d[f.name]
            kwargs[f.name] = tuple(v) if isinstance(v, (list, tuple)) else v
        return cls(**kwargs)


# ---------------------------------------------------------------------------
# Structured weights


@dataclass(frozen=True)
class DownStage:
    spec: ConvSpec
    w: np.ndarray
    b: np.ndarray
    vss: tuple[VssLayerWeights, ...]


@dataclass(frozen=True)
class UpStage:
    vss: tuple[VssLayerWeights, ...]
    spec: ConvSpec
    w: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class SliceHead:
    param_w0: np.ndarray
    param_b0: np.ndarray
    param_w1: np.ndarray
    param_b1: np.ndarray
    res_w0: np.ndarray
    res_b0: np.ndarray
    res_w1: np.ndarray
    res_b1: np.ndarray


@dataclass(frozen=True)
class ModelWeights:
    config: TransformConfig
    ga: tuple[DownStage, ...]
    ha: tuple[DownStage, ...]
    hs: tuple[UpStage, ...]
    gs: tuple[UpStage, ...]
    cam: tuple[SliceHead, ...]
    prior: FactorizedModel


@dataclass(frozen=True)
class LatentBundle:
    """Everything the entropy stage needs, aligned with the latent grid.

    y: analysis output; y_hat: dequantized latent; y_bar: residual-corrected
    latent fed to synthesis; z/z_hat: hyper latent and its quantization;
    mu_base/sigma_base: hyper-synthesis prediction; mu/sigma: per-slice
    predictions concatenated back to M channels; y_symbols/z_symbols: the
    integer lattice values actually coded.
    """

    y: np.ndarray
    y_hat: np.ndarray
    y_bar: np.ndarray
    z: np.ndarray
    z_hat: np.ndarray
    mu_base: np.ndarray
    sigma_base: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    y_symbols: np.ndarray
    z_symbols: np.ndarray


# ---------------------------------------------------------------------------
# Parameter enumeration (single fixed order for init, save, and build)


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    init: str  # uniform | zeros | ones | dt_bias | a_log | prior_matrix | prior_bias | prior_gate
    fan_in: int = 0
    arg: float = 0.0


def _vss_param_specs(prefix: str, width: int, layers: int, cfg: TransformConfig) -> list[ParamSpec]:
    hidden = cfg.expand * width
    dk, n = cfg.dw_kernel, cfg.state_dim
    out = []
    for l in range(layers):
        p = f"{prefix}.l{l}"
        out += [
            ParamSpec(f"{p}.ln1.g", (width,), "ones"),
            ParamSpec(f"{p}.ln1.b", (width,), "zeros"),
            ParamSpec(f"{p}.lin_in.w", (width, hidden), "uniform", width),
            ParamSpec(f"{p}.lin_in.b", (hidden,), "zeros"),
            ParamSpec(f"{p}.dw.w", (dk, dk, hidden), "uniform", dk * dk),
            ParamSpec(f"{p}.dw.b", (hidden,), "zeros"),
            ParamSpec(f"{p}.lin_gate.w", (width, hidden), "uniform", width),
            ParamSpec(f"{p}.lin_gate.b", (hidden,), "zeros"),
            ParamSpec(f"{p}.ln2.g", (hidden,), "ones"),
            ParamSpec(f"{p}.ln2.b", (hidden,), "zeros"),
            ParamSpec(f"{p}.lin_out.w", (hidden, width), "uniform", hidden),
            ParamSpec(f"{p}.lin_out.b", (width,), "zeros"),
        ]
        for d in range(4):
            q = f"{p}.scan.d{d}"
            out += [
                ParamSpec(f"{q}.w_delta", (hidden, hidden), "uniform", hidden),
                ParamSpec(f"{q}.b_delta", (hidden,), "dt_bias"),
                ParamSpec(f"{q}.w_b", (hidden, n), "uniform", hidden),
                ParamSpec(f"{q}.w_c", (hidden, n), "uniform", hidden),
                ParamSpec(f"{q}.a_log", (hidden, n), "a_log"),
                ParamSpec(f"{q}.skip", (hidden,), "ones"),
            ]
    return out


def _ga_stages(cfg: TransformConfig) -> list[tuple[int, int, int, int]]:
    c1, c2, c3, m = cfg.channels[:4]
    cins = (3, c1, c2, c3)
    couts = (c1, c2, c3, m)
    return [(cins[i], couts[i], cfg.ga_strides[i], cfg.vss_layers[i]) for i in range(4)]


def _ha_stages(cfg: TransformConfig) -> list[tuple[int, int, int, int]]:
    m, c5, c6 = cfg.channels[3], cfg.channels[4], cfg.channels[5]
    return [
        (m, c5, cfg.ha_strides[0], cfg.hyper_vss_layers),
        (c5, c6, cfg.ha_strides[1], cfg.hyper_vss_layers),
    ]


def _hs_stages(cfg: TransformConfig) -> list[tuple[int, int, int, int]]:
    m, c5, c6 = cfg.channels[3], cfg.channels[4], cfg.channels[5]
    return [
        (c6, c5, cfg.ha_strides[1], cfg.hyper_vss_layers),
        (c5, 2 * m, cfg.ha_strides[0], cfg.hyper_vss_layers),
    ]


def _gs_stages(cfg: TransformConfig) -> list[tuple[int, int, int, int]]:
    c1, c2, c3, m = cfg.channels[:4]
    cins = (m, c3, c2, c1)
    couts = (c3, c2, c1, 3)
    counts = cfg.vss_layers[::-1]
    strides = cfg.ga_strides[::-1]
    return [(cins[i], couts[i], strides[i], counts[i]) for i in range(4)]


def _cam_widths(cfg: TransformConfig, i: int) -> tuple[int, int, int]:
    m, sc = cfg.latent_channels, cfg.slice_channels
    return 2 * m + i * sc, 2 * m + (i + 1) * sc, cfg.cam_hidden


def parameter_specs(cfg: TransformConfig) -> list[ParamSpec]:
    """Every model parameter in the canonical creation order."""
    k = cfg.conv_kernel
    specs: list[ParamSpec] = []
    for s, (cin, cout, _, layers) in enumerate(_ga_stages(cfg)):
        specs.append(ParamSpec(f"ga.s{s}.conv.w", (k, k, cin, cout), "uniform", k * k * cin))
        specs.append(ParamSpec(f"ga.s{s}.conv.b", (cout,), "zeros"))
        specs += _vss_param_specs(f"ga.s{s}.vss", cout, layers, cfg)
    for s, (cin, cout, _, layers) in enumerate(_ha_stages(cfg)):
        specs.append(ParamSpec(f"ha.s{s}.conv.w", (k, k, cin, cout), "uniform", k * k * cin))
        specs.append(ParamSpec(f"ha.s{s}.conv.b", (cout,), "zeros"))
        specs += _vss_param_specs(f"ha.s{s}.vss", cout, layers, cfg)
    for s, (cin, cout, _, layers) in enumerate(_hs_stages(cfg)):
        specs += _vss_param_specs(f"hs.s{s}.vss", cin, layers, cfg)
        specs.append(ParamSpec(f"hs.s{s}.deconv.w", (k, k, cin, cout), "uniform", k * k * cin))
        specs.append(ParamSpec(f"hs.s{s}.deconv.b", (cout,), "zeros"))
    for s, (cin, cout, _, layers) in enumerate(_gs_stages(cfg)):
        specs += _vss_param_specs(f"gs.s{s}.vss", cin, layers, cfg)
        specs.append(ParamSpec(f"gs.s{s}.deconv.w", (k, k, cin, cout), "uniform", k * k * cin))
        specs.append(ParamSpec(f"gs.s{s}.deconv.b", (cout,), "zeros"))
    sc = cfg.slice_channels
    for i in range(cfg.slices):
        cin_p, cin_r, hidden = _cam_widths(cfg, i)
        specs += [
            ParamSpec(f"cam.e{i}.param.w0", (cin_p, hidden), "uniform", cin_p),
            ParamSpec(f"cam.e{i}.param.b0", (hidden,), "zeros"),
            ParamSpec(f"cam.e{i}.param.w1", (hidden, 2 * sc), "uniform", hidden),
            ParamSpec(f"cam.e{i}.param.b1", (2 * sc,), "zeros"),
            ParamSpec(f"cam.e{i}.res.w0", (cin_r, hidden), "uniform", cin_r),
            ParamSpec(f"cam.e{i}.res.b0", (hidden,), "zeros"),
            ParamSpec(f"cam.e{i}.res.w1", (hidden, sc), "uniform", hidden),
            ParamSpec(f"cam.e{i}.res.b1", (sc,), "zeros"),
        ]
    c6 = cfg.hyper_channels
    dims = (1, 3, 3, 3, 1)
    scale = 10.0 ** 0.25
    for lay in range(4):
        do, di = dims[lay + 1], dims[lay]
        const = math.log(math.expm1(1.0 / (scale * do)))
        specs.append(ParamSpec(f"prior.h{lay}", (c6, do, di), "prior_matrix", arg=const))
        specs.append(ParamSpec(f"prior.b{lay}", (c6, do), "prior_bias"))
        if lay < 3:
            specs.append(ParamSpec(f"prior.a{lay}", (c6, do), "prior_gate"))
    return specs


# ---------------------------------------------------------------------------
# Builders from the flat parameter mapping


def _fetch(params, name: str) -> np.ndarray:
    try:
        return params[name]
    except KeyError:
        raise ValueError(f"weight store is missing parameter {name!r}") from None


def _build_vss(params, prefix: str, layers: int) -> tuple[VssLayerWeights, ...]:
    out = []
    for l in range(layers):
        p = f"{prefix}.l{l}"
        dirs = tuple(
            S6Weights(
                w_delta=_fetch(params, f"{p}.scan.d{d}.w_delta"),
                b_delta=_fetch(params, f"{p}.scan.d{d}.b_delta"),
                w_b=_fetch(params, f"{p}.scan.d{d}.w_b"),
                w_c=_fetch(params, f"{p}.scan.d{d}.w_c"),
                a_log=_fetch(params, f"{p}.scan.d{d}.a_log"),
                skip=_fetch(params, f"{p}.scan.d{d}.skip"),
            )
            for d in range(4)
        )
        out.append(
            VssLayerWeights(
                ln1_gamma=_fetch(params, f"{p}.ln1.g"),
                ln1_beta=_fetch(params, f"{p}.ln1.b"),
                w_in=_fetch(params, f"{p}.lin_in.w"),
                b_in=_fetch(params, f"{p}.lin_in.b"),
                dw_kernel=_fetch(params, f"{p}.dw.w"),
                dw_bias=_fetch(params, f"{p}.dw.b"),
                w_gate=_fetch(params, f"{p}.lin_gate.w"),
                b_gate=_fetch(params, f"{p}.lin_gate.b"),
                ln2_gamma=_fetch(params, f"{p}.ln2.g"),
                ln2_beta=_fetch(params, f"{p}.ln2.b"),
                w_out=_fetch(params, f"{p}.lin_out.w"),
                b_out=_fetch(params, f"{p}.lin_out.b"),
                scan=Scan2dWeights(directions=dirs),
            )
        )
    return tuple(out)


def build_model(params, cfg: TransformConfig) -> ModelWeights:
    """Assemble structured weights from a flat name -> array mapping."""
    k = cfg.conv_kernel
    ga = tuple(
        DownStage(
            spec=ConvSpec(k, stride, k // 2, cin, cout, "down"),
            w=_fetch(params, f"ga.s{s}.conv.w"),
            b=_fetch(params, f"ga.s{s}.conv.b"),
            vss=_build_vss(params, f"ga.s{s}.vss", layers),
        )
        for s, (cin, cout, stride, layers) in enumerate(_ga_stages(cfg))
    )
    ha = tuple(
        DownStage(
            spec=ConvSpec(k, stride, k // 2, cin, cout, "down"),
            w=_fetch(params, f"ha.s{s}.conv.w"),
            b=_fetch(params, f"ha.s{s}.conv.b"),
            vss=_build_vss(params, f"ha.s{s}.vss", layers),
        )
        for s, (cin, cout, stride, layers) in enumerate(_ha_stages(cfg))
    )
    hs = tuple(
        UpStage(
            vss=_build_vss(params, f"hs.s{s}.vss", layers),
            spec=ConvSpec(k, stride, k // 2, cin, cout, "up", out_pad=stride - 1),
            w=_fetch(params, f"hs.s{s}.deconv.w"),
            b=_fetch(params, f"hs.s{s}.deconv.b"),
        )
        for s, (cin, cout, stride, layers) in enumerate(_hs_stages(cfg))
    )
    gs = tuple(
        UpStage(
            vss=_build_vss(params, f"gs.s{s}.vss", layers),
            spec=ConvSpec(k, stride, k // 2, cin, cout, "up", out_pad=stride - 1),
            w=_fetch(params, f"gs.s{s}.deconv.w"),
            b=_fetch(params, f"gs.s{s}.deconv.b"),
        )
        for s, (cin, cout, stride, layers) in enumerate(_gs_stages(cfg))
    )
    cam = tuple(
        SliceHead(
            param_w0=_fetch(params, f"cam.e{i}.param.w0"),
            param_b0=_fetch(params, f"cam.e{i}.param.b0"),
            param_w1=_fetch(params, f"cam.e{i}.param.w1"),
            param_b1=_fetch(params, f"cam.e{i}.param.b1"),
            res_w0=_fetch(params, f"cam.e{i}.res.w0"),
            res_b0=_fetch(params, f"cam.e{i}.res.b0"),
            res_w1=_fetch(params, f"cam.e{i}.res.w1"),
            res_b1=_fetch(params, f"cam.e{i}.res.b1"),
        )
        for i in range(cfg.slices)
    )
    prior = FactorizedModel(
        h=tuple(_fetch(params, f"prior.h{lay}") for lay in range(4)),
        b=tuple(_fetch(params, f"prior.b{lay}") for lay in range(4)),
        a=tuple(_fetch(params, f"prior.a{lay}") for lay in range(3)),
    )
    return ModelWeights(config=cfg, ga=ga, ha=ha, hs=hs, gs=gs, cam=cam, prior=prior)


# ---------------------------------------------------------------------------
# Forward passes


def analysis(x: np.ndarray, model: ModelWeights, parallel: bool = True) -> np.ndarray:
    """g_a: image (H, W, 3) in [0, 1] to latent (H/16, W/16, M)."""
    if x.ndim != 3 or x.shape[2] != 3:
        raise ShapeError(f"analysis expects (H, W, 3), got {x.shape}")
    stride = model.config.ga_stride
    if x.shape[0] % stride or x.shape[1] % stride:
        raise ShapeError(f"analysis input {x.shape[:2]} not divisible by stride {stride}")
    for st in model.ga:
        x = conv2d(x, st.w, st.b, st.spec)
        x = vss_block_forward(x, st.vss, parallel=parallel)
    return x


def hyper_analysis(y: np.ndarray, model: ModelWeights, parallel: bool = True) -> np.ndarray:
    """h_a: latent (h, w, M) to hyper latent (h/4, w/4, C6)."""
    for st in model.ha:
        y = conv2d(y, st.w, st.b, st.spec)
        y = vss_block_forward(y, st.vss, parallel=parallel)
    return y


def hyper_synthesis(z_hat: np.ndarray, model: ModelWeights, parallel: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """h_s: quantized hyper latent to (mu_tilde, sigma_tilde), each (h, w, M).

    The sigma head passes through softplus and is clamped to >= SIGMA_MIN.
    """
    x = z_hat
    for st in model.hs:
        x = vss_block_forward(x, st.vss, parallel=parallel)
        x = conv_transpose2d(x, st.w, st.b, st.spec)
    m = model.config.latent_channels
    mu = x[..., :m]
    sigma = np.maximum(softplus(x[..., m:]), np.asarray(SIGMA_MIN, dtype=x.dtype))
    return mu, sigma


def synthesis(y: np.ndarray, model: ModelWeights, parallel: bool = True) -> np.ndarray:
    """g_s: latent (h, w, M) to reconstruction (16h, 16w, 3), clamped to [0, 1]."""
    x = y
    for st in model.gs:
        x = vss_block_forward(x, st.vss, parallel=parallel)
        x = conv_transpose2d(x, st.w, st.b, st.spec)
    return np.clip(x, 0.0, 1.0)


def quantize_to_alphabet(v: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean-offset quantization onto the clamped coder lattice.

    Returns (symbols, v_hat) with symbols = clip(round(v - mu), -255, 255) as
    int32 and v_hat = symbols + mu in v's dtype. Saturation is applied before
    anything downstream sees v_hat, so the decoder reproduces it exactly.
    """
    k = round_half_away_from_zero(v - mu)
    k = np.clip(k, SYMBOL_MIN, SYMBOL_MAX).astype(np.int32)
    return k, k.astype(v.dtype) + mu


def slice_params(i: int, mu_base: np.ndarray, sigma_base: np.ndarray, y_bar_prev: np.ndarray, head: SliceHead) -> tuple[np.ndarray, np.ndarray]:
    """(mu_i, sigma_i) for slice i from the hyper prediction and prior slices.

    y_bar_prev holds the first i reconstructed slices, channel-concatenated
    (may be zero-width for i = 0). The decoder calls this with exactly the
    same inputs as the encoder, giving bit-identical predictions.
    """
    ctx = np.concatenate([mu_base, sigma_base, y_bar_prev], axis=-1)
    hidden = silu(linear(ctx, head.param_w0, head.param_b0))
    out = linear(hidden, head.param_w1, head.param_b1)
    sc = out.shape[-1] // 2
    mu = out[..., :sc]
    sigma = np.maximum(softplus(out[..., sc:]), np.asarray(SIGMA_MIN, dtype=out.dtype))
    return mu, sigma


def slice_residual(i: int, mu_base: np.ndarray, sigma_base: np.ndarray, y_bar_prev: np.ndarray, y_hat_i: np.ndarray, head: SliceHead) -> np.ndarray:
    """Residual refinement r_i from the decoded slice and its context."""
    ctx = np.concatenate([mu_base, sigma_base, y_bar_prev, y_hat_i], axis=-1)
    hidden = silu(linear(ctx, head.res_w0, head.res_b0))
    return linear(hidden, head.res_w1, head.res_b1)


def cam_slice(
    i: int,
    mu_base: np.ndarray,
    sigma_base: np.ndarray,
    y_bar_prev: np.ndarray,
    y_i: np.ndarray,
    head: SliceHead,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encoder-side slice pass: returns (r_i, mu_i, sigma_i).

    Quantizes y_i against mu_i on the clamped lattice internally; the
    reconstructed slice is y_hat_i + r_i.
    """
    mu, sigma = slice_params(i, mu_base, sigma_base, y_bar_prev, head)
    _, y_hat = quantize_to_alphabet(y_i, mu)
    r = slice_residual(i, mu_base, sigma_base, y_bar_prev, y_hat, head)
    return r, mu, sigma


def run_cam_encode(y: np.ndarray, mu_base: np.ndarray, sigma_base: np.ndarray, model: ModelWeights) -> dict:
    """Run all slice heads on the encoder side.

    Returns per-slice lists of (mu, sigma, symbols, y_hat) plus the merged
    y_hat / y_bar maps; identical arithmetic to the decoder's slice loop.
    """
    cfg = model.config
    sc = cfg.slice_channels
    mus, sigmas, symbols, hats, bars = [], [], [], [], []
    for i in range(cfg.slices):
        y_bar_prev = np.concatenate(bars, axis=-1) if bars else y[..., :0]
        head = model.cam[i]
        mu_i, sigma_i = slice_params(i, mu_base, sigma_base, y_bar_prev, head)
        y_i = y[..., i * sc : (i + 1) * sc]
        k_i, y_hat_i = quantize_to_alphabet(y_i, mu_i)
        r_i = slice_residual(i, mu_base, sigma_base, y_bar_prev, y_hat_i, head)
        mus.append(mu_i)
        sigmas.append(sigma_i)
        symbols.append(k_i)
        hats.append(y_hat_i)
        bars.append(y_hat_i + r_i)
    return {
        "mu": mus,
        "sigma": sigmas,
        "symbols": symbols,
        "y_hat": np.concatenate(hats, axis=-1),
        "y_bar": np.concatenate(bars, axis=-1),
    }
