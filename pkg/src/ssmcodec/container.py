"""End-to-end encode/decode: padding, slice loop, and the bitstream layout.

A bitstream is a fixed little-endian header (magic, version, lambda index,
model id, original height/width, slice count) followed by length-prefixed
range-coded payloads: one for the hyper latent, then one per channel slice.
The decoder recomputes padded geometry from the stored original size, so the
header carries no redundant shape fields.

Encoder and decoder share every arithmetic routine (same float32 functions on
identical inputs), which is what makes the slice context chain and the final
reconstruction bit-exact across the two sides.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .entropy import (
    LAMBDAS,
    factorized_cdf_tables,
    gaussian_cdf_tables,
    sigma_to_scale_index,
)
from .nn import ShapeError
from .rangecoder import BitstreamError, decode_symbols, encode_symbols
from .transforms import (
    LatentBundle,
    ModelWeights,
    analysis,
    hyper_analysis,
    hyper_synthesis,
    quantize_to_alphabet,
    run_cam_encode,
    slice_params,
    slice_residual,
    synthesis,
)
from .weights import WeightStore

MAGIC = b"SSMB"
VERSION = 1
_HEADER = struct.Struct("<4sBBIIIB")


def pad_to_multiple(x: np.ndarray, multiple: int) -> np.ndarray:
    """Reflect-pad the two leading spatial axes up to a multiple."""
    h, w = x.shape[:2]
    ph = -h % multiple
    pw = -w % multiple
    if ph == 0 and pw == 0:
        return x
    pad = ((0, ph), (0, pw)) + ((0, 0),) * (x.ndim - 2)
    return np.pad(x, pad, mode="reflect")


def unpad(x: np.ndarray, height: int, width: int) -> np.ndarray:
    return x[:height, :width]


def _padded_extent(n: int, multiple: int) -> int:
    return n + (-n % multiple)


@dataclass(frozen=True)
class BitstreamFile:
    model_id: int
    lambda_index: int
    height: int
    width: int
    z_stream: bytes
    y_streams: tuple[bytes, ...]

    @property
    def payload_bytes(self) -> int:
        return len(self.z_stream) + sum(len(s) for s in self.y_streams)

    @property
    def total_bytes(self) -> int:
        return _HEADER.size + 4 * (1 + len(self.y_streams)) + self.payload_bytes

    def serialize(self) -> bytes:
        out = bytearray()
        out += _HEADER.pack(
            MAGIC,
            VERSION,
            self.lambda_index,
            self.model_id,
            self.height,
            self.width,
            len(self.y_streams),
        )
        out += struct.pack("<I", len(self.z_stream))
        out += self.z_stream
        for s in self.y_streams:
            out += struct.pack("<I", len(s))
            out += s
        return bytes(out)

    @classmethod
    def parse(cls, data: bytes) -> "BitstreamFile":
        if len(data) < _HEADER.size:
            raise BitstreamError(f"bitstream too short for header ({len(data)} bytes)")
        magic, version, lam, model_id, height, width, slices = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise BitstreamError(f"unsupported bitstream version {version}")
        if height < 1 or width < 1:
            raise BitstreamError(f"bad image extent {height}x{width}")
        if slices < 1:
            raise BitstreamError("bitstream declares zero slices")
        pos = _HEADER.size

        def take_stream() -> bytes:
            nonlocal pos
            if pos + 4 > len(data):
                raise BitstreamError(f"truncated stream length at byte {pos}")
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + n > len(data):
                raise BitstreamError(f"stream of {n} bytes overruns container at byte {pos}")
            chunk = data[pos : pos + n]
            pos += n
            return chunk

        z_stream = take_stream()
        y_streams = tuple(take_stream() for _ in range(slices))
        if pos != len(data):
            raise BitstreamError(f"{len(data) - pos} trailing bytes after payload")
        return cls(
            model_id=model_id,
            lambda_index=lam,
            height=height,
            width=width,
            z_stream=z_stream,
            y_streams=y_streams,
        )


@dataclass(frozen=True)
class EncodeResult:
    data: bytes
    bitstream: BitstreamFile
    bundle: LatentBundle | None = None


@dataclass(frozen=True)
class DecodeResult:
    image: np.ndarray  # uint8 (H, W, 3)
    bundle: LatentBundle | None = None


def _check_image(img: np.ndarray) -> None:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ShapeError(f"expected uint8 (H, W, 3) image, got {img.dtype} {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeError(f"empty image {img.shape}")


def _z_contexts(model: ModelWeights, spatial: int) -> list:
    tables = factorized_cdf_tables(model.prior)
    return list(tables) * spatial


def encode_image(
    img: np.ndarray,
    store: WeightStore,
    lambda_index: int = 0,
    *,
    keep_state: bool = False,
    parallel: bool = True,
) -> EncodeResult:
    """Compress a uint8 image into a self-describing bitstream."""
    _check_image(img)
    if not 0 <= lambda_index < len(LAMBDAS):
        raise ValueError(f"lambda_index must be in [0, {len(LAMBDAS)}), got {lambda_index}")
    model = store.model
    cfg = model.config
    h0, w0 = img.shape[:2]

    x = img.astype(np.float32) / np.float32(255.0)
    x = pad_to_multiple(x, cfg.total_stride)
    y = analysis(x, model, parallel=parallel)
    z = hyper_analysis(y, model, parallel=parallel)

    z_symbols, z_hat = quantize_to_alphabet(z, np.zeros_like(z))
    mu_base, sigma_base = hyper_synthesis(z_hat, model, parallel=parallel)
    cam = run_cam_encode(y, mu_base, sigma_base, model)

    z_stream = encode_symbols(z_symbols, _z_contexts(model, z.shape[0] * z.shape[1]))
    gtables = gaussian_cdf_tables()
    y_streams = []
    for k_i, sigma_i in zip(cam["symbols"], cam["sigma"]):
        idx = sigma_to_scale_index(sigma_i)
        contexts = [gtables[j] for j in idx.ravel()]
        y_streams.append(encode_symbols(k_i, contexts))

    bs = BitstreamFile(
        model_id=store.model_id,
        lambda_index=lambda_index,
        height=h0,
        width=w0,
        z_stream=z_stream,
        y_streams=tuple(y_streams),
    )
    bundle = None
    if keep_state:
        bundle = LatentBundle(
            y=y,
            y_hat=cam["y_hat"],
            y_bar=cam["y_bar"],
            z=z,
            z_hat=z_hat,
            mu_base=mu_base,
            sigma_base=sigma_base,
            mu=np.concatenate(cam["mu"], axis=-1),
            sigma=np.concatenate(cam["sigma"], axis=-1),
            y_symbols=np.concatenate(cam["symbols"], axis=-1),
            z_symbols=z_symbols,
        )
    return EncodeResult(data=bs.serialize(), bitstream=bs, bundle=bundle)


def decode_image(
    data: "bytes | BitstreamFile",
    store: WeightStore,
    *,
    keep_state: bool = False,
    parallel: bool = True,
) -> DecodeResult:
    """Invert encode_image: parse, entropy-decode, synthesize, crop."""
    bs = data if isinstance(data, BitstreamFile) else BitstreamFile.parse(data)
    if bs.model_id != store.model_id:
        raise BitstreamError(
            f"bitstream was produced by model {bs.model_id:#010x}, "
            f"store holds {store.model_id:#010x}"
        )
    model = store.model
    cfg = model.config
    if len(bs.y_streams) != cfg.slices:
        raise BitstreamError(
            f"bitstream has {len(bs.y_streams)} slices, model expects {cfg.slices}"
        )

    hp = _padded_extent(bs.height, cfg.total_stride)
    wp = _padded_extent(bs.width, cfg.total_stride)
    hy, wy = hp // cfg.ga_stride, wp // cfg.ga_stride
    hz, wz = hp // cfg.total_stride, wp // cfg.total_stride
    c6, m, sc = cfg.hyper_channels, cfg.latent_channels, cfg.slice_channels

    z_symbols = decode_symbols(bs.z_stream, hz * wz * c6, _z_contexts(model, hz * wz))
    z_symbols = z_symbols.reshape(hz, wz, c6)
    z_hat = z_symbols.astype(np.float32)
    mu_base, sigma_base = hyper_synthesis(z_hat, model, parallel=parallel)

    gtables = gaussian_cdf_tables()
    mus, sigmas, symbols, hats, bars = [], [], [], [], []
    for i in range(cfg.slices):
        y_bar_prev = np.concatenate(bars, axis=-1) if bars else mu_base[..., :0]
        head = model.cam[i]
        mu_i, sigma_i = slice_params(i, mu_base, sigma_base, y_bar_prev, head)
        idx = sigma_to_scale_index(sigma_i)
        contexts = [gtables[j] for j in idx.ravel()]
        k_i = decode_symbols(bs.y_streams[i], hy * wy * sc, contexts).reshape(hy, wy, sc)
        y_hat_i = k_i.astype(np.float32) + mu_i
        r_i = slice_residual(i, mu_base, sigma_base, y_bar_prev, y_hat_i, head)
        mus.append(mu_i)
        sigmas.append(sigma_i)
        symbols.append(k_i)
        hats.append(y_hat_i)
        bars.append(y_hat_i + r_i)

    y_bar = np.concatenate(bars, axis=-1)
    recon = synthesis(y_bar, model, parallel=parallel)
    recon = unpad(recon, bs.height, bs.width)
    img = np.clip(np.rint(recon * np.float32(255.0)), 0.0, 255.0).astype(np.uint8)

    bundle = None
    if keep_state:
        y_hat = np.concatenate(hats, axis=-1)
        bundle = LatentBundle(
            y=np.zeros_like(y_hat),  # true latent is not recoverable from the stream
            y_hat=y_hat,
            y_bar=y_bar,
            z=np.zeros_like(z_hat),
            z_hat=z_hat,
            mu_base=mu_base,
            sigma_base=sigma_base,
            mu=np.concatenate(mus, axis=-1),
            sigma=np.concatenate(sigmas, axis=-1),
            y_symbols=np.concatenate(symbols, axis=-1),
            z_symbols=z_symbols,
        )
    return DecodeResult(image=img, bundle=bundle)


def encoder_side_reconstruction(result: EncodeResult, store: WeightStore, parallel: bool = True) -> np.ndarray:
    """Reproduce the decoder's uint8 output from encoder-side state.

    Runs synthesis on the encoder's y_bar; must match decode_image bit for
    bit since both sides execute identical float32 arithmetic.
    """
    if result.bundle is None:
        raise ValueError("encode with keep_state=True to reconstruct on the encoder side")
    recon = synthesis(result.bundle.y_bar, store.model, parallel=parallel)
    recon = unpad(recon, result.bitstream.height, result.bitstream.width)
    return np.clip(np.rint(recon * np.float32(255.0)), 0.0, 255.0).astype(np.uint8)
