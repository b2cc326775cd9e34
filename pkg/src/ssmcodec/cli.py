"""Command-line interface: encode, decode, init-weights, bench, analyze.

Exit codes: 0 success, 1 format/data error (corrupt stream, bad archive,
unreadable image), 2 usage error (bad arguments, missing files). Verbosity is
controlled by the SSMCODEC_LOG environment variable (debug/info/warning).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .complexity import count_macs
from .container import decode_image, encode_image
from .entropy import LAMBDAS
from .imageio import ImageFormatError, pgm_bytes, read_image, write_image
from .metrics import (
    kl_to_standard_normal,
    latent_correlation,
    normalize_latent,
    psnr,
    quantize_deviation,
    scale_map_for_export,
)
from .nn import ShapeError
from .rangecoder import BitstreamError
from .transforms import TransformConfig
from .weights import WeightFormatError, WeightStore, init_weights

log = logging.getLogger("ssmcodec")

_DATA_ERRORS = (BitstreamError, WeightFormatError, ImageFormatError, ShapeError)


class UsageError(Exception):
    pass


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _load_store(args) -> WeightStore:
    if args.weights is None:
        raise UsageError("--weights is required")
    return WeightStore.load(_require_file(args.weights, "weight file"))


def cmd_init_weights(args) -> int:
    cfg = TransformConfig.preset(args.preset)
    store = init_weights(cfg, args.seed)
    store.save(args.out)
    n_params = sum(int(v.size) for v in store.params.values())
    print(f"{args.out}: preset={args.preset} seed={args.seed} model_id={store.model_id:#010x} params={n_params}")
    return 0


def cmd_encode(args) -> int:
    src = _require_file(args.input, "input image")
    store = _load_store(args)
    img = read_image(src)
    t0 = time.perf_counter()
    result = encode_image(img, store, args.lambda_index)
    dt = time.perf_counter() - t0
    out = Path(args.out) if args.out else src.with_suffix(".ssmb")
    out.write_bytes(result.data)
    bs = result.bitstream
    h, w = img.shape[:2]
    bpp = 8.0 * len(result.data) / (h * w)
    slice_sizes = " ".join(str(len(s)) for s in bs.y_streams)
    print(f"{out}: {len(result.data)} bytes, {bpp:.4f} bpp, {dt:.2f} s")
    print(f"  z stream {len(bs.z_stream)} B, slice streams [{slice_sizes}] B")
    return 0


def cmd_decode(args) -> int:
    src = _require_file(args.input, "bitstream")
    store = _load_store(args)
    data = src.read_bytes()
    t0 = time.perf_counter()
    result = decode_image(data, store)
    dt = time.perf_counter() - t0
    suffix = {"png": ".png", "ppm": ".ppm"}[args.format]
    out = Path(args.out) if args.out else src.with_suffix(suffix)
    write_image(out, result.image, args.format)
    h, w = result.image.shape[:2]
    print(f"{out}: {w}x{h}, {dt:.2f} s")
    return 0


def cmd_bench(args) -> int:
    if args.weights:
        store = WeightStore.load(_require_file(args.weights, "weight file"))
    else:
        store = init_weights(TransformConfig.preset(args.preset), args.seed)
    cfg = store.config
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError:
        raise UsageError(f"bad --sizes {args.sizes!r}; expected comma-separated integers") from None
    if not sizes or any(s < 1 for s in sizes):
        raise UsageError(f"bad --sizes {args.sizes!r}")
    rng = np.random.default_rng(args.seed)
    rows = []
    for size in sizes:
        img = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        t0 = time.perf_counter()
        enc = encode_image(img, store, args.lambda_index)
        t_enc = time.perf_counter() - t0
        t0 = time.perf_counter()
        dec = decode_image(enc.data, store)
        t_dec = time.perf_counter() - t0
        padded = size + (-size % cfg.total_stride)
        macs = count_macs(cfg, padded, padded)
        rows.append(
            {
                "size": size,
                "bpp": f"{8.0 * len(enc.data) / (size * size):.4f}",
                "psnr": f"{psnr(img, dec.image):.3f}",
                "encode_s": f"{t_enc:.3f}",
                "decode_s": f"{t_dec:.3f}",
                "ga": macs["ga"],
                "ha": macs["ha"],
                "hs": macs["hs"],
                "gs": macs["gs"],
                "cam": macs["cam"],
                "scan_core": macs["scan_core"],
                "total": macs["total"],
                "per_pixel": f"{macs['per_pixel']:.1f}",
            }
        )
        log.info("bench %dx%d: encode %.3fs decode %.3fs", size, size, t_enc, t_dec)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        sys.stdout.write(text)
    return 0


def _analyze_one(path: Path, store: WeightStore, args, out_dir: Path) -> dict:
    img = read_image(path)
    enc = encode_image(img, store, args.lambda_index, keep_state=True)
    dec = decode_image(enc.data, store)
    b = enc.bundle
    y_norm = normalize_latent(b.y, b.mu, b.sigma)
    corr = latent_correlation(y_norm, max_offset=args.max_offset)
    kl = kl_to_standard_normal(y_norm)
    dev_map, dev_mean = quantize_deviation(b.y, b.y_hat)
    off = np.abs(corr).sum() - 1.0
    mean_off = off / (corr.size - 1) if corr.size > 1 else 0.0
    stem = path.stem
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"correlation_{stem}.pgm").write_bytes(pgm_bytes(scale_map_for_export(corr)))
    np.savetxt(out_dir / f"correlation_{stem}.csv", corr, delimiter=",", fmt="%.8f")
    (out_dir / f"deviation_{stem}.pgm").write_bytes(pgm_bytes(scale_map_for_export(dev_map)))
    np.savetxt(out_dir / f"deviation_{stem}.csv", dev_map, delimiter=",", fmt="%.8f")
    h, w = img.shape[:2]
    return {
        "image": path.name,
        "bpp": f"{8.0 * len(enc.data) / (h * w):.4f}",
        "psnr": f"{psnr(img, dec.image):.3f}",
        "kl_nats": f"{kl:.5f}",
        "quantize_dev_mean": f"{dev_mean:.5f}",
        "corr_offcenter_mean_abs": f"{mean_off:.5f}",
    }


def cmd_analyze(args) -> int:
    store = _load_store(args)
    src = Path(args.input)
    if src.is_dir():
        paths = sorted(
            p for p in src.iterdir() if p.suffix.lower() in (".png", ".ppm", ".pgm")
        )
        if not paths:
            raise UsageError(f"no images found in {src}")
    elif src.is_file():
        paths = [src]
    else:
        raise UsageError(f"input not found: {src}")
    out_dir = Path(args.out) if args.out else Path("analysis_out")
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(lambda p: _analyze_one(p, store, args, out_dir), paths))
    else:
        rows = [_analyze_one(p, store, args, out_dir) for p in paths]
    fields = list(rows[0].keys())
    with open(out_dir / "summary.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    widths = {k: max(len(k), *(len(r[k]) for r in rows)) for k in fields}
    table = ["  ".join(k.ljust(widths[k]) for k in fields)]
    table += ["  ".join(r[k].ljust(widths[k]) for k in fields) for r in rows]
    text = "\n".join(table) + "\n"
    (out_dir / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssmcodec", description="State-space-model image codec")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, weights=True):
        if weights:
            p.add_argument("--weights", help="weight archive path")
        p.add_argument("--seed", type=int, default=0, help="RNG seed where applicable")
        p.add_argument("--lambda-index", type=int, default=0, choices=range(len(LAMBDAS)),
                       help="rate-distortion operating point index")
        p.add_argument("--threads", type=int, default=1,
                       help="image-level parallelism (single-image commands ignore this)")

    p = sub.add_parser("init-weights", help="create a deterministic weight archive")
    p.add_argument("--preset", default="full", choices=("full", "small", "tiny"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("encode", help="compress an image to a bitstream")
    p.add_argument("input")
    common(p)
    p.add_argument("--out", help="output bitstream path (default: input with .ssmb)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress a bitstream to an image")
    p.add_argument("input")
    common(p)
    p.add_argument("--out", help="output image path (default: input with format suffix)")
    p.add_argument("--format", default="png", choices=("png", "ppm"))
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="wall time and per-stage MAC estimates over input sizes")
    common(p)
    p.add_argument("--preset", default="small", choices=("full", "small", "tiny"),
                   help="used when --weights is not given")
    p.add_argument("--sizes", default="256,512,1024,2048", help="comma-separated square sizes")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="latent diagnostics over an image or directory")
    p.add_argument("input")
    common(p)
    p.add_argument("--out", help="output directory (default: analysis_out)")
    p.add_argument("--max-offset", type=int, default=4)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("SSMCODEC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
