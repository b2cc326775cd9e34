#!/usr/bin/env python3
"""Regenerate the frozen reference vectors under tests/golden/.

Produces a structured test image, compresses it with the tiny preset at seed
0, and records SHA-256 digests of the weight archive, the bitstream, and the
decoded image. The acceptance suite decodes the stored bitstream and
re-encodes the stored image, so any drift in initialization, transform
arithmetic, entropy tables, or container framing shows up as a digest change.

Run from the repository root:
    python3 scripts/make_golden.py
"""

import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from ssmcodec.container import decode_image, encode_image
from ssmcodec.imageio import ppm_bytes, write_image
from ssmcodec.transforms import TransformConfig
from ssmcodec.weights import init_weights

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"
HEIGHT, WIDTH = 96, 80  # deliberately not multiples of 64: exercises padding
SEED = 0
LAMBDA_INDEX = 0


def reference_image() -> np.ndarray:
    """Deterministic structured content built from integer arithmetic only."""
    y = np.arange(HEIGHT, dtype=np.int64)[:, None]
    x = np.arange(WIDTH, dtype=np.int64)[None, :]
    r = (x * 255) // (WIDTH - 1)  # horizontal ramp
    g = (y * 255) // (HEIGHT - 1)  # vertical ramp
    b = ((x // 8 + y // 8) % 2) * 180 + 40  # checkerboard
    img = np.stack(
        [np.broadcast_to(r, (HEIGHT, WIDTH)), np.broadcast_to(g, (HEIGHT, WIDTH)), b],
        axis=-1,
    ).astype(np.uint8)
    # diagonal stripes in one quadrant, flat patch in another
    stripes = (((x + y) % 16) * 12).astype(np.uint8)
    img[:40, :32] = np.broadcast_to(stripes[:40, :32, None], (40, 32, 3))
    img[60:90, 50:76] = (200, 40, 90)
    return img


def main() -> int:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    img = reference_image()
    store = init_weights(TransformConfig.tiny(), seed=SEED)

    result = encode_image(img, store, LAMBDA_INDEX)
    decoded = decode_image(result.data, store)

    write_image(GOLDEN_DIR / "reference.ppm", img)
    (GOLDEN_DIR / "reference.ssmb").write_bytes(result.data)

    hashes = {
        "preset": "tiny",
        "seed": SEED,
        "lambda_index": LAMBDA_INDEX,
        "model_id": f"{store.model_id:#010x}",
        "image_sha256": hashlib.sha256(ppm_bytes(img)).hexdigest(),
        "weights_sha256": hashlib.sha256(store.to_bytes()).hexdigest(),
        "bitstream_sha256": hashlib.sha256(result.data).hexdigest(),
        "decoded_sha256": hashlib.sha256(ppm_bytes(decoded.image)).hexdigest(),
    }
    (GOLDEN_DIR / "hashes.json").write_text(json.dumps(hashes, indent=2) + "\n")

    for k, v in hashes.items():
        print(f"{k}: {v}")
    print(f"bitstream: {len(result.data)} bytes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
