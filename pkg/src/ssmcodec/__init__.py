"""Lossy image codec built on selective-scan state-space transforms.

Pipeline: analysis transform -> hyperprior entropy model with channel-wise
autoregressive slice refinement -> range-coded bitstream -> synthesis
transform. Everything is deterministic float32 numpy, so encoder and decoder
agree bit for bit.
"""

from .container import (
    BitstreamFile,
    DecodeResult,
    EncodeResult,
    decode_image,
    encode_image,
    pad_to_multiple,
    unpad,
)
from .entropy import LAMBDAS, SIGMA_MIN, gaussian_bin_mass, quantize, rd_loss
from .rangecoder import BitstreamError, RangeDecoder, RangeEncoder
from .ssm import selective_scan_backward, selective_scan_par, selective_scan_seq
from .transforms import TransformConfig
from .weights import WeightStore, init_weights

__version__ = "0.1.0"

__all__ = [
    "BitstreamError",
    "BitstreamFile",
    "DecodeResult",
    "EncodeResult",
    "LAMBDAS",
    "RangeDecoder",
    "RangeEncoder",
    "SIGMA_MIN",
    "TransformConfig",
    "WeightStore",
    "decode_image",
    "encode_image",
    "gaussian_bin_mass",
    "init_weights",
    "pad_to_multiple",
    "quantize",
    "rd_loss",
    "selective_scan_backward",
    "selective_scan_par",
    "selective_scan_seq",
    "unpad",
    "__version__",
]
