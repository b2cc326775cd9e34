"""Deterministic weight generation and a byte-stable on-disk archive.

Weights are drawn from a single PCG64 stream seeded by the user, walking
parameter_specs in its canonical order, so (config, seed) fully determines
every tensor. The archive format is fixed little-endian binary (sorted entry
names, raw float32 payloads); writing the same store twice yields identical
bytes, which makes weight files hashable in tests.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .transforms import ModelWeights, ParamSpec, TransformConfig, build_model, parameter_specs

_MAGIC = b"SSMW"
_VERSION = 1


class WeightFormatError(ValueError):
    pass


def _config_blob(cfg: TransformConfig) -> bytes:
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def compute_model_id(cfg: TransformConfig, seed: int) -> int:
    """Stable 32-bit identity of (config, seed), stamped into bitstreams."""
    return zlib.crc32(_config_blob(cfg) + struct.pack("<Q", seed)) & 0xFFFFFFFF


def _init_array(spec: ParamSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.init == "uniform":
        bound = 1.0 / math.sqrt(spec.fan_in)
        v = rng.uniform(-bound, bound, spec.shape)
    elif spec.init == "zeros":
        v = np.zeros(spec.shape)
    elif spec.init == "ones":
        v = np.ones(spec.shape)
    elif spec.init == "dt_bias":
        # softplus(b_delta) should land in [1e-3, 1e-1] at init
        u = rng.uniform(1e-3, 1e-1, spec.shape)
        v = np.log(np.expm1(u))
    elif spec.init == "a_log":
        d, n = spec.shape
        v = np.tile(np.log(np.arange(1, n + 1, dtype=np.float64)), (d, 1))
    elif spec.init == "prior_matrix":
        v = spec.arg + rng.uniform(-0.1, 0.1, spec.shape)
    elif spec.init == "prior_bias":
        v = rng.uniform(-0.5, 0.5, spec.shape)
    elif spec.init == "prior_gate":
        v = rng.uniform(-0.1, 0.1, spec.shape)
    else:
        raise ValueError(f"unknown init rule {spec.init!r}")
    return np.ascontiguousarray(v, dtype=np.float32)


@dataclass
class WeightStore:
    """Flat name -> float32 array mapping plus the config that shaped it."""

    config: TransformConfig
    seed: int
    params: dict[str, np.ndarray]
    _model: ModelWeights | None = field(default=None, repr=False, compare=False)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    @property
    def model_id(self) -> int:
        return compute_model_id(self.config, self.seed)

    @property
    def model(self) -> ModelWeights:
        if self._model is None:
            self._model = build_model(self.params, self.config)
        return self._model

    def validate(self) -> None:
        """Check the parameter set matches the config's enumeration exactly."""
        specs = parameter_specs(self.config)
        expected = {s.name: s.shape for s in specs}
        names = set(self.params)
        missing = sorted(set(expected) - names)
        extra = sorted(names - set(expected))
        if missing:
            raise WeightFormatError(f"missing parameters: {missing[:5]}{'...' if len(missing) > 5 else ''}")
        if extra:
            raise WeightFormatError(f"unexpected parameters: {extra[:5]}{'...' if len(extra) > 5 else ''}")
        for name, shape in expected.items():
            arr = self.params[name]
            if tuple(arr.shape) != shape:
                raise WeightFormatError(f"parameter {name!r} has shape {arr.shape}, expected {shape}")
            if arr.dtype != np.float32:
                raise WeightFormatError(f"parameter {name!r} has dtype {arr.dtype}, expected float32")

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        self.validate()
        blob = _config_blob(self.config)
        out = bytearray()
        out += _MAGIC
        out += struct.pack("<B", _VERSION)
        out += struct.pack("<Q", self.seed)
        out += struct.pack("<I", len(blob))
        out += blob
        out += struct.pack("<I", len(self.params))
        for name in sorted(self.params):
            arr = self.params[name]
            enc = name.encode("utf-8")
            out += struct.pack("<H", len(enc))
            out += enc
            out += struct.pack("<B", arr.ndim)
            out += struct.pack(f"<{arr.ndim}I", *arr.shape)
            out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
        return bytes(out)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightStore":
        view = memoryview(data)
        pos = 0

        def take(n: int) -> memoryview:
            nonlocal pos
            if pos + n > len(view):
                raise WeightFormatError(f"truncated weight archive at byte {pos}")
            chunk = view[pos : pos + n]
            pos += n
            return chunk

        if bytes(take(4)) != _MAGIC:
            raise WeightFormatError("not a weight archive (bad magic)")
        (version,) = struct.unpack("<B", take(1))
        if version != _VERSION:
            raise WeightFormatError(f"unsupported weight archive version {version}")
        (seed,) = struct.unpack("<Q", take(8))
        (blob_len,) = struct.unpack("<I", take(4))
        try:
            cfg = TransformConfig.from_dict(json.loads(bytes(take(blob_len)).decode("utf-8")))
        except (ValueError, KeyError, TypeError) as e:
            raise WeightFormatError(f"bad config block: {e}") from None
        (count,) = struct.unpack("<I", take(4))
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", take(2))
            name = bytes(take(name_len)).decode("utf-8")
            (ndim,) = struct.unpack("<B", take(1))
            shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
            nbytes = 4 * int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(take(nbytes), dtype="<f4").reshape(shape).astype(np.float32)
            if name in params:
                raise WeightFormatError(f"duplicate parameter {name!r}")
            params[name] = arr
        if pos != len(view):
            raise WeightFormatError(f"{len(view) - pos} trailing bytes after weight entries")
        store = cls(config=cfg, seed=seed, params=params)
        store.validate()
        return store

    @classmethod
    def load(cls, path: str | Path) -> "WeightStore":
        return cls.from_bytes(Path(path).read_bytes())


def init_weights(cfg: TransformConfig, seed: int) -> WeightStore:
    """Draw every parameter from one seeded PCG64 stream in canonical order."""
    if seed < 0 or seed > 0xFFFFFFFFFFFFFFFF:
        raise ValueError(f"seed must fit in u64, got {seed}")
    rng = np.random.default_rng(seed)
    params = {spec.name: _init_array(spec, rng) for spec in parameter_specs(cfg)}
    return WeightStore(config=cfg, seed=seed, params=params)
