"""Byte-oriented range coder with 32-bit state and 16-bit probabilities.

Carry propagation follows the classic cache/pending-0xFF construction: the
encoder tracks (low, range), renormalizes a byte at a time once range drops
below 2^24, and resolves carries into buffered 0xFF bytes. The decoder mirrors
the same renormalization schedule, so for a valid stream it consumes exactly
the bytes the encoder produced (a fixed 5-byte terminator flushes the state;
an empty symbol sequence codes to just those 5 bytes).

All arithmetic is exact integer math, so encode and decode are bit-identical
across platforms. Symbol models are immutable CdfTable objects whose 16-bit
cumulative counts give every symbol a nonzero frequency.
"""

from __future__ import annotations

from bisect import bisect_right
from collections.abc import Sequence

import numpy as np

PRECISION = 16
TOTAL = 1 << PRECISION
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF
FLUSH_BYTES = 5


class BitstreamError(ValueError):
    """Malformed or truncated coded data."""


class CdfTable:
    """Cumulative frequency table over a contiguous integer alphabet.

    cum has length nsyms + 1 with cum[0] == 0, cum[-1] == 2^16, strictly
    increasing (every symbol has frequency >= 1). offset is the integer value
    of symbol index 0.
    """

    __slots__ = ("offset", "cum", "nsyms")

    def __init__(self, cum: Sequence[int], offset: int = 0) -> None:
        cum = [int(v) for v in cum]
        if len(cum) < 2:
            raise ValueError("CdfTable needs at least one symbol")
        if cum[0] != 0 or cum[-1] != TOTAL:
            raise ValueError(f"cumulative bounds must be 0 and {TOTAL}, got {cum[0]}, {cum[-1]}")
        for i in range(len(cum) - 1):
            if cum[i + 1] <= cum[i]:
                raise ValueError(f"zero or negative frequency at symbol index {i}")
        self.cum = cum
        self.offset = int(offset)
        self.nsyms = len(cum) - 1

    def mass(self) -> np.ndarray:
        """Per-symbol probability mass implied by the quantized counts."""
        c = np.asarray(self.cum, dtype=np.float64)
        return (c[1:] - c[:-1]) / TOTAL


class RangeEncoder:
    def __init__(self) -> None:
        self._low = 0
        self._range = _MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        self._done = False

    def encode(self, table: CdfTable, value: int) -> None:
        idx = value - table.offset
        if not 0 <= idx < table.nsyms:
            raise ValueError(f"symbol {value} outside table range [{table.offset}, {table.offset + table.nsyms - 1}]")
        lo = table.cum[idx]
        hi = table.cum[idx + 1]
        r = self._range >> PRECISION
        self._low += r * lo
        self._range = r * (hi - lo)
        while self._range < _TOP:
            self._shift_low()
            self._range = (self._range << 8) & _MASK32

    def _shift_low(self) -> None:
        # Emit the cached byte (plus carry) once low leaves the 0xFF plateau.
        if self._low < 0xFF000000 or self._low > _MASK32:
            carry = self._low >> 32
            temp = self._cache
            while True:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
                if self._cache_size == 0:
                    break
            self._cache = (self._low >> 24) & 0xFF
        self._cache_size += 1
        self._low = (self._low << 8) & _MASK32

    def finish(self) -> bytes:
        if self._done:
            raise RuntimeError("encoder already finished")
        self._done = True
        for _ in range(FLUSH_BYTES):
            self._shift_low()
        return bytes(self._out)


class RangeDecoder:
    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0
        self._range = _MASK32
        self._code = 0
        self._next_byte()  # mirror of the encoder's initial zero cache byte
        for _ in range(4):
            self._code = (self._code << 8) | self._next_byte()

    def _next_byte(self) -> int:
        if self._pos >= len(self._data):
            raise BitstreamError(f"truncated range-coded stream at byte {self._pos}")
        b = self._data[self._pos]
        self._pos += 1
        return b

    def decode(self, table: CdfTable) -> int:
        r = self._range >> PRECISION
        v = self._code // r
        if v >= TOTAL:
            v = TOTAL - 1
        idx = bisect_right(table.cum, v) - 1
        lo = table.cum[idx]
        hi = table.cum[idx + 1]
        self._code -= r * lo
        self._range = r * (hi - lo)
        while self._range < _TOP:
            self._code = ((self._code << 8) | self._next_byte()) & _MASK32
            self._range = (self._range << 8) & _MASK32
        return idx + table.offset


def encode_symbols(values, contexts) -> bytes:
    """Encode integer values under per-symbol CdfTable contexts.

    contexts is either one CdfTable for every symbol or a sequence with one
    table per symbol.
    """
    vals = np.asarray(values).ravel().tolist()
    enc = RangeEncoder()
    if isinstance(contexts, CdfTable):
        table = contexts
        for v in vals:
            enc.encode(table, v)
    else:
        if len(contexts) != len(vals):
            raise ValueError(f"{len(vals)} symbols but {len(contexts)} contexts")
        for v, table in zip(vals, contexts):
            enc.encode(table, v)
    return enc.finish()


def decode_symbols(data: bytes, count: int, contexts) -> np.ndarray:
    """Decode `count` integer values; inverse of encode_symbols."""
    dec = RangeDecoder(data)
    out = np.empty(count, dtype=np.int32)
    if isinstance(contexts, CdfTable):
        table = contexts
        for i in range(count):
            out[i] = dec.decode(table)
    else:
        if len(contexts) != count:
            raise ValueError(f"{count} symbols but {len(contexts)} contexts")
        for i in range(count):
            out[i] = dec.decode(contexts[i])
    return out
