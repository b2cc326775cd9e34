"""Range coder tests: table validation, round trips, rate, truncation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssmcodec.rangecoder import (
    FLUSH_BYTES,
    TOTAL,
    BitstreamError,
    CdfTable,
    RangeDecoder,
    RangeEncoder,
    decode_symbols,
    encode_symbols,
)

# Fixed reference stream: 20 ternary symbols under a skewed table. Guards the
# byte-level coder contract (renormalization and flush discipline).
GOLDEN_TABLE_CUM = [0, 100, 30000, 65536]
GOLDEN_SYMBOLS = [-1, 0, 1, 1, 0, -1, 1, 0, 0, 1, 1, 1, -1, 0, 1, 0, 0, 0, 1, 1]
GOLDEN_BYTES = bytes.fromhex("0000206267077fc5b94c")


def random_table(rng, nsyms, offset=0):
    cuts = np.sort(rng.choice(np.arange(1, TOTAL), size=nsyms - 1, replace=False))
    cum = [0] + cuts.tolist() + [TOTAL]
    return CdfTable(cum, offset)


def test_cdf_table_validation():
    CdfTable([0, TOTAL])  # single symbol is legal
    with pytest.raises(ValueError):
        CdfTable([0])
    with pytest.raises(ValueError):
        CdfTable([1, TOTAL])
    with pytest.raises(ValueError):
        CdfTable([0, TOTAL - 1])
    with pytest.raises(ValueError):
        CdfTable([0, 5, 5, TOTAL])
    with pytest.raises(ValueError):
        CdfTable([0, 7, 3, TOTAL])


def test_cdf_table_mass():
    t = CdfTable([0, 16384, 65536], offset=-3)
    np.testing.assert_allclose(t.mass(), [0.25, 0.75])
    assert t.nsyms == 2 and t.offset == -3


def test_golden_stream_bytes():
    table = CdfTable(GOLDEN_TABLE_CUM, offset=-1)
    assert encode_symbols(GOLDEN_SYMBOLS, table) == GOLDEN_BYTES
    got = decode_symbols(GOLDEN_BYTES, len(GOLDEN_SYMBOLS), table)
    assert got.tolist() == GOLDEN_SYMBOLS


def test_empty_stream_is_flush_only():
    data = encode_symbols([], CdfTable([0, TOTAL]))
    assert len(data) == FLUSH_BYTES
    assert decode_symbols(data, 0, CdfTable([0, TOTAL])).size == 0


@settings(max_examples=60)
@given(
    st.integers(2, 300),
    st.integers(1, 400),
    st.integers(-300, 300),
    st.integers(0, 2 ** 31 - 1),
)
def test_round_trip_single_table(nsyms, count, offset, seed):
    rng = np.random.default_rng(seed)
    table = random_table(rng, nsyms, offset)
    values = rng.integers(offset, offset + nsyms, size=count)
    data = encode_symbols(values, table)
    got = decode_symbols(data, count, table)
    np.testing.assert_array_equal(got, values)


@settings(max_examples=30)
@given(st.integers(1, 120), st.integers(0, 2 ** 31 - 1))
def test_round_trip_per_symbol_contexts(count, seed):
    rng = np.random.default_rng(seed)
    tables = [random_table(rng, int(rng.integers(2, 40)), int(rng.integers(-5, 5))) for _ in range(count)]
    values = [int(rng.integers(t.offset, t.offset + t.nsyms)) for t in tables]
    data = encode_symbols(values, tables)
    got = decode_symbols(data, count, tables)
    assert got.tolist() == values


def test_extreme_symbols_round_trip():
    table = CdfTable([0, 1, 2, TOTAL - 1, TOTAL], offset=-2)
    values = [-2, 1, -2, 1, -1, 0, 1, -2]  # lowest/highest and freq-1 symbols
    data = encode_symbols(values, table)
    assert decode_symbols(data, len(values), table).tolist() == values


def test_truncated_stream_raises():
    rng = np.random.default_rng(0)
    table = random_table(rng, 17)
    values = rng.integers(0, 17, size=500)
    data = encode_symbols(values, table)
    with pytest.raises(BitstreamError):
        decode_symbols(data[:-1], 500, table)
    with pytest.raises(BitstreamError):
        decode_symbols(b"", 1, table)


def test_decoding_more_symbols_than_encoded_raises():
    table = CdfTable([0, 32768, TOTAL])
    data = encode_symbols([0, 1, 0], table)
    with pytest.raises(BitstreamError):
        decode_symbols(data, 4000, table)


def test_encode_rejects_out_of_alphabet():
    table = CdfTable([0, 32768, TOTAL], offset=5)
    enc = RangeEncoder()
    with pytest.raises(ValueError):
        enc.encode(table, 7)
    with pytest.raises(ValueError):
        enc.encode(table, 4)


def test_uniform_256_rate_is_eight_bits():
    cum = list(range(0, TOTAL + 1, TOTAL // 256))
    table = CdfTable(cum, offset=0)
    rng = np.random.default_rng(42)
    values = rng.integers(0, 256, size=50_000)
    data = encode_symbols(values, table)
    bits_per_symbol = 8.0 * len(data) / values.size
    assert abs(bits_per_symbol - 8.0) < 0.01
    np.testing.assert_array_equal(decode_symbols(data, values.size, table), values)


def test_rate_tracks_table_entropy():
    """Actual bytes vs sum of -log2(table mass) of the coded symbols."""
    rng = np.random.default_rng(9)
    table = CdfTable([0, 40000, 60000, 65000, TOTAL], offset=0)
    mass = table.mass()
    values = rng.choice(4, size=20_000, p=mass)
    data = encode_symbols(values, table)
    est_bits = float(-np.log2(mass[values]).sum())
    actual_bits = 8.0 * len(data)
    assert abs(actual_bits - est_bits) <= 0.01 * est_bits + 64 * 8


def test_decoder_is_deterministic():
    rng = np.random.default_rng(3)
    table = random_table(rng, 11)
    values = rng.integers(0, 11, size=257)
    data = encode_symbols(values, table)
    a = decode_symbols(data, 257, table)
    b = decode_symbols(data, 257, table)
    np.testing.assert_array_equal(a, b)


def test_context_count_mismatch_raises():
    table = CdfTable([0, TOTAL])
    with pytest.raises(ValueError):
        encode_symbols([0, 0], [table])
    data = encode_symbols([0, 0], table)
    with pytest.raises(ValueError):
        decode_symbols(data, 2, [table])
