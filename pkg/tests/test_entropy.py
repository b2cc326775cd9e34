"""Entropy model tests: quantizer, bin masses, table quantization, RD loss."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from ssmcodec.entropy import (
    LAMBDAS,
    SCALE_LEVELS,
    SCALE_MAX,
    SIGMA_MIN,
    SYMBOL_MAX,
    SYMBOL_MIN,
    FactorizedModel,
    estimate_rate,
    factorized_bin_mass,
    factorized_cdf_tables,
    factorized_pmf,
    gaussian_bin_mass,
    gaussian_cdf_tables,
    pmf_to_cdf_table,
    quantize,
    rd_loss,
    round_half_away_from_zero,
    scale_table,
    sigma_to_scale_index,
)
from ssmcodec.rangecoder import TOTAL

# Phi(1/2) - Phi(-1/2): mass of the centered unit bin under a standard normal.
CENTER_BIN_MASS = 0.38292492254802624


def make_factorized(rng, channels=3):
    dims = (1, 3, 3, 3, 1)
    h = tuple(
        rng.uniform(-0.5, 0.5, size=(channels, do, di)).astype(np.float64)
        for do, di in zip(dims[1:], dims[:-1])
    )
    b = tuple(rng.uniform(-0.5, 0.5, size=(channels, do)) for do in dims[1:])
    a = tuple(rng.uniform(-0.1, 0.1, size=(channels, dims[k + 1])) for k in range(3))
    return FactorizedModel(h=h, b=b, a=a)


# ---------------------------------------------------------------------------
# Quantizer


def test_round_half_away_cases():
    x = np.array([0.5, -0.5, 1.5, -1.5, 2.5, -2.5, 0.49, -0.49, 2.0, 0.0])
    want = np.array([1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 0.0, 0.0, 2.0, 0.0])
    np.testing.assert_array_equal(round_half_away_from_zero(x), want)


def test_round_half_away_preserves_dtype():
    out = round_half_away_from_zero(np.array([1.2], dtype=np.float32))
    assert out.dtype == np.float32


@settings(max_examples=100)
@given(
    st.floats(-300.0, 300.0, width=32),
    st.floats(-10.0, 10.0, width=32),
)
def test_quantize_idempotent_and_integer_residual(v, mu):
    v = np.float32(v)
    mu = np.float32(mu)
    q = quantize(v, mu)
    assert np.array_equal(quantize(q, mu), q)
    k = np.float64(q) - np.float64(mu)
    assert abs(k - round(k)) < 1e-3
    assert abs(np.float64(q) - np.float64(v)) <= 0.5 + 1e-3


def test_quantize_rounds_relative_to_mean():
    np.testing.assert_array_equal(
        quantize(np.array([1.4, 1.6]), np.array([1.0, 1.0])), [1.0, 2.0]
    )
    # ties break away from zero in the mean-removed variable
    assert quantize(np.array([1.5]), np.array([1.0]))[0] == 2.0
    assert quantize(np.array([0.5]), np.array([1.0]))[0] == 0.0


# ---------------------------------------------------------------------------
# Gaussian bin masses


def test_center_bin_mass_frozen_value():
    got = float(gaussian_bin_mass(0.0, 0.0, 1.0))
    assert abs(got - CENTER_BIN_MASS) < 1e-9


def test_bin_masses_sum_to_one():
    ks = np.arange(-20, 21, dtype=np.float64)
    for sigma in (0.11, 0.5, 1.0, 3.0):
        total = float(gaussian_bin_mass(ks, 0.0, sigma).sum())
        assert abs(total - 1.0) < 1e-9, sigma


def test_bin_mass_mean_shift():
    a = gaussian_bin_mass(np.arange(-5, 6), 0.0, 0.7)
    b = gaussian_bin_mass(np.arange(-5, 6) + 3.0, 3.0, 0.7)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_bin_mass_rejects_bad_sigma():
    with pytest.raises(ValueError):
        gaussian_bin_mass(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        gaussian_bin_mass(0.0, 0.0, -1.0)


# ---------------------------------------------------------------------------
# Scale grid


def test_scale_table_shape_and_endpoints():
    t = scale_table()
    assert t.shape == (SCALE_LEVELS,) and SCALE_LEVELS == 64
    np.testing.assert_allclose(t[0], SIGMA_MIN, rtol=1e-12)
    np.testing.assert_allclose(t[-1], SCALE_MAX, rtol=1e-12)


def test_scale_table_is_geometric():
    t = scale_table()
    ratios = t[1:] / t[:-1]
    expected = (SCALE_MAX / SIGMA_MIN) ** (1.0 / (SCALE_LEVELS - 1))
    np.testing.assert_allclose(ratios, expected, rtol=1e-9)


def test_sigma_to_scale_index_boundaries():
    t = scale_table()
    assert sigma_to_scale_index(0.05) == 0
    assert sigma_to_scale_index(SIGMA_MIN) == 0
    assert sigma_to_scale_index(1000.0) == SCALE_LEVELS - 1
    # exactly on a grid point stays there; just above moves up one
    assert sigma_to_scale_index(t[10]) == 10
    assert sigma_to_scale_index(t[10] * 1.0001) == 11
    # chosen scale always >= sigma (conservative coding) except past the top
    sig = np.linspace(0.05, 250.0, 473)
    idx = sigma_to_scale_index(sig)
    assert np.all(t[idx] >= sig - 1e-12)
    assert idx.dtype == np.int32


# ---------------------------------------------------------------------------
# PMF quantization


def test_pmf_quantization_hand_cases():
    assert pmf_to_cdf_table(np.array([0.5, 0.25, 0.25]), 0).cum == [0, 32768, 49152, 65536]
    thirds = np.full(3, 1.0 / 3.0)
    assert pmf_to_cdf_table(thirds, 0).cum == [0, 21846, 43691, 65536]
    # zero-probability symbols still get frequency 1
    assert pmf_to_cdf_table(np.array([1.0, 0.0, 0.0]), 0).cum == [0, 65534, 65535, 65536]


@settings(max_examples=60)
@given(st.integers(1, 600), st.integers(0, 2 ** 31 - 1), st.integers(0, 3))
def test_pmf_quantization_properties(nsyms, seed, nzeros):
    rng = np.random.default_rng(seed)
    pmf = rng.uniform(0.0, 1.0, size=nsyms)
    pmf[rng.choice(nsyms, size=min(nzeros, nsyms - 1), replace=False)] = 0.0
    if pmf.sum() == 0:
        pmf[0] = 1.0
    pmf = pmf / pmf.sum()
    table = pmf_to_cdf_table(pmf, offset=-5)
    freq = np.diff(table.cum)
    assert freq.size == nsyms
    assert int(table.cum[-1]) == TOTAL and int(table.cum[0]) == 0
    assert np.all(freq >= 1)
    # quantized masses stay close to the input pmf
    assert np.max(np.abs(freq / TOTAL - pmf)) <= (nsyms + 1) / TOTAL


def test_pmf_quantization_validation():
    with pytest.raises(ValueError):
        pmf_to_cdf_table(np.array([-0.1, 1.1]), 0)
    with pytest.raises(ValueError):
        pmf_to_cdf_table(np.array([]), 0)
    with pytest.raises(ValueError):
        pmf_to_cdf_table(np.ones((2, 2)), 0)


# ---------------------------------------------------------------------------
# Quantized Gaussian tables


def test_gaussian_tables_cover_alphabet():
    tables = gaussian_cdf_tables()
    assert len(tables) == SCALE_LEVELS
    for tb in tables[:: 9]:
        assert tb.nsyms == SYMBOL_MAX - SYMBOL_MIN + 1 == 511
        assert tb.offset == SYMBOL_MIN
        assert int(tb.cum[-1]) == TOTAL


def test_gaussian_table_center_mass_matches_density():
    tables = gaussian_cdf_tables()
    t = scale_table()
    i = int(sigma_to_scale_index(1.0))
    got = tables[i].mass()[0 - SYMBOL_MIN]
    want = float(gaussian_bin_mass(0.0, 0.0, t[i]))
    assert abs(got - want) < 2.0 / TOTAL


def test_gaussian_table_tails_folded():
    """Edge symbols absorb all tail mass: totals hit TOTAL with freq >= 1."""
    for tb in gaussian_cdf_tables():
        freq = np.diff(tb.cum)
        assert freq.min() >= 1
        assert int(freq.sum()) == TOTAL


# ---------------------------------------------------------------------------
# Factorized prior


def test_factorized_model_shape_validation():
    rng = np.random.default_rng(0)
    m = make_factorized(rng)
    bad_h = (m.h[0][:, :2, :],) + m.h[1:]
    with pytest.raises(ValueError):
        FactorizedModel(h=bad_h, b=m.b, a=m.a)
    with pytest.raises(ValueError):
        FactorizedModel(h=m.h[:3], b=m.b[:3], a=m.a)


def test_factorized_cdf_monotone_and_bounded():
    rng = np.random.default_rng(1)
    model = make_factorized(rng, channels=4)
    v = np.linspace(-260.0, 260.0, 2001)
    for c in range(model.channels):
        out = model.cdf(v, c)
        assert np.all(np.diff(out) >= 0.0)
        # sigmoid output; saturates to exactly 0/1 far outside the alphabet
        assert np.all((out >= 0.0) & (out <= 1.0))
        mid = model.cdf(np.array([-1.0, 0.0, 1.0]), c)
        assert np.all((mid > 0.0) & (mid < 1.0))


def test_factorized_pmf_normalized_and_nonnegative():
    rng = np.random.default_rng(2)
    model = make_factorized(rng, channels=5)
    pmf = factorized_pmf(model)
    assert pmf.shape == (5, SYMBOL_MAX - SYMBOL_MIN + 1)
    assert np.all(pmf >= 0.0)
    np.testing.assert_allclose(pmf.sum(axis=1), 1.0, rtol=0, atol=1e-9)


def test_factorized_bin_mass_matches_cdf_difference():
    rng = np.random.default_rng(3)
    model = make_factorized(rng)
    ks = np.array([-3, -1, 0, 2, 7])
    got = factorized_bin_mass(ks, 1, model)
    want = model.cdf(ks + 0.5, 1) - model.cdf(ks - 0.5, 1)
    np.testing.assert_array_equal(got, want)


def test_factorized_tables_match_pmf():
    rng = np.random.default_rng(4)
    model = make_factorized(rng, channels=2)
    tables = factorized_cdf_tables(model)
    pmf = factorized_pmf(model)
    assert len(tables) == 2
    for c, tb in enumerate(tables):
        assert tb.offset == SYMBOL_MIN
        assert np.max(np.abs(tb.mass() - pmf[c])) <= (pmf.shape[1] + 1) / TOTAL


def test_factorized_cdf_input_validation():
    rng = np.random.default_rng(5)
    model = make_factorized(rng)
    with pytest.raises(ValueError):
        model.cdf(np.zeros((2, 4)))  # wrong channel count
    with pytest.raises(ValueError):
        model.cdf(np.zeros(4), channel=9)


# ---------------------------------------------------------------------------
# Rate estimate and RD objective


def test_estimate_rate_closed_form():
    bits = estimate_rate(np.array([0, 1]), np.array([0.5, 0.25]))
    assert abs(bits - 3.0) < 1e-12
    assert estimate_rate(np.array([]), np.array([])) == 0.0


def test_estimate_rate_validation():
    with pytest.raises(ValueError):
        estimate_rate(np.array([0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        estimate_rate(np.array([0, 1]), np.array([0.5, 0.0]))


def test_rd_loss_closed_form():
    x = np.zeros((4, 5, 3))
    x_hat = np.full((4, 5, 3), 0.1)
    got = rd_loss(x, x_hat, bits=40.0, lam=0.01)
    want = 0.01 * 255.0 ** 2 * 0.01 + 40.0 / 20.0
    assert abs(got - want) < 1e-9


def test_rd_loss_validation():
    x = np.zeros((2, 2, 3))
    with pytest.raises(ValueError):
        rd_loss(x, x, 0.0, lam=0.0)
    with pytest.raises(ValueError):
        rd_loss(x, np.zeros((2, 3, 3)), 0.0, lam=0.1)


def test_lambda_grid_frozen():
    assert LAMBDAS == (0.0035, 0.0067, 0.013, 0.025, 0.05)
    assert all(b > a for a, b in zip(LAMBDAS, LAMBDAS[1:]))


def test_symbol_alphabet_constants():
    assert SYMBOL_MIN == -255 and SYMBOL_MAX == 255
    assert SIGMA_MIN == 0.11


def test_reference_cdf_helper_consistency():
    """ndtr agrees with the error-function identity Phi(x) = (1+erf(x/sqrt(2)))/2."""
    from math import erf, sqrt

    for x in (-2.0, -0.5, 0.0, 0.5, 2.0):
        assert abs(float(ndtr(x)) - 0.5 * (1.0 + erf(x / sqrt(2.0)))) < 1e-15
