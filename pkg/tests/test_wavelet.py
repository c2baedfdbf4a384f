import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from swarmdiff.forecast.wavelet import (
    SeriesTooShortError,
    SwarmSeries,
    WaveletDecomposition,
    build_input_matrix,
    causal_input_matrix,
    wavelet_decompose,
    wavelet_reconstruct,
)

LOWPASS = {-2: -1 / 8, -1: 1 / 4, 0: 3 / 4, 1: 1 / 4, 2: -1 / 8}
HIGHPASS = {-1: -1 / 2, 0: 1.0, 1: -1 / 2}


def _dilated_filter(x, taps, s):
    """Circular convolution with filter taps spread ``s`` samples apart."""
    return sum(w * np.roll(x, -m * s) for m, w in taps.items())


def _oracle(x, levels):
    a, details = np.asarray(x, float), []
    for i in range(levels):
        s = 2**i
        details.append(_dilated_filter(a, HIGHPASS, s))
        a = _dilated_filter(a, LOWPASS, s)
    return details, a


def test_constant_series():
    dec = wavelet_decompose(np.full(32, 3.5), 3)
    for d in dec.details:
        np.testing.assert_allclose(d, 0, atol=1e-15)
    np.testing.assert_allclose(dec.approximation, 3.5)


def test_linear_series_has_no_interior_detail():
    x = np.arange(64, dtype=float)
    dec = wavelet_decompose(x, 2)
    np.testing.assert_allclose(dec.details[0][1:-1], 0, atol=1e-12)


def test_impulse_response_periodic():
    x = np.zeros(16)
    x[8] = 1.0
    dec = wavelet_decompose(x, 1, boundary="periodic")
    expected_d = np.zeros(16)
    expected_d[[7, 8, 9]] = [-0.5, 1.0, -0.5]
    np.testing.assert_allclose(dec.details[0], expected_d)
    expected_a = np.zeros(16)
    expected_a[6:11] = [-1 / 8, 1 / 4, 3 / 4, 1 / 4, -1 / 8]
    np.testing.assert_allclose(dec.approximation, expected_a)


@pytest.mark.parametrize("levels", [1, 2, 3, 4])
def test_matches_direct_convolution(levels):
    x = np.random.default_rng(levels).normal(size=128)
    dec = wavelet_decompose(x, levels, boundary="periodic")
    details, approx = _oracle(x, levels)
    for got, want in zip(dec.details, details):
        np.testing.assert_allclose(got, want, atol=1e-12)
    np.testing.assert_allclose(dec.approximation, approx, atol=1e-12)


def test_input_matrix_row_spot_check():
    x = np.random.default_rng(5).normal(size=64)
    dec = wavelet_decompose(x, 3, boundary="periodic")
    details, approx = _oracle(x, 3)
    m = build_input_matrix(dec)
    assert m.shape == (64, 4)
    np.testing.assert_allclose(m[17], [details[0][17], details[1][17], details[2][17], approx[17]], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from([16, 33, 64, 100]),
    st.integers(1, 4),
    st.sampled_from(["symmetric", "periodic"]),
    st.integers(0, 2**32 - 1),
)
def test_round_trip(n, levels, boundary, seed):
    x = np.random.default_rng(seed).normal(size=n) * 10
    back = wavelet_reconstruct(wavelet_decompose(x, levels, boundary))
    np.testing.assert_allclose(back, x, rtol=1e-12, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(-100, 100)), st.integers(1, 3), st.integers(1, 20))
def test_shift_covariance_periodic(x, levels, shift):
    a = build_input_matrix(wavelet_decompose(np.roll(x, shift), levels, "periodic"))
    b = np.roll(build_input_matrix(wavelet_decompose(x, levels, "periodic")), shift, axis=0)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_shift_covariance_symmetric_interior():
    x = np.random.default_rng(2).normal(size=200)
    levels, shift = 3, 5
    reach = 3 * (2**levels)  # combined filter support
    a = build_input_matrix(wavelet_decompose(x[shift:], levels))
    b = build_input_matrix(wavelet_decompose(x, levels))[shift:]
    np.testing.assert_allclose(a[reach:-reach], b[reach:-reach], atol=1e-12)


def test_too_short_series():
    with pytest.raises(SeriesTooShortError):
        wavelet_decompose(np.ones(7), 3)
    with pytest.raises(ValueError):
        wavelet_decompose(np.ones(8), 0)
    with pytest.raises(ValueError):
        wavelet_decompose(np.ones((4, 4)), 1)


def test_reconstruct_rejects_mismatched_levels():
    dec = WaveletDecomposition((np.zeros(8), np.zeros(7)), np.zeros(8))
    with pytest.raises(ValueError):
        wavelet_reconstruct(dec)


def test_swarm_series_accepted():
    s = SwarmSeries(np.arange(16), kind="requests")
    assert len(wavelet_decompose(s, 2)) == 16
    with pytest.raises(ValueError):
        SwarmSeries(np.arange(4), kind="prices")


def test_causal_rows_only_use_the_past():
    x = np.random.default_rng(0).normal(size=100)
    levels = 2
    rows = causal_input_matrix(x, levels)
    assert rows.shape == (100, levels + 1)
    assert np.isnan(rows[: 2**levels - 1]).all()
    assert not np.isnan(rows[2**levels - 1 :]).any()
    window = 4 * 2**levels
    t = 60
    last = build_input_matrix(wavelet_decompose(x[t - window + 1 : t + 1], levels))[-1]
    np.testing.assert_allclose(rows[t], last)
    y = x.copy()
    y[t + 1 :] += 50.0
    np.testing.assert_array_equal(causal_input_matrix(y, levels)[: t + 1], rows[: t + 1])
