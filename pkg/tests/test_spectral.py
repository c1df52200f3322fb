import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import naive_dft, naive_idft, naive_mirror
from vmdgraph.spectral import (
    FULL, HALF, InvalidInputError, Spectrum, SpectrumInconsistencyError, TimeSeries,
    forward_dft, inverse_dft_real, is_hermitian, mirror_extend, to_full_spectrum,
    to_half_spectrum, truncate_center,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


# mirror extension ----------------------------------------------------------

def test_mirror_constant():
    assert np.array_equal(mirror_extend([5.0] * 4), [5.0] * 8)


def test_mirror_hand_example():
    assert mirror_extend([1, 2, 3, 4]).tolist() == [2, 1, 1, 2, 3, 4, 4, 3]


def test_mirror_accepts_timeseries():
    ts = TimeSeries(np.array([1.0, 2.0, 3.0]))
    assert mirror_extend(ts).tolist() == [1, 1, 2, 3, 3, 2]


def test_mirror_too_short():
    with pytest.raises(InvalidInputError):
        mirror_extend([1.0])


@given(arrays(np.float64, st.integers(2, 200), elements=finite))
def test_mirror_length_and_oracle(x):
    ext = mirror_extend(x)
    assert ext.shape[0] == 2 * x.shape[0]
    assert np.array_equal(ext, naive_mirror(x))


@given(arrays(np.float64, st.integers(2, 200), elements=finite))
def test_mirror_symmetric_about_boundaries(x):
    L = x.shape[0]
    h = L // 2
    ext = mirror_extend(x)
    # left pad reflects the first samples, right pad the last ones
    for i in range(h):
        assert ext[h - 1 - i] == ext[h + i]
    for i in range(L - h):
        assert ext[h + L + i] == ext[h + L - 1 - i]


def test_truncate_hand_examples():
    assert truncate_center(np.array([2, 1, 1, 2, 3, 4, 4, 3]), 4).tolist() == [1, 2, 3, 4]
    assert truncate_center(mirror_extend([1, 2, 3, 4]), 4).tolist() == [1, 2, 3, 4]
    assert np.array_equal(truncate_center(np.full(10, 7.0), 5), np.full(5, 7.0))


def test_truncate_wrong_length():
    with pytest.raises(InvalidInputError):
        truncate_center(np.zeros(7), 4)


@given(arrays(np.float64, st.integers(2, 200), elements=finite))
def test_truncate_inverts_mirror(x):
    assert np.array_equal(truncate_center(mirror_extend(x), x.shape[0]), x)


# forward transform ---------------------------------------------------------

def test_dft_zeros():
    assert np.all(forward_dft(np.zeros(16)).bins == 0)


def test_dft_impulse():
    x = np.zeros(8)
    x[0] = 1.0
    assert np.allclose(forward_dft(x).bins, np.ones(8), atol=1e-15)


def test_dft_cosine_bins():
    t = np.arange(64)
    x = np.cos(2 * np.pi * 3 * t / 64)
    mag = np.abs(forward_dft(x).bins)
    assert mag[3] == pytest.approx(32, abs=1e-10)
    assert mag[61] == pytest.approx(32, abs=1e-10)
    rest = np.delete(mag, [3, 61])
    assert rest.max() < 1e-10
    assert np.allclose(forward_dft(x).bins, naive_dft(x), atol=1e-9)


def test_dft_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        forward_dft(np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        forward_dft(np.zeros(0))


@pytest.mark.parametrize("L", [8, 64, 500])
def test_parseval(L):
    rng = np.random.default_rng(L)
    for _ in range(20):
        x = rng.standard_normal(L) * rng.uniform(0.1, 100)
        bins = forward_dft(x).bins
        lhs = np.sum(x ** 2)
        rhs = np.sum(np.abs(bins) ** 2) / L
        assert abs(lhs - rhs) <= 1e-8 * lhs


@given(arrays(np.float64, st.integers(1, 300), elements=finite))
def test_round_trip(x):
    back = inverse_dft_real(forward_dft(x))
    scale = max(np.max(np.abs(x)), 1.0)
    assert np.max(np.abs(back - x)) <= 1e-10 * scale


# half spectrum -------------------------------------------------------------

def test_half_spectrum_size():
    sp = to_half_spectrum(forward_dft(np.arange(8.0)))
    assert sp.layout == HALF and sp.bins.shape[0] == 5


def test_half_spectrum_rejects_non_hermitian():
    bins = np.arange(8) * (1 + 1j)
    with pytest.raises(SpectrumInconsistencyError):
        to_half_spectrum(Spectrum(bins, 8, FULL))


@given(arrays(np.float64, st.integers(1, 200), elements=finite))
def test_half_full_lossless(x):
    full = forward_dft(x)
    assert is_hermitian(full)
    back = to_full_spectrum(to_half_spectrum(full))
    scale = max(np.max(np.abs(full.bins)), 1.0)
    assert np.max(np.abs(back.bins - full.bins)) <= 1e-10 * scale


def test_half_spectrum_two_tones():
    t = np.arange(128)
    x = np.cos(2 * np.pi * 5 * t / 128) + 0.5 * np.sin(2 * np.pi * 20 * t / 128)
    half = to_half_spectrum(forward_dft(x))
    oracle = naive_dft(x)[:65]
    assert np.allclose(half.bins, oracle, atol=1e-9)
    top = np.argsort(np.abs(half.bins))[-2:]
    assert sorted(top.tolist()) == [5, 20]
    assert half.frequencies()[20] == pytest.approx(20 / 128)


def test_spectrum_bin_count_checked():
    with pytest.raises(InvalidInputError):
        Spectrum(np.zeros(4), 8, HALF)
    with pytest.raises(InvalidInputError):
        Spectrum(np.zeros(8), 8, "other")


# inverse transform ---------------------------------------------------------

def test_inverse_zeros():
    assert np.all(inverse_dft_real(Spectrum(np.zeros(9), 16, HALF)) == 0)


def test_inverse_single_bin():
    L = 16
    bins = np.zeros(L, dtype=complex)
    bins[2] = 1.0
    got = inverse_dft_real(Spectrum(bins, L, FULL))
    t = np.arange(L)
    assert np.allclose(got, np.cos(2 * np.pi * 2 * t / L) / L, atol=1e-15)
    assert np.allclose(got, naive_idft(bins).real, atol=1e-14)


@pytest.mark.parametrize("L", [7, 8])
def test_inverse_half_matches_full(L):
    rng = np.random.default_rng(L)
    x = rng.standard_normal(L)
    full = forward_dft(x)
    a = inverse_dft_real(full)
    b = inverse_dft_real(to_half_spectrum(full))
    assert np.allclose(a, b, atol=1e-12)
    assert np.allclose(a, naive_idft(full.bins).real, atol=1e-12)


@settings(max_examples=30)
@given(st.integers(2, 64), st.integers(0, 2 ** 31))
def test_dft_matches_naive_oracle(L, seed):
    x = np.random.default_rng(seed).standard_normal(L)
    assert np.allclose(forward_dft(x).bins, naive_dft(x), atol=1e-9)
