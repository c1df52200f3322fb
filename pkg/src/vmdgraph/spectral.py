"""Real-signal utilities used by the mode decomposition.

Mirroring, discrete Fourier transforms in full and half (non-negative
frequency) layouts, and the truncation that undoes mirroring. Everything is
computed in double precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

FULL = "full"
HALF = "half"


class InvalidInputError(ValueError):
    """Input violates an operation's precondition."""


class SpectrumInconsistencyError(ValueError):
    """A spectrum does not have the symmetry its layout claims."""


@dataclass
class TimeSeries:
    """One node's uniformly sampled flow signal."""

    values: np.ndarray
    node_id: str = "0"
    start_time: datetime | None = None
    step: timedelta = field(default_factory=lambda: timedelta(minutes=15))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise InvalidInputError("time series values must be one-dimensional")

    def __len__(self):
        return self.values.shape[0]

    def timestamps(self) -> list[datetime]:
        start = self.start_time or datetime(1970, 1, 1)
        return [start + i * self.step for i in range(len(self))]


@dataclass
class Spectrum:
    bins: np.ndarray
    sample_count: int
    layout: str = FULL

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.complex128)
        if self.layout not in (FULL, HALF):
            raise InvalidInputError(f"unknown spectrum layout {self.layout!r}")
        expected = self.sample_count if self.layout == FULL else self.sample_count // 2 + 1
        if self.bins.shape[0] != expected:
            raise InvalidInputError(
                f"{self.layout} spectrum of {self.sample_count} samples needs "
                f"{expected} bins, got {self.bins.shape[0]}"
            )

    def frequencies(self) -> np.ndarray:
        """Normalized frequency (cycles per sample) of each bin."""
        m = np.arange(self.bins.shape[0])
        return m / self.sample_count


def _values(s) -> np.ndarray:
    if isinstance(s, TimeSeries):
        return s.values
    return np.asarray(s, dtype=np.float64)


def mirror_extend(s) -> np.ndarray:
    """Pad ``s`` with mirrored copies of its halves on both ends.

    The left pad is the reversed first ``L // 2`` samples and the right pad the
    reversed last ``L - L // 2`` samples, so the result has length ``2L`` and
    the original occupies ``[L // 2, L // 2 + L)``.
    """
    x = _values(s)
    n = x.shape[0]
    if n < 2:
        raise InvalidInputError(f"mirror_extend needs at least 2 samples, got {n}")
    half = n // 2
    return np.concatenate([x[:half][::-1], x, x[half:][::-1]])


def truncate_center(x, n: int) -> np.ndarray:
    """Inverse of :func:`mirror_extend`: keep the central ``n`` samples."""
    x = np.asarray(x)
    if x.shape[-1] != 2 * n:
        raise InvalidInputError(
            f"truncate_center expects length {2 * n}, got {x.shape[-1]}"
        )
    start = n // 2
    return x[..., start:start + n]


def forward_dft(x) -> Spectrum:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise InvalidInputError("forward_dft needs a non-empty 1-D sequence")
    return Spectrum(np.fft.fft(x), x.shape[0], FULL)


def is_hermitian(sp: Spectrum, rtol: float = 1e-10) -> bool:
    if sp.layout != FULL:
        return True
    b = sp.bins
    mirrored = np.conj(np.roll(b[::-1], 1))
    scale = max(np.max(np.abs(b)), 1e-300)
    return bool(np.max(np.abs(b - mirrored)) <= rtol * scale)


def to_half_spectrum(sp: Spectrum) -> Spectrum:
    """Drop the negative-frequency bins of a real signal's spectrum."""
    if sp.layout == HALF:
        return sp
    if not is_hermitian(sp):
        raise SpectrumInconsistencyError("full spectrum is not Hermitian-symmetric")
    n = sp.sample_count
    return Spectrum(sp.bins[: n // 2 + 1].copy(), n, HALF)


def to_full_spectrum(sp: Spectrum) -> Spectrum:
    """Hermitian completion of a half spectrum."""
    if sp.layout == FULL:
        return sp
    n = sp.sample_count
    full = np.empty(n, dtype=np.complex128)
    h = sp.bins
    full[: h.shape[0]] = h
    # bins n//2+1 .. n-1 mirror bins (n+1)//2-1 .. 1
    tail = n - h.shape[0]
    if tail:
        full[h.shape[0]:] = np.conj(h[1:tail + 1][::-1])
    return Spectrum(full, n, FULL)


def inverse_dft_real(sp: Spectrum) -> np.ndarray:
    """Inverse DFT returning the real part.

    Half spectra are completed Hermitian-symmetrically first, which discards
    any imaginary part of the DC (and, for even length, Nyquist) bin.
    """
    if sp.layout == HALF:
        return np.fft.irfft(sp.bins, n=sp.sample_count)
    return np.fft.ifft(sp.bins).real
