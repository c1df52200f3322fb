"""Variational mode decomposition solved by ADMM in the half spectrum.

The signal is mirrored, transformed, and only non-negative frequencies are
kept. Each sweep updates every mode spectrum in Gauss-Seidel order (modes
already updated in the current sweep are used for lower indices), then its
center frequency, then takes one dual-ascent step on the multiplier.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .spectral import (
    HALF,
    InvalidInputError,
    Spectrum,
    TimeSeries,
    forward_dft,
    inverse_dft_real,
    mirror_extend,
    to_half_spectrum,
    truncate_center,
)

log = logging.getLogger(__name__)

OMEGA_INITS = ("uniform", "zero", "random")
# Power below this is treated as an empty mode.
POWER_FLOOR = 1e-30


class InvalidConfigError(ValueError):
    """Configuration values are out of range or inconsistent."""


@dataclass(frozen=True)
class VmdConfig:
    """Decomposition settings.

    Parameters
    ----------
    num_modes : int
        Number of modes ``K``.
    alpha : float
        Bandwidth penalty. Larger values give narrower modes.
    tau : float
        Dual-ascent step. ``0`` disables the multiplier so the reconstruction
        constraint is only enforced by the quadratic penalty.
    epsilon : float
        Tolerance on the summed relative squared change of the mode spectra.
    max_iter : int
        Sweep cap.
    omega_init : {"uniform", "zero", "random"}
        Initial center frequencies. ``random`` draws from ``seed``.
    """

    num_modes: int = 3
    alpha: float = 2000.0
    tau: float = 0.0
    epsilon: float = 1e-7
    max_iter: int = 500
    omega_init: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if int(self.num_modes) != self.num_modes or self.num_modes < 1:
            raise InvalidConfigError(f"num_modes must be a positive integer, got {self.num_modes}")
        if not self.alpha > 0:
            raise InvalidConfigError(f"alpha must be > 0, got {self.alpha}")
        if not self.tau >= 0:
            raise InvalidConfigError(f"tau must be >= 0, got {self.tau}")
        if not self.epsilon > 0:
            raise InvalidConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.omega_init not in OMEGA_INITS:
            raise InvalidConfigError(
                f"omega_init must be one of {OMEGA_INITS}, got {self.omega_init!r}"
            )

    def replace(self, **changes) -> "VmdConfig":
        return VmdConfig(**{**asdict(self), **changes})

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class ModeSet:
    """Result of one decomposition.

    ``modes`` has shape ``(K, L)``; rows are ordered by ascending center
    frequency, and ``omegas`` are in cycles per sample of the original signal.
    """

    modes: np.ndarray
    omegas: np.ndarray
    iterations_used: int
    converged: bool
    reconstruction_residual: float
    node_id: str = "0"

    @property
    def num_modes(self) -> int:
        return self.modes.shape[0]

    def reconstruction(self) -> np.ndarray:
        return self.modes.sum(axis=0)


def initial_omegas(cfg: VmdConfig, sample_count: int) -> np.ndarray:
    K = cfg.num_modes
    if cfg.omega_init == "uniform":
        return 0.5 * np.arange(K) / K
    if cfg.omega_init == "zero":
        return np.zeros(K)
    # log-uniform between the lowest resolvable frequency and Nyquist
    fs = 1.0 / sample_count
    rng = np.random.default_rng(cfg.seed)
    return np.sort(np.exp(np.log(fs) + (np.log(0.5) - np.log(fs)) * rng.random(K)))


def update_mode(k, f_hat, all_modes_hat, lambda_hat, omegas, alpha, freqs=None,
                others_sum=None):
    """Wiener-filter update of mode ``k`` against the current residual.

    ``all_modes_hat`` must already hold this sweep's values for modes below
    ``k`` and the previous sweep's values for modes above it. ``others_sum``
    may be passed to skip recomputing the sum over ``i != k``.
    """
    f_hat = np.asarray(f_hat)
    if freqs is None:
        freqs = np.arange(f_hat.shape[0]) / (2 * (f_hat.shape[0] - 1))
    if others_sum is None:
        others_sum = all_modes_hat.sum(axis=0) - all_modes_hat[k]
    numerator = f_hat - others_sum + lambda_hat / 2
    return numerator / (1.0 + 2.0 * alpha * (freqs - omegas[k]) ** 2)


def update_center_frequency(u_hat_k, freqs=None, previous=None):
    """Power-weighted mean frequency of a half spectrum.

    Returns ``previous`` unchanged when the mode carries (almost) no power.
    """
    u_hat_k = np.asarray(u_hat_k)
    if freqs is None:
        freqs = np.arange(u_hat_k.shape[0]) / (2 * (u_hat_k.shape[0] - 1))
    power = u_hat_k.real ** 2 + u_hat_k.imag ** 2
    total = power.sum()
    if total < POWER_FLOOR:
        return previous
    return float(np.dot(freqs, power) / total)


def update_multiplier(lambda_hat, f_hat, modes_hat, tau):
    if tau == 0:
        return np.array(lambda_hat, copy=True)
    return lambda_hat + tau * (f_hat - modes_hat.sum(axis=0))


def convergence_metric(prev_modes_hat, modes_hat) -> float:
    """Sum over modes of ``||new - old||^2 / ||old||^2``.

    Modes whose previous power is below ``POWER_FLOOR`` contribute nothing.
    """
    diff = modes_hat - prev_modes_hat
    num = (diff.real ** 2 + diff.imag ** 2).sum(axis=-1)
    den = (prev_modes_hat.real ** 2 + prev_modes_hat.imag ** 2).sum(axis=-1)
    keep = den >= POWER_FLOOR
    return float(np.sum(num[keep] / den[keep]))


def decompose(s, cfg: VmdConfig, *, freeze_omegas: bool = False) -> ModeSet:
    """Decompose one series into ``cfg.num_modes`` band-limited modes.

    ``freeze_omegas`` keeps the initial center frequencies fixed, which makes
    the whole iteration linear in the input.
    """
    ts = s if isinstance(s, TimeSeries) else TimeSeries(np.asarray(s, dtype=np.float64))
    f = ts.values
    L = f.shape[0]
    K = cfg.num_modes
    if L < 2 * K:
        raise InvalidConfigError(f"series of length {L} is too short for {K} modes")
    if not np.all(np.isfinite(f)):
        raise InvalidInputError(f"node {ts.node_id}: series contains non-finite values")

    extended = mirror_extend(f)
    n_ext = extended.shape[0]
    f_hat = to_half_spectrum(forward_dft(extended)).bins
    freqs = np.arange(f_hat.shape[0]) / n_ext

    omegas = initial_omegas(cfg, n_ext)
    pin_dc = cfg.omega_init == "zero"
    u_hat = np.zeros((K, f_hat.shape[0]), dtype=np.complex128)
    lam = np.zeros_like(f_hat)
    total = np.zeros_like(f_hat)

    converged = False
    n = 0
    while n < cfg.max_iter:
        n += 1
        prev = u_hat.copy()
        for k in range(K):
            others = total - u_hat[k]
            u_hat[k] = update_mode(k, f_hat, u_hat, lam, omegas, cfg.alpha, freqs,
                                   others_sum=others)
            total = others + u_hat[k]
            if freeze_omegas or (pin_dc and k == 0 and n == 1):
                continue
            omegas[k] = update_center_frequency(u_hat[k], freqs, omegas[k])
        lam = update_multiplier(lam, f_hat, u_hat, cfg.tau)
        # the first sweep compares against the all-zero initialization
        if n > 1 and convergence_metric(prev, u_hat) < cfg.epsilon:
            converged = True
            break

    modes = np.stack([
        truncate_center(inverse_dft_real(Spectrum(u_hat[k], n_ext, HALF)), L)
        for k in range(K)
    ])
    order = np.argsort(omegas, kind="stable")
    modes = np.ascontiguousarray(modes[order])
    omegas = omegas[order]
    residual = float(np.mean(np.abs(f - modes.sum(axis=0))))
    if not converged:
        log.debug("node %s: no convergence after %d sweeps", ts.node_id, n)
    return ModeSet(modes, omegas, n, converged, residual, ts.node_id)


def redemption(s, ms: ModeSet) -> np.ndarray:
    """Pointwise residual ``f - sum_k u_k``."""
    f = s.values if isinstance(s, TimeSeries) else np.asarray(s, dtype=np.float64)
    if f.shape[0] != ms.modes.shape[1]:
        raise InvalidInputError(
            f"series length {f.shape[0]} does not match mode length {ms.modes.shape[1]}"
        )
    return f - ms.modes.sum(axis=0)


def reconstruction_loss(s, ms: ModeSet) -> float:
    """Mean absolute residual. Expects a min-max normalized signal."""
    return float(np.mean(np.abs(redemption(s, ms))))


def minmax_normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _decompose_job(args):
    ts, cfg = args
    return decompose(ts, cfg)


def decompose_many(series, cfg: VmdConfig, workers: int = 1) -> list[ModeSet]:
    """Decompose several series, optionally across processes.

    Results come back sorted by ``node_id`` whatever the completion order.
    """
    series = list(series)
    if workers > 1 and len(series) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_decompose_job, [(ts, cfg) for ts in series]))
    else:
        results = [decompose(ts, cfg) for ts in series]
    return sorted(results, key=lambda ms: ms.node_id)
