import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_vmd
from vmdgraph.spectral import InvalidInputError, TimeSeries
from vmdgraph.vmd import (
    InvalidConfigError, VmdConfig, convergence_metric, decompose, decompose_many,
    initial_omegas, minmax_normalize, reconstruction_loss, redemption, update_center_frequency,
    update_mode, update_multiplier,
)


def two_tone(L=512):
    t = np.arange(L)
    return np.cos(2 * np.pi * 4 * t / L) + np.cos(2 * np.pi * 100 * t / L)


def corr(a, b):
    return float(np.corrcoef(a, b)[0, 1])


# config --------------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    {"num_modes": 0}, {"alpha": 0.0}, {"alpha": -1.0}, {"tau": -0.1},
    {"epsilon": 0.0}, {"max_iter": 0}, {"omega_init": "bogus"},
])
def test_config_rejects(kw):
    with pytest.raises(InvalidConfigError):
        VmdConfig(**kw)


def test_config_fingerprint_tracks_fields():
    a = VmdConfig()
    assert a.fingerprint() == VmdConfig().fingerprint()
    assert a.fingerprint() != a.replace(alpha=1000.0).fingerprint()
    assert len(a.fingerprint()) == 16


def test_initial_omegas():
    assert np.allclose(initial_omegas(VmdConfig(num_modes=4), 100), [0, 0.125, 0.25, 0.375])
    assert np.all(initial_omegas(VmdConfig(num_modes=3, omega_init="zero"), 100) == 0)
    r = initial_omegas(VmdConfig(num_modes=5, omega_init="random", seed=3), 100)
    assert np.all((r >= 1 / 100) & (r <= 0.5)) and np.all(np.diff(r) >= 0)
    assert np.array_equal(r, initial_omegas(VmdConfig(num_modes=5, omega_init="random", seed=3), 100))


# single-step updates -------------------------------------------------------

def test_update_mode_large_alpha_far_bin_shrinks():
    f_hat = np.ones(5, dtype=complex)
    modes = np.zeros((1, 5), dtype=complex)
    freqs = np.linspace(0, 0.5, 5)
    out = update_mode(0, f_hat, modes, np.zeros(5), np.array([0.0]), 1e12, freqs)
    assert abs(out[-1]) < 1e-10
    assert out[0] == 1.0


def test_update_mode_unit_denominator():
    f_hat = np.array([3 + 1j, 2 - 2j, 0.5j])
    freqs = np.array([0.0, 0.25, 0.5])
    out = update_mode(0, f_hat, np.zeros((1, 3), complex), np.zeros(3), np.array([0.25]), 50.0, freqs)
    assert out[1] == f_hat[1]


def test_update_mode_hand_three_bins():
    f_hat = np.array([4.0, 2.0 + 2j, 1.0])
    freqs = np.array([0.0, 0.25, 0.5])
    modes = np.array([[1.0, 0.0, 0.0], [0.0, 1.0j, 0.5]], dtype=complex)
    lam = np.array([0.0, 2.0, -2.0], dtype=complex)
    omegas = np.array([0.0, 0.5])
    alpha = 2.0
    out = update_mode(0, f_hat, modes, lam, omegas, alpha, freqs)
    # (f - u_1 + lam/2) / (1 + 2*alpha*(w - w_0)^2)
    expected = np.array([
        (4.0 - 0.0 + 0.0) / 1.0,
        (2 + 2j - 1j + 1.0) / (1 + 4 * 0.0625),
        (1.0 - 0.5 - 1.0) / (1 + 4 * 0.25),
    ])
    assert np.allclose(out, expected, atol=1e-15)


def test_center_frequency_examples():
    freqs = np.linspace(0, 0.5, 9)
    u = np.zeros(9, complex)
    u[3] = 2 - 1j
    assert update_center_frequency(u, freqs) == pytest.approx(freqs[3])
    u[6] = 1 + 2j
    assert update_center_frequency(u, freqs) == pytest.approx((freqs[3] + freqs[6]) / 2)
    assert update_center_frequency(np.zeros(9), freqs, previous=0.2) == 0.2


def test_center_frequency_random_oracle():
    rng = np.random.default_rng(0)
    u = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    freqs = np.arange(16) / 30
    num = sum(freqs[i] * abs(u[i]) ** 2 for i in range(16))
    den = sum(abs(u[i]) ** 2 for i in range(16))
    assert abs(update_center_frequency(u, freqs) - num / den) < 1e-12


def test_multiplier_examples():
    rng = np.random.default_rng(1)
    lam = rng.standard_normal(6) + 0j
    f = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    modes = rng.standard_normal((2, 6)) + 0j
    assert np.array_equal(update_multiplier(lam, f, modes, 0.0), lam)
    exact = np.vstack([f - modes[1], modes[1]])
    assert np.allclose(update_multiplier(lam, f, exact, 0.7), lam, atol=1e-15)
    r = f - modes.sum(axis=0)
    assert np.allclose(update_multiplier(lam, f, modes, 0.1), lam + 0.1 * r, atol=1e-15)


def test_convergence_metric_examples():
    rng = np.random.default_rng(2)
    u = rng.standard_normal((3, 8)) + 1j * rng.standard_normal((3, 8))
    assert convergence_metric(u, u) == 0
    v = u.copy()
    v[1] *= 2
    assert convergence_metric(u, v) == pytest.approx(1.0)


@given(st.integers(0, 2 ** 31))
def test_convergence_metric_non_negative(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    b = rng.standard_normal((2, 5)) + 1j * rng.standard_normal((2, 5))
    a[rng.integers(2)] = 0
    assert convergence_metric(a, b) >= 0


# decomposition -------------------------------------------------------------

def test_zero_signal_fixed_point():
    cfg = VmdConfig(num_modes=3)
    ms = decompose(np.zeros(64), cfg)
    assert np.all(ms.modes == 0)
    assert np.allclose(ms.omegas, initial_omegas(cfg, 128))
    assert ms.reconstruction_residual == 0


def test_two_tone_recovery_and_oracle():
    f = two_tone()
    cfg = VmdConfig(num_modes=2, alpha=2000, tau=0, epsilon=1e-7)
    ms = decompose(f, cfg)
    assert ms.omegas[0] == pytest.approx(4 / 512, rel=0.02)
    assert ms.omegas[1] == pytest.approx(100 / 512, rel=0.02)
    t = np.arange(512)
    assert corr(ms.modes[0], np.cos(2 * np.pi * 4 * t / 512)) > 0.99
    assert corr(ms.modes[1], np.cos(2 * np.pi * 100 * t / 512)) > 0.99

    modes, omegas, n = naive_vmd(f, 2, 2000, 0, 1e-7, 500, initial_omegas(cfg, 1024))
    order = np.argsort(omegas, kind="stable")
    assert n == ms.iterations_used
    assert np.max(np.abs(modes[order] - ms.modes)) < 1e-10


def test_single_tone():
    t = np.arange(256)
    f = np.cos(2 * np.pi * 10 * t / 256)
    ms = decompose(f, VmdConfig(num_modes=1))
    assert corr(ms.modes[0], f) > 0.999
    cfg = VmdConfig(num_modes=1)
    modes, _, _ = naive_vmd(f, 1, cfg.alpha, cfg.tau, cfg.epsilon, cfg.max_iter, initial_omegas(cfg, 512))
    assert np.max(np.abs(modes - ms.modes)) < 1e-10


def test_too_short_and_non_finite():
    with pytest.raises(InvalidConfigError):
        decompose(np.ones(5), VmdConfig(num_modes=3))
    x = np.ones(32)
    x[4] = np.nan
    with pytest.raises(InvalidInputError):
        decompose(x, VmdConfig(num_modes=2))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 5), st.sampled_from(["uniform", "zero", "random"]))
def test_omegas_in_half_band_and_sorted(seed, K, init):
    f = np.random.default_rng(seed).standard_normal(64)
    ms = decompose(f, VmdConfig(num_modes=K, omega_init=init, max_iter=50, seed=seed))
    assert np.all((ms.omegas >= 0) & (ms.omegas <= 0.5))
    assert np.all(np.diff(ms.omegas) >= 0)
    assert ms.modes.shape == (K, 64)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_doubling_input_doubles_modes(seed):
    f = np.random.default_rng(seed).standard_normal(128)
    cfg = VmdConfig(num_modes=3, max_iter=40, epsilon=1e-30)
    a = decompose(f, cfg, freeze_omegas=True)
    b = decompose(2 * f, cfg, freeze_omegas=True)
    assert a.iterations_used == b.iterations_used
    assert np.allclose(b.modes, 2 * a.modes, atol=1e-12)


def test_positive_tau_reduces_residual():
    rng = np.random.default_rng(0)
    f = two_tone(256) + 0.3 * rng.standard_normal(256)
    base = decompose(f, VmdConfig(num_modes=2, tau=0.0))
    dual = decompose(f, VmdConfig(num_modes=2, tau=0.5, max_iter=2000))
    assert dual.converged
    assert dual.reconstruction_residual < base.reconstruction_residual


def test_decompose_deterministic():
    f = np.random.default_rng(5).standard_normal(200)
    cfg = VmdConfig(num_modes=4, omega_init="random", seed=9)
    a, b = decompose(f, cfg), decompose(f, cfg)
    assert np.array_equal(a.modes, b.modes) and np.array_equal(a.omegas, b.omegas)


def test_decompose_many_sorted_by_node():
    rng = np.random.default_rng(0)
    series = [TimeSeries(rng.standard_normal(64), node_id=n) for n in ("c", "a", "b")]
    cfg = VmdConfig(num_modes=2, max_iter=30)
    serial = decompose_many(series, cfg)
    parallel = decompose_many(series, cfg, workers=2)
    assert [m.node_id for m in serial] == ["a", "b", "c"]
    for s, p in zip(serial, parallel):
        assert s.node_id == p.node_id and np.array_equal(s.modes, p.modes)


# residual and loss ---------------------------------------------------------

def test_redemption_examples():
    f = np.random.default_rng(3).standard_normal(32)
    ms = decompose(f, VmdConfig(num_modes=2))
    ms.modes = np.vstack([f / 2, f / 2])
    assert np.all(redemption(f, ms) == 0)
    assert reconstruction_loss(f, ms) == 0
    ms.modes = (f / 2)[None, :]
    assert np.array_equal(redemption(f, ms), f - f / 2)
    ms.modes = (f - 0.25)[None, :]
    assert reconstruction_loss(f, ms) == pytest.approx(0.25)
    with pytest.raises(InvalidInputError):
        redemption(f[:10], ms)


def test_two_tone_redemption_and_loss():
    f = two_tone()
    ms = decompose(f, VmdConfig(num_modes=2, alpha=2000))
    phi = redemption(f, ms)
    assert np.allclose(phi, [f[i] - ms.modes[0, i] - ms.modes[1, i] for i in range(512)], atol=1e-14)
    assert reconstruction_loss(f, ms) == pytest.approx(np.mean(np.abs(phi)))
    # residual on the unit-range scale of the signal
    assert np.mean(np.abs(phi)) / (f.max() - f.min()) < 1e-2


def test_minmax_normalize():
    assert np.array_equal(minmax_normalize([2.0, 4.0, 3.0]), [0.0, 1.0, 0.5])
    assert np.array_equal(minmax_normalize([3.0, 3.0]), [0.0, 0.0])
