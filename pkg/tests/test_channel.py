import math

import numpy as np
import pytest
from scipy import stats

from wiet.channel import (EstimateSet, FadingSpec, LosLink, correlated_field, jakes_factor,
                          los_gain, mmse_estimate, mmse_gamma, order_subbands, sample_fading)
from wiet.numerics import RngStream

# mpmath J0 at 2 pi tau / lambda
J0_PI = -0.304242177644093864202034912818
J0_HALF_PI = 0.472001215768234767447668387873


def test_fading_spec_validation():
    with pytest.raises(ValueError):
        FadingSpec(beta=0.0)
    with pytest.raises(ValueError):
        FadingSpec(rice_k=-1.0)


def test_rayleigh_mean_power_and_envelope():
    beta = 2.5
    h = sample_fading(FadingSpec(beta=beta), 100_000, RngStream(1, 0))
    assert 0.98 * beta <= np.mean(np.abs(h) ** 2) <= 1.02 * beta
    ks = stats.kstest(np.abs(h), stats.rayleigh(scale=math.sqrt(beta / 2)).cdf).statistic
    assert ks < 0.01


def test_rician_mean_power():
    h = sample_fading(FadingSpec(beta=0.3, rice_k=2.0), 100_000, RngStream(2, 0))
    assert np.mean(np.abs(h) ** 2) == pytest.approx(0.3, rel=0.02)


def test_pure_los_limit():
    beta = 1.7
    h = sample_fading(FadingSpec(beta=beta, rice_k=1e6), 10_000, RngStream(3, 0))
    assert np.var(np.abs(h)) < 1e-3 * beta
    h = sample_fading(FadingSpec(beta=beta, rice_k=math.inf), 100, RngStream(3, 0))
    assert np.allclose(np.abs(h), math.sqrt(beta))


def test_fading_deterministic():
    a = sample_fading(FadingSpec(), (4, 3), RngStream(9, 5))
    b = sample_fading(FadingSpec(), (4, 3), RngStream(9, 5))
    c = sample_fading(FadingSpec(), (4, 3), RngStream(9, 6))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_mmse_gamma_cases():
    assert mmse_gamma(1.0, 1.0, 1.0, 1, 1.0) == pytest.approx(0.5)
    assert mmse_gamma(1.0, 0.0, 16, 4, 1.0) == 0.0
    assert mmse_gamma(2.0, math.inf, 16, 4, 1.0) == 2.0
    assert mmse_gamma(2.0, 1e12, 16, 4, 1.0) == pytest.approx(2.0, rel=1e-10)


def test_mmse_error_variance():
    g = np.zeros(100_000, complex)
    est = mmse_estimate(g, p_p=1.0, tau_p=2.0, n_subbands=4, sigma2=0.5, stream=RngStream(4, 0))
    assert est.gamma == pytest.approx(0.5)
    assert est.err_var == pytest.approx(0.5)
    assert np.var(est.g_hat - g) == pytest.approx(est.err_var, rel=0.02)


def test_mmse_limits():
    g = np.ones((3, 2), complex)
    est = mmse_estimate(g, math.inf, 16, 3, 1.0, RngStream(0, 0))
    assert est.err_var == 0 and np.array_equal(est.g_hat, g)
    est = mmse_estimate(g, 0.0, 16, 3, 1.0, RngStream(0, 0))
    assert est.gamma == 0 and est.err_var == 1.0
    with pytest.raises(ValueError):
        mmse_estimate(g, -1.0, 16, 3, 1.0, RngStream(0, 0))


def test_order_subbands():
    assert list(order_subbands(np.array([1.0, 3.0, 2.0])) + 1) == [2, 3, 1]
    assert list(order_subbands(np.ones(5))) == list(range(5))
    rng = np.random.default_rng(7)
    g = rng.normal(size=(12, 4)) + 1j * rng.normal(size=(12, 4))
    est = EstimateSet(g_hat=g, gamma=0.5, beta=1.0)
    norms = [float(np.sum(np.abs(r) ** 2)) for r in g]
    oracle = sorted(range(12), key=lambda i: (-norms[i], i))
    assert list(order_subbands(est)) == oracle
    with pytest.raises(ValueError):
        order_subbands(np.array([]))


def test_los_gain():
    link = LosLink(c=1.0, lam=1.0)
    assert los_gain(2.0, link) == pytest.approx(0.5 * np.exp(-4j * math.pi), abs=1e-15)
    assert abs(los_gain(4.0, link)) == pytest.approx(0.5 * abs(los_gain(2.0, link)))
    link = LosLink(c=3e-4, lam=0.05)
    g = los_gain(link.lam, link)
    assert np.angle(g) == pytest.approx(0.0, abs=1e-12)
    d = np.array([0.5, 1.0, 7.0])
    assert np.allclose(np.abs(los_gain(d, link)) * d, math.sqrt(link.c))
    with pytest.raises(ValueError):
        los_gain(0.0, link)


def test_jakes_correlation_targets():
    lam = 0.01
    factor, clipped = jakes_factor(2, lam / 2, lam)
    cov = factor @ factor.T
    assert cov[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert cov[0, 1] == pytest.approx(J0_PI, abs=1e-4)
    factor, _ = jakes_factor(3, lam / 4, lam)
    assert (factor @ factor.T)[0, 1] == pytest.approx(J0_HALF_PI, abs=1e-4)


def test_jakes_psd_and_clipped_mass():
    lam = 0.01
    factor, clipped = jakes_factor(101, lam / 20, lam)
    cov = factor @ factor.T
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() > -1e-10
    assert clipped < 1e-6


def test_correlated_field_empirical():
    lam = 1.0
    f = correlated_field(6, 0.1, lam, 1, RngStream(11, 0), n_draws=20_000)[:, 0, :]
    assert f.shape == (20_000, 6)
    emp = (f.conj().T @ f).real / f.shape[0]
    pos = np.arange(6) * 0.1
    from wiet.numerics import bessel_j0
    target = bessel_j0(2 * math.pi * np.abs(pos[:, None] - pos[None, :]) / lam)
    assert np.max(np.abs(emp - target)) < 0.03
    assert abs(np.mean(f)) < 0.03


def test_correlated_field_variance_broadcast():
    f = correlated_field(4, 0.1, 1.0, 3, RngStream(5, 0), n_draws=40_000, var=[1.0, 4.0, 0.25])
    p = np.mean(np.abs(f) ** 2, axis=(0, 2))
    assert np.allclose(p, [1.0, 4.0, 0.25], rtol=0.03)
