import math

import numpy as np
import pytest

from wiet import thz
from wiet.scenarios import REGISTRY, thz_setup
from wiet.thz import (PsiCurve, SDensity, ThzLink, achievable_rate, gaussian_baseline, harvested,
                      mutual_information, optimal_input_pdf, optimal_rate, output_sample,
                      ratio_of_mu, solve_mu1, truncated_gaussian, uniform_rate, uniform_x_pdf)


@pytest.fixture(scope="module")
def setup():
    return thz_setup(REGISTRY["fig20_thz_tradeoff"].defaults)


def test_psi_curve_basics(setup):
    _, psi = setup
    assert psi(0.0) == 0.0
    assert psi(10 * psi.rho_sat) == pytest.approx(psi.p_max)
    r = np.linspace(0, psi.rho_sat, 1001)
    assert np.all(psi(r) >= 0) and np.all(psi(r) <= psi.p_max)
    # dip variant has a negative-differential segment
    assert np.any(psi.derivative(r) < 0)
    mono = PsiCurve.standin(1.0, 1.0, dip=False)
    assert np.all(np.diff(mono(np.linspace(0, 1, 500))) >= 0)
    with pytest.raises(ValueError):
        PsiCurve((0.0, 1.0), (0.1, 1.0))
    with pytest.raises(ValueError):
        psi(-1.0)


def test_output_sample(setup):
    link, psi = setup
    assert output_sample(0.0, link.with_preq(0).__class__(sigma_n2=0.0), psi) == 0.0
    zero_noise = ThzLink(sigma_n2=0.0)
    s = 0.3
    y = output_sample(s, zero_noise, psi)
    assert y**2 == pytest.approx(psi((zero_noise.g * s) ** 2))
    rng = np.random.default_rng(0)
    ys = output_sample(np.full(40_000, s), link, psi, rng)
    mean = math.sqrt(psi((link.g * s) ** 2))
    assert abs(np.mean(ys) - mean) < 3 * math.sqrt(link.sigma_n2) / math.sqrt(ys.size)


def test_uniform_regime(setup):
    link, psi = setup
    j0 = uniform_rate(psi.p_max, link.sigma_n2)
    o = optimal_rate(link, psi)
    assert o["regime"] == "uniform" and o["J"] == pytest.approx(j0)
    f = uniform_x_pdf(link, psi)
    assert f.mass() == pytest.approx(1.0, abs=1e-8)
    assert achievable_rate(f, link, psi) == pytest.approx(j0, rel=1e-4)
    assert harvested(f, link, psi) == pytest.approx(psi.p_max / 3, rel=1e-4)


def test_degenerate_density_zero_rate(setup):
    link, psi = setup
    s = np.linspace(0, link.amp, 2001)
    pdf = np.zeros_like(s)
    pdf[1000] = 1.0 / (s[1] - s[0])
    assert achievable_rate(SDensity(s, pdf), link, psi) == pytest.approx(0.0, abs=0.05)


def test_perturbation_lowers_rate(setup):
    link, psi = setup
    base = achievable_rate(uniform_x_pdf(link, psi), link, psi)
    rng = np.random.default_rng(1)
    c = 1.0 / math.sqrt(psi.p_max)
    xm = math.sqrt(psi.p_max)
    for _ in range(20):
        k = rng.integers(1, 6)
        eps = rng.uniform(0.05, 0.3)
        fx = lambda x, k=k, eps=eps: c * (1 + eps * np.cos(2 * math.pi * k * x / xm))
        f = thz.pushforward_pdf(fx, link, psi)
        assert achievable_rate(f, link, psi) < base


def test_mu1_constraint():
    assert ratio_of_mu(0.0) == pytest.approx(1 / 3)
    # series and Dawson forms agree across the switch point
    assert ratio_of_mu(2.0 - 1e-9) == pytest.approx(ratio_of_mu(2.0 + 1e-9), rel=1e-7)
    mus = np.linspace(0.01, 39.0, 400)
    r = np.array([ratio_of_mu(m) for m in mus])
    assert np.all(np.diff(r) > 0) and r[-1] < 1
    for ratio in (0.34, 0.5, 0.8, 0.95, 0.99):
        mu = solve_mu1(ratio)
        assert 0 < mu <= 40 and ratio_of_mu(mu) == pytest.approx(ratio, abs=1e-12)
    with pytest.raises(ValueError):
        solve_mu1(0.2)


def test_branch_continuity(setup):
    link, psi = setup
    p = psi.p_max / 3
    a = optimal_rate(link.with_preq(p), psi)["J"]
    b = optimal_rate(link.with_preq(p * (1 + 1e-12)), psi)["J"]
    assert b == pytest.approx(a, rel=1e-6)


def test_optimal_rate_decreasing(setup):
    link, psi = setup
    ratios = np.linspace(1 / 3 + 1e-6, 0.99, 60)
    j = [optimal_rate(link.with_preq(r * psi.p_max), psi)["J"] for r in ratios]
    assert np.all(np.diff(j) < 0)
    with pytest.raises(ValueError):
        optimal_rate(link.with_preq(psi.p_max), psi)


def test_optimal_pdf_meets_constraint(setup):
    link, psi = setup
    lk = link.with_preq(0.5 * psi.p_max)
    f = optimal_input_pdf(lk, psi)
    assert f.mass() == pytest.approx(1.0, abs=1e-8)
    assert np.all(f.pdf >= 0)
    assert harvested(f, lk, psi) == pytest.approx(lk.p_req, rel=1e-6)


def test_mi_bounds(setup):
    link, psi = setup
    for p in (0.0, 40e-6, 70e-6):
        lk = link.with_preq(p)
        f = optimal_input_pdf(lk, psi)
        assert mutual_information(f, lk, psi) >= optimal_rate(lk, psi)["J"]
    noisy = ThzLink(sigma_n2=1e3)
    assert mutual_information(uniform_x_pdf(noisy, psi), noisy, psi) < 1e-6


def test_saturation_independence(setup):
    link, psi = setup
    for p in (20e-6, 60e-6):
        lk1 = link.with_preq(p)
        lk2 = ThzLink(link.fc, link.gt_dbi, link.gr_dbi, link.d, link.sigma_n2, 1.2, p)
        assert optimal_rate(lk1, psi)["J"] == pytest.approx(optimal_rate(lk2, psi)["J"], rel=1e-6)
        f1, f2 = optimal_input_pdf(lk1, psi), optimal_input_pdf(lk2, psi)
        assert harvested(f1, lk1, psi) == pytest.approx(harvested(f2, lk2, psi), rel=1e-6)


def test_gaussian_baseline(setup):
    link, psi = setup
    with pytest.raises(ValueError):
        truncated_gaussian(link, 0.0)
    small = gaussian_baseline(link, psi, [1e-4])[0]
    assert small[0] < 0.05
    f = truncated_gaussian(link, 1e3)
    assert np.ptp(f.pdf) / np.mean(f.pdf) < 1e-6
    res = gaussian_baseline(link, psi, np.geomspace(0.01, 3.0, 6))
    for i_g, h in res:
        if h > 0:
            assert i_g < optimal_rate(link.with_preq(min(h, 0.99 * psi.p_max)), psi)["J"]
