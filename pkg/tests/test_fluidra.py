import math

import numpy as np
import pytest

from wiet.fluidra import (FluidField, FraScenario, binomial_halfwidth, ca_baseline, harvest_power,
                          outage_mc, position_metrics, rule_divergence, sample_field,
                          select_position)
from wiet.numerics import RngStream, bessel_j0

SCEN = FraScenario(p_tx=float(10 ** (10 / 10) * 1e-3))


def _field(rng, n=7, ni=2):
    g = (rng.normal(size=n) + 1j * rng.normal(size=n)) * 0.1
    h = (rng.normal(size=(ni, n)) + 1j * rng.normal(size=(ni, n))) * 0.1
    return FluidField(0.05, g, h, 0.01)


def test_metrics_hand_evaluation():
    rng = np.random.default_rng(0)
    f = _field(rng)
    s = SCEN
    m = position_metrics(f, 3, s)
    g2 = abs(f.g[3]) ** 2
    itf = s.p_tx * sum(abs(f.h[i, 3]) ** 2 for i in range(2))
    sinr = s.rho * s.p_tx * g2 / (s.rho * (s.sigma2 + itf) + s.sigma_c2)
    y2 = s.p_tx * g2 + itf + s.sigma2
    pe = s.k2 * s.r_ant * (1 - s.rho) * y2 + s.k4 * s.r_ant**2 * (1 - s.rho) ** 2 * 2 * y2**2
    assert m["sinr"] == pytest.approx(sinr)
    assert m["rate"] == pytest.approx(math.log2(1 + sinr))
    assert m["p_e"] == pytest.approx(pe)


def test_limits():
    rng = np.random.default_rng(1)
    f = _field(rng)
    s = FraScenario(rho=1.0)
    assert np.all(position_metrics(f, None, s)["p_e"] == 0)
    s0 = FraScenario(n_interferers=0)
    f0 = FluidField(0.05, f.g, f.h[:0], 0.01)
    m = position_metrics(f0, None, s0)
    want = s0.rho * s0.p_tx * np.abs(f.g) ** 2 / (s0.rho * s0.sigma2 + s0.sigma_c2)
    assert np.allclose(m["sinr"], want)
    with pytest.raises(ValueError):
        FraScenario(rho=0.0)


def test_select_position():
    rng = np.random.default_rng(2)
    f = FluidField(0.0, np.array([0.3 + 0j]), np.zeros((2, 1), complex), 0.01)
    assert select_position(f, "max_rate", SCEN) == 0
    f = _field(rng, 40)
    a = select_position(f, "max_rate", SCEN)
    # common scaling of powers and noises keeps the argmax
    s2 = FraScenario(p_tx=SCEN.p_tx * 7, sigma2=SCEN.sigma2 * 7, sigma_c2=SCEN.sigma_c2 * 7)
    assert select_position(f, "max_rate", s2) == a
    with pytest.raises(ValueError):
        select_position(f, "max_sum", SCEN)


def test_field_correlation():
    lam = 0.01
    f = sample_field(lam / 2, FraScenario(n_interferers=0, pathloss=1.0), RngStream(3, 0),
                     n_draws=20_000, spacing_frac=0.5)
    assert f.n_points == 2
    x, y = f.g[:, 0], f.g[:, 1]
    rho = np.real(np.mean(x * np.conj(y))) / math.sqrt(np.mean(abs(x) ** 2) * np.mean(abs(y) ** 2))
    assert rho == pytest.approx(float(bessel_j0(math.pi)), abs=0.03)
    assert np.mean(abs(x) ** 2) == pytest.approx(1.0, rel=0.03)


def test_outage_boundaries():
    r = outage_mc(0.05, "max_rate", SCEN, 0.0, 500, RngStream(4, 0))
    assert r["outage"] == 0.0
    with pytest.raises(ValueError):
        outage_mc(0.05, "max_rate", SCEN, -1.0, 10, RngStream(4, 0))


def test_zero_length_equals_single_antenna():
    theta = 1.0
    a = outage_mc(0.0, "max_rate", SCEN, theta, 20_000, RngStream(5, 0))
    b = ca_baseline(1, "max_rate", SCEN, theta, 20_000, RngStream(5, 1))
    assert abs(a["outage"] - b["outage"]) < 3 * math.hypot(a["halfwidth"], b["halfwidth"]) / 1.96
    # closed form with one antenna: interference-limited exponential race
    assert 0 < a["outage"] < 1


def test_ca_outage_nonincreasing():
    o = [ca_baseline(m, "max_rate", SCEN, 1.0, 20_000, RngStream(6, 0))["outage"]
         for m in (1, 2, 5, 10)]
    assert all(b <= a for a, b in zip(o, o[1:]))
    with pytest.raises(ValueError):
        ca_baseline(0, "max_rate", SCEN, 1.0, 10, RngStream(6, 0))


def test_rules_diverge():
    assert rule_divergence(0.05, SCEN, 2000, RngStream(7, 0)) > 0.5


def test_deterministic():
    a = outage_mc(0.03, "max_energy", SCEN, 1.0, 300, RngStream(8, 0))
    b = outage_mc(0.03, "max_energy", SCEN, 1.0, 300, RngStream(8, 0))
    assert a == b


def test_helpers():
    assert binomial_halfwidth(0.5, 100) == pytest.approx(1.96 * 0.05)
    assert harvest_power(0.0, SCEN) == 0.0
