"""
Fluid reconfigurable antenna receiver with power-splitting SWIPT.

A single liquid element can sit anywhere on a line holder of length ``V``.
The desired channel ``g(v)`` and ``N_I`` interfering channels ``h_i(v)`` are
independent Rayleigh fields, each spatially correlated along the holder
with the Jakes law ``J0(2 pi tau / lambda)``.  The continuum of positions is
replaced by a grid of spacing ``lambda / 20``.

Two selection rules are studied: ``max_rate`` maximises the SINR after power
splitting and ``max_energy`` maximises the received power.  A selection
combiner over ``m`` independent conventional antennas serves as baseline.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import complex_normal, correlated_field

__all__ = [
    "FraScenario",
    "FluidField",
    "sample_field",
    "position_metrics",
    "select_position",
    "harvest_power",
    "outage_mc",
    "ca_baseline",
    "rule_divergence",
    "binomial_halfwidth",
]

RULES = ("max_rate", "max_energy")


@dataclass(frozen=True)
class FraScenario:
    """Link and receiver parameters.

    Attributes
    ----------
    p_tx : float
        Transmit power of the source and of every interferer [W].
    n_interferers : int
    beta0, beta_i : float
        Small-scale variances of the desired and interfering channels.
    pathloss : float
        Large-scale power gain common to all links.
    rho : float
        Share of received power sent to the information decoder.
    sigma2, sigma_c2 : float
        Antenna and conversion noise powers [W].
    k2, k4 : float
        Diode coefficients.
    r_ant : float
        Antenna resistance [ohm].
    lam : float
        Wavelength [m].
    """

    p_tx: float = 1e-3
    n_interferers: int = 2
    beta0: float = 1.0
    beta_i: float = 1.0
    pathloss: float = 1e-2
    rho: float = 0.5
    sigma2: float = 1e-20
    sigma_c2: float = 1e-5
    k2: float = 0.0034
    k4: float = 0.3829
    r_ant: float = 50.0
    lam: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise ValueError("rho must lie in (0, 1]")
        if self.n_interferers < 0 or self.p_tx < 0:
            raise ValueError("invalid scenario")

    def with_ptx(self, p_tx):
        d = dict(self.__dict__)
        d["p_tx"] = float(p_tx)
        return FraScenario(**d)


@dataclass(frozen=True)
class FluidField:
    """Channel samples along the holder.

    Attributes
    ----------
    length : float
        Holder length ``V`` [m].
    g : ndarray, shape (..., n_points)
        Desired channel, variance ``beta0 * pathloss``.
    h : ndarray, shape (..., n_interferers, n_points)
        Interfering channels.
    lam : float
    """

    length: float
    g: np.ndarray
    h: np.ndarray
    lam: float

    @property
    def n_points(self) -> int:
        return self.g.shape[-1]

    @property
    def positions(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_points)


def _n_points(length, lam, spacing_frac):
    if length <= 0:
        return 1
    return int(round(length / (lam * spacing_frac))) + 1


def sample_field(length, scen: FraScenario, stream, n_draws=None, spacing_frac=0.05):
    """Draw correlated desired and interfering fields on the position grid."""
    n = _n_points(length, scen.lam, spacing_frac)
    spacing = length / (n - 1) if n > 1 else 1.0
    rng = stream if isinstance(stream, np.random.Generator) else stream.generator()
    var = [scen.beta0 * scen.pathloss] + [scen.beta_i * scen.pathloss] * scen.n_interferers
    f = correlated_field(n, spacing, scen.lam, 1 + scen.n_interferers, rng, n_draws, var)
    return FluidField(float(length), f[..., 0, :], f[..., 1:, :], scen.lam)


def _independent_field(m, scen: FraScenario, rng, n_draws=None):
    lead = () if n_draws is None else (int(n_draws),)
    g = complex_normal(rng, lead + (m,), scen.beta0 * scen.pathloss)
    h = complex_normal(rng, lead + (scen.n_interferers, m), scen.beta_i * scen.pathloss)
    return FluidField(0.0, g, h, scen.lam)


def position_metrics(field: FluidField, v_index, scen: FraScenario):
    """SINR, rate, mean received power and harvest at each position.

    Returned arrays have the field's shape; index with ``v_index`` or pass
    ``None`` to get every position.

    Returns
    -------
    dict
        ``sinr``, ``rate`` [bit/s/Hz], ``y2`` (symbol-averaged ``|y|^2``)
        and ``p_e`` (two-term diode harvest).
    """
    p = scen.p_tx
    g2 = np.abs(field.g) ** 2
    interf = p * np.sum(np.abs(field.h) ** 2, axis=-2) if scen.n_interferers else np.zeros_like(g2)
    sinr = scen.rho * p * g2 / (scen.rho * (scen.sigma2 + interf) + scen.sigma_c2)
    y2 = p * g2 + interf + scen.sigma2
    out = {"sinr": sinr, "rate": np.log2(1.0 + sinr), "y2": y2, "p_e": harvest_power(y2, scen)}
    if v_index is None:
        return out
    return {k: v[..., v_index] for k, v in out.items()}


def harvest_power(y2, scen: FraScenario):
    """``k2 R (1-rho) E|y|^2 + k4 R^2 (1-rho)^2 E|y|^4``.

    The received signal is a Gaussian mixture of independent symbols, so
    ``E|y|^4 = 2 (E|y|^2)^2`` given the channel.
    """
    s = 1.0 - scen.rho
    y2 = np.asarray(y2, dtype=float)
    return scen.k2 * scen.r_ant * s * y2 + scen.k4 * scen.r_ant**2 * s**2 * 2.0 * y2**2


def select_position(field: FluidField, rule: str, scen: FraScenario):
    """Grid index maximising the rule; ties go to the lowest index."""
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    m = position_metrics(field, None, scen)
    key = m["sinr"] if rule == "max_rate" else m["y2"]
    return np.argmax(key, axis=-1)


def binomial_halfwidth(p, n):
    """95% normal-approximation half-width of a binomial proportion."""
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _evaluate(field, rule, scen, theta):
    m = position_metrics(field, None, scen)
    idx = select_position(field, rule, scen)[..., None]
    sinr = np.take_along_axis(m["sinr"], idx, -1)[..., 0]
    p_e = np.take_along_axis(m["p_e"], idx, -1)[..., 0]
    # outage is the strict event S* < theta
    return np.mean(sinr < theta), float(np.mean(p_e)), idx[..., 0]


def outage_mc(length, rule, scen: FraScenario, theta, n_trials, stream, spacing_frac=0.05,
              batch=2000):
    """Outage ``P{S* < theta}`` and mean harvest of the fluid antenna.

    ``theta`` is a linear SINR target, equivalent to ``R* < log2(1 + theta)``.

    Returns
    -------
    dict
        ``outage``, ``halfwidth`` (95%), ``harvest``.
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    rng = stream if isinstance(stream, np.random.Generator) else stream.generator()
    out, harv, done = 0.0, 0.0, 0
    while done < n_trials:
        nb = min(batch, n_trials - done)
        f = sample_field(length, scen, rng, nb, spacing_frac)
        o, h, _ = _evaluate(f, rule, scen, theta)
        out += o * nb
        harv += h * nb
        done += nb
    p = out / n_trials
    return {"outage": p, "halfwidth": binomial_halfwidth(p, n_trials), "harvest": harv / n_trials}


def ca_baseline(m_antennas, rule, scen: FraScenario, theta, n_trials, stream):
    """Selection combiner over ``m`` antennas with independent channels."""
    if m_antennas < 1:
        raise ValueError("m_antennas must be >= 1")
    rng = stream if isinstance(stream, np.random.Generator) else stream.generator()
    f = _independent_field(int(m_antennas), scen, rng, n_trials)
    o, h, _ = _evaluate(f, rule, scen, theta)
    return {"outage": float(o), "halfwidth": binomial_halfwidth(o, n_trials), "harvest": h}


def rule_divergence(length, scen: FraScenario, n_trials, stream, spacing_frac=0.05):
    """Fraction of realisations where the two rules pick different positions."""
    rng = stream if isinstance(stream, np.random.Generator) else stream.generator()
    f = sample_field(length, scen, rng, n_trials, spacing_frac)
    a = select_position(f, "max_rate", scen)
    b = select_position(f, "max_energy", scen)
    return float(np.mean(a != b))
