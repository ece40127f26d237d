"""
Channel generation.

Rician/Rayleigh block fading, line-of-sight spherical-wave gains, MMSE pilot
estimation, subband ordering and spatially correlated fields following the
Jakes correlation ``J0(2 pi tau / lambda)``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import RngStream, bessel_j0

__all__ = [
    "FadingSpec",
    "EstimateSet",
    "LosLink",
    "db2lin",
    "dbm2watt",
    "pathloss",
    "complex_normal",
    "sample_fading",
    "mmse_gamma",
    "mmse_estimate",
    "order_subbands",
    "los_gain",
    "jakes_factor",
    "correlated_field",
]


def db2lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm2watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def pathloss(d, exponent, ref_gain=1.0, ref_distance=1.0):
    """Large-scale power gain ``ref_gain * (d / ref_distance)**(-exponent)``."""
    d = np.asarray(d, dtype=float)
    return ref_gain * (np.maximum(d, ref_distance) / ref_distance) ** (-exponent)


def _rng(stream):
    if isinstance(stream, np.random.Generator):
        return stream
    return stream.generator()


def complex_normal(rng, shape, var=1.0):
    """Circularly symmetric complex normal draws with variance ``var``."""
    rng = _rng(rng)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.sqrt(var / 2.0) * z


@dataclass(frozen=True)
class FadingSpec:
    """Block-fading description.

    Attributes
    ----------
    beta : float
        Mean power gain.
    rice_k : float
        Linear Rician factor; 0 gives Rayleigh fading.
    pathloss_exp : float
        Exponent used by geometry-driven callers for ``beta``.
    ref_distance : float
        Reference distance of the path-loss law [m].
    """

    beta: float = 1.0
    rice_k: float = 0.0
    pathloss_exp: float = 2.0
    ref_distance: float = 1.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.rice_k < 0:
            raise ValueError("rice_k must be nonnegative")


def sample_fading(spec: FadingSpec, shape, stream, los_phase=None):
    """I.i.d. Rician gains with mean power ``spec.beta``.

    Parameters
    ----------
    spec : FadingSpec
    shape : int or tuple
    stream : RngStream or numpy Generator
    los_phase : array_like, optional
        Phase of the specular component.  Drawn uniformly when omitted.

    Returns
    -------
    ndarray of complex
    """
    rng = _rng(stream)
    k = float(spec.rice_k)
    if los_phase is None:
        los_phase = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    if math.isinf(k):
        los_w, nlos_w = 1.0, 0.0
    else:
        los_w, nlos_w = math.sqrt(k / (k + 1.0)), math.sqrt(1.0 / (k + 1.0))
    scatter = complex_normal(rng, shape)
    h = los_w * np.exp(1j * np.asarray(los_phase)) + nlos_w * scatter
    return math.sqrt(spec.beta) * h


@dataclass(frozen=True)
class EstimateSet:
    """Per-subband channel estimates.

    Attributes
    ----------
    g_hat : ndarray, shape (n_subbands, n_antennas)
        Estimated gains.
    gamma : float
        Estimation quality (mean power of the estimate's useful part).
    beta : float
        Large-scale gain of the true channel.
    """

    g_hat: np.ndarray
    gamma: float
    beta: float

    @property
    def err_var(self) -> float:
        return self.beta - self.gamma

    @property
    def gains(self) -> np.ndarray:
        """Squared norms ``||g_hat_n||^2`` per subband."""
        return np.sum(np.abs(self.g_hat) ** 2, axis=-1)


def mmse_gamma(beta, p_p, tau_p, n_subbands, sigma2):
    """``(Pp tau_p / N) beta^2 / (sigma2 + (Pp tau_p / N) beta)``."""
    snr = p_p * tau_p / n_subbands
    if snr == 0:
        return 0.0
    if math.isinf(snr):
        return float(beta)
    return snr * beta**2 / (sigma2 + snr * beta)


def mmse_estimate(true_gains, p_p, tau_p, n_subbands, sigma2, stream, beta=1.0):
    """Pilot-based estimates ``g_hat = g + g_err``.

    The error is complex normal with variance ``beta - gamma`` per entry and
    is added to the truth, following the estimate-equals-truth-plus-error
    convention.

    Parameters
    ----------
    true_gains : ndarray
        True channels, any shape.
    p_p : float
        Pilot power [W]; ``inf`` gives perfect estimates.
    tau_p : float
        Pilot length in symbols.
    n_subbands : int
    sigma2 : float
        Noise power [W].
    stream : RngStream or Generator
    beta : float
        Large-scale gain.

    Returns
    -------
    EstimateSet
    """
    if p_p < 0 or tau_p < 0 or sigma2 < 0 or n_subbands <= 0:
        raise ValueError("pilot parameters must be nonnegative")
    g = np.asarray(true_gains)
    gamma = mmse_gamma(beta, p_p, tau_p, n_subbands, sigma2)
    ev = beta - gamma
    err = complex_normal(stream, g.shape, ev) if ev > 0 else np.zeros(g.shape, complex)
    return EstimateSet(g_hat=g + err, gamma=gamma, beta=beta)


def order_subbands(est) -> np.ndarray:
    """Subband indices sorted by decreasing estimated gain.

    Ties keep the lower original index first.  ``est`` is an ``EstimateSet``
    or a 1-D array of gains.
    """
    gains = est.gains if isinstance(est, EstimateSet) else np.asarray(est, dtype=float)
    if gains.size == 0:
        raise ValueError("no subbands to order")
    return np.argsort(-gains, kind="stable")


@dataclass(frozen=True)
class LosLink:
    """Line-of-sight spherical-wave link.

    Attributes
    ----------
    c : float
        Power gain at 1 m.
    lam : float
        Wavelength [m].
    """

    c: float = 1.0
    lam: float = 0.125

    def __post_init__(self):
        if self.c <= 0 or self.lam <= 0:
            raise ValueError("c and lam must be positive")


def los_gain(d, link: LosLink):
    """``sqrt(c)/d * exp(-j 2 pi d / lam)`` for distances ``d > 0``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    g = math.sqrt(link.c) / d * np.exp(-2j * math.pi * d / link.lam)
    return g[()] if g.ndim == 0 else g


@lru_cache(maxsize=64)
def _jakes_factor_cached(n_points, spacing, lam):
    pos = np.arange(n_points) * spacing
    tau = np.abs(pos[:, None] - pos[None, :])
    cov = bessel_j0(2.0 * math.pi * tau / lam)
    cov = 0.5 * (cov + cov.T)
    ev, vec = np.linalg.eigh(cov)
    clipped = float(np.sum(-ev[ev < 0]) / np.trace(cov))
    ev = np.clip(ev, 0.0, None)
    factor = vec * np.sqrt(ev)[None, :]
    factor.setflags(write=False)
    return factor, clipped


def jakes_factor(n_points: int, spacing: float, lam: float):
    """Square-root factor of the Jakes correlation matrix on a line grid.

    Returns
    -------
    factor : ndarray, shape (n_points, n_points)
        ``factor @ factor.T`` is the clipped correlation matrix.
    clipped_mass : float
        Sum of discarded negative eigenvalues relative to the trace.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    return _jakes_factor_cached(int(n_points), float(spacing), float(lam))


def correlated_field(n_points, spacing, lam, n_signals, stream, n_draws=None, var=1.0):
    """Zero-mean complex normal field samples with Jakes spatial correlation.

    Parameters
    ----------
    n_points : int
        Grid points along the line.
    spacing : float
        Grid spacing [m].
    lam : float
        Wavelength [m].
    n_signals : int
        Independent fields (desired signal plus interferers).
    stream : RngStream or Generator
    n_draws : int, optional
        Leading batch dimension.
    var : float or array_like
        Per-signal variance, broadcast over ``n_signals``.

    Returns
    -------
    ndarray
        Shape ``(n_signals, n_points)``, or ``(n_draws, n_signals, n_points)``.
    """
    factor, _ = jakes_factor(n_points, spacing, lam)
    rng = _rng(stream)
    lead = () if n_draws is None else (int(n_draws),)
    w = complex_normal(rng, lead + (int(n_signals), int(n_points)))
    f = w @ factor.T
    scale = np.sqrt(np.asarray(var, dtype=float)).reshape(-1, 1) if np.ndim(var) else math.sqrt(var)
    return f * scale


def as_stream(seed_or_stream, stream_id=0):
    """Accept a seed, an ``RngStream`` or a Generator."""
    if isinstance(seed_or_stream, (RngStream, np.random.Generator)):
        return seed_or_stream
    return RngStream(int(seed_or_stream), stream_id)
