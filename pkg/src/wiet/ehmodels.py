"""
Rectenna transfer laws.

Four models of the DC power delivered by a rectenna for a given RF input:

* ``LinearEh``   constant conversion efficiency,
* ``SigmoidEh``  logistic saturation curve normalised to pass through 0,
* ``CircuitEh``  Lambert-W solution of a single-diode rectifier with a
  reverse-breakdown clamp,
* ``DiodeSeries`` even-order Taylor expansion of the diode current, used on
  time-domain signal samples.

``harvest(model, p)`` dispatches on the model type.
"""

import math
from dataclasses import dataclass

import numpy as np

from .numerics import lambert_w0_exp, log_bessel_i0

__all__ = [
    "LinearEh",
    "SigmoidEh",
    "CircuitEh",
    "DiodeSeries",
    "linear_eh",
    "sigmoid_eh",
    "sigmoid_eh_inverse",
    "circuit_eh",
    "diode_avg_power",
    "harvest",
    "harvest_inverse",
]


def _check_nonneg(p, name="p_rf"):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(np.isnan(p)):
        raise ValueError(f"{name} must be nonnegative")
    return p


def _out(v):
    v = np.asarray(v, dtype=float)
    return v[()] if v.ndim == 0 else v


@dataclass(frozen=True)
class LinearEh:
    """Constant-efficiency harvester, ``P_out = eta * P_rf``."""

    eta: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError("eta must lie in (0, 1]")


@dataclass(frozen=True)
class SigmoidEh:
    """Logistic saturation harvester.

    Attributes
    ----------
    psat : float
        Saturation output power [W].
    a : float
        Steepness [1/W].
    b : float
        Input power at the inflection point [W].
    """

    psat: float
    a: float
    b: float

    def __post_init__(self):
        if self.psat <= 0 or self.a <= 0:
            raise ValueError("psat and a must be positive")

    @property
    def psi(self) -> float:
        """Logistic value at zero input, ``1/(1+exp(a b))``."""
        return _logistic(-self.a * self.b)


@dataclass(frozen=True)
class CircuitEh:
    """Single-diode rectifier model.

    Attributes
    ----------
    alpha : float
        Dimensionless circuit constant.
    bcoef : float
        Scale of the Bessel argument, ``xi = sqrt(2 P_in) * bcoef`` [1/sqrt(W)].
    i_s : float
        Diode saturation current [A].
    r_l : float
        Load resistance [ohm].
    b_v : float
        Reverse breakdown voltage [V].
    """

    alpha: float
    bcoef: float
    i_s: float
    r_l: float
    b_v: float

    def __post_init__(self):
        if min(self.alpha, self.bcoef, self.i_s, self.r_l, self.b_v) <= 0:
            raise ValueError("circuit parameters must be positive")

    @property
    def p_clamp(self) -> float:
        """Breakdown-limited output ``b_v**2 / (4 r_l)``."""
        return self.b_v**2 / (4.0 * self.r_l)


@dataclass(frozen=True)
class DiodeSeries:
    """Even-order Taylor model of the diode current.

    The harvest metric is ``sum_n k_n R_ant^(n/2) <y^n>`` over even ``n`` up
    to ``order``, with ``k_n = i_s / (n! (delta v_t)^n)``.
    """

    i_s: float = 0.6e-3
    delta: float = 1.0
    v_t: float = 25e-3
    r_ant: float = 1.0
    order: int = 4

    def __post_init__(self):
        if min(self.i_s, self.delta, self.v_t, self.r_ant) <= 0:
            raise ValueError("diode parameters must be positive")
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be an even integer >= 2")

    def k(self, n: int) -> float:
        return self.i_s / (math.factorial(n) * (self.delta * self.v_t) ** n)

    @property
    def k2(self) -> float:
        return self.k(2)

    @property
    def k4(self) -> float:
        return self.k(4)


def _logistic(z):
    z = np.asarray(z, dtype=float)
    ez = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    return out[()] if out.ndim == 0 else out


def linear_eh(p_rf, m: LinearEh):
    """Linear harvester output ``eta * p_rf`` [W]."""
    p = _check_nonneg(p_rf)
    return _out(m.eta * p)


def sigmoid_eh(p_rf, m: SigmoidEh):
    """Saturating logistic harvester.

    ``(Upsilon - psat * Psi) / (1 - Psi)`` with
    ``Upsilon = psat / (1 + exp(-a (p_rf - b)))`` and ``Psi = 1/(1+exp(a b))``.
    """
    p = _check_nonneg(p_rf)
    psi = m.psi
    ups = m.psat * _logistic(m.a * (p - m.b))
    return _out(np.maximum((ups - m.psat * psi) / (1.0 - psi), 0.0))


def sigmoid_eh_inverse(p_out, m: SigmoidEh):
    """Input power needed for output ``p_out`` (``inf`` at or above psat)."""
    q = np.asarray(p_out, dtype=float)
    psi = m.psi
    ups = q * (1.0 - psi) + m.psat * psi
    with np.errstate(divide="ignore", invalid="ignore"):
        x = m.b - np.log(m.psat / ups - 1.0) / m.a
    x = np.where(q >= m.psat, np.inf, np.maximum(x, 0.0))
    return _out(np.where(q <= 0, 0.0, x))


def circuit_eh(p_in, m: CircuitEh):
    """Lambert-W rectifier output with breakdown clamp [W].

    ``min(((1/alpha) W0(alpha e^alpha I0(xi)) - 1)^2 i_s^2 r_l, b_v^2/(4 r_l))``
    with ``xi = sqrt(2 p_in) bcoef``.  The argument of W0 is handled in the
    log domain so large ``xi`` does not overflow.
    """
    p = _check_nonneg(p_in, "p_in")
    xi = np.sqrt(2.0 * p) * m.bcoef
    log_arg = math.log(m.alpha) + m.alpha + log_bessel_i0(xi)
    w = np.asarray(lambert_w0_exp(log_arg), dtype=float)
    # xi = 0 gives W0(alpha e^alpha) = alpha exactly
    w = np.where(xi == 0, m.alpha, w)
    v = (w / m.alpha - 1.0) ** 2 * m.i_s**2 * m.r_l
    return _out(np.minimum(v, m.p_clamp))


def diode_avg_power(samples, m: DiodeSeries, axis=-1):
    """Time-averaged even-order diode harvest metric of signal samples.

    Parameters
    ----------
    samples : array_like
        Received-signal samples; the average is taken along ``axis``.
    m : DiodeSeries

    Returns
    -------
    float or ndarray
        ``mean(sum_n k_n R_ant^(n/2) y^n)`` over even ``n <= m.order``.
    """
    y = np.asarray(samples, dtype=float)
    if y.size == 0 or y.shape[axis] == 0:
        raise ValueError("empty sample set")
    y2 = y * y
    total = 0.0
    yn = np.ones_like(y)
    for n in range(2, m.order + 1, 2):
        yn = yn * y2
        total = total + m.k(n) * m.r_ant ** (n // 2) * np.mean(yn, axis=axis)
    return _out(total)


def harvest(model, p):
    """Output power of ``model`` for average RF input ``p``."""
    if isinstance(model, LinearEh):
        return linear_eh(p, model)
    if isinstance(model, SigmoidEh):
        return sigmoid_eh(p, model)
    if isinstance(model, CircuitEh):
        return circuit_eh(p, model)
    raise TypeError(f"no power-domain transfer law for {type(model).__name__}")


def harvest_inverse(model, p_out):
    """Smallest RF input that yields ``p_out`` under a monotone model."""
    if isinstance(model, LinearEh):
        return _out(np.asarray(p_out, dtype=float) / model.eta)
    if isinstance(model, SigmoidEh):
        return sigmoid_eh_inverse(p_out, model)
    raise TypeError(f"no closed-form inverse for {type(model).__name__}")
