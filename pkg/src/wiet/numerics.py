"""
Special functions, seeded random streams and scalar root finding.

The special functions are implemented with a power series for small
arguments and an asymptotic expansion for large ones.  Switch points are
placed where the two expansions agree to better than 1e-10 relative.
All functions accept scalars or numpy arrays.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "NumericsError",
    "DomainError",
    "BracketError",
    "OverflowSignal",
    "lambert_w0",
    "lambert_w0_exp",
    "bessel_i0",
    "log_bessel_i0",
    "bessel_j0",
    "erfi",
    "dawson",
    "RngStream",
    "gaussian",
    "find_root",
]

_INV_E = math.exp(-1.0)
_SQRT_PI = math.sqrt(math.pi)


class NumericsError(ArithmeticError):
    """Base class of the numeric failures raised by this package."""


class DomainError(NumericsError, ValueError):
    """Argument outside the domain of a function."""


class BracketError(NumericsError, ValueError):
    """Root bracket without a sign change."""


class OverflowSignal(NumericsError, OverflowError):
    """Result not representable as a double."""


# ----------------------------------------------------------------------------
# Lambert W, principal branch
# ----------------------------------------------------------------------------
def _halley_w(x, w, n_iter=40):
    # Halley iterations on w*exp(w) - x, all entries at once
    for _ in range(n_iter):
        ew = np.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        # wp1 vanishes only at the branch point, which is polished afterwards
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = np.where(denom != 0, f / np.where(denom != 0, denom, 1.0), 0.0)
        w = w - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(w))):
            break
    return w


def lambert_w0(x):
    """Principal branch W0 of the Lambert W function.

    Parameters
    ----------
    x : float or array_like
        Argument, ``x >= -1/e``.

    Returns
    -------
    float or ndarray
        ``w`` such that ``w * exp(w) == x``.

    Raises
    ------
    DomainError
        If any entry is below ``-1/e`` or is not finite.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < -_INV_E * (1 + 1e-15)):
        raise DomainError("lambert_w0 requires finite x >= -1/e")
    xa = np.maximum(xa, -_INV_E)
    w = np.empty_like(xa)

    # branch point series in p = sqrt(2(e x + 1))
    near = xa < -0.32
    p = np.sqrt(np.maximum(2.0 * (math.e * xa[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p**2 / 3.0 + 11.0 / 72.0 * p**3 - 43.0 / 540.0 * p**4
    mid = (~near) & (xa <= 3.0)
    w[mid] = np.log1p(xa[mid]) * 0.8
    big = xa > 3.0
    lx = np.log(xa[big])
    w[big] = lx - np.log(lx) + np.log(lx) / lx

    w = _halley_w(xa, w)
    # polish entries on the branch point exactly
    w = np.where(xa == -_INV_E, -1.0, w)
    w = np.where(xa == 0.0, 0.0, w)
    return w[()] if w.ndim == 0 else w


def lambert_w0_exp(log_x):
    """W0 evaluated at ``exp(log_x)`` without forming ``exp(log_x)``.

    Solves ``w + log(w) = log_x`` by Newton steps, which stays finite when
    ``exp(log_x)`` would overflow.

    Parameters
    ----------
    log_x : float or array_like
        Natural log of the (positive) argument.

    Returns
    -------
    float or ndarray
    """
    lx = np.asarray(log_x, dtype=float)
    out = np.empty_like(lx)
    small = lx < 50.0
    if np.any(small):
        out[small] = lambert_w0(np.exp(lx[small]))
    if np.any(~small):
        L = lx[~small]
        w = L - np.log(L)
        for _ in range(50):
            step = (w + np.log(w) - L) * w / (w + 1.0)
            w = w - step
            if np.all(np.abs(step) <= 1e-15 * w):
                break
        out[~small] = w
    return out[()] if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Bessel functions of order zero
# ----------------------------------------------------------------------------
_I0_SWITCH = 30.0
_J0_SWITCH = 14.0


def _i0_series(x):
    # sum (x^2/4)^k / (k!)^2, positive terms
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 200):
        term = term * q / (k * k)
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _i0_asym_factor(x):
    # I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 40):
        term = term * (2 * k - 1) ** 2 / (k * 8.0 * x)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * total):
            break
    return total


def log_bessel_i0(x):
    """Natural log of the modified Bessel function I0, overflow safe."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(ax)
    s = ax <= _I0_SWITCH
    out[s] = np.log(_i0_series(ax[s]))
    b = ~s
    xb = ax[b]
    out[b] = xb - 0.5 * np.log(2.0 * math.pi * xb) + np.log(_i0_asym_factor(xb))
    return out[()] if out.ndim == 0 else out


def bessel_i0(x):
    """Zeroth-order modified Bessel function of the first kind.

    Parameters
    ----------
    x : float or array_like

    Returns
    -------
    float or ndarray

    Raises
    ------
    OverflowSignal
        When ``I0(x)`` exceeds the double range (``|x|`` above ~713).
    """
    ax = np.abs(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(ax)):
        raise DomainError("bessel_i0 requires finite input")
    lg = log_bessel_i0(ax)
    if np.any(lg > 709.78):
        raise OverflowSignal("bessel_i0 overflows for |x| > ~713")
    out = np.empty_like(ax)
    s = ax <= _I0_SWITCH
    out[s] = _i0_series(ax[s])
    xb = ax[~s]
    out[~s] = np.exp(xb) / np.sqrt(2.0 * math.pi * xb) * _i0_asym_factor(xb)
    return out[()] if out.ndim == 0 else out


def _j0_series(x):
    q = -0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 200):
        term = term * q / (k * k)
        total = total + term
        if np.all(np.abs(term) <= 1e-18):
            break
    return total


def _j0_asym(x):
    # Hankel expansion with P, Q series in 1/(8x), stopped at the smallest term
    y = 8.0 * x
    p = np.ones_like(x)
    q = -1.0 / y
    tp = np.ones_like(x)
    tq = -1.0 / y
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 60):
        np_ = tp * (-(4 * k - 3) ** 2 * (4 * k - 1) ** 2) / ((2 * k - 1) * (2 * k) * y * y)
        nq = tq * (-(4 * k - 1) ** 2 * (4 * k + 1) ** 2) / ((2 * k) * (2 * k + 1) * y * y)
        active &= (np.abs(np_) < np.abs(tp)) & (np.abs(nq) < np.abs(tq))
        if not np.any(active):
            break
        tp = np.where(active, np_, tp)
        tq = np.where(active, nq, tq)
        p = p + np.where(active, tp, 0.0)
        q = q + np.where(active, tq, 0.0)
        if np.all(np.abs(tp[active]) < 1e-17) and np.all(np.abs(tq[active]) < 1e-17):
            break
    phase = x - 0.25 * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(phase) - q * np.sin(phase))


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind.

    Parameters
    ----------
    x : float or array_like

    Returns
    -------
    float or ndarray
    """
    ax = np.abs(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(ax)):
        raise DomainError("bessel_j0 requires finite input")
    out = np.empty_like(ax)
    s = ax <= _J0_SWITCH
    out[s] = _j0_series(ax[s])
    out[~s] = _j0_asym(ax[~s])
    return out[()] if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Imaginary error function and Dawson's integral
# ----------------------------------------------------------------------------
_ERFI_SWITCH = 6.0
_ERFI_MAX = 26.0


def _erfi_series(x):
    # (2/sqrt(pi)) sum x^(2k+1) / (k! (2k+1)), terms of one sign
    x2 = x * x
    pw = x.copy()
    total = x.copy()
    for k in range(1, 400):
        pw = pw * x2 / k
        term = pw / (2 * k + 1)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return 2.0 / _SQRT_PI * total


def _dawson_asym(x):
    # D(x) ~ 1/(2x) sum (2k-1)!! / (2x^2)^k
    inv = 1.0 / (2.0 * x * x)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 60):
        new = term * (2 * k - 1) * inv
        if np.all(np.abs(new) >= np.abs(term)):
            break
        term = new
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * total):
            break
    return total / (2.0 * x)


def dawson(x):
    """Dawson's integral ``D(x) = (sqrt(pi)/2) exp(-x**2) erfi(x)``.

    Finite for every real argument, which makes it the safe building block
    for ratios involving ``erfi`` at large arguments.
    """
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    out = np.empty_like(ax)
    s = ax <= _ERFI_SWITCH
    out[s] = 0.5 * _SQRT_PI * np.exp(-ax[s] ** 2) * _erfi_series(ax[s])
    out[~s] = _dawson_asym(ax[~s])
    out = np.sign(xa) * out
    return out[()] if out.ndim == 0 else out


def erfi(x):
    """Imaginary error function ``erfi(x) = -i erf(ix)``.

    Parameters
    ----------
    x : float or array_like
        ``|x| <= 26``; larger magnitudes overflow a double.

    Returns
    -------
    float or ndarray

    Raises
    ------
    OverflowSignal
        For ``|x| > 26``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)):
        raise DomainError("erfi requires finite input")
    if np.any(np.abs(xa) > _ERFI_MAX):
        raise OverflowSignal("erfi overflows for |x| > 26")
    ax = np.abs(xa)
    out = np.empty_like(ax)
    s = ax <= _ERFI_SWITCH
    out[s] = _erfi_series(ax[s])
    xb = ax[~s]
    out[~s] = 2.0 / _SQRT_PI * np.exp(xb * xb) * _dawson_asym(xb)
    out = np.sign(xa) * out
    return out[()] if out.ndim == 0 else out


# ----------------------------------------------------------------------------
# Random streams
# ----------------------------------------------------------------------------
@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    The pair is hashed into a Philox key, so any trial's stream can be
    rebuilt without replaying the others.

    Attributes
    ----------
    seed : int
        64-bit experiment seed.
    stream_id : int
        64-bit stream index, typically one per Monte Carlo trial.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"{name} must be an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of the stream."""
        ss = np.random.SeedSequence([int(self.seed), int(self.stream_id)])
        return np.random.Generator(np.random.Philox(ss))

    def child(self, offset: int) -> "RngStream":
        """Stream with id shifted by ``offset`` (for nested experiments)."""
        return RngStream(self.seed, (int(self.stream_id) + int(offset)) % 2**64)


def gaussian(stream: RngStream, n: int) -> np.ndarray:
    """``n`` standard normal draws from the start of ``stream``."""
    return stream.generator().standard_normal(int(n))


# ----------------------------------------------------------------------------
# Root finding
# ----------------------------------------------------------------------------
def find_root(f, lo: float, hi: float, xtol: float = 1e-14) -> float:
    """Root of a scalar function on a sign-changing bracket.

    Parameters
    ----------
    f : callable
        Continuous function with ``f(lo) * f(hi) <= 0``.
    lo, hi : float
        Bracket end points.
    xtol : float
        Absolute interval tolerance.

    Returns
    -------
    float

    Raises
    ------
    BracketError
        If ``f`` has the same strict sign at both ends.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    return float(brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500))
