"""
THz information and energy transfer with a non-monotonic rectifier.

The received THz amplitude ``g s`` drives a rectifier whose output power
``psi(g^2 s^2)`` rises, dips (negative differential resistance) and then
saturates at ``P_max``.  The information carrying output is
``y = sqrt(psi(g^2 s^2)) + n`` with Gaussian noise of power ``sigma_n2``.

Input densities are represented on a fixed amplitude grid over ``[0, A]``
(``SDensity``).  The max-entropy design works in the output-amplitude
domain ``x = sqrt(psi)``.  Under a harvested-power constraint
``E[x^2] >= P_req`` the entropy-optimal density is uniform on
``[0, sqrt(P_max)]`` when ``P_req/P_max <= 1/3``, and
``exp(-mu0 + mu1^2 x^2 / P_max)`` otherwise.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .channel import dbm2watt
from .numerics import dawson, find_root

__all__ = [
    "PsiCurve",
    "ThzLink",
    "SDensity",
    "output_sample",
    "x_of_s",
    "dx_ds",
    "branch_intervals",
    "amp_grid",
    "monotone_branch",
    "pushforward_pdf",
    "uniform_x_pdf",
    "x_entropy",
    "achievable_rate",
    "uniform_rate",
    "ratio_of_mu",
    "solve_mu1",
    "optimal_rate",
    "optimal_input_pdf",
    "mutual_information",
    "harvested",
    "truncated_gaussian",
    "gaussian_baseline",
]

C_LIGHT = 299_792_458.0

_trapz = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class PsiCurve:
    """Piecewise-cubic rectifier transfer ``psi(rho)`` [W -> W].

    Shape-preserving cubic interpolation through ``(rho_knots, out_knots)``.
    Beyond the last knot the output stays at its last value.

    Attributes
    ----------
    rho_knots : tuple of float
        Increasing input-power knots, starting at 0 [W].
    out_knots : tuple of float
        Output power at the knots, starting at 0 [W].
    """

    rho_knots: tuple
    out_knots: tuple

    def __post_init__(self):
        r = np.asarray(self.rho_knots, float)
        o = np.asarray(self.out_knots, float)
        if r.shape != o.shape or r.size < 2:
            raise ValueError("knot arrays must match and hold >= 2 points")
        if r[0] != 0 or o[0] != 0 or np.any(np.diff(r) <= 0):
            raise ValueError("knots must start at (0, 0) and increase in rho")
        if np.any(o < 0):
            raise ValueError("output knots must be nonnegative")
        ip = PchipInterpolator(r, o, extrapolate=False)
        object.__setattr__(self, "_interp", ip)
        object.__setattr__(self, "_deriv", ip.derivative())

    @classmethod
    def standin(cls, rho_sat: float, p_max: float, dip: bool = True):
        """Stand-in curve with a knee at ``rho_sat`` and saturation ``p_max``.

        The dip version has a local maximum at ``0.6 rho_sat`` followed by
        a shallow negative-differential segment.
        """
        if dip:
            xs = (0.0, 0.2, 0.45, 0.6, 0.75, 1.0)
            ys = (0.0, 0.12, 0.55, 0.62, 0.57, 1.0)
        else:
            xs = (0.0, 0.3, 0.7, 1.0)
            ys = (0.0, 0.2, 0.75, 1.0)
        return cls(tuple(rho_sat * np.asarray(xs)), tuple(p_max * np.asarray(ys)))

    @property
    def p_max(self) -> float:
        return float(max(self.out_knots))

    @property
    def rho_sat(self) -> float:
        return float(self.rho_knots[-1])

    def __call__(self, rho):
        r = np.asarray(rho, dtype=float)
        if np.any(r < 0):
            raise ValueError("input power must be nonnegative")
        v = self._interp(np.minimum(r, self.rho_sat))
        v = np.clip(np.nan_to_num(v, nan=0.0), 0.0, self.p_max)
        return v[()] if v.ndim == 0 else v

    def derivative(self, rho):
        """``d psi / d rho``, zero beyond the saturation knot."""
        r = np.asarray(rho, dtype=float)
        d = np.where(r <= self.rho_sat, np.nan_to_num(self._deriv(np.minimum(r, self.rho_sat))), 0.0)
        return d[()] if d.ndim == 0 else d


@dataclass(frozen=True)
class ThzLink:
    """Line-of-sight THz link.

    Attributes
    ----------
    fc : float
        Carrier frequency [Hz].
    gt_dbi, gr_dbi : float
        Antenna gains [dBi].
    d : float
        Distance [m].
    sigma_n2 : float
        Noise power at the output [W].
    amp : float
        Peak transmit amplitude ``A``.
    p_req : float
        Required mean harvested power [W].
    """

    fc: float = 300e9
    gt_dbi: float = 30.0
    gr_dbi: float = 10.0
    d: float = 0.3
    sigma_n2: float = float(dbm2watt(-50.0))
    amp: float = 0.75
    p_req: float = 0.0

    @property
    def g(self) -> float:
        """Free-space amplitude gain with antenna gains."""
        gt = 10 ** (self.gt_dbi / 10)
        gr = 10 ** (self.gr_dbi / 10)
        return C_LIGHT / (4.0 * math.pi * self.d * self.fc) * math.sqrt(gt * gr)

    def with_preq(self, p_req: float) -> "ThzLink":
        return ThzLink(self.fc, self.gt_dbi, self.gr_dbi, self.d, self.sigma_n2, self.amp, p_req)


@dataclass
class SDensity:
    """Density of the transmit amplitude on a grid over ``[0, A]``.

    Attributes
    ----------
    s : ndarray
        Increasing grid from 0 to ``A``.
    pdf : ndarray
        Density values on the grid.
    """

    s: np.ndarray
    pdf: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, float)
        self.pdf = np.asarray(self.pdf, float)
        if np.any(self.pdf < 0):
            raise ValueError("density must be nonnegative")

    def mass(self) -> float:
        return float(_trapz(self.pdf, self.s))

    def check(self, tol: float = 1e-6):
        m = self.mass()
        if abs(m - 1.0) > tol:
            raise ValueError(f"density integrates to {m}, not 1")
        return self

    def expect(self, fn) -> float:
        return float(_trapz(self.pdf * fn(self.s), self.s))


def x_of_s(s, link: ThzLink, psi: PsiCurve):
    """Noise-free output amplitude ``sqrt(psi(g^2 s^2))``."""
    return np.sqrt(psi((link.g * np.asarray(s, float)) ** 2))


def output_sample(s_k, link: ThzLink, psi: PsiCurve, rng=None):
    """One or many noisy outputs ``sqrt(psi(g^2 s^2)) + n``."""
    s = np.asarray(s_k, dtype=float)
    if np.any(s < 0) or np.any(s > link.amp * (1 + 1e-12)):
        raise ValueError("amplitude outside [0, A]")
    x = x_of_s(s, link, psi)
    if rng is None:
        return x
    return x + math.sqrt(link.sigma_n2) * rng.standard_normal(np.shape(x))


def dx_ds(s, link: ThzLink, psi: PsiCurve):
    """Derivative of ``x(s) = sqrt(psi(g^2 s^2))``."""
    s = np.maximum(np.asarray(s, float), 1e-12 * link.amp)
    rho = (link.g * s) ** 2
    val = psi(rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = psi.derivative(rho) * link.g**2 * s / np.sqrt(val)
    return np.where(val > 0, d, 0.0)


def branch_intervals(link: ThzLink, psi: PsiCurve, n: int = 20001):
    """Amplitude intervals of the lowest-amplitude monotone branch.

    Keeps the amplitudes at which ``x(s)`` sets a new running maximum, so
    each output level is produced by the smallest amplitude reaching it.
    Amplitudes in and behind a negative-differential dip are dropped.

    Returns
    -------
    list of (float, float)
        Disjoint increasing intervals covering the retained amplitudes.
    """
    s = np.linspace(0.0, link.amp, n)
    x = x_of_s(s, link, psi)
    keep = np.empty(n, bool)
    keep[0] = True
    keep[1:] = x[1:] > np.maximum.accumulate(x)[:-1]
    out = []
    i = 0
    while i < n:
        if not keep[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and keep[j + 1]:
            j += 1
        out.append([s[i], s[j]])
        i = j + 1
    xf = lambda u: float(x_of_s(u, link, psi))
    for k in range(len(out)):
        lo, hi = out[k]
        if k + 1 < len(out):
            # exact local maximum at the end of this piece
            a, b = hi, min(hi + (s[1] - s[0]), link.amp)
            g = (math.sqrt(5) - 1) / 2
            for _ in range(100):
                c, d = b - g * (b - a), a + g * (b - a)
                if xf(c) >= xf(d):
                    b = d
                else:
                    a = c
            out[k][1] = 0.5 * (a + b)
        elif hi < link.amp:
            # exact onset of the saturated plateau
            a, b = max(lo, hi - (s[1] - s[0])), min(hi + (s[1] - s[0]), link.amp)
            top = xf(b)
            for _ in range(100):
                c = 0.5 * (a + b)
                if xf(c) >= top * (1 - 1e-12):
                    b = c
                else:
                    a = c
            out[k][1] = b
        if k > 0:
            # exact recovery point of the running maximum
            peak = xf(out[k - 1][1])
            a = max(lo - (s[1] - s[0]), out[k - 1][1])
            out[k][0] = find_root(lambda u: xf(u) - peak, a, lo, xtol=1e-15 * link.amp) \
                if xf(a) <= peak <= xf(lo) else lo
    return [tuple(v) for v in out]


def amp_grid(link: ThzLink, psi: PsiCurve, n: int = 20001):
    """Amplitude grid with nodes at the branch boundaries.

    Returns
    -------
    s : ndarray
    on : ndarray of bool
        True on the retained monotone branch.
    """
    pieces = branch_intervals(link, psi)
    span = sum(b - a for a, b in pieces)
    s_all, on_all = [], []
    prev_end = None
    for a, b in pieces:
        if prev_end is not None and a > prev_end:
            eps = 1e-12 * link.amp
            gap = np.array([prev_end + eps, a - eps])
            s_all.append(gap)
            on_all.append(np.zeros(2, bool))
        m = max(int(n * (b - a) / span), 16)
        seg = np.linspace(a, b, m)
        s_all.append(seg)
        on_all.append(np.ones(m, bool))
        prev_end = b
    if prev_end < link.amp:
        s_all.append(np.array([prev_end + 1e-12 * link.amp, link.amp]))
        on_all.append(np.zeros(2, bool))
    return np.concatenate(s_all), np.concatenate(on_all)


def monotone_branch(link: ThzLink, psi: PsiCurve, n: int = 20001):
    """Samples ``(s, x)`` of the lowest-amplitude monotone branch."""
    s, on = amp_grid(link, psi, n)
    return s[on], x_of_s(s[on], link, psi)


# ----------------------------------------------------------------------------
# Entropy and rates
# ----------------------------------------------------------------------------
def _trap_weights(s):
    w = np.zeros_like(s)
    ds = np.diff(s)
    w[:-1] += 0.5 * ds
    w[1:] += 0.5 * ds
    return w


def _on_branch(s, link, psi):
    on = np.zeros(s.shape, bool)
    for a, b in branch_intervals(link, psi):
        on |= (s >= a * (1 - 1e-13)) & (s <= b * (1 + 1e-13))
    return on


def _x_masses(f_s: SDensity, link, psi, refine: int = 10):
    # probability masses at output levels; each grid cell is split into
    # ``refine`` sub-cells with linearly interpolated density
    s = f_s.s
    t = (np.arange(refine) + 0.5) / refine
    sl, sr = s[:-1, None], s[1:, None]
    pl, pr = f_s.pdf[:-1, None], f_s.pdf[1:, None]
    sm = sl + (sr - sl) * t
    pm = (pl + (pr - pl) * t) * (sr - sl) / refine
    return x_of_s(sm.ravel(), link, psi), pm.ravel()


def x_entropy(f_s: SDensity, link: ThzLink, psi: PsiCurve, n_bins: int = 4000,
              atom_tol: float = 1e-9) -> float:
    """Differential entropy of ``x = sqrt(psi(g^2 s^2))`` [nats].

    Densities supported on the lowest-amplitude monotone branch use the
    change of variables ``h_x = -int f_s ln(f_s / x'(s)) ds``.  Other
    densities are pushed forward onto an output histogram.  Returns
    ``-inf`` when more than ``atom_tol`` probability lands on a single
    output level (an atom).
    """
    f_s.check(1e-4)
    s, pdf = f_s.s, f_s.pdf
    w = _trap_weights(s)
    on = _on_branch(s, link, psi)
    if np.sum((w * pdf)[~on]) <= 1e-12:
        d = dx_ds(s, link, psi)
        # isolated stationary points of x(s) carry no mass
        pos = (pdf > 0) & on & (d > 0)
        integrand = np.zeros_like(pdf)
        integrand[pos] = pdf[pos] * np.log(pdf[pos] / d[pos])
        return float(-np.sum(w * integrand) / np.sum(w * pdf))
    x, m = _x_masses(f_s, link, psi)
    xmax = math.sqrt(psi.p_max)
    # plateaus of x(s) put finite mass on one level
    flat = np.zeros(x.size, bool)
    flat[1:] = np.abs(np.diff(x)) <= 1e-15 * xmax
    if np.sum(m[flat]) > atom_tol:
        return -math.inf
    edges = np.linspace(0.0, xmax * (1 + 1e-12), n_bins + 1)
    p, _ = np.histogram(x, bins=edges, weights=m)
    p = p / np.sum(p)
    dx = edges[1] - edges[0]
    nz = p > 0
    return float(-np.sum(p[nz] * np.log(p[nz] / dx)))


def _rate_from_h(h, sigma_n2):
    if h == -math.inf:
        return 0.0
    return 0.5 * math.log1p(math.exp(2.0 * h) / (2.0 * math.pi * math.e * sigma_n2))


def achievable_rate(f_s: SDensity, link: ThzLink, psi: PsiCurve) -> float:
    """Entropy-power lower bound ``0.5 ln(1 + e^{2 h_x}/(2 pi e sigma^2))``."""
    return _rate_from_h(x_entropy(f_s, link, psi), link.sigma_n2)


def uniform_rate(p_max: float, sigma_n2: float) -> float:
    """Rate of a uniform ``x`` on ``[0, sqrt(p_max)]``."""
    return 0.5 * math.log1p(p_max / (2.0 * math.pi * math.e * sigma_n2))


def _moments_series(mu):
    # M0 = int_0^1 e^{mu^2 u^2} du, M2 = int_0^1 u^2 e^{mu^2 u^2} du
    m2 = mu * mu
    t = 1.0
    M0 = M2 = 0.0
    for k in range(200):
        if k:
            t *= m2 / k
        M0 += t / (2 * k + 1)
        M2 += t / (2 * k + 3)
        if t < 1e-18 * M0:
            break
    return M0, M2


def ratio_of_mu(mu: float) -> float:
    """Normalised second moment ``E[u^2]`` of the density ``~exp(mu^2 u^2)``.

    Equals ``exp(mu^2)/(sqrt(pi) mu erfi(mu)) - 1/(2 mu^2)``; written with
    Dawson's integral to stay finite, and by series for small ``mu``.
    """
    if mu <= 0:
        return 1.0 / 3.0
    if mu < 2.0:
        M0, M2 = _moments_series(mu)
        return M2 / M0
    return 1.0 / (2.0 * mu * float(dawson(mu))) - 1.0 / (2.0 * mu * mu)


def solve_mu1(ratio: float, mu_max: float = 40.0) -> float:
    """Unique ``mu1 in (0, mu_max]`` with ``ratio_of_mu(mu1) = ratio``."""
    if not (1.0 / 3.0 < ratio < 1.0):
        raise ValueError("ratio must lie in (1/3, 1)")
    return find_root(lambda m: ratio_of_mu(m) - ratio, 1e-12, mu_max, xtol=1e-15)


def _log_norm(mu, p_max):
    # mu0 = ln( int_0^{sqrt(P)} exp(mu^2 x^2 / P) dx )
    if mu < 2.0:
        M0, _ = _moments_series(mu)
        return 0.5 * math.log(p_max) + math.log(M0)
    return 0.5 * math.log(p_max) + mu * mu + math.log(float(dawson(mu)) / mu)


def optimal_rate(link: ThzLink, psi: PsiCurve) -> dict:
    """Max-entropy rate under the harvested-power constraint.

    Returns
    -------
    dict
        ``J`` [nats], ``mu0``, ``mu1``, ``h_x`` and ``regime``
        (``"uniform"`` or ``"exponential"``).
    """
    p_max = psi.p_max
    ratio = link.p_req / p_max
    if ratio < 0:
        raise ValueError("p_req must be nonnegative")
    if ratio >= 1.0:
        raise ValueError("p_req >= P_max is infeasible for a continuous input")
    if ratio <= 1.0 / 3.0:
        h = 0.5 * math.log(p_max)
        return {"J": uniform_rate(p_max, link.sigma_n2), "mu0": h, "mu1": 0.0,
                "h_x": h, "regime": "uniform"}
    mu1 = solve_mu1(ratio)
    mu0 = _log_norm(mu1, p_max)
    h = mu0 - mu1 * mu1 * ratio
    return {"J": _rate_from_h(h, link.sigma_n2), "mu0": mu0, "mu1": mu1,
            "h_x": h, "regime": "exponential"}


def _fx_opt(x, p_max, opt):
    return np.exp(-opt["mu0"] + opt["mu1"] ** 2 * x * x / p_max)


def pushforward_pdf(f_x, link: ThzLink, psi: PsiCurve, n: int = 20001) -> SDensity:
    """Amplitude density whose output amplitude has density ``f_x``.

    ``f_s(s) = f_x(x(s)) x'(s)`` on the lowest-amplitude monotone branch,
    zero elsewhere; renormalised on the grid.
    """
    s, on = amp_grid(link, psi, n)
    x = x_of_s(s, link, psi)
    pdf = np.where(on, f_x(x) * np.maximum(dx_ds(s, link, psi), 0.0), 0.0)
    pdf = pdf / np.sum(_trap_weights(s) * pdf)
    return SDensity(s, pdf)


def uniform_x_pdf(link: ThzLink, psi: PsiCurve, n: int = 20001) -> SDensity:
    """Input density making ``x`` uniform on ``[0, sqrt(P_max)]``."""
    c = 1.0 / math.sqrt(psi.p_max)
    return pushforward_pdf(lambda x: np.full_like(x, c), link, psi, n)


def optimal_input_pdf(link: ThzLink, psi: PsiCurve, n: int = 20001) -> SDensity:
    """Amplitude density realising the max-entropy output density."""
    opt = optimal_rate(link, psi)
    return pushforward_pdf(lambda x: _fx_opt(x, psi.p_max, opt), link, psi, n)


def harvested(f_s: SDensity, link: ThzLink, psi: PsiCurve) -> float:
    """Mean harvested power ``E[psi(g^2 s^2)]`` [W]."""
    x, m = _x_masses(f_s, link, psi)
    return float(np.sum(m * x * x) / np.sum(m))


def mutual_information(f_s: SDensity, link: ThzLink, psi: PsiCurve,
                       n_quad: int = 3000) -> float:
    """``h(y) - h(n)`` for ``y = x + n`` by quadrature [nats].

    The input law is collapsed onto ``n_quad`` output-amplitude bins, then
    the output density is the Gaussian mixture over those bins, integrated
    on a grid of ``2 n_quad`` points.
    """
    sig = math.sqrt(link.sigma_n2)
    x, m = _x_masses(f_s, link, psi)
    m = m / np.sum(m)
    xmax = math.sqrt(psi.p_max)
    edges = np.linspace(0.0, xmax * (1 + 1e-12), n_quad + 1)
    w, _ = np.histogram(x, bins=edges, weights=m)
    sx, _ = np.histogram(x, bins=edges, weights=m * x)
    nz = w > 0
    xc = sx[nz] / w[nz]
    w = w[nz]
    y = np.linspace(-9 * sig, xmax + 9 * sig, 2 * n_quad + 1)
    fy = np.zeros_like(y)
    for i0 in range(0, xc.size, 512):
        d = (y[:, None] - xc[None, i0:i0 + 512]) / sig
        fy += np.exp(-0.5 * d * d) @ w[i0:i0 + 512]
    fy /= math.sqrt(2.0 * math.pi) * sig
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(fy > 0, -fy * np.log(fy), 0.0)
    hy = float(_trapz(integrand, y))
    hn = 0.5 * math.log(2.0 * math.pi * math.e * link.sigma_n2)
    return max(hy - hn, 0.0)


def truncated_gaussian(link: ThzLink, sigma_s: float, n: int = 20001) -> SDensity:
    """Gaussian of mean ``A/2`` and scale ``sigma_s`` truncated to ``[0, A]``."""
    if sigma_s <= 0:
        raise ValueError("sigma_s must be positive")
    s = np.linspace(0.0, link.amp, n)
    pdf = np.exp(-0.5 * ((s - 0.5 * link.amp) / sigma_s) ** 2)
    return SDensity(s, pdf / _trapz(pdf, s))


def gaussian_baseline(link: ThzLink, psi: PsiCurve, sigma_s, n_quad: int = 3000):
    """Mutual information and mean harvest of truncated-Gaussian inputs.

    Returns
    -------
    ndarray, shape (len(sigma_s), 2)
        Columns ``(I [nats], harvest [W])``.
    """
    out = []
    for sg in np.atleast_1d(sigma_s):
        f = truncated_gaussian(link, float(sg))
        out.append((mutual_information(f, link, psi, n_quad), harvested(f, link, psi)))
    return np.asarray(out)
