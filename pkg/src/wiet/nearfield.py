"""
Radiating near-field utilities.

Fraunhofer distance, MRT received power over line-of-sight spherical-wave
links, worst-case-optimal placement of two transmit antennas on a wall of
a cuboid room, and a two-phase far/near beam scan for phased arrays.

Room coordinates: the antennas sit on the line ``y = 0, z = z0`` with
``x`` across the wall.  The room spans ``x in [-lx/2, lx/2]``,
``y in [0, ly]`` and ``z in [-lz/2, lz/2]``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .channel import LosLink, los_gain

__all__ = [
    "Room",
    "ArrayGeometry",
    "fraunhofer",
    "received_power_mrt",
    "worst_case_power_closed_form",
    "worst_case_power",
    "optimize_placement",
    "gain_over_farfield",
    "ula",
    "far_codebook",
    "near_codebook",
    "fnbs_scan",
]

C_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Room:
    """Cuboid room seen from the mounting wall.

    Attributes
    ----------
    lx, ly, lz : float
        Width, depth and height [m].
    z0 : float
        Height of the mounting line relative to the room's mid-height [m].
    shell : float
        Depth of the excluded layer in front of the mounting wall [m].
    """

    lx: float
    ly: float
    lz: float
    z0: float = 0.0
    shell: float = 0.1

    def __post_init__(self):
        if min(self.lx, self.ly, self.lz) <= 0:
            raise ValueError("room dimensions must be positive")
        if abs(self.z0) > self.lz / 2:
            raise ValueError("mounting line must lie inside the room")

    @property
    def lzp(self) -> float:
        """Folded height ``lz + 2|z0|``."""
        return self.lz + 2.0 * abs(self.z0)

    @property
    def q(self) -> float:
        """Shape parameter ``4 ly^2/lx^2 + lzp^2/lx^2``."""
        return (4.0 * self.ly**2 + self.lzp**2) / self.lx**2

    def bounds(self):
        """Box of receiver positions ``((x0, x1), (y0, y1), (z0, z1))``."""
        y0 = min(self.shell, 0.5 * self.ly)
        return (
            (-0.5 * self.lx, 0.5 * self.lx),
            (y0, self.ly),
            (-0.5 * self.lz, 0.5 * self.lz),
        )


@dataclass
class ArrayGeometry:
    """Antenna element positions and wavelength."""

    positions: np.ndarray
    lam: float
    aperture: float = field(default=None)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.shape[0] == 0:
            raise ValueError("array needs at least one element")
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        extent = float(np.max(np.linalg.norm(diff, axis=-1)))
        if self.aperture is None:
            self.aperture = extent
        elif not math.isclose(self.aperture, extent, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("aperture inconsistent with positions")

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def fraunhofer(l_a: float, lam: float) -> float:
    """Fraunhofer distance ``2 l_a^2 / lam`` [m]."""
    if l_a <= 0 or lam <= 0:
        raise ValueError("aperture and wavelength must be positive")
    return 2.0 * l_a**2 / lam


def received_power_mrt(tx_positions, rx_position, p_tx: float = 1.0, c: float = 1.0):
    """MRT received power ``p_tx c sum_i 1/D_i^2`` [W].

    Parameters
    ----------
    tx_positions : array_like, shape (n, 3)
    rx_position : array_like, shape (..., 3)
        One or many receiver positions.
    """
    tx = np.atleast_2d(np.asarray(tx_positions, dtype=float))
    rx = np.asarray(rx_position, dtype=float)
    d2 = np.sum((rx[..., None, :] - tx) ** 2, axis=-1)
    if np.any(d2 <= 0):
        raise ValueError("receiver coincides with a transmit antenna")
    return p_tx * c * np.sum(1.0 / d2, axis=-1)


# ----------------------------------------------------------------------------
# Worst-case placement
# ----------------------------------------------------------------------------
def _branches(lx, ly, lzp):
    b1 = 2.0 / (4.0 / 3.0 * ly**2 + lx**2 / 12.0 + lzp**2 / 3.0)
    q = (4.0 * ly**2 + lzp**2) / lx**2
    b2 = (2.0 * math.sqrt(q + 1.0) + 2.0) / (4.0 * ly**2 + lzp**2)
    b3 = 2.0 / (ly**2 + lx**2 / 4.0 + lzp**2 / 4.0)
    return q, b1, b2, b3


def worst_case_power_closed_form(room: Room, p_tx: float = 1.0, c: float = 1.0) -> float:
    """Max-min received power of two optimally placed antennas.

    Three branches keyed on ``q = 4 ly^2/lx^2 + lzp^2/lx^2`` with
    boundaries at ``q = 5/4`` and ``q = 3``.
    """
    q, b1, b2, b3 = _branches(room.lx, room.ly, room.lzp)
    if q <= 1.25:
        v = b1
    elif q <= 3.0:
        v = b2
    else:
        v = b3
    return p_tx * c * v


def _tx_line(a_list, z0):
    a = np.asarray(a_list, dtype=float)
    return np.stack([a, np.zeros_like(a), np.full_like(a, z0)], axis=-1)


def _grid(room: Room, shape):
    (x0, x1), (y0, y1), (z0, z1) = room.bounds()
    nx, ny, nz = shape
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    zs = np.linspace(z0, z1, nz)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    return np.stack([X, Y, Z], axis=-1).reshape(-1, 3)


def worst_case_power(room: Room, tx_x, p_tx: float = 1.0, c: float = 1.0,
                     grid=(64, 64, 16), refine: bool = True):
    """Minimum MRT received power over the room for given antenna abscissas.

    A grid search locates the worst cell.  Each local minimum along ``x`` of
    the worst grid row is then refined by a bounded scalar search followed
    by a bounded quasi-Newton step in all three coordinates.

    Returns
    -------
    value : float
    rx : ndarray, shape (3,)
        Worst receiver position.
    """
    tx = _tx_line(np.atleast_1d(tx_x), room.z0)
    nx, ny, nz = grid
    pts = _grid(room, grid)
    p = received_power_mrt(tx, pts, p_tx, c)
    i = int(np.argmin(p))
    best, rx = float(p[i]), pts[i]
    if not refine:
        return best, rx
    bnds = room.bounds()
    ix, iy, iz = np.unravel_index(i, grid)
    row = p.reshape(grid)[:, iy, iz]
    xs = np.linspace(*bnds[0], nx)
    f3 = lambda u: float(received_power_mrt(tx, u, p_tx, c))
    for k in range(nx):
        left = row[k - 1] if k > 0 else np.inf
        right = row[k + 1] if k + 1 < nx else np.inf
        if row[k] > left or row[k] > right:
            continue
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, nx - 1)]
        yz = pts[i][1:]
        fx = lambda x: f3(np.array([x, yz[0], yz[1]]))
        r1 = minimize_scalar(fx, bounds=(lo, hi), method="bounded",
                             options={"xatol": 1e-12 * room.lx})
        cands = [(r1.fun, r1.x), (fx(lo), lo), (fx(hi), hi)]
        v, x = min(cands)
        u0 = np.array([x, yz[0], yz[1]])
        res = minimize(f3, u0, method="L-BFGS-B", bounds=bnds,
                       options={"ftol": 1e-15, "gtol": 1e-16, "maxiter": 200})
        if res.fun < v:
            v, u0 = float(res.fun), np.asarray(res.x)
        if v < best:
            best, rx = float(v), u0
    return best, rx


def _golden_max(f, lo, hi, tol=1e-10, n_max=200):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(n_max):
        if b - a <= tol * max(1.0, hi - lo):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    cands = [(f(x), x), (f(lo), lo), (fc, c), (fd, d)]
    return max(cands)


def optimize_placement(room: Room, n_t: int = 2, grid=(64, 64, 16), n_sweeps: int = 4):
    """Max-min antenna abscissas on the mounting line.

    For two antennas the symmetric pair ``(a, -a)`` is searched by golden
    section over ``a in [0, lx/2]``; other counts use coordinate ascent.

    Returns
    -------
    positions : ndarray, shape (n_t,)
        Abscissas, sorted decreasingly.
    value : float
        Achieved worst-case power (``p_tx = c = 1``).
    """
    if n_t < 1:
        raise ValueError("n_t must be >= 1")
    wc = lambda xs: worst_case_power(room, xs, grid=grid)[0]
    if n_t == 1:
        return np.array([0.0]), wc([0.0])
    half = 0.5 * room.lx
    if n_t == 2:
        val, a = _golden_max(lambda a: wc([a, -a]), 0.0, half)
        return np.array([a, -a]), val
    xs = np.linspace(-half, half, n_t + 2)[1:-1]
    val = wc(xs)
    for _ in range(n_sweeps):
        for i in range(n_t):
            def f(x, i=i):
                trial = xs.copy()
                trial[i] = x
                return wc(trial)
            v, x = _golden_max(f, -half, half, tol=1e-6)
            if v > val:
                xs[i], val = x, v
    return np.sort(xs)[::-1], val


def gain_over_farfield(room: Room) -> float:
    """Worst-case power gain of the optimal pair over co-located antennas."""
    _, b1, b2, b3 = _branches(room.lx, room.ly, room.lzp)
    return max(worst_case_power_closed_form(room) / b3, 1.0)


# ----------------------------------------------------------------------------
# Far/near beam scanning
# ----------------------------------------------------------------------------
def ula(n: int, lam: float, spacing=None) -> ArrayGeometry:
    """Uniform linear array along x, centred at the origin, facing +y."""
    d = lam / 2.0 if spacing is None else spacing
    x = (np.arange(n) - (n - 1) / 2.0) * d
    pos = np.stack([x, np.zeros(n), np.zeros(n)], axis=-1)
    return ArrayGeometry(pos, lam)


def _focus_weights(array: ArrayGeometry, points):
    # unit-modulus conjugate phases of the LoS channel to each focal point
    d = np.linalg.norm(points[:, None, :] - array.positions[None, :, :], axis=-1)
    return np.exp(2j * math.pi * d / array.lam) / math.sqrt(array.n)


def far_codebook(array: ArrayGeometry, n_beams: int):
    """Steering beams over azimuth ``(-pi/2, pi/2)``.

    Returns
    -------
    weights : ndarray, shape (n_beams, n)
    angles : ndarray, shape (n_beams,)
    """
    u = -1.0 + (2.0 * np.arange(n_beams) + 1.0) / n_beams
    angles = np.arcsin(u)
    k = 2.0 * math.pi / array.lam
    x = array.positions[:, 0]
    w = np.exp(-1j * k * np.outer(np.sin(angles), x)) / math.sqrt(array.n)
    return w, angles


def near_codebook(array: ArrayGeometry, angles, ranges):
    """Focusing beams on a range-azimuth grid.

    Returns
    -------
    weights : ndarray, shape (len(angles) * len(ranges), n)
    points : ndarray, shape (len(angles) * len(ranges), 3)
    """
    A, R = np.meshgrid(np.asarray(angles, float), np.asarray(ranges, float), indexing="ij")
    pts = np.stack([R * np.sin(A), R * np.cos(A), np.zeros_like(A)], axis=-1).reshape(-1, 3)
    return _focus_weights(array, pts), pts


def fnbs_scan(array: ArrayGeometry, rx_position, n_far: int = 64,
              ranges=None, n_near_angles: int = 9, link: LosLink = None,
              noise_std: float = 0.0, rng=None):
    """Two-phase far/near beam scan driven by received power only.

    Phase one sweeps ``n_far`` steering beams.  Phase two sweeps focusing
    beams restricted to azimuths within one far-beam width of the far
    winner; the far winner itself stays in the candidate set.

    Parameters
    ----------
    array : ArrayGeometry
    rx_position : array_like, shape (3,)
    n_far : int
        Far-field codebook size.
    ranges : array_like, optional
        Focal ranges of the near codebook.  Defaults to a geometric grid
        from ``0.05 d_F`` to ``2 d_F``.
    n_near_angles : int
        Azimuth samples around the far winner.
    link : LosLink, optional
    noise_std : float
        Standard deviation of additive power-measurement noise.
    rng : numpy Generator, optional

    Returns
    -------
    dict
        ``far_index``, ``far_power``, ``near_power``, ``weights``,
        ``trace`` (measured power per scanned beam, far phase first) and
        ``focus`` (near focal point, ``None`` if the far beam won).
    """
    link = link or LosLink(1.0, array.lam)
    rx = np.asarray(rx_position, dtype=float)
    h = los_gain(np.linalg.norm(array.positions - rx, axis=-1), link)
    measure = lambda W: np.abs(W @ h) ** 2
    rng = rng or np.random.default_rng(0)

    def noisy(p):
        if noise_std > 0:
            return p + noise_std * rng.standard_normal(p.shape)
        return p

    wf, angles = far_codebook(array, n_far)
    pf = noisy(measure(wf))
    i_far = int(np.argmax(pf))

    d_f = fraunhofer(array.aperture, array.lam)
    if ranges is None:
        ranges = np.geomspace(0.05 * d_f, 2.0 * d_f, 64)
    width = 2.0 / n_far
    u0 = math.sin(angles[i_far])
    us = np.clip(u0 + np.linspace(-width, width, n_near_angles), -1.0, 1.0)
    wn, pts = near_codebook(array, np.arcsin(us), ranges)
    wn = np.vstack([wf[i_far][None, :], wn])
    pn = noisy(measure(wn))
    j = int(np.argmax(pn))
    return {
        "far_index": i_far,
        "far_power": float(measure(wf[i_far][None, :])[0]),
        "near_power": float(measure(wn[j][None, :])[0]),
        "weights": wn[j],
        "focus": None if j == 0 else pts[j - 1],
        "trace": np.concatenate([pf, pn]),
    }
