"""
IRS-assisted SWIPT and power-feedback IRS configuration.

Three groups of tools:

* hybrid analog/digital precoding with passive beamforming for multi-user
  power splitting receivers (transmit sum-power minimisation),
* self-sustainable IRS operating modes where both the IRS and the receiver
  harvest energy by time switching or power splitting,
* received-power-feedback algorithms on simulated line-of-sight
  environments: multi-tile beam scanning, multi-focus patterns and beam
  sharing between a data and a power transmitter.

Effective channels follow ``h_k^H = h_{d,k}^H + theta^H H_k`` with
``H_k = diag(h_{r,k}^H) H`` and ``theta = conj(diag(Theta))``.
"""

import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .channel import complex_normal, db2lin, dbm2watt
from .ehmodels import SigmoidEh, harvest, sigmoid_eh_inverse

__all__ = [
    "IrsState",
    "HybridTx",
    "IrsSwiptProblem",
    "InfeasibleError",
    "effective_channel",
    "cascaded",
    "ps_metrics",
    "digital_min_power",
    "solve_hp_pb_ps",
    "fd_min_power",
    "realize_hybrid",
    "HpSolution",
    "random_irs_problem",
    "MODES",
    "ModeSchedule",
    "ModeScenario",
    "ModeChannels",
    "mode_channels",
    "mode_eval",
    "mode_sim",
    "Node",
    "facing",
    "LosEnv",
    "tiles",
    "scan_codebook",
    "ScanResult",
    "mtbs_scan",
    "focus_phases",
    "multi_focus",
    "BsaLinks",
    "bsa_metrics",
    "pa_mixed",
    "beam_sharing",
    "random_mtbs_env",
    "random_bsa_env",
    "random_multifocus_env",
]


class InfeasibleError(ValueError):
    """Raised when the QoS targets cannot be met."""


# ----------------------------------------------------------------------------
# States
# ----------------------------------------------------------------------------
@dataclass
class IrsState:
    """Phase configuration of the surface.

    Attributes
    ----------
    phases : ndarray
        ``theta_n`` in ``[0, 2 pi)``.
    bits : int or None
        Quantisation bits; ``None`` for continuous phases.
    tile : tuple of int, optional
        ``(rows, cols)`` of one tile when the surface is tiled.
    """

    phases: np.ndarray
    bits: int = None
    tile: tuple = None

    def __post_init__(self):
        p = np.mod(np.asarray(self.phases, dtype=float), 2 * math.pi)
        if self.bits is not None:
            step = 2 * math.pi / 2**self.bits
            p = np.mod(np.round(p / step) * step, 2 * math.pi)
        self.phases = p

    @property
    def n(self) -> int:
        return self.phases.size

    @property
    def diag(self) -> np.ndarray:
        """Reflection coefficients ``e^{j theta_n}``."""
        return np.exp(1j * self.phases)

    @property
    def theta(self) -> np.ndarray:
        """``conj(diag(Theta))``."""
        return np.exp(-1j * self.phases)

    def lattice(self):
        if self.bits is None:
            return None
        return 2 * math.pi * np.arange(2**self.bits) / 2**self.bits

    def on_lattice(self, tol=1e-12) -> bool:
        lat = self.lattice()
        if lat is None:
            return True
        d = np.abs(np.angle(np.exp(1j * (self.phases[:, None] - lat[None, :]))))
        return bool(np.all(d.min(axis=1) < tol))

    @classmethod
    def random(cls, n, rng, bits=None, tile=None):
        return cls(rng.uniform(0, 2 * math.pi, n), bits, tile)


@dataclass
class HybridTx:
    """Fully connected hybrid precoder.

    Attributes
    ----------
    f_r : ndarray, shape (M, L)
        Analog precoder with unit-modulus entries.
    f_b : ndarray, shape (L, K)
        Digital precoder, column ``k`` is ``f_k``.
    """

    f_r: np.ndarray
    f_b: np.ndarray

    def __post_init__(self):
        m, l = self.f_r.shape
        if self.f_b.shape[0] != l:
            raise ValueError("F_B rows must equal the RF chain count")
        if not (self.f_b.shape[1] <= l <= m):
            raise ValueError("need K <= L <= M")

    @property
    def m(self) -> int:
        return self.f_r.shape[0]

    @property
    def l(self) -> int:
        return self.f_r.shape[1]

    @property
    def k(self) -> int:
        return self.f_b.shape[1]

    @property
    def beams(self) -> np.ndarray:
        """Transmit beams ``F_R f_k`` as columns, shape (M, K)."""
        return self.f_r @ self.f_b

    @property
    def p_sum(self) -> float:
        return float(np.sum(np.abs(self.beams) ** 2))

    @staticmethod
    def phases_to_fr(phi):
        return np.exp(1j * np.asarray(phi))


# ----------------------------------------------------------------------------
# Channels and metrics
# ----------------------------------------------------------------------------
def cascaded(h_r, h_inc):
    """``H_k = diag(h_{r,k}^H) H`` for every receiver.

    Parameters
    ----------
    h_r : ndarray, shape (K, N_E)
        Rows are ``h_{r,k}`` (the conjugate transpose enters).
    h_inc : ndarray, shape (N_E, M)
        Incident channel ``H``.

    Returns
    -------
    ndarray, shape (K, N_E, M)
    """
    h_r = np.atleast_2d(h_r)
    return h_r.conj()[:, :, None] * h_inc[None, :, :]


def effective_channel(h_d, h_k, state: IrsState, amplitude=1.0):
    """Effective row channels ``h_{d,k}^H + a theta^H H_k``.

    Parameters
    ----------
    h_d : ndarray, shape (K, M) or (M,)
        Rows are ``h_{d,k}``.
    h_k : ndarray, shape (K, N_E, M) or (N_E, M)
        Cascaded channels; ``None`` or ``N_E = 0`` means no surface.
    state : IrsState or None
    amplitude : float
        Reflection amplitude (``sqrt(rho)`` for a power-splitting surface).

    Returns
    -------
    ndarray
        ``h_k^H`` as rows, same leading shape as ``h_d``.
    """
    h_d = np.asarray(h_d, dtype=complex)
    row = h_d.conj()
    if h_k is None or state is None or np.size(h_k) == 0:
        return row
    h_k = np.asarray(h_k)
    if h_k.shape[-2] != state.n or h_k.shape[-1] != h_d.shape[-1]:
        raise ValueError("IRS channel dimensions do not match")
    # theta^H H_k with conj(theta_n) = e^{j phase_n}
    return row + amplitude * np.einsum("n,...nm->...m", state.diag, h_k)


def ps_metrics(h_rows, tx: HybridTx, rho, sigma2, sigma_c2, eh=None):
    """SINR, EH-branch RF power and harvested power per receiver.

    Parameters
    ----------
    h_rows : ndarray, shape (K, M)
        Effective channels ``h_k^H``.
    tx : HybridTx
    rho : array_like
        Power-splitting ratios (share sent to the decoder).
    sigma2, sigma_c2 : float or array_like
        Antenna and conversion noise powers.
    eh : harvester, optional

    Returns
    -------
    dict with ``sinr``, ``e`` and ``e_h``.
    """
    rho = np.broadcast_to(np.asarray(rho, float), (h_rows.shape[0],))
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("rho must lie in [0, 1]")
    a = np.abs(h_rows @ tx.beams) ** 2            # a[k, j] = |h_k^H F_R f_j|^2
    sig = np.diag(a).copy()
    itf = a.sum(axis=1) - sig
    den = rho * (itf + sigma2) + sigma_c2
    sinr = np.where(den > 0, rho * sig / np.where(den > 0, den, 1.0), 0.0)
    e = (1.0 - rho) * a.sum(axis=1)
    out = {"sinr": sinr, "e": e}
    if eh is not None:
        out["e_h"] = np.asarray(harvest(eh, e), float)
    return out


# ----------------------------------------------------------------------------
# Hybrid precoding, passive beamforming and power splitting
# ----------------------------------------------------------------------------
@dataclass
class IrsSwiptProblem:
    """Transmit sum-power minimisation with PS receivers.

    Attributes
    ----------
    h_d : ndarray, shape (K, M)
        Direct channels ``h_{d,k}`` as rows.
    h_r : ndarray, shape (K, N_E)
        IRS-to-receiver channels.
    h_inc : ndarray, shape (N_E, M)
        Transmitter-to-IRS channel ``H``.
    gamma : ndarray, shape (K,)
        Linear SINR targets.
    q : ndarray, shape (K,)
        RF power required at each EH branch [W].
    sigma2, sigma_c2 : float
        Antenna and conversion noise powers [W].
    n_rf : int
        RF chains ``L``.
    """

    h_d: np.ndarray
    h_r: np.ndarray
    h_inc: np.ndarray
    gamma: np.ndarray
    q: np.ndarray
    sigma2: float = 1e-10
    sigma_c2: float = 1e-8
    n_rf: int = 6

    def __post_init__(self):
        self.h_d = np.atleast_2d(np.asarray(self.h_d, complex))
        k, m = self.h_d.shape
        self.h_r = np.asarray(self.h_r, complex).reshape(k, -1)
        self.h_inc = np.asarray(self.h_inc, complex).reshape(self.h_r.shape[1], m)
        self.gamma = np.broadcast_to(np.asarray(self.gamma, float), (k,)).copy()
        self.q = np.broadcast_to(np.asarray(self.q, float), (k,)).copy()
        if not (k <= self.n_rf <= m):
            raise ValueError("need K <= L <= M")

    @property
    def k(self) -> int:
        return self.h_d.shape[0]

    @property
    def m(self) -> int:
        return self.h_d.shape[1]

    @property
    def n_e(self) -> int:
        return self.h_r.shape[1]

    @property
    def h_k(self):
        return cascaded(self.h_r, self.h_inc)

    def rows(self, state):
        if self.n_e == 0:
            return self.h_d.conj()
        return effective_channel(self.h_d, self.h_k, state)

    def subset(self, n_e):
        """Same instance restricted to the first ``n_e`` elements."""
        return IrsSwiptProblem(self.h_d, self.h_r[:, :n_e], self.h_inc[:n_e], self.gamma, self.q,
                               self.sigma2, self.sigma_c2, self.n_rf)

    def with_(self, **kw):
        d = dict(h_d=self.h_d, h_r=self.h_r, h_inc=self.h_inc, gamma=self.gamma, q=self.q,
                 sigma2=self.sigma2, sigma_c2=self.sigma_c2, n_rf=self.n_rf)
        d.update(kw)
        return IrsSwiptProblem(**d)


@dataclass
class HpSolution:
    """Output of :func:`solve_hp_pb_ps`."""

    tx: HybridTx
    state: IrsState
    rho: np.ndarray
    p_sum: float
    trace: list = field(default_factory=list)


def _gain_matrix(rows, beams):
    return np.abs(rows @ beams) ** 2


def _required_scale(a, rho, gamma, q, sigma2, sigma_c2):
    """Smallest ``c^2`` making ``c * beams`` meet every constraint.

    ``a`` has shape (..., K, K) with ``a[k, j] = |h_k^H w_j|^2``.
    """
    sig = np.diagonal(a, axis1=-2, axis2=-1)
    tot = a.sum(axis=-1)
    itf = tot - sig
    c_eh = q / np.maximum((1.0 - rho) * tot, 1e-300)
    margin = sig - gamma * itf
    need = gamma * (rho * sigma2 + sigma_c2) / rho
    c_id = np.where(margin > 0, need / np.where(margin > 0, margin, 1.0), np.inf)
    return np.max(np.maximum(c_eh, c_id), axis=-1)


def _check(problem, rows, tx, rho, rtol=1e-6):
    m = ps_metrics(rows, tx, rho, problem.sigma2, problem.sigma_c2)
    return bool(np.all(m["sinr"] >= problem.gamma * (1 - rtol))
                and np.all(m["e"] >= problem.q * (1 - rtol)))


def _solve_cvx(prob):
    for solver in ("CLARABEL", "SCS"):
        try:
            prob.solve(solver=solver)
        except (cp.error.SolverError, ValueError):
            continue
        if prob.status in ("optimal", "optimal_inaccurate"):
            return True
    return False


def _repair(b, a_cost, dirs, problem):
    """Powers and PS ratios for fixed beam directions ``dirs`` (L, K).

    With directions fixed the problem is convex in ``(p, rho)``; gains and
    powers are normalised so the largest EH target is one.
    """
    k = problem.k
    s = np.abs(b @ dirs) ** 2                       # s[k, j]
    scale = float(np.max(s))
    if not np.isfinite(scale) or scale <= 0:
        return None
    s = s / scale
    q_ref = float(max(np.max(problem.q), problem.sigma_c2))
    unit = q_ref / scale                            # watts per unit of p
    g = problem.gamma
    p = cp.Variable(k, nonneg=True)
    rho = cp.Variable(k)
    cost = np.real(np.einsum("lk,lm,mk->k", dirs.conj(), a_cost, dirs))
    cons = [rho >= 1e-6, rho <= 1 - 1e-6]
    for i in range(k):
        itf = sum(p[j] * s[i, j] for j in range(k) if j != i)
        cons.append(p[i] * s[i, i] - g[i] * itf
                    >= g[i] * problem.sigma2 / q_ref
                    + g[i] * problem.sigma_c2 / q_ref * cp.inv_pos(rho[i]))
        cons.append(s[i] @ p >= problem.q[i] / q_ref * cp.inv_pos(1 - rho[i]))
    prob = cp.Problem(cp.Minimize(cost @ p), cons)
    if not _solve_cvx(prob) or p.value is None:
        return None
    f_b = dirs * np.sqrt(np.maximum(p.value, 0.0) * unit)[None, :]
    return f_b, np.clip(np.asarray(rho.value, float), 1e-6, 1 - 1e-6)


def _gen(stream):
    if stream is None:
        return np.random.default_rng(0)
    return stream if isinstance(stream, np.random.Generator) else stream.generator()


def digital_min_power(b, a_cost, problem):
    """Digital precoder and PS ratios for a fixed effective channel.

    The cost ``f^H A f`` is whitened with the Cholesky factor of ``A`` and
    the beams are restricted to the span of the whitened channels, which
    holds at any minimum-power point.  In those ``K`` coordinates the
    semidefinite relaxation in ``Z_k = z_k z_k^H`` is solved jointly with
    ``rho_k``: SINR and EH constraints are affine in ``Z`` plus ``1/rho``
    and ``1/(1-rho)`` terms.  The relaxed solution is mapped to rank one
    by principal eigenvectors followed by a convex power/PS repair and an
    exact feasibility rescaling.

    Parameters
    ----------
    b : ndarray, shape (K, L)
        ``h_k^H F_R`` as rows.
    a_cost : ndarray, shape (L, L)
        ``F_R^H F_R``, so that ``||F_R f||^2 = f^H a_cost f``.
    problem : IrsSwiptProblem

    Returns
    -------
    f_b : ndarray, shape (L, K)
    rho : ndarray, shape (K,)

    Raises
    ------
    InfeasibleError
    """
    k, l = b.shape
    a_cost = 0.5 * (a_cost + a_cost.conj().T)
    ridge = 1e-12 * float(np.real(np.trace(a_cost))) / l
    r_up = np.linalg.cholesky(a_cost + ridge * np.eye(l)).conj().T     # A = R^H R
    c = np.linalg.solve(r_up.T, b.T).T                                 # b R^{-1}
    u, sv, _ = np.linalg.svd(c.conj().T, full_matrices=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise InfeasibleError("effective channels are linearly dependent")
    d = c @ u                                                          # (K, K)
    scale = float(np.max(np.sum(np.abs(d) ** 2, axis=1)))
    dn = d / math.sqrt(scale)
    q_ref = float(max(np.max(problem.q), problem.sigma_c2))
    r0 = problem.sigma_c2 / q_ref
    g = problem.gamma
    gram = np.einsum("ki,kj->kij", dn.conj(), dn)
    zs = [cp.Variable((k, k), hermitian=True) for _ in range(k)]
    r = cp.Variable(k)
    rho = r0 * r
    tr = [[cp.real(cp.sum(cp.multiply(gram[i].T, zs[j]))) for j in range(k)] for i in range(k)]
    cons = [z >> 0 for z in zs] + [r >= 1e-9, rho <= 1 - 1e-9]
    for i in range(k):
        itf = sum(tr[i][j] for j in range(k) if j != i)
        cons.append(tr[i][i] - g[i] * itf >= g[i] * problem.sigma2 / q_ref + g[i] * cp.inv_pos(r[i]))
        cons.append(sum(tr[i]) >= problem.q[i] / q_ref * cp.inv_pos(1 - rho[i]))
    prob = cp.Problem(cp.Minimize(sum(cp.real(cp.trace(z)) for z in zs)), cons)
    if not _solve_cvx(prob):
        raise InfeasibleError(f"digital block: {prob.status}")
    dirs = np.empty((k, k), complex)
    direct = np.empty((k, k), complex)
    for i, z in enumerate(zs):
        w, v = np.linalg.eigh(0.5 * (z.value + z.value.conj().T))
        dirs[:, i] = v[:, -1]
        direct[:, i] = v[:, -1] * math.sqrt(max(w[-1], 0.0) * q_ref / scale)
    rho_sdr = np.clip(r0 * np.asarray(r.value, float), 1e-9, 1 - 1e-9)
    cands = [(direct, rho_sdr)]
    out = _repair(d, np.eye(k), dirs, problem)
    if out is not None:
        cands.append(out)
    best = None
    for z_b, rho_v in cands:
        try:
            f_b, rho_v = _tighten(b, np.linalg.solve(r_up, u @ z_b), rho_v, problem)
        except InfeasibleError:
            continue
        if best is None or _cost(f_b, a_cost) < _cost(best[0], a_cost):
            best = (f_b, rho_v)
    if best is None:
        raise InfeasibleError("rank-one extraction failed")
    return best


def _cost(f_b, a_cost):
    return float(np.real(np.einsum("lk,lm,mk->", f_b.conj(), a_cost, f_b)))


def _tighten(b, f_b, rho, problem):
    """Rescale ``f_b`` to the smallest power meeting every constraint."""
    a = np.abs(b @ f_b) ** 2
    c2 = _required_scale(a, rho, problem.gamma, problem.q, problem.sigma2, problem.sigma_c2)
    if not np.isfinite(c2):
        raise InfeasibleError("SINR targets not reachable with these directions")
    return f_b * math.sqrt(c2 * (1 + 1e-9)), rho


def _analog_init(rows, l, m):
    k = rows.shape[0]
    f_r = np.empty((m, l), complex)
    f_r[:, :k] = np.exp(1j * np.angle(rows.conj().T))
    dft = np.exp(2j * math.pi * np.outer(np.arange(m), np.arange(l)) / m)
    f_r[:, k:] = dft[:, k:l]
    return f_r


def _irs_pass(problem, state, beams, rho, cands):
    """One coordinatewise sweep over the surface phases.

    Each element takes the candidate phase (incumbent included) minimising
    the power needed to restore feasibility for the current beams.
    """
    hk = problem.h_k
    rows = problem.rows(state)
    hw = rows @ beams
    v = np.einsum("knm,mj->nkj", hk, beams)
    phases = state.phases.copy()
    args = (rho, problem.gamma, problem.q, problem.sigma2, problem.sigma_c2)
    best = _required_scale(np.abs(hw) ** 2, *args)
    for n in range(problem.n_e):
        cur = np.exp(1j * phases[n])
        delta = np.exp(1j * cands) - cur
        trial = hw[None] + delta[:, None, None] * v[n][None]
        c2 = _required_scale(np.abs(trial) ** 2, *args)
        g = int(np.argmin(c2))
        if c2[g] < best:
            best = c2[g]
            phases[n] = cands[g]
            hw = trial[g]
    return IrsState(phases, state.bits, state.tile), best


def _analog_pass(rows, tx, rho, problem, cands):
    """Coordinatewise sweep over the analog phases ``phi_{m,l}``."""
    f_r = tx.f_r.copy()
    f_b = tx.f_b
    w = f_r @ f_b
    hw = rows @ w
    args = (rho, problem.gamma, problem.q, problem.sigma2, problem.sigma_c2)
    p_rest = float(np.sum(np.abs(w) ** 2))
    best = _required_scale(np.abs(hw) ** 2, *args) * p_rest
    m, l = f_r.shape
    for mi in range(m):
        for li in range(l):
            delta = np.exp(1j * cands) - f_r[mi, li]
            dw = delta[:, None] * f_b[li][None, :]                  # (G, K)
            row_new = w[mi][None] + dw
            p = p_rest - np.sum(np.abs(w[mi]) ** 2) + np.sum(np.abs(row_new) ** 2, axis=1)
            trial = hw[None] + rows[None, :, mi, None] * dw[:, None, :]
            cost = _required_scale(np.abs(trial) ** 2, *args) * p
            g = int(np.argmin(cost))
            if cost[g] < best:
                best = cost[g]
                f_r[mi, li] = np.exp(1j * cands[g])
                p_rest = p[g]
                w[mi] = row_new[g]
                hw = trial[g]
    return HybridTx(f_r, f_b), best


def realize_hybrid(beams, n_rf):
    """Exact hybrid factorisation ``F_R F_B = beams`` when ``L >= 2K``.

    Every entry ``x`` of a beam scaled by ``c = max|w|/2`` satisfies
    ``|x| <= 2`` and splits into two unit-modulus terms,
    ``x = e^{j(arg x + t)} + e^{j(arg x - t)}`` with ``t = arccos(|x|/2)``.
    Spare RF chains get DFT columns and zero digital weight.
    """
    m, k = beams.shape
    if n_rf < 2 * k:
        raise ValueError("exact factorisation needs L >= 2K")
    f_r = np.exp(2j * math.pi * np.outer(np.arange(m), np.arange(n_rf)) / m)
    f_b = np.zeros((n_rf, k), complex)
    for i in range(k):
        w = beams[:, i]
        c = float(np.max(np.abs(w))) / 2.0
        if c == 0.0:
            continue
        x = w / c
        t = np.arccos(np.clip(np.abs(x) / 2.0, 0.0, 1.0))
        f_r[:, 2 * i] = np.exp(1j * (np.angle(x) + t))
        f_r[:, 2 * i + 1] = np.exp(1j * (np.angle(x) - t))
        f_b[2 * i, i] = f_b[2 * i + 1, i] = c
    return HybridTx(f_r, f_b)


def _hybrid_from_fd(problem, rows, beams, rho, cands, max_iter, tol):
    """Hybrid precoder for ``L < 2K`` by analog/digital alternation."""
    f_r = _analog_init(rows, problem.n_rf, problem.m)
    f_b, rho = digital_min_power(rows @ f_r, f_r.conj().T @ f_r, problem)
    tx = HybridTx(f_r, f_b)
    for _ in range(max_iter):
        prev = tx.p_sum
        new_tx, c = _analog_pass(rows, tx, rho, problem, cands)
        if c < tx.p_sum:
            tx = HybridTx(new_tx.f_r, new_tx.f_b * math.sqrt(c / new_tx.p_sum * (1 + 1e-9)))
        try:
            f_b, r = digital_min_power(rows @ tx.f_r, tx.f_r.conj().T @ tx.f_r, problem)
            if _cost(f_b, tx.f_r.conj().T @ tx.f_r) < tx.p_sum:
                tx, rho = HybridTx(tx.f_r, f_b), r
        except InfeasibleError:
            pass
        if prev - tx.p_sum <= tol * prev:
            break
    return tx, rho


def solve_hp_pb_ps(problem: IrsSwiptProblem, state=None, optimize_irs=True, start=None,
                   max_iter=30, tol=1e-4, n_candidates=16, stream=None):
    """Block alternating minimisation of the transmit sum-power.

    Blocks: transmit beams with PS ratios (convex relaxation, see
    :func:`digital_min_power`) and surface phases (coordinatewise search
    over ``n_candidates`` phases plus the incumbent, followed by an exact
    power rescaling).  Every block keeps the iterate feasible and never
    raises the cost.  The beams are then realised by the hybrid
    architecture, exactly when ``L >= 2K`` (:func:`realize_hybrid`) and by
    alternating analog phase sweeps with digital re-solves otherwise.

    Parameters
    ----------
    problem : IrsSwiptProblem
    state : IrsState, optional
        Initial surface configuration; random when omitted.
    optimize_irs : bool
        ``False`` keeps the surface phases fixed (random-phase baseline).
    start : HpSolution, optional
        Feasible starting point (overrides ``state``).
    max_iter : int
    tol : float
        Relative improvement below which the iteration stops.
    n_candidates : int
    stream : RngStream or Generator, optional

    Returns
    -------
    HpSolution
        ``trace`` holds the fully digital cost after every sweep.

    Raises
    ------
    InfeasibleError
    """
    cands = 2 * math.pi * np.arange(n_candidates) / n_candidates
    eye = np.eye(problem.m, dtype=complex)
    if start is not None:
        state = start.state
        beams, rho = start.tx.beams.copy(), start.rho.copy()
    else:
        if state is None:
            state = IrsState.random(problem.n_e, _gen(stream))
        beams, rho = digital_min_power(problem.rows(state), eye, problem)
    cost = float(np.sum(np.abs(beams) ** 2))
    trace = [cost]
    if optimize_irs and problem.n_e > 0:
        for _ in range(max_iter):
            prev = cost
            new_state, c2 = _irs_pass(problem, state, beams, rho, cands)
            if c2 < 1.0:
                state = new_state
                beams = beams * math.sqrt(c2 * (1 + 1e-9))
            try:
                f, r = digital_min_power(problem.rows(state), eye, problem)
                if _cost(f, eye) < _cost(beams, eye):
                    beams, rho = f, r
            except InfeasibleError:
                pass
            cost = _cost(beams, eye)
            trace.append(cost)
            if prev - cost <= tol * prev:
                break
    rows = problem.rows(state)
    if problem.n_rf >= 2 * problem.k:
        tx = realize_hybrid(beams, problem.n_rf)
    else:
        tx, rho = _hybrid_from_fd(problem, rows, beams, rho, cands, max_iter, tol)
    if not _check(problem, rows, tx, rho):
        raise InfeasibleError("no feasible point found")
    return HpSolution(tx, state, rho, tx.p_sum, trace)


def fd_min_power(problem: IrsSwiptProblem, state=None):
    """Fully digital minimum power for a fixed surface configuration.

    Returns
    -------
    HpSolution
        ``tx.f_r`` is the identity (``L = M``).
    """
    rows = problem.rows(state)
    eye = np.eye(problem.m, dtype=complex)
    f_b, rho = digital_min_power(rows, eye, problem)
    tx = HybridTx(eye, f_b)
    return HpSolution(tx, state, rho, tx.p_sum, [tx.p_sum])


def _upa_correlation(n_e):
    side = int(math.ceil(math.sqrt(n_e)))
    idx = np.arange(n_e)
    pos = np.stack([idx % side, idx // side], axis=1).astype(float)
    dist = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
    # half-wavelength spacing, isotropic scattering
    return np.sinc(dist)


def _corr_sqrt(r):
    w, u = np.linalg.eigh(r)
    return u * np.sqrt(np.maximum(w, 0.0))


def random_irs_problem(stream, n_e=256, m=24, k=2, n_rf=6, gamma_db=0.0, q_out_dbm=-15.0,
                       eh=None, sigma2_dbm=-70.0, sigma_c2_dbm=-50.0, pl_exp=2.5,
                       ref_gain_db=-30.0, d_ti=5.0, d_ir=1.5, d_tr=6.0):
    """Random instance with spatially correlated Rayleigh fading at the IRS.

    The surface is a square array at half-wavelength spacing with the
    ``sinc`` correlation of isotropic scattering; transmit antennas are
    uncorrelated.  Taking the first ``n`` elements of a larger instance
    (:meth:`IrsSwiptProblem.subset`) gives nested surfaces.

    ``q_out_dbm`` is the harvested DC power per receiver; the RF target is
    obtained through the inverse of ``eh`` (logistic, 13.8 dBm saturation
    by default).
    """
    rng = _gen(stream)
    if eh is None:
        eh = SigmoidEh(psat=float(dbm2watt(13.8)), a=150.0, b=0.024)
    ref = float(db2lin(ref_gain_db))
    beta = lambda d: ref * float(d) ** (-pl_exp)
    root = _corr_sqrt(_upa_correlation(n_e)) if n_e else np.zeros((0, 0))
    h_inc = math.sqrt(beta(d_ti)) * root @ complex_normal(rng, (n_e, m))
    h_r = math.sqrt(beta(d_ir)) * (root @ complex_normal(rng, (n_e, k))).T
    h_d = complex_normal(rng, (k, m), beta(d_tr))
    q = float(sigmoid_eh_inverse(dbm2watt(q_out_dbm), eh))
    return IrsSwiptProblem(h_d, h_r, h_inc, db2lin(gamma_db), q, float(dbm2watt(sigma2_dbm)),
                           float(dbm2watt(sigma_c2_dbm)), n_rf)


# ----------------------------------------------------------------------------
# Self-sustainable IRS operating modes
# ----------------------------------------------------------------------------
MODES = ("I.A", "I.B", "I.C", "II", "III", "IV")
_USES = {"I.A": "t", "I.B": "td", "I.C": "td", "II": "tr", "III": "tr", "IV": "tr"}


@dataclass(frozen=True)
class ModeSchedule:
    """Time/power split of one slot of unit duration.

    Attributes
    ----------
    mode : str
        One of ``I.A, I.B, I.C, II, III, IV``.
    tau : float
        WIT fraction (TS receivers) or IRS reflection fraction (mode II).
    delta : float
        IRS sub-split of the WET (I.B) or WIT (I.C) sub-slot.
    rho : float
        Power-splitting ratio: receiver share to the decoder in mode II,
        reflected share of a power-splitting IRS in modes III and IV.

    Notes
    -----
    Sub-slots as ``(duration, receiver state, IRS state)``:

    * I.A: ``(1-tau, EH, EH)``, ``(tau, ID, REF)``
    * I.B: ``((1-tau)(1-delta), EH, EH)``, ``((1-tau) delta, EH, REF)``,
      ``(tau, ID, REF)``
    * I.C: ``(1-tau, EH, EH)``, ``(tau (1-delta), ID, EH)``,
      ``(tau delta, ID, REF)``
    * II: ``(1-tau, PS, EH)``, ``(tau, PS, REF)``
    * III: ``(1-tau, EH, PS)``, ``(tau, ID, PS)``
    * IV: ``(1-tau, EH, PS)``, ``(tau, ID, REF)``
    """

    mode: str
    tau: float = 0.5
    delta: float = 0.5
    rho: float = 0.5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        for name in ("tau", "delta", "rho"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1)")

    def subslots(self):
        return _subslots(self.mode, self.tau, self.delta, self.rho)


def _subslots(mode, t, d, r):
    if mode == "I.A":
        return [(1 - t, "EH", "EH"), (t, "ID", "REF")]
    if mode == "I.B":
        return [((1 - t) * (1 - d), "EH", "EH"), ((1 - t) * d, "EH", "REF"), (t, "ID", "REF")]
    if mode == "I.C":
        return [(1 - t, "EH", "EH"), (t * (1 - d), "ID", "EH"), (t * d, "ID", "REF")]
    if mode == "II":
        return [(1 - t, "PS", "EH"), (t, "PS", "REF")]
    if mode == "III":
        return [(1 - t, "EH", "PS"), (t, "ID", "PS")]
    return [(1 - t, "EH", "PS"), (t, "ID", "REF")]


@dataclass(frozen=True)
class ModeScenario:
    """Single-receiver self-sustainable IRS link.

    Path losses are ``ref_loss_db`` at 1 m with the given exponents; all
    links are Rician with factor ``rice_k_db`` and ULA/UPA steering LoS
    components.  Powers in watts.
    """

    m: int = 8
    n_e: int = 64
    sigma2: float = 1e-10
    sigma_c2: float = 1e-8
    p_element: float = 1.5e-3
    p_rx: float = float(dbm2watt(6.0))
    eh: SigmoidEh = SigmoidEh(psat=0.02, a=6400.0, b=0.003)
    ref_loss_db: float = 30.0
    rice_k_db: float = 5.0
    exp_ti: float = 2.2
    exp_ir: float = 2.2
    exp_tr: float = 3.6
    d_ti: float = 1.0
    d_ir: float = 2.0
    d_tr: float = 3.0


@dataclass
class ModeChannels:
    """``g`` (N_E, M) transmitter to IRS, ``h_r`` (N_E,), ``h_d`` (M,)."""

    g: np.ndarray
    h_r: np.ndarray
    h_d: np.ndarray


def _ula(n, s):
    return np.exp(1j * math.pi * np.arange(n) * s)


def mode_channels(scen: ModeScenario, stream) -> ModeChannels:
    """Draw one Rician realisation of the three links."""
    rng = _gen(stream)
    kf = float(db2lin(scen.rice_k_db))
    a, b = math.sqrt(kf / (kf + 1)), math.sqrt(1 / (kf + 1))
    ref = float(db2lin(-scen.ref_loss_db))
    ang = rng.uniform(-0.9, 0.9, 4)
    los_g = np.outer(_ula(scen.n_e, ang[0]), _ula(scen.m, ang[1]).conj())
    g = math.sqrt(ref * scen.d_ti ** -scen.exp_ti) * (
        a * los_g + b * complex_normal(rng, (scen.n_e, scen.m)))
    h_r = math.sqrt(ref * scen.d_ir ** -scen.exp_ir) * (
        a * _ula(scen.n_e, ang[2]) + b * complex_normal(rng, scen.n_e))
    h_d = math.sqrt(ref * scen.d_tr ** -scen.exp_tr) * (
        a * _ula(scen.m, ang[3]) + b * complex_normal(rng, scen.m))
    return ModeChannels(g, h_r, h_d)


def _mrt_through(ch: ModeChannels, amp, n_iter=30):
    """Alternating MRT and phase alignment for reflection amplitude ``amp``.

    Returns the unit-norm beam and ``|h^H w|^2``.
    """
    c = ch.h_r.conj()[:, None] * ch.g                     # rows of H_1
    w = ch.h_d / np.linalg.norm(ch.h_d)
    if amp == 0:
        return w, float(np.linalg.norm(ch.h_d) ** 2)
    for _ in range(n_iter):
        th = np.exp(1j * (np.angle(ch.h_d.conj() @ w) - np.angle(c @ w)))
        h = ch.h_d.conj() + amp * th @ c
        w_new = h.conj() / np.linalg.norm(h)
        if np.allclose(w_new, w, atol=1e-12):
            break
        w = w_new
    return w, float(np.abs(h @ w) ** 2)


def _state_table(scen, ch, p_tx, rhos):
    """Per-state received power at the RX and IRS harvest rate."""
    eh = scen.eh
    w, g_eh = _mrt_through(ch, 0.0)
    e_eh = float(np.sum(harvest(eh, p_tx * np.abs(ch.g @ w) ** 2)))
    _, g_ref = _mrt_through(ch, 1.0)
    g_ps = np.empty(rhos.size)
    e_ps = np.empty(rhos.size)
    for i, r in enumerate(rhos):
        w, g_ps[i] = _mrt_through(ch, math.sqrt(r))
        e_ps[i] = np.sum(harvest(eh, (1 - r) * p_tx * np.abs(ch.g @ w) ** 2))
    return {"EH": (p_tx * g_eh, e_eh), "REF": (p_tx * g_ref, 0.0), "PS": (p_tx * g_ps, e_ps)}


def _mode_grid(mode, scen, table, t, d, r, r_index):
    """Metrics on a broadcast grid of ``(tau, delta, rho)``.

    ``r_index`` maps the ``rho`` axis to rows of the PS entries of ``table``.
    """
    eh = scen.eh
    zero = np.zeros(np.broadcast(t, d, r).shape)
    snr, erx, eirs, crx, cirs = (zero.copy() for _ in range(5))
    noise = scen.sigma2 + scen.sigma_c2
    for dur, rx, st in _subslots(mode, t, d, r):
        g, e = table[st]
        if st == "PS":
            g, e = g[r_index], e[r_index]
        eirs = eirs + dur * e
        if st != "EH":
            cirs = cirs + dur * scen.n_e * scen.p_element
        if rx == "EH":
            erx = erx + dur * np.asarray(harvest(eh, g * np.ones_like(zero)))
        elif rx == "ID":
            snr = snr + dur * g / noise
            crx = crx + dur * scen.p_rx
        else:
            snr = snr + dur * r * g / (r * scen.sigma2 + scen.sigma_c2)
            erx = erx + dur * np.asarray(harvest(eh, (1 - r) * g * np.ones_like(zero)))
            crx = crx + dur * scen.p_rx
    return snr, erx, eirs, crx, cirs


def mode_eval(schedule: ModeSchedule, scen: ModeScenario, ch: ModeChannels, p_tx):
    """Slot metrics of one schedule.

    Returns
    -------
    dict
        ``snr`` (sum over decoding sub-slots of duration times SNR),
        ``rx_harvest`` and ``irs_harvest`` [J per unit slot],
        ``rx_consumption``, ``irs_consumption`` and ``feasible``.
    """
    rhos = np.array([schedule.rho])
    table = _state_table(scen, ch, p_tx, rhos)
    out = _mode_grid(schedule.mode, scen, table, np.float64(schedule.tau),
                     np.float64(schedule.delta), np.float64(schedule.rho), 0)
    return _pack(*[float(v) for v in out])


def _pack(snr, erx, eirs, crx, cirs):
    tol = 1e-12
    return {"snr": snr, "rx_harvest": erx, "irs_harvest": eirs, "rx_consumption": crx,
            "irs_consumption": cirs,
            "feasible": bool(erx >= crx * (1 - tol) and eirs >= cirs * (1 - tol))}


def mode_sim(scen: ModeScenario, ch: ModeChannels, p_tx, modes=MODES, resolution=64):
    """Best grid point per mode.

    Every mode is searched over the interior grid ``k / resolution`` of
    the ratios it uses.  Among schedules meeting both energy-neutrality
    constraints (harvest at least the circuit consumption of the IRS
    elements while reflecting and of the receiver while decoding), the
    largest slot SNR wins; ties within ``1e-9`` relative go to the larger
    receiver harvest, then to the larger IRS harvest.

    Returns
    -------
    dict
        mode -> ``{"schedule", "snr", "rx_harvest", "irs_harvest", ...}``
        or ``None`` when no grid point is feasible.
    """
    grid = np.arange(1, resolution) / resolution
    table = _state_table(scen, ch, p_tx, grid)
    half = np.array([0.5])
    out = {}
    for mode in modes:
        uses = _USES[mode]
        t = grid[:, None, None]
        d = (grid if "d" in uses else half)[None, :, None]
        r = (grid if "r" in uses else half)[None, None, :]
        ri = (np.arange(grid.size) if "r" in uses else np.array([0]))[None, None, :]
        snr, erx, eirs, crx, cirs = (np.broadcast_to(v, np.broadcast(t, d, r).shape)
                                     for v in _mode_grid(mode, scen, table, t, d, r, ri))
        ok = (erx >= crx * (1 - 1e-12)) & (eirs >= cirs * (1 - 1e-12))
        if not ok.any():
            out[mode] = None
            continue
        idx = np.flatnonzero(ok.ravel())
        key_snr = np.round(snr.ravel()[idx] / snr.ravel()[idx].max(), 9)
        best = idx[np.lexsort((eirs.ravel()[idx], erx.ravel()[idx], key_snr))[-1]]
        i, j, k = np.unravel_index(best, snr.shape)
        sched = ModeSchedule(mode, float(grid[i]), float(d.ravel()[j]), float(r.ravel()[k]))
        res = _pack(float(snr.ravel()[best]), float(erx.ravel()[best]), float(eirs.ravel()[best]),
                    float(crx.ravel()[best]), float(cirs.ravel()[best]))
        res["schedule"] = sched
        out[mode] = res
    return out


# ----------------------------------------------------------------------------
# Received-power-feedback algorithms on simulated LoS environments
# ----------------------------------------------------------------------------
C_LIGHT = 299792458.0


@dataclass(frozen=True)
class Node:
    """Single-antenna terminal.

    Attributes
    ----------
    position : tuple of float
        Coordinates [m]; the surface lies in the ``y = 0`` plane.
    power : float
        Transmit power when the node transmits [W].
    boresight : tuple of float, optional
        Pointing direction of a ``2 (q + 1) cos^q`` pattern; isotropic when
        omitted.
    q : float
    """

    position: tuple
    power: float = 1.0
    boresight: tuple = None
    q: float = 2.0

    def gain(self, direction):
        if self.boresight is None:
            return np.ones(np.shape(direction)[:-1])
        b = np.asarray(self.boresight, float)
        u = direction / np.linalg.norm(direction, axis=-1, keepdims=True)
        c = np.clip(u @ (b / np.linalg.norm(b)), 0.0, 1.0)
        return 2.0 * (self.q + 1.0) * c**self.q


def facing(position, power=1.0, target=(0.0, 0.0, 0.0), q=2.0):
    """Node at ``position`` whose pattern points at ``target``."""
    p = np.asarray(position, float)
    return Node(tuple(p), power, tuple(np.asarray(target, float) - p), q)


class LosEnv:
    """Spherical-wave LoS propagation through a planar surface.

    Every hop follows ``sqrt(c)/D exp(-j 2 pi D / lambda)`` with
    ``c = (lambda / 4 pi)^2`` scaled by the node patterns; elements are
    isotropic with reflection amplitude ``efficiency``.  Direct links listed
    in ``blocked`` are removed.

    Parameters
    ----------
    nodes : dict
        Name -> :class:`Node`.
    rows, cols : int
        Surface size, elements at ``spacing`` (half wavelength by default).
    freq : float
        Carrier [Hz].
    blocked : iterable of tuple, optional
        Unordered node pairs without a direct path.
    efficiency : float
    """

    def __init__(self, nodes, rows=16, cols=16, freq=5.8e9, blocked=(), efficiency=1.0,
                 spacing=None):
        self.nodes = dict(nodes)
        self.rows, self.cols = int(rows), int(cols)
        self.lam = C_LIGHT / freq
        self.spacing = self.lam / 2 if spacing is None else float(spacing)
        self.blocked = {frozenset(p) for p in blocked}
        self.efficiency = float(efficiency)
        self.c = (self.lam / (4 * math.pi)) ** 2
        r, col = np.divmod(np.arange(self.n), self.cols)
        self.grid = np.stack([r, col], axis=1)
        self.elements = np.stack([(col - (self.cols - 1) / 2) * self.spacing, np.zeros(self.n),
                                  ((self.rows - 1) / 2 - r) * self.spacing], axis=1)
        self._links = {}

    @property
    def n(self) -> int:
        return self.rows * self.cols

    def blocked_copy(self, pairs):
        env = LosEnv(self.nodes, self.rows, self.cols, C_LIGHT / self.lam,
                     set(map(tuple, self.blocked)) | set(pairs), self.efficiency, self.spacing)
        return env

    def _hop(self, src, dst_pos, src_node=None, dst_node=None):
        v = dst_pos - src
        d = np.linalg.norm(v, axis=-1)
        amp = math.sqrt(self.c) / d
        if src_node is not None:
            amp = amp * np.sqrt(src_node.gain(v))
        if dst_node is not None:
            amp = amp * np.sqrt(dst_node.gain(-v))
        return amp * np.exp(-2j * math.pi * d / self.lam)

    def link(self, a, b):
        """``(direct, cascade)`` from node ``a`` to node ``b``."""
        key = (a, b)
        if key not in self._links:
            na, nb = self.nodes[a], self.nodes[b]
            pa, pb = np.asarray(na.position, float), np.asarray(nb.position, float)
            direct = 0j
            if frozenset((a, b)) not in self.blocked:
                direct = complex(self._hop(pa, pb, na, nb))
            cas = (self._hop(pa, self.elements, src_node=na)
                   * self._hop(self.elements, pb, dst_node=nb) * self.efficiency)
            self._links[key] = (direct, cas)
        return self._links[key]

    def field(self, a, b, phases):
        """Complex amplitudes for one or many phase vectors (last axis N)."""
        direct, cas = self.link(a, b)
        return direct + np.exp(1j * np.asarray(phases)) @ cas

    def power(self, a, b, state):
        """Received power at ``b`` from ``a`` [W]; the only feedback used."""
        ph = state.phases if isinstance(state, IrsState) else state
        return self.nodes[a].power * np.abs(self.field(a, b, ph)) ** 2


def tiles(env: LosEnv, tile):
    """Element index arrays of a ``(rows, cols)`` tile partition."""
    tr, tc = tile
    if env.rows % tr or env.cols % tc:
        raise ValueError("tile size must divide the surface")
    out = []
    for i in range(env.rows // tr):
        for j in range(env.cols // tc):
            sel = ((env.grid[:, 0] // tr) == i) & ((env.grid[:, 1] // tc) == j)
            out.append(np.flatnonzero(sel))
    return out


def scan_codebook(tile, bits=1, n_u=8):
    """Quantised linear-phase scanning beams for one tile.

    Beams are ``pi (u_x col + u_z row) + offset`` on a ``n_u x n_u`` grid of
    direction cosines, with two offsets so that 1-bit quantisation keeps
    distinct patterns; duplicates are removed.
    """
    tr, tc = tile
    r, c = np.divmod(np.arange(tr * tc), tc)
    u = np.linspace(-1, 1, n_u, endpoint=False) + 1.0 / n_u
    step = 2 * math.pi / 2**bits
    beams = []
    for ux in u:
        for uz in u:
            for off in (0.0, step / 2):
                ph = math.pi * (ux * c + uz * r) + off
                beams.append(np.mod(np.round(ph / step) * step, 2 * math.pi))
    beams.append(np.zeros(tr * tc))
    beams = np.unique(np.round(np.array(beams), 12), axis=0)
    return beams


@dataclass
class ScanResult:
    state: IrsState
    trace: np.ndarray
    info: dict = field(default_factory=dict)


def mtbs_scan(env: LosEnv, tx, rx, tile=(4, 4), codebook=None, n_sweeps=3, state=None, bits=1):
    """Multi-tile beam scanning with received-power feedback only.

    Tiles are visited in turn; each takes the codebook beam (or keeps its
    incumbent setting) giving the largest measured power at ``rx`` while
    the other tiles stay fixed.

    Returns
    -------
    ScanResult
        ``trace[0]`` is the initial power, then one entry per tile step.
    """
    parts = tiles(env, tile)
    cb = scan_codebook(tile, bits) if codebook is None else np.asarray(codebook, float)
    ph = np.zeros(env.n) if state is None else state.phases.copy()
    direct, cas = env.link(tx, rx)
    p_tx = env.nodes[tx].power
    trace = [float(env.power(tx, rx, ph))]
    for _ in range(n_sweeps):
        for idx in parts:
            rest = direct + np.exp(1j * ph) @ cas - np.exp(1j * ph[idx]) @ cas[idx]
            cands = np.vstack([ph[idx][None], cb])
            p = p_tx * np.abs(rest + np.exp(1j * cands) @ cas[idx]) ** 2
            g = int(np.argmax(p))          # incumbent first, so ties keep it
            ph[idx] = cands[g]
            trace.append(float(env.power(tx, rx, ph)))
    return ScanResult(IrsState(ph, bits, tuple(tile)), np.array(trace))


def focus_phases(env: LosEnv, tx, rx):
    """Continuous phases aligning every reflected path with the direct one."""
    direct, cas = env.link(tx, rx)
    ref = np.angle(direct) if direct != 0 else 0.0
    return np.mod(ref - np.angle(cas), 2 * math.pi)


TECHNIQUES = ("PA", "RUI", "ITD")


def multi_focus(env: LosEnv, pairs, technique, alpha, bits=1, stream=None):
    """Multi-focus configuration for several (transmitter, receiver) pairs.

    Parameters
    ----------
    pairs : list of (str, str)
        Focal links; a single transmitter serving several receivers is the
        usual case.
    technique : {"PA", "RUI", "ITD"}
        Pattern addition takes the phase of ``sum_l alpha_l e^{j theta_l}``;
        random unit-cell interleaving gives each element the pattern of
        link ``l`` with probability ``alpha_l``; tile division assigns
        contiguous column-major blocks of ``round(alpha_l N)`` elements.
    alpha : array_like
        Nonnegative weights summing to one.
    bits : int or None
    stream : RngStream or Generator, optional
        Used by RUI.

    Returns
    -------
    IrsState
    """
    alpha = np.asarray(alpha, float)
    if technique not in TECHNIQUES:
        raise ValueError(f"technique must be one of {TECHNIQUES}")
    if alpha.size != len(pairs) or np.any(alpha < 0) or abs(alpha.sum() - 1) > 1e-9:
        raise ValueError("alpha must be a probability vector, one entry per link")
    pats = np.array([focus_phases(env, a, b) for a, b in pairs])
    if technique == "PA":
        ph = np.angle(alpha @ np.exp(1j * pats))
    elif technique == "RUI":
        pick = _gen(stream).choice(alpha.size, size=env.n, p=alpha)
        ph = pats[pick, np.arange(env.n)]
    else:
        order = np.lexsort((env.grid[:, 0], env.grid[:, 1]))        # column-major
        counts = np.floor(alpha * env.n + 0.5).astype(int)
        counts[np.argmax(alpha)] += env.n - counts.sum()
        owner = np.repeat(np.arange(alpha.size), counts)
        pick = np.empty(env.n, int)
        pick[order] = owner
        ph = pats[pick, np.arange(env.n)]
    return IrsState(ph, bits)


@dataclass(frozen=True)
class BsaLinks:
    """Node names of the beam-sharing setup."""

    dtx: str = "dtx"
    ptx: str = "ptx"
    du: str = "du"
    pu: str = "pu"


def bsa_metrics(env: LosEnv, state, links=BsaLinks(), noise=1e-13):
    ph = state.phases if isinstance(state, IrsState) else state
    s = float(env.power(links.dtx, links.du, ph))
    leak = float(env.power(links.ptx, links.du, ph))
    return {"dtx_du": s, "ptx_pu": float(env.power(links.ptx, links.pu, ph)), "ptx_du": leak,
            "du_sinr": s / (leak + noise)}


def pa_mixed(env: LosEnv, links=BsaLinks(), bits=1):
    """Pattern addition of the Dtx-DU and Ptx-PU focusing patterns."""
    return multi_focus(env, [(links.dtx, links.du), (links.ptx, links.pu)], "PA", [0.5, 0.5], bits)


def beam_sharing(env: LosEnv, threshold_db=-20.0, links=BsaLinks(), tile=(8, 8), codebook=None,
                 n_sweeps=3, bits=1, noise=1e-13, weights=None):
    """Beam-sharing configuration from received-power feedback.

    Starting from the PA-mixed pattern, tiles are updated in turn from a
    scanning codebook.  While the Ptx-DU leakage exceeds the threshold a
    candidate is accepted when it lowers the leakage; afterwards a
    candidate is accepted only if the leakage stays below the threshold
    and the weighted objective ``w_1 P(Dtx->DU) + w_2 P(Ptx->PU)``
    improves.

    Parameters
    ----------
    threshold_db : float
        Leakage threshold relative to the PA-mixed leakage [dB]; ``inf``
        removes the constraint.
    weights : tuple of float, optional
        Defaults to the reciprocals of the PA-mixed powers.

    Returns
    -------
    ScanResult
        ``info`` holds final and PA-mixed metrics, the threshold [W] and
        ``feasible``.
    """
    start = pa_mixed(env, links, bits)
    base = bsa_metrics(env, start, links, noise)
    thr = base["ptx_du"] * 10 ** (threshold_db / 10) if np.isfinite(threshold_db) else np.inf
    w = (1.0 / base["dtx_du"], 1.0 / base["ptx_pu"]) if weights is None else weights
    parts = tiles(env, tile)
    cb = scan_codebook(tile, bits) if codebook is None else np.asarray(codebook, float)
    ph = start.phases.copy()
    lk = [env.link(links.dtx, links.du), env.link(links.ptx, links.pu), env.link(links.ptx, links.du)]
    pw = [env.nodes[links.dtx].power, env.nodes[links.ptx].power, env.nodes[links.ptx].power]

    def evaluate(idx, cands):
        out = []
        for (direct, cas), p in zip(lk, pw):
            rest = direct + np.exp(1j * ph) @ cas - np.exp(1j * ph[idx]) @ cas[idx]
            out.append(p * np.abs(rest + np.exp(1j * cands) @ cas[idx]) ** 2)
        return out

    m0 = bsa_metrics(env, ph, links, noise)
    trace = [m0["ptx_du"]]
    for _ in range(n_sweeps):
        changed = False
        for idx in parts:
            cands = np.vstack([ph[idx][None], cb])
            s, e, leak = evaluate(idx, cands)
            obj = w[0] * s + w[1] * e
            if leak[0] > thr:
                g = int(np.argmin(leak))
            else:
                ok = leak <= thr
                g = int(np.argmax(np.where(ok, obj, -np.inf)))
            if g != 0:
                changed = True
            ph[idx] = cands[g]
            trace.append(float(leak[g]))
        if not changed:
            break
    state = IrsState(ph, bits, tuple(tile))
    fin = bsa_metrics(env, state, links, noise)
    info = {"metrics": fin, "pa_mixed": base, "threshold": thr, "feasible": fin["ptx_du"] <= thr}
    return ScanResult(state, np.array(trace), info)


def random_mtbs_env(stream, rows=16, cols=16, p_tx=2.1, q=20.0, blocked=False):
    """Transmitter and receiver on opposite sides in front of the surface."""
    rng = _gen(stream)
    tx = (rng.uniform(-1.2, -0.4), rng.uniform(0.6, 1.5), rng.uniform(-0.3, 0.3))
    rx = (rng.uniform(0.4, 1.2), rng.uniform(0.6, 1.5), rng.uniform(-0.3, 0.3))
    nodes = {"tx": facing(tx, p_tx, q=q), "rx": facing(rx, q=q)}
    return LosEnv(nodes, rows, cols, blocked=[("tx", "rx")] if blocked else ())


def random_bsa_env(stream, jitter=0.2, pu=None, p_dtx=3e-3, p_ptx=62e-3, q=20.0):
    """Beam-sharing geometry around the testbed layout with jittered nodes."""
    rng = _gen(stream)
    base = {"dtx": (-1.0, 2.5, 0.0), "du": (0.25, 4.0, 0.0), "ptx": (-1.25, 1.8, -0.3),
            "pu": (1.0, 1.8, -0.3) if pu is None else tuple(pu)}
    pos = {k: np.asarray(v) + rng.uniform(-jitter, jitter, 3) * np.array([1, 1, 0.5])
           for k, v in base.items()}
    if pu is not None:
        pos["pu"] = np.asarray(pu, float)
    power = {"dtx": p_dtx, "ptx": p_ptx, "du": 1.0, "pu": 1.0}
    nodes = {k: facing(v, power[k], q=q) for k, v in pos.items()}
    return LosEnv(nodes, 16, 32)


def random_multifocus_env(stream, rows=16, cols=16, p_tx=1.0, q=20.0, symmetric=False):
    """One transmitter and two energy receivers on either side of boresight."""
    rng = _gen(stream)
    tx = (0.0, 1.2, 0.0)
    if symmetric:
        r1, r2 = (-0.6, 1.0, 0.0), (0.6, 1.0, 0.0)
    else:
        r1 = (rng.uniform(-1.0, -0.3), rng.uniform(0.6, 1.4), rng.uniform(-0.3, 0.3))
        r2 = (rng.uniform(0.3, 1.0), rng.uniform(0.6, 1.4), rng.uniform(-0.3, 0.3))
    nodes = {"tx": facing(tx, p_tx, q=q), "er1": facing(r1, q=q), "er2": facing(r2, q=q)}
    return LosEnv(nodes, rows, cols, blocked=[("tx", "er1"), ("tx", "er2")])
