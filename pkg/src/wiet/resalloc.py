"""
Multi-user MISO SWIPT resource allocation.

A TX with ``N`` antennas serves ``K`` receivers that both decode and harvest.
The transmit signal is ``sum_k w_k d_k + v``; designs are expressed through
covariances ``W_k`` and ``V`` (semidefinite relaxation) and objectives
include WIT efficiency (bits per joule), weighted sum rate, consumed power
and total harvested power.

Solver outline
--------------
Everything except the sigmoid harvester and the rate objective is linear in
the covariances.  With ``u = (P_out/psat)(1 - Psi) + Psi`` the sigmoid
inverse is ``b + (ln u - ln(1 - u)) / a``; linearising ``ln u`` at the
current point gives a convex restriction of ``P_out <= F(P_EH)`` that is
tight there.  The rate ``log(total) - log(interference + noise)`` is
minorised by linearising the second logarithm.  Both surrogates sit inside a
Dinkelbach loop for the WIT-efficiency ratio, so every accepted iterate is
feasible and the true objective never decreases.
"""

import math
from dataclasses import dataclass, field, replace

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize

from .channel import complex_normal, db2lin, dbm2watt
from .ehmodels import LinearEh, SigmoidEh, harvest, sigmoid_eh_inverse

__all__ = [
    "SwiptProblem",
    "SwiptSolution",
    "InfeasibleError",
    "OBJECTIVES",
    "evaluate",
    "zf_directions",
    "zf_baseline",
    "solve",
    "brute_force_tiny",
    "mismatch_eval",
    "random_problem",
    "wit_sweep",
    "DEFAULT_SIGMOID",
    "UWET_SWEEP",
]

# commercial-rectifier fit: 20 mW saturation, inflection at 3 mW
DEFAULT_SIGMOID = SigmoidEh(psat=0.02, a=6400.0, b=0.003)
UWET_SWEEP = (0.0, 5e-5, 1e-4, 1.5e-4, 2e-4)
OBJECTIVES = ("wit_eff", "sum_rate", "power_min", "harvest_max")
_LN2 = math.log(2.0)


class InfeasibleError(ValueError):
    """Raised when no point satisfying the QoS constraints is found."""


@dataclass(frozen=True)
class SwiptProblem:
    """Problem data.

    Attributes
    ----------
    channels : ndarray, shape (K, N)
        Row ``k`` is ``g_k``; the received sample is ``g_k^H x``.
    weights : ndarray, shape (K,)
        Rate weights ``alpha_k``, nonnegative and summing to one.
    p_max : float
        Transmit power budget [W].
    r_req : ndarray, shape (K,)
        Minimum rates [bit/s/Hz].
    p_req : ndarray, shape (K,)
        Minimum harvested powers [W].
    u_wet_req : float
        Minimum WET efficiency.
    p_c : float
        Circuit power [W].
    zeta : float
        Amplifier multiplier on the radiated power, ``>= 1``.
    eh : LinearEh or SigmoidEh
    noise : ndarray, shape (K,)
        Noise powers [W].
    """

    channels: np.ndarray
    weights: np.ndarray
    p_max: float
    r_req: np.ndarray
    p_req: np.ndarray
    u_wet_req: float = 0.0
    p_c: float = 1.0
    zeta: float = 2.5
    eh: object = LinearEh(1.0)
    noise: np.ndarray = None

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        k, n = g.shape
        object.__setattr__(self, "channels", g)
        for name in ("weights", "r_req", "p_req"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (k,)).copy()
            object.__setattr__(self, name, v)
        noise = 1e-13 if self.noise is None else self.noise
        object.__setattr__(self, "noise", np.broadcast_to(np.asarray(noise, float), (k,)).copy())
        if k > n:
            raise ValueError("need K <= N")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.p_max <= 0 or self.zeta < 1 or self.p_c < 0:
            raise ValueError("invalid power parameters")
        if np.any(self.noise <= 0):
            raise ValueError("noise powers must be positive")
        if not isinstance(self.eh, (LinearEh, SigmoidEh)):
            raise TypeError("eh must be LinearEh or SigmoidEh")

    @property
    def k(self) -> int:
        return self.channels.shape[0]

    @property
    def n(self) -> int:
        return self.channels.shape[1]

    @property
    def gram(self) -> np.ndarray:
        """``G_k = g_k g_k^H`` stacked, shape (K, N, N)."""
        g = self.channels
        return g[:, :, None] * g[:, None, :].conj()

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class SwiptSolution:
    """Transmit covariances and extracted beamformers.

    Attributes
    ----------
    w_cov : ndarray, shape (K, N, N)
    v_cov : ndarray, shape (N, N)
    w : ndarray, shape (K, N)
        Principal-eigenvector beamformers scaled by the root eigenvalue.
    v : ndarray, shape (N,)
    rank_residual : ndarray, shape (K,)
        ``||W_k - w_k w_k^H||_F / ||W_k||_F``.
    info : dict
        Solver diagnostics.
    """

    w_cov: np.ndarray
    v_cov: np.ndarray
    w: np.ndarray = None
    v: np.ndarray = None
    rank_residual: np.ndarray = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w_cov = np.array([_psd_project(x) for x in np.asarray(self.w_cov, complex)])
        self.v_cov = _psd_project(np.asarray(self.v_cov, complex))
        w, res = [], []
        for x in self.w_cov:
            vec, r = _rank1(x)
            w.append(vec)
            res.append(r)
        self.w = np.array(w)
        self.rank_residual = np.array(res)
        self.v, _ = _rank1(self.v_cov)

    @property
    def rank_flagged(self) -> bool:
        return bool(np.any(self.rank_residual > 1e-3))

    @classmethod
    def zeros(cls, k, n):
        return cls(np.zeros((k, n, n), complex), np.zeros((n, n), complex))


def _psd_project(x):
    x = 0.5 * (x + x.conj().T)
    ev, vec = np.linalg.eigh(x)
    if ev.size and ev.min() >= 0:
        return x
    ev = np.clip(ev, 0.0, None)
    return (vec * ev) @ vec.conj().T


def _rank1(x):
    ev, vec = np.linalg.eigh(x)
    lam = max(ev[-1], 0.0)
    w = math.sqrt(lam) * vec[:, -1]
    nrm = np.linalg.norm(x)
    res = 0.0 if nrm == 0 else float(np.linalg.norm(x - np.outer(w, w.conj())) / nrm)
    return w, res


# ----------------------------------------------------------------------------
# Evaluation
# ----------------------------------------------------------------------------
def _quad(cov, gram):
    # Tr(C G_k) for stacked G_k
    return np.real(np.einsum("ij,kji->k", cov, gram))


def evaluate(problem: SwiptProblem, sol: SwiptSolution, eh=None, tol=1e-6) -> dict:
    """System metrics of a design.

    Parameters
    ----------
    problem : SwiptProblem
    sol : SwiptSolution
    eh : LinearEh or SigmoidEh, optional
        Harvester used for evaluation; defaults to ``problem.eh``.
    tol : float
        Relative tolerance of the constraint check.

    Returns
    -------
    dict
        ``rate`` (K,), ``p_rf`` (K,), ``p_out`` (K,), ``r_ws``, ``p_tx``,
        ``p_d``, ``p_eh``, ``u_wit``, ``u_wet``, ``violations`` (list of
        violated constraint names) and ``feasible``.
    """
    eh = problem.eh if eh is None else eh
    k, n = problem.k, problem.n
    if sol.w_cov.shape != (k, n, n) or sol.v_cov.shape != (n, n):
        raise ValueError("solution dimensions do not match the problem")
    gram = problem.gram
    own = np.array([_quad(sol.w_cov[j], gram[j:j + 1])[0] for j in range(k)])
    all_w = _quad(sol.w_cov.sum(axis=0), gram)
    ev = _quad(sol.v_cov, gram)
    p_rf = all_w + ev
    interf = p_rf - own
    sinr = own / (interf + problem.noise)
    rate = np.log2(1.0 + sinr)
    p_out = np.asarray(harvest(eh, p_rf), dtype=float).reshape(k)
    p_tx = float(np.real(np.trace(sol.w_cov.sum(axis=0)) + np.trace(sol.v_cov)))
    p_d = problem.p_c + problem.zeta * p_tx
    p_eh = float(np.sum(p_out))
    r_ws = float(np.dot(problem.weights, rate))
    den = p_d - p_eh
    u_wit = r_ws / den if den > 0 else (0.0 if r_ws == 0 else math.inf)
    u_wet = p_eh / p_d if p_d > 0 else 0.0
    viol = []
    if p_tx > problem.p_max * (1 + tol):
        viol.append("C1")
    if np.any(rate < problem.r_req * (1 - tol) - 1e-12):
        viol.append("C2")
    if np.any(p_out < problem.p_req * (1 - tol)):
        viol.append("C3")
    if u_wet < problem.u_wet_req * (1 - tol):
        viol.append("C4")
    return {
        "rate": rate, "p_rf": p_rf, "p_out": p_out, "r_ws": r_ws, "p_tx": p_tx,
        "p_d": p_d, "p_eh": p_eh, "u_wit": u_wit, "u_wet": u_wet,
        "violations": viol, "feasible": not viol,
    }


def objective_value(problem, metrics, objective):
    if objective == "wit_eff":
        return metrics["u_wit"]
    if objective == "sum_rate":
        return metrics["r_ws"]
    if objective == "power_min":
        return -metrics["p_d"]
    if objective == "harvest_max":
        return metrics["p_eh"]
    raise ValueError(f"objective must be one of {OBJECTIVES}")


# ----------------------------------------------------------------------------
# Zero forcing
# ----------------------------------------------------------------------------
def zf_directions(channels) -> np.ndarray:
    """Unit-norm zero-forcing directions, shape (K, N).

    Direction ``k`` is ``g_k`` projected onto the orthogonal complement of
    the other channels.
    """
    h = np.atleast_2d(np.asarray(channels, dtype=complex))
    k, n = h.shape
    if k > n or np.linalg.matrix_rank(h) < k:
        raise np.linalg.LinAlgError("channels are rank deficient")
    # columns of F satisfy conj(h) F = I, i.e. g_j^H f_k = delta_jk
    a = h.conj()
    f = a.conj().T @ np.linalg.inv(a @ a.conj().T)
    f = f / np.linalg.norm(f, axis=0, keepdims=True)
    return f.T


def _zf_solution(dirs, powers, v_cov):
    w_cov = np.array([p * np.outer(d, d.conj()) for d, p in zip(dirs, powers)])
    return SwiptSolution(w_cov, v_cov)


def zf_baseline(problem: SwiptProblem, powers=None, v_cov=None, objective="wit_eff",
                max_iter=60, tol=1e-7, sca_iter=None, starts=None):
    """Zero-forcing information beams.

    With ``powers`` (and optionally ``v_cov``) the design is built directly.
    Otherwise the per-user powers and the energy covariance are optimised
    with the same convex machinery as ``solve``.
    """
    dirs = zf_directions(problem.channels)
    n = problem.n
    if powers is not None:
        v = np.zeros((n, n), complex) if v_cov is None else np.asarray(v_cov, complex)
        return _zf_solution(dirs, np.asarray(powers, float), v)
    return _run(problem, objective, zf_dirs=dirs, starts=starts, max_iter=max_iter, tol=tol,
                sca_iter=sca_iter)


# ----------------------------------------------------------------------------
# Convex surrogate
# ----------------------------------------------------------------------------
class _Surrogate:
    """Parametrised convex restriction of the problem around a point."""

    def __init__(self, problem: SwiptProblem, objective: str, zf_dirs=None, mode="main",
                 init_weights=None):
        pb = problem
        k, n = pb.k, pb.n
        g = pb.channels
        self.problem, self.objective, self.mode = pb, objective, mode
        self.scale_c = float(np.mean(np.sum(np.abs(g) ** 2, axis=1)))
        self.s = pb.p_max * self.scale_c
        gn = pb.gram / self.scale_c
        self.nn = pb.noise / self.s
        self.zf_dirs = zf_dirs
        if zf_dirs is None:
            self.X = [cp.Variable((n, n), hermitian=True) for _ in range(k)]
            cons = [x >> 0 for x in self.X]
            tr_x = [cp.real(cp.trace(x)) for x in self.X]
            q = [[cp.real(cp.trace(self.X[r] @ gn[j])) for j in range(k)] for r in range(k)]
        else:
            self.p = cp.Variable(k, nonneg=True)
            self.X = None
            cons = []
            tr_x = [self.p[r] for r in range(k)]
            gains = np.abs(g.conj() @ zf_dirs.T) ** 2 / self.scale_c  # |g_j^H d_r|^2
            q = [[self.p[r] * gains[j, r] for j in range(k)] for r in range(k)]
        self.Y = cp.Variable((n, n), hermitian=True)
        cons.append(self.Y >> 0)
        qy = [cp.real(cp.trace(self.Y @ gn[j])) for j in range(k)]
        tr = sum(tr_x) + cp.real(cp.trace(self.Y))
        sig = [q[j][j] for j in range(k)]
        tot = [sum(q[r][j] for r in range(k)) + qy[j] for j in range(k)]
        itf = [tot[j] - sig[j] for j in range(k)]
        self.tr, self.sig, self.tot, self.itf = tr, sig, tot, itf
        gam = 2.0 ** pb.r_req - 1.0
        cons.append(tr <= 1.0)
        for j in range(k):
            if gam[j] > 0:
                cons.append(sig[j] >= gam[j] * (itf[j] + self.nn[j]))
        eh = pb.eh
        p_d = pb.p_c + pb.zeta * pb.p_max * tr
        self.p_d = p_d
        if isinstance(eh, LinearEh):
            t = [eh.eta * self.s * tot[j] for j in range(k)]
            self.tau = None
        else:
            psi = eh.psi
            self.tau = cp.Variable(k, nonneg=True)
            self.lnu0 = cp.Parameter(k)
            self.invu0 = cp.Parameter(k, nonneg=True)
            u = cp.multiply(self.tau, 1.0 - psi) + psi
            kk = 1.0 / (eh.a * self.s)
            for j in range(k):
                cons.append(tot[j] - eh.b / self.s
                            - kk * (self.lnu0[j] + u[j] * self.invu0[j] - 1.0)
                            + kk * cp.log(1.0 - u[j]) >= 0)
            t = [eh.psat * self.tau[j] for j in range(k)]
            # exact, linear form of the per-user harvest requirement
            rf_req = np.asarray(sigmoid_eh_inverse(pb.p_req, eh), float).reshape(k)
            if np.any(~np.isfinite(rf_req)):
                raise InfeasibleError("harvest requirement at or above saturation")
            for j in range(k):
                if rf_req[j] > 0:
                    cons.append(self.s * tot[j] >= rf_req[j])
        self.t = t
        for j in range(k):
            if pb.p_req[j] > 0:
                cons.append(t[j] >= pb.p_req[j])
        sum_t = sum(t)
        self.lnb0 = cp.Parameter(k)
        self.invb0 = cp.Parameter(k, nonneg=True)
        # z_k >= log(itf_k + n_k) through the tangent of exp at the current
        # point; kept as a constraint row so the solver can equilibrate it
        # when the interference is nulled and the slope becomes huge
        self.z = cp.Variable(k)
        cons_rate = [(itf[j] + self.nn[j]) * self.invb0[j] <= 1.0 + self.z[j] - self.lnb0[j]
                     for j in range(k)]
        r_lb = [(cp.log(tot[j] + self.nn[j]) - self.z[j]) / _LN2 for j in range(k)]
        r_ws = sum(pb.weights[j] * r_lb[j] for j in range(k))
        if mode == "main" and objective in ("wit_eff", "sum_rate"):
            cons = cons + cons_rate
        self.lam = cp.Parameter(nonneg=True)
        if mode == "init":
            w0 = np.ones(k) if init_weights is None else init_weights
            obj = cp.Maximize(sum(w0[j] * tot[j] for j in range(k)))
            cons_c4 = []
        elif mode == "restore":
            obj = cp.Maximize((sum_t - pb.u_wet_req * p_d) / max(pb.p_c, 1e-3))
            cons_c4 = []
        else:
            cons_c4 = [sum_t >= pb.u_wet_req * p_d] if pb.u_wet_req > 0 else []
            if objective == "wit_eff":
                obj = cp.Maximize(r_ws - self.lam * (p_d - sum_t))
            elif objective == "sum_rate":
                obj = cp.Maximize(r_ws)
            elif objective == "power_min":
                obj = cp.Minimize(p_d / max(pb.p_c + pb.zeta * pb.p_max, 1e-12))
            elif objective == "harvest_max":
                obj = cp.Maximize(sum_t / max(self._t_scale(), 1e-30))
            else:
                raise ValueError(f"objective must be one of {OBJECTIVES}")
        self.prob = cp.Problem(obj, cons + cons_c4)

    def _t_scale(self):
        eh = self.problem.eh
        return eh.psat if isinstance(eh, SigmoidEh) else eh.eta * self.s

    def set_point(self, sol: SwiptSolution, lam=0.0):
        pb = self.problem
        m = evaluate(pb, sol)
        itf = (m["p_rf"] - np.array([_quad(sol.w_cov[j], pb.gram[j:j + 1])[0] for j in range(pb.k)]))
        b0 = itf / self.s + self.nn
        self.lnb0.value = np.log(b0)
        self.invb0.value = 1.0 / b0
        self.lam.value = max(float(lam), 0.0)
        if self.tau is not None:
            eh = pb.eh
            tau0 = np.clip(m["p_out"] / eh.psat, 0.0, 1.0 - 1e-12)
            u0 = tau0 * (1.0 - eh.psi) + eh.psi
            self.lnu0.value = np.log(u0)
            self.invu0.value = 1.0 / u0
        return m

    def run(self):
        try:
            self.prob.solve(solver=cp.CLARABEL)
        except (cp.error.SolverError, ArithmeticError, ValueError):
            return None
        if self.prob.status not in ("optimal", "optimal_inaccurate"):
            return None
        pm = self.problem.p_max
        if self.X is None:
            p = np.clip(self.p.value, 0.0, None) * pm
            w_cov = np.array([pi * np.outer(d, d.conj()) for d, pi in zip(self.zf_dirs, p)])
        else:
            w_cov = np.array([x.value * pm for x in self.X])
        return SwiptSolution(w_cov, self.Y.value * pm)

    def placeholder_point(self):
        pb = self.problem
        # init LP does not use linearisation points; give harmless values
        self.lnb0.value = np.zeros(pb.k)
        self.invb0.value = np.ones(pb.k)
        self.lam.value = 0.0
        if self.tau is not None:
            self.lnu0.value = np.zeros(pb.k)
            self.invu0.value = np.ones(pb.k)


def _init_point(problem, zf_dirs, weights):
    # feasible for C1-C3 (C3 in its exact linear form); C4 is restored later
    sol = _InitLP(problem.with_(u_wet_req=0.0), zf_dirs, weights).run()
    if sol is None:
        raise InfeasibleError("rate/harvest requirements cannot be met within the power budget")
    return sol


class _InitLP(_Surrogate):
    """C1-C3 only, with C3 in exact linear RF form for either harvester."""

    def __init__(self, problem, zf_dirs, weights):
        lin = problem.with_(eh=LinearEh(1.0),
                            p_req=np.asarray(sigmoid_eh_inverse(problem.p_req, problem.eh), float)
                            if isinstance(problem.eh, SigmoidEh) else problem.p_req)
        super().__init__(lin, "wit_eff", zf_dirs=zf_dirs, mode="init", init_weights=weights)
        self.placeholder_point()


def _accept(problem, m, objective, best_val):
    val = objective_value(problem, m, objective)
    return m["feasible"] and val >= best_val - 1e-12 * max(1.0, abs(best_val)), val


def _restore(problem, sol, zf_dirs, max_iter=40):
    """Push a C1-C3 feasible point into C4 by maximising the C4 slack."""
    m = evaluate(problem, sol)
    if "C4" not in m["violations"]:
        return sol
    sur = _Surrogate(problem, "wit_eff", zf_dirs=zf_dirs, mode="restore")
    slack = m["p_eh"] - problem.u_wet_req * m["p_d"]
    for _ in range(max_iter):
        sur.set_point(sol)
        new = sur.run()
        if new is None:
            break
        mn = evaluate(problem, new)
        ns = mn["p_eh"] - problem.u_wet_req * mn["p_d"]
        if ns <= slack + 1e-12 * abs(slack):
            break
        sol, slack = new, ns
        if mn["feasible"]:
            return sol
    raise InfeasibleError("WET-efficiency requirement not attainable")


def _optimise(problem, objective, start, zf_dirs, max_iter, tol):
    sur = _Surrogate(problem, objective, zf_dirs=zf_dirs)
    sol = start
    m = evaluate(problem, sol)
    val = objective_value(problem, m, objective)
    trace = [val]
    for _ in range(max_iter):
        sur.set_point(sol, lam=m["u_wit"] if objective == "wit_eff" else 0.0)
        new = sur.run()
        if new is None:
            break
        mn = evaluate(problem, new)
        ok, nv = _accept(problem, mn, objective, val)
        if not ok:
            break
        gain = nv - val
        sol, m, val = new, mn, nv
        trace.append(val)
        if gain <= tol * max(abs(val), 1e-30):
            break
    return sol, m, val, trace


class _Beams:
    """Rank-one design ``(w_1..w_K, v)`` with exact metrics and gradients.

    Beams are scaled by ``sqrt(p_max)``.  With ``zf_dirs`` the information
    beams are real amplitudes along fixed directions.
    """

    def __init__(self, problem: SwiptProblem, objective: str, zf_dirs=None):
        self.pb, self.obj, self.dirs = problem, objective, zf_dirs
        self.k, self.n = problem.k, problem.n
        self.g = problem.channels
        self.root = math.sqrt(problem.p_max)

    def pack(self, w, v):
        w, v = np.asarray(w) / self.root, np.asarray(v) / self.root
        if self.dirs is None:
            z = np.concatenate([w.ravel(), v])
            return np.concatenate([z.real, z.imag])
        a = np.real(np.sum(w * self.dirs.conj(), axis=1))
        return np.concatenate([a, v.real, v.imag])

    def unpack(self, x):
        k, n = self.k, self.n
        if self.dirs is None:
            h = x.size // 2
            z = x[:h] + 1j * x[h:]
            w, v = z[: k * n].reshape(k, n), z[k * n:]
        else:
            w = x[:k, None] * self.dirs
            v = x[k:k + n] + 1j * x[k + n:]
        return w * self.root, v * self.root

    def parts(self, x):
        pb = self.pb
        w, v = self.unpack(x)
        beams = np.vstack([w, v[None]])               # (K+1, N)
        c = self.g.conj() @ beams.T                   # c[j, b] = g_j^H beam_b
        pw = np.abs(c) ** 2
        sig = np.diag(pw[:, : self.k]).copy()
        tot = pw.sum(axis=1)
        itf = tot - sig
        nz = pb.noise
        rate = (np.log(tot + nz) - np.log(itf + nz)) / _LN2
        eh = pb.eh
        if isinstance(eh, LinearEh):
            f, df = eh.eta * tot, np.full(self.k, eh.eta)
        else:
            f = np.asarray(harvest(eh, tot), float).reshape(self.k)
            z = 1.0 / (1.0 + np.exp(-eh.a * (tot - eh.b)))
            df = eh.psat * eh.a * z * (1 - z) / (1 - eh.psi)
        p_tx = float(np.sum(np.abs(beams) ** 2))
        p_d = pb.p_c + pb.zeta * p_tx
        return dict(w=w, v=v, beams=beams, c=c, tot=tot, itf=itf, rate=rate, f=f, df=df,
                    p_tx=p_tx, p_d=p_d)

    def _chain(self, p, dp, dptx):
        # dp[..., j, b]: partials w.r.t. |g_j^H beam_b|^2; dptx: w.r.t. p_tx
        dp = np.asarray(dp)
        gb = 2.0 * np.einsum("...jb,jb,jn->...bn", dp, p["c"], self.g)
        gb = gb + 2.0 * np.asarray(dptx)[..., None, None] * p["beams"]
        gw, gv = gb[..., : self.k, :], gb[..., self.k, :]
        gw, gv = gw * self.root, gv * self.root
        if self.dirs is None:
            z = np.concatenate([gw.reshape(gw.shape[:-2] + (-1,)), gv], axis=-1)
            return np.concatenate([z.real, z.imag], axis=-1)
        ga = np.real(np.sum(gw.conj() * self.dirs, axis=-1))
        return np.concatenate([ga, gv.real, gv.imag], axis=-1)

    def _rate_partials(self, p):
        k = self.k
        a = 1.0 / (p["tot"] + self.pb.noise)
        b = 1.0 / (p["itf"] + self.pb.noise)
        d = np.zeros((k, k, k + 1))                   # d[j] -> rate_j partials
        for j in range(k):
            d[j, j, :] = a[j] - b[j]
            d[j, j, j] = a[j]
        return d / _LN2

    def objective(self, x):
        p = self.parts(x)
        pb, k = self.pb, self.k
        r_ws = float(pb.weights @ p["rate"])
        dr = np.einsum("j,jib->ib", pb.weights, self._rate_partials(p))
        df = np.repeat(p["df"][:, None], k + 1, axis=1)
        if self.obj == "wit_eff":
            den = p["p_d"] - p["f"].sum()
            u = r_ws / den
            val, dpw, dptx = u, (dr + u * df) / den, -u * pb.zeta / den
        elif self.obj == "sum_rate":
            val, dpw, dptx = r_ws, dr, 0.0
        elif self.obj == "power_min":
            sc = pb.p_c + pb.zeta * pb.p_max
            val, dpw, dptx = -p["p_d"] / sc, np.zeros_like(dr), -pb.zeta / sc
        else:
            sc = self._hscale()
            val, dpw, dptx = p["f"].sum() / sc, df / sc, 0.0
        return -val, -self._chain(p, dpw, dptx)

    def _hscale(self):
        eh = self.pb.eh
        return eh.psat if isinstance(eh, SigmoidEh) else eh.eta * self.pb.p_max * float(
            np.max(np.sum(np.abs(self.g) ** 2, axis=1)))

    def constraints(self, x):
        pb, k = self.pb, self.k
        p = self.parts(x)
        vals = [1.0 - p["p_tx"] / pb.p_max]
        dps, dtx = [np.zeros((k, k + 1))], [-1.0 / pb.p_max]
        rp = self._rate_partials(p)
        for j in np.flatnonzero(pb.r_req > 0):
            vals.append(p["rate"][j] - pb.r_req[j])
            dps.append(rp[j])
            dtx.append(0.0)
        for j in np.flatnonzero(pb.p_req > 0):
            d = np.zeros((k, k + 1))
            d[j] = p["df"][j] / pb.p_req[j]
            vals.append(p["f"][j] / pb.p_req[j] - 1.0)
            dps.append(d)
            dtx.append(0.0)
        if pb.u_wet_req > 0:
            sc = pb.u_wet_req * (pb.p_c + pb.zeta * pb.p_max)
            vals.append((p["f"].sum() - pb.u_wet_req * p["p_d"]) / sc)
            dps.append(np.repeat(p["df"][:, None], k + 1, axis=1) / sc)
            dtx.append(-pb.u_wet_req * pb.zeta / sc)
        return np.array(vals), self._chain(p, np.array(dps), np.array(dtx))

    def solution(self, x):
        w, v = self.unpack(x)
        return SwiptSolution(np.array([np.outer(a, a.conj()) for a in w]), np.outer(v, v.conj()))


def _polish(problem, objective, sol, zf_dirs=None, max_iter=200):
    """SLSQP on the exact rank-one problem from a feasible design."""
    m0 = evaluate(problem, sol)
    val0 = objective_value(problem, m0, objective)
    bm = _Beams(problem, objective, zf_dirs)
    if zf_dirs is None:
        w0 = sol.w
    else:
        amp = np.sqrt(np.clip(np.real(np.einsum("kij,kj,ki->k", sol.w_cov, zf_dirs, zf_dirs.conj())), 0, None))
        w0 = amp[:, None] * zf_dirs
    x0 = bm.pack(w0, sol.v)
    # rank-one extraction may leave a start marginally infeasible; SLSQP
    # restores feasibility and only feasible outcomes are kept
    m1 = evaluate(problem, bm.solution(x0))
    cache = {}

    def cons(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = bm.constraints(x)
        return cache[key]

    res = minimize(bm.objective, x0, jac=True, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda x: cons(x)[0], "jac": lambda x: cons(x)[1]}],
                   options={"maxiter": max_iter, "ftol": 1e-11})
    cand = bm.solution(res.x)
    mc = evaluate(problem, cand)
    vc = objective_value(problem, mc, objective)
    pool = [(val0, 0, sol, m0)]
    if m1["feasible"]:
        pool.append((objective_value(problem, m1, objective), 1, bm.solution(x0), m1))
    if mc["feasible"]:
        pool.append((vc, 2, cand, mc))
    best = max(pool, key=lambda t: t[0])
    return best[2], best[3], best[0]


def _run(problem, objective, zf_dirs=None, starts=None, restarts=0, stream=None,
         max_iter=60, tol=1e-7, sca_iter=None, polish=True):
    sca_iter = max_iter if sca_iter is None else sca_iter
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    rng = np.random.default_rng(0) if stream is None else (
        stream if isinstance(stream, np.random.Generator) else stream.generator())
    cands = []
    for s in starts or []:
        if s is not None and evaluate(problem, s)["feasible"]:
            cands.append(s)
    n_random = restarts if cands else max(restarts, 1)
    weights = [np.ones(problem.k)] + [rng.uniform(0.05, 1.0, problem.k) for _ in range(n_random - 1)]
    last_err = None
    for w in weights[:n_random]:
        try:
            s0 = _init_point(problem, zf_dirs, w)
            cands.append(_restore(problem, s0, zf_dirs))
        except InfeasibleError as e:
            last_err = e
    if not cands:
        raise last_err or InfeasibleError("no feasible start")
    best = None
    for s in cands:
        sol, m, val, trace = _optimise(problem, objective, s, zf_dirs, sca_iter, tol)
        if polish:
            sol, m, v2 = _polish(problem, objective, sol, zf_dirs)
            if v2 > val:
                trace.append(v2)
            val = v2
        key = (val, -m["p_tx"])
        if best is None or key > best[0]:
            sol.info = {"objective": val, "trace": trace, "metrics": m}
            best = (key, sol)
    return best[1]


def solve(problem: SwiptProblem, objective="wit_eff", restarts=8, stream=None, starts=None,
          max_iter=60, tol=1e-7, include_zf=True, sca_iter=None, polish=True) -> SwiptSolution:
    """SCA/SDR design of the covariances.

    Parameters
    ----------
    problem : SwiptProblem
    objective : {"wit_eff", "sum_rate", "power_min", "harvest_max"}
    restarts : int
        Number of randomised convex starting points.
    stream : RngStream or Generator, optional
    starts : list of SwiptSolution, optional
        Extra feasible warm starts.
    include_zf : bool
        Also start from the optimised zero-forcing design when it is
        feasible, so the result is never worse than that baseline.

    Raises
    ------
    InfeasibleError
    """
    starts = list(starts or [])
    if include_zf:
        try:
            starts.append(zf_baseline(problem, objective=objective, max_iter=max_iter, tol=tol,
                                      sca_iter=sca_iter))
        except (InfeasibleError, np.linalg.LinAlgError):
            pass
    return _run(problem, objective, starts=starts, restarts=restarts, stream=stream,
                max_iter=max_iter, tol=tol, sca_iter=sca_iter, polish=polish)


# ----------------------------------------------------------------------------
# Oracles and comparisons
# ----------------------------------------------------------------------------
def brute_force_tiny(problem: SwiptProblem, objective="wit_eff", resolution=16):
    """Exhaustive grid over rank-one designs for ``N <= 2``, ``K = 1``.

    The information beam is ``sqrt(p s) [cos th, sin th e^{j ph}]`` and the
    energy beam ``sqrt(p (1 - s)) [cos th', sin th' e^{j ph'}]`` with the
    total power ``p``, share ``s`` and angles on uniform grids of
    ``resolution`` points.
    """
    if problem.k != 1 or problem.n > 2:
        raise ValueError("brute force is limited to N <= 2 and K = 1")
    if np.any(problem.noise < 1e-300):
        raise ValueError("zero-noise input")
    r = int(resolution)
    p = np.linspace(0.0, problem.p_max, r + 1)[1:]
    s = np.linspace(0.0, 1.0, r + 1)
    if problem.n == 1:
        dirs = np.ones((1, 1), complex)
    else:
        th = np.linspace(0.0, math.pi / 2, r + 1)
        ph = np.linspace(0.0, 2 * math.pi, r, endpoint=False)
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        dirs = np.stack([np.cos(tt).ravel() + 0j, (np.sin(tt) * np.exp(1j * pp)).ravel()], axis=1)
    g = problem.channels[0]
    a = np.abs(dirs.conj() @ g) ** 2  # |g^H d|^2 per direction
    # signal and energy gains over (p, s, dir_w, dir_v)
    sw = (p[:, None, None, None] * s[None, :, None, None]) * a[None, None, :, None]
    se = (p[:, None, None, None] * (1 - s)[None, :, None, None]) * a[None, None, None, :]
    noise = problem.noise[0]
    rate = np.log2(1.0 + sw / (se + noise))
    p_rf = sw + se
    p_out = np.asarray(harvest(problem.eh, p_rf), dtype=float)
    p_tx = np.broadcast_to(p[:, None, None, None], p_rf.shape)
    p_d = problem.p_c + problem.zeta * p_tx
    feas = (rate >= problem.r_req[0]) & (p_out >= problem.p_req[0]) & (p_out >= problem.u_wet_req * p_d)
    if objective == "wit_eff":
        val = rate / (p_d - p_out)
    elif objective == "sum_rate":
        val = rate
    elif objective == "power_min":
        val = -p_d
    elif objective == "harvest_max":
        val = p_out
    else:
        raise ValueError(f"objective must be one of {OBJECTIVES}")
    val = np.where(feas, val, -np.inf)
    i = np.unravel_index(np.argmax(val), val.shape)
    if not np.isfinite(val[i]):
        raise InfeasibleError("no feasible grid point")
    pw = p[i[0]] * s[i[1]]
    pv = p[i[0]] * (1 - s[i[1]])
    w = math.sqrt(pw) * dirs[i[2]]
    v = math.sqrt(pv) * dirs[i[3]]
    sol = SwiptSolution(np.outer(w, w.conj())[None], np.outer(v, v.conj()))
    sol.info = {"objective": float(val[i]), "resolution": r}
    return sol


def mismatch_eval(problem_linear: SwiptProblem, eh_true, restarts=1, stream=None,
                  objective="wit_eff", solution=None):
    """Design under the linear harvester, evaluate under ``eh_true``.

    The evaluated utility is zeroed when any QoS constraint fails.

    Returns
    -------
    design_metrics, evaluated_metrics : dict
    """
    sol = solution if solution is not None else solve(problem_linear, objective, restarts, stream)
    m_lin = evaluate(problem_linear, sol)
    m_true = evaluate(problem_linear, sol, eh=eh_true)
    if not m_true["feasible"]:
        m_true["u_wit"] = 0.0
    return m_lin, m_true


def random_problem(stream, n=10, k=3, pmax_dbm=46.0, rice_k_db=2.0, pl_exp=2.5,
                   noise_dbm=-100.0, r_req=1.0, p_req=2e-6, eh=None, d_min=1.0,
                   d_max=3.0, ref_gain=6.8e-4, p_c=1.0, zeta=2.5, u_wet_req=0.0):
    """Random instance: RXs uniform over an annulus, Rician ULA channels.

    The specular part is the half-wavelength ULA response at a uniform
    random angle.
    """
    rng = stream if isinstance(stream, np.random.Generator) else stream.generator()
    r = np.sqrt(rng.uniform(d_min**2, d_max**2, k))
    ang = rng.uniform(-math.pi / 2, math.pi / 2, k)
    beta = ref_gain * r ** (-pl_exp)
    kf = float(db2lin(rice_k_db))
    steer = np.exp(-1j * math.pi * np.arange(n)[None, :] * np.sin(ang)[:, None])
    scat = complex_normal(rng, (k, n))
    g = np.sqrt(beta)[:, None] * (math.sqrt(kf / (kf + 1)) * steer + math.sqrt(1 / (kf + 1)) * scat)
    return SwiptProblem(g, np.full(k, 1.0 / k), float(dbm2watt(pmax_dbm)), np.full(k, r_req),
                        np.full(k, p_req), u_wet_req, p_c, zeta, eh or LinearEh(1.0),
                        np.full(k, float(dbm2watt(noise_dbm))))


def wit_sweep(problem_linear: SwiptProblem, eh_sigmoid: SigmoidEh, u_values, restarts=1,
              stream=None, max_iter=60, tol=1e-7, sca_iter=None):
    """WIT efficiency of four schemes over a WET-efficiency sweep.

    The sweep runs from the largest requirement down, and each point is
    warm-started from the previous one; infeasible points score 0.

    Returns
    -------
    list of dict
        Keys ``uwet_req``, ``wit_eff_linear``, ``wit_eff_sigmoid``,
        ``wit_eff_mismatch``, ``wit_eff_zf``, ``rank_flag``.
    """
    rng = np.random.default_rng(0) if stream is None else (
        stream if isinstance(stream, np.random.Generator) else stream.generator())
    prev = {"lin": None, "sig": None, "zf": None}
    rows = []
    for u in sorted(u_values, reverse=True):
        row = {"uwet_req": float(u)}
        p_lin = problem_linear.with_(u_wet_req=float(u))
        p_sig = p_lin.with_(eh=eh_sigmoid)
        try:
            zf = zf_baseline(p_sig, max_iter=max_iter, tol=tol, sca_iter=sca_iter,
                             starts=[prev["zf"]] if prev["zf"] is not None else None)
            prev["zf"] = zf
            row["wit_eff_zf"] = zf.info["objective"]
        except (InfeasibleError, np.linalg.LinAlgError):
            zf = None
            row["wit_eff_zf"] = 0.0
        flag = False
        for tag, pb in (("lin", p_lin), ("sig", p_sig)):
            starts = [prev[tag]] if prev[tag] is not None else []
            if tag == "sig":
                # the ZF design and the linear-model design are legitimate
                # starts whenever they are feasible
                starts += [x for x in (zf, prev["lin"]) if x is not None]
            try:
                sol = solve(pb, "wit_eff", restarts if not starts else 0, rng, starts=starts,
                            max_iter=max_iter, tol=tol, sca_iter=sca_iter, include_zf=tag == "lin")
                prev[tag] = sol
                u_w = sol.info["objective"]
                flag |= sol.rank_flagged
            except InfeasibleError:
                sol, u_w = None, 0.0
            row["wit_eff_linear" if tag == "lin" else "wit_eff_sigmoid"] = u_w
            if tag == "lin":
                if sol is None:
                    row["wit_eff_mismatch"] = 0.0
                else:
                    row["wit_eff_mismatch"] = mismatch_eval(p_lin, eh_sigmoid, solution=sol)[1]["u_wit"]
        row["rank_flag"] = flag
        rows.append(row)
    return rows[::-1]
