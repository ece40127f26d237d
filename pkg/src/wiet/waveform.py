"""
Superimposed-chirp and multisine information and energy transfer.

Each of ``N`` subbands of width ``B`` carries ``xi`` superimposed up-chirps
of duration ``T = xi/B`` and rate ``mu = B/T``.  Chirp ``l = 1..xi`` of
subband ``n = 1..N`` starts at offset ``(l-1) B/xi`` and wraps down by ``B``
at ``T_l = T (1 - (l-1)/xi)``.  Selected-subband arrays returned by
``build_tx`` hold 0-based indices.  The transmitter keeps the ``N/xi`` strongest
subbands, splits power proportionally to their estimated gains and applies
matched beamformers.

Signals are handled as complex envelopes around a carrier ``f0``.  The
diode metric of a passband signal ``Re{y~(t) e^{j 2 pi f0 t}}`` averaged
over carrier cycles is ``sum_n k_n R^(n/2) C(n, n/2) 2^-n <|y~|^n>``, which
is what ``diode_envelope_power`` evaluates; ``f0`` drops out.
"""

import math
from dataclasses import dataclass

import numpy as np

from .channel import EstimateSet, complex_normal, mmse_estimate, order_subbands
from .ehmodels import DiodeSeries

__all__ = [
    "ChirpSpec",
    "TxDesign",
    "chirp_phase",
    "chirp_sample",
    "chirp_envelope",
    "tone_envelope",
    "subband_waveform",
    "build_tx",
    "multisine_design",
    "diode_envelope_power",
    "received_envelope",
    "harvest_eval",
    "bpsk_rate",
    "sinr_mc",
    "rate_eval",
]


@dataclass(frozen=True)
class ChirpSpec:
    """Superimposed-chirp waveform parameters.

    Attributes
    ----------
    n_subbands : int
        Number of subbands ``N``.
    xi : int
        Chirps superimposed per subband.
    band : float
        Subband width ``B`` [Hz].
    f0 : float
        Frequency of the lowest subband edge [Hz]; 0 for baseband.
    kind : str
        ``"chirp"`` or ``"tone"`` (fixed-frequency multisine, ``xi = 1``).
    """

    n_subbands: int = 16
    xi: int = 2
    band: float = 200e3
    f0: float = 0.0
    kind: str = "chirp"

    def __post_init__(self):
        if self.xi < 1 or self.n_subbands < 1 or self.band <= 0:
            raise ValueError("invalid chirp parameters")
        if self.n_subbands % self.xi:
            raise ValueError("N must be divisible by xi")
        if self.kind not in ("chirp", "tone"):
            raise ValueError("kind must be 'chirp' or 'tone'")
        if self.kind == "tone" and self.xi != 1:
            raise ValueError("fixed-frequency tones use xi = 1")

    @property
    def t_symbol(self) -> float:
        return self.xi / self.band

    @property
    def mu(self) -> float:
        return self.band / self.t_symbol

    @property
    def n_selected(self) -> int:
        return self.n_subbands // self.xi

    def f(self, n: int) -> float:
        """Start frequency of subband ``n`` (1-based)."""
        return self.f0 + (n - 1) * self.band

    def sample_times(self, oversample: int = 8) -> np.ndarray:
        """Sampling instants over one symbol at rate ``oversample N B``."""
        fs = oversample * self.n_subbands * self.band
        k = int(round(fs * self.t_symbol))
        return np.arange(k) / fs


def chirp_phase(spec: ChirpSpec, n: int, l: int, t):
    """Phase ``2 pi t (f_n + offset + mu t / 2)`` of chirp ``l`` in subband ``n``."""
    t = np.asarray(t, dtype=float)
    T = spec.t_symbol
    if np.any(t < 0) or np.any(t > T * (1 + 1e-12)):
        raise ValueError("t outside [0, T]")
    if not (1 <= l <= spec.xi):
        raise ValueError("chirp index outside [1, xi]")
    if not (1 <= n <= spec.n_subbands):
        raise ValueError("subband index outside [1, N]")
    t_l = T * (1.0 - (l - 1) / spec.xi)
    off = np.where(t <= t_l, (l - 1) * spec.band / spec.xi, (l - 1 - spec.xi) * spec.band / spec.xi)
    return 2.0 * math.pi * t * (spec.f(n) + off + 0.5 * spec.mu * t)


def chirp_sample(spec: ChirpSpec, n: int, l: int, t):
    """Real chirp value ``cos(phase)``; ``n`` and ``l`` are 1-based."""
    v = np.cos(chirp_phase(spec, n, l, t))
    return v[()] if np.ndim(v) == 0 else v


def chirp_envelope(spec: ChirpSpec, n: int, l: int, t):
    """Unit-modulus complex chirp ``exp(j phase)``."""
    return np.exp(1j * chirp_phase(spec, n, l, t))


def tone_envelope(spec: ChirpSpec, n: int, t):
    """Fixed-frequency tone at subband frequency ``f_n`` (1-based ``n``)."""
    return np.exp(2j * math.pi * spec.f(n) * np.asarray(t, float))


def subband_waveform(spec: ChirpSpec, n: int, symbols, t):
    """Complex envelope ``sqrt(2/xi) sum_l d_l s_{n,l}(t)``.

    With BPSK symbols the passband waveform has unit power on average over
    symbols.
    """
    d = np.asarray(symbols, dtype=float).reshape(-1)
    if d.size != spec.xi:
        raise ValueError("need xi symbols")
    if spec.kind == "tone":
        return math.sqrt(2.0) * d[0] * tone_envelope(spec, n, t)
    out = sum(d[l - 1] * chirp_envelope(spec, n, l, t) for l in range(1, spec.xi + 1))
    return math.sqrt(2.0 / spec.xi) * out


def _basis(spec: ChirpSpec, t):
    # rows: (n, l) pairs in subband-major order
    rows = []
    for n in range(1, spec.n_subbands + 1):
        for l in range(1, spec.xi + 1):
            if spec.kind == "tone":
                rows.append(tone_envelope(spec, n, t))
            else:
                rows.append(chirp_envelope(spec, n, l, t))
    return np.asarray(rows)


@dataclass
class TxDesign:
    """Transmit design over the selected subbands.

    Attributes
    ----------
    spec : ChirpSpec
    selected : ndarray of int
        Selected subband indices, strongest first.
    power : ndarray
        Power ``eta_n`` per selected subband [W], summing to ``p_tx``.
    phi : ndarray, shape (n_selected, M)
        Unit-norm beamformers.
    p_tx : float
    """

    spec: ChirpSpec
    selected: np.ndarray
    power: np.ndarray
    phi: np.ndarray
    p_tx: float


def build_tx(est, spec: ChirpSpec, p_tx: float) -> TxDesign:
    """Select the ``N/xi`` strongest subbands with proportional power.

    Parameters
    ----------
    est : EstimateSet or ndarray, shape (N, M)
        Channel estimates per subband.
    spec : ChirpSpec
    p_tx : float
        Total transmit power [W].
    """
    g_hat = est.g_hat if isinstance(est, EstimateSet) else np.asarray(est)
    if g_hat.shape[0] != spec.n_subbands:
        raise ValueError("estimate count does not match N")
    gains = np.sum(np.abs(g_hat) ** 2, axis=-1)
    order = order_subbands(gains)[: spec.n_selected]
    sel_g = gains[order]
    if p_tx == 0 or np.sum(sel_g) == 0:
        power = np.zeros(order.size)
    else:
        power = p_tx * sel_g / np.sum(sel_g)
    norms = np.sqrt(np.maximum(sel_g, 1e-300))[:, None]
    phi = g_hat[order] / norms
    return TxDesign(spec, order, power, phi, float(p_tx))


def multisine_design(est, n_subbands: int, band: float, p_tx: float, f0: float = 0.0):
    """Fixed-frequency baseline: one tone per subband over all subbands."""
    spec = ChirpSpec(n_subbands, 1, band, f0, kind="tone")
    return build_tx(est, spec, p_tx)


def diode_envelope_power(envelope, m: DiodeSeries, axis=-1):
    """Carrier-averaged diode metric of complex envelope samples.

    ``sum_n k_n R^(n/2) binom(n, n/2) 2^-n mean(|y~|^n)`` over even ``n``.
    """
    y = np.asarray(envelope)
    if y.size == 0 or y.shape[axis] == 0:
        raise ValueError("empty sample set")
    a2 = np.abs(y) ** 2
    total = 0.0
    an = np.ones_like(a2)
    for n in range(2, m.order + 1, 2):
        an = an * a2
        c = math.comb(n, n // 2) / 2.0**n
        total = total + m.k(n) * m.r_ant ** (n // 2) * c * np.mean(an, axis=axis)
    return total


def _effective_gain(design: TxDesign, truth):
    # received complex amplitude per selected subband: sqrt(eta) g^T phi*
    g = np.asarray(truth)[..., design.selected, :]
    return np.sqrt(design.power) * np.sum(g * np.conj(design.phi), axis=-1)


def received_envelope(design: TxDesign, truth, symbols, t=None):
    """Received complex envelope over one symbol.

    Parameters
    ----------
    design : TxDesign
    truth : ndarray, shape (N, M)
    symbols : ndarray, shape (n_selected, xi)
    t : ndarray, optional
    """
    spec = design.spec
    t = spec.sample_times() if t is None else t
    a = _effective_gain(design, truth)
    basis = _basis(spec, t).reshape(spec.n_subbands, spec.xi, -1)[design.selected]
    c = math.sqrt(2.0 / spec.xi) * a[:, None] * np.asarray(symbols, float)
    return np.einsum("nl,nlt->t", c, basis)


def harvest_eval(spec_or_design, channels, diode: DiodeSeries, p_tx: float,
                 n_trials: int, stream, m_antennas: int = None, beta: float = 1.0,
                 pilot=None, batch: int = 500):
    """Monte Carlo average of the diode metric over fading and symbols.

    Parameters
    ----------
    spec_or_design : ChirpSpec
        Waveform; the design is rebuilt from fresh estimates each trial.
    channels : callable or None
        ``channels(rng, n)`` returning ``(n, N, M)`` true gains.  ``None``
        draws i.i.d. Rayleigh gains of power ``beta`` with ``m_antennas``.
    diode : DiodeSeries
    p_tx : float
    n_trials : int
    stream : RngStream or Generator
    pilot : dict, optional
        ``{"p_p", "tau_p", "sigma2"}``; perfect CSI when omitted.

    Returns
    -------
    mean, stderr : float
    """
    spec = spec_or_design.spec if isinstance(spec_or_design, TxDesign) else spec_or_design
    rng = stream if isinstance(stream, np.random.Generator) else stream.generator()
    t = spec.sample_times()
    basis = _basis(spec, t).reshape(spec.n_subbands, spec.xi, -1)
    vals = np.empty(n_trials)
    done = 0
    while done < n_trials:
        nb = min(batch, n_trials - done)
        if channels is None:
            g = complex_normal(rng, (nb, spec.n_subbands, m_antennas), beta)
        else:
            g = channels(rng, nb)
        if pilot is not None:
            g_hat = np.empty_like(g)
            for i in range(nb):
                g_hat[i] = mmse_estimate(g[i], pilot["p_p"], pilot["tau_p"], spec.n_subbands,
                                         pilot["sigma2"], rng, beta).g_hat
        else:
            g_hat = g
        d = rng.choice([-1.0, 1.0], size=(nb, spec.n_selected, spec.xi))
        coeff = np.zeros((nb, spec.n_subbands, spec.xi), complex)
        for i in range(nb):
            des = build_tx(g_hat[i], spec, p_tx)
            a = _effective_gain(des, g[i])
            coeff[i, des.selected, :] = math.sqrt(2.0 / spec.xi) * a[:, None] * d[i]
        env = coeff.reshape(nb, -1) @ basis.reshape(-1, t.size)
        vals[done:done + nb] = diode_envelope_power(env, diode, axis=-1)
        done += nb
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(n_trials))


# ----------------------------------------------------------------------------
# Information rate
# ----------------------------------------------------------------------------
_BPSK_LIMIT = 1.0 - math.log(2.0)


def bpsk_rate(rho, tol: float = 1e-10):
    """Per-symbol spectral efficiency of a BPSK chirp at SINR ``rho``.

    Evaluates ``-sqrt(rho/(rho+2)) sum_u 2(-1)^u/(sqrt(1+2/rho) + 2u + 1)``
    normalised by its high-SINR limit ``1 - ln 2`` so the result is in
    ``[0, 1)`` bits.  The alternating series is summed in consecutive pairs
    until a pair falls below ``tol``.
    """
    r = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.zeros_like(r)
    pos = r > 0
    if np.any(pos):
        rp = r[pos]
        c = np.sqrt(1.0 + 2.0 / rp)
        total = np.zeros_like(rp)
        m = 1
        chunk = 4096
        while True:
            k = np.arange(m, m + chunk)[None, :]
            # pair (u = 2k-1, u = 2k): 2[-1/(c+4k-1) + 1/(c+4k+1)]
            pair = -4.0 / ((c[:, None] + 4 * k - 1) * (c[:, None] + 4 * k + 1))
            total += pair.sum(axis=1)
            m += chunk
            if np.max(np.abs(pair[:, -1])) < tol:
                break
        # analytic tail of the remaining pairs, ~ -1/(4 m)
        total += -1.0 / (4.0 * m + c - 1.0)
        out[pos] = -np.sqrt(rp / (rp + 2.0)) * total / _BPSK_LIMIT
    out = np.clip(out, 0.0, None)
    return out[0] if np.ndim(rho) == 0 else out


def sinr_mc(design: TxDesign, est: EstimateSet, sigma2: float, n_trials: int, rng):
    """Monte Carlo mean SINR per selected subband and chirp.

    ``E{P T eta |g_hat^T phi*|^2 / (P T eta |g_err^T phi*|^2 + |w|^2)}`` over
    the estimation error and noise, with the demodulator gain folded out.

    Returns
    -------
    ndarray, shape (n_selected, xi)
    """
    T = design.spec.t_symbol
    sig = _effective_gain(design, est.g_hat)
    ev = max(est.err_var, 0.0)
    n_sel, xi = design.selected.size, design.spec.xi
    # g_err^T phi* is CN(0, err_var) for unit-norm phi
    e = complex_normal(rng, (n_trials, n_sel, xi), ev) if ev > 0 else 0.0
    w = complex_normal(rng, (n_trials, n_sel, xi), sigma2)
    num = T * np.abs(sig[None, :, None]) ** 2
    den = T * design.power[None, :, None] * np.abs(e) ** 2 + np.abs(w) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.inf)
    return np.mean(ratio, axis=0)


def rate_eval(design: TxDesign, est: EstimateSet, sigma2: float, tau_dl: float,
              n_trials: int = 10_000, rng=None) -> float:
    """Downlink rate ``(tau_dl / T) sum_l R_l`` [bits].

    ``R_l`` sums ``bpsk_rate`` over the selected subbands for symbol ``l``.
    """
    rng = rng or np.random.default_rng(0)
    rho = sinr_mc(design, est, sigma2, n_trials, rng)
    return float(tau_dl / design.spec.t_symbol * np.sum(bpsk_rate(rho.ravel())))
