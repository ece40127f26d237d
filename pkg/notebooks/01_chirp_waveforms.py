"""
Chirp waveforms for wireless power
==================================

Superimposed chirps against a multisine on a fourth-order diode model.
"""

# %%
import numpy as np

from wiet import waveform
from wiet.ehmodels import DiodeSeries
from wiet.numerics import RngStream

diode = DiodeSeries(i_s=0.6e-3, delta=1.0, v_t=25e-3, r_ant=1.0)
chirp = waveform.ChirpSpec(16, 2, 200e3)
tone = waveform.ChirpSpec(16, 1, 200e3, kind="tone")
print("selected subbands:", chirp.n_selected, " symbol time [s]:", chirp.t_symbol)

# %% instantaneous envelope of one chirp
t = chirp.sample_times()
env = waveform.chirp_envelope(chirp, 1, 1, t)
print("envelope power (mean |e|^2):", np.mean(np.abs(env) ** 2))

# %% harvest vs number of transmit antennas
for m in (2, 6, 12):
    hc, sc = waveform.harvest_eval(chirp, None, diode, 1.0, 2000, RngStream(0, m),
                                   m_antennas=m, beta=1e-3)
    hm, sm = waveform.harvest_eval(tone, None, diode, 1.0, 2000, RngStream(1, m),
                                   m_antennas=m, beta=1e-3)
    print(f"M={m:2d}  chirp {hc:.4g} +- {sc:.1g}  multisine {hm:.4g} +- {sm:.1g}  "
          f"ratio {hc / hm:.3f}")

# %% per-symbol BPSK chirp rate, normalised to its high-SINR limit
for rho in (0.1, 1.0, 10.0, 1e3):
    print(f"rho={rho:7.1f}  bpsk rate {waveform.bpsk_rate(rho):.4f}")
