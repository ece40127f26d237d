"""
Reflecting surfaces: min-power design, modes and feedback scanning
==================================================================
"""

# %%
import warnings

import numpy as np

from wiet import irs
from wiet.channel import dbm2watt
from wiet.numerics import RngStream

warnings.simplefilter("ignore")

# %% hybrid precoding with a surface of growing size
pb = irs.random_irs_problem(RngStream(0, 0).generator(), n_e=128, m=24, k=2, n_rf=6, gamma_db=0.0)
for n in (32, 64, 128):
    p = pb.subset(n)
    r = irs.solve_hp_pb_ps(p, state=irs.IrsState.random(n, np.random.default_rng(n)),
                           optimize_irs=False)
    o = irs.solve_hp_pb_ps(p, start=r)
    print(f"N_E={n:3d}  random phases {r.p_sum:.3f} W  optimized {o.p_sum:.3f} W")

# %% self-sustainable operating modes at 50 dBm
scen = irs.ModeScenario(n_e=64)
ch = irs.mode_channels(scen, RngStream(1, 0).generator())
res = irs.mode_sim(scen, ch, float(dbm2watt(50.0)), irs.MODES)
for mode, v in res.items():
    if v is not None:
        print(f"{mode:4s} snr {v['snr']:.3g}  rx harvest {v['rx_harvest']:.3g}  "
              f"irs harvest {v['irs_harvest']:.3g}")

# %% multi-tile beam scanning with power feedback only
env = irs.random_mtbs_env(RngStream(2, 0))
tr = irs.mtbs_scan(env, "tx", "rx", (4, 4), n_sweeps=3, bits=1).trace
print("scan trace (first, last):", tr[0], tr[-1])

# %% beam sharing between a data link and a power link
env = irs.random_bsa_env(RngStream(3, 0))
res = irs.beam_sharing(env, -20.0)
print("PA-mixed leakage", res.info["pa_mixed"]["ptx_du"], " beam sharing", res.info["metrics"]["ptx_du"])
