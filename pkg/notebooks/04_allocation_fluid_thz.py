"""
Resource allocation, fluid antennas and THz inputs
==================================================
"""

# %%
import warnings

from wiet import resalloc, thz
from wiet.ehmodels import SigmoidEh
from wiet.numerics import RngStream
from wiet.scenarios import REGISTRY, thz_setup

warnings.simplefilter("ignore")

# %% beamforming under linear and sigmoid harvesting models
pb = resalloc.random_problem(RngStream(0, 0).generator(), n=6, k=2, pmax_dbm=46.0, p_req=2e-6)
eh = SigmoidEh(psat=0.02, a=6400.0, b=0.003)
for row in resalloc.wit_sweep(pb, eh, [0.0, 1e-4], restarts=1, stream=RngStream(0, 1).generator()):
    print({k: round(v, 5) if isinstance(v, float) else v for k, v in row.items()})

# %% fluid antenna against conventional selection, 10 dBm
tab = REGISTRY["fig17_18_fluidra"].run(dict(REGISTRY["fig17_18_fluidra"].defaults,
                                            **{"fra.trials": 2000, "fra.ptx_dbm": [10.0]}), 0)
for row in tab["fig17_18_fluidra"][1]:
    print(row)

# %% THz rate-power trade-off
link, psi = thz_setup(REGISTRY["fig20_thz_tradeoff"].defaults)
for p_uw in (0.0, 40.0, 80.0):
    o = thz.optimal_rate(link.with_preq(p_uw * 1e-6), psi)
    print(f"P_req={p_uw:4.0f} uW  bound {o['J']:.4f} nat  ({o['regime']})")
