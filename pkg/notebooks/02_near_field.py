"""
Near-field antenna placement and beam focusing
==============================================

Max-min placement of two antennas on a wall, and a far-then-near scan.
"""

# %%
import math

from wiet.nearfield import (Room, fnbs_scan, fraunhofer, gain_over_farfield, optimize_placement,
                            ula, worst_case_power_closed_form)

c = 299_792_458.0
print("Fraunhofer, 20 cm at 2.4 GHz:", fraunhofer(0.2, c / 2.4e9), "m")
print("Fraunhofer, 20 cm at 60 GHz: ", fraunhofer(0.2, c / 60e9), "m")

# %% closed form against the numerical search
for ly in (0.5, 2.0, 8.0):
    room = Room(4.0, ly, 3.0, shell=0.0)
    pos, val = optimize_placement(room)
    print(f"ly={ly:3.1f} m  antennas at x={pos}  worst-case {val:.4g}  "
          f"closed form {worst_case_power_closed_form(room):.4g}")

# %% gain over co-located antennas
for ly in (0.01, 0.5, 2.0):
    print(f"ly/lx={ly:4.2f}  gain {gain_over_farfield(Room(1.0, ly, 0.25)):.3f}")

# %% far-then-near scan of a 64-element ULA at 28 GHz
arr = ula(64, c / 28e9)
d_f = fraunhofer(arr.aperture, arr.lam)
th = math.radians(20)
r = 0.05 * d_f
res = fnbs_scan(arr, [r * math.sin(th), r * math.cos(th), 0.0])
print(f"far beam power {res['far_power']:.4g}  near beam power {res['near_power']:.4g}")
