"""
Choosing the trade-off in F_ext
===============================

F_ext blends precision-like XP and recall-like XR. The parameter mu moves the
weight between them: small values punish false alarms, large values punish
missed cracks, and 0.5 gives the harmonic mean.
"""

import numpy as np

from coveval import MU_PRESETS, f_ext_mu

# a cautious detector (high XP, low XR) and an eager one (the reverse)
cautious = (0.95, 0.60)
eager = (0.60, 0.95)

print(f"{'mu':>5}  {'cautious':>9}  {'eager':>9}")
for mu in np.linspace(0.05, 0.95, 7):
    print(f"{mu:5.2f}  {f_ext_mu(*cautious, mu):9.3f}  {f_ext_mu(*eager, mu):9.3f}")

# named scenarios map to fixed mu values
for name, mu in MU_PRESETS.items():
    print(f"{name:>24}: mu={mu}  cautious={f_ext_mu(*cautious, mu):.3f}  eager={f_ext_mu(*eager, mu):.3f}")

# at mu=0.5 the score is the harmonic mean of XP and XR
xp, xr = cautious
assert abs(f_ext_mu(xp, xr, 0.5) - 2 * xp * xr / (xp + xr)) < 1e-12
