"""Contact angle of a relaxed island against the Young angle arccos(beta).

A rectangular island of fixed area is relaxed with no mismatch strain, so
only the surface terms act.  The measured border angle should track
arccos(beta); at beta = 1 the film spreads over the whole substrate.

    python3 demos/young_angle.py
"""
import math

import numpy as np

from filmlab import FlowConfig, Materials, Tensions, make_profile, minimize
from filmlab.analysis import check_young_dupre

n = 400
x = np.linspace(0.0, 1.0, n + 1)
island = make_profile(0.0, 1.0, np.where(np.abs(x - 0.5) <= 0.25 + 1e-12, 0.1, 0.0))
mat = Materials(1.0, 1.0, 2.0, 2.0, e0=0.0)

print(f"{'beta':>5} {'target':>8} {'measured':>9} {'iters':>6}  reason")
for b in (0.25, 0.5, 0.75, 1.0):
    t = Tensions.from_beta(b)
    traj = minimize(island, mat, t, FlowConfig())
    rep = check_young_dupre(traj.profile, t)
    th = [math.degrees(e.theta) for e in rep.entries]
    shown = f"{np.mean(th):9.2f}" if th else f"{'spread':>9}"
    print(f"{b:5.2f} {math.degrees(math.acos(b)):8.2f} {shown} {len(traj.iterates):6d}  {traj.reason}")
