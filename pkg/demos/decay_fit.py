"""Measured gradient decay at an island corner against the pencil prediction.

The relaxed beta = 0.5 island has a 60 degree border.  Loading it with a
small mismatch strain, the energy in a disc of radius r around the corner
scales like r^(2 alpha); the fit is compared with 2 alpha from the pencil.

    python3 demos/decay_fit.py
"""
import math

import numpy as np

from filmlab import FlowConfig, Materials, SectorSpec, Tensions, assemble_pencil, make_profile, minimize, singular_exponents
from filmlab.analysis import contact_angles, fit_decay_exponent
from filmlab.elasticity import solve_equilibrium
from filmlab.geometry import mesh_subgraph, zero_set

n = 400
x = np.linspace(0.0, 1.0, n + 1)
island = make_profile(0.0, 1.0, np.where(np.abs(x - 0.5) <= 0.25 + 1e-12, 0.1, 0.0))
t = Tensions.from_beta(0.5)
cap = minimize(island, Materials(1.0, 1.0, 2.0, 2.0), t, FlowConfig()).profile

corner = next(c for c in contact_angles(cap, zero_set(cap)) if c.kind == "border")
print(f"corner at x = {corner.x0:.4f}, angle {math.degrees(corner.theta):.2f} deg")

mat = Materials(1.0, 1.0, 2.0, 2.0, e0=0.02)
fine = cap.refined_near(corner.x0, 10)
state = solve_equilibrium(mesh_subgraph(fine, None, None, min_angle_deg=0.0), mat)
fit = fit_decay_exponent(state, (corner.x0, 0.0), 0.01, 8)
pred = singular_exponents(assemble_pencil(SectorSpec.border(corner.theta), mat)).alpha_pred

print(f"{'r':>10} {'energy in disc':>15}")
for r, e in zip(fit.radii, fit.integrals):
    print(f"{r:10.3e} {e:15.6e}")
print(f"fitted 2 alpha = {fit.two_alpha:.4f} (r2 = {fit.r2:.5f}), predicted {2 * min(pred, 1.0):.4f}")
