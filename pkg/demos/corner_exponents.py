"""Corner exponents at an island border versus the film angle.

For each border angle the operator pencil gives the smallest exponent alpha
with positive real part.  When the substrate is stiffer than the film the
exponent is guaranteed to exceed 1/2.  A softer substrate lowers it toward
1/2, where that guarantee no longer applies.

    python3 demos/corner_exponents.py
"""
import math

from filmlab import Materials, SectorSpec, assemble_pencil, singular_exponents

stiff = Materials(1.0, 1.0, 2.0, 2.0)
soft = Materials(2.0, 2.0, 1.0, 1.0)

print(f"{'angle':>6} {'alpha (stiff substrate)':>24} {'alpha (soft substrate)':>23}")
for deg in (15, 30, 45, 60, 90, 120):
    spec = SectorSpec.border(math.radians(deg))
    a = [singular_exponents(assemble_pencil(spec, m, 128)).alpha_pred for m in (stiff, soft)]
    print(f"{deg:6d} {a[0]:24.4f} {a[1]:23.4f}")

crack = singular_exponents(assemble_pencil(SectorSpec.wedge(2 * math.pi), Materials(1, 1, 1, 1), 128))
print(f"homogeneous crack check: alpha = {crack.min_positive_real:.6f} (exact 0.5)")
