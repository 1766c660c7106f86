"""Where lambda stops existing.

Shrink or grow the round cross section S^3(a) of a 4-dimensional cone. The
cross section's scalar curvature is 6 / a^2, and the cone's scalar curvature
is (6/a^2 - 6) / r^2. Once 6/a^2 drops below n - 2 = 2 the negative r^-2
potential beats the Hardy inequality and the discrete lambda runs off to
minus infinity as the mesh reaches into the tip. Above the threshold it
settles down.
"""
import numpy as np

from conic_entropy import ConeModel, build_mesh, lambda_functional, make_round_sphere_cross_section

Ms = (128, 256, 512, 1024)
print(f"{'a':>5} {'R_h0':>7} " + " ".join(f"{'M=' + str(M):>12}" for M in Ms) + "   behaviour")
for a in (0.8, 1.0, 1.5, 1.7, 1.8, 2.0, 2.5):
    cs = make_round_sphere_cross_section(4, a)
    model = ConeModel(4, cs, outer_bc="dirichlet")
    vals = np.array([lambda_functional(model, build_mesh(1.0, M)).value for M in Ms])
    inc = np.abs(np.diff(vals))
    settles = np.all(inc[1:] < inc[:-1])
    verdict = "settles" if settles else ("runs away" if vals[-1] < -100 else "unclear")
    print(f"{a:5.2f} {cs.scalar_curvature:7.3f} " + " ".join(f"{v:12.4g}" for v in vals) + f"   {verdict}")

print("\nthreshold: R_h0 = 2 at a = sqrt(3) =", f"{3 ** 0.5:.4f}")
