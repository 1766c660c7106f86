"""The cone Hardy inequality and how close one can get to its constant.

On an n-dimensional cone, for u vanishing near both ends,

    int |u|^2 / r^2  <=  (2 / (n - 2))^2  int |grad u|^2 .

Random test functions sit well below the bound. Powers r^((2 - n)/2 + eps)
with a cutoff at both ends come close to equality as eps shrinks, as long
as the mesh resolves enough decades for the cutoff not to matter.
"""
import numpy as np

from conic_entropy import ConeModel, build_mesh, hardy_check, hardy_constant, make_round_sphere_cross_section
from conic_entropy.families import extremal_hardy_family, hardy_family

model = ConeModel(3, make_round_sphere_cross_section(3, 1.0))
print(f"n = 3, sharp constant (2/(n-2))^2 = {hardy_constant(3, 2.0, 1):.1f}\n")

mesh = build_mesh(1.0, 1024)
ratios = np.array([hardy_check(u, model, 2.0, 1).ratio for u in hardy_family(mesh, 200, seed=1, modes=3)])
print(f"200 mixed test functions: ratio lhs / (C rhs) ranges over [{ratios.min():.3f}, {ratios.max():.3f}]")

print("\nextremal powers r^(-1/2 + eps):")
for M in (256, 1024, 4096):
    mesh = build_mesh(1.0, M)
    vals = [hardy_check(u, model, 2.0, 1).ratio for u in extremal_hardy_family(mesh, 3, 2.0, 1)]
    print(f"  M = {M:5d} (r_1 = {mesh.r1:.0e}): " + "  ".join(f"{v:.4f}" for v in vals))
