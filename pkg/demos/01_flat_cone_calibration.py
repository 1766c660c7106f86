"""Calibrate the radial solver on the one cone where everything is known.

The cone over the unit round S^2 is just the unit ball in R^3. With a
Dirichlet wall at r = 1 the smallest eigenvalue of -4 Laplace is 4 pi^2,
and with a Neumann wall it is 0 (constants). The geometric mesh pushes the
first node towards the origin as M grows, so this also shows that the
truncation at r_1 costs nothing when the tip is smooth.
"""
import math

from conic_entropy import ConeModel, build_mesh, lambda_functional, make_round_sphere_cross_section

exact = 4 * math.pi**2
ball = make_round_sphere_cross_section(3, 1.0)

print(f"target 4 pi^2 = {exact:.10f}\n")
print(f"{'M':>6} {'r_1':>10} {'lambda':>16} {'rel. error':>11} {'ratio':>6}")
prev = None
for M in (64, 128, 256, 512, 1024, 2048):
    mesh = build_mesh(1.0, M)
    lam = lambda_functional(ConeModel(3, ball, outer_bc="dirichlet"), mesh).value
    err = abs(lam - exact) / exact
    ratio = "" if prev is None else f"{prev / err:6.2f}"
    print(f"{M:6d} {mesh.r1:10.1e} {lam:16.10f} {err:11.2e} {ratio}")
    prev = err

# the error halves with every doubling: first order in the number of
# nodes, because the default grading also spreads them over more decades
lam = lambda_functional(ConeModel(3, ball, outer_bc="neumann"), build_mesh(1.0, 1024)).value
print(f"\nNeumann wall, M = 1024: lambda = {lam:.2e}")
