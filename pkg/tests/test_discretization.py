import math

import numpy as np
import pytest
import scipy.linalg as sla

from conic_entropy import (
    EigenSolverError,
    PerturbedWarp,
    assemble_forms,
    assemble_mode_operator,
    build_mesh,
    default_grading,
    lowest_eigenvalue_bound,
    lumped_weights,
    smallest_eigenpair,
)
from conic_entropy.discretization import sturm_count

from conftest import cone


def test_mesh_shape():
    mesh = build_mesh(2.0, 50, 0.9)
    assert mesh.size == 50 and mesh.outer_radius == 2.0
    assert np.allclose(mesh.nodes[:-1] / mesh.nodes[1:], 0.9)
    assert not mesh.nodes.flags.writeable


def test_default_grading_reaches_the_advertised_depth():
    for M in (256, 1024):
        mesh = build_mesh(1.0, M)
        assert math.log10(mesh.r1) == pytest.approx(-0.5 * math.sqrt(M), rel=1e-9)
    # doubling M refines the log-spacing even though the tip moves inward
    assert math.log(default_grading(1024)) > math.log(default_grading(256)) / 1.5


@pytest.mark.parametrize("args", [(0.0, 10, 0.5), (1.0, 1, 0.5), (1.0, 10, 1.0), (1.0, 10, 0.0)])
def test_mesh_validation(args):
    with pytest.raises(ValueError):
        build_mesh(*args)


def test_lumped_weights_integrate_the_volume(flat3, mesh256, expected):
    w = lumped_weights(flat3, mesh256)
    assert w.sum() == pytest.approx(expected["volume_unit_ball_n3"], rel=1e-13)
    assert np.all(w > 0)


def test_forms_are_exact_on_linear_functions(flat3, mesh256, expected):
    forms = assemble_forms(flat3, mesh256)
    r = mesh256.nodes
    # int |grad r|^2 dvol over the whole ball, tip cell included
    assert r @ (forms["grad"] @ r) == pytest.approx(expected["volume_unit_ball_n3"] - 4 * math.pi * mesh256.r1**3 / 3, rel=1e-12)
    one = np.ones_like(r)
    assert one @ (forms["grad"] @ one) == pytest.approx(0, abs=1e-12)


def test_perturbed_tip_integrals_reduce_to_exact():
    exact = cone(3, 0.7)
    pert = cone(3, 0.7, warp=PerturbedWarp(2.0, 0.0))
    mesh = build_mesh(1.0, 64, 0.8)
    fe, fp = assemble_forms(exact, mesh), assemble_forms(pert, mesh)
    for key in ("mass", "angular", "curv"):
        assert np.allclose(fe[key].toarray(), fp[key].toarray(), rtol=1e-10, atol=1e-14)


def test_sturm_count_matches_dense_eigenvalues(sub4):
    mesh = build_mesh(1.0, 60, 0.85)
    op = assemble_mode_operator(sub4, mesh, 1)
    A, B = op.restricted()
    s = 1 / np.sqrt(B.diagonal())
    ev = sla.eigh((A.toarray() * s).T * s, (B.toarray() * s).T * s, eigvals_only=True)
    a, b, d, e = A.diagonal(), A.diagonal(1), B.diagonal(), B.diagonal(1)
    for sigma in (ev[0] - 1, 0.5 * (ev[2] + ev[3]), ev[-1] + 1):
        assert sturm_count(a, b, d, e, sigma) == int(np.sum(ev < sigma))


@pytest.mark.parametrize("bc", ["neumann", "dirichlet"])
@pytest.mark.parametrize("j", [0, 2])
def test_smallest_eigenpair_matches_dense_solver(sub4, bc, j):
    model = cone(4, 0.8, outer_bc=bc)
    mesh = build_mesh(1.0, 80, 0.8)
    op = assemble_mode_operator(model, mesh, j)
    res = smallest_eigenpair(op)
    A, B = op.restricted()
    # the mass matrix spans ~30 decades; equilibrate before the dense solve
    s = 1 / np.sqrt(B.diagonal())
    As, Bs = (A.toarray() * s).T * s, (B.toarray() * s).T * s
    ref = sla.eigh(As, Bs, eigvals_only=True)[0]
    assert res.value == pytest.approx(ref, rel=1e-9)
    assert res.residual <= 1e-10
    assert res.vector @ (op.mass @ res.vector) == pytest.approx(1.0)
    if bc == "dirichlet":
        assert res.vector[-1] == 0.0
    assert lowest_eigenvalue_bound(op) <= res.value


def test_eigen_solver_reports_failure_with_trace(sub4):
    op = assemble_mode_operator(sub4, build_mesh(1.0, 80, 0.8))
    with pytest.raises(EigenSolverError) as info:
        smallest_eigenpair(op, tol=0.0, max_iter=3)
    assert len(info.value.trace) > 3


def test_schrodinger_scaling_is_a_quarter(sub4):
    mesh = build_mesh(1.0, 80, 0.8)
    perelman = smallest_eigenpair(assemble_mode_operator(sub4, mesh)).value
    schrod = smallest_eigenpair(assemble_mode_operator(sub4, mesh, scaling="schrodinger_L")).value
    assert schrod == pytest.approx(perelman / 4, rel=1e-9)
    with pytest.raises(ValueError):
        assemble_mode_operator(sub4, mesh, scaling="other")
    with pytest.raises(ValueError):
        assemble_mode_operator(sub4, mesh, 99)
