import math

import numpy as np
import pytest

from conic_entropy import (
    GridFunction,
    PerturbedWarp,
    SolverParams,
    assemble_mode_operator,
    build_mesh,
    chain_constant,
    concentrating_bumps,
    f_functional,
    inner_product_equivalence_check,
    lambda_functional,
    log_sobolev_check,
    lower_bound_chain_check,
    mu_functional,
    normalized_constant,
    w_functional,
    w_gradient,
)
from conic_entropy.families import random_positive_family, smooth_random_family
from conic_entropy.functionals import IndefiniteFormError, l2_squared

from conftest import cone


def random_positive_points(model, mesh, count, seed, tau):
    return random_positive_family(model, mesh, count, seed, mass=(4 * math.pi * tau) ** (model.n / 2))


@pytest.mark.parametrize("n, a", [(3, 1.0), (4, 0.8), (4, 2.0)])
def test_gradient_matches_central_differences(n, a):
    model = cone(n, a)
    mesh = build_mesh(1.0, 128, 0.85)
    rng = np.random.default_rng(7)
    for u in random_positive_points(model, mesh, 5, 11, 1.0):
        g = w_gradient(model, u, 1.0)
        d = rng.standard_normal(mesh.size) * u.profile
        h = 1e-5
        fp = w_functional(model, GridFunction.radial(mesh, u.profile + h * d), 1.0)
        fm = w_functional(model, GridFunction.radial(mesh, u.profile - h * d), 1.0)
        fd = (fp - fm) / (2 * h)
        assert abs(fd - g @ d) <= 1e-6 * abs(g @ d)


def test_w_rejects_bad_input(flat3, mesh256):
    u = normalized_constant(flat3, mesh256, 1.0)
    with pytest.raises(ValueError):
        w_functional(flat3, u, 0.0)
    with pytest.raises(ValueError):
        w_functional(flat3, -1.0 * u, 1.0)


@pytest.mark.parametrize("n, tau", [(3, 0.25), (3, 1.0), (4, 0.25), (4, 1.0)])
def test_constant_is_a_critical_point_of_the_flat_model(expected, n, tau):
    model = cone(n)
    mesh = build_mesh(1.0, 256)
    rep = mu_functional(model, mesh, tau)
    assert rep.status == "converged" and rep.iterations == 0
    assert rep.value == pytest.approx(expected[f"flat_mu_n{n}_tau{tau}"], abs=1e-8)
    assert np.ptp(rep.minimizer.profile) == 0.0


def test_mu_subcritical_solve(sub4):
    mesh = build_mesh(1.0, 512)
    rep = mu_functional(sub4, mesh, 1.0)
    assert rep.converged
    assert rep.el_residual <= 1e-8 * max(1.0, abs(rep.value))
    assert rep.constraint_error <= 1e-10
    assert np.all(rep.minimizer.profile > 0)
    assert all(b <= a for a, b in zip(rep.trace, rep.trace[1:]))
    assert "upper bound" in rep.note
    tests = random_positive_points(sub4, mesh, 4, 2, 1.0) + [normalized_constant(sub4, mesh, 1.0)]
    for u in tests:
        assert rep.value <= w_functional(sub4, u, 1.0) + 1e-12


def test_mu_supercritical_diverges():
    model = cone(4, 2.0)
    rep = mu_functional(model, build_mesh(1.0, 256), 1.0)
    assert rep.status == "diverging" and rep.value < -1e6
    assert "unbounded-below" in rep.note


def test_mu_reports_iteration_cap(sub4):
    rep = mu_functional(sub4, build_mesh(1.0, 256), 1.0, SolverParams(max_iters=1, newton=False))
    assert rep.status in ("max_iter", "converged") and rep.iterations <= 1


def test_mu_perturbed_model_converges():
    model = cone(3, 1.0, warp=PerturbedWarp(1.5, 0.3))
    rep = mu_functional(model, build_mesh(1.0, 256), 1.0)
    assert rep.converged and rep.constraint_error <= 1e-10


def test_lambda_flat_neumann_is_zero(flat3, mesh256):
    rep = lambda_functional(flat3, mesh256)
    assert abs(rep.value) < 1e-8
    assert rep.mode_values[0] == min(rep.mode_values)


def test_lambda_matches_rayleigh_quotient(sub4):
    mesh = build_mesh(1.0, 256)
    rep = lambda_functional(sub4, mesh)
    mass = assemble_mode_operator(sub4, mesh).mass
    u = rep.minimizer
    assert f_functional(sub4, u) / (u.profile @ mass @ u.profile) == pytest.approx(rep.value, rel=1e-10)
    for v in smooth_random_family(mesh, 3, seed=4):
        assert f_functional(sub4, v) / (v.profile @ mass @ v.profile) >= rep.value


def test_log_sobolev_constants_are_monotone(sub4):
    mesh = build_mesh(1.0, 512)
    bumps = concentrating_bumps(mesh, np.geomspace(0.3, 1e-3, 8), sub4)
    Cs = [log_sobolev_check(sub4, a, bumps).empirical_C for a in (0.1, 0.5, 1.0)]
    assert all(math.isfinite(c) for c in Cs)
    assert Cs[0] >= Cs[1] >= Cs[2]
    with pytest.raises(ValueError):
        log_sobolev_check(sub4, 0.0, bumps)
    with pytest.raises(ValueError):
        log_sobolev_check(sub4, 1.0, [2.0 * bumps[0]])


def test_lower_bound_chain(sub4):
    mesh = build_mesh(1.0, 512)
    tau = 1.0
    target = (4 * math.pi * tau) ** 2
    tests = random_positive_points(sub4, mesh, 10, 5, tau)
    family = [u * (1 / math.sqrt(target)) for u in tests]
    for a in (0.1, 1.0):
        C = chain_constant(sub4, a, family)
        for u in tests:
            assert lower_bound_chain_check(sub4, u, tau, a, C).holds


def test_inner_product_equivalence(sub4):
    mesh = build_mesh(1.0, 256)
    fam = smooth_random_family(mesh, 6, seed=9, modes=2)
    eq = inner_product_equivalence_check(sub4, None, fam, mesh)
    assert 0 < eq.C1_hat <= eq.C2_hat < math.inf
    with pytest.raises(IndefiniteFormError):
        inner_product_equivalence_check(sub4, -1e6, fam, mesh)


def test_lambda_survives_an_ill_conditioned_angular_mode():
    # a = 2, n = 4: mode 1 has both tip powers square integrable and its
    # eigenvector is swamped by a tip component, but its eigenvalue is not
    model = cone(4, 2.0, outer_bc="dirichlet")
    rep = lambda_functional(model, build_mesh(1.0, 1024))
    assert rep.value < -1e20
    assert rep.mode_values[1] == pytest.approx(50.3326936, rel=1e-7)
    assert list(rep.mode_values[1:]) == sorted(rep.mode_values[1:])
