import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conic_entropy import (
    GridFunction,
    PerturbedWarp,
    WeightFunction,
    WeightSpec,
    build_mesh,
    c_k_delta_norm,
    dyadic_annulus_decompose,
    embedding_check,
    h1_norm,
    hardy_check,
    hardy_constant,
    norm_equivalence_check,
    scaling_homogeneity_check,
    sobolev_norm,
    weighted_norm,
)
from conic_entropy.families import extremal_hardy_family, hardy_family, smooth_random_family
from conic_entropy.spaces import compact_cutoff

from conftest import cone

MESH = build_mesh(1.0, 200, 0.95)
FLAT3 = cone(3)
coeffs = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=6)
specs = st.builds(WeightSpec, st.integers(0, 2), st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.floats(-2, 2))


def cheb(c, mesh=MESH):
    t = np.log(mesh.nodes)
    t = 2 * (t - t[0]) / (t[-1] - t[0]) - 1
    return GridFunction.radial(mesh, np.polynomial.chebyshev.chebval(t, c))


def test_constant_on_annulus_matches_log_integral(expected):
    one = GridFunction.radial(MESH, np.ones(MESH.size))
    got = weighted_norm(one, WeightSpec(0, 2.0, 0.0), FLAT3, 0.5, 1.0) ** 2
    assert got == pytest.approx(expected["annulus_k0_norm2_n3"], rel=1e-13)
    assert got == pytest.approx(4 * math.pi * math.log(2), rel=1e-13)


def test_h1_norm_of_linear_function_is_exact():
    u = GridFunction.radial(MESH, MESH.nodes)
    exact = 2 * 4 * math.pi / 3 * (1 - MESH.r1**3)
    assert h1_norm(u, FLAT3) ** 2 == pytest.approx(exact, rel=1e-13)


def test_h1_norm_of_power_converges_to_quadrature(expected):
    case = expected["h1_power_n3"]
    M = 4000
    mesh = build_mesh(1.0, M, case["r_lo"] ** (1 / (M - 1)))
    u = GridFunction.radial(mesh, mesh.nodes ** case["s"])
    assert h1_norm(u, FLAT3) == pytest.approx(case["value"], rel=1e-5)


def test_angular_modes_enter_the_gradient():
    vals = np.zeros((2, MESH.size))
    vals[1] = MESH.nodes
    u = GridFunction(MESH, vals)
    nu = FLAT3.cross_section.laplace_eigenvalues[1]
    # |grad u|^2 = 1 + nu r^2 / r^2 on the exact cone
    expect = 4 * math.pi * (1 + nu) * (1 - MESH.r1**3) / 3
    assert sobolev_norm(u, FLAT3, 1, 2.0) ** 2 == pytest.approx(expect + 4 * math.pi * (1 - MESH.r1**5) / 5, rel=1e-12)


def test_weight_function_blend():
    chi = WeightFunction(0.5)
    r = np.array([0.01, 0.1, 0.125, 0.3, 0.5, 0.9])
    val = chi(r)
    assert val[:3] == pytest.approx(1 / r[:3])
    assert val[4:] == pytest.approx(1.0)
    assert np.all(np.diff(val) <= 0)
    with pytest.raises(ValueError):
        WeightFunction(4.0)(np.array([2.0]))


@settings(max_examples=40, deadline=None)
@given(coeffs, coeffs, specs)
def test_triangle_inequality(c1, c2, spec):
    u, v = cheb(c1), cheb(c2)
    lhs = weighted_norm(u + v, spec, FLAT3)
    assert lhs <= weighted_norm(u, spec, FLAT3) + weighted_norm(v, spec, FLAT3) + 1e-12 * (1 + lhs)


@settings(max_examples=40, deadline=None)
@given(coeffs, specs, st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3))
def test_scalar_homogeneity(c, spec, s):
    u = cheb(c)
    base = weighted_norm(u, spec, FLAT3)
    assert weighted_norm(s * u, spec, FLAT3) == pytest.approx(abs(s) * base, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(coeffs, st.sampled_from([(1, 2.0), (1, 1.5), (2, 2.0), (1, 4.0)]))
def test_weight_ordering(c, kp):
    k, p = kp
    res = norm_equivalence_check(cheb(c), FLAT3, k, p)
    assert res.lower_ok and res.unweighted <= res.weighted


@settings(max_examples=25, deadline=None)
@given(coeffs, st.sampled_from([0.5, 0.1, 2.0, 3.7]), specs.filter(lambda s: s.k < 2))
def test_scaling_identity(c, a, spec):
    res = scaling_homogeneity_check(cheb(c), spec, a, 1e-3, 0.2, FLAT3)
    assert res.rel_err <= 1e-10


def test_excluded_indices_raise():
    u = cheb([1.0, 0.5, 0.2])
    with pytest.raises(ValueError, match="excluded"):
        norm_equivalence_check(u, FLAT3, 1, 3.0)
    with pytest.raises(ValueError):
        hardy_constant(3, 3.0, 1)
    with pytest.raises(ValueError):
        scaling_homogeneity_check(u, WeightSpec(0, 2, 0), 0.5, 1e-3, 0.2, cone(3, warp=PerturbedWarp(2, 0.1)))
    with pytest.raises(ValueError, match="outside the mesh"):
        weighted_norm(u, WeightSpec(0, 2, 0), FLAT3, 0.5, 2.0)
    with pytest.raises(ValueError):
        weighted_norm(u, WeightSpec(3, 2, 0), FLAT3)


def test_hardy_constants_and_validity():
    assert hardy_constant(3, 2.0, 1) == pytest.approx(4.0)
    assert hardy_constant(4, 2.0, 1) == pytest.approx(1.0)
    for u in hardy_family(MESH, 20, seed=3, modes=2):
        assert hardy_check(u, FLAT3, 2.0, 1).satisfied


def test_hardy_extremal_family_approaches_equality():
    mesh = build_mesh(1.0, 1024)
    ratios = [hardy_check(u, FLAT3, 2.0, 1).ratio for u in extremal_hardy_family(mesh, 3, 2.0, 1)]
    assert ratios == sorted(ratios)
    assert 0.9 <= ratios[-1] <= 1.0


def test_hardy_needs_compact_support():
    u = cheb([1.0, 0.3])
    with pytest.raises(ValueError, match="vanishing"):
        hardy_check(u, FLAT3, 2.0, 1, apply_cutoff=False)
    cut = compact_cutoff(MESH)
    assert cut[0] == 0 and cut[-1] == 0 and cut.max() == 1


def test_embedding_range():
    u = cheb([1.0, -0.4, 0.3])
    src = WeightSpec(1, 2.0, -0.5)
    assert embedding_check(u, FLAT3, src, WeightSpec(0, 6.0, -0.5)).ratio > 0
    with pytest.raises(ValueError, match="Sobolev range"):
        embedding_check(u, FLAT3, src, WeightSpec(0, 7.0, -0.5))
    with pytest.raises(ValueError):
        embedding_check(u, FLAT3, src, WeightSpec(0, 2.0, 0.0))


def test_dyadic_additivity_is_exact():
    annuli = dyadic_annulus_decompose(1.0, 6)
    assert annuli[0] == (0.5, 1.0) and annuli[-1][0] == pytest.approx(1 / 64)
    for model in (FLAT3, cone(3, epsilon0=0.3)):
        for u in smooth_random_family(MESH, 3, seed=1):
            spec = WeightSpec(1, 2.0, 0.5)
            whole = weighted_norm(u, spec, model, annuli[-1][0], 1.0) ** 2
            parts = sum(weighted_norm(u, spec, model, lo, hi) ** 2 for lo, hi in annuli)
            assert abs(whole - parts) <= 1e-12 * whole


def test_c_k_delta_norm_of_power():
    u = GridFunction.radial(MESH, MESH.nodes**2)
    # chi^delta u with chi = 1/r and delta = 2 is identically one
    assert c_k_delta_norm(u, 0, 2.0) == pytest.approx(1.0)
    assert c_k_delta_norm(u, 1, 2.0, FLAT3) == pytest.approx(3.0, rel=1e-3)


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction(MESH, np.ones(MESH.size - 1))
    with pytest.raises(ValueError):
        GridFunction.radial(MESH, np.full(MESH.size, np.nan))
    u = GridFunction.radial(MESH, np.ones(MESH.size))
    assert not u.values.flags.writeable
