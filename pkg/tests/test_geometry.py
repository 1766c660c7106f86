import math

import numpy as np
import pytest

from conic_entropy import (
    ConeModel,
    CrossSection,
    ExactWarp,
    PerturbedWarp,
    check_ac_condition,
    make_round_sphere_cross_section,
    scalar_curvature_at,
    unit_sphere_volume,
)

from conftest import cone


def test_unit_sphere_volumes():
    assert unit_sphere_volume(2) == pytest.approx(4 * math.pi)
    assert unit_sphere_volume(3) == pytest.approx(2 * math.pi**2)


def test_round_sphere_spectrum():
    cs = make_round_sphere_cross_section(4, 0.8, l_max=3)
    assert cs.scalar_curvature == pytest.approx(6 / 0.64)
    assert cs.volume == pytest.approx(0.8**3 * 2 * math.pi**2)
    assert cs.laplace_eigenvalues == pytest.approx([0, 3 / 0.64, 8 / 0.64, 15 / 0.64])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dim_minus_one=1, scalar_curvature=0, volume=1, laplace_eigenvalues=(0,)),
        dict(dim_minus_one=2, scalar_curvature=2, volume=0, laplace_eigenvalues=(0,)),
        dict(dim_minus_one=2, scalar_curvature=2, volume=1, laplace_eigenvalues=(1, 2)),
        dict(dim_minus_one=2, scalar_curvature=2, volume=1, laplace_eigenvalues=(0, 0, 2)),
    ],
)
def test_cross_section_validation(kwargs):
    with pytest.raises(ValueError):
        CrossSection(**kwargs)


def test_model_validation():
    cs = make_round_sphere_cross_section(3, 1.0)
    with pytest.raises(ValueError, match="n must be >= 3"):
        make_round_sphere_cross_section(2, 1.0)
    with pytest.raises(ValueError):
        ConeModel(4, cs)
    with pytest.raises(ValueError):
        ConeModel(3, cs, outer_bc="robin")
    with pytest.raises(ValueError, match="degenerates"):
        ConeModel(3, cs, warp=PerturbedWarp(1.0, -2.0))


def test_curvature_matches_christoffel_oracle(expected):
    for case in expected["curvature"]:
        warp = ExactWarp() if case["perturbation"] is None else PerturbedWarp(*case["perturbation"])
        model = cone(case["n"], case["a"], warp=warp)
        got = scalar_curvature_at(model, case["r"])
        assert got == pytest.approx(case["R"], rel=1e-11, abs=1e-11), case


def test_exact_cone_curvature_is_pure_inverse_square():
    model = cone(4, 2.0)
    r = np.geomspace(1e-6, 1, 7)
    assert np.allclose(scalar_curvature_at(model, r) * r**2, model.curvature_gap)
    assert model.curvature_gap == pytest.approx(1.5 - 6)


def test_flat_cone_has_zero_curvature():
    assert np.all(scalar_curvature_at(cone(3), np.linspace(0.1, 1, 5)) == 0)


def test_scalar_curvature_domain():
    model = cone(3)
    for r in (0.0, -1.0, 1.5, np.nan):
        with pytest.raises(ValueError):
            scalar_curvature_at(model, r)


def test_perturbed_warp_derivatives_match_finite_differences():
    w = PerturbedWarp(1.5, 0.3)
    r = np.linspace(0.1, 0.9, 9)
    h = 1e-5
    assert np.allclose(w.dphi(r), (w.phi(r + h) - w.phi(r - h)) / (2 * h), rtol=1e-8)
    assert np.allclose(w.d2phi(r), (w.dphi(r + h) - w.dphi(r - h)) / (2 * h), rtol=1e-7)


def test_volume(expected):
    assert cone(3).volume == pytest.approx(expected["volume_unit_ball_n3"], rel=1e-14)
    pert = cone(3, warp=PerturbedWarp(2.0, 0.0))
    assert pert.volume == pytest.approx(cone(3).volume, rel=1e-12)


def test_ac_condition():
    assert check_ac_condition(cone(3), 3).holds
    rep = check_ac_condition(cone(3, warp=PerturbedWarp(0.5, 0.2)), 1)
    assert not rep.holds and math.isinf(rep.constants[0])
    rep = check_ac_condition(cone(3, warp=PerturbedWarp(2.0, 0.2)), 3)
    # alpha = 2: third derivative of c r^2 vanishes identically
    assert rep.holds and rep.constants[2] == 0.0
    assert rep.constants[0] == pytest.approx(0.4 * math.sqrt(2))
