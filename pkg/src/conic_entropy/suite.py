"""The inequality suite: every checkable inequality over the built-in families.

Each check yields :class:`CheckRow` records with the observed quantity, the
bound it is compared against, and a pass flag. Failing rows carry the index
of a witness function so the runner can serialise it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import families
from .discretization import RadialMesh
from .functionals import (
    chain_constant,
    concentrating_bumps,
    inner_product_equivalence_check,
    log_sobolev_check,
    lower_bound_chain_check,
)
from .geometry import ConeModel
from .spaces import (
    GridFunction,
    WeightSpec,
    compact_cutoff,
    dyadic_annulus_decompose,
    embedding_check,
    hardy_check,
    norm_equivalence_check,
    scaling_homogeneity_check,
    weighted_norm,
)

__all__ = ["CheckRow", "inequality_suite", "hardy_rows", "HARDY_SHARPNESS", "SCALING_TOL"]

HARDY_TOL = 1e-8
HARDY_SHARPNESS = 0.9
SCALING_TOL = 1e-8
ADDITIVITY_TOL = 1e-12


@dataclass(frozen=True)
class CheckRow:
    check: str
    params: dict
    observed: float
    bound: float
    relation: str
    passed: bool
    witness: int | None = None
    extra: dict = field(default_factory=dict)
    witness_function: GridFunction | None = field(default=None, repr=False, compare=False)


def _admissible_hardy(n: int):
    pairs = [(2.0, 1), (2.0, 2), (3.0, 1), (1.5, 1)]
    return [(p, k) for p, k in pairs if not math.isclose(p * k, n)]


def hardy_rows(model: ConeModel, mesh: RadialMesh, count: int = 50, seed: int = 0) -> list[CheckRow]:
    """Hardy validity for every admissible ``(p, k)`` plus the sharpness row for ``p = 2, k = 1``."""
    rows = []
    for p, k in _admissible_hardy(model.n):
        modes = min(3, model.cross_section.mode_count) if p == 2.0 else 1
        fam = families.hardy_family(mesh, count, seed, modes)
        ratios = [hardy_check(u, model, p, k, tol=HARDY_TOL).ratio for u in fam]
        worst = int(np.argmax(ratios))
        ok = max(ratios) <= 1.0 + HARDY_TOL
        rows.append(
            CheckRow("hardy", {"p": p, "k": k, "family": count}, float(max(ratios)), 1.0 + HARDY_TOL, "<=", ok,
                     None if ok else worst, witness_function=None if ok else fam[worst] * compact_cutoff(mesh))
        )
    if not math.isclose(2.0, model.n):
        ext = families.extremal_hardy_family(mesh, model.n, 2.0, 1)
        ratios = [hardy_check(u, model, 2.0, 1).ratio for u in ext]
        rows.append(
            CheckRow("hardy_sharpness", {"p": 2.0, "k": 1}, float(max(ratios)), HARDY_SHARPNESS, ">=",
                     max(ratios) >= HARDY_SHARPNESS, extra={"ratios": [float(x) for x in ratios]})
        )
    return rows


def _norm_rows(model, mesh, seed) -> list[CheckRow]:
    rows = []
    n = model.n
    fam = families.smooth_random_family(mesh, 20, seed, modes=1)
    cut = compact_cutoff(mesh)
    bumps = families.log_bumps(mesh, np.linspace(0.8, 0.1, 8), np.full(8, 0.05))
    for k in (1, 2):
        for p in (2.0, 3.0):
            if any(math.isclose(p * i, n) for i in range(1, k + 1)):
                continue
            res = [norm_equivalence_check(u * cut, model, k, p) for u in fam + bumps]
            ok = all(r.lower_ok for r in res)
            ratios = [r.ratio for r in res]
            rows.append(CheckRow("weight_ordering", {"k": k, "p": p}, float(min(r.weighted - r.unweighted for r in res)),
                                 0.0, ">=", ok, None if ok else int(np.argmin([r.lower_ok for r in res]))))
            bump_ratios = ratios[len(fam):]
            rows.append(CheckRow("norm_equivalence_ratio", {"k": k, "p": p}, float(max(bump_ratios)), math.inf, "<",
                                 bool(np.all(np.isfinite(ratios))), extra={"bump_ratios": [float(x) for x in bump_ratios]}))

    specs = [WeightSpec(0, 2.0, 0.0), WeightSpec(1, 2.0, 1.0 - n / 2.0), WeightSpec(1, 1.0, -0.5), WeightSpec(0, 3.0, 0.25)]
    rng = np.random.default_rng(seed + 1)
    pairs = families.smooth_random_family(mesh, 40, seed + 2, modes=1)
    for spec in specs:
        tri_worst, hom_worst = -math.inf, 0.0
        for i in range(20):
            u, v = pairs[2 * i] * cut, pairs[2 * i + 1] * cut
            nu, nv, nuv = (weighted_norm(x, spec, model) for x in (u, v, u + v))
            tri_worst = max(tri_worst, (nuv - nu - nv) / (nu + nv))
            c = float(rng.uniform(-3.0, 3.0))
            hom_worst = max(hom_worst, abs(weighted_norm(c * u, spec, model) - abs(c) * nu) / (abs(c) * nu))
        params = {"k": spec.k, "p": spec.p, "delta": spec.delta}
        rows.append(CheckRow("triangle", params, float(tri_worst), 1e-12, "<=", tri_worst <= 1e-12))
        rows.append(CheckRow("homogeneity", params, float(hom_worst), 1e-12, "<=", hom_worst <= 1e-12))

    src = WeightSpec(1, 2.0, 1.0 - n / 2.0)
    for tgt, weighted in ((WeightSpec(0, 2.0, 1.0 - n / 2.0), True),
                          (WeightSpec(0, 2.0 * n / (n - 2.0), 1.0 - n / 2.0), True),
                          (WeightSpec(0, 2.0 * n / (n - 2.0), 1.0 - n / 2.0), False)):
        ratios = [embedding_check(u, model, src, tgt, weighted).ratio for u in bumps]
        rows.append(CheckRow("embedding", {"to_p": tgt.p, "weighted": weighted}, float(max(ratios)), math.inf, "<",
                             bool(np.all(np.isfinite(ratios))), extra={"bump_ratios": [float(x) for x in ratios]}))
    return rows


def _scaling_rows(model, mesh, seed) -> list[CheckRow]:
    if not model.is_exact:
        return []
    rows = []
    fam = families.smooth_random_family(mesh, 2, seed + 3, modes=min(2, model.cross_section.mode_count))
    fam.append(GridFunction.radial(mesh, np.ones(mesh.size)))
    L = mesh.outer_radius
    r1, r2 = 1e-3 * L, 0.2 * L
    for a in (0.5, 0.1, 2.0):
        for delta in (0.0, 1.0, -0.5):
            for k in (0, 1):
                for p in (1.0, 2.0):
                    spec = WeightSpec(k, p, delta)
                    worst = max(scaling_homogeneity_check(u, spec, a, r1, r2, model).rel_err for u in fam)
                    rows.append(CheckRow("scaling", {"a": a, "delta": delta, "k": k, "p": p}, float(worst),
                                         SCALING_TOL, "<=", worst <= SCALING_TOL))
    return rows


def _additivity_rows(model, mesh, seed) -> list[CheckRow]:
    L = mesh.outer_radius
    J = max(1, min(8, int(math.floor(math.log2(L / mesh.r1))) - 1))
    annuli = dyadic_annulus_decompose(L, J)
    fam = [GridFunction.radial(mesh, np.ones(mesh.size))] + families.smooth_random_family(mesh, 2, seed + 4)
    rows = []
    for spec in (WeightSpec(0, 2.0, 0.0), WeightSpec(1, 2.0, 0.5)):
        worst = 0.0
        for u in fam:
            whole = weighted_norm(u, spec, model, annuli[-1][0], L) ** spec.p
            parts = sum(weighted_norm(u, spec, model, lo, hi) ** spec.p for lo, hi in annuli)
            worst = max(worst, abs(whole - parts) / whole)
        rows.append(CheckRow("dyadic_additivity", {"k": spec.k, "p": spec.p, "annuli": J}, float(worst),
                             ADDITIVITY_TOL, "<=", worst <= ADDITIVITY_TOL))
    return rows


def _functional_rows(model, mesh, seed, tau) -> list[CheckRow]:
    rows = []
    n = model.n
    widths = np.geomspace(0.3, 1e-3, 8) * mesh.outer_radius
    bumps = concentrating_bumps(mesh, widths, model)
    values = []
    for a in (0.1, 0.5, 1.0):
        res = log_sobolev_check(model, a, bumps)
        values.append(res.empirical_C)
        rows.append(CheckRow("log_sobolev_finite", {"a": a}, float(res.empirical_C), math.inf, "<",
                             math.isfinite(res.empirical_C), extra={"per_width": [float(x) for x in res.values]}))
    mono = all(b <= c for c, b in zip(values, values[1:]))
    rows.append(CheckRow("log_sobolev_monotone", {"a": [0.1, 0.5, 1.0]}, float(values[-1] - values[0]), 0.0, "<=", mono))

    target = (4.0 * math.pi * tau) ** (n / 2.0)
    tests = families.random_positive_family(model, mesh, 20, seed + 5, mass=target)
    unit = [u * (1.0 / math.sqrt(target)) for u in tests]
    worst, witness = math.inf, None
    for a in (0.1, 0.5, 1.0):
        C_a = chain_constant(model, a, unit + bumps)
        for i, u in enumerate(tests):
            res = lower_bound_chain_check(model, u, tau, a, C_a)
            worst = min(worst, res.w_value - res.bound)
            if not res.holds and witness is None:
                witness = i
    rows.append(CheckRow("lower_bound_chain", {"tau": tau, "count": 20}, float(worst), 0.0, ">=", witness is None,
                         witness, witness_function=None if witness is None else tests[witness]))

    eq = inner_product_equivalence_check(model, None, families.smooth_random_family(mesh, 10, seed + 6) + bumps[:4], mesh)
    rows.append(CheckRow("inner_product_equivalence", {"A": eq.A}, float(eq.C1_hat), 0.0, ">",
                         bool(0 < eq.C1_hat <= eq.C2_hat < math.inf),
                         extra={"C2_hat": float(eq.C2_hat), "smallest_form_eigenvalue": float(eq.smallest_form_eigenvalue)}))
    return rows


def inequality_suite(model: ConeModel, mesh: RadialMesh, seed: int = 0, tau: float = 1.0) -> list[CheckRow]:
    """Run every inequality check on ``model`` and return the rows in a fixed order."""
    rows = hardy_rows(model, mesh, 50, seed)
    rows += _norm_rows(model, mesh, seed)
    rows += _scaling_rows(model, mesh, seed)
    rows += _additivity_rows(model, mesh, seed)
    rows += _functional_rows(model, mesh, seed, tau)
    return rows
