"""Deterministic test families used by the inequality suite and the tests.

Everything here is built from a seeded ``numpy.random.Generator`` and the
mesh, so a family is reproducible from ``(mesh, count, seed)``.
"""
from __future__ import annotations

import math

import numpy as np

from .discretization import RadialMesh
from .functionals import l2_squared
from .geometry import ConeModel
from .spaces import GridFunction

__all__ = [
    "log_coordinate",
    "log_bumps",
    "hardy_family",
    "extremal_hardy_family",
    "smooth_random_family",
    "random_positive_family",
]


def log_coordinate(mesh: RadialMesh) -> np.ndarray:
    """``ln r`` rescaled to ``[0, 1]`` over the mesh."""
    t = np.log(mesh.nodes)
    return (t - t[0]) / (t[-1] - t[0])


def log_bumps(mesh: RadialMesh, centers, widths) -> list[GridFunction]:
    """Gaussians in ``ln r``: scale-invariant bumps that can sit at any depth."""
    t = log_coordinate(mesh)
    return [GridFunction.radial(mesh, np.exp(-0.5 * ((t - c) / w) ** 2)) for c, w in zip(centers, widths)]


def hardy_family(mesh: RadialMesh, count: int = 50, seed: int = 0, modes: int = 1) -> list[GridFunction]:
    """Mixed family: log bumps, cut-off powers, oscillating profiles and
    (for ``modes > 1``) functions with angular components.

    Members need not vanish at the ends; the Hardy check applies the cutoff.
    """
    rng = np.random.default_rng(seed)
    r = mesh.nodes
    t = log_coordinate(mesh)
    out = []
    for i in range(count):
        kind = i % 4
        vals = np.zeros((modes, mesh.size))
        if kind == 0:
            c, w = rng.uniform(0.15, 0.85), rng.uniform(0.02, 0.2)
            vals[0] = np.exp(-0.5 * ((t - c) / w) ** 2)
        elif kind == 1:
            s = rng.uniform(-2.0, 2.0)
            vals[0] = r**s / np.max(r**s)
        elif kind == 2:
            f = rng.uniform(1.0, 12.0)
            vals[0] = np.cos(2.0 * math.pi * f * t + rng.uniform(0, 2 * math.pi)) * (1.0 + t)
        else:
            vals[0] = rng.standard_normal() + np.polynomial.chebyshev.chebval(2 * t - 1, rng.standard_normal(6))
        for j in range(1, modes):
            vals[j] = rng.uniform(-0.5, 0.5) * np.sin(math.pi * (j + 1) * t + rng.uniform(0, 2 * math.pi))
        out.append(GridFunction(mesh, vals))
    return out


def extremal_hardy_family(mesh: RadialMesh, n: int, p: float, k: int, eps=(0.1, 0.03, 0.01, 0.003)) -> list[GridFunction]:
    """``r^((pk - n)/p + eps)``: approaches equality in the cone Hardy inequality as ``eps -> 0``."""
    r = mesh.nodes
    return [GridFunction.radial(mesh, r ** ((p * k - n) / p + e)) for e in eps]


def smooth_random_family(mesh: RadialMesh, count: int, seed: int = 0, modes: int = 1) -> list[GridFunction]:
    """Random Chebyshev series in ``ln r`` on every mode, unit-scale coefficients."""
    rng = np.random.default_rng(seed)
    t = 2.0 * log_coordinate(mesh) - 1.0
    out = []
    for _ in range(count):
        vals = np.array([np.polynomial.chebyshev.chebval(t, rng.standard_normal(8)) for _ in range(modes)])
        out.append(GridFunction(mesh, vals))
    return out


def random_positive_family(
    model: ConeModel, mesh: RadialMesh, count: int, seed: int = 0, mass: float = 1.0
) -> list[GridFunction]:
    """Positive radial profiles ``exp(chebyshev series in ln r)`` with ``int u^2 dvol = mass``."""
    rng = np.random.default_rng(seed)
    t = 2.0 * log_coordinate(mesh) - 1.0
    out = []
    for _ in range(count):
        v = np.exp(np.polynomial.chebyshev.chebval(t, rng.uniform(-1.0, 1.0, 6)))
        u = GridFunction.radial(mesh, v)
        out.append(u * math.sqrt(mass / l2_squared(model, u)))
    return out
