"""Cross sections, warped cone metrics and their curvature.

A cone model is the warped product ``dr^2 + phi(r)^2 h0`` on ``(0, L] x N``
where ``(N, h0)`` is described by spectral data only: dimension, scalar
curvature, volume and the distinct eigenvalues of ``-Laplace_{h0}``.
The perturbed warp ``h_r = (1 + c r**alpha) h0`` gives
``phi(r) = r * sqrt(1 + c r**alpha)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

__all__ = [
    "CrossSection",
    "ExactWarp",
    "PerturbedWarp",
    "ConeModel",
    "ACReport",
    "make_round_sphere_cross_section",
    "unit_sphere_volume",
    "scalar_curvature_at",
    "check_ac_condition",
]


def unit_sphere_volume(dim: int) -> float:
    """Volume of the unit sphere S^dim in R^(dim+1)."""
    return 2.0 * math.pi ** ((dim + 1) / 2.0) / math.gamma((dim + 1) / 2.0)


@dataclass(frozen=True)
class CrossSection:
    dim_minus_one: int
    scalar_curvature: float
    volume: float
    laplace_eigenvalues: tuple[float, ...]

    def __post_init__(self):
        if self.dim_minus_one < 2:
            raise ValueError("cross section must have dimension n-1 >= 2")
        if not self.volume > 0:
            raise ValueError("cross section volume must be positive")
        ev = tuple(float(v) for v in self.laplace_eigenvalues)
        object.__setattr__(self, "laplace_eigenvalues", ev)
        if len(ev) == 0 or ev[0] != 0.0:
            raise ValueError("eigenvalue list must start with nu_0 = 0")
        if any(b <= a for a, b in zip(ev, ev[1:])):
            raise ValueError("eigenvalues must be strictly ascending (nu_0 = 0 exactly once)")

    @property
    def mode_count(self) -> int:
        return len(self.laplace_eigenvalues)


def make_round_sphere_cross_section(n: int, a: float, l_max: int = 7) -> CrossSection:
    """Round sphere S^(n-1) of radius ``a``.

    Eigenvalues are the distinct values ``l (l + n - 2) / a**2`` for
    ``l = 0..l_max``; multiplicities are irrelevant once modes decouple.
    """
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if not a > 0:
        raise ValueError(f"sphere radius must be positive, got {a}")
    if l_max < 0:
        raise ValueError("l_max must be nonnegative")
    m = n - 1
    return CrossSection(
        dim_minus_one=m,
        scalar_curvature=m * (m - 1) / a**2,
        volume=a**m * unit_sphere_volume(m),
        laplace_eigenvalues=tuple(l * (l + n - 2) / a**2 for l in range(l_max + 1)),
    )


@dataclass(frozen=True)
class ExactWarp:
    kind: Literal["exact"] = "exact"

    def phi(self, r):
        return np.asarray(r, dtype=float)

    def dphi(self, r):
        return np.ones_like(np.asarray(r, dtype=float))

    def d2phi(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class PerturbedWarp:
    """``h_r = (1 + c r**alpha) h0``."""

    alpha: float
    c: float
    kind: Literal["perturbed"] = "perturbed"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("perturbation exponent alpha must be positive")

    def _s(self, r):
        r = np.asarray(r, dtype=float)
        return 1.0 + self.c * r**self.alpha

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return r * np.sqrt(self._s(r))

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        s = self._s(r)
        return np.sqrt(s) + 0.5 * self.c * self.alpha * r**self.alpha / np.sqrt(s)

    def d2phi(self, r):
        r = np.asarray(r, dtype=float)
        a, c = self.alpha, self.c
        s = self._s(r)
        ra1 = r ** (a - 1.0)
        return (
            0.5 * c * a * (1.0 + a) * ra1 / np.sqrt(s)
            - 0.25 * c**2 * a**2 * r ** (2.0 * a - 1.0) / s**1.5
        )


Warp = Union[ExactWarp, PerturbedWarp]


@dataclass(frozen=True)
class ConeModel:
    """Finite cone ``(0, L] x N`` closed off by a boundary condition at ``r = L``.

    ``epsilon0`` is the radius of the conical neighbourhood used by the weight
    function; ``None`` means the weight is ``1/r`` on the whole model.
    """

    n: int
    cross_section: CrossSection
    outer_radius: float = 1.0
    warp: Warp = field(default_factory=ExactWarp)
    outer_bc: Literal["neumann", "dirichlet"] = "neumann"
    epsilon0: float | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"n must be >= 3, got {self.n}")
        if self.n != self.cross_section.dim_minus_one + 1:
            raise ValueError("n must equal cross_section.dim_minus_one + 1")
        if not self.outer_radius > 0:
            raise ValueError("outer radius must be positive")
        if self.outer_bc not in ("neumann", "dirichlet"):
            raise ValueError(f"unknown outer boundary condition {self.outer_bc!r}")
        if self.epsilon0 is not None and not self.epsilon0 > 0:
            raise ValueError("epsilon0 must be positive")
        if isinstance(self.warp, PerturbedWarp):
            rr = self.outer_radius * np.geomspace(1e-12, 1.0, 200)
            if np.any(self.warp._s(rr) <= 0):
                raise ValueError("perturbed warp degenerates: 1 + c r^alpha must stay positive on (0, L]")

    @property
    def is_exact(self) -> bool:
        return isinstance(self.warp, ExactWarp)

    @property
    def curvature_gap(self) -> float:
        """``R_h0 - (n-1)(n-2)``, the coefficient of ``r**-2`` in ``R_g`` for the exact cone."""
        return self.cross_section.scalar_curvature - (self.n - 1) * (self.n - 2)

    @property
    def volume(self) -> float:
        """Volume of the exact model ``Vol(N) L**n / n``; perturbed warps are integrated numerically."""
        if self.is_exact:
            return self.cross_section.volume * self.outer_radius**self.n / self.n
        from scipy.integrate import quad

        val, _ = quad(lambda r: float(self.warp.phi(r)) ** (self.n - 1), 0.0, self.outer_radius, limit=200)
        return self.cross_section.volume * val

    def scalar_curvature(self, r):
        """Scalar curvature of ``dr^2 + phi^2 h0`` without domain checks."""
        r = np.asarray(r, dtype=float)
        m = self.n - 1
        if self.is_exact:
            return self.curvature_gap / r**2
        phi = self.warp.phi(r)
        dphi = self.warp.dphi(r)
        d2phi = self.warp.d2phi(r)
        return (
            self.cross_section.scalar_curvature / phi**2
            - 2.0 * m * d2phi / phi
            - m * (m - 1) * (dphi / phi) ** 2
        )


def scalar_curvature_at(model: ConeModel, r):
    """Scalar curvature of the cone metric at radius ``r`` (scalar or array) in ``(0, L]``."""
    ra = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(ra)) or np.any(ra <= 0) or np.any(ra > model.outer_radius * (1 + 1e-14)):
        raise ValueError(f"radius outside (0, {model.outer_radius}]")
    out = model.scalar_curvature(ra)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ACReport:
    holds: bool
    constants: tuple[float, ...]


def _falling(alpha: float, i: int) -> float:
    out = 1.0
    for k in range(i):
        out *= alpha - k
    return out


def check_ac_condition(model: ConeModel, k: int, samples: int = 400) -> ACReport:
    """Evaluate ``sup_r r^(i-1) |d^i/dr^i (h_r - h0)|`` for ``i = 1..k``.

    The norm of ``h0`` in its own metric is ``sqrt(n - 1)``. A constant is
    reported as ``inf`` when the bound blows up as ``r -> 0``, which for
    ``c r**alpha`` happens exactly when ``alpha < 1`` and the derivative
    coefficient is nonzero.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if model.is_exact or model.warp.c == 0.0:
        return ACReport(True, tuple(0.0 for _ in range(k)))
    alpha, c = model.warp.alpha, model.warp.c
    norm_h0 = math.sqrt(model.n - 1)
    r = model.outer_radius * np.geomspace(1e-12, 1.0, samples)
    constants = []
    for i in range(1, k + 1):
        coef = abs(c * _falling(alpha, i)) * norm_h0
        if coef == 0.0:
            constants.append(0.0)
        elif alpha < 1.0:
            constants.append(math.inf)
        else:
            constants.append(float(np.max(coef * r ** (alpha - 1.0))))
    return ACReport(all(math.isfinite(C) for C in constants), tuple(constants))
