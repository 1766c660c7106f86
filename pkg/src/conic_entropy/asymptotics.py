"""Growth and decay of profiles at the cone tip.

The leading ``r^-2`` balance of ``-4 Laplace + R_g`` on mode ``j`` of the
exact cone, applied to ``r^gamma``, is

    -4 (gamma^2 + (n-2) gamma) + R_h0 + 4 nu_j - (n-1)(n-2) = 0,

so the indicial roots are ``gamma = (-(n-2) +- sqrt(D)) / 2`` with
``D = (n-2)^2 + R_h0 + 4 nu_j - (n-1)(n-2)``. The logarithmic and
``n/tau`` terms of the W Euler-Lagrange equation are of lower order and do
not enter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ConeModel
from .spaces import GridFunction

__all__ = [
    "DecayFit",
    "IndicialRoots",
    "UniformDecay",
    "default_fit_window",
    "fit_decay_exponent",
    "indicial_roots",
    "weighted_uniform_check",
]

MIN_FIT_NODES = 10
STABILITY_SPREAD = 0.02


@dataclass(frozen=True)
class IndicialRoots:
    gamma_plus: float
    gamma_minus: float
    discriminant: float
    complex: bool = False
    imaginary: float = 0.0


def indicial_roots(model: ConeModel, j: int = 0, tau: float = 1.0) -> IndicialRoots:
    """Exponents of ``r^gamma`` solutions at the tip for mode ``j``.

    With a negative discriminant the pair is complex; ``gamma_plus`` and
    ``gamma_minus`` then both hold the common real part and ``complex`` is set.
    ``tau`` is accepted for symmetry with the solvers; it does not change the
    leading-order balance.
    """
    if not model.is_exact:
        raise ValueError("indicial roots are defined for the exact cone")
    if not tau > 0:
        raise ValueError("tau must be positive")
    nus = model.cross_section.laplace_eigenvalues
    if not 0 <= j < len(nus):
        raise ValueError(f"mode {j} outside the {len(nus)} available cross-section modes")
    n = model.n
    disc = (n - 2) ** 2 + model.curvature_gap + 4.0 * nus[j]
    if disc < 0:
        re = -(n - 2) / 2.0
        return IndicialRoots(re, re, disc, True, math.sqrt(-disc) / 2.0)
    root = math.sqrt(disc)
    return IndicialRoots((-(n - 2) + root) / 2.0, (-(n - 2) - root) / 2.0, disc)


@dataclass(frozen=True)
class DecayFit:
    window: tuple[float, float]
    fitted_exponent: float
    residual: float
    bound: float
    indicial_root: float | None
    node_count: int
    theorem_consistent: bool
    nested_exponents: tuple[float, ...] = ()
    window_stable: bool = True

    @property
    def indicial_gap(self) -> float | None:
        if self.indicial_root is None:
            return None
        return abs(self.fitted_exponent - self.indicial_root)

    @property
    def flags(self) -> tuple[str, ...]:
        return () if self.window_stable else ("non-asymptotic window",)


def default_fit_window(mesh, model: ConeModel | None = None) -> tuple[float, float]:
    """``[10 r_1, eps0 / 40]``, with ``eps0 = L`` when the whole model is conical."""
    eps0 = mesh.outer_radius
    if model is not None and model.epsilon0 is not None:
        eps0 = min(model.epsilon0, eps0)
    return 10.0 * mesh.r1, eps0 / 40.0


def _slope(r, v):
    x = np.log(r)
    y = np.log(v)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), rms


def _window_nodes(r, window):
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError(f"invalid fit window {window}")
    return np.flatnonzero((r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12)))


def fit_decay_exponent(
    u: GridFunction,
    window: tuple[float, float] | None = None,
    model: ConeModel | None = None,
    tau: float = 1.0,
) -> DecayFit:
    """Least-squares slope of ``ln u`` against ``ln r`` on the window nodes.

    The decay-bound check is ``beta > -(n/2 - 1)`` with a margin of three
    fit residuals. Refits on the innermost 2/3 and 1/3 of the window (in
    ``ln r``) must agree with it to 0.02, otherwise ``window_stable`` is False.
    """
    if not u.is_radial():
        raise ValueError("decay fits use the radial profile")
    r = u.r
    v = u.profile
    window = default_fit_window(u.mesh, model) if window is None else tuple(window)
    idx = _window_nodes(r, window)
    if idx.size < MIN_FIT_NODES:
        raise ValueError(f"fit window {window} holds {idx.size} nodes, need at least {MIN_FIT_NODES}")
    if np.any(v[idx] <= 0):
        raise ValueError("u vanishes or changes sign in the fit window")
    beta, rms = _slope(r[idx], v[idx])

    nested = [beta]
    lo, hi = window
    for frac in (2.0 / 3.0, 1.0 / 3.0):
        sub_hi = math.exp(math.log(lo) + frac * (math.log(hi) - math.log(lo)))
        sub = _window_nodes(r, (lo, sub_hi))
        if sub.size >= MIN_FIT_NODES:
            nested.append(_slope(r[sub], v[sub])[0])
    stable = (max(nested) - min(nested)) < STABILITY_SPREAD

    n = model.n if model is not None else None
    bound = -(n / 2.0 - 1.0) if n is not None else float("nan")
    consistent = bool(n is not None and beta > bound + 3.0 * rms)
    gamma = None
    if model is not None and model.is_exact:
        roots = indicial_roots(model, 0, tau)
        gamma = None if roots.complex else roots.gamma_plus
    return DecayFit(
        window=(float(lo), float(hi)),
        fitted_exponent=beta,
        residual=rms,
        bound=bound,
        indicial_root=gamma,
        node_count=int(idx.size),
        theorem_consistent=consistent,
        nested_exponents=tuple(nested),
        window_stable=bool(stable),
    )


@dataclass(frozen=True)
class UniformDecay:
    sup_value: float
    window_maxima: tuple[float, ...]
    windows: tuple[tuple[float, float], ...]
    vanishing: bool


def weighted_uniform_check(
    u: GridFunction,
    l: int,
    delta: float,
    model: ConeModel | None = None,
    r_start: float | None = None,
    rtol: float = 1e-6,
) -> UniformDecay:
    """Maxima of ``r^(l - delta) |grad^l u|`` on decade windows shrinking to the tip.

    Windows are ``[R/10, R], [R/100, R/10], ...`` down to ``10 r_1`` with
    ``R = r_start`` (default ``eps0 / 40``). ``vanishing`` means each inner
    maximum is below the next outer one by more than ``rtol``.
    """
    if l not in (0, 1):
        raise ValueError("weighted uniform decay is checked for l = 0 or 1")
    if not u.is_radial():
        raise ValueError("weighted uniform decay uses the radial profile")
    r = u.r
    v = u.profile
    if l == 0:
        mod = np.abs(v)
    else:
        mod = np.abs(np.gradient(v, r, edge_order=2))
    f = r ** (l - delta) * mod
    lo_limit, hi = default_fit_window(u.mesh, model)
    R = hi if r_start is None else r_start
    windows, maxima = [], []
    top = R
    while top / 10.0 >= lo_limit * (1 - 1e-12):
        idx = _window_nodes(r, (top / 10.0, top))
        if idx.size:
            windows.append((top / 10.0, top))
            maxima.append(float(np.max(f[idx])))
        top /= 10.0
    if len(maxima) < 2:
        raise ValueError("need at least two decade windows between 10 r_1 and the start radius")
    vanishing = all(inner < outer * (1.0 - rtol) for outer, inner in zip(maxima, maxima[1:]))
    return UniformDecay(max(maxima), tuple(maxima), tuple(windows), bool(vanishing))
