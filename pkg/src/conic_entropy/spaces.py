"""Weighted Sobolev and weighted uniform norms on cone models.

Functions are stored mode by mode: ``values[j]`` is the radial profile
against the ``j``-th cross-section eigenfunction ``Y_j``, normalised so that
``int_N Y_j^2 = Vol(N)``. Pointwise moduli are the ``L^2(N)`` averages

    |u|^2 = sum_j u_j^2,   |grad u|^2 = sum_j (u_j')^2 + nu_j u_j^2 / phi^2,

which are exact for ``p = 2`` and for purely radial functions. Second
derivatives are only supported for radial functions, where
``|Hess u|^2 = u''^2 + (n-1) (phi'/phi)^2 u'^2``.

Norms integrate over the mesh ``[r_1, L]`` (or a sub-annulus); the tip cell
is not part of the weighted norms because most weights are not integrable
at ``r = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretization import RadialMesh, gauss_points
from .geometry import ConeModel

__all__ = [
    "GridFunction",
    "WeightSpec",
    "WeightFunction",
    "HardyResult",
    "EquivalenceResult",
    "EmbeddingResult",
    "ScalingResult",
    "weighted_norm",
    "sobolev_norm",
    "h1_norm",
    "hardy_constant",
    "hardy_check",
    "compact_cutoff",
    "norm_equivalence_check",
    "embedding_check",
    "scaling_homogeneity_check",
    "c_k_delta_norm",
    "dyadic_annulus_decompose",
]


@dataclass(frozen=True, eq=False)
class GridFunction:
    mesh: RadialMesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, ndmin=2)
        if vals.ndim != 2 or vals.shape[1] != self.mesh.size:
            raise ValueError(f"values must have shape (modes, {self.mesh.size}), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function has non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def radial(cls, mesh: RadialMesh, values) -> "GridFunction":
        return cls(mesh, np.asarray(values, dtype=float)[None, :])

    @classmethod
    def from_callable(cls, mesh: RadialMesh, f: Callable, mode: int = 0) -> "GridFunction":
        vals = np.zeros((mode + 1, mesh.size))
        vals[mode] = f(mesh.nodes)
        return cls(mesh, vals)

    @property
    def mode_count(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def profile(self) -> np.ndarray:
        """Radial (mode 0) profile."""
        return self.values[0]

    def is_radial(self) -> bool:
        return self.mode_count == 1 or not np.any(self.values[1:])

    def __mul__(self, other) -> "GridFunction":
        if isinstance(other, GridFunction):
            if other.mode_count != 1:
                raise ValueError("can only multiply by a radial grid function")
            return GridFunction(self.mesh, self.values * other.values[0])
        return GridFunction(self.mesh, self.values * other)

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction") -> "GridFunction":
        J = max(self.mode_count, other.mode_count)
        out = np.zeros((J, self.mesh.size))
        out[: self.mode_count] += self.values
        out[: other.mode_count] += other.values
        return GridFunction(self.mesh, out)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self + (-1.0) * other


@dataclass(frozen=True)
class WeightSpec:
    k: int
    p: float
    delta: float

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


@dataclass(frozen=True)
class WeightFunction:
    """``chi = 1/r`` for ``r < epsilon0/4``, ``chi = 1`` for ``r >= epsilon0``.

    On ``[epsilon0/4, epsilon0]`` the weight blends ``1/r`` into ``1`` with a
    quintic (C^2, monotone) step. ``epsilon0=None`` gives ``1/r`` everywhere.
    """

    epsilon0: float | None = None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.epsilon0 is None:
            chi = 1.0 / r
        else:
            e = self.epsilon0
            S = _smoothstep((r - 0.25 * e) / (0.75 * e))
            chi = (1.0 - S) / r + S
        if np.any(chi < 1.0 - 1e-14):
            raise ValueError("weight function dropped below 1; the conical region must lie in r <= 1")
        return chi


def _model_weight(model: ConeModel) -> WeightFunction:
    return WeightFunction(model.epsilon0)


# ---------------------------------------------------------------------------
# integration machinery


def _nodal_derivatives(nodes: np.ndarray, values: np.ndarray):
    d1 = np.gradient(values, nodes, axis=-1, edge_order=2)
    d2 = np.gradient(d1, nodes, axis=-1, edge_order=2)
    return d1, d2


class _Sampler:
    """P1 samples of a grid function at Gauss points of ``[r_lo, r_hi]``."""

    def __init__(self, nodes, values, model: ConeModel, r_lo=None, r_hi=None, need_second=False):
        nodes = np.asarray(nodes, dtype=float)
        r_lo = nodes[0] if r_lo is None else r_lo
        r_hi = nodes[-1] if r_hi is None else r_hi
        tol = 1e-12 * nodes[-1]
        if r_lo < nodes[0] - tol or r_hi > nodes[-1] + tol or not r_lo < r_hi:
            raise ValueError(f"annulus ({r_lo}, {r_hi}) outside the mesh ({nodes[0]}, {nodes[-1]})")
        # pieces between nodes, annulus ends and the weight's kinks
        cuts = [r_lo, r_hi]
        if model.epsilon0 is not None:
            cuts += [0.25 * model.epsilon0, model.epsilon0]
        edges = np.unique(np.concatenate([nodes, cuts]))
        edges = edges[(edges >= r_lo) & (edges <= r_hi)]
        a, b = edges[:-1], edges[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        cells = np.clip(np.searchsorted(nodes, 0.5 * (a + b)) - 1, 0, nodes.size - 2)
        x, w, _ = gauss_points(a, b)
        left = nodes[cells][:, None]
        h = (nodes[cells + 1] - nodes[cells])[:, None]
        t = (x - left) / h
        v0 = values[:, cells][:, :, None]
        v1 = values[:, cells + 1][:, :, None]
        self.x = x
        self.U = v0 + (v1 - v0) * t
        self.dU = np.broadcast_to((v1 - v0) / h[None], self.U.shape)
        phi = model.warp.phi(x)
        self.phi = phi
        self.dvol = w * phi ** (model.n - 1) * model.cross_section.volume
        nus = np.asarray(model.cross_section.laplace_eigenvalues[: values.shape[0]])
        if nus.size < values.shape[0]:
            raise ValueError("grid function has more modes than the cross section provides")
        self.nu = nus[:, None, None]
        self.n = model.n
        self.model = model
        if need_second:
            d1, d2 = _nodal_derivatives(nodes, values)
            p0, p1 = d1[:, cells][:, :, None], d1[:, cells + 1][:, :, None]
            q0, q1 = d2[:, cells][:, :, None], d2[:, cells + 1][:, :, None]
            self.D1 = p0 + (p1 - p0) * t
            self.D2 = q0 + (q1 - q0) * t

    def modulus(self, i: int):
        """``|grad^i u|`` at the Gauss points."""
        if i == 0:
            return np.sqrt(np.sum(self.U**2, axis=0))
        if i == 1:
            return np.sqrt(np.sum(self.dU**2 + self.nu * self.U**2 / self.phi**2, axis=0))
        if i == 2:
            if self.U.shape[0] > 1 and np.any(self.U[1:]):
                raise ValueError("second derivatives are only supported for radial functions")
            dphi = self.model.warp.dphi(self.x)
            return np.sqrt(self.D2[0] ** 2 + (self.n - 1) * (dphi / self.phi) ** 2 * self.D1[0] ** 2)
        raise ValueError("derivative order k > 2 is not supported")

    def integrate(self, f) -> float:
        return float(np.sum(f * self.dvol))


def _sobolev_sum(sampler: _Sampler, k: int, p: float, weight_exp: Callable[[int], float], chi) -> float:
    if k > 2:
        raise ValueError("derivative order k > 2 is not supported")
    total = 0.0
    for i in range(k + 1):
        e = weight_exp(i)
        wt = 1.0 if e == 0 else chi(sampler.x) ** e
        total += sampler.integrate(wt * sampler.modulus(i) ** p)
    return total


def weighted_norm(
    u: GridFunction,
    spec: WeightSpec,
    model: ConeModel,
    r_lo: float | None = None,
    r_hi: float | None = None,
    weight: WeightFunction | None = None,
) -> float:
    """``(sum_i int chi^(p(delta-i)+n) |grad^i u|^p dvol)^(1/p)`` over ``[r_lo, r_hi]``."""
    chi = weight if weight is not None else _model_weight(model)
    s = _Sampler(u.r, u.values, model, r_lo, r_hi, need_second=spec.k >= 2)
    total = _sobolev_sum(s, spec.k, spec.p, lambda i: spec.p * (spec.delta - i) + model.n, chi)
    return total ** (1.0 / spec.p)


def sobolev_norm(u: GridFunction, model: ConeModel, k: int, p: float, r_lo=None, r_hi=None) -> float:
    """Unweighted ``W^{k,p}`` norm."""
    s = _Sampler(u.r, u.values, model, r_lo, r_hi, need_second=k >= 2)
    return _sobolev_sum(s, k, p, lambda i: 0, None) ** (1.0 / p)


def h1_norm(u: GridFunction, model: ConeModel) -> float:
    """``H^1 = W^{1,2}_{1-n/2}``: ``(int |grad u|^2 + chi^2 u^2)^(1/2)``."""
    return weighted_norm(u, WeightSpec(1, 2.0, 1.0 - model.n / 2.0), model)


# ---------------------------------------------------------------------------
# Hardy inequality


@dataclass(frozen=True)
class HardyResult:
    lhs: float
    rhs: float
    constant: float
    ratio: float
    satisfied: bool


def hardy_constant(n: int, p: float, k: int) -> float:
    """Sharp cone Hardy constant ``(p / |n - p k|)^p``."""
    if n == p * k:
        raise ValueError("Hardy constant degenerates when p k = n")
    return (p / abs(n - p * k)) ** p


def compact_cutoff(mesh: RadialMesh, margin: float = 0.05, ramp: float = 0.20) -> np.ndarray:
    """Smooth nodal cutoff vanishing on the innermost/outermost ``margin`` of the nodes."""
    s = np.linspace(0.0, 1.0, mesh.size)
    up = _smoothstep((s - margin) / ramp)
    down = _smoothstep((1.0 - margin - s) / ramp)
    return up * down


def hardy_check(
    u: GridFunction,
    model: ConeModel,
    p: float,
    k: int,
    tol: float = 1e-8,
    apply_cutoff: bool = True,
) -> HardyResult:
    """Compare ``int |u|^p / r^(pk)`` with ``C int |grad u|^p / r^(p(k-1))``.

    With ``apply_cutoff`` the function is first multiplied by
    :func:`compact_cutoff`; otherwise it must already vanish at both ends.
    """
    if not p > 1:
        raise ValueError("Hardy inequality needs p > 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    C = hardy_constant(model.n, p, k)
    vals = u.values * compact_cutoff(u.mesh) if apply_cutoff else u.values
    if np.any(vals[:, 0] != 0) or np.any(vals[:, -1] != 0):
        raise ValueError("Hardy check needs a function vanishing at both mesh ends")
    s = _Sampler(u.r, vals, model)
    lhs = s.integrate(s.modulus(0) ** p * s.x ** (-p * k))
    rhs = s.integrate(s.modulus(1) ** p * s.x ** (-p * (k - 1)))
    ratio = lhs / (C * rhs) if rhs > 0 else 0.0
    return HardyResult(lhs, rhs, C, ratio, bool(lhs <= C * rhs * (1.0 + tol)))


# ---------------------------------------------------------------------------
# equivalence and embeddings


@dataclass(frozen=True)
class EquivalenceResult:
    unweighted: float
    weighted: float
    lower_ok: bool
    ratio: float


def norm_equivalence_check(u: GridFunction, model: ConeModel, k: int, p: float) -> EquivalenceResult:
    """``||u||_{W^{k,p}} <= ||u||_{W^{k,p}_{k-n/p}}`` plus the empirical upper ratio."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if k > 2:
        raise ValueError("k > 2 is not supported")
    for i in range(1, k + 1):
        if math.isclose(p * i, model.n):
            raise ValueError(f"excluded index: p*{i} = n")
    plain = sobolev_norm(u, model, k, p)
    weighted = weighted_norm(u, WeightSpec(k, p, k - model.n / p), model)
    ratio = weighted / plain if plain > 0 else 0.0
    return EquivalenceResult(plain, weighted, bool(plain <= weighted), ratio)


@dataclass(frozen=True)
class EmbeddingResult:
    lhs: float
    rhs: float
    ratio: float


def _sobolev_exponent(p: float, k: int, l: int, n: int) -> float:
    inv = 1.0 / p - (k - l) / n
    if not inv > 0:
        raise ValueError("exponent out of Sobolev range: 1/p - (k-l)/n must be positive")
    return 1.0 / inv


def embedding_check(u: GridFunction, model: ConeModel, source: WeightSpec, target: WeightSpec, weighted: bool = True):
    """Ratio ``||u||_target / ||u||_source`` for ``W^{k,p}_delta -> W^{l,q}_delta``.

    ``weighted=False`` checks the unweighted embedding ``W^{k,p} -> W^{l,q}``
    (the deltas are then ignored). ``0/0`` is reported as ratio 0.
    """
    if not source.k > target.k:
        raise ValueError("embedding needs source.k > target.k")
    q_l = _sobolev_exponent(source.p, source.k, target.k, model.n)
    if target.p > q_l * (1 + 1e-12):
        raise ValueError(f"exponent out of Sobolev range: q = {target.p} > q_l = {q_l}")
    if weighted:
        if source.delta != target.delta:
            raise ValueError("weighted embedding keeps the weight index fixed")
        lhs = weighted_norm(u, target, model)
        rhs = weighted_norm(u, source, model)
    else:
        lhs = sobolev_norm(u, model, target.k, target.p)
        rhs = sobolev_norm(u, model, source.k, source.p)
    return EmbeddingResult(lhs, rhs, lhs / rhs if rhs > 0 else 0.0)


# ---------------------------------------------------------------------------
# scaling and uniform norms


@dataclass(frozen=True)
class ScalingResult:
    lhs: float
    rhs: float
    rel_err: float


def scaling_homogeneity_check(
    u: GridFunction, spec: WeightSpec, a: float, r1: float, r2: float, model: ConeModel
) -> ScalingResult:
    """Compare ``||u||`` on ``C_{a r1, a r2}`` with ``a^-delta ||u_a||`` on ``C_{r1, r2}``.

    ``u_a(r) = u(a r)`` is the piecewise-linear function on the dilated nodes
    ``r_i / a``. Uses the cone weight ``1/r``; requires the exact cone.
    """
    if not model.is_exact:
        raise ValueError("scaling homogeneity holds on the exact cone only")
    if not a > 0:
        raise ValueError("dilation factor must be positive")
    chi = WeightFunction(None)
    exp = lambda i: spec.p * (spec.delta - i) + model.n  # noqa: E731
    need2 = spec.k >= 2
    s_big = _Sampler(u.r, u.values, model, a * r1, a * r2, need_second=need2)
    s_small = _Sampler(u.r / a, u.values, model, r1, r2, need_second=need2)
    lhs = _sobolev_sum(s_big, spec.k, spec.p, exp, chi) ** (1.0 / spec.p)
    rhs = a ** (-spec.delta) * _sobolev_sum(s_small, spec.k, spec.p, exp, chi) ** (1.0 / spec.p)
    scale = max(abs(lhs), abs(rhs))
    return ScalingResult(lhs, rhs, abs(lhs - rhs) / scale if scale > 0 else 0.0)


def c_k_delta_norm(
    u: GridFunction, k: int, delta: float, model: ConeModel | None = None, weight: WeightFunction | None = None
) -> float:
    """``sup_nodes sum_i chi^(delta - i) |grad^i u|`` with ``chi = 1/r`` by default.

    Derivatives are nodal second-order differences; with a model the
    angular terms ``nu_j u_j^2/phi^2`` enter ``|grad u|`` and ``weight``
    defaults to the model's weight function.
    """
    if k > 2:
        raise ValueError("k > 2 is not supported")
    r = u.r
    vals = u.values
    if weight is None:
        weight = _model_weight(model) if model is not None else WeightFunction(None)
    chi = weight(r)
    d1, d2 = _nodal_derivatives(r, vals)
    mods = [np.sqrt(np.sum(vals**2, axis=0))]
    if k >= 1:
        ang = 0.0
        if model is not None and u.mode_count > 1:
            nus = np.asarray(model.cross_section.laplace_eigenvalues[: u.mode_count])[:, None]
            ang = nus * vals**2 / model.warp.phi(r) ** 2
        mods.append(np.sqrt(np.sum(d1**2 + ang, axis=0)))
    if k >= 2:
        if not u.is_radial():
            raise ValueError("second derivatives are only supported for radial functions")
        n = model.n if model is not None else None
        if n is None:
            raise ValueError("k = 2 needs the model dimension")
        ratio = model.warp.dphi(r) / model.warp.phi(r)
        mods.append(np.sqrt(d2[0] ** 2 + (n - 1) * ratio**2 * d1[0] ** 2))
    total = sum(chi ** (delta - i) * m for i, m in enumerate(mods))
    return float(np.max(total))


def dyadic_annulus_decompose(r_max: float, j_count: int) -> list[tuple[float, float]]:
    """Annuli ``((1/2)^(j+1) r_max, (1/2)^j r_max)`` for ``j = 0..j_count-1``."""
    if j_count < 1:
        raise ValueError("j_count must be >= 1")
    return [(r_max * 0.5 ** (j + 1), r_max * 0.5**j) for j in range(j_count)]
