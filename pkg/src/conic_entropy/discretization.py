"""Graded radial meshes, P1 assembly of the mode-resolved forms, and a
smallest-eigenpair solver for the resulting tridiagonal pencils.

Functions on the cone are continuous piecewise-linear in ``r`` on the mesh
``r_1 < ... < r_M = L`` and constant on the tip cell ``[0, r_1]``. All cell
integrals use Gauss-Legendre rules; for the exact cone every integrand is a
polynomial in ``r`` of degree ``<= n + 1`` so the rule is exact up to n = 14.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.linalg import solve_banded

from .geometry import ConeModel

__all__ = [
    "RadialMesh",
    "ModeOperator",
    "EigenResult",
    "EigenSolverError",
    "build_mesh",
    "default_grading",
    "gauss_points",
    "assemble_forms",
    "assemble_mode_operator",
    "lumped_weights",
    "smallest_eigenpair",
    "sturm_count",
    "lowest_eigenvalue_bound",
]

GAUSS_ORDER = 8
_XI, _WI = np.polynomial.legendre.leggauss(GAUSS_ORDER)


@dataclass(frozen=True, eq=False)
class RadialMesh:
    nodes: np.ndarray
    q: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def r1(self) -> float:
        return float(self.nodes[0])

    @property
    def outer_radius(self) -> float:
        return float(self.nodes[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)


def build_mesh(L: float, M: int, q: float | None = None) -> RadialMesh:
    """Geometric mesh with ``M`` nodes, ``r_i / r_(i+1) = q`` and ``r_M = L``.

    ``q=None`` selects :func:`default_grading`.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if M < 2:
        raise ValueError("mesh needs at least two nodes")
    if q is None:
        q = default_grading(M)
    if not 0.0 < q < 1.0:
        raise ValueError("grading ratio q must lie in (0, 1)")
    nodes = L * q ** np.arange(M - 1, -1, -1, dtype=float)
    nodes[-1] = L
    return RadialMesh(nodes, float(q))


def default_grading(M: int, decades_per_sqrt_node: float = 0.5) -> float:
    """Grading used by refinement sweeps.

    The tip is pushed to ``L * 10**(-0.5 sqrt(M))`` so that doubling ``M``
    both refines the bulk (cells shrink like ``1/sqrt(M)`` in ``log r``) and
    moves the truncation closer to the singular point.
    """
    decades = decades_per_sqrt_node * math.sqrt(M)
    return math.exp(-math.log(10.0) * decades / (M - 1))


def gauss_points(a: np.ndarray, b: np.ndarray):
    """Gauss-Legendre abscissae and weights on the cells ``[a_c, b_c]``.

    Returns ``(x, w, t)`` with shapes ``(ncell, GAUSS_ORDER)``; ``t`` is the
    local coordinate in ``[0, 1]``.
    """
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    half = 0.5 * (b - a)
    t = 0.5 * (_XI + 1.0)[None, :]
    x = a + (b - a) * t
    w = half * _WI[None, :]
    return x, w, np.broadcast_to(t, x.shape)


def _tip_integrals(model: ConeModel, r1: float) -> dict[str, float]:
    """Integrals over the tip cell ``[0, r_1]`` for a constant function."""
    n = model.n
    if model.is_exact:
        base = r1 ** (n - 2) / (n - 2)
        return {"mass": r1**n / n, "angular": base, "curv": model.curvature_gap * base}
    phi = model.warp.phi
    # r = r1 s^4 smooths the r^alpha endpoint behaviour; the absolute floor
    # reflects the cancellation between the r^-2 terms of the curvature
    floor = 1e-14 * (abs(model.cross_section.scalar_curvature) + n * n) * r1 ** (n - 2)

    def integ(f, epsabs=0.0):
        return quad(lambda s: f(r1 * s**4) * 4.0 * r1 * s**3, 0.0, 1.0, limit=200, epsabs=epsabs, epsrel=1e-12)[0]

    return {
        "mass": integ(lambda r: float(phi(r)) ** (n - 1)),
        "angular": integ(lambda r: float(phi(r)) ** (n - 3)),
        "curv": integ(lambda r: float(model.scalar_curvature(r)) * float(phi(r)) ** (n - 1), floor),
    }


def _tridiag(diag: np.ndarray, off: np.ndarray) -> sp.csr_matrix:
    return sp.diags([off, diag, off], [-1, 0, 1], format="csr")


def assemble_forms(model: ConeModel, mesh: RadialMesh) -> dict[str, sp.csr_matrix]:
    """Mode-independent P1 matrices, each including the factor ``Vol(N)``.

    ``grad``: int u'v' dvol, ``angular``: int uv/phi^2 dvol,
    ``curv``: int R_g uv dvol, ``mass``: int uv dvol.
    """
    if abs(mesh.outer_radius - model.outer_radius) > 1e-12 * model.outer_radius:
        raise ValueError("mesh outer radius does not match the model")
    r = mesh.nodes
    x, w, t = gauss_points(r[:-1], r[1:])
    h = np.diff(r)[:, None]
    phi = model.warp.phi(x)
    vol_w = w * phi ** (model.n - 1)
    b0, b1 = 1.0 - t, t
    R = model.scalar_curvature(x)
    inv_phi2 = 1.0 / phi**2

    def p1_matrix(coef):
        d = np.zeros(mesh.size)
        off = np.sum(coef * b0 * b1, axis=1)
        d[:-1] += np.sum(coef * b0 * b0, axis=1)
        d[1:] += np.sum(coef * b1 * b1, axis=1)
        return d, off

    g_cell = np.sum(vol_w, axis=1) / h[:, 0] ** 2
    gd = np.zeros(mesh.size)
    gd[:-1] += g_cell
    gd[1:] += g_cell
    forms = {"grad": (gd, -g_cell)}
    forms["mass"] = p1_matrix(vol_w)
    forms["angular"] = p1_matrix(vol_w * inv_phi2)
    forms["curv"] = p1_matrix(vol_w * R)

    tip = _tip_integrals(model, mesh.r1)
    vol_n = model.cross_section.volume
    out = {}
    for key, (d, off) in forms.items():
        d = d.copy()
        if key in tip:
            d[0] += tip[key]
        out[key] = _tridiag(vol_n * d, vol_n * off)
    return out


def lumped_weights(model: ConeModel, mesh: RadialMesh, forms=None) -> np.ndarray:
    """Row sums of the mass matrix: ``int psi_i dvol`` for each hat function.

    These integrate any piecewise-linear integrand exactly, including the
    constant tip cell.
    """
    if forms is None:
        forms = assemble_forms(model, mesh)
    return np.asarray(forms["mass"].sum(axis=1)).ravel()


SCALINGS = {"perelman": (4.0, 1.0), "schrodinger_L": (1.0, 0.25)}


@dataclass(frozen=True, eq=False)
class ModeOperator:
    mode: int
    nu: float
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    bc: Literal["neumann", "dirichlet"]
    scaling: str = "perelman"
    free: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.free is None:
            size = self.stiffness.shape[0]
            free = np.arange(size if self.bc == "neumann" else size - 1)
            object.__setattr__(self, "free", free)

    def restricted(self):
        """Stiffness and mass restricted to the free degrees of freedom."""
        idx = self.free
        return self.stiffness[idx][:, idx], self.mass[idx][:, idx]

    def expand(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.stiffness.shape[0])
        out[self.free] = v
        return out

    def form(self, u: np.ndarray) -> float:
        return float(u @ (self.stiffness @ u))


def assemble_mode_operator(
    model: ConeModel,
    mesh: RadialMesh,
    j: int = 0,
    scaling: str = "perelman",
    forms=None,
) -> ModeOperator:
    """Matrices of ``int (c_g (|u'|^2 + nu_j u^2/phi^2) + c_R R_g u^2) dvol`` and ``int u^2 dvol``.

    ``scaling='perelman'`` uses ``(c_g, c_R) = (4, 1)``; ``'schrodinger_L'``
    uses ``(1, 1/4)`` for ``L = -Laplace + R/4``.
    """
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    nus = model.cross_section.laplace_eigenvalues
    if not 0 <= j < len(nus):
        raise ValueError(f"mode {j} outside the {len(nus)} available cross-section modes")
    if forms is None:
        forms = assemble_forms(model, mesh)
    cg, cr = SCALINGS[scaling]
    nu = nus[j]
    K = cg * forms["grad"] + (cg * nu) * forms["angular"] + cr * forms["curv"]
    K = 0.5 * (K + K.T)
    M = forms["mass"]
    M = 0.5 * (M + M.T)
    return ModeOperator(j, nu, K.tocsr(), M.tocsr(), model.outer_bc, scaling)


# ---------------------------------------------------------------------------
# eigen solver


class EigenSolverError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    trace: tuple = ()


def _bands(A: sp.csr_matrix):
    return A.diagonal(0).copy(), A.diagonal(1).copy()


def sturm_count(a, b, d, e, sigma: float) -> int:
    """Number of eigenvalues of the tridiagonal pencil ``(A, B)`` below ``sigma``.

    ``a, b`` and ``d, e`` are the diagonals/off-diagonals of ``A`` and ``B``;
    counts negative pivots of ``LDL^T`` of ``A - sigma B`` (Sylvester).
    """
    diag = a - sigma * d
    off2 = (b - sigma * e) ** 2
    count = 0
    t = diag[0]
    tiny = np.finfo(float).tiny
    for i in range(diag.size):
        if i > 0:
            t = diag[i] - off2[i - 1] / t
        if t == 0.0:
            t = -tiny
        if t < 0.0:
            count += 1
    return count


def _bisect_lowest(a, b, d, e, start, scale, rel, trace):
    hi = start + max(abs(start), scale) * 1e-8
    while sturm_count(a, b, d, e, hi) == 0:
        hi += 2.0 * (hi - start) + scale
    width = max(abs(start), scale)
    lo = start - width
    while sturm_count(a, b, d, e, lo) > 0:
        width *= 4.0
        lo = start - width
        if not math.isfinite(lo):
            raise EigenSolverError("could not bracket the smallest eigenvalue", trace)
    while hi - lo > rel * max(abs(lo), abs(hi), 1e-6 * scale):
        mid = 0.5 * (lo + hi)
        if sturm_count(a, b, d, e, mid) == 0:
            lo = mid
        else:
            hi = mid
        trace.append(("bisect", lo, hi))
    return lo, hi


def lowest_eigenvalue_bound(op: ModeOperator, rel: float = 1e-3) -> float:
    """Lower bound for the smallest eigenvalue from Sturm counts alone."""
    A, B = op.restricted()
    a, b = _bands(A)
    d, e = _bands(B)
    x = np.ones(a.size)
    rq = float(x @ (A @ x)) / float(x @ (B @ x))
    scale = float(abs(A).sum() / B.sum())
    return _bisect_lowest(a, b, d, e, rq, scale, rel, [])[0]


def smallest_eigenpair(op: ModeOperator, tol: float = 1e-10, max_iter: int = 200) -> EigenResult:
    """Smallest generalized eigenpair of ``(stiffness, mass)`` on the free dofs.

    A Sturm-count bisection isolates the eigenvalue from below, then inverse
    iteration with that shift (started from the all-ones vector) converges
    to the eigenvector. The returned vector is mass-normalized with a
    positive first nonzero entry and zeros on Dirichlet nodes.
    """
    A, B = op.restricted()
    a, b = _bands(A)
    d, e = _bands(B)
    size = a.size
    trace = []

    x = np.ones(size)
    rq = float(x @ (A @ x)) / float(x @ (B @ x))
    # absolute eigenvalue scale of the pencil; guards relative tests near zero
    scale = float(abs(A).sum() / B.sum())
    lo, hi = _bisect_lowest(a, b, d, e, rq, scale, 1e-6, trace)

    # shift strictly below the smallest eigenvalue keeps A - sigma B definite
    sigma = lo - 1e-6 * max(abs(lo), 1e-6 * scale)
    shifted = A - sigma * B
    ab = np.zeros((3, size))
    ab[0, 1:] = shifted.diagonal(1)
    ab[1, :] = shifted.diagonal(0)
    ab[2, :-1] = shifted.diagonal(-1)

    x = x / math.sqrt(float(x @ (B @ x)))
    absA, absB = abs(A), abs(B)
    lam = rq
    res = math.inf
    for it in range(1, max_iter + 1):
        y = solve_banded((1, 1), ab, B @ x)
        x = y / math.sqrt(float(y @ (B @ y)))
        Ax = A @ x
        lam = float(x @ Ax)
        # backward error relative to the magnitudes entering A x and lam B x
        denom = absA @ np.abs(x) + abs(lam) * (absB @ np.abs(x))
        res = float(np.linalg.norm(Ax - lam * (B @ x)) / np.linalg.norm(denom))
        trace.append(("inverse", lam, res))
        if res <= tol:
            break
    else:
        raise EigenSolverError(
            f"inverse iteration did not reach residual {tol:g} in {max_iter} steps (last {res:.3e})",
            trace,
        )
    nz = np.flatnonzero(np.abs(x) > 0)
    if nz.size and x[nz[0]] < 0:
        x = -x
    v = op.expand(x)
    lam = float(v @ (op.stiffness @ v)) / float(v @ (op.mass @ v))
    return EigenResult(lam, v, it, res, tuple(trace))
