"""F, lambda, W and mu on cone models, plus the inequality checks that bound W.

Discrete conventions
--------------------
* ``F(u) = sum_j u_j^T K_j u_j`` with ``K_j`` the Perelman-scaled mode
  stiffness, so ``F`` is exact for piecewise-linear profiles.
* The zero-order terms of ``W`` (``u^2 ln u``, ``u^2``) and the
  normalisation ``int u^2 dvol`` use the lumped weights ``w_i = int psi_i``.
  With this choice constants are exact critical points on flat models and
  the log-Sobolev chain is an algebraic identity of the discretisation.
* ``W`` is defined for radial profiles only; ``mu`` is minimised over the
  radial subspace, which always yields an upper bound for ``mu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from .discretization import (
    ModeOperator,
    RadialMesh,
    assemble_forms,
    assemble_mode_operator,
    lowest_eigenvalue_bound,
    lumped_weights,
    smallest_eigenpair,
)
from .geometry import ConeModel
from .spaces import GridFunction, h1_norm

__all__ = [
    "SolveReport",
    "SolverParams",
    "ELResidual",
    "LogSobolevResult",
    "ChainResult",
    "EquivalenceConstants",
    "IndefiniteFormError",
    "f_functional",
    "lambda_functional",
    "w_functional",
    "w_gradient",
    "mu_functional",
    "el_residual",
    "normalized_constant",
    "l2_squared",
    "log_sobolev_check",
    "chain_constant",
    "lower_bound_chain_check",
    "default_form_shift",
    "inner_product_equivalence_check",
    "concentrating_bumps",
]


@lru_cache(maxsize=32)
def _forms(model: ConeModel, mesh: RadialMesh):
    return assemble_forms(model, mesh)


@lru_cache(maxsize=64)
def _operator(model: ConeModel, mesh: RadialMesh, j: int, scaling: str = "perelman") -> ModeOperator:
    return assemble_mode_operator(model, mesh, j, scaling, forms=_forms(model, mesh))


@lru_cache(maxsize=32)
def _weights(model: ConeModel, mesh: RadialMesh) -> np.ndarray:
    w = lumped_weights(model, mesh, _forms(model, mesh))
    w.setflags(write=False)
    return w


def _target(model: ConeModel, tau: float) -> float:
    return (4.0 * math.pi * tau) ** (model.n / 2.0)


def _radial_profile(u) -> tuple[RadialMesh, np.ndarray]:
    if isinstance(u, GridFunction):
        if not u.is_radial():
            raise ValueError("W is defined for radial grid functions only")
        return u.mesh, np.array(u.values[0])
    raise TypeError("expected a GridFunction")


def _xlogx2(u):
    """``u^2 ln u`` extended by 0 at ``u = 0``."""
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = u[pos] ** 2 * np.log(u[pos])
    return out


def l2_squared(model: ConeModel, u: GridFunction) -> float:
    """``int u^2 dvol`` with the lumped rule used by ``W`` and ``mu``."""
    w = _weights(model, u.mesh)
    return float(np.sum(w * np.sum(u.values**2, axis=0)))


def normalized_constant(model: ConeModel, mesh: RadialMesh, tau: float | None = None) -> GridFunction:
    """Constant with ``int u^2 = (4 pi tau)^(n/2)`` (or ``= 1`` if ``tau`` is None)."""
    target = 1.0 if tau is None else _target(model, tau)
    w = _weights(model, mesh)
    c = math.sqrt(target / float(np.sum(w)))
    return GridFunction.radial(mesh, np.full(mesh.size, c))


# ---------------------------------------------------------------------------
# F and lambda


def f_functional(model: ConeModel, u: GridFunction) -> float:
    """``int (4 |grad u|^2 + R_g u^2) dvol`` summed over the modes of ``u``."""
    if u.mode_count > model.cross_section.mode_count:
        raise ValueError("grid function has more modes than the cross section")
    total = 0.0
    for j in range(u.mode_count):
        uj = u.values[j]
        if np.any(uj):
            total += _operator(model, u.mesh, j).form(uj)
    return total


@dataclass(frozen=True, eq=False)
class SolveReport:
    kind: str
    value: float
    minimizer: GridFunction
    el_residual: float
    constraint_error: float
    trace: tuple = ()
    tau: float | None = None
    mode: int = 0
    status: str = "converged"
    iterations: int = 0
    tolerance: float = 0.0
    printed_el_residual: float | None = None
    mode_values: tuple = ()
    note: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def lambda_functional(
    model: ConeModel, mesh: RadialMesh, modes: int | None = None, tol: float = 1e-10
) -> SolveReport:
    """Smallest eigenvalue of ``-4 Laplace + R_g``: minimum over the mode problems.

    Every mode's eigenvalue is recorded in ``mode_values``; the ``nu_j u^2 /
    phi^2`` term is nonnegative, so the minimum sits in mode 0. Only mode 0
    needs an eigenvector; the others are located by Sturm bisection alone,
    which stays reliable when a tip-dominated eigenvector is ill-conditioned.
    """
    count = model.cross_section.mode_count if modes is None else min(modes, model.cross_section.mode_count)
    best = smallest_eigenpair(_operator(model, mesh, 0), tol=tol)
    values = [best.value] + [lowest_eigenvalue_bound(_operator(model, mesh, j), rel=1e-12) for j in range(1, count)]
    j = int(np.argmin(values))
    if j != 0 and values[j] < values[0] - 1e-9 * max(1.0, abs(values[0])):
        raise AssertionError(f"minimizing mode is {j}, expected the radial mode")
    vals = np.zeros((1, mesh.size))
    vals[0] = best.vector
    u = GridFunction(mesh, vals)
    op = _operator(model, mesh, 0)
    cons = abs(float(best.vector @ (op.mass @ best.vector)) - 1.0)
    return SolveReport(
        kind="lambda",
        value=best.value,
        minimizer=u,
        el_residual=best.residual,
        constraint_error=cons,
        trace=best.trace,
        mode=0,
        iterations=best.iterations,
        tolerance=tol,
        mode_values=tuple(values),
    )


# ---------------------------------------------------------------------------
# W and mu


def w_functional(model: ConeModel, u: GridFunction, tau: float) -> float:
    """``(4 pi tau)^(-n/2) int [tau (R u^2 + 4 |grad u|^2) - 2 u^2 ln u - n u^2] dvol``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    mesh, v = _radial_profile(u)
    if np.any(v < 0):
        raise ValueError("W needs a nonnegative function")
    return _w_value(model, mesh, v, tau)


@lru_cache(maxsize=32)
def _edge_coeffs(model: ConeModel, mesh: RadialMesh) -> np.ndarray:
    k = -_forms(model, mesh)["grad"].diagonal(1)
    k.setflags(write=False)
    return k


def _apply_mode0(model, mesh, v) -> np.ndarray:
    """Perelman mode-0 operator applied in difference form.

    Writing the gradient part as ``sum_e k_e (v_i - v_j)`` keeps the tiny
    lumped weights near the tip from amplifying cancellation error.
    """
    k = _edge_coeffs(model, mesh)
    flux = k * np.diff(v)
    out = np.zeros_like(v)
    out[:-1] -= flux
    out[1:] += flux
    return 4.0 * out + _forms(model, mesh)["curv"] @ v


def _w_value(model, mesh, v, tau) -> float:
    k = _edge_coeffs(model, mesh)
    w = _weights(model, mesh)
    energy = 4.0 * float(np.sum(k * np.diff(v) ** 2)) + float(v @ (_forms(model, mesh)["curv"] @ v))
    inner = tau * energy - float(np.sum(w * (2.0 * _xlogx2(v) + model.n * v**2)))
    return inner / _target(model, tau)


def _w_grad(model, mesh, v, tau) -> np.ndarray:
    w = _weights(model, mesh)
    logv = np.zeros_like(v)
    pos = v > 0
    logv[pos] = np.log(v[pos])
    g = 2.0 * tau * _apply_mode0(model, mesh, v) - w * (4.0 * v * logv + 2.0 * v + 2.0 * model.n * v)
    return g / _target(model, tau)


def w_gradient(model: ConeModel, u: GridFunction, tau: float) -> np.ndarray:
    """Gradient of the discrete ``W`` with respect to the nodal values."""
    mesh, v = _radial_profile(u)
    return _w_grad(model, mesh, v, tau)


@dataclass(frozen=True)
class ELResidual:
    discrete: float
    printed: float


def _free(model: ConeModel, size: int) -> np.ndarray:
    return np.arange(size if model.outer_bc == "neumann" else size - 1)


@lru_cache(maxsize=64)
def _preconditioner(model: ConeModel, mesh: RadialMesh, tau: float, spectral: bool = False):
    """Banded ``P = 4 tau G + (n + 1) D`` on the free nodes.

    ``G`` is the Dirichlet form and ``D`` the lumped mass. Leaving out the
    curvature keeps ``P`` definite with a spectrum-independent scale, so the
    residual measured in its dual norm means the same thing on every model.
    With ``spectral=True`` the descent metric ``tau K + s D`` is returned
    instead, ``s`` chosen from a Sturm lower bound so that it is definite.
    """
    idx = _free(model, mesh.size)
    D = sp.diags(_weights(model, mesh)[idx])
    if spectral:
        K = _operator(model, mesh, 0).stiffness[idx][:, idx]
        lam_d = lowest_eigenvalue_bound(_lumped_operator(model, mesh))
        P = tau * K + (max(1.0, 1.0 - tau * lam_d) + model.n) * D
    else:
        G = _forms(model, mesh)["grad"][idx][:, idx]
        P = (4.0 * tau) * G + (model.n + 1.0) * D
    # symmetric diagonal scaling: entries span dozens of decades near the tip
    s = 1.0 / np.sqrt(P.diagonal())
    off = P.diagonal(1) * s[:-1] * s[1:]
    ab = np.zeros((3, idx.size))
    ab[0, 1:] = off
    ab[1, :] = 1.0
    ab[2, :-1] = off
    ab.setflags(write=False)
    s.setflags(write=False)
    return ab, s


def _solve_p(pre, rhs):
    ab, s = pre
    return s * solve_banded((1, 1), ab, s * rhs)


def _riemannian_gradient(pre, wf, x, g):
    """Gradient of ``W`` in the ``P`` metric, tangent to ``x^T D x = const``.

    Returns the direction and the tangential part of ``g`` it came from.
    """
    Dx = wf * x
    Pdu = _solve_p(pre, Dx)
    beta = float(Dx @ _solve_p(pre, g)) / float(Dx @ Pdu)
    g_t = g - beta * Dx
    d = _solve_p(pre, g_t)
    # one correction pass removes the normal component left by rounding
    d = d - (float(Dx @ d) / float(Dx @ Pdu)) * Pdu
    return d, g_t


def _projected_gradient(model, mesh, v, tau):
    """Size of the constrained gradient of ``W`` in the dual norm of ``P``.

    Scaled to the variable ``v / sqrt(int v^2)`` so that it is comparable to
    changes in ``W``. The dual ``P`` norm rather than a lumped-mass norm keeps
    nodes with vanishing weight near the tip from dominating.
    """
    idx = _free(model, mesh.size)
    wf = _weights(model, mesh)[idx]
    ab = _preconditioner(model, mesh, float(tau))
    vf = v[idx]
    g = _w_grad(model, mesh, v, tau)[idx]
    d, g_t = _riemannian_gradient(ab, wf, vf, g)
    # d = P^-1 g_t, so d^T P d = d^T g_t without forming P d
    norm2 = float(np.sum(wf * vf * vf))
    return math.sqrt(norm2) * math.sqrt(max(float(d @ g_t), 0.0))


def el_residual(model: ConeModel, u: GridFunction, tau: float, m: float) -> ELResidual:
    """Euler-Lagrange residuals of a candidate minimiser.

    ``discrete`` is the dual-norm size of the projected gradient of the
    discrete constrained ``W`` (the authoritative stationarity measure).
    ``printed`` is the relative weak residual of
    ``-Laplace u + R u/4 - (2/tau) u ln u - (n/tau) u - (m/tau) u``, kept as
    a diagnostic only: its coefficients do not follow from varying ``W``.
    """
    mesh, v = _radial_profile(u)
    if np.any(v < 0):
        raise ValueError("EL residual needs a nonnegative function")
    disc = _projected_gradient(model, mesh, v, tau)
    L = _operator(model, mesh, 0, "schrodinger_L").stiffness
    w = _weights(model, mesh)
    idx = _free(model, mesh.size)
    logv = np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), 0.0)
    r = (L @ v) - w * ((2.0 / tau) * v * logv + ((model.n + m) / tau) * v)
    r = r[idx] / w[idx]
    vn = math.sqrt(float(np.sum(w * v * v)))
    printed = math.sqrt(float(np.sum(w[idx] * r * r))) / vn if vn > 0 else 0.0
    return ELResidual(disc, printed)


@dataclass(frozen=True)
class SolverParams:
    max_iters: int = 2000
    tol: float = 1e-10
    step0: float = 1.0
    armijo: float = 1e-4
    diverge_below: float = -1e6
    newton: bool = True


def _lumped_operator(model, mesh) -> ModeOperator:
    op = _operator(model, mesh, 0)
    return ModeOperator(0, op.nu, op.stiffness, sp.diags(_weights(model, mesh)).tocsr(), model.outer_bc)


def mu_functional(
    model: ConeModel,
    mesh: RadialMesh,
    tau: float,
    params: SolverParams | None = None,
    initial: GridFunction | None = None,
) -> SolveReport:
    """Minimise the discrete ``W`` over positive radial profiles with
    ``int u^2 dvol = (4 pi tau)^(n/2)``.

    Projected gradient descent in the metric of ``P = tau K + s D`` (``D``
    the lumped mass, ``s`` making ``P`` definite) with Armijo backtracking
    and renormalisation after every step; a Newton step on the bordered
    Lagrangian system is tried first. Steps are shortened so that no entry
    drops below ``1e-30 max(u)``. Starts from the normalised constant.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    params = params or SolverParams()
    n = model.n
    target = _target(model, tau)
    w = _weights(model, mesh)
    idx = _free(model, mesh.size)
    wf = w[idx]
    K = _operator(model, mesh, 0).stiffness[idx][:, idx]

    def normalize(x):
        return x * math.sqrt(target / float(np.sum(wf * x * x)))

    ab = _preconditioner(model, mesh, float(tau), True)

    def full(x):
        out = np.zeros(mesh.size)
        out[idx] = x
        return out

    def value(x):
        return _w_value(model, mesh, full(x), tau)

    def grad(x):
        return _w_grad(model, mesh, full(x), tau)[idx]

    if initial is None:
        x = normalize(np.ones(idx.size))
    else:
        x = normalize(np.array(initial.values[0][idx], dtype=float))
        if np.any(x <= 0):
            raise ValueError("initial profile must be positive on the free nodes")
    W = value(x)
    trace = [W]
    status = "max_iter"
    scale = max(1.0, abs(W))
    res = _projected_gradient(model, mesh, full(x), tau)
    drift = 0.0
    for _ in range(1, params.max_iters + 1):
        scale = max(1.0, abs(W))
        if res <= params.tol * scale:
            status = "converged"
            break
        g = grad(x)
        d = -_riemannian_gradient(ab, wf, x, g)[0]
        candidates = [d]
        if params.newton:
            dn = _newton_direction(K, wf, x, g, tau, n, target)
            if dn is not None:
                candidates.insert(0, dn)
        accepted = False
        for d in candidates:
            slope = float(g @ d)
            if not slope < 0:
                continue
            t = _max_positive_step(x, d, params.step0)
            while t > 1e-16:
                trial = normalize(x + t * d)
                W_new = value(trial)
                if np.isfinite(W_new) and W_new <= W + params.armijo * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            status = "stalled"
            break
        x, W = trial, W_new
        drift = max(drift, abs(float(np.sum(wf * x * x)) - target) / target)
        trace.append(W)
        res = _projected_gradient(model, mesh, full(x), tau)
        if W < params.diverge_below:
            status = "diverging"
            break
    if status == "max_iter" and res <= params.tol * max(1.0, abs(W)):
        status = "converged"
    scale = max(1.0, abs(W))
    u = GridFunction.radial(mesh, full(x))
    cons = abs(float(np.sum(wf * x * x)) - target) / target
    printed = el_residual(model, u, tau, W).printed
    return SolveReport(
        kind="mu",
        value=W,
        minimizer=u,
        el_residual=res,
        constraint_error=max(cons, drift),
        trace=tuple(trace),
        tau=tau,
        status=status,
        iterations=len(trace) - 1,
        tolerance=params.tol * scale,
        printed_el_residual=printed,
        note=_regime_note(model),
    )


def _regime_note(model: ConeModel) -> str:
    note = "radial subspace only: an upper bound for mu"
    if model.cross_section.scalar_curvature <= model.n - 2:
        note += "; unbounded-below expected (R_h0 <= n - 2)"
    return note


def _max_positive_step(x, d, t):
    """Largest step ``<= t`` keeping ``x + t d >= 1e-30 max(x)``."""
    floor = 1e-30 * float(np.max(x))
    neg = d < 0
    if np.any(neg):
        t = min(t, 0.99 * float(np.min((x[neg] - floor) / -d[neg])))
    return t


def _newton_direction(K, wf, x, g, tau, n, target):
    """Newton step for the stationarity system with multiplier, or None.

    Solves the bordered system ``[H, -2Dx; 2(Dx)^T, 0]`` with ``H`` the
    Hessian of the Lagrangian (tridiagonal) by block elimination. ``g`` is
    the gradient of ``W``; the common positive factor ``(4 pi tau)^(-n/2)``
    does not change the step.
    """
    c = 1.0 / target
    grad_e = g / c
    Dx = wf * x
    lam = float(x @ grad_e) / (2.0 * float(x @ Dx))
    G = grad_e - 2.0 * lam * Dx
    H = 2.0 * tau * K - sp.diags(wf * (4.0 * np.log(x) + 6.0 + 2.0 * n + 2.0 * lam))
    hd = np.abs(H.diagonal())
    if not np.all(hd > 0):
        return None
    s = 1.0 / np.sqrt(hd)
    off = H.diagonal(1) * s[:-1] * s[1:]
    ab = np.zeros((3, x.size))
    ab[0, 1:] = off
    ab[1, :] = H.diagonal() * s * s
    ab[2, :-1] = off
    try:
        with np.errstate(all="raise"):
            a = -s * solve_banded((1, 1), ab, s * G)
            b = 2.0 * s * solve_banded((1, 1), ab, s * Dx)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError):
        return None
    cons = float(x @ Dx) - target
    denom = 2.0 * float(Dx @ b)
    if denom == 0.0 or not np.isfinite(denom):
        return None
    dlam = (-cons - 2.0 * float(Dx @ a)) / denom
    d = a + b * dlam
    return d if np.all(np.isfinite(d)) else None


# ---------------------------------------------------------------------------
# log-Sobolev and the lower-bound chain


@dataclass(frozen=True)
class LogSobolevResult:
    a: float
    empirical_C: float
    values: tuple[float, ...]


def _entropy_and_dirichlet(model, u: GridFunction):
    mesh, v = _radial_profile(u)
    w = _weights(model, mesh)
    G = _forms(model, mesh)["grad"]
    return float(np.sum(w * _xlogx2(v))), float(v @ (G @ v))


def log_sobolev_check(model: ConeModel, a: float, family, tol: float = 1e-10) -> LogSobolevResult:
    """``max_u [int u^2 ln u - a int |grad u|^2]`` over positive ``u`` with ``int u^2 = 1``."""
    if not a > 0:
        raise ValueError("a must be positive")
    vals = []
    for u in family:
        if np.any(u.values[0] <= 0):
            raise ValueError("log-Sobolev family members must be positive")
        if abs(l2_squared(model, u) - 1.0) > tol:
            raise ValueError("log-Sobolev family members must satisfy int u^2 dvol = 1")
        ent, dir_ = _entropy_and_dirichlet(model, u)
        vals.append(ent - a * dir_)
    return LogSobolevResult(a, max(vals), tuple(vals))


def chain_constant(model: ConeModel, a: float, family) -> float:
    """Constant ``C`` with ``2 int v^2 ln v <= a int |grad v|^2 + C`` on ``family``.

    This is twice the empirical log-Sobolev constant at ``a/2``; it is the
    constant that enters the lower bound for ``W``.
    """
    return 2.0 * log_sobolev_check(model, a / 2.0, family).empirical_C


@dataclass(frozen=True)
class ChainResult:
    w_value: float
    bound: float
    holds: bool


def lower_bound_chain_check(
    model: ConeModel, u: GridFunction, tau: float, a: float, C_a: float, tol: float = 1e-12
) -> ChainResult:
    """``W(u) >= (4 pi tau)^(-n/2) tau int (R u^2 + (4 - a/tau)|grad u|^2) - (n/2) ln(4 pi tau) - C_a - n``.

    ``C_a`` must come from :func:`chain_constant` on a family containing
    ``u / (4 pi tau)^(n/4)``.
    """
    mesh, v = _radial_profile(u)
    target = _target(model, tau)
    if abs(l2_squared(model, u) - target) > 1e-9 * target:
        raise ValueError("u must satisfy int u^2 dvol = (4 pi tau)^(n/2)")
    K = _operator(model, mesh, 0).stiffness
    G = _forms(model, mesh)["grad"]
    wv = w_functional(model, u, tau)
    bound = (
        (tau * float(v @ (K @ v)) - a * float(v @ (G @ v))) / target
        - 0.5 * model.n * math.log(4.0 * math.pi * tau)
        - C_a
        - model.n
    )
    return ChainResult(wv, bound, bool(wv >= bound - tol * max(1.0, abs(bound))))


def concentrating_bumps(mesh: RadialMesh, widths, model: ConeModel, power: float | None = None):
    """Positive bumps ``(1 + (r/s)^2)^(-power)`` normalised to ``int u^2 = 1``."""
    power = float(model.n) if power is None else power
    out = []
    w = _weights(model, mesh)
    for s in widths:
        v = (1.0 + (mesh.nodes / s) ** 2) ** (-power)
        v = v / math.sqrt(float(np.sum(w * v * v)))
        out.append(GridFunction.radial(mesh, v))
    return out


# ---------------------------------------------------------------------------
# (u, v)_A versus H^1


class IndefiniteFormError(ValueError):
    def __init__(self, smallest: float):
        super().__init__(f"(.,.)_A is not positive definite: smallest form eigenvalue {smallest:.6e}")
        self.smallest = smallest


@dataclass(frozen=True)
class EquivalenceConstants:
    A: float
    C1_hat: float
    C2_hat: float
    smallest_form_eigenvalue: float
    ratios: tuple[float, ...] = field(default=())


def default_form_shift(model: ConeModel, mesh: RadialMesh) -> float:
    """``1 + 1.1 max(0, -min R_g)`` over the mesh nodes."""
    R = model.scalar_curvature(mesh.nodes)
    return 1.0 + 1.1 * max(0.0, -float(np.min(R)))


def inner_product_equivalence_check(
    model: ConeModel, A: float | None, family, mesh: RadialMesh | None = None
) -> EquivalenceConstants:
    """Empirical ``C1 = min`` and ``C2 = max`` of ``||u||_A^2 / ||u||_{H^1}^2`` over ``family``.

    ``||u||_A^2 = int ((R_g + A) u^2 + 4 |grad u|^2) dvol``.
    """
    family = list(family)
    mesh = mesh if mesh is not None else family[0].mesh
    if A is None:
        A = default_form_shift(model, mesh)
    J = max(u.mode_count for u in family)
    smallest = math.inf
    for j in range(J):
        op = _operator(model, mesh, j)
        shifted = ModeOperator(j, op.nu, (op.stiffness + A * op.mass).tocsr(), op.mass, "neumann")
        smallest = min(smallest, smallest_eigenpair(shifted).value)
    if not smallest > 0:
        raise IndefiniteFormError(smallest)
    ratios = []
    for u in family:
        a_sq = f_functional(model, u) + A * sum(
            float(u.values[j] @ (_operator(model, mesh, j).mass @ u.values[j])) for j in range(u.mode_count)
        )
        h_sq = h1_norm(u, model) ** 2
        ratios.append(a_sq / h_sq)
    return EquivalenceConstants(A, min(ratios), max(ratios), smallest, tuple(ratios))
