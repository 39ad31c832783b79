"""Staggered minimisation of the discrete phase-field energy.

At fixed ``v`` the energy is a convex quadratic in ``u`` (solved by
preconditioned conjugate gradients); at fixed ``u`` it is a strictly convex
quadratic in the coefficients of ``v`` subject to the box ``[0, 1]`` (solved
by a projected Newton method with a projected-gradient fallback). A half-step
is only accepted when it does not increase the energy, so the recorded trace
is nonincreasing by construction.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bspline import QuadratureRule, SplineField, SplineSpace, uniform_space
from .energy import EnergyBreakdown, PhaseFieldParams, total_energy
from .quasi_interp import project
from .targets import SeparableTarget

log = logging.getLogger(__name__)

__all__ = [
    "SolverError",
    "DirichletData",
    "SolveReport",
    "Assembler",
    "minimize_u",
    "minimize_v",
    "alternate_minimize",
    "crack_seed",
    "tearing_1d",
    "antiplane_tearing_2d",
]


class SolverError(RuntimeError):
    def __init__(self, msg: str, residual: float = float("nan")):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class DirichletData:
    """Prescribed displacement coefficients (flat indices into the stacked component vector)."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).ravel()
        val = np.broadcast_to(np.asarray(self.values, dtype=float), idx.shape).copy()
        order = np.argsort(idx, kind="stable")
        object.__setattr__(self, "indices", idx[order])
        object.__setattr__(self, "values", val[order])

    @classmethod
    def empty(cls) -> "DirichletData":
        return cls(np.zeros(0, dtype=int), np.zeros(0))

    @classmethod
    def bar_ends(cls, space: SplineSpace, left: float, right: float) -> "DirichletData":
        """1D: ``u(0) = left``, ``u(1) = right`` (open knots interpolate the end coefficients)."""
        return cls(np.array([0, space.n_dofs - 1]), np.array([left, right]))

    @classmethod
    def faces(cls, space: SplineSpace, axis: int, low=None, high=None, ncomp: int = 1, comp: int = 0) -> "DirichletData":
        """2D: prescribe component ``comp`` on the faces ``x_axis = 0`` and/or ``x_axis = 1``."""
        nb = space.n_basis
        grid = np.arange(space.n_dofs).reshape(nb)
        idx, val = [], []
        for side, value in ((0, low), (nb[axis] - 1, high)):
            if value is None:
                continue
            sl = [slice(None)] * space.dim
            sl[axis] = side
            ids = grid[tuple(sl)].ravel() + comp * space.n_dofs
            idx.append(ids)
            val.append(np.full(ids.size, float(value)))
        if not idx:
            return cls.empty()
        return cls(np.concatenate(idx), np.concatenate(val))

    def __add__(self, other: "DirichletData") -> "DirichletData":
        return DirichletData(np.concatenate([self.indices, other.indices]), np.concatenate([self.values, other.values]))


@dataclass
class SolveReport:
    outer_iterations: int
    energy_trace: list
    breakdown: EnergyBreakdown
    converged: bool
    wall_time: float
    rejected_half_steps: int = 0
    label: str = ""
    u: SplineField | None = field(default=None, repr=False)
    v: SplineField | None = field(default=None, repr=False)

    @property
    def monotone(self) -> bool:
        t = np.asarray(self.energy_trace)
        return bool(np.all(np.diff(t) <= 0.0))

    def to_dict(self) -> dict:
        b = self.breakdown
        return {
            "label": self.label,
            "outer_iterations": self.outer_iterations,
            "energy_trace": [float(e) for e in self.energy_trace],
            "breakdown": {"elastic": b.elastic, "reaction": b.reaction, "gradient": b.gradient,
                          "laplacian": b.laplacian, "total": b.total},
            "converged": self.converged,
            "wall_time": self.wall_time,
            "rejected_half_steps": self.rejected_half_steps,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------
class Assembler:
    """Quadrature-point basis matrices for one spline space, built once per solve."""

    def __init__(self, space: SplineSpace, rule: QuadratureRule | None = None):
        self.space = space
        self.rule = rule or QuadratureRule()
        d = space.dim
        xs, ws = zip(*(space.quadrature_points(self.rule, a) for a in range(d)))
        self.xs = list(xs)
        self.w = ws[0] if d == 1 else np.outer(ws[0], ws[1]).ravel()
        self._cache = {}

    def B(self, orders: tuple[int, ...]) -> sp.csr_matrix:
        if orders not in self._cache:
            self._cache[orders] = self.space.kron_basis(self.xs, orders)
        return self._cache[orders]

    def unit(self, *axes) -> tuple[int, ...]:
        o = [0] * self.space.dim
        for a in axes:
            o[a] += 1
        return tuple(o)

    def weighted(self, Bl, Br, g) -> sp.csr_matrix:
        return (Bl.T @ sp.diags(g * self.w) @ Br).tocsr()

    def values(self, f: SplineField, orders: tuple[int, ...], comp: int = 0) -> np.ndarray:
        return self.B(orders) @ f.coeffs[comp].ravel()

    def strain_density(self, u: SplineField, params: PhaseFieldParams) -> np.ndarray:
        d = self.space.dim
        if params.law == "scalar":
            return 0.5 * sum(self.values(u, self.unit(a)) ** 2 for a in range(d))
        Du = np.array([[self.values(u, self.unit(b), comp=c) for b in range(d)] for c in range(d)])
        E = 0.5 * (Du + Du.transpose(1, 0, 2))
        tr = sum(E[a, a] for a in range(d))
        return params.mu * np.sum(E**2, axis=(0, 1)) + 0.5 * params.lam * tr**2

    def stiffness(self, g: np.ndarray, params: PhaseFieldParams, ncomp: int) -> sp.csr_matrix:
        """Hessian of ``int g W(e(u))`` in the stacked displacement coefficients."""
        d = self.space.dim
        D = [self.B(self.unit(a)) for a in range(d)]
        if params.law == "scalar":
            return sum(self.weighted(Da, Da, g) for Da in D).tocsr()
        if d != 2 or ncomp != 2:
            raise ValueError("isotropic law is implemented for 2D vector displacements")
        mu, lam = params.mu, params.lam
        G = {(a, b): self.weighted(D[a], D[b], g) for a in range(2) for b in range(2)}
        K11 = (2 * mu + lam) * G[0, 0] + mu * G[1, 1]
        K22 = (2 * mu + lam) * G[1, 1] + mu * G[0, 0]
        K12 = mu * G[1, 0] + lam * G[0, 1]
        return sp.bmat([[K11, K12], [K12.T, K22]], format="csr")

    def phase_operator(self, params: PhaseFieldParams, elastic_density: np.ndarray):
        """``A, b`` with ``E(v) = 1/2 v'Av - b'v + const`` at fixed displacement."""
        d = self.space.dim
        eps, k = params.eps, params.gc / 4.0
        B0 = self.B((0,) * d)
        one = np.ones_like(self.w)
        M = self.weighted(B0, B0, one)
        S = sum(self.weighted(self.B(self.unit(a)), self.B(self.unit(a)), one) for a in range(d))
        Lap = sum(self.B(self.unit(a, a)) for a in range(d)).tocsr()
        L = self.weighted(Lap, Lap, one)
        Mw = self.weighted(B0, B0, elastic_density)
        A = (2.0 * Mw + 2.0 * k * (M / eps + 2.0 * eps * S + eps**3 * L)).tocsr()
        b = 2.0 * k / eps * (B0.T @ self.w)
        return A, b


# ---------------------------------------------------------------------------
# Half-steps
# ---------------------------------------------------------------------------
def _pcg(A, b, x0, rtol, maxiter):
    diag = A.diagonal()
    diag = np.where(diag > 0, diag, 1.0)
    M = spla.LinearOperator(A.shape, matvec=lambda r: r / diag)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0
    x, info = spla.cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    res = np.linalg.norm(b - A @ x) / bnorm
    if info != 0 and res > rtol:
        raise SolverError("conjugate gradients did not converge", res)
    return x, res


def minimize_u(v: SplineField, params: PhaseFieldParams, dirichlet: DirichletData, u0: SplineField | None = None,
               ncomp: int = 1, rtol: float = 1e-10, maxiter: int = 20000, assembler: Assembler | None = None) -> SplineField:
    """Minimise the elastic energy at fixed phase field subject to Dirichlet data."""
    asm = assembler or Assembler(v.space)
    vq = asm.values(v, (0,) * v.space.dim)
    g = vq**2 + params.eta
    K = asm.stiffness(g, params, ncomp)
    n = K.shape[0]
    x = np.zeros(n)
    if u0 is not None:
        x[:] = u0.coeffs.reshape(-1)
    fixed = np.zeros(n, dtype=bool)
    fixed[dirichlet.indices] = True
    x[dirichlet.indices] = dirichlet.values
    free = ~fixed
    if np.any(free):
        Kff = K[free][:, free]
        rhs = -(K[free][:, fixed] @ x[fixed])
        if g.min() <= 0 and not np.any(fixed):
            raise SolverError("singular elastic problem: no Dirichlet data and degenerate stiffness")
        x[free], _ = _pcg(Kff, rhs, x[free], rtol, maxiter)
    return SplineField(v.space, x.reshape(ncomp, *v.space.n_basis))


def _box_qp(A, b, x, tol, maxiter, cg_rtol=1e-10):
    """Minimise ``1/2 x'Ax - b'x`` over ``[0, 1]^n`` by projected Newton steps."""
    f = lambda y: 0.5 * y @ (A @ y) - b @ y
    x = np.clip(x, 0.0, 1.0)
    scale = max(1.0, np.linalg.norm(b, np.inf))
    diag = A.diagonal()
    for it in range(maxiter):
        g = A @ x - b
        pg = np.where((x <= 0.0) & (g > 0), 0.0, np.where((x >= 1.0) & (g < 0), 0.0, g))
        pgn = np.linalg.norm(pg, np.inf)
        if pgn <= tol * scale:
            return x, pgn, it
        fx = f(x)
        free = ~(((x <= 0.0) & (g > 0)) | ((x >= 1.0) & (g < 0)))
        d = np.zeros_like(x)
        Aff = A[free][:, free]
        try:
            d[free], _ = _pcg(Aff, -g[free], np.zeros(int(free.sum())), cg_rtol, 5000)
        except SolverError:
            d[free] = -g[free] / diag[free]
        t = 1.0
        accepted = False
        for _ in range(40):
            xn = np.clip(x + t * d, 0.0, 1.0)
            if f(xn) <= fx + 1e-4 * (g @ (xn - x)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # projected gradient with backtracking
            t = 1.0 / max(diag.max(), 1e-300)
            for _ in range(60):
                xn = np.clip(x - t * g, 0.0, 1.0)
                if f(xn) <= fx + 1e-4 * (g @ (xn - x)):
                    accepted = True
                    break
                t *= 0.5
        if not accepted or np.array_equal(xn, x):
            return x, pgn, it
        x = xn
    g = A @ x - b
    pg = np.where((x <= 0.0) & (g > 0), 0.0, np.where((x >= 1.0) & (g < 0), 0.0, g))
    pgn = np.linalg.norm(pg, np.inf)
    if pgn > tol * scale:
        raise SolverError("box-constrained phase-field step hit the iteration limit", pgn)
    return x, pgn, maxiter


def minimize_v(u: SplineField, params: PhaseFieldParams, v0: SplineField | None = None, space: SplineSpace | None = None,
               tol: float = 1e-8, maxiter: int = 200, assembler: Assembler | None = None) -> SplineField:
    """Minimise the energy in the phase field at fixed displacement; coefficients stay in [0, 1]."""
    space = space or u.space
    asm = assembler or Assembler(space)
    dens = asm.strain_density(u, params)
    A, b = asm.phase_operator(params, dens)
    x0 = np.ones(space.n_dofs) if v0 is None else v0.coeffs.reshape(-1)
    x, _, _ = _box_qp(A, b, x0, tol, maxiter)
    return SplineField(space, x.reshape(space.n_basis))


def alternate_minimize(u0: SplineField, v0: SplineField, params: PhaseFieldParams, dirichlet: DirichletData,
                       outer_tol: float = 1e-8, max_outer: int = 200, rtol: float = 1e-10, label: str = "",
                       rule: QuadratureRule | None = None) -> SolveReport:
    """Staggered minimisation starting with a displacement step.

    A half-step is discarded if it raises the energy, so the trace (one entry
    per outer iteration, starting with the initial state) never increases.
    Iteration stops when the relative decrease over an outer iteration drops
    below ``outer_tol``.
    """
    t0 = time.perf_counter()
    rule = rule or QuadratureRule()
    asm = Assembler(v0.space, rule)
    ncomp = u0.ncomp
    p_coeff = params.replace(constraint_check="coeff")
    u, v = u0, SplineField(v0.space, np.clip(v0.coeffs, 0.0, 1.0))
    if dirichlet.indices.size:
        c = u.coeffs.reshape(-1).copy()
        c[dirichlet.indices] = dirichlet.values
        u = u.with_coeffs(c)
    E = total_energy(u, v, p_coeff, rule).total
    trace = [E]
    rejected = 0
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        E_start = E
        u_new = minimize_u(v, params, dirichlet, u, ncomp=ncomp, rtol=rtol, assembler=asm)
        E_u = total_energy(u_new, v, p_coeff, rule).total
        if E_u <= E:
            u, E = u_new, E_u
        else:
            rejected += 1
        v_new = minimize_v(u, params, v, assembler=asm)
        E_v = total_energy(u, v_new, p_coeff, rule).total
        if E_v <= E:
            v, E = v_new, E_v
        else:
            rejected += 1
        trace.append(E)
        if E_start - E <= outer_tol * max(1.0, abs(E)):
            converged = True
            break
    bd = total_energy(u, v, p_coeff, rule)
    rep = SolveReport(it, trace, bd, converged, time.perf_counter() - t0, rejected, label, u, v)
    if not rep.monotone:  # cannot happen: each accepted half-step is a descent step
        raise AssertionError("energy trace increased")
    log.debug("staggered solve %s: %d iterations, E=%.6g", label, it, bd.total)
    return rep


# ---------------------------------------------------------------------------
# Seeds and canonical problems
# ---------------------------------------------------------------------------
def crack_seed(space: SplineSpace, eps: float, axis: int = 0, value: float = 0.5, extent=None, delta: float = 0.1,
               profile=None) -> SplineField:
    """Phase field with a recovery-profile notch across the hyperplane ``x_axis = value``.

    In 2D ``extent = (from, to)`` limits the notch along the other axis; the
    result is the quasi-interpolant with coefficients clamped to [0, 1].
    """
    from .profile import build_truncated_profile, recovery_profile, smooth_window

    prof = profile or build_truncated_profile(delta)
    z = recovery_profile(prof, eps)
    notch = lambda x, k: z.notch(np.asarray(x) - value, k)
    if space.dim == 1:
        target = SeparableTarget([(lambda x, k: -notch(x, k),)], constant=1.0)
    else:
        lo, hi = extent if extent is not None else space.bounds()[1 - axis]
        window = smooth_window(lo, hi, max(z.eps_sharp, 1e-12))
        factors = [None, None]
        factors[axis] = notch
        factors[1 - axis] = window
        target = SeparableTarget([(lambda x, k: -factors[0](x, k), factors[1])], constant=1.0)
    w = project(space, target)
    return SplineField(space, np.clip(w.coeffs, 0.0, 1.0))


def _even(n: float) -> int:
    n = int(np.ceil(n - 1e-9))
    return n + (n % 2)


def tearing_1d(eps: float, g: float, m: int = 8, eta: float | None = None, delta: float = 0.1, gc: float = 4.0,
               outer_tol: float = 1e-9, max_outer: int = 500, profile=None, seed_at: float = 0.5) -> dict:
    """Bar (0, 1) with ``u(0) = 0``, ``u(1) = g``: intact and crack-seeded staggered solves.

    Returns both reports and the lower branch. The sharp competitor energies
    are ``g^2 / 2`` (intact, affine) and ``gc`` (one crack).
    """
    eta = eps**2 if eta is None else eta
    space = uniform_space(_even(m / eps), 1)
    params = PhaseFieldParams(eps=eps, eta=eta, gc=gc)
    bc = DirichletData.bar_ends(space, 0.0, g)
    u0 = SplineField.constant(space, 0.0)
    one = SplineField.constant(space, 1.0)
    intact = alternate_minimize(u0, one, params, bc, outer_tol, max_outer, label="intact")
    seed = crack_seed(space, eps, value=seed_at, delta=delta, profile=profile)
    seeded = alternate_minimize(u0, seed, params, bc, outer_tol, max_outer, label="seeded")
    lower = min((intact, seeded), key=lambda r: r.breakdown.total)
    return {"eps": eps, "h": space.h, "eta": eta, "g": g, "intact": intact, "seeded": seeded, "lower": lower,
            "sharp_limit": min(0.5 * g * g, gc)}


def antiplane_tearing_2d(eps: float, g: float, m: int = 4, eta: float | None = None, delta: float = 0.1,
                         gc: float = 4.0, outer_tol: float = 1e-8, max_outer: int = 300, profile=None,
                         seed: tuple[int, float, float, float] = (1, 0.5, 0.0, 1.0)) -> dict:
    """Unit square, scalar ``u = 0`` at ``x2 = 0`` and ``u = g`` at ``x2 = 1``.

    The sharp competitors are the affine intact state (``g^2 / 2``) and a
    straight crack across the unit width (``gc``).
    """
    eta = eps**2 if eta is None else eta
    n = _even(m / eps)
    space = uniform_space((n, n))
    params = PhaseFieldParams(eps=eps, eta=eta, gc=gc)
    bc = DirichletData.faces(space, axis=1, low=0.0, high=g)
    u0 = SplineField.constant(space, 0.0)
    one = SplineField.constant(space, 1.0)
    intact = alternate_minimize(u0, one, params, bc, outer_tol, max_outer, label="intact")
    axis, value, lo, hi = seed
    seed_v = crack_seed(space, eps, axis=axis, value=value, extent=(lo, hi), delta=delta, profile=profile)
    seeded = alternate_minimize(u0, seed_v, params, bc, outer_tol, max_outer, label="seeded")
    lower = min((intact, seeded), key=lambda r: r.breakdown.total)
    return {"eps": eps, "h": space.h, "eta": eta, "g": g, "intact": intact, "seeded": seeded, "lower": lower,
            "sharp_limit": min(0.5 * g * g, gc)}
