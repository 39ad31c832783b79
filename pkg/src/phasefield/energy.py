"""Discrete phase-field energy on spline fields.

    F(u, v) = int (v^2 + eta) W(e(u)) + gc/4 int eps^-1 (v-1)^2 + 2 eps |grad v|^2 + eps^3 |lap v|^2

with either the antiplane density ``W = |grad u|^2 / 2`` (scalar ``u``) or
the isotropic density ``W(E) = mu |E|^2 + lam/2 (tr E)^2`` of the symmetric
gradient (vector ``u`` in 2D). The phase-field constraint ``0 <= v <= 1`` is
part of the functional: outside the box the energy is infinite, signalled
here by :class:`BoxConstraintViolated`.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .bspline import QuadratureRule, SplineField, SplineSpace, eval_field_grid

__all__ = [
    "BoxConstraintViolated",
    "PhaseFieldParams",
    "EnergyBreakdown",
    "elastic_density",
    "elastic_energy",
    "phase_energy",
    "total_energy",
    "check_box",
    "laplacian_hessian_check",
    "BREAKDOWN_COLUMNS",
]

BREAKDOWN_COLUMNS = ["eps", "h", "eta", "elastic", "reaction", "gradient", "laplacian", "total"]


class BoxConstraintViolated(ValueError):
    """The phase field leaves [0, 1]; the energy is +inf."""


@dataclass(frozen=True)
class PhaseFieldParams:
    eps: float
    eta: float = 0.0
    law: str = "scalar"  # "scalar" (antiplane) or "isotropic"
    lam: float = 0.0
    mu: float = 1.0
    gc: float = 4.0
    constraint_check: str = "coeff"  # "coeff" or "sample"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.law not in ("scalar", "isotropic"):
            raise ValueError(f"unknown elastic law {self.law!r}")
        if self.law == "isotropic" and not (self.mu > 0 and self.mu + self.lam > 0):
            raise ValueError("isotropic law needs mu > 0 and mu + lam > 0")
        if not self.gc > 0:
            raise ValueError("gc must be positive")
        if self.constraint_check not in ("coeff", "sample"):
            raise ValueError("constraint_check must be 'coeff' or 'sample'")

    def replace(self, **kw) -> "PhaseFieldParams":
        d = asdict(self)
        d.update(kw)
        return PhaseFieldParams(**d)


@dataclass
class EnergyBreakdown:
    """Unweighted energy terms; ``total = elastic + gc/4 (reaction + gradient + laplacian)``."""

    elastic: float
    reaction: float
    gradient: float
    laplacian: float
    gc: float = 4.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def phase(self) -> float:
        return self.gc / 4.0 * (self.reaction + self.gradient + self.laplacian)

    @property
    def total(self) -> float:
        return self.elastic + self.phase

    def row(self, eps: float, h: float, eta: float) -> dict:
        return {
            "eps": eps, "h": h, "eta": eta,
            "elastic": self.elastic, "reaction": self.reaction, "gradient": self.gradient,
            "laplacian": self.laplacian, "total": self.total,
        }


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------
def _grid(space: SplineSpace, rule: QuadratureRule):
    xs, ws = zip(*(space.quadrature_points(rule, a) for a in range(space.dim)))
    W = ws[0] if space.dim == 1 else np.outer(ws[0], ws[1])
    return list(xs), W


def _reduce(space: SplineSpace, vals: np.ndarray, q: int) -> float:
    """Element contributions first, then a sum in element order."""
    shape = []
    for n in vals.shape:
        shape += [n // q, q]
    per_el = vals.reshape(shape).sum(axis=tuple(range(1, 2 * vals.ndim, 2)))
    return float(np.sum(per_el.ravel()))


def _unit(d, *axes):
    o = [0] * d
    for a in axes:
        o[a] += 1
    return tuple(o)


def _check_compatible(u: SplineField, v: SplineField):
    if u.space is v.space:
        return
    su, sv = u.space, v.space
    if su.dim != sv.dim or any(
        not np.array_equal(a.breakpoints, b.breakpoints) for a, b in zip(su.axes, sv.axes)
    ) or su.geometry != sv.geometry:
        raise ValueError("u and v must live on the same mesh")


def elastic_density(E: np.ndarray, params: PhaseFieldParams) -> np.ndarray:
    """``mu |E|^2 + lam/2 (tr E)^2`` for a stack of symmetric matrices ``(..., d, d)``."""
    E = np.asarray(E, dtype=float)
    tr = np.trace(E, axis1=-2, axis2=-1)
    return params.mu * np.sum(E * E, axis=(-2, -1)) + 0.5 * params.lam * tr**2


def _strain_density(u: SplineField, xs, params: PhaseFieldParams) -> np.ndarray:
    d = u.space.dim
    if params.law == "scalar":
        if u.ncomp != 1:
            raise ValueError("scalar mode expects a scalar displacement")
        out = 0.0
        for a in range(d):
            out = out + eval_field_grid(u, xs, _unit(d, a))[0] ** 2
        return 0.5 * out
    if u.ncomp != d:
        raise ValueError("isotropic law expects a vector displacement with d components")
    Du = np.stack([eval_field_grid(u, xs, _unit(d, b)) for b in range(d)], axis=1)  # (comp, deriv, ...)
    Du = np.moveaxis(Du, (0, 1), (-2, -1))
    E = 0.5 * (Du + np.swapaxes(Du, -1, -2))
    return elastic_density(E, params)


def elastic_energy(u: SplineField, v: SplineField, params: PhaseFieldParams, rule: QuadratureRule | None = None) -> float:
    """``int (v^2 + eta) W(e(u))``."""
    _check_compatible(u, v)
    rule = rule or QuadratureRule()
    xs, W = _grid(v.space, rule)
    vv = eval_field_grid(v, xs, (0,) * v.space.dim)[0]
    dens = _strain_density(u, xs, params)
    return _reduce(v.space, (vv**2 + params.eta) * dens * W, rule.order)


def phase_energy(v: SplineField, eps: float, rule: QuadratureRule | None = None) -> tuple[float, float, float]:
    """``(int eps^-1 (v-1)^2, int 2 eps |grad v|^2, int eps^3 |lap v|^2)``."""
    rule = rule or QuadratureRule()
    space = v.space
    d = space.dim
    xs, W = _grid(space, rule)
    vv = eval_field_grid(v, xs, (0,) * d)[0]
    grad2 = sum(eval_field_grid(v, xs, _unit(d, a))[0] ** 2 for a in range(d))
    lap = sum(eval_field_grid(v, xs, _unit(d, a, a))[0] for a in range(d))
    q = rule.order
    return (
        _reduce(space, (vv - 1.0) ** 2 * W, q) / eps,
        2.0 * eps * _reduce(space, grad2 * W, q),
        eps**3 * _reduce(space, lap**2 * W, q),
    )


def check_box(v: SplineField, mode: str = "coeff", samples: int = 5, tol: float = 1e-12) -> None:
    """Raise :class:`BoxConstraintViolated` unless ``0 <= v <= 1``.

    ``coeff`` checks the coefficients (sufficient by the convex-hull property);
    ``sample`` checks values on a lattice of ``samples`` points per element and axis.
    """
    if mode == "coeff":
        c = v.coeffs
        if c.min() < 0.0 or c.max() > 1.0:
            raise BoxConstraintViolated(f"coefficients span [{c.min():.3e}, {c.max():.3e}]")
        return
    t = np.linspace(0.0, 1.0, samples)
    xs = []
    for a in range(v.space.dim):
        bp = v.space.element_bounds(a)
        xs.append(np.unique((bp[:-1, None] + np.diff(bp)[:, None] * t[None, :]).ravel()))
    vals = eval_field_grid(v, xs, (0,) * v.space.dim)[0]
    if vals.min() < -tol or vals.max() > 1.0 + tol:
        raise BoxConstraintViolated(f"sampled values span [{vals.min():.3e}, {vals.max():.3e}]")


def total_energy(u: SplineField, v: SplineField, params: PhaseFieldParams, rule: QuadratureRule | None = None) -> EnergyBreakdown:
    check_box(v, params.constraint_check)
    el = elastic_energy(u, v, params, rule)
    rea, gra, lap = phase_energy(v, params.eps, rule)
    return EnergyBreakdown(el, rea, gra, lap, params.gc)


def laplacian_hessian_check(v: SplineField, rule: QuadratureRule | None = None) -> tuple[float, float, float]:
    """``(int |lap v|^2, int |D^2 v|^2, relative difference)``.

    The two integrals agree for fields vanishing with their gradient on the
    boundary; for general fields they differ by boundary terms.
    """
    rule = rule or QuadratureRule()
    space = v.space
    d = space.dim
    xs, W = _grid(space, rule)
    H = [[eval_field_grid(v, xs, _unit(d, a, b))[0] for b in range(d)] for a in range(d)]
    lap = sum(H[a][a] for a in range(d))
    hess2 = sum(H[a][b] ** 2 for a in range(d) for b in range(d))
    q = rule.order
    il = _reduce(space, lap**2 * W, q)
    ih = _reduce(space, hess2 * W, q)
    scale = max(il, ih)
    rel = abs(il - ih) / scale if scale > 0 else 0.0
    return il, ih, rel
