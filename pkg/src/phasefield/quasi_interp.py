"""Local L2 quasi-interpolation onto quadratic spline spaces.

Each coefficient is obtained from a least-squares fit on a single element of
the support of its basis function (the middle one, clipped at the patch ends).
The fit reproduces the three active basis functions exactly, so the operator
is linear, local (it only reads the target on the extended support of an
element) and reproduces quadratics. Constants are reproduced bit-exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .bspline import KnotVector, QuadratureRule, SplineField, SplineSpace
from .targets import sample_grid

__all__ = [
    "project",
    "projection_operator",
    "sample_points",
    "error_report",
    "ProjectionReport",
    "sup_norm_estimate_check",
    "SupNormCheck",
]


def _source_element(kv: KnotVector) -> np.ndarray:
    """Element used to fit each coefficient."""
    return np.clip(np.arange(kv.n_basis) - 1, 0, kv.n_elements - 1)


@lru_cache(maxsize=64)
def _operator_1d(knots: tuple, order: int) -> sp.csr_matrix:
    kv = KnotVector(np.array(knots))
    rule = QuadratureRule(order)
    ne, q, p = kv.n_elements, order, kv.degree
    bp = kv.breakpoints
    xi = (bp[:-1, None] + np.diff(bp)[:, None] * rule.nodes[None, :]).ravel()
    first, ders = kv.basis_ders(xi, 0)
    B = ders[:, 0, :].reshape(ne, q, p + 1)
    W = rule.weights
    G = np.einsum("eqi,q,eqj->eij", B, W, B)
    P = np.linalg.solve(G, np.einsum("eqi,q->eiq", B, W))  # (ne, p+1, q)
    src = _source_element(kv)
    rows = np.repeat(np.arange(kv.n_basis), q)
    local = np.arange(kv.n_basis) - src
    cols = (src[:, None] * q + np.arange(q)).ravel()
    vals = P[src, local, :].ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(kv.n_basis, ne * q))


def projection_operator(space: SplineSpace, axis: int, order: int = 4) -> sp.csr_matrix:
    """Sparse map from samples at the per-element Gauss points of ``axis`` to coefficients."""
    return _operator_1d(tuple(space.axes[axis].knots.tolist()), order)


def sample_points(space: SplineSpace, order: int = 4) -> list[np.ndarray]:
    """Physical sampling points per axis read by :func:`project`."""
    return [space.quadrature_points(QuadratureRule(order), a)[0] for a in range(space.dim)]


def _constant_blocks(F: np.ndarray, q: int):
    """Per-element block minima and maxima of a sample grid."""
    shape = []
    for n in F.shape:
        shape += [n // q, q]
    blocks = F.reshape(shape)
    axes = tuple(range(1, 2 * F.ndim, 2))
    return blocks.min(axis=axes), blocks.max(axis=axes)


def _project_samples(space: SplineSpace, F: np.ndarray, order: int) -> np.ndarray:
    mats = [projection_operator(space, a, order) for a in range(space.dim)]
    if space.dim == 1:
        C = mats[0] @ F
    else:
        C = (mats[1] @ (mats[0] @ F).T).T
    lo, hi = _constant_blocks(F, order)
    src = [_source_element(kv) for kv in space.axes]
    lo_c = lo[np.ix_(*src)]
    hi_c = hi[np.ix_(*src)]
    const = lo_c == hi_c
    C = np.where(const, lo_c, C)
    return C


def project(space: SplineSpace, target, ncomp: int | None = None, order: int = 4) -> SplineField:
    """Quasi-interpolant of ``target`` in ``space``.

    Parameters
    ----------
    target
        A :class:`~phasefield.targets.Target`, a plain callable on ``(N, d)``
        points, or a sequence of those (one per component).
    order
        Gauss points per element and direction used to sample the target.
    """
    pts = sample_points(space, order)
    comps = list(target) if isinstance(target, (list, tuple)) else [target]
    if ncomp is not None and len(comps) == 1 and ncomp > 1:
        comps = [(target, k) for k in range(ncomp)]
    coeffs = []
    for t in comps:
        if isinstance(t, tuple):
            F = sample_grid(t[0], pts, (0,) * space.dim, comp=t[1])
        else:
            F = sample_grid(t, pts, (0,) * space.dim)
        coeffs.append(_project_samples(space, F, order))
    return SplineField(space, np.asarray(coeffs))


# ---------------------------------------------------------------------------
# Error reporting
# ---------------------------------------------------------------------------
def _derivative_orders(d: int, k: int):
    """Multi-indices of order ``k`` together with their multiplicity in the Frobenius norm."""
    if k == 0:
        return [((0,) * d, 1.0)]
    if k == 1:
        return [(tuple(int(a == b) for a in range(d)), 1.0) for b in range(d)]
    out = []
    for b in range(d):
        for c in range(b, d):
            o = tuple(int(a == b) + int(a == c) for a in range(d))
            out.append((o, 1.0 if b == c else 2.0))
    return out


def _elementwise(space: SplineSpace, vals: np.ndarray, q: int) -> np.ndarray:
    shape = []
    for n in vals.shape:
        shape += [n // q, q]
    return vals.reshape(shape).sum(axis=tuple(range(1, 2 * vals.ndim, 2)))


def seminorms_sq(space: SplineSpace, f, rule: QuadratureRule | None = None, g=None) -> np.ndarray:
    """Per-element squared H^k seminorms (k = 0, 1, 2) of ``f - g`` (or of ``f``).

    Returns an array of shape ``(3, *n_elements)``.
    """
    rule = rule or QuadratureRule()
    q = rule.order
    xs, ws = zip(*(space.quadrature_points(rule, a) for a in range(space.dim)))
    W = ws[0] if space.dim == 1 else np.outer(ws[0], ws[1])
    out = []
    for k in range(3):
        acc = np.zeros(space.n_elements)
        for orders, mult in _derivative_orders(space.dim, k):
            diff = sample_grid(f, xs, orders)
            if g is not None:
                diff = diff - sample_grid(g, xs, orders)
            acc = acc + mult * _elementwise(space, diff**2 * W, q)
        out.append(acc)
    return np.asarray(out)


@dataclass
class ProjectionReport:
    """Per-element and global approximation errors of a projection."""

    element_ids: np.ndarray
    h_K: np.ndarray
    element_errors: np.ndarray  # (n_elements_total, 3): |v - Pv|_{H^k(K)}, k = 0, 1, 2

    @property
    def global_errors(self) -> np.ndarray:
        """Global ``(L2, H1, H2)`` seminorm errors."""
        return np.sqrt(np.sum(self.element_errors**2, axis=0))

    @property
    def h(self) -> float:
        return float(self.h_K.max())

    def rows(self) -> list[dict]:
        return [
            {"element": eid, "h_K": float(h), "err_L2": float(e[0]), "err_H1": float(e[1]), "err_H2": float(e[2])}
            for eid, h, e in zip(self.element_ids, self.h_K, self.element_errors)
        ]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["element", "h_K", "err_L2", "err_H1", "err_H2"])
            writer.writeheader()
            for r in self.rows():
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _element_ids_and_sizes(space: SplineSpace):
    ids = [":".join(map(str, e)) for e in space.elements()]
    sizes = [space.element_sizes(a) for a in range(space.dim)]
    if space.dim == 1:
        h = sizes[0]
    else:
        h = np.sqrt(np.add.outer(sizes[0] ** 2, sizes[1] ** 2)).ravel()
    return np.array(ids), np.asarray(h)


def error_report(space: SplineSpace, target, projected: SplineField, rule: QuadratureRule | None = None) -> ProjectionReport:
    """Per-element H^k errors (k = 0, 1, 2) of ``projected`` against ``target``.

    The target must provide derivatives up to order two.
    """
    sq = seminorms_sq(space, target, rule, projected)
    errs = np.sqrt(np.maximum(sq, 0.0)).reshape(3, -1).T
    ids, h = _element_ids_and_sizes(space)
    return ProjectionReport(ids, h, errs)


# ---------------------------------------------------------------------------
# Local sup-norm estimate
# ---------------------------------------------------------------------------
@dataclass
class SupNormCheck:
    lhs: np.ndarray  # sampled sup |z| per element
    rhs: np.ndarray  # (h^-d |z|_0^2 + h^{2-d} |z|_1^2 + h^{4-d} |z|_2^2)^{1/2} per element
    ratio: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(self.ratio.max()) if self.ratio.size else 0.0


def sup_norm_estimate_check(space: SplineSpace, z, rule: QuadratureRule | None = None, samples: int = 9) -> SupNormCheck:
    """Compare the element sup-norm of ``z`` with its scaled H^2 bound.

    The bound scales with the element size as in the inverse estimate for
    H^2 functions in dimension ``d``; ``ratio = lhs / rhs`` (0 where both vanish).
    """
    rule = rule or QuadratureRule()
    sq = seminorms_sq(space, z, rule)
    d = space.dim
    hs = [space.element_sizes(a) for a in range(d)]
    h = hs[0] if d == 1 else np.maximum.outer(hs[0], hs[1])
    rhs = np.sqrt(h ** (-d) * sq[0] + h ** (2 - d) * sq[1] + h ** (4 - d) * sq[2])
    t = np.linspace(0.0, 1.0, samples)
    xs = []
    for a in range(d):
        bp = space.element_bounds(a)
        xs.append((bp[:-1, None] + np.diff(bp)[:, None] * t[None, :]).ravel())
    vals = np.abs(sample_grid(z, xs, (0,) * d))
    shape = []
    for n in vals.shape:
        shape += [n // samples, samples]
    lhs = vals.reshape(shape).max(axis=tuple(range(1, 2 * d, 2)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
    return SupNormCheck(lhs.ravel(), rhs.ravel(), ratio.ravel())
