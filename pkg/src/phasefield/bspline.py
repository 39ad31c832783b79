"""Open-knot quadratic B-spline spaces in one and two dimensions.

Basis evaluation follows the Cox-de Boor recursion (Piegl & Tiller, The NURBS
Book, algorithms A2.1-A2.3), vectorised over evaluation points. Tensor-product
spaces are built from one knot vector per axis; fields on them store their
coefficients as ``(ncomp, n_1[, n_2])`` arrays so that evaluation on tensor
grids reduces to a pair of sparse matrix products.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DomainError",
    "KnotVector",
    "GeometryMap",
    "SplineSpace",
    "SplineField",
    "QuadratureRule",
    "eval_basis",
    "eval_field",
    "eval_field_grid",
    "extended_support",
    "integrate",
    "uniform_space",
]

_TOL = 1e-12


class DomainError(ValueError):
    """Evaluation point lies outside the patch."""


# ---------------------------------------------------------------------------
# 1D building blocks
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class KnotVector:
    """Open (clamped) knot vector on [0, 1].

    Interior knots must be simple so that the spline space is C^{p-1}; for
    the fixed degree 2 this gives C^1, hence H^2-conforming fields.
    """

    knots: np.ndarray
    degree: int = 2

    def __post_init__(self):
        kv = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", kv)
        p = self.degree
        if p != 2:
            raise ValueError("only quadratic splines (degree 2) are supported")
        if np.any(np.diff(kv) < 0):
            raise ValueError("knots must be nondecreasing")
        if not (np.all(kv[: p + 1] == 0.0) and np.all(kv[-p - 1:] == 1.0)):
            raise ValueError("knot vector must be open on [0, 1]")
        interior = kv[p + 1: -p - 1]
        if interior.size and (np.any(np.diff(interior) == 0) or interior[0] == 0 or interior[-1] == 1):
            raise ValueError("interior knots must be simple (C^1 continuity)")

    @classmethod
    def uniform(cls, n_elements: int, degree: int = 2) -> "KnotVector":
        if n_elements < 1:
            raise ValueError("need at least one element")
        inner = np.linspace(0.0, 1.0, n_elements + 1)
        kv = np.concatenate([np.zeros(degree), inner, np.ones(degree)])
        return cls(kv, degree)

    @cached_property
    def breakpoints(self) -> np.ndarray:
        return self.knots[self.degree: -self.degree]

    @property
    def n_elements(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @cached_property
    def element_widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def shape_regularity(self) -> float:
        """Ratio of the largest to the smallest element width."""
        w = self.element_widths
        return float(w.max() / w.min())

    @cached_property
    def greville(self) -> np.ndarray:
        p = self.degree
        kv = self.knots
        return np.array([kv[i + 1: i + p + 1].mean() for i in range(self.n_basis)])

    def element_of(self, x: np.ndarray) -> np.ndarray:
        """Element index containing each point (right end belongs to the last element)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < -_TOL) or np.any(x > 1 + _TOL):
            raise DomainError("point outside the patch [0, 1]")
        e = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(e, 0, self.n_elements - 1)

    def basis_support(self, i: int) -> tuple[int, int]:
        """First and last element (inclusive) on which basis function ``i`` is nonzero."""
        p = self.degree
        return max(i - p, 0), min(i, self.n_elements - 1)

    def basis_ders(self, x: np.ndarray, nder: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero basis functions and derivatives at ``x``.

        Returns
        -------
        first : (npts,) int
            Index of the first nonzero basis function (the others follow).
        ders : (npts, nder + 1, degree + 1)
            ``ders[:, k, j]`` is the k-th derivative of basis ``first + j``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.degree
        kv = self.knots
        e = self.element_of(x)
        span = e + p
        x = np.clip(x, 0.0, 1.0)
        npts = x.size
        ndu = np.zeros((npts, p + 1, p + 1))
        ndu[:, 0, 0] = 1.0
        left = np.zeros((npts, p + 1))
        right = np.zeros((npts, p + 1))
        for j in range(1, p + 1):
            left[:, j] = x - kv[span + 1 - j]
            right[:, j] = kv[span + j] - x
            saved = np.zeros(npts)
            for r in range(j):
                ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
                temp = ndu[:, r, j - 1] / ndu[:, j, r]
                ndu[:, r, j] = saved + right[:, r + 1] * temp
                saved = left[:, j - r] * temp
            ndu[:, j, j] = saved
        ders = np.zeros((npts, nder + 1, p + 1))
        ders[:, 0, :] = ndu[:, :, p]
        a = np.zeros((npts, 2, p + 1))
        for r in range(p + 1):
            s1, s2 = 0, 1
            a[:] = 0.0
            a[:, 0, 0] = 1.0
            for k in range(1, nder + 1):
                d = np.zeros(npts)
                rk = r - k
                pk = p - k
                if r >= k:
                    a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                    d = a[:, s2, 0] * ndu[:, rk, pk]
                j1 = 1 if rk >= -1 else -rk
                j2 = k - 1 if r - 1 <= pk else p - r
                for j in range(j1, j2 + 1):
                    a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                    d = d + a[:, s2, j] * ndu[:, rk + j, pk]
                if r <= pk:
                    a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                    d = d + a[:, s2, k] * ndu[:, r, pk]
                ders[:, k, r] = d
                s1, s2 = s2, s1
        fac = p
        for k in range(1, nder + 1):
            ders[:, k, :] *= fac
            fac *= p - k
        return e, ders

    def basis_matrix(self, x: np.ndarray, deriv: int = 0) -> sp.csr_matrix:
        """Sparse ``(npts, n_basis)`` matrix of the ``deriv``-th basis derivatives at ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        first, ders = self.basis_ders(x, deriv)
        p = self.degree
        rows = np.repeat(np.arange(x.size), p + 1)
        cols = (first[:, None] + np.arange(p + 1)).ravel()
        return sp.csr_matrix((ders[:, deriv, :].ravel(), (rows, cols)), shape=(x.size, self.n_basis))


@dataclass(frozen=True)
class GeometryMap:
    """Axis-aligned affine map from the parametric patch (0,1)^d to a box.

    ``x = origin + lengths * xi``. The identity map is the default; the
    Jacobian is constant and second derivatives of the map vanish.
    """

    origin: tuple[float, ...] = (0.0,)
    lengths: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if len(self.origin) != len(self.lengths):
            raise ValueError("origin and lengths must have the same dimension")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("Jacobian must be positive definite")

    @classmethod
    def identity(cls, dim: int) -> "GeometryMap":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    def jacobian(self) -> np.ndarray:
        return np.diag(self.lengths)

    def hessian(self) -> np.ndarray:
        d = self.dim
        return np.zeros((d, d, d))

    @property
    def det(self) -> float:
        return float(np.prod(self.lengths))

    def to_param(self, x: np.ndarray, axis: int) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.origin[axis]) / self.lengths[axis]

    def to_phys(self, xi: np.ndarray, axis: int) -> np.ndarray:
        return self.origin[axis] + self.lengths[axis] * np.asarray(xi, dtype=float)


# ---------------------------------------------------------------------------
# Tensor-product space and fields
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SplineSpace:
    axes: tuple[KnotVector, ...]
    geometry: GeometryMap = None

    def __post_init__(self):
        if len(self.axes) not in (1, 2):
            raise ValueError("only 1D and 2D patches are supported")
        if self.geometry is None:
            object.__setattr__(self, "geometry", GeometryMap.identity(len(self.axes)))
        if self.geometry.dim != len(self.axes):
            raise ValueError("geometry dimension does not match the number of axes")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def degree(self) -> int:
        return self.axes[0].degree

    @property
    def n_basis(self) -> tuple[int, ...]:
        return tuple(kv.n_basis for kv in self.axes)

    @property
    def n_dofs(self) -> int:
        return int(np.prod(self.n_basis))

    @property
    def n_elements(self) -> tuple[int, ...]:
        return tuple(kv.n_elements for kv in self.axes)

    def elements(self):
        """Element multi-indices in the fixed (C) order used by every reduction."""
        return itertools.product(*(range(n) for n in self.n_elements))

    def element_sizes(self, axis: int) -> np.ndarray:
        return self.axes[axis].element_widths * self.geometry.lengths[axis]

    @property
    def h(self) -> float:
        """Largest physical element edge."""
        return float(max(self.element_sizes(a).max() for a in range(self.dim)))

    def element_bounds(self, axis: int) -> np.ndarray:
        return self.geometry.to_phys(self.axes[axis].breakpoints, axis)

    def bounds(self) -> list[tuple[float, float]]:
        g = self.geometry
        return [(g.origin[a], g.origin[a] + g.lengths[a]) for a in range(self.dim)]

    def basis_matrix(self, axis: int, x: np.ndarray, deriv: int = 0) -> sp.csr_matrix:
        """Per-axis basis matrix at physical coordinates, derivatives in physical units."""
        xi = self.geometry.to_param(x, axis)
        B = self.axes[axis].basis_matrix(xi, deriv)
        if deriv:
            B = B * (self.geometry.lengths[axis] ** -deriv)
        return B.tocsr()

    def quadrature_points(self, rule: "QuadratureRule", axis: int) -> tuple[np.ndarray, np.ndarray]:
        """Gauss points and weights on every element of ``axis`` (element-major order)."""
        bp = self.element_bounds(axis)
        a, b = bp[:-1], bp[1:]
        x = a[:, None] + (b - a)[:, None] * rule.nodes[None, :]
        w = (b - a)[:, None] * rule.weights[None, :]
        return x.ravel(), w.ravel()

    def basis_ders_grid(self, axis_points: list[np.ndarray], max_deriv: int = 2) -> list[list[sp.csr_matrix]]:
        return [[self.basis_matrix(a, axis_points[a], k) for k in range(max_deriv + 1)] for a in range(self.dim)]

    def kron_basis(self, axis_points: list[np.ndarray], deriv: tuple[int, ...]) -> sp.csr_matrix:
        """Global ``(npts, n_dofs)`` basis matrix on the tensor grid ``axis_points``."""
        mats = [self.basis_matrix(a, axis_points[a], deriv[a]) for a in range(self.dim)]
        out = mats[0]
        for M in mats[1:]:
            out = sp.kron(out, M, format="csr")
        return out.tocsr()


def uniform_space(n_elements, dim: int | None = None, geometry: GeometryMap | None = None) -> SplineSpace:
    """Quadratic space with uniform open knot vectors (``n_elements`` per axis)."""
    if np.isscalar(n_elements):
        n_elements = (int(n_elements),) * (dim or 1)
    axes = tuple(KnotVector.uniform(int(n)) for n in n_elements)
    return SplineSpace(axes, geometry)


@dataclass(frozen=True, eq=False)
class SplineField:
    """Coefficients over a :class:`SplineSpace`; ``coeffs`` has shape ``(ncomp, *n_basis)``."""

    space: SplineSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        nb = self.space.n_basis
        if c.shape == nb:
            c = c[None]
        if c.ndim != len(nb) + 1 or c.shape[1:] != nb:
            raise ValueError(f"coefficient array of shape {c.shape} does not match space {nb}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, space: SplineSpace, value: float = 0.0, ncomp: int = 1) -> "SplineField":
        return cls(space, np.full((ncomp, *space.n_basis), float(value)))

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    @property
    def flat(self) -> np.ndarray:
        """Coefficients of a scalar field as a flat vector in C order."""
        return self.coeffs.reshape(self.ncomp, -1)[0] if self.ncomp == 1 else self.coeffs.reshape(self.ncomp, -1)

    def with_coeffs(self, coeffs: np.ndarray) -> "SplineField":
        return SplineField(self.space, np.asarray(coeffs).reshape(self.coeffs.shape))

    def __add__(self, other: "SplineField") -> "SplineField":
        _check_same_space(self, other)
        return SplineField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "SplineField") -> "SplineField":
        _check_same_space(self, other)
        return SplineField(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a: float) -> "SplineField":
        return SplineField(self.space, self.coeffs * float(a))

    __rmul__ = __mul__

    def __call__(self, x) -> np.ndarray:
        v = eval_field(self, x, 0)
        return v[0] if self.ncomp == 1 else v


def _check_same_space(f: SplineField, g: SplineField):
    if f.space is not g.space and (f.space.n_basis != g.space.n_basis or f.ncomp != g.ncomp):
        raise ValueError("fields live on incompatible spaces")


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule with ``order`` points per direction and element.

    Exact for polynomials of degree ``2*order - 1`` on each element.
    """

    order: int = 4

    @cached_property
    def _rule(self):
        x, w = np.polynomial.legendre.leggauss(self.order)
        return 0.5 * (x + 1.0), 0.5 * w

    @property
    def nodes(self) -> np.ndarray:
        return self._rule[0]

    @property
    def weights(self) -> np.ndarray:
        return self._rule[1]


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------
def _as_points(space: SplineSpace, x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if space.dim == 1:
        pts = pts.reshape(-1, 1)
    else:
        pts = np.atleast_2d(pts)
        if pts.shape[-1] != space.dim:
            raise ValueError(f"points must have {space.dim} coordinates")
    return pts


def eval_basis(space: SplineSpace, x, deriv: int = 0):
    """Nonzero basis functions at a single point.

    Returns ``(indices, values)`` where ``indices`` is an ``((p+1)^d, d)`` array
    of basis multi-indices and ``values`` has shape ``((p+1)^d,)`` for
    ``deriv=0``, ``((p+1)^d, d)`` for gradients and ``((p+1)^d, d, d)`` for
    Hessians.
    """
    if deriv not in (0, 1, 2):
        raise ValueError("derivative order must be 0, 1 or 2")
    pt = _as_points(space, x)
    if pt.shape[0] != 1:
        raise ValueError("eval_basis takes a single point")
    pt = pt[0]
    p = space.degree
    firsts, ders = [], []
    for a in range(space.dim):
        xi = space.geometry.to_param(pt[a], a)
        first, d = space.axes[a].basis_ders(np.array([xi]), 2)
        scale = space.geometry.lengths[a] ** -np.arange(3)
        firsts.append(int(first[0]))
        ders.append(d[0] * scale[:, None])
    local = list(itertools.product(range(p + 1), repeat=space.dim))
    idx = np.array([[firsts[a] + loc[a] for a in range(space.dim)] for loc in local])

    def comp(loc, orders):
        return np.prod([ders[a][orders[a], loc[a]] for a in range(space.dim)])

    d = space.dim
    if deriv == 0:
        vals = np.array([comp(loc, (0,) * d) for loc in local])
    elif deriv == 1:
        vals = np.array([[comp(loc, tuple(int(a == b) for a in range(d))) for b in range(d)] for loc in local])
    else:
        vals = np.array([
            [[comp(loc, tuple(int(a == b) + int(a == c) for a in range(d))) for c in range(d)] for b in range(d)]
            for loc in local
        ])
    return idx, vals


def _deriv_index(d: int, deriv: int) -> list[tuple[int, ...]]:
    if deriv == 0:
        return [(0,) * d]
    if deriv == 1:
        return [tuple(int(a == b) for a in range(d)) for b in range(d)]
    return [tuple(int(a == b) + int(a == c) for a in range(d)) for b in range(d) for c in range(d)]


def eval_field(f: SplineField, x, deriv: int = 0) -> np.ndarray:
    """Evaluate a field at scattered points.

    Returns ``(ncomp, npts)`` values, ``(ncomp, npts, d)`` gradients or
    ``(ncomp, npts, d, d)`` Hessians.
    """
    if deriv not in (0, 1, 2):
        raise ValueError("quadratic splines support derivatives up to order 2 only")
    space = f.space
    pts = _as_points(space, x)
    d = space.dim
    npts = pts.shape[0]
    p = space.degree
    per_axis = []
    for a in range(d):
        xi = space.geometry.to_param(pts[:, a], a)
        first, ders = space.axes[a].basis_ders(xi, deriv)
        ders = ders * (space.geometry.lengths[a] ** -np.arange(deriv + 1))[None, :, None]
        per_axis.append((first, ders))
    out = []
    for orders in _deriv_index(d, deriv):
        if d == 1:
            first, ders = per_axis[0]
            idx = first[:, None] + np.arange(p + 1)
            vals = np.einsum("nj,cnj->cn", ders[:, orders[0], :], f.coeffs[:, idx])
        else:
            (f0, d0), (f1, d1) = per_axis
            i0 = f0[:, None] + np.arange(p + 1)
            i1 = f1[:, None] + np.arange(p + 1)
            C = f.coeffs[:, i0[:, :, None], i1[:, None, :]]
            vals = np.einsum("ni,nj,cnij->cn", d0[:, orders[0], :], d1[:, orders[1], :], C)
        out.append(vals)
    res = np.stack(out, axis=-1)
    if deriv == 0:
        return res[..., 0]
    if deriv == 2:
        return res.reshape(f.ncomp, npts, d, d)
    return res


def _apply_tensor(coeffs: np.ndarray, mats: list[sp.csr_matrix]) -> np.ndarray:
    """Apply per-axis matrices to every component of a coefficient array."""
    out = []
    for c in coeffs:
        if len(mats) == 1:
            out.append(mats[0] @ c)
        else:
            tmp = mats[0] @ c
            out.append((mats[1] @ tmp.T).T)
    return np.asarray(out)


def eval_field_grid(f: SplineField, axis_points: list[np.ndarray], orders: tuple[int, ...]) -> np.ndarray:
    """Partial derivative of multi-order ``orders`` on a tensor grid; shape ``(ncomp, n_1[, n_2])``."""
    if sum(orders) > 2:
        raise ValueError("quadratic splines support derivatives up to order 2 only")
    mats = [f.space.basis_matrix(a, axis_points[a], orders[a]) for a in range(f.space.dim)]
    return _apply_tensor(f.coeffs, mats)


def extended_support(space: SplineSpace, element: tuple[int, ...] | int) -> set[tuple[int, ...]]:
    """Union of the supports of all basis functions whose support meets ``element``."""
    if np.isscalar(element):
        element = (int(element),)
    if len(element) != space.dim:
        raise ValueError("element index has wrong dimension")
    ranges = []
    p = space.degree
    for a, e in enumerate(element):
        kv = space.axes[a]
        if not 0 <= e < kv.n_elements:
            raise ValueError("element outside the mesh")
        lo, hi = e, e
        for i in range(e, e + p + 1):
            s0, s1 = kv.basis_support(i)
            lo, hi = min(lo, s0), max(hi, s1)
        ranges.append(range(lo, hi + 1))
    return set(itertools.product(*ranges))


def integrate(space: SplineSpace, rule: QuadratureRule, integrand) -> float:
    """Integrate ``integrand(points) -> values`` over the physical patch.

    Element contributions are formed first and reduced in element order.
    """
    d = space.dim
    q = rule.order
    xs, ws = zip(*(space.quadrature_points(rule, a) for a in range(d)))
    if d == 1:
        pts = xs[0][:, None]
        wgt = ws[0]
    else:
        X0, X1 = np.meshgrid(xs[0], xs[1], indexing="ij")
        pts = np.column_stack([X0.ravel(), X1.ravel()])
        wgt = np.outer(ws[0], ws[1]).ravel()
    vals = np.asarray(integrand(pts), dtype=float).reshape(-1)
    contrib = (vals * wgt).reshape(*[n for ne in space.n_elements for n in (ne, q)])
    per_element = contrib.sum(axis=tuple(range(1, 2 * d, 2)))
    return float(np.sum(per_element.ravel()))
