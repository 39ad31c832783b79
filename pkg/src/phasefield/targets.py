"""Analytic target functions with derivatives.

Projection, error reporting, classification and energy evaluation all sample
functions on tensor grids of points. A target exposes pointwise evaluation of
its value, gradient and Hessian; targets that factor along the coordinate axes
additionally evaluate directly on tensor grids, which avoids forming the full
point cloud for large meshes.
"""
from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

__all__ = ["Target", "FunctionTarget", "SeparableTarget", "sample_grid", "grid_points"]


def grid_points(axis_points: Sequence[np.ndarray]) -> np.ndarray:
    """Cartesian product of per-axis points as an ``(N, d)`` array in C order."""
    if len(axis_points) == 1:
        return np.asarray(axis_points[0], dtype=float)[:, None]
    mesh = np.meshgrid(*axis_points, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


class Target:
    """Base class for scalar targets on (a box in) R^d."""

    dim: int = 1

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} provides no gradient")

    def hess(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} provides no Hessian")

    def partial(self, pts: np.ndarray, orders: tuple[int, ...]) -> np.ndarray:
        """Mixed partial derivative of multi-order ``orders`` at ``pts``."""
        k = sum(orders)
        if k == 0:
            return np.asarray(self(pts), dtype=float)
        nz = [a for a, o in enumerate(orders) for _ in range(o)]
        if k == 1:
            return self.grad(pts)[:, nz[0]]
        if k == 2:
            return self.hess(pts)[:, nz[0], nz[1]]
        raise ValueError("derivatives up to order 2 only")

    def on_grid(self, axis_points: Sequence[np.ndarray], orders: tuple[int, ...]) -> np.ndarray:
        pts = grid_points(axis_points)
        shape = tuple(len(p) for p in axis_points)
        return self.partial(pts, orders).reshape(shape)


class FunctionTarget(Target):
    """Wrap plain callables ``f(pts)``, ``grad(pts)``, ``hess(pts)`` on ``(N, d)`` arrays."""

    def __init__(self, f: Callable, grad: Callable | None = None, hess: Callable | None = None, dim: int = 1):
        self._f, self._grad, self._hess = f, grad, hess
        self.dim = dim

    def __call__(self, pts):
        return np.asarray(self._f(np.atleast_2d(pts)), dtype=float)

    def grad(self, pts):
        if self._grad is None:
            return super().grad(pts)
        return np.asarray(self._grad(np.atleast_2d(pts)), dtype=float).reshape(-1, self.dim)

    def hess(self, pts):
        if self._hess is None:
            return super().hess(pts)
        return np.asarray(self._hess(np.atleast_2d(pts)), dtype=float).reshape(-1, self.dim, self.dim)


class SeparableTarget(Target):
    """``constant + sum_k prod_a f_{k,a}(x_a)`` with 1D factors ``f(x, deriv)``.

    Each factor is a callable taking a 1D array and a derivative order (0..2)
    and returning an array of the same length.
    """

    def __init__(self, terms: Sequence[Sequence[Callable]], constant: float = 0.0):
        self.terms = [tuple(t) for t in terms]
        dims = {len(t) for t in self.terms}
        if len(dims) > 1:
            raise ValueError("all terms need one factor per axis")
        self.dim = dims.pop() if dims else 1
        self.constant = float(constant)

    def on_grid(self, axis_points, orders):
        shape = tuple(len(p) for p in axis_points)
        out = np.full(shape, self.constant if sum(orders) == 0 else 0.0)
        for factors in self.terms:
            vals = [np.asarray(f(np.asarray(x, dtype=float), o), dtype=float)
                    for f, x, o in zip(factors, axis_points, orders)]
            out = out + (vals[0] if len(vals) == 1 else np.multiply.outer(vals[0], vals[1]))
        return out

    def partial(self, pts, orders):
        pts = np.atleast_2d(pts)
        out = np.full(pts.shape[0], self.constant if sum(orders) == 0 else 0.0)
        for factors in self.terms:
            prod = np.ones(pts.shape[0])
            for a, (f, o) in enumerate(zip(factors, orders)):
                prod = prod * f(pts[:, a], o)
            out = out + prod
        return out

    def __call__(self, pts):
        return self.partial(pts, (0,) * self.dim)

    def grad(self, pts):
        d = self.dim
        return np.column_stack([self.partial(pts, tuple(int(a == b) for a in range(d))) for b in range(d)])

    def hess(self, pts):
        d = self.dim
        pts = np.atleast_2d(pts)
        H = np.empty((pts.shape[0], d, d))
        for b, c in itertools.product(range(d), repeat=2):
            H[:, b, c] = self.partial(pts, tuple(int(a == b) + int(a == c) for a in range(d)))
        return H


def sample_grid(obj, axis_points: Sequence[np.ndarray], orders: tuple[int, ...], comp: int = 0) -> np.ndarray:
    """Partial derivative of a target or spline field on a tensor grid."""
    from .bspline import SplineField, eval_field_grid

    if isinstance(obj, SplineField):
        return eval_field_grid(obj, list(axis_points), orders)[comp]
    if isinstance(obj, Target):
        return np.asarray(obj.on_grid(axis_points, orders), dtype=float)
    if sum(orders) != 0:
        raise TypeError("plain callables only provide values; wrap them in FunctionTarget")
    shape = tuple(len(p) for p in axis_points)
    vals = np.asarray(obj(grid_points(axis_points)), dtype=float)
    if vals.ndim == 2:
        vals = vals[:, comp]
    return vals.reshape(shape)
