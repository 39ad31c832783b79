import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasefield.bspline import (DomainError, GeometryMap, KnotVector, QuadratureRule, SplineField, eval_basis,
                                eval_field, eval_field_grid, extended_support, integrate, uniform_space)


def cox_de_boor(knots, i, p, x):
    """Textbook recursion, half-open spans."""
    if p == 0:
        return 1.0 if knots[i] <= x < knots[i + 1] else 0.0
    out = 0.0
    if knots[i + p] > knots[i]:
        out += (x - knots[i]) / (knots[i + p] - knots[i]) * cox_de_boor(knots, i, p - 1, x)
    if knots[i + p + 1] > knots[i + 1]:
        out += (knots[i + p + 1] - x) / (knots[i + p + 1] - knots[i + 1]) * cox_de_boor(knots, i + 1, p - 1, x)
    return out


class TestKnotVector:
    def test_uniform_layout(self):
        kv = KnotVector.uniform(4)
        assert kv.n_elements == 4
        assert kv.n_basis == 6
        np.testing.assert_allclose(kv.breakpoints, np.linspace(0, 1, 5))
        assert kv.shape_regularity == pytest.approx(1.0)

    @pytest.mark.parametrize("knots", [
        [0, 0, 0.5, 1, 1, 1],          # first knot not repeated p+1 times
        [0, 0, 0, 0.6, 0.4, 1, 1, 1],  # decreasing
        [0, 0, 0, 0.5, 0.5, 1, 1, 1],  # double interior knot breaks C1
    ])
    def test_rejects_bad_knots(self, knots):
        with pytest.raises(ValueError):
            KnotVector(np.array(knots, float))

    def test_matches_cox_de_boor(self):
        kv = KnotVector(np.array([0, 0, 0, 0.1, 0.35, 0.5, 0.8, 1, 1, 1.0]))
        xs = np.linspace(0, 0.999, 77)
        B = kv.basis_matrix(xs).toarray()
        ref = np.array([[cox_de_boor(kv.knots, i, 2, x) for i in range(kv.n_basis)] for x in xs])
        np.testing.assert_allclose(B, ref, atol=1e-14)

    def test_cardinal_center_value(self):
        kv = KnotVector.uniform(8)
        # basis 3 has support [1/8, 4/8]; its centre is 2.5/8
        x = 2.5 / 8
        assert kv.basis_matrix(np.array([x])).toarray()[0, 3] == pytest.approx(0.75, abs=1e-15)
        assert cox_de_boor(kv.knots, 3, 2, x) == pytest.approx(0.75, abs=1e-15)

    def test_derivatives_against_differences(self):
        kv = KnotVector.uniform(7)
        x = np.linspace(0.013, 0.98, 41)
        hstep = 1e-6
        for k in (1, 2):
            lo = kv.basis_matrix(x - hstep, k - 1).toarray()
            hi = kv.basis_matrix(x + hstep, k - 1).toarray()
            # skip points where the FD stencil straddles a knot for the 2nd derivative
            ok = np.abs(x * 7 - np.round(x * 7)) > 1e-4
            np.testing.assert_allclose(kv.basis_matrix(x, k).toarray()[ok], ((hi - lo) / (2 * hstep))[ok], atol=1e-5)

    def test_greville_reproduces_identity(self):
        kv = KnotVector(np.array([0, 0, 0, 0.2, 0.3, 0.7, 1, 1, 1.0]))
        x = np.linspace(0, 1, 501)
        np.testing.assert_allclose(kv.basis_matrix(x) @ kv.greville, x, atol=1e-14)


def test_partition_of_unity_random_points():
    rng = np.random.default_rng(7)
    space = uniform_space((9, 5))
    pts = rng.random((10_000, 2))
    vals = eval_field(SplineField.constant(space, 1.0), pts)[0]
    assert np.abs(vals - 1).max() < 1e-12
    for p in pts[:50]:
        _, v = eval_basis(space, p, 0)
        assert v.shape == (9,)
        assert abs(v.sum() - 1) < 1e-12
        _, g = eval_basis(space, p, 1)
        np.testing.assert_allclose(g.sum(axis=0), 0, atol=1e-10)


def test_eval_basis_domain_error():
    space = uniform_space(4, 1)
    with pytest.raises(DomainError):
        eval_basis(space, np.array([1.2]))
    with pytest.raises(ValueError):
        eval_field(SplineField.constant(space, 1.0), np.array([0.5]), deriv=3)


def test_constant_zero_and_greville_fields():
    space = uniform_space(6, 1)
    x = np.linspace(0, 1, 301)
    c = SplineField.constant(space, 2.5)
    np.testing.assert_allclose(eval_field(c, x)[0], 2.5, rtol=1e-15)
    np.testing.assert_allclose(eval_field(c, x, 1), 0, atol=1e-12)
    np.testing.assert_allclose(eval_field(c, x, 2), 0, atol=1e-10)
    z = SplineField.constant(space, 0.0)
    assert not eval_field(z, x).any()
    lin = SplineField(space, space.axes[0].greville[None, :])
    np.testing.assert_allclose(eval_field(lin, x)[0], x, atol=1e-14)
    np.testing.assert_allclose(eval_field(lin, x, 1)[0, :, 0], 1.0, atol=1e-12)


def test_hessian_symmetric_and_c1_at_knots():
    rng = np.random.default_rng(3)
    space = uniform_space((6, 6))
    f = SplineField(space, rng.standard_normal((1, 8, 8)))
    H = eval_field(f, rng.random((100, 2)), 2)[0]
    np.testing.assert_allclose(H, H.transpose(0, 2, 1), atol=1e-12)
    knots = np.arange(1, 6) / 6
    y = 0.37
    left = np.column_stack([knots - 1e-13, np.full(5, y)])
    right = np.column_stack([knots + 1e-13, np.full(5, y)])
    np.testing.assert_allclose(eval_field(f, left), eval_field(f, right), atol=1e-10)
    np.testing.assert_allclose(eval_field(f, left, 1), eval_field(f, right, 1), atol=1e-10)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2), st.integers(0, 1000))
def test_eval_field_linear(a, b, deriv, seed):
    rng = np.random.default_rng(seed)
    space = uniform_space((4, 5))
    f = SplineField(space, rng.standard_normal((1, 6, 7)))
    g = SplineField(space, rng.standard_normal((1, 6, 7)))
    x = rng.random((20, 2))
    lhs = eval_field(a * f + b * g, x, deriv)
    rhs = a * eval_field(f, x, deriv) + b * eval_field(g, x, deriv)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


@given(st.floats(-2, 0), st.floats(0, 3), st.integers(0, 1000))
def test_convex_hull(lo, width, seed):
    rng = np.random.default_rng(seed)
    space = uniform_space(11, 1)
    coeffs = lo + width * rng.random((1, 13))
    vals = eval_field(SplineField(space, coeffs), np.linspace(0, 1, 999))[0]
    assert vals.min() >= lo - 1e-12
    assert vals.max() <= lo + width + 1e-12


def test_grid_evaluation_matches_scattered():
    rng = np.random.default_rng(11)
    space = uniform_space((5, 7))
    f = SplineField(space, rng.standard_normal((1, 7, 9)))
    xs = [np.linspace(0, 1, 13), np.linspace(0, 1, 9)]
    X, Y = np.meshgrid(*xs, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    np.testing.assert_allclose(eval_field_grid(f, xs, (0, 0))[0].ravel(), eval_field(f, pts)[0], atol=1e-13)
    np.testing.assert_allclose(eval_field_grid(f, xs, (1, 1))[0].ravel(), eval_field(f, pts, 2)[0, :, 0, 1],
                               atol=1e-10)


class TestExtendedSupport:
    def test_interior_1d(self):
        space = uniform_space(10, 1)
        assert extended_support(space, 5) == {(i,) for i in range(3, 8)}

    def test_boundary_1d(self):
        space = uniform_space(10, 1)
        assert extended_support(space, 0) == {(0,), (1,), (2,)}
        assert extended_support(space, 9) == {(7,), (8,), (9,)}

    def test_product_2d(self):
        space = uniform_space((10, 6))
        e = extended_support(space, (4, 1))
        ex = {i for (i,) in extended_support(uniform_space(10, 1), 4)}
        ey = {j for (j,) in extended_support(uniform_space(6, 1), 1)}
        assert e == {(i, j) for i in ex for j in ey}

    def test_matches_basis_support_oracle(self):
        kv = KnotVector.uniform(9)
        space = uniform_space(9, 1)
        x = np.linspace(0, 1, 9001)[:-1]
        B = kv.basis_matrix(x).toarray()
        elem = np.minimum((x * 9).astype(int), 8)
        for K in range(9):
            touching = np.nonzero(B[elem == K].any(axis=0))[0]
            oracle = set(elem[np.isin(np.arange(len(x)), np.nonzero(B[:, touching].any(axis=1))[0])])
            assert {k for (k,) in extended_support(space, K)} == oracle


class TestIntegrate:
    def test_unit(self):
        for d in (1, 2):
            space = uniform_space((7,) * d)
            assert integrate(space, QuadratureRule(), lambda x: np.ones(len(x))) == pytest.approx(1, abs=1e-14)

    def test_exactness(self):
        space = uniform_space(3, 1)
        assert integrate(space, QuadratureRule(2), lambda x: x[:, 0] ** 2) == pytest.approx(1 / 3, abs=1e-15)
        rule = QuadratureRule(4)
        # 4 Gauss points are exact to degree 7
        assert integrate(space, rule, lambda x: x[:, 0] ** 7) == pytest.approx(1 / 8, abs=1e-15)

    def test_sine(self):
        space = uniform_space(16, 1)
        assert integrate(space, QuadratureRule(), lambda x: np.sin(np.pi * x[:, 0])) == pytest.approx(2 / np.pi,
                                                                                                       abs=1e-10)

    def test_deterministic(self):
        space = uniform_space((13, 17))
        fn = lambda x: np.exp(x[:, 0]) * np.cos(3 * x[:, 1])  # noqa: E731
        assert integrate(space, QuadratureRule(), fn) == integrate(space, QuadratureRule(), fn)


class TestGeometry:
    def test_affine_space(self):
        geo = GeometryMap(origin=(1.0, -2.0), lengths=(2.0, 0.5))
        space = uniform_space((4, 4), geometry=geo)
        assert geo.det == pytest.approx(1.0)
        area = integrate(space, QuadratureRule(), lambda x: np.ones(len(x)))
        assert area == pytest.approx(1.0)
        assert integrate(space, QuadratureRule(), lambda x: x[:, 0]) == pytest.approx(2.0)
        lin = SplineField(space, (1.0 + 2.0 * space.axes[0].greville)[None, :, None] * np.ones((1, 6, 6)))
        g = eval_field(lin, np.array([[2.1, -1.8]]), 1)[0, 0]
        np.testing.assert_allclose(g, [1.0, 0.0], atol=1e-12)
        with pytest.raises(DomainError):
            eval_field(lin, np.array([[0.5, -1.8]]))

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            GeometryMap(origin=(0.0,), lengths=(0.0,))
