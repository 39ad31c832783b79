import json

import numpy as np
import pytest
from scipy.optimize import minimize

from phasefield.bspline import SplineField, eval_field, uniform_space
from phasefield.energy import PhaseFieldParams, elastic_energy, phase_energy, total_energy
from phasefield.quasi_interp import project
from phasefield.solver import (DirichletData, SolverError, alternate_minimize, antiplane_tearing_2d, crack_seed,
                               minimize_u, minimize_v, tearing_1d)


def affine(space, g):
    return SplineField(space, g * space.axes[0].greville[None, :])


class TestDirichlet:
    def test_bar_ends(self):
        space = uniform_space(6, 1)
        bc = DirichletData.bar_ends(space, 0.0, 2.0)
        assert list(bc.indices) == [0, 7]
        assert list(bc.values) == [0.0, 2.0]

    def test_faces_and_sum(self):
        space = uniform_space((3, 4))
        low = DirichletData.faces(space, axis=1, low=0.0)
        high = DirichletData.faces(space, axis=1, high=1.0)
        both = low + high
        assert both.indices.size == 2 * 5
        grid = np.arange(space.n_dofs).reshape(space.n_basis)
        assert set(low.indices) == set(grid[:, 0])
        assert set(high.indices) == set(grid[:, -1])
        assert DirichletData.faces(space, axis=0).indices.size == 0


class TestMinimizeU:
    def test_affine_solution(self):
        space = uniform_space(10, 1)
        params = PhaseFieldParams(0.1, eta=0.01)
        u = minimize_u(SplineField.constant(space, 1.0), params, DirichletData.bar_ends(space, 0.0, 3.0))
        x = np.linspace(0, 1, 101)
        np.testing.assert_allclose(eval_field(u, x)[0], 3 * x, atol=1e-9)
        assert elastic_energy(u, SplineField.constant(space, 1.0), params) == pytest.approx(1.01 * 4.5, rel=1e-10)

    def test_zero_data(self):
        space = uniform_space((5, 5))
        u = minimize_u(SplineField.constant(space, 0.7), PhaseFieldParams(0.1), DirichletData.faces(space, 1, 0.0, 0.0))
        assert np.abs(u.coeffs).max() < 1e-14

    def test_degraded_band_relaxes(self):
        space = uniform_space(40, 1)
        params = PhaseFieldParams(0.1, eta=1e-3)
        c = np.ones((1, 42))
        c[0, 18:24] = 0.0
        v = SplineField(space, c)
        bc = DirichletData.bar_ends(space, 0.0, 2.0)
        u = minimize_u(v, params, bc)
        intact = 0.5 * 4 * (1 + params.eta)
        E = elastic_energy(u, v, params)
        assert E < intact
        assert E < 0.05 * intact

    def test_singular_problem(self):
        space = uniform_space(4, 1)
        with pytest.raises(SolverError):
            minimize_u(SplineField.constant(space, 0.0), PhaseFieldParams(0.1, eta=0.0), DirichletData.empty())


class TestMinimizeV:
    def test_no_load(self):
        space = uniform_space(8, 1)
        v = minimize_v(SplineField.constant(space, 0.0), PhaseFieldParams(0.1), v0=SplineField.constant(space, 0.3))
        np.testing.assert_allclose(v.coeffs, 1.0, atol=1e-10)

    @pytest.mark.parametrize("g,eps,gc", [(1.0, 0.1, 4.0), (3.0, 0.2, 4.0), (2.0, 0.5, 1.0), (40.0, 1.0, 4.0)])
    def test_uniform_density_single_element(self, g, eps, gc):
        space = uniform_space(1, 1)
        params = PhaseFieldParams(eps, gc=gc)
        w = g * g / 2
        v = minimize_v(affine(space, g), params)
        expected = np.clip(1.0 / (1.0 + eps * w * 4.0 / gc), 0, 1)
        np.testing.assert_allclose(v.coeffs, expected, rtol=1e-9)

    def test_localizes_in_band_against_oracle(self):
        space = uniform_space(24, 1)
        params = PhaseFieldParams(0.06, eta=1e-4)
        u = project(space, lambda p: 0.5 * np.tanh((p[:, 0] - 0.5) / 0.05))
        v = minimize_v(u, params)

        def energy(c):
            f = SplineField(space, c[None])
            return elastic_energy(u, f, params) + sum(phase_energy(f, params.eps))

        ref = minimize(energy, np.ones(26), method="L-BFGS-B", bounds=[(0, 1)] * 26,
                       options={"ftol": 1e-15, "gtol": 1e-11, "maxiter": 5000})
        np.testing.assert_allclose(v.coeffs[0], ref.x, atol=2e-4)
        assert energy(v.coeffs[0]) <= ref.fun + 1e-10
        vals = eval_field(v, np.array([0.05, 0.5, 0.95]))[0]
        assert vals[1] < 0.6 and vals[0] > 0.95 and vals[2] > 0.95

    def test_coefficients_in_box(self):
        space = uniform_space(30, 1)
        v = minimize_v(affine(space, 30.0), PhaseFieldParams(0.05))
        assert v.coeffs.min() >= 0.0 and v.coeffs.max() <= 1.0


class TestAlternate:
    def test_trivial_start(self):
        space = uniform_space(8, 1)
        rep = alternate_minimize(SplineField.constant(space, 0.0), SplineField.constant(space, 1.0),
                                 PhaseFieldParams(0.1, eta=0.01), DirichletData.bar_ends(space, 0.0, 0.0))
        assert rep.outer_iterations == 1
        assert rep.converged
        assert rep.breakdown.total == pytest.approx(0.0, abs=1e-14)

    def test_max_outer_reports_not_converged(self):
        space = uniform_space(80, 1)
        params = PhaseFieldParams(0.05, eta=0.0025)
        rep = alternate_minimize(SplineField.constant(space, 0.0), crack_seed(space, 0.05, value=0.5),
                                 params, DirichletData.bar_ends(space, 0.0, 4.0), outer_tol=0.0, max_outer=2)
        assert not rep.converged
        assert rep.outer_iterations == 2
        assert len(rep.energy_trace) == 3

    def test_tearing_branches(self, profile_01):
        res = tearing_1d(0.05, 4.0, m=8, profile=profile_01)
        seeded, intact = res["seeded"], res["intact"]
        assert seeded.monotone and intact.monotone
        assert 4.0 <= seeded.breakdown.total < 8.0
        assert res["lower"].breakdown.total <= min(seeded.breakdown.total, intact.breakdown.total)
        assert intact.breakdown.total <= 8.0 * (1 + 0.05**2)
        assert res["sharp_limit"] == 4.0
        # the converged state is a fixed point of both half-steps
        params = PhaseFieldParams(0.05, eta=0.05**2)
        u2 = minimize_u(seeded.v, params, DirichletData.bar_ends(seeded.v.space, 0.0, 4.0), seeded.u)
        E2 = total_energy(u2, seeded.v, params).total
        assert abs(E2 - seeded.breakdown.total) < 1e-6 * seeded.breakdown.total

    def test_feasible_and_json(self, tmp_path, profile_01):
        res = tearing_1d(0.1, 4.0, m=8, profile=profile_01)
        for rep in (res["intact"], res["seeded"]):
            assert rep.v.coeffs.min() >= 0.0 and rep.v.coeffs.max() <= 1.0
            path = tmp_path / f"{rep.label}.json"
            rep.to_json(path)
            data = json.loads(path.read_text())
            assert data["label"] == rep.label
            assert data["energy_trace"] == rep.energy_trace
            assert data["breakdown"]["total"] == rep.breakdown.total

    def test_g1_stays_intact(self, profile_01):
        res = tearing_1d(0.05, 1.0, m=8, profile=profile_01)
        assert res["lower"].breakdown.total == pytest.approx(0.5, rel=0.03)
        assert res["lower"].v.coeffs.min() > 0.9

    def test_antiplane_2d(self, profile_01):
        res = antiplane_tearing_2d(0.2, 4.0, m=3, profile=profile_01)
        assert res["seeded"].monotone and res["intact"].monotone
        assert res["lower"].breakdown.total < 8.0


def test_crack_seed_shape(profile_01):
    space = uniform_space(80, 1)
    v = crack_seed(space, 0.05, value=0.3, profile=profile_01)
    assert v.coeffs.min() == 0.0 and v.coeffs.max() == 1.0
    vals = eval_field(v, np.array([0.3, 0.9]))[0]
    assert vals[0] < 1e-6 and vals[1] == pytest.approx(1.0)
    space2 = uniform_space((60, 60))
    v2 = crack_seed(space2, 0.03, axis=1, value=0.5, extent=(0.25, 0.75), profile=profile_01)
    vals = eval_field(v2, np.array([[0.5, 0.5], [0.05, 0.5], [0.5, 0.95]]))[0]
    assert vals[0] < 1e-2 and vals[1] == pytest.approx(1.0) and vals[2] == pytest.approx(1.0)
