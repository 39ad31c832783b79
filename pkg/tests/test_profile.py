import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasefield.profile import (ProfileDomainError, ProfileSearchError, ProfileSpec, TruncatedProfile,
                                build_truncated_profile, euler_lagrange_residual, j_functional,
                                one_d_liminf_experiment, recovery_profile, smooth_window, smoothstep, w_infinity)


class TestOptimalProfile:
    def test_values(self):
        assert w_infinity(0.0) == 1.0
        assert w_infinity(0.0, 1) == 0.0
        assert w_infinity(1.0) == pytest.approx(2 / np.e, abs=1e-15)
        assert w_infinity(1.0) == pytest.approx(0.735758882, abs=1e-9)
        assert w_infinity(40.0) < 1e-15

    def test_derivatives_by_differences(self):
        r = np.linspace(0.5, 8, 30)
        for k in range(1, 4):
            fd = (w_infinity(r + 1e-6, k - 1) - w_infinity(r - 1e-6, k - 1)) / 2e-6
            np.testing.assert_allclose(w_infinity(r, k), fd, atol=1e-8)

    def test_monotone_in_unit_interval(self):
        r = np.linspace(0, 40, 4001)
        w = w_infinity(r)
        assert np.all(np.diff(w) < 0)
        assert np.all((w > 0) & (w <= 1))

    def test_domain(self):
        with pytest.raises(ProfileDomainError):
            w_infinity(-0.1)

    def test_euler_lagrange(self):
        assert np.abs(euler_lagrange_residual(np.linspace(0, 30, 3001))).max() < 1e-10

    def test_energy_two(self):
        assert j_functional(w_infinity) == pytest.approx(2.0, abs=1e-8)

    def test_minimality_witness(self):
        rng = np.random.default_rng(2024)
        J0 = j_functional(w_infinity)
        for _ in range(50):
            R = rng.uniform(1.0, 8.0)
            a = rng.standard_normal(3)

            def p(r, k, R=R, a=a):
                poly = np.polynomial.Polynomial([0, 0, *a]) * np.polynomial.Polynomial([R, -1]) ** 3 / R**5
                return np.where(r < R, poly.deriv(k)(r) if k else poly(r), 0.0)

            for t in (0.1, -0.1, 0.01, -0.01):
                Jt = j_functional(lambda r, k: w_infinity(r, k) + t * p(r, k), breakpoints=[R])
                assert Jt >= J0 - 1e-9


class TestJFunctional:
    def test_zero(self):
        assert j_functional(lambda r, k: np.zeros_like(r)) == 0.0

    def test_exponential(self):
        # e^{-r}: integrand 4 e^{-2r}, integral 2
        assert j_functional(lambda r, k: (-1.0) ** k * np.exp(-r)) == pytest.approx(2.0, abs=1e-12)

    def test_additive(self):
        f = lambda r, k: w_infinity(r, k)  # noqa: E731
        whole = j_functional(f, R=5.0)
        lo = j_functional(f, R=2.0)
        hi = j_functional(lambda r, k: w_infinity(r + 2.0, k), R=3.0)
        assert whole == pytest.approx(lo + hi, rel=1e-13)


class TestSmoothstep:
    def test_ends(self):
        u = np.array([-1.0, 0.0, 1.0, 2.0])
        np.testing.assert_array_equal(smoothstep(u), [0, 0, 1, 1])
        for k in (1, 2, 3):
            np.testing.assert_allclose(smoothstep(np.array([0.0, 1.0]), k), 0.0, atol=1e-12)

    def test_window_derivatives(self):
        f = smooth_window(0.3, 0.6, 0.1)
        x = np.linspace(0.0, 1.0, 401)
        assert np.all(f(x[(x >= 0.3) & (x <= 0.6)]) == 1.0)
        assert np.all(f(x[(x < 0.2) | (x > 0.7)]) == 0.0)
        for k in (1, 2):
            fd = (f(x + 1e-6, k - 1) - f(x - 1e-6, k - 1)) / 2e-6
            np.testing.assert_allclose(f(x, k), fd, atol=2e-3 * 10**k)


class TestTruncatedProfile:
    @pytest.mark.parametrize("delta", [0.5, 0.1])
    def test_energy_window(self, delta, request):
        prof = request.getfixturevalue("profile_05" if delta == 0.5 else "profile_01")
        assert 2.0 <= prof.spec.J < 2.0 + delta
        assert prof.energy() == pytest.approx(prof.spec.J, rel=1e-12)

    def test_small_delta_needs_longer_tail(self, profile_05):
        prof = build_truncated_profile(0.05)
        assert 2.0 <= prof.spec.J < 2.05
        assert prof.spec.r_sharp > profile_05.spec.r_sharp

    def test_spec_invariants(self, profile_01):
        sp = profile_01.spec
        assert 0 < sp.r_flat < 1 < sp.r_sharp
        assert profile_01(sp.r_flat) == 1.0
        assert profile_01(sp.r_sharp) == 0.0
        r = np.linspace(0, sp.r_sharp + 1, 3001)
        w = profile_01(r)
        assert w.min() >= 0.0 and w.max() <= 1.0
        assert np.all(w[r <= sp.r_flat] == 1.0)
        assert np.all(w[r >= sp.r_sharp] == 0.0)

    def test_smooth_derivatives(self, profile_01):
        sp = profile_01.spec
        r = np.linspace(0.001, sp.r_sharp + 0.3, 997)
        for k in (1, 2, 3):
            d = 1e-5
            fd = (profile_01(r + d, k - 1) - profile_01(np.maximum(r - d, 0), k - 1)) / (2 * d)
            scale = np.abs(profile_01(r, k)).max()
            np.testing.assert_allclose(profile_01(r, k), fd, atol=1e-4 * max(scale, 1.0))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ProfileSpec(delta=0.1, rk=1.5, Rk=5.0, moll_width=0.1)
        with pytest.raises(ValueError):
            ProfileSpec(delta=0.1, rk=0.1, Rk=0.8, moll_width=0.05)
        with pytest.raises(ValueError):
            build_truncated_profile(0.0)

    def test_search_failure_reports_best(self):
        with pytest.raises(ProfileSearchError) as exc:
            build_truncated_profile(1e-9)
        assert exc.value.best_j > 2.0

    def test_domain(self, profile_05):
        with pytest.raises(ProfileDomainError):
            profile_05(-1.0)


class TestRescaledProfile:
    def test_plateaus(self, profile_01):
        z = recovery_profile(profile_01, 0.1)
        assert z(0.0) == 0.0
        assert z(2 * z.eps_sharp) == 1.0 and z(-2 * z.eps_sharp) == 1.0
        s = np.linspace(-1, 1, 4001)
        zs = z(s)
        assert np.all(zs[np.abs(s) <= z.eps_flat] == 0.0)
        assert np.all(zs[np.abs(s) >= z.eps_sharp] == 1.0)
        assert zs.min() >= 0 and zs.max() <= 1

    @given(st.floats(-1, 1))
    def test_even(self, s):
        z = recovery_profile(TruncatedProfile(ProfileSpec(0.5, 0.1, 4.0, 0.05, 2.0)), 0.1)
        assert z(s) == z(-s)
        assert z(s, 1) == -z(-s, 1)
        assert z(s, 2) == z(-s, 2)

    @pytest.mark.parametrize("eps", [0.1, 0.01])
    def test_energy_bound(self, profile_01, eps):
        z = recovery_profile(profile_01, eps)
        E = z.energy()
        assert 4 * (1 - 1e-6) <= E < 4 + 2 * 0.1
        # rescaling identity and symmetry
        assert z.energy(half=True) == pytest.approx(profile_01.spec.J, rel=1e-8)
        assert E == pytest.approx(2 * z.energy(half=True), rel=1e-15)

    def test_derivative_scaling(self, profile_01):
        """sup |z^(k)| scales like eps^-k."""
        s = np.linspace(-0.1, 0.1, 20001)
        sups = []
        for eps in (0.02, 0.01, 0.005):
            z = recovery_profile(profile_01, eps)
            sups.append([np.abs(z(s * eps / 0.02, k)).max() * eps**k for k in range(4)])
        sups = np.array(sups)
        np.testing.assert_allclose(sups, np.broadcast_to(sups[0], sups.shape), rtol=1e-3)


def test_one_d_liminf_g1_intact():
    rows = one_d_liminf_experiment([0.1], g=1.0)
    assert rows[0]["lower"].breakdown.total == pytest.approx(0.5, rel=0.05)
