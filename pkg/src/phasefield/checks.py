"""Quick invariant suite behind ``phasefield check``.

Each check is small enough to run in a second or two and returns
``(name, passed, detail)``. The pytest suite covers the same ground in depth.
"""
from __future__ import annotations

import warnings

import numpy as np

from .bspline import KnotVector, SplineField, eval_field, uniform_space
from .energy import PhaseFieldParams, laplacian_hessian_check, total_energy
from .profile import build_truncated_profile, euler_lagrange_residual, j_functional, recovery_profile, w_infinity
from .quasi_interp import project
from .repair import calibrate_c, classify, repair
from .solver import tearing_1d
from .targets import SeparableTarget

__all__ = ["run_checks"]


def _partition_of_unity():
    rng = np.random.default_rng(0)
    kv = KnotVector.uniform(13)
    B = kv.basis_matrix(rng.random(10_000)).toarray()
    err = np.abs(B.sum(axis=1) - 1.0).max()
    return err < 1e-12, f"max |sum - 1| = {err:.2e}"


def _optimal_profile():
    J = j_functional(w_infinity)
    el = np.abs(euler_lagrange_residual(np.linspace(0, 30, 3001))).max()
    return abs(J - 2.0) < 1e-8 and el < 1e-10, f"J = {J:.12f}, EL residual {el:.1e}"


def _truncated_profile():
    p = build_truncated_profile(0.5)
    z = recovery_profile(p, 0.1)
    E = z.energy()
    return 2.0 <= p.spec.J < 2.5 and E < 4 + 2 * 0.5, f"J = {p.spec.J:.6f}, recovery energy {E:.6f}"


def _constant_reproduction():
    space = uniform_space((6, 9))
    f = project(space, SeparableTarget([], 0.37))
    return bool(np.all(f.coeffs == 0.37)), "projection of 0.37 has all coefficients 0.37"


def _laplacian_hessian():
    rng = np.random.default_rng(1)
    space = uniform_space((8, 8))
    c = np.zeros(space.n_basis)
    c[2:-2, 2:-2] = rng.standard_normal((space.n_basis[0] - 4, space.n_basis[1] - 4))
    _, _, rel = laplacian_hessian_check(SplineField(space, c))
    return rel < 1e-10, f"relative difference {rel:.1e}"


def _repair_1d():
    eps = 0.05
    prof = build_truncated_profile(0.1)
    z = recovery_profile(prof, eps)
    v = SeparableTarget([(lambda x, k: -z.notch(x - 0.5, k),)], constant=1.0)
    space = uniform_space(160, 1)
    w = project(space, v)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cal = calibrate_c(space, v, w, eps)
    vh = repair(w, classify(space, v, cal.c), cal.c)
    x = np.linspace(0, 1, 20001)
    vals = eval_field(vh, x)[0]
    return vals.min() >= -1e-12 and vals.max() <= 1 + 1e-12, f"repaired range [{vals.min():.2e}, {vals.max():.6f}]"


def _descent():
    res = tearing_1d(0.1, 4.0, m=8)
    ok = res["intact"].monotone and res["seeded"].monotone
    return ok, f"lower branch {res['lower'].breakdown.total:.4f}"


def _energy_zero():
    space = uniform_space(8, 1)
    b = total_energy(SplineField.constant(space, 0.0), SplineField.constant(space, 1.0), PhaseFieldParams(eps=0.1))
    return abs(b.total) < 1e-14, f"total {b.total:.1e}"


CHECKS = [
    ("partition of unity", _partition_of_unity),
    ("optimal profile energy", _optimal_profile),
    ("truncated profile", _truncated_profile),
    ("constant reproduction", _constant_reproduction),
    ("laplacian-hessian identity", _laplacian_hessian),
    ("box repair (1D)", _repair_1d),
    ("energy of intact state", _energy_zero),
    ("staggered descent", _descent),
]


def run_checks():
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # reported as a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
