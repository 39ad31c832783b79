"""Convergence studies for the phase-field energies.

Two kinds of study are supported.

Recovery studies build an explicit pair ``(u_eps, v_eps)`` around a straight
crack ``J`` (a point in 1D, a segment on the line ``x2 = const`` in 2D),
project both onto the spline spaces, repair the projected phase field into
[0, 1] and evaluate the discrete energy. The energies should approach the
sharp value ``int W(e(u)) + gc |J|`` up to a slack proportional to ``delta``.

Minimisation studies run staggered solves from an intact and a crack-seeded
start and record the lower energy, to be compared with the cheaper of the
intact and the cracked sharp competitors.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bspline import QuadratureRule, SplineField, SplineSpace, eval_field_grid, uniform_space
from .energy import EnergyBreakdown, PhaseFieldParams, check_box, elastic_energy, phase_energy
from .profile import build_truncated_profile, recovery_profile, smooth_window, smoothstep
from .quasi_interp import project
from .rates import loglog_slope
from .repair import (CalibrationWarning, calibrate_c, clamp_baseline, classify, lattice, repair)
from .solver import antiplane_tearing_2d, tearing_1d
from .targets import SeparableTarget

log = logging.getLogger(__name__)

__all__ = [
    "StudyError",
    "StudyConfig",
    "StudyRow",
    "RecoveryPair",
    "build_recovery_pair",
    "mesh_for",
    "run_recovery_study",
    "run_minimization_study",
    "emit_report",
    "rows_to_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ["eps", "h", "eta", "elastic", "reaction", "gradient", "laplacian", "total", "sharp_limit", "rel_error"]


class StudyError(RuntimeError):
    pass


@dataclass
class StudyConfig:
    """Parameters of a recovery or minimisation study on the unit interval or square."""

    dim: int = 2
    eps: list = field(default_factory=lambda: [0.05 * 2 ** (-k / 2) for k in range(4)])
    h_rule: str = "ratio"  # "ratio": h = eps / h_ratio; "power": h = kappa * eps ** h_power
    h_ratio: float = 8.0
    h_power: float = 1.5
    kappa: float = 0.125 / 0.05**0.5  # power rule meets h = eps/8 at eps = 0.05
    eta_exp: float = 2.0
    crack_axis: int = 1  # 2D: normal direction of the crack line
    crack_value: float = 0.5
    crack_from: float = 0.25
    crack_to: float = 0.75
    displacement: str = "zero"  # "zero", "step" (1D), "tapered_step" (2D antiplane)
    jump: float = 1.0
    delta: float = 0.1
    gc: float = 4.0
    safety: float = 2.0
    samples: int = 5
    quad_order: int = 4
    g: float = 4.0  # boundary displacement in minimisation studies
    outer_tol: float = 1e-9
    max_outer: int = 500

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if not self.eps or any(e <= 0 for e in self.eps):
            raise ValueError("eps schedule must be nonempty and positive")
        if self.h_rule not in ("ratio", "power"):
            raise ValueError("h_rule must be 'ratio' or 'power'")
        if self.h_rule == "power" and self.h_power <= 1:
            raise ValueError("h = kappa eps^p needs p > 1")
        if self.eta_exp <= 1:
            raise ValueError("eta = eps^q needs q > 1")
        if self.displacement not in ("zero", "step", "tapered_step"):
            raise ValueError(f"unknown displacement {self.displacement!r}")

    def h_of(self, eps: float) -> float:
        if self.h_rule == "ratio":
            return eps / self.h_ratio
        return self.kappa * eps**self.h_power

    def eta_of(self, eps: float) -> float:
        return eps**self.eta_exp

    def schedule_warnings(self) -> list[str]:
        """Diagnostics for schedules outside ``h = o(eps)``, ``eta = o(eps)``."""
        eps = np.asarray(sorted(self.eps, reverse=True))
        out = []
        hr = np.array([self.h_of(e) / e for e in eps])
        if len(eps) > 1 and not np.all(np.diff(hr) < 0):
            out.append("h/eps is not decreasing along the schedule: constant-ratio runs are diagnostics only")
        return out

    @property
    def crack_length(self) -> float:
        return self.crack_to - self.crack_from if self.dim == 2 else 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StudyRow:
    eps: float
    h: float
    eta: float
    breakdown: EnergyBreakdown
    sharp_limit: float
    extra: dict = field(default_factory=dict)

    @property
    def rel_error(self) -> float:
        return (self.breakdown.total - self.sharp_limit) / self.sharp_limit

    def csv_row(self) -> dict:
        r = self.breakdown.row(self.eps, self.h, self.eta)
        r.update(sharp_limit=self.sharp_limit, rel_error=self.rel_error)
        return r


# ---------------------------------------------------------------------------
# Recovery pair
# ---------------------------------------------------------------------------
def _xi_n(eps_flat: float):
    """``xi(2 s / eps_flat)``: 1 for ``|s| <= eps_flat/4``, 0 for ``|s| >= eps_flat/2``."""
    a = eps_flat / 4.0

    def f(s, k):
        s = np.asarray(s, dtype=float)
        u = (2.0 * a - np.abs(s)) / a
        val = smoothstep(u, k) * (-1.0 / a) ** k
        if k % 2 == 1:
            val = val * np.sign(s)
        return val

    return f


def _heaviside_smoothed(eps_flat: float, c: float):
    """``H(s) (1 - xi_n(s))`` with ``s = x - c``: a smooth step supported in ``s >= eps_flat/4``."""
    xi = _xi_n(eps_flat)

    def f(x, k):
        s = np.asarray(x, dtype=float) - c
        pos = s > 0
        if k == 0:
            return np.where(pos, 1.0 - xi(s, 0), 0.0)
        return np.where(pos, -xi(s, k), 0.0)

    return f


@dataclass
class RecoveryPair:
    u: SeparableTarget
    v: SeparableTarget
    eps: float
    eps_flat: float
    eps_sharp: float
    sharp_elastic: float
    sharp_limit: float


def _smoothstep_energy() -> float:
    """``int_0^1 S'(t)^2 dt`` for the order-7 smoothstep."""
    x, w = np.polynomial.legendre.leggauss(16)
    t = 0.5 * (x + 1)
    return float(np.sum(0.5 * w * smoothstep(t, 1) ** 2))


def build_recovery_pair(config: StudyConfig, eps: float, profile=None) -> RecoveryPair:
    """Recovery displacement and phase field at length scale ``eps``.

    In 2D the crack is ``{x_axis = value, from <= x_other <= to}``; the phase
    field is ``1 - phi(x_t) (1 - z(x_n - value))`` where ``phi = 1`` within
    ``delta`` of the crack and ``0`` beyond ``2 delta``.
    """
    prof = profile or build_truncated_profile(config.delta)
    z = recovery_profile(prof, eps)
    c = config.crack_value
    notch = lambda x, k: z.notch(np.asarray(x) - c, k)
    if c - z.eps_sharp <= 0.0 or c + z.eps_sharp >= 1.0:
        warnings.warn(f"eps={eps:g}: transition layer of half-width {z.eps_sharp:.3g} is cut off by the domain "
                      "boundary; the recovery energy is evaluated on the truncated layer", stacklevel=2)
    gc = config.gc
    if config.dim == 1:
        v = SeparableTarget([(lambda x, k: -notch(x, k),)], constant=1.0)
        if config.displacement == "zero":
            u = SeparableTarget([], 0.0)
        elif config.displacement == "step":
            H = _heaviside_smoothed(z.eps_flat, c)
            u = SeparableTarget([(lambda x, k: config.jump * H(x, k),)])
        else:
            raise StudyError("tapered_step is a 2D displacement")
        return RecoveryPair(u, v, eps, z.eps_flat, z.eps_sharp, 0.0, gc * 1.0)

    a, b, d = config.crack_from, config.crack_to, config.delta
    if a - 2 * d <= 0 or b + 2 * d >= 1:
        raise StudyError("the 2 delta neighbourhood of the crack must lie inside the unit square")
    phi = smooth_window(a - d, b + d, d)
    normal, tangent = config.crack_axis, 1 - config.crack_axis

    def arrange(ft, fn):
        fac = [None, None]
        fac[tangent], fac[normal] = ft, fn
        return tuple(fac)

    v = SeparableTarget([arrange(lambda x, k: -phi(x, k), notch)], constant=1.0)
    sharp_el = 0.0
    if config.displacement == "zero":
        u = SeparableTarget([], 0.0)
    elif config.displacement == "tapered_step":
        t = 0.25 * (b - a)
        tau = smooth_window(a + t, b - t, t)
        H = _heaviside_smoothed(z.eps_flat, c)
        jump = config.jump
        u = SeparableTarget([arrange(lambda x, k: jump * tau(x, k), H)])
        sharp_el = 0.5 * jump**2 * (1.0 - c) * 2.0 * _smoothstep_energy() / t
    else:
        raise StudyError("step displacement is 1D only")
    return RecoveryPair(u, v, eps, z.eps_flat, z.eps_sharp, sharp_el, sharp_el + gc * (b - a))


def mesh_for(config: StudyConfig, eps: float) -> SplineSpace:
    """Uniform mesh with ``h <= h_of(eps)`` and an even element count (crack on a mesh line)."""
    n = int(np.ceil(1.0 / config.h_of(eps) - 1e-9))
    n += n % 2
    return uniform_space(n, config.dim)


# ---------------------------------------------------------------------------
# Recovery study
# ---------------------------------------------------------------------------
def _raw_extrema(w: SplineField, samples: int):
    xs = lattice(w.space, samples)
    vals = eval_field_grid(w, xs, (0,) * w.space.dim)[0]
    i_min = np.unravel_index(np.argmin(vals), vals.shape)
    i_max = np.unravel_index(np.argmax(vals), vals.shape)
    pt = lambda idx: [float(xs[a][idx[a]]) for a in range(len(xs))]
    return float(vals[i_min]), pt(i_min), float(vals[i_max]), pt(i_max)


def _l2_sq(f: SplineField, rule: QuadratureRule) -> float:
    return phase_energy(f.with_coeffs(f.coeffs + 1.0), 1.0, rule)[0]


def _recovery_level(config: StudyConfig, eps: float, prof, C_hat):
    space = mesh_for(config, eps)
    h, eta = space.h, config.eta_of(eps)
    rule = QuadratureRule(config.quad_order)
    pair = build_recovery_pair(config, eps, prof)
    u_h = project(space, pair.u)
    w_h = project(space, pair.v)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CalibrationWarning)
        cal = calibrate_c(space, pair.v, w_h, eps, C_hat=C_hat, safety=config.safety, samples=config.samples)
    cls = classify(space, pair.v, cal.c, samples=config.samples)
    v_h = repair(w_h, cls, cal.c, samples=config.samples)
    check_box(v_h, "sample", samples=config.samples)
    params = PhaseFieldParams(eps=eps, eta=eta, gc=config.gc, constraint_check="sample")
    el = elastic_energy(u_h, v_h, params, rule)
    bd = EnergyBreakdown(el, *phase_energy(v_h, eps, rule), config.gc)
    v_c = clamp_baseline(w_h)
    bd_clamp = EnergyBreakdown(elastic_energy(u_h, v_c, params, rule), *phase_energy(v_c, eps, rule), config.gc)
    raw_min, raw_min_at, raw_max, raw_max_at = _raw_extrema(w_h, config.samples)
    extra = {
        "n_elements": list(space.n_elements),
        "c": cal.c, "C_hat": cal.C_hat, "measured_sup_error": cal.measured, "h_over_eps": cal.ratio,
        "calibration_warning": bool(caught),
        "families": cls.counts(),
        "repair_l2_sq": _l2_sq(v_h - w_h, rule),
        "clamp_total": bd_clamp.total,
        "raw_min": raw_min, "raw_min_at": raw_min_at, "raw_max": raw_max, "raw_max_at": raw_max_at,
        "sharp_elastic": pair.sharp_elastic,
    }
    return StudyRow(eps, h, eta, bd, pair.sharp_limit, extra), cal.C_hat, (u_h, w_h, v_h)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PHASEFIELD_THREADS", "1")))
    except ValueError:
        return 1


def run_recovery_study(config: StudyConfig, profile=None, keep_fields: bool = False) -> list[StudyRow]:
    """Project, repair and evaluate the recovery pair for every ``eps`` (largest first).

    ``c = C_hat (h/eps)^3`` is calibrated on the first level and frozen.
    """
    for msg in config.schedule_warnings():
        warnings.warn(msg, stacklevel=2)
    prof = profile or build_truncated_profile(config.delta)
    eps_list = sorted(config.eps, reverse=True)
    rows, fields = [], []

    def run(eps, C_hat):
        try:
            return _recovery_level(config, eps, prof, C_hat)
        except Exception as exc:
            raise StudyError(f"recovery level eps={eps:g} failed: {exc}") from exc

    first, C_hat, f0 = run(eps_list[0], None)
    rows.append(first)
    fields.append(f0)
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        for row, _, f in pool.map(lambda e: run(e, C_hat), eps_list[1:]):
            rows.append(row)
            fields.append(f)
    if keep_fields:
        for row, f in zip(rows, fields):
            row.extra["fields"] = f
    return rows


# ---------------------------------------------------------------------------
# Minimisation study
# ---------------------------------------------------------------------------
def run_minimization_study(config: StudyConfig, profile=None) -> list[StudyRow]:
    """Two-start staggered solves of the tearing problem along the schedule.

    1D: bar with ``u(0) = 0``, ``u(1) = g``. 2D: antiplane displacement
    ``u = 0`` on ``x2 = 0`` and ``u = g`` on ``x2 = 1``. The sharp value is
    ``min(g^2 / 2, gc)`` (intact affine state versus one spanning crack).
    """
    prof = profile or build_truncated_profile(config.delta)
    eps_list = sorted(config.eps, reverse=True)
    m = config.h_ratio
    solve = tearing_1d if config.dim == 1 else antiplane_tearing_2d

    def run(eps):
        res = solve(eps, config.g, m=m, eta=config.eta_of(eps), delta=config.delta, gc=config.gc,
                    outer_tol=config.outer_tol, max_outer=config.max_outer, profile=prof)
        low = res["lower"]
        extra = {
            "branch": low.label,
            "intact_total": res["intact"].breakdown.total,
            "seeded_total": res["seeded"].breakdown.total,
            "converged": bool(res["intact"].converged and res["seeded"].converged),
            "monotone": bool(res["intact"].monotone and res["seeded"].monotone),
            "traces": {"intact": res["intact"].energy_trace, "seeded": res["seeded"].energy_trace},
        }
        return StudyRow(eps, res["h"], res["eta"], low.breakdown, res["sharp_limit"], extra)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(run, eps_list))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
def _fmt(x) -> str:
    return repr(float(x))


def rows_to_csv(rows: list[StudyRow]) -> str:
    if not rows:
        raise StudyError("no rows to report")
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    for r in rows:
        d = r.csv_row()
        wr.writerow([_fmt(d[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items() if k != "fields"}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def fitted_slopes(rows: list[StudyRow]) -> dict:
    """Log-log slopes against ``eps`` of the overshoot and, when present, of the repair size."""
    out = {}
    if len(rows) < 2:
        return out
    eps = [r.eps for r in rows]
    over = [abs(r.rel_error) for r in rows]
    if all(o > 0 for o in over):
        out["rel_error_vs_eps"] = loglog_slope(eps, over)
    rep = [r.extra.get("repair_l2_sq") for r in rows]
    if all(x is not None and x > 0 for x in rep):
        out["repair_l2_sq_vs_eps"] = loglog_slope(eps, rep)
        hs = [r.h for r in rows]
        pred = [h**6 * e**-5 for h, e in zip(hs, eps)]
        out["predicted_repair_l2_sq_vs_eps"] = loglog_slope(eps, pred)
        # the same data against h, where the corrected-region measure lives
        out["repair_l2_sq_vs_h"] = loglog_slope(hs, rep)
        out["predicted_repair_l2_sq_vs_h"] = loglog_slope(hs, pred)
    return out


def witnesses(rows: list[StudyRow]) -> list[dict]:
    """Levels whose raw projection leaves [0, 1]."""
    out = []
    for r in rows:
        lo, hi = r.extra.get("raw_min"), r.extra.get("raw_max")
        if lo is None:
            continue
        if lo < 0.0:
            out.append({"eps": r.eps, "value": lo, "at": r.extra["raw_min_at"]})
        if hi > 1.0:
            out.append({"eps": r.eps, "value": hi, "at": r.extra["raw_max_at"]})
    return out


def emit_report(rows: list[StudyRow], out_dir, study: str = "study") -> dict:
    """Write ``<study>.csv`` and ``<study>.json``; returns the output paths."""
    if not rows:
        raise StudyError("no rows to report")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{study}.csv")
    json_path = os.path.join(out_dir, f"{study}.json")
    with open(csv_path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    summary = {
        "study": study,
        "rows": [_jsonable({**r.csv_row(), **r.extra}) for r in rows],
        "fitted_slopes": fitted_slopes(rows),
        "witnesses": witnesses(rows),
    }
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return {"csv": csv_path, "json": json_path}
