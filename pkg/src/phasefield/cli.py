"""Command-line interface.

    phasefield profile  [--delta D]
    phasefield project
    phasefield repair
    phasefield solve    [--eps E] [--seed-crack x2=0.5,0,1]
    phasefield study    recovery|minimize
    phasefield check

Every run writes its outputs and a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import __version__
from .config import (ConfigError, config_hash, default_config, dumps_config, load_config, parse_seed_crack,
                     study_config)

log = logging.getLogger("phasefield")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--out", metavar="DIR", default="phasefield-out", help="output directory")
    common.add_argument("--delta", type=float, help="recovery/profile energy slack")
    common.add_argument("--eps", help="comma-separated eps schedule (or a single eps for solve)")
    common.add_argument("--h-ratio", type=float, help="use h = eps / H_RATIO")
    common.add_argument("--eta-exp", type=float, help="use eta = eps ** ETA_EXP")
    common.add_argument("--gc", type=float, help="toughness")
    common.add_argument("--seed-crack", metavar="AXIS=VALUE,FROM,TO", help="crack seed, e.g. x2=0.5,0.0,1.0")
    common.add_argument("--constraint-check", choices=["coeff", "sample"], help="box-constraint check mode")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="phasefield", description="Second-order phase-field energies on quadratic B-splines.")
    p.add_argument("--print-default-config", action="store_true", help="print the default TOML and exit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("profile", parents=[common], help="truncated optimal profile samples and energies")
    sub.add_parser("project", parents=[common], help="projection convergence rates")
    sub.add_parser("repair", parents=[common], help="box repair on one recovery level, with baselines")
    sub.add_parser("solve", parents=[common], help="one two-start staggered tearing solve")
    st = sub.add_parser("study", parents=[common], help="recovery or minimisation study")
    st.add_argument("kind", choices=["recovery", "minimize"])
    sub.add_parser("check", parents=[common], help="run the quick invariant suite")
    return p


def _apply_overrides(cfg: dict, args) -> dict:
    if args.delta is not None:
        cfg["profile"]["delta"] = args.delta
    if args.eps is not None:
        try:
            cfg["schedule"]["eps"] = [float(e) for e in args.eps.split(",") if e.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --eps {args.eps!r}") from exc
    if args.h_ratio is not None:
        cfg["schedule"]["h_rule"] = "ratio"
        cfg["schedule"]["h_ratio"] = args.h_ratio
    if args.eta_exp is not None:
        cfg["schedule"]["eta_exp"] = args.eta_exp
    if args.gc is not None:
        cfg["energy"]["gc"] = args.gc
    if args.seed_crack is not None:
        parse_seed_crack(args.seed_crack)
        cfg["solver"]["seed_crack"] = args.seed_crack
    if args.constraint_check is not None:
        cfg["energy"]["constraint_check"] = args.constraint_check
    study_config(cfg)  # validation
    return cfg


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def cmd_profile(cfg, out):
    from .profile import build_truncated_profile, j_functional, w_infinity

    delta = cfg["profile"]["delta"]
    prof = build_truncated_profile(delta)
    r = np.linspace(0.0, prof.spec.r_sharp + 0.5, 801)
    path = os.path.join(out, "profile.csv")
    _write_csv(path, ["r", "w", "dw", "d2w"], zip(r, prof(r, 0), prof(r, 1), prof(r, 2)))
    spec_path = os.path.join(out, "profile.json")
    with open(spec_path, "w") as fh:
        json.dump({**prof.spec.to_dict(), "J_optimal": j_functional(w_infinity)}, fh, indent=2)
    print(f"J = {prof.spec.J:.10f}  (delta = {delta}, R_flat = {prof.spec.r_flat:.5f}, R_sharp = {prof.spec.r_sharp:.5f})")
    return [path, spec_path]


def cmd_project(cfg, out):
    from .bspline import uniform_space
    from .quasi_interp import error_report, project
    from .rates import loglog_slope
    from .targets import SeparableTarget

    def s(x, k):
        w = 2 * np.pi
        return [np.sin(w * x), w * np.cos(w * x), -w * w * np.sin(w * x)][k]

    target = SeparableTarget([(s, s)])
    rows = []
    for n in (8, 16, 32, 64):
        space = uniform_space(n, 2)
        rep = error_report(space, target, project(space, target))
        rows.append([1.0 / n, *rep.global_errors])
    path = os.path.join(out, "projection_rates.csv")
    _write_csv(path, ["h", "err_L2", "err_H1", "err_H2"], rows)
    arr = np.array(rows)
    slopes = [loglog_slope(arr[:, 0], arr[:, k]) for k in (1, 2, 3)]
    print("fitted orders: L2 %.3f  H1 %.3f  H2 %.3f" % tuple(slopes))
    return [path]


def cmd_repair(cfg, out):
    from .energy import EnergyBreakdown, PhaseFieldParams, phase_energy
    from .gamma_lab import build_recovery_pair, mesh_for
    from .profile import build_truncated_profile
    from .quasi_interp import project
    from .repair import calibrate_c, clamp_baseline, classify, correction_sup_norms, repair, rescale_antipattern

    sc = study_config(cfg)
    eps = max(sc.eps)
    prof = build_truncated_profile(sc.delta)
    space = mesh_for(sc, eps)
    pair = build_recovery_pair(sc, eps, prof)
    w = project(space, pair.v)
    cal = calibrate_c(space, pair.v, w, eps, safety=sc.safety, samples=sc.samples)
    cls = classify(space, pair.v, cal.c, samples=sc.samples)
    vh = repair(w, cls, cal.c, samples=sc.samples)
    cls_path = os.path.join(out, "classification.csv")
    cls.to_csv(cls_path)
    norms = correction_sup_norms(vh - w)
    energies = {}
    for name, f in (("repair", vh), ("clamp", clamp_baseline(w))):
        energies[name] = EnergyBreakdown(0.0, *phase_energy(f, eps), sc.gc).total
    _, anti = rescale_antipattern(w, cal.c, eps)
    report = {
        "eps": eps, "h": space.h, "c": cal.c, "C_hat": cal.C_hat, "sup_error": cal.measured,
        "families": cls.counts(), "correction_sup_norms": norms, "phase_energy": energies,
        "rescale_antipattern": anti,
    }
    path = os.path.join(out, "repair.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"c = {cal.c:.3e}; repaired phase energy {energies['repair']:.6f}, clamped {energies['clamp']:.6f}; "
          f"rescaling penalty {anti['penalty']:.3e}")
    return [cls_path, path]


def cmd_solve(cfg, out):
    from .profile import build_truncated_profile
    from .solver import antiplane_tearing_2d, tearing_1d

    sc = study_config(cfg)
    eps = max(sc.eps)
    axis, value, lo, hi = parse_seed_crack(cfg["solver"]["seed_crack"])
    prof = build_truncated_profile(sc.delta)
    kw = dict(m=sc.h_ratio, eta=sc.eta_of(eps), delta=sc.delta, gc=sc.gc, outer_tol=cfg["solver"]["outer_tol"],
              max_outer=cfg["solver"]["max_outer"], profile=prof)
    if sc.dim == 1:
        res = tearing_1d(eps, sc.g, seed_at=value, **kw)
    else:
        res = antiplane_tearing_2d(eps, sc.g, seed=(axis, value, lo, hi), **kw)
    paths = []
    for key in ("intact", "seeded"):
        p = os.path.join(out, f"solve_{key}.json")
        res[key].to_json(p)
        paths.append(p)
    low = res["lower"]
    print(f"lower branch: {low.label}, total {low.breakdown.total:.6f} (sharp {res['sharp_limit']:.6f}); "
          f"converged {low.converged}")
    return paths


def cmd_study(cfg, out, kind):
    from .gamma_lab import emit_report, run_minimization_study, run_recovery_study

    sc = study_config(cfg)
    rows = run_recovery_study(sc) if kind == "recovery" else run_minimization_study(sc)
    paths = emit_report(rows, out, study=kind)
    for r in rows:
        print(f"eps={r.eps:.5g} h={r.h:.4g} total={r.breakdown.total:.6f} sharp={r.sharp_limit:.6f} "
              f"rel_error={r.rel_error:+.4f}")
    return [paths["csv"], paths["json"]]


def cmd_check(cfg, out):
    from .checks import run_checks

    results = run_checks()
    path = os.path.join(out, "check.csv")
    _write_csv(path, ["check", "passed", "detail"], results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if not all(ok for _, ok, _ in results):
        raise _NumericalFailure("invariant suite failed")
    return [path]


class _NumericalFailure(RuntimeError):
    pass


def _numerical_errors():
    from .energy import BoxConstraintViolated
    from .gamma_lab import StudyError
    from .profile import ProfileSearchError
    from .repair import RepairError
    from .solver import SolverError

    return (BoxConstraintViolated, StudyError, ProfileSearchError, RepairError, SolverError, _NumericalFailure,
            FloatingPointError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_INVALID
    if args.print_default_config:
        sys.stdout.write(dumps_config(default_config()))
        return EXIT_OK
    if not args.command:
        sys.stderr.write(parser.format_usage())
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else default_config()
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        sys.stderr.write(f"invalid configuration: {exc}\n")
        return EXIT_INVALID
    out = args.out
    os.makedirs(out, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    handlers = {
        "profile": lambda: cmd_profile(cfg, out),
        "project": lambda: cmd_project(cfg, out),
        "repair": lambda: cmd_repair(cfg, out),
        "solve": lambda: cmd_solve(cfg, out),
        "study": lambda: cmd_study(cfg, out, getattr(args, "kind", None)),
        "check": lambda: cmd_check(cfg, out),
    }
    status = EXIT_OK
    outputs = []
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            outputs = handlers[args.command]()
        except _numerical_errors() as exc:
            sys.stderr.write(f"numerical failure: {exc}\n")
            status = EXIT_NUMERICAL
        except (ConfigError, ValueError) as exc:
            sys.stderr.write(f"invalid input: {exc}\n")
            status = EXIT_INVALID
    manifest = {
        "version": __version__,
        "subcommand": args.command if args.command != "study" else f"study {args.kind}",
        "config_sha256": config_hash(cfg),
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "exit_code": status,
        "outputs": outputs,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    with open(os.path.join(out, "config.toml"), "w") as fh:
        fh.write(dumps_config(cfg))
    return status


if __name__ == "__main__":
    sys.exit(main())
