"""Command-line entry point: ``damagedyn <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 solver/step error,
4 audit failure (only with ``--strict``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import build_problem, config_from_dict, load_config
from .energy import audit_trajectory, build_ledger, threshold_series
from .errors import ConfigError, DamageDynError, OracleCapError, SolverError, StepError
from .dynamics import run_dynamics
from .harness import converge_harness, homogenize_table, oracle_battery, relaxation_table

log = logging.getLogger("damagedyn")

EXIT_OK, EXIT_CONFIG, EXIT_STEP, EXIT_AUDIT = 0, 2, 3, 4


def _out_dir(cfg, override):
    return Path(override) if override else Path(cfg.directory)


def _audit_lines(audit):
    return [
        f"identity residual max   {audit.identity_max:.3e}  {'PASS' if audit.identity_passed else 'FAIL'}",
        f"inequality slack max    {audit.inequality.max_slack:.3e} (tol {audit.inequality.tolerance:.1e})  "
        f"{'PASS' if audit.inequality.passed else 'FAIL'}",
        f"nestedness violations   {audit.nested_violations}",
        f"M-threshold violations  {audit.threshold_M_violations}",
        f"dissipation monotone    {audit.dissipation_monotone}",
    ]


def cmd_run(args):
    cfg = load_config(args.config)
    out = _out_dir(cfg, args.out)
    problem = build_problem(cfg)
    scheme = problem[0]
    try:
        traj = run_dynamics(cfg, problem=problem)
    except (StepError, SolverError) as exc:
        traj = exc.trajectory
        ledger = build_ledger(scheme, traj)
        io.write_outputs(out, cfg, scheme, traj, ledger, threshold_series(scheme, traj, cfg.deltas), error=exc)
        log.error("run aborted after %d step(s): %s", len(traj) - 1, exc)
        return EXIT_STEP
    ledger = build_ledger(scheme, traj)
    io.write_outputs(out, cfg, scheme, traj, ledger, threshold_series(scheme, traj, cfg.deltas))
    audit = audit_trajectory(scheme, traj, ledger)
    for line in _audit_lines(audit):
        print(line)
    print(f"wrote {out}")
    if args.strict and not audit.passed:
        return EXIT_AUDIT
    return EXIT_OK


def cmd_converge(args):
    cfg = load_config(args.config)
    out = _out_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = converge_harness(cfg, args.levels)
    header = ["level", "nx", "ny", "steps", "dt", "h", "l2_error", "damage_volume", "area_above_M",
              "max_area_above_M", "max_grad_undamaged"]
    header += [f"area_above_lambda_plus_{d:g}" for d in report.deltas]
    rows = []
    for lv in report.levels:
        nan = float("nan")
        row = [lv.level, lv.nx, lv.ny, lv.steps, lv.dt, lv.h]
        row += [nan if v is None else v for v in (lv.l2_error, lv.damage_volume, lv.area_above_M,
                                                    lv.max_area_above_M, lv.max_grad_undamaged)]
        row += list(lv.area_above_lambda) or [nan] * len(report.deltas)
        rows.append(row)
        status = lv.error or "ok"
        print(f"level {lv.level}: nx={lv.nx} steps={lv.steps} err={lv.l2_error} damage={lv.damage_volume} [{status}]")
    io.write_csv(out / "converge.csv", header, rows)
    summary = {
        "orders": report.orders,
        "errors": report.errors,
        "failures": {lv.level: lv.error for lv in report.levels if lv.error},
    }
    (out / "converge.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print("observed orders:", report.orders)
    if args.strict and any(lv.error or lv.audit_passed is False for lv in report.levels):
        return EXIT_AUDIT
    return EXIT_OK


def cmd_oracle(args):
    cfg = load_config(args.config, check_initial=False)
    out = _out_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if args.seed is None else args.seed
    cases = oracle_battery(cfg, args.battery, seed)
    header = ("case", "dt", "volume_entry", "energy_alternating", "energy_oracle", "gap", "equal",
              "volume_alternating", "volume_oracle", "slack_bound")
    io.write_csv(
        out / "oracle.csv",
        header,
        ((c.case, c.dt, c.volume_entry, c.energy_alternating, c.energy_oracle, c.gap, c.equal(),
          c.volume_alternating, c.volume_oracle, c.slack_bound) for c in cases),
    )
    n_eq = sum(c.equal() for c in cases)
    n_lb = sum(c.gap >= -1e-9 for c in cases)
    print(f"oracle lower bound held in {n_lb}/{len(cases)}; equality in {n_eq}/{len(cases)}")
    for c in cases:
        if not c.equal():
            print(f"  case {c.case}: gap {c.gap:.3e} (first-step slack dt^2/2 = {c.slack_bound:.3e})")
    if args.strict and n_lb < len(cases):
        return EXIT_AUDIT
    return EXIT_OK


def cmd_relaxation(args):
    cfg = load_config(args.config, check_initial=False)
    out = _out_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    r = cfg.relaxation
    header, rows = relaxation_table(
        cfg.material, r.get("t_max"), int(r.get("points", 200)), int(r.get("grid_size", 200))
    )
    io.write_csv(out / "relaxation.csv", header, rows)
    worst = max(abs(row[2] - row[3]) for row in rows)
    print(f"max |W_relaxed - lamination oracle| = {worst:.3e}; wrote {out / 'relaxation.csv'}")
    if args.strict and worst > 1e-10:
        return EXIT_AUDIT
    return EXIT_OK


def cmd_homogenize(args):
    cfg = load_config(args.config, check_initial=False)
    out = _out_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    header, rows = homogenize_table(cfg.homogenize, cfg.material)
    io.write_csv(out / "homogenize.csv", header, rows)
    for row in rows:
        print(f"{row[0]:<32} A11={row[2]:.8f} A12={row[3]:.2e} A22={row[4]:.8f}")
    return EXIT_OK


def cmd_audit(args):
    run_dir = Path(args.run_dir)
    echo = run_dir / "config.echo.json"
    if not echo.exists():
        raise ConfigError(f"{echo} not found")
    cfg = config_from_dict(json.loads(echo.read_text(encoding="utf-8")), check_initial=False)
    scheme, u0, v0, D0 = build_problem(cfg)
    snaps = io.load_snapshots(run_dir, scheme.mesh)
    if not snaps:
        print("no snapshots to audit")
        return EXIT_AUDIT if args.strict else EXIT_OK
    traj = io.trajectory_from_snapshots(scheme, v0, snaps)
    ok = True
    if traj is not None:
        ledger = build_ledger(scheme, traj)
        audit = audit_trajectory(scheme, traj, ledger)
        for line in _audit_lines(audit):
            print(line)
        io.write_csv(run_dir / "audit.ledger.csv", ledger[0].FIELDS, (r.as_tuple() for r in ledger))
        ok = audit.passed
    else:
        print("snapshots not contiguous: identity and inequality audits unavailable")
        steps = sorted(snaps)
        nested = sum(not np.all(snaps[b][1] | ~snaps[a][1]) for a, b in zip(steps[:-1], steps[1:]))
        from .fem import gradient_norms

        over = 0
        if cfg.material.damage_enabled:
            for s in steps[1:]:
                u, flags = snaps[s]
                over += int(np.count_nonzero((gradient_norms(scheme.mesh, u) > cfg.material.M) & ~flags))
        print(f"nestedness violations   {nested}")
        print(f"M-threshold violations  {over}")
        ok = nested == 0 and over == 0
    if args.strict and not ok:
        return EXIT_AUDIT
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="damagedyn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="JSON configuration file")
        sp.add_argument("--out", help="output directory (default: outputs.directory)")
        sp.add_argument("--strict", action="store_true", help="exit 4 when an audit fails")

    sp = sub.add_parser("run", help="run the incremental scheme")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("converge", help="joint h/dt refinement study")
    common(sp)
    sp.add_argument("--levels", type=int, default=3)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("oracle", help="alternating minimization vs exhaustive search on a tiny mesh")
    common(sp)
    sp.add_argument("--battery", type=int, default=30)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("relaxation", help="tabulate W, its convex envelope and laminate fractions")
    common(sp)
    sp.set_defaults(func=cmd_relaxation)

    sp = sub.add_parser("homogenize", help="periodic cell problems")
    common(sp)
    sp.set_defaults(func=cmd_homogenize)

    sp = sub.add_parser("audit", help="re-run energy and threshold audits from a run directory")
    sp.add_argument("run_dir")
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleCapError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepError, SolverError) as exc:
        print(f"step error: {exc}", file=sys.stderr)
        return EXIT_STEP
    except DamageDynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STEP


if __name__ == "__main__":
    sys.exit(main())
