"""Command line entry point: run, sweep, verify, synth, degeneracy-map."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .errors import ConfigError, SquidHQCError
from .scenario import (
    ScenarioConfig,
    degeneracy_map,
    format_checks,
    run_scenario,
    sig12,
    sweep_quality_factor,
    verify_all,
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_NUMERIC = 0, 2, 3, 4


def _load(args) -> ScenarioConfig:
    overrides = list(args.override or [])
    if args.dt is not None:
        overrides.append(f"integrator.dt={args.dt!r}")
    if args.config is None:
        raw: dict = {}
        from .scenario import apply_override

        for item in overrides:
            apply_override(raw, item)
        return ScenarioConfig.from_dict(raw)
    return ScenarioConfig.load(args.config, overrides)


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    return Path(args.out or cfg.data["outputs"]["dir"])


def cmd_run(args) -> int:
    cfg = _load(args)
    res = run_scenario(cfg, _out_dir(args, cfg))
    s = res.summary()
    print(f"config {s['config_hash']}  T = {s['operation_time_over_ginv']} /g")
    for r in s["reports"]:
        print(f"  {r['state']}: F_pert={r['f_perturbative']}  F_direct={r['f_direct']}"
              f"  int<n>dt={r['photon_integral']}")
    if s["angles"]:
        print(f"  eta={s['angles']['eta']}  phi={s['angles']['phi']}")
    for w in s["warnings"]:
        print(f"  warning: {w}")
    print(f"wrote {len(res.files)} files to {_out_dir(args, cfg)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    n_values = [float(x) for x in args.n.split(",")] if args.n else None
    res = sweep_quality_factor(cfg, n_values, jobs=args.jobs, out_dir=_out_dir(args, cfg),
                               direct=not args.no_direct and None)
    for row in res.rows:
        print(f"n={row.n:g} {row.state} F_pert={row.f_perturbative:.12g}"
              + ("" if row.f_direct is None else f" F_direct={row.f_direct:.12g}"))
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    checks = verify_all(cfg, quick=args.quick)
    print(format_checks(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def cmd_synth(args) -> int:
    from .gates import GateTarget, cnot_search, synthesize, verify_gate

    target = GateTarget(args.gate, None if args.gate == "cnot" else args.angle)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    if target.kind == "cnot":
        res = cnot_search()
        path, verdict = res.path, res.verdict
    else:
        path = synthesize(target)
        verdict = verify_gate(target, path)
    path_file = out / f"{target.kind}_path.csv"
    path.to_csv(path_file)
    verdict.path_file = str(path_file)
    verdict.write_json(out / f"{target.kind}_verdict.json")
    print(json.dumps(verdict.to_json(), indent=2))
    return EXIT_OK if verdict.passed else EXIT_VERIFY


def cmd_degeneracy(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rep = degeneracy_map(cfg, args.grid, out / "degeneracy.csv")
    print(f"{int(rep.flagged.sum())} of {len(rep.points)} points flagged;"
          f" kernel dimension at O = {int(rep.kernel_dims[0])}; min gap {sig12(rep.min_gaps.min())} g")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON (default: built-in CPHASE scenario)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")
    common.add_argument("--dt", type=float, help="integrator step in 1/g")
    common.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="set a config field, e.g. device.kappa_over_g=1e-4")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="squidhqc", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)
    sub.add_parser("run", parents=[common], help="run the scenario protocol").set_defaults(fn=cmd_run)
    sp = sub.add_parser("sweep", parents=[common], help="fidelity vs quality factor g/kappa = 10^n")
    sp.add_argument("--n", help="comma-separated exponents (default from the config)")
    sp.add_argument("--no-direct", action="store_true", help="skip the no-jump direct fidelities")
    sp.set_defaults(fn=cmd_sweep)
    vp = sub.add_parser("verify", parents=[common], help="cross-module oracle checks")
    vp.add_argument("--quick", action="store_true", help="skip the long fidelity comparison")
    vp.set_defaults(fn=cmd_verify)
    syn = sub.add_parser("synth", parents=[common], help="synthesize and verify a gate loop")
    syn.add_argument("--gate", choices=("ry", "rz", "cphase", "cnot"), required=True)
    syn.add_argument("--angle", type=float, default=0.0)
    syn.set_defaults(fn=cmd_synth)
    dp = sub.add_parser("degeneracy-map", parents=[common], help="kernel dimension over a control grid")
    dp.add_argument("--grid", type=int, default=7)
    dp.set_defaults(fn=cmd_degeneracy)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SquidHQCError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
