"""Command-line driver: ``superocc <command> [--config PATH] [--seed N] [--threads N] [--out DIR]``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 runtime failure. ``SUPEROCC_OUT_DIR`` overrides the output directory of the
config file (``--out`` still wins).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import BACKEND, __version__
from . import config as C
from .errors import ConfigError, DomainError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
OUT_ENV = "SUPEROCC_OUT_DIR"


def _dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_default)
        fh.write("\n")


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _prepare(args, command: str):
    cfg = C.load(command, args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.threads is not None:
        updates["threads"] = args.threads
    out = args.out or os.environ.get(OUT_ENV) or cfg.out or os.path.join("superocc_out", command)
    updates["out"] = out
    cfg = cfg.model_copy(update=updates)
    if cfg.threads < 1:
        raise ConfigError("must be >= 1", "threads")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "package_version": __version__,
        "schema_version": C.SCHEMA_VERSION,
        "backend": BACKEND,
        "command": command,
        "seed": cfg.seed,
        "config": json.loads(cfg.model_dump_json()),
    }
    _dump(manifest, path / "manifest.json")
    return cfg, path


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out: Path) -> int:
    from .environment import replicate_rng
    from .occupation import accumulate, density_field
    from .particles import export_binary, export_csv, run

    sim = C.build_sim(cfg.sim, cfg.seed)
    grid = C.build_grid(cfg.density, sim.d) if cfg.density is not None else None
    rows = []
    for r in range(cfg.replicates):
        traj = run(sim, replicate_rng(cfg.seed, r))
        if "csv" in cfg.formats:
            export_csv(traj, out / f"trajectory_{r:04d}.csv")
        if "binary" in cfg.formats:
            export_binary(traj, out / f"trajectory_{r:04d}.bin")
        if grid is not None:
            field = density_field(accumulate(traj), sim.horizon, cfg.bandwidth, grid)
            field.to_csv(out / f"density_{r:04d}.csv")
            field.to_matrix(out / f"density_{r:04d}.txt")
        ext = traj.extinction_time
        rows.append([r, repr(float(traj.masses[-1])), "" if ext is None else repr(ext),
                     repr(traj.clamp_fraction), len(traj.snapshots)])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "final_mass", "extinction_time", "clamp_fraction", "n_snapshots"])
        w.writerows(rows)
    return EXIT_OK


def cmd_verify_moments(cfg, out: Path) -> int:
    from .experiments import first_moment_reports, moment_ensemble, second_moment_reports
    from .oracles import MomentReport, write_reports_csv, write_reports_json

    sim = C.build_sim(cfg.sim, cfg.seed)
    phis = [C.build_fn(f) for f in cfg.functions]
    for p in phis:
        if getattr(p, "dim", None) not in (None, sim.d):
            raise ConfigError("test function dimension differs from d", "functions")
    ens = moment_ensemble(sim, cfg.replicates, phis, cfg.threads)
    reports = first_moment_reports(ens)
    if cfg.second_moments:
        try:
            reports += second_moment_reports(ens, cfg.n_paths, cfg.seed, cfg.dt_fk_fraction * sim.horizon)
        except (ArithmeticError, ValueError) as exc:
            reports.append(MomentReport("second moments", float("nan"), 0.0, float("nan"), failed=True,
                                        note=f"oracle failure: {exc}"))
    for r in reports:
        r.threshold = cfg.z_threshold
    write_reports_json(reports, out / "moments.json")
    write_reports_csv(reports, out / "moments.csv")
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'}  z={r.z:+.3f}  {r.identity}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_tanaka(cfg, out: Path) -> int:
    from .experiments import tanaka_experiment

    sim = C.build_sim(cfg.sim, cfg.seed)
    rep = tanaka_experiment(sim, cfg.replicates, tuple(cfg.a), cfg.alpha, cfg.eps, cfg.threads)
    _dump(rep, out / "tanaka.json")
    with open(out / "tanaka.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "mean_lhs", "se_lhs"] + (["eps_target"] if "eps_targets" in rep else []))
        for i, e in enumerate(rep["eps"]):
            row = [repr(e), repr(rep["mean_lhs"][i]), repr(rep["se_lhs"][i])]
            if "eps_targets" in rep:
                row.append(repr(rep["eps_targets"][i]))
            w.writerow(row)
    ok = rep["residual_ok"] and rep.get("monotone", True)
    print(f"{'PASS' if ok else 'FAIL'}  max residual {rep['max_residual']:.3g} (bound {rep['residual_bound']:.3g}); "
          f"monotone={rep.get('monotone', 'n/a')}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_green_rep(cfg, out: Path) -> int:
    from .experiments import green_experiment

    sim = C.build_sim(cfg.sim.model_copy(update={"unit_mass": cfg.dt_levels[-1]}), cfg.seed)
    rep = green_experiment(sim, cfg.dt_levels, cfg.replicates, tuple(cfg.a), cfg.alpha, cfg.threads)
    ok = all(r >= cfg.min_ratio for r in rep["ratios"])
    rep["min_ratio"] = cfg.min_ratio
    rep["passed"] = ok
    _dump(rep, out / "green_rep.json")
    print(f"{'PASS' if ok else 'FAIL'}  RMS ratios per dt halving: " + ", ".join(f"{r:.3f}" for r in rep["ratios"]))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_holder(cfg, out: Path) -> int:
    from .experiments import holder_experiment
    from .regularity import StructureFunctionFit, calibrate

    sim = C.build_sim(cfg.sim, cfg.seed)
    if sim.d != 1:
        print("note: d=2,3 exponents are reported without pass/fail")
    grid = C.build_grid(cfg.grid, sim.d)
    if cfg.calibration_only:
        cal = calibrate(cfg.seed, n_nodes=cfg.grid.n)
        _dump({"calibration": cal}, out / "holder.json")
        print(f"{'PASS' if cal['passed'] else 'FAIL'}  calibration harness")
        return EXIT_OK if cal["passed"] else EXIT_FAIL
    rep = holder_experiment(sim, cfg.replicates, grid, cfg.record_dt, t_min=cfg.t_min, n_lags=cfg.n_lags,
                            max_space_offset=cfg.max_space_offset, max_time_offset=cfg.max_time_offset,
                            threads=cfg.threads, seed_calibration=cfg.seed)
    if rep.get("gated"):
        _dump(rep, out / "holder.json")
        print("FAIL  calibration harness did not recover known exponents")
        return EXIT_FAIL
    lo, hi = cfg.spatial_range
    s_ok = lo <= rep["spatial"]["exponent"] <= hi
    lo, hi = cfg.temporal_range
    t_ok = lo <= rep["temporal"]["exponent"] <= hi
    rep["spatial_in_range"], rep["temporal_in_range"] = s_ok, t_ok
    _dump(rep, out / "holder.json")
    for name in ("spatial", "temporal"):
        StructureFunctionFit(**{k: (tuple(v) if k == "slope_ci" else v) for k, v in rep[name].items()}).write_csv(
            out / f"{name}_structure.csv")
    print(f"spatial exponent {rep['spatial']['exponent']:.3f}, temporal exponent {rep['temporal']['exponent']:.3f}")
    if sim.d != 1:
        return EXIT_OK
    return EXIT_OK if (s_ok and t_ok) else EXIT_FAIL


def cmd_kernel_selftest(cfg, out: Path) -> int:
    from .checks import bound_check_suite, kernel_selftest

    rep = kernel_selftest(cfg.seed, cfg.tolerance)
    bounds = bound_check_suite(cfg.seed, cfg.n_samples)
    rep["bounds"] = {k: v.to_dict() for k, v in bounds.items()}
    rep.pop("elapsed_s", None)
    ok = rep["passed"] and all(v.stable for v in bounds.values())
    _dump(rep, out / "kernel_selftest.json")
    for c in rep["checks"]:
        if not c["passed"]:
            print(f"FAIL  {c['name']}: {c['value']!r} vs {c['target']!r}")
    for v in bounds.values():
        print(f"{'PASS' if v.stable else 'FAIL'}  bound {v.name}: C={v.constant_2n:.6g} drift={v.drift:.3g}")
    print(f"{'PASS' if ok else 'FAIL'}  {rep['n_checks']} kernel identity checks")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_gnuplot(args) -> int:
    data = Path(args.data)
    dim = args.dim
    lines = [f"# gnuplot script for {data.name}", "set terminal pngcairo size 900,600",
             f"set output '{data.with_suffix('.png').name}'"]
    if dim == 1:
        lines += ["set xlabel 'x'", "set ylabel 'Y_h(t,x)'", f"plot '{data.name}' using 1:2 with lines notitle"]
    else:
        lines += ["set view map", "set xlabel 'x2'", "set ylabel 'x1'",
                  f"plot '{data.name}' index 0 nonuniform matrix using 2:1:3 with image notitle"]
    script = Path(args.script) if args.script else data.with_suffix(".gp")
    script.write_text("\n".join(lines) + "\n")
    print(script)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "verify-moments": cmd_verify_moments,
    "tanaka": cmd_tanaka,
    "green-rep": cmd_green_rep,
    "holder": cmd_holder,
    "kernel-selftest": cmd_kernel_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superocc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"superocc {__version__} ({BACKEND} core)")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--threads", type=int, metavar="N")
        sp.add_argument("--out", metavar="DIR")
    gp = sub.add_parser("gnuplot", help="write a gnuplot script for a density matrix file")
    gp.add_argument("data")
    gp.add_argument("--dim", type=int, default=1, choices=(1, 2, 3))
    gp.add_argument("--script")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gnuplot":
        return cmd_gnuplot(args)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg, out = _prepare(args, args.command)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failures map to exit code 3
        print(f"runtime error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
