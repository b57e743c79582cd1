"""Command-line front end.

Subcommands: validate, energy, simulate, exit-times, nucleation-map,
landscape-verify, snapshot.  Exit codes: 0 success, 1 usage/parse error,
2 check failure, 3 timeout-dominated run.  All outputs are deterministic
given (config, seed); CSV headers carry a timestamp line unless
--no-timestamp is passed.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path as FilePath

import numpy as np

from . import __version__
from . import experiments as xp
from . import landscape as ls
from . import model
from .config import RunConfig, load_config
from .dynamics import RNG_NAME, parse_targets, run_until_hit, write_hitting_csv, write_trajectory_csv
from .errors import ConfigError, GeometryError, InvalidParametersError
from .model import homogeneous, save_snapshot

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2
EXIT_TIMEOUT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="blumecapel", description=__doc__)
    parser.add_argument("--version", action="version", version=f"blumecapel {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="run configuration file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", type=str, default=None, help="override the output directory")
    common.add_argument("--workers", type=int, default=1, help="replica worker processes")
    common.add_argument(
        "--no-timestamp", action="store_true", help="suppress the timestamp header line"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="parameter gates and critical quantities")
    cmd = sub.add_parser("energy", parents=[common], help="energy report")
    cmd.add_argument("--snapshot", type=str, default=None, help="configuration file to evaluate")
    sub.add_parser("simulate", parents=[common], help="single seeded trajectory")
    sub.add_parser("exit-times", parents=[common], help="exit-time sweep with Arrhenius fit")
    sub.add_parser("nucleation-map", parents=[common], help="first-supercritical-cluster map")
    cmd = sub.add_parser("landscape-verify", parents=[common], help="landscape invariant suite")
    cmd.add_argument(
        "--inject-fault",
        action="store_true",
        help="deliberately corrupt a flip energy to prove the suite notices (testing hook)",
    )
    cmd = sub.add_parser("snapshot", parents=[common], help="write a named configuration")
    cmd.add_argument(
        "--which",
        required=True,
        help="sigma_c | sigma_c_tilde | sigma_s | <frame kind>:ELL | sigma_F:M,N",
    )
    return parser


def _require_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("this command needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _header_lines(args, cfg: RunConfig, command: str) -> list[str]:
    lines = [
        f"generated-by: blumecapel {command}",
        f"rng: {RNG_NAME}",
        f"params: J={cfg.J!r} lambda={cfg.lam!r} h={cfg.h!r} L={cfg.L} beta={cfg.beta!r} "
        f"boundary={cfg.boundary_mode}",
        f"seed: {cfg.seed}",
    ]
    if not args.no_timestamp:
        lines.append(f"timestamp: {datetime.now(timezone.utc).isoformat()}")
    return lines


def _out_dir(cfg: RunConfig) -> FilePath:
    out = FilePath(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -----------------------------------------------------------------

def cmd_validate(args) -> int:
    cfg = _require_config(args)
    p = cfg.parameters()
    report = model.validate_condition(p)
    print("parameter gates:")
    for i, item in enumerate((report.item1, report.item2, report.item3), start=1):
        status = "pass" if item.passed else ("n/a " if not item.applicable else "FAIL")
        print(f"  item {i}: {status}  {item.detail}")
    for name, (value, non_integer) in report.ratios.items():
        mark = "non-integer" if non_integer else "INTEGER"
        print(f"    {name} = {value:.9g}  ({mark})")
    rows = []
    if p.lam > p.h > 0:
        q = ls.critical_quantities(p)
        rows = q.as_rows()
        print("critical quantities:")
        for name, value in rows:
            print(f"  {name:10s} = {value:g}")
        if not report.item1.passed:
            print("  warning: smallness gate failed; quantities are formal")
    else:
        print("critical quantities: not defined (requires lam > h > 0)")
    if args.out is not None or cfg.out_dir != "out":
        out = _out_dir(cfg)
        with open(out / "landscape_report.csv", "w") as fh:
            for line in _header_lines(args, cfg, "validate"):
                fh.write(f"# {line}\n")
            fh.write("quantity,value\n")
            for name, value in rows:
                fh.write(f"{name},{value!r}\n")
    return EXIT_OK if report.hard_pass else EXIT_CHECK_FAILED


def cmd_energy(args) -> int:
    cfg = _require_config(args)
    p = cfg.parameters()
    print(f"H(+1) = {model.homogeneous_energy(1, p)!r}")
    print(f"H(0)  = {model.homogeneous_energy(0, p)!r}")
    print(f"H(-1) = {model.homogeneous_energy(-1, p)!r}")
    report = model.energy_hierarchy(p, strict=False)
    order = " < ".join({1: "H(+1)", 0: "H(0)", -1: "H(-1)"}[v] for v in report.ordering)
    note = "" if report.consistent else "  (differs from the asymptotic ordering)"
    print(f"ordering: {order}{note}")
    if p.lam > p.h > 0:
        for name, value in ls.critical_quantities(p).as_rows():
            print(f"{name:10s} = {value:g}")
    if args.snapshot:
        eta, _ = model.load_snapshot(args.snapshot)
        if eta.L != p.L:
            raise ConfigError(f"snapshot has L={eta.L}, config says L={p.L}")
        print(f"H(snapshot) = {model.hamiltonian(eta, p)!r}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _require_config(args)
    p = cfg.parameters()
    start = xp.start_configuration(cfg)
    max_steps = cfg.max_steps or xp.default_max_steps(p)
    record = run_until_hit(
        p,
        start,
        cfg.target,
        max_steps,
        cfg.seed,
        stride=cfg.stride,
        supercrit_threshold=cfg.supercritical_threshold,
    )
    out = _out_dir(cfg)
    write_trajectory_csv(out / "trajectory.csv", record, _header_lines(args, cfg, "simulate"))
    write_hitting_csv(out / "hitting.csv", [record], _header_lines(args, cfg, "simulate"))
    status = "timeout" if record.timed_out else f"hit {record.hit}"
    print(f"{status} after {record.tau} steps ({record.sweeps(p):.1f} sweeps)")
    if record.supercritical:
        ev = record.supercritical
        print(
            f"first supercritical cluster at step {ev.step}: centroid "
            f"({ev.centroid[0]:.2f}, {ev.centroid[1]:.2f}), size {ev.size}"
        )
    print(f"wrote {out / 'trajectory.csv'}")
    return EXIT_TIMEOUT if record.timed_out else EXIT_OK


def cmd_exit_times(args) -> int:
    cfg = _require_config(args)
    result = xp.run_exit_times(cfg, workers=max(1, args.workers))
    out = _out_dir(cfg)
    header = _header_lines(args, cfg, "exit-times")
    for beta, recs in result.records.items():
        write_hitting_csv(out / f"exit_times_beta{beta:g}.csv", recs, header)
    p0 = cfg.parameters(beta=cfg.beta_grid[0])
    barrier, label = xp.theoretical_barrier(p0)
    print(f"{'beta':>6} {'mean tau':>14} {'log mean':>10} {'se':>8} {'timeouts':>8}")
    for beta in cfg.beta_grid:
        agg = result.aggregates[beta]
        print(
            f"{beta:6g} {agg['mean_tau']:14.6g} {agg['log_mean_tau']:10.4f} "
            f"{agg['se_log_mean']:8.4f} {agg['n_timeouts']:8d}"
        )
    if result.fit is None:
        print(f"fit aborted: all replicas timed out at beta = {result.aborted_betas}")
        return EXIT_TIMEOUT
    fit = result.fit
    with open(out / "arrhenius_fit.csv", "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("beta,log_mean_tau,mean_log_tau,se_log_mean,n_timeouts\n")
        for i, beta in enumerate(fit.betas):
            fh.write(
                f"{beta!r},{fit.log_mean_tau[i]!r},{fit.mean_log_tau[i]!r},"
                f"{fit.se_log_mean[i]!r},{fit.n_timeouts[i]}\n"
            )
        fh.write(f"# slope,{fit.slope!r}\n")
        fh.write(f"# intercept,{fit.intercept!r}\n")
        fh.write(f"# r_squared,{fit.r_squared!r}\n")
    print(f"fitted slope  = {fit.slope:.4f} (R^2 = {fit.r_squared:.4f})")
    print(f"theoretical   = {barrier:.4f} ({label})")
    print(f"wrote {out / 'arrhenius_fit.csv'}")
    return EXIT_OK


def cmd_nucleation_map(args) -> int:
    cfg = _require_config(args)
    nm = xp.run_nucleation_map(cfg, workers=max(1, args.workers))
    out = _out_dir(cfg)
    header = _header_lines(args, cfg, "nucleation-map")
    with open(out / "nucleation_map.csv", "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("x,y,count\n")
        for x in range(1, cfg.L + 1):
            for y in range(1, cfg.L + 1):
                fh.write(f"{x},{y},{nm.histogram[x - 1, y - 1]}\n")
    write_hitting_csv(out / "nucleation_records.csv", nm.records, header)
    print(f"events: {nm.n_events}, timeouts: {nm.n_timeouts}")
    print(
        f"corner fraction (Chebyshev radius {nm.corner_radius:g}): "
        f"{nm.corner_fraction:.3f} (uniform null {nm.expected_uniform:.3f})"
    )
    print(f"wrote {out / 'nucleation_map.csv'}")
    if nm.n_timeouts > len(nm.records) // 2:
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_landscape_verify(args) -> int:
    cfg = _require_config(args)
    p = cfg.parameters()
    checks = xp.landscape_verification(p, inject_fault=args.inject_fault)
    out = _out_dir(cfg)
    with open(out / "landscape_checks.csv", "w") as fh:
        for line in _header_lines(args, cfg, "landscape-verify"):
            fh.write(f"# {line}\n")
        fh.write("check,status,detail\n")
        for c in checks:
            detail = c.detail.replace(",", ";")
            fh.write(f"{c.name},{c.status},{detail}\n")
    failed = [c for c in checks if c.status == "fail"]
    for c in checks:
        print(f"{c.status.upper():5s} {c.name}: {c.detail}")
    print(f"wrote {out / 'landscape_checks.csv'}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(c.name for c in failed)}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_snapshot(args) -> int:
    cfg = _require_config(args)
    p = cfg.parameters()
    which = args.which
    builders = {
        "sigma_c": lambda: ls.critical_droplet(p),
        "sigma_c_tilde": lambda: ls.critical_droplet_with_protuberance(p),
        "sigma_s": lambda: ls.saddle_configuration(p),
    }
    if which in builders:
        eta = builders[which]()
    elif which.startswith("sigma_F:"):
        try:
            m, n = (int(v) for v in which.split(":", 1)[1].split(","))
        except ValueError:
            raise ConfigError(f"bad sigma_F spec {which!r}; expected sigma_F:M,N") from None
        eta = ls.chopped_corner_rectangle(m, n, p)
    elif ":" in which:
        kind_name, _, ell_text = which.partition(":")
        try:
            kind = ls.FrameKind(kind_name)
            ell = int(ell_text)
        except ValueError:
            raise ConfigError(f"unknown snapshot {which!r}") from None
        eta = ls.build_frame(ls.FrameSpec(kind, ell), p)
    else:
        raise ConfigError(f"unknown snapshot {which!r}")
    out = _out_dir(cfg)
    name = which.replace(":", "_").replace(",", "x") + ".snap"
    save_snapshot(out / name, eta, p)
    n_minus, n_zero, n_plus = eta.counts()
    print(f"wrote {out / name} (pluses {n_plus}, zeros {n_zero}, minuses {n_minus})")
    print(f"H = {model.hamiltonian(eta, p)!r}")
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "energy": cmd_energy,
    "simulate": cmd_simulate,
    "exit-times": cmd_exit_times,
    "nucleation-map": cmd_nucleation_map,
    "landscape-verify": cmd_landscape_verify,
    "snapshot": cmd_snapshot,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParametersError, GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
