"""Command-line entry point ``ellq relax|stop|sweep|report|spectral``.

Values come from flags, then from an optional flat ``key = value`` config
file, then from built-in defaults. Exit codes: 0 success, 1 numerical or
acceptance failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ellq import __version__
from ellq.acceptance import AcceptanceContext, run_all
from ellq.cases import CASE_LABELS, rhs_case
from ellq.certificate import certify, empirical_decay, write_certificate_csv
from ellq.dynamics import DEFAULT_THETA, init_cold, trajectory
from ellq.errors import ConfigError, DenseCeilingError, EllqError, InvalidParameterError, NoEntryError
from ellq.experiments import case_systems, time_sweep
from ellq.fem import assemble_system, write_matrix_market, write_spectral_csv, write_vector
from ellq.filters import degree_sweep
from ellq.linalg import direct_solve
from ellq.mesh import write_mesh_csv
from ellq.stopping import (
    CheckpointRunner,
    default_config,
    run_dynamic_solve,
    write_checkpoints_csv,
    write_results_csv,
)
from ellq.svg import Plot

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

# key -> parser; flags use the same names with "_" spelled "-"
CONFIG_KEYS = {
    "n": str,
    "rhs": str,
    "eps": float,
    "p0": float,
    "shots": int,
    "seed": int,
    "t_max": float,
    "theta": float,
    "out": str,
    "nu": float,
    "k_max": int,
    "growth": float,
    "t0": float,
    "max_degree": int,
    "stride": int,
}

DEFAULTS = {
    "relax": {"n": "16", "rhs": "manufactured", "t_max": 40.0},
    "stop": {"n": "16", "rhs": "I"},
    "sweep": {"n": "16", "rhs": ",".join(CASE_LABELS), "t_max": 30.0},
    "report": {"n": "16"},
    "spectral": {"n": "4,8,16", "rhs": "I"},
}
COMMON_DEFAULTS = {"eps": 1e-3, "seed": 0, "theta": DEFAULT_THETA, "out": "ellq_out", "nu": 0.01,
                   "k_max": 10, "growth": 2.0, "max_degree": 160, "stride": 10}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def _convert(key, value):
    try:
        return CONFIG_KEYS[key](value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def resolve(command: str, flags: dict, config_path=None) -> dict:
    """Merge flags over config-file values over defaults."""
    merged = dict(COMMON_DEFAULTS)
    merged.update(DEFAULTS[command])
    if config_path:
        merged.update(read_config(config_path))
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


def _int_list(text) -> list[int]:
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad mesh size list {text!r}") from exc
    if not vals:
        raise ConfigError("empty mesh size list")
    return vals


def _single_n(cfg) -> int:
    vals = _int_list(cfg["n"])
    if len(vals) != 1:
        raise ConfigError(f"this command takes one mesh size, got {cfg['n']!r}")
    return vals[0]


def _labels(text) -> list[str]:
    return [rhs_case(v).label for v in str(text).split(",") if v.strip()]


def _out_dir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stopping_config(cfg, cert):
    return default_config(cert, epsilon=cfg["eps"], seed=cfg["seed"], p0=cfg.get("p0"),
                          N_shot=cfg.get("shots"), K_max=cfg["k_max"], nu=cfg["nu"],
                          growth=cfg["growth"], t0=cfg.get("t0"), theta=cfg["theta"])


def cmd_relax(cfg) -> int:
    n = _single_n(cfg)
    label = rhs_case(cfg["rhs"]).label
    system = assemble_system(n, rhs_case(label))
    out = _out_dir(cfg)
    traj = trajectory(system, init_cold(system), cfg["t_max"], theta=cfg["theta"], stride=cfg["stride"],
                      reference=direct_solve(system))
    traj.write_csv(out / "trajectory.csv")
    plot = Plot(f"Residual dynamics, n={n}, case {label}", "t", "value", logy=True)
    for name in ("norm_x", "norm_w", "p_res", "norm_rA"):
        plot.add(name, traj.t, getattr(traj, name))
    plot.write(out / "relax.svg")
    print(f"relax: n={n} case={label} T={cfg['t_max']} final rel_err={traj.rel_err[-1]:.3e}")
    return EXIT_OK


def _checkpoint_plot(label, log, p0):
    plot = Plot(f"Checkpoint estimates, case {label}", "t_k", "p_hat", logx=True, logy=True)
    t = [rec.t_k for rec in log]
    p_hat = [rec.p_hat for rec in log]
    delta = [rec.delta for rec in log]
    plot.add("p_hat", t, p_hat, markers=True)
    plot.add("p_res (exact)", t, [rec.p_true for rec in log], markers=True)
    plot.band(t, [max(p - d, 0.0) for p, d in zip(p_hat, delta)], [p + d for p, d in zip(p_hat, delta)])
    plot.hline(p0, "dashed", "p0")
    return plot


def cmd_stop(cfg) -> int:
    n = _single_n(cfg)
    out = _out_dir(cfg)
    systems = case_systems(n, _labels(cfg["rhs"]))
    results = []
    code = EXIT_OK
    cert = None
    for label, system in systems.items():
        cert = certify(system) if cert is None else cert
        config = _stopping_config(cfg, cert)
        try:
            res = run_dynamic_solve(system, config, cert, runner=CheckpointRunner(system, theta=config.theta),
                                    label=label)
            log = res.checkpoint_log
            results.append(res)
            print(f"stop: case {label} t_ent={res.t_ent:.4g} T_star={res.T_star:.4g} "
                  f"T_worst={res.T_worst:.4g} final_rel_err={res.final_rel_err:.3e}")
            if res.final_rel_err > config.epsilon:
                code = EXIT_FAILURE
        except NoEntryError as exc:
            log = exc.log
            print(f"stop: case {label}: {exc}", file=sys.stderr)
            code = EXIT_FAILURE
        write_checkpoints_csv(log, out / f"checkpoints_{label}.csv")
        _checkpoint_plot(label, log, config.p0).write(out / f"checkpoints_{label}.svg")
    write_results_csv(results, out / "results.csv")
    return code


def cmd_sweep(cfg) -> int:
    n = _single_n(cfg)
    eps = cfg["eps"]
    out = _out_dir(cfg)
    systems = case_systems(n, _labels(cfg["rhs"]))
    operator = next(iter(systems.values())) if systems else assemble_system(n, rhs_case("I"))
    cert = certify(operator)
    deg = degree_sweep(operator, {k: s.b for k, s in systems.items()}, eps, cfg["max_degree"])
    tim = time_sweep(systems, cert, eps, cfg["t_max"], theta=cfg["theta"], stride=cfg["stride"])
    deg.write_curves(out / "degree_sweep.csv")
    deg.write_summary(out / "degree_summary.csv")
    tim.write_curves(out / "time_sweep.csv")
    tim.write_summary(out / "time_summary.csv")

    left = Plot(f"Inverse-filter degree sweep, n={n}", "polynomial degree", "normalized state error", logy=True)
    for label, errs in deg.errors.items():
        left.add(f"case {label}", deg.degrees, errs)
    left.hline(eps, "dotted", "epsilon")
    left.vline(deg.d_wc, "dashed", "worst case d_wc (design)")
    crossings = [c for c in deg.crossing.values() if c is not None]
    if crossings:
        left.vline(max(crossings), "dashdot", "latest crossing")
    left.write(out / "degree_sweep.svg")

    right = Plot(f"ODE-time sweep, n={n}", "T", "relative error", logy=True)
    for label, (t, err) in tim.curves.items():
        right.add(f"case {label}", t, err)
    right.hline(eps, "dotted", "epsilon")
    if tim.T_wc:
        right.vline(max(tim.T_wc.values()), "dashed", "worst case T_wc")
    crossings = [c for c in tim.crossing.values() if c is not None]
    if crossings:
        right.vline(max(crossings), "dashdot", "latest crossing")
    right.write(out / "time_sweep.svg")
    for label in systems:
        print(f"sweep: case {label} crossing degree={deg.crossing[label]} (d_wc={deg.d_wc}) "
              f"crossing T={tim.crossing[label]} (T_wc={tim.T_wc[label]:.4g})")
    return EXIT_OK


def cmd_report(cfg) -> int:
    out = _out_dir(cfg)
    ctx = AcceptanceContext(n=_single_n(cfg), epsilon=cfg["eps"], g_dump=cfg.get("g_dump"))
    results = run_all(ctx, echo=print)
    with open(out / "acceptance.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["criterion", "name", "passed", "detail"])
        for r in results:
            w.writerow([r.number, r.name, int(r.passed), r.detail])
    failed = [r.number for r in results if not r.passed]
    print(f"report: {len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_spectral(cfg) -> int:
    sizes = _int_list(cfg["n"])
    out = _out_dir(cfg)
    case = rhs_case(cfg["rhs"])
    systems = [assemble_system(n, case) for n in sizes]
    write_spectral_csv(systems, out / "spectral.csv")
    rows = []
    for n, system in zip(sizes, systems):
        fit = empirical_decay(system, 40.0, transient=10.0)
        rows.append((n, certify(system), fit))
    write_certificate_csv(rows, out / "certificate.csv")
    for n, cert, fit in rows:
        print(f"spectral: n={n} gamma0={cert.gamma0:.5g} c_st={cert.c_st:.5g} C_st={cert.C_st:.5g} "
              f"C_tail={cert.C_tail:.5g} c_hat={fit.c_hat:.5g}")
    if cfg.get("dump"):
        system = systems[-1]
        write_matrix_market(system.G, out / "G.mtx")
        write_vector(system.b, out / "b.txt")
        write_mesh_csv(system.mesh, out)
    return EXIT_OK


COMMANDS = {"relax": cmd_relax, "stop": cmd_stop, "sweep": cmd_sweep, "report": cmd_report,
            "spectral": cmd_spectral}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ellq", description="Residual-monitored relaxation solver for P1 Poisson problems.")
    parser.add_argument("--version", action="version", version=f"ellq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--n", help="cells per side (spectral: comma list)")
        p.add_argument("--rhs", help="I, II, III, IV or manufactured (stop/sweep: comma list)")
        p.add_argument("--eps", type=float, help="target relative accuracy")
        p.add_argument("--p0", type=float, help="residual-probability threshold")
        p.add_argument("--shots", type=int, help="shots per checkpoint")
        p.add_argument("--seed", type=int, help="base seed of the checkpoint streams")
        p.add_argument("--t-max", dest="t_max", type=float, help="final time (relax, sweep)")
        p.add_argument("--theta", type=float, help="RK4 step factor, dt = theta/(1+|G|)")
        p.add_argument("--out", help="output directory (created if missing)")
        p.add_argument("--config", help="flat key = value config file")
        if name == "spectral":
            p.add_argument("--dump", action="store_true", help="also write G.mtx, b.txt and mesh CSVs")
        if name == "report":
            p.add_argument("--g-dump", dest="g_dump", help="Matrix Market G to check instead of the assembled one")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = resolve(args.command, flags, args.config)
        return COMMANDS[args.command](cfg)
    except (InvalidParameterError, DenseCeilingError) as exc:
        print(f"ellq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EllqError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ellq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
