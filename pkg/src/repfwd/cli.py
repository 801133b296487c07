"""Command-line entry point: ``repfwd {thresholds,phase,simulate,sweep,validate}``.

Every output file starts with ``#`` comment lines carrying the schema name and
version, the seed and the fully resolved configuration, so a file is enough to
reproduce itself. Exit codes: 0 success, 1 failed validation checks, 2 invalid
configuration, 3 non-finite numerical state.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .abm import run_replicates
from .config import ExperimentConfig, from_dict, load_config, reference_config
from .dynamics import (
    compute_basins,
    integrate,
    ss_field,
    theorem1_check,
    theorem2_check,
    uss_field,
    uss_threshold,
    vertex_stability,
)
from .game import ConfigError, NumericalError, full_cooperation_baseline
from . import validation

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SCHEMA_VERSION = 1

# fixed column orders, bumped together with SCHEMA_VERSION
PHASE_COLUMNS = ("x1_0", "x2_0", "terminal", "t_conv")
TRAJECTORY_COLUMNS = ("trajectory", "t", "x1", "x2", "x3")
SIM_COLUMNS = (
    "t", "x1", "x2", "x3", "x_f", "mean_payoff", "throughput",
    "x1_se", "x2_se", "x3_se", "x_f_se", "mean_payoff_se", "throughput_se",
)
SUMMARY_COLUMNS = (
    "mode", "p_e", "mu", "replicates",
    "mean_payoff", "mean_payoff_se", "throughput", "throughput_se",
    "x_f", "x_f_se", "x1", "x2", "x3",
    "baseline_payoff", "baseline_throughput",
)
SWEEP_COLUMNS = (
    "mode", "p_e", "mu", "uss_threshold", "uss_fd_cess", "ss_ff_cess", "ss_fd_cess",
    "basin_FF", "basin_FD", "basin_DD", "basin_none",
)


# ---------------------------------------------------------------- writers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if v is None:
        return ""
    return str(v)


def _header(schema: str, cfg: ExperimentConfig, extra: dict | None = None) -> list[str]:
    lines = [
        f"# repfwd {schema} schema v{SCHEMA_VERSION}",
        f"# seed: {cfg.seed}",
        "# config: " + json.dumps(cfg.resolved(), sort_keys=True, separators=(",", ":")),
    ]
    for key, val in (extra or {}).items():
        lines.append(f"# {key}: {val}")
    return lines


def write_csv(path: Path, schema: str, cfg: ExperimentConfig, columns, rows, extra=None) -> Path:
    lines = _header(schema, cfg, extra)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _clean(obj):
    """JSON-safe copy: nan/inf become null, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    return obj


def write_json(path: Path, schema: str, cfg: ExperimentConfig, payload: dict) -> Path:
    doc = {
        "schema": schema,
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "config": cfg.resolved(),
        **payload,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _tag(v: float) -> str:
    return repr(float(v)).replace(".", "p").replace("-", "m")


# --------------------------------------------------------------- commands


def _stability_dict(report) -> dict:
    out = {}
    for name, vs in report.vertices.items():
        out[name] = {
            "jacobian": vs.jacobian,
            "eigenvalues": [complex(e) for e in vs.eigenvalues],
            "normalized_eigenvalues": [complex(e) for e in report.normalized_eigenvalues(name)],
            "stable": vs.stable,
        }
    return out


def cmd_thresholds(cfg: ExperimentConfig, args) -> int:
    p, k = cfg.game_params(), cfg.link_matrix()
    payload = {
        "uss": theorem1_check(p).as_dict(),
        "ss": theorem2_check(p, k).as_dict(),
        "uss_vertex_stability": _stability_dict(vertex_stability(uss_field(p))),
        "ss_vertex_stability": _stability_dict(vertex_stability(ss_field(p, k))),
    }
    path = write_json(Path(args.out) / "thresholds.json", "thresholds", cfg, payload)
    print(path)
    return EXIT_OK


def _field(cfg: ExperimentConfig, mode: str, **changes):
    p = cfg.game_params(**changes)
    return uss_field(p) if mode == "uss" else ss_field(p, cfg.link_matrix())


def cmd_phase(cfg: ExperimentConfig, args) -> int:
    mode = args.mode or cfg.simulation.mode
    ph = cfg.phase
    field_ = _field(cfg, mode)
    bm = compute_basins(field_, field_.params, resolution=ph.resolution, dt=ph.dt,
                        t_max=ph.t_max, vertex_tol=ph.vertex_tol)
    rows = [
        (pt[0], pt[1], lab, t if lab != "none" else None)
        for pt, lab, t in zip(bm.points, bm.labels, bm.times)
    ]
    out = Path(args.out)
    write_csv(out / f"phase_{mode}.csv", "phase", cfg, PHASE_COLUMNS, rows,
              {"resolution": bm.resolution, "stable_vertices": " ".join(bm.stable_vertices)})
    trows = []
    for n, x0 in enumerate(ph.trajectories):
        tr = integrate(field_, x0, ph.dt, ph.t_max, ph.vertex_tol, stride=max(1, int(round(0.1 / ph.dt))))
        trows.extend((n, t, *x) for t, x in zip(tr.times, tr.states))
    write_csv(out / f"trajectories_{mode}.csv", "trajectories", cfg, TRAJECTORY_COLUMNS, trows)
    write_json(out / f"basins_{mode}.json", "basins", cfg,
               {"mode": mode, "resolution": bm.resolution, "fractions": bm.fractions,
                "stable_vertices": list(bm.stable_vertices)})
    print(out / f"phase_{mode}.csv")
    return EXIT_OK


def _modes(args, cfg) -> list[str]:
    return [args.mode] if args.mode else ["uss", "ss"]


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out = Path(args.out)
    summary = []
    for mode in _modes(args, cfg):
        for pe, mu in cfg.sweep_points():
            sim = cfg.sim_config(mode, p_e=pe, mu=mu)
            agg = run_replicates(sim)
            rows = []
            for n, t in enumerate(agg.times):
                rows.append(
                    (int(t),)
                    + tuple(agg.mean[key][n] for key in ("x1", "x2", "x3", "x_f", "mean_payoff", "throughput"))
                    + tuple(agg.stderr[key][n] for key in ("x1", "x2", "x3", "x_f", "mean_payoff", "throughput"))
                )
            name = f"sim_{mode}_pe{_tag(pe)}_mu{_tag(mu)}.csv"
            write_csv(out / name, "simulation", cfg, SIM_COLUMNS, rows,
                      {"mode": mode, "p_e": pe, "mu": mu, "time_unit": "round" if mode == "uss" else "step"})
            term = agg.terminal
            base_pay, base_thr = full_cooperation_baseline(sim.params)
            summary.append((
                mode, pe, mu, sim.replicates,
                *term["mean_payoff"], *term["throughput"], *term["x_f"],
                term["x1"][0], term["x2"][0], term["x3"][0],
                base_pay, base_thr,
            ))
            print(out / name)
    write_csv(out / "sim_summary.csv", "simulation-summary", cfg, SUMMARY_COLUMNS, summary,
              {"window": cfg.simulation.window})
    print(out / "sim_summary.csv")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    rows = []
    ph = cfg.phase
    k = cfg.link_matrix()
    for mode in _modes(args, cfg):
        for pe, mu in cfg.sweep_points():
            p = cfg.game_params(p_e=pe, mu=mu)
            f = _field(cfg, mode, p_e=pe, mu=mu)
            bm = compute_basins(f, p, resolution=ph.resolution, dt=ph.dt, t_max=ph.t_max,
                                vertex_tol=ph.vertex_tol)
            fr = bm.fractions
            t1, t2 = theorem1_check(p), theorem2_check(p, k)
            none = 1.0 - sum(fr.values())
            rows.append((mode, pe, mu, uss_threshold(p), t1.fd_cess, t2.ff_cess, t2.fd_cess,
                         fr["FF"], fr["FD"], fr["DD"], none))
    path = write_csv(Path(args.out) / "sweep.csv", "sweep", cfg, SWEEP_COLUMNS, rows,
                     {"resolution": ph.resolution})
    print(path)
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, args) -> int:
    v = cfg.validation
    results = validation.run_all(cfg.game_params(), cfg.link_matrix(), seed=cfg.seed, quick=args.quick,
                                 ode_b=v.ode_b, ode_c=v.ode_c, ode_x0=tuple(v.ode_x0))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.6g} (tolerance {r.threshold:g})")
    write_json(Path(args.out) / "validate.json", "validate", cfg,
               {"checks": [r.as_dict() for r in results],
                "all_passed": all(r.passed for r in results)})
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS_FAILED


COMMANDS = {
    "thresholds": (cmd_thresholds, "stability thresholds and vertex eigenvalues (JSON)"),
    "phase": (cmd_phase, "basin map and sample trajectories (CSV)"),
    "simulate": (cmd_simulate, "agent-based runs over the sweep points (CSV)"),
    "sweep": (cmd_sweep, "analytic thresholds and basin fractions over the sweep points (CSV)"),
    "validate": (cmd_validate, "oracle checks with measured deviations (JSON)"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repfwd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML experiment file (default: built-in reference setup)")
        p.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
        p.add_argument("--resolution", type=int, help="override the basin grid resolution")
        p.add_argument("--replicates", type=int, help="override the replicate count")
        p.add_argument("--mode", choices=("uss", "ss"), help="restrict to one scenario")
        if name == "validate":
            p.add_argument("--quick", action="store_true", help="smaller sample sizes")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    data = cfg.model_dump()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.resolution is not None:
        data["phase"]["resolution"] = args.resolution
    if args.replicates is not None:
        data["simulation"]["replicates"] = args.replicates
    return from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else reference_config()
        cfg = _apply_overrides(cfg, args)
        if args.out is None:
            args.out = cfg.output_dir
        func = COMMANDS[args.command][0]
        return func(cfg, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
