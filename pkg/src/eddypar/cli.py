"""Config-driven command-line driver.

Reads a TOML config, builds the model, runs a sequential or Parareal
simulation and writes ``observable.csv``, ``jumps.csv`` (Parareal) and
``report.txt`` into the output directory.

Exit codes: 0 success, 1 unexpected failure, 2 config error,
3 stability refusal, 4 Parareal did not converge within max_iter.
"""

import argparse
import csv
import math
import os
import sys as _sys
import time
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import scipy.io

from . import kernels
from .excitation import ExcitationSignal, evaluate
from .integrators import (
    ImplicitOperator,
    StabilityError,
    TimeGrid,
    implicit_euler_step,
    propagate_fine,
    stability_bound,
)
from .model import (
    DimensionError,
    assemble,
    partition,
    reduce_schur,
    window_transformer_grid,
)
from .parareal import PararealConfig, run_parareal, sequential_reference

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_STABILITY = 3
EXIT_NO_CONVERGENCE = 4

OBSERVABLES = ("energy", "flux_linkage", "dof_probe")
SOLVERS = ("seq-implicit", "seq-explicit", "parareal")


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid": {"nx": 16, "ny": 16, "hx": 0.00625, "hy": 0.00625},
    "geometry": {
        "core_outer": [3, 3, 12, 12],
        "core_window": [5, 5, 10, 10],
        "coil_plus": [6, 6, 7, 9],
        "coil_minus": [8, 6, 9, 9],
    },
    "materials": {
        "sigma_core": 1.0e6,
        "nu_air": 795774.7154594767,
        "nu_core": 795.7747154594767,
        "turns_per_area": 1.0e4,
    },
    "excitation": {"kind": "pwm", "I0": 10.0, "f_sin": 50.0, "f_pwm": 1000.0, "m_a": 0.8},
    "time": {"t_start": 0.0, "t_end": 0.04},
    "solver": {
        "type": "parareal",
        "n_windows": 10,
        "h_fine": 0.0,
        "h_implicit": 0.0,
        "reltol": 1.0e-4,
        "abstol": 1.0e-10,
        "max_iter": 0,
        "workers": 0,
        "stride": 100,
    },
    "output": {"observable": "flux_linkage", "probe_index": 0},
}


def observable(sys, a, kind, probe_index=0):
    """Scalar diagnostic of a state vector."""
    if kind == "energy":
        return 0.5 * float(a @ (sys.K_nu @ a))
    if kind == "flux_linkage":
        return float(sys.X_s @ a)
    if kind == "dof_probe":
        if not 0 <= probe_index < sys.n_dof:
            raise IndexError(f"probe index {probe_index} out of range")
        return float(a[probe_index])
    raise ValueError(f"unknown observable {kind!r}")


def load_config(path):
    """Read and validate a TOML run config, filling in defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    cfg = {}
    for section, defaults in DEFAULTS.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section [{section}] must be a table")
        unknown = set(given) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        cfg[section] = {**defaults, **given}

    if cfg["solver"]["type"] not in SOLVERS:
        raise ConfigError(f"solver type must be one of {SOLVERS}")
    if cfg["output"]["observable"] not in OBSERVABLES:
        raise ConfigError(f"observable must be one of {OBSERVABLES}")
    if cfg["excitation"]["kind"] not in ("pwm", "sine", "dc"):
        raise ConfigError("excitation kind must be pwm, sine or dc")
    if cfg["time"]["t_end"] <= cfg["time"]["t_start"]:
        raise ConfigError("t_end must exceed t_start")
    return cfg


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)


def write_config(cfg, path):
    """Write the effective (fully defaulted) config back out as TOML."""
    lines = []
    for section, table in cfg.items():
        lines.append(f"[{section}]")
        for key, value in table.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    Path(path).write_text("\n".join(lines))


def build_problem(cfg):
    """Assemble grid, system and reduced system from a validated config."""
    g = cfg["grid"]
    geo = cfg["geometry"]
    m = cfg["materials"]
    try:
        grid = window_transformer_grid(
            nx=g["nx"], ny=g["ny"], hx=g["hx"], hy=g["hy"],
            core_outer=tuple(geo["core_outer"]), core_window=tuple(geo["core_window"]),
            coil_plus=tuple(geo["coil_plus"]), coil_minus=tuple(geo["coil_minus"]),
        )
        from .model import Materials
        mat = Materials(sigma_core=m["sigma_core"], nu_air=m["nu_air"],
                        nu_core=m["nu_core"], turns_per_area=m["turns_per_area"])
        sys = assemble(grid, mat)
        red = reduce_schur(partition(sys))
    except (ValueError, DimensionError) as exc:
        raise ConfigError(str(exc)) from exc
    return grid, sys, red


def build_signals(cfg):
    e = cfg["excitation"]
    if e["kind"] == "dc":
        fine = ExcitationSignal(kind="dc", I0=e["I0"])
        coarse = fine
    else:
        fine = ExcitationSignal(kind=e["kind"], I0=e["I0"], f_sin=e["f_sin"],
                                f_pwm=e["f_pwm"], m_a=e["m_a"])
        # the coarse model sees only the fundamental component
        coarse = ExcitationSignal(kind="sine", I0=e["I0"], f_sin=e["f_sin"],
                                  f_pwm=e["f_pwm"], m_a=e["m_a"])
    return fine, coarse


def resolve_h_fine(cfg, red):
    """Configured h_fine, or the desk-scale default when unset (0)."""
    h = cfg["solver"]["h_fine"]
    if h and h > 0.0:
        return h
    bound = stability_bound(red)
    f_pwm = cfg["excitation"]["f_pwm"]
    if cfg["excitation"]["kind"] == "pwm":
        return min(0.5 * bound, 1.0 / (200.0 * f_pwm))
    return 0.5 * bound


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def dump_matrices(sys, outdir):
    """Matrix-Market dump of M_sigma, K_nu and X_s for cross-checking."""
    import scipy.sparse as sp

    scipy.io.mmwrite(os.path.join(outdir, "M_sigma.mtx"), sp.diags(sys.M_sigma).tocoo())
    scipy.io.mmwrite(os.path.join(outdir, "K_nu.mtx"), sys.K_nu.tocoo())
    scipy.io.mmwrite(os.path.join(outdir, "X_s.mtx"), sys.X_s.reshape(-1, 1))


def run_experiment(config_path, workers=None, output=None, dump=False):
    """Execute the configured run; returns a process exit status."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG

    outdir = Path(output) if output else Path("eddypar-out")
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        grid, sys, red = build_problem(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    fine_sig, coarse_sig = build_signals(cfg)
    solver = cfg["solver"]
    t_start, t_end = cfg["time"]["t_start"], cfg["time"]["t_end"]
    obs_kind = cfg["output"]["observable"]
    probe = cfg["output"]["probe_index"]

    if dump:
        dump_matrices(sys, outdir)

    bound = stability_bound(red)
    h_fine = resolve_h_fine(cfg, red)
    cfg["solver"]["h_fine"] = h_fine
    write_config(cfg, outdir / "effective_config.toml")

    report = [
        f"solver: {solver['type']}",
        f"kernel backend: {kernels.BACKEND}",
        f"n_dof: {sys.n_dof} (conducting {red.n_c}, non-conducting {red.idx_nc.size})",
        f"stability bound: {bound:.6e} s",
        f"h_fine: {h_fine:.6e} s",
    ]

    t_wall = time.perf_counter()
    try:
        if solver["type"] == "parareal":
            n_windows = solver["n_windows"]
            pcfg = PararealConfig(
                n_windows=n_windows, t_start=t_start, t_end=t_end, h_fine=h_fine,
                fine_signal=fine_sig, coarse_signal=coarse_sig,
                reltol=solver["reltol"], abstol=solver["abstol"],
                max_iter=solver["max_iter"] or None,
                workers=workers or solver["workers"] or None,
            )
            run = run_parareal(pcfg, sys, red)
            rows = [(t, observable(sys, a, obs_kind, probe))
                    for t, a in zip(run.boundaries, run.states[-1])]
            _write_csv(outdir / "observable.csv", ["t", obs_kind], rows)
            jump_rows = [(k + 1, n + 1, run.jump_norms[k][n])
                         for k in range(len(run.jump_norms))
                         for n in range(run.n_windows)]
            _write_csv(outdir / "jumps.csv", ["iteration", "window", "jump_norm"], jump_rows)
            report += [
                f"iterations used: {run.iterations_used}",
                f"converged: {run.converged}",
                f"theoretical speedup: {run.speedup_theoretical:.4g} "
                f"(= {run.n_windows}/{run.iterations_used})",
            ]
            report += [f"wall clock {name}: {val:.3f} s" for name, val in run.timings.items()]
            status = EXIT_OK if run.converged else EXIT_NO_CONVERGENCE
        else:
            explicit = solver["type"] == "seq-explicit"
            h = h_fine if explicit else (solver["h_implicit"] or h_fine)
            grid_t = TimeGrid(t_start, t_end, h)
            stride = max(int(solver["stride"]), 1)
            a = np.zeros(sys.n_dof)
            rows = [(t_start, observable(sys, a, obs_kind, probe))]
            times = grid_t.times()
            if explicit:
                # chunked fine propagation so only sampled states materialize
                for i0 in range(0, grid_t.n_steps, stride):
                    i1 = min(i0 + stride, grid_t.n_steps)
                    a = propagate_fine(red, a, TimeGrid(times[i0], times[i1], h),
                                       fine_sig, bound=bound)
                    rows.append((times[i1], observable(sys, a, obs_kind, probe)))
            else:
                op = ImplicitOperator.build(sys, h)
                for i in range(grid_t.n_steps):
                    H_i = times[i + 1] - times[i]
                    op_i = op if math.isclose(H_i, h, rel_tol=1e-9) else ImplicitOperator.build(sys, H_i)
                    a = implicit_euler_step(sys, op_i, a, times[i + 1], H_i, fine_sig)
                    if (i + 1) % stride == 0 or i + 1 == grid_t.n_steps:
                        rows.append((times[i + 1], observable(sys, a, obs_kind, probe)))
            _write_csv(outdir / "observable.csv", ["t", obs_kind], rows)
            status = EXIT_OK
    except StabilityError as exc:
        print(f"stability refusal: {exc}", file=_sys.stderr)
        report.append(f"stability refusal: {exc}")
        (outdir / "report.txt").write_text("\n".join(report) + "\n")
        return EXIT_STABILITY

    report.append(f"wall clock total: {time.perf_counter() - t_wall:.3f} s")
    (outdir / "report.txt").write_text("\n".join(report) + "\n")
    return status


def dump_excitation(config_path, output=None, samples=2000):
    """Write one fundamental period of the configured excitation to CSV."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    fine_sig, _ = build_signals(cfg)
    period = 1.0 / cfg["excitation"]["f_sin"] if cfg["excitation"]["kind"] != "dc" else 1.0
    t = np.linspace(0.0, period, samples)
    path = Path(output) if output else Path("excitation.csv")
    _write_csv(path, ["t", "i"], [(ti, evaluate(fine_sig, ti)) for ti in t])
    return EXIT_OK


def default_config_path():
    """Path of the bundled desk-scale configuration."""
    return str(Path(__file__).parent / "configs" / "desk_scale.toml")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="eddypar",
                                     description="Parallel-in-time eddy-current solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured simulation")
    p_run.add_argument("config", help="path to a TOML config file")
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--output", default=None, help="output directory")
    p_run.add_argument("--dump-matrices", action="store_true")

    p_exc = sub.add_parser("excitation", help="dump sampled i(t) to CSV")
    p_exc.add_argument("config")
    p_exc.add_argument("--output", default=None, help="output CSV path")
    p_exc.add_argument("--samples", type=int, default=2000)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args.config, workers=args.workers,
                                  output=args.output, dump=args.dump_matrices)
        return dump_excitation(args.config, output=args.output, samples=args.samples)
    except Exception as exc:  # pragma: no cover - crash path
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
