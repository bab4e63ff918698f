"""Command-line front end.

    inls <command> --config run.ini [--out DIR] [--workers N] [--cross-check]

Commands: exponents, pairs, groundstate, constants, simulate, classify, sweep.
The configuration is an INI file; every number may be written as a fraction
("1/2").  Results are written as JSON/CSV into the output directory with full
round-trip float precision; the only non-deterministic content (timestamp,
argv) goes to ``metadata.json``.

Exit codes: 0 success, 2 invalid configuration or parameters, 3 a solver could
not produce its object (no bracket, wrong regime, infeasible exponents),
4 resolution lost, 5 missing ledger entry, 6 simulation inconsistent with the
verdict, 10 blow-up detected.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .dichotomy import (
    HypothesisRangeViolated, cross_check, evaluate,
)
from .evolution import BLOWUP, RESOLUTION_LOST, SimulationConfig, simulate, virial_consistency_audit
from .params import (
    Infeasible, InvalidParams, ProblemParams, Regime, as_number, classify_regime, exponent_report,
    find_source_pairs, sigma_c,
)
from .radial import RadialField, RadialGrid, VirialWeight, load_snapshot, resample, save_snapshot
from .variational import (
    ConstantsLedger, GroundStateError, MissingLedgerEntry, WrongRegime, gn_constant, hs_constant,
    solve_ground_state,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_RESOLUTION = 4
EXIT_LEDGER = 5
EXIT_INCONSISTENT = 6
EXIT_BLOWUP = 10

COMMANDS = ("exponents", "pairs", "groundstate", "constants", "simulate", "classify", "sweep")


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class InitialData:
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    factor: float = 1.0
    path: str | None = None


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemParams
    n: int = 4096
    r_max: float = 32.0
    sim: SimulationConfig = field(default_factory=SimulationConfig)
    initial: InitialData = field(default_factory=InitialData)
    out_dir: str = "out"
    ledger_path: str | None = None
    snapshots: bool = False
    virial_weight: str = "none"
    virial_radius: float = 1e6
    s_values: tuple = (0, as_number("1/2"), 1)
    s: object = 1
    eps: float = 1.0
    sweep_amplitudes: tuple = ()
    sweep_sigmas: tuple = ()
    sweep_simulate: bool = False
    sweep_solve: bool = False

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.problem.d, self.n, self.r_max)

    @property
    def ledger_file(self) -> str:
        return self.ledger_path or os.path.join(self.out_dir, "ledger.json")


def _number_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(as_number(x) for x in text.replace(",", " ").split())


def load_config(path: str, out_dir: str | None = None) -> RunConfig:
    """Parse and validate an INI run configuration (raises ConfigError)."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    base = os.path.dirname(os.path.abspath(path))

    def get(section, key, default=None):
        return cp.get(section, key, fallback=default) if cp.has_section(section) else default

    try:
        if not cp.has_section("problem"):
            raise ConfigError("missing [problem] section")
        pr = cp["problem"]
        problem = ProblemParams(
            d=int(pr.get("d")),
            c=as_number(pr.get("c", "0")),
            a=as_number(pr.get("a", "1")),
            b=as_number(pr.get("b", "0")),
            sigma=as_number(pr.get("sigma", "2")),
            lam=int(pr.get("lambda", "-1")),
        )
        n = int(get("grid", "n", "4096"))
        r_max = float(get("grid", "r_max", "32"))
        grid_d = get("grid", "d")
        if grid_d is not None and int(grid_d) != problem.d:
            raise ConfigError(f"grid dimension {grid_d} differs from problem dimension {problem.d}")
        RadialGrid(problem.d, n, r_max)
        sim = SimulationConfig(
            dt=float(get("simulation", "dt", "1e-3")),
            t_end=float(get("simulation", "t_end", "1.0")),
            monitor_stride=int(get("simulation", "monitor_stride", "10")),
            blowup_gradient_factor=float(get("simulation", "blowup_gradient_factor", "100")),
            resolution_guard=float(get("simulation", "resolution_guard", "4")),
            snapshot_stride=int(get("simulation", "snapshot_stride", "0")),
            scheme=get("simulation", "scheme", "midpoint"),
        )
        kind = get("initial", "kind", "gaussian")
        if kind not in ("gaussian", "ground_state", "file"):
            raise ConfigError(f"unknown initial data kind {kind!r}")
        file_path = get("initial", "path")
        if kind == "file":
            if not file_path:
                raise ConfigError("initial data kind 'file' needs a path")
            file_path = os.path.join(base, file_path)
            if not os.path.isfile(file_path):
                raise ConfigError(f"initial data file not found: {file_path}")
        initial = InitialData(
            kind=kind,
            amplitude=float(as_number(get("initial", "amplitude", "1"))),
            width=float(as_number(get("initial", "width", "1"))),
            factor=float(as_number(get("initial", "factor", "1"))),
            path=file_path,
        )
        ledger = get("output", "ledger")
        cfg = RunConfig(
            problem=problem,
            n=n,
            r_max=r_max,
            sim=sim,
            initial=initial,
            out_dir=out_dir or os.path.join(base, get("output", "directory", "out")),
            ledger_path=os.path.join(base, ledger) if ledger else None,
            snapshots=cp.getboolean("output", "snapshots", fallback=False) if cp.has_section("output") else False,
            virial_weight=get("simulation", "virial_weight", "none"),
            virial_radius=float(get("simulation", "virial_radius", "1e6")),
            s_values=_number_list(get("exponents", "s_values", "0 1/2 1")),
            s=as_number(get("pairs", "s", "1")),
            eps=float(get("constants", "eps", "1")),
            sweep_amplitudes=tuple(float(x) for x in _number_list(get("sweep", "amplitudes", ""))),
            sweep_sigmas=_number_list(get("sweep", "sigmas", "")),
            sweep_simulate=cp.getboolean("sweep", "simulate", fallback=False) if cp.has_section("sweep") else False,
            sweep_solve=cp.getboolean("sweep", "solve_ground_states", fallback=False)
            if cp.has_section("sweep") else False,
        )
        if cfg.virial_weight not in ("none", "quadratic", "mass_critical"):
            raise ConfigError(f"unknown virial weight {cfg.virial_weight!r}")
        return cfg
    except ConfigError:
        raise
    except InvalidParams as exc:
        raise ConfigError(f"invalid parameters ({exc.invariant}): {exc}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# helpers

def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _write_metadata(out_dir: str, command: str, config_path: str, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "config": os.path.abspath(config_path),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "argv": sys.argv,
    }
    meta.update(extra or {})
    _write_json(os.path.join(out_dir, "metadata.json"), meta)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))


def _load_ledger(path: str) -> ConstantsLedger:
    return ConstantsLedger.load(path) if os.path.isfile(path) else ConstantsLedger()


def initial_field(cfg: RunConfig) -> RadialField:
    grid = cfg.grid
    ini = cfg.initial
    if ini.kind == "gaussian":
        return RadialField.gaussian(grid, ini.amplitude, ini.width)
    if ini.kind == "ground_state":
        p = cfg.problem
        gs = solve_ground_state(p.d, p.b, p.sigma, grid=grid)
        return gs.profile * ini.factor
    u = load_snapshot(ini.path)
    if u.grid != grid:
        u = resample(u, grid)
    return u


def _weight(cfg: RunConfig):
    if cfg.virial_weight == "none":
        return None
    if cfg.virial_weight == "quadratic":
        return VirialWeight.quadratic(cfg.grid, cfg.virial_radius)
    return VirialWeight.mass_critical(cfg.grid, cfg.virial_radius)


# --------------------------------------------------------------------------
# commands (each returns an exit code)

def cmd_exponents(cfg: RunConfig) -> int:
    rep = exponent_report(cfg.problem, cfg.s_values)
    _write_json(os.path.join(cfg.out_dir, "exponents.json"), rep)
    _emit(rep)
    return EXIT_OK


def cmd_pairs(cfg: RunConfig) -> int:
    try:
        sel = find_source_pairs(cfg.problem, cfg.s)
    except Infeasible as exc:
        _emit({"error": "infeasible", "detail": str(exc)})
        return EXIT_SOLVER
    rep = {"params": cfg.problem.as_dict(), "s": float(cfg.s), "selection": sel.as_dict()}
    _write_json(os.path.join(cfg.out_dir, "pairs.json"), rep)
    _emit(rep)
    return EXIT_OK


def cmd_groundstate(cfg: RunConfig) -> int:
    p = cfg.problem
    try:
        gs = solve_ground_state(p.d, p.b, p.sigma, grid=cfg.grid)
        consts = gn_constant(gs)
    except WrongRegime as exc:
        _emit({"error": "wrong regime", "detail": str(exc)})
        return EXIT_SOLVER
    except GroundStateError as exc:
        _emit({"error": "no bracket", "detail": str(exc)})
        return EXIT_SOLVER
    ledger = _load_ledger(cfg.ledger_file)
    entry = ledger.add_ground_state(gs, consts)
    ledger.save(cfg.ledger_file)
    if cfg.snapshots:
        save_snapshot(os.path.join(cfg.out_dir, "ground_state.txt"), gs.profile)
    _emit({"params": {"d": p.d, "b": float(p.b), "sigma": float(p.sigma)}, "ground_state": entry})
    return EXIT_OK


def cmd_constants(cfg: RunConfig) -> int:
    p = cfg.problem
    if classify_regime(p) is not Regime.EnergyCritical:
        return cmd_groundstate(cfg)
    try:
        rep = hs_constant(p.d, p.b, cfg.grid, cfg.eps)
    except (ValueError, ArithmeticError) as exc:
        _emit({"error": "constants", "detail": str(exc)})
        return EXIT_SOLVER
    ledger = _load_ledger(cfg.ledger_file)
    entry = ledger.add_aubin_talenti(rep, sigma_c(1, p))
    ledger.save(cfg.ledger_file)
    _emit({"params": {"d": p.d, "b": float(p.b), "sigma": float(p.sigma)}, "aubin_talenti": entry})
    return EXIT_OK


def _run_simulation(cfg: RunConfig, out_dir: str):
    u0 = initial_field(cfg)
    snap_dir = None
    if cfg.snapshots and cfg.sim.snapshot_stride:
        snap_dir = os.path.join(out_dir, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)
    weight = _weight(cfg)
    trace = simulate(u0, cfg.problem, cfg.sim, weight=weight, snapshot_dir=snap_dir)
    trace.write_csv(os.path.join(out_dir, "trace.csv"))
    summary = trace.summary()
    if weight is not None and trace.termination != RESOLUTION_LOST:
        try:
            summary["virial_audit"] = virial_consistency_audit(trace).as_dict()
        except ValueError:
            pass
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    return trace, summary


def _termination_code(termination: str) -> int:
    if termination == BLOWUP:
        return EXIT_BLOWUP
    if termination == RESOLUTION_LOST:
        return EXIT_RESOLUTION
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    try:
        trace, summary = _run_simulation(cfg, cfg.out_dir)
    except GroundStateError as exc:
        _emit({"error": "ground state", "detail": str(exc)})
        return EXIT_SOLVER
    _emit(summary)
    return _termination_code(trace.termination)


def cmd_classify(cfg: RunConfig, check: bool = False) -> int:
    ledger = _load_ledger(cfg.ledger_file)
    u0 = initial_field(cfg)
    try:
        verdict = evaluate(u0, cfg.problem, ledger)
    except MissingLedgerEntry as exc:
        _emit({"error": "missing ledger entry", "detail": str(exc)})
        return EXIT_LEDGER
    except HypothesisRangeViolated as exc:
        _emit({"error": "hypothesis range violated", "detail": str(exc)})
        return EXIT_CONFIG
    _write_json(os.path.join(cfg.out_dir, "verdict.json"), verdict.as_dict())
    _emit(verdict.as_dict())
    if not check:
        return EXIT_OK
    rep = cross_check(u0, cfg.problem, cfg.sim, ledger)
    _write_json(os.path.join(cfg.out_dir, "crosscheck.json"), rep.as_dict())
    if rep.trace is not None:
        rep.trace.write_csv(os.path.join(cfg.out_dir, "trace.csv"))
    _emit(rep.as_dict())
    return EXIT_OK if rep.consistent else EXIT_INCONSISTENT


SWEEP_HEADER = ["index", "amplitude", "sigma", "outcome", "theorem", "item", "termination", "error"]


def _sweep_point(args) -> list:
    index, cfg, amplitude, sigma, point_dir = args
    row = [index, repr(float(amplitude)), str(sigma), "", "", "", "", ""]
    try:
        p = cfg.problem.replace(sigma=sigma)
        cfg = replace(cfg, problem=p, initial=replace(cfg.initial, amplitude=amplitude, factor=amplitude))
        ledger = _load_ledger(cfg.ledger_file)
        u0 = initial_field(cfg)
        v = evaluate(u0, p, ledger)
        row[3:6] = [v.outcome.value, v.theorem or "", "" if v.item is None else v.item]
        if cfg.sweep_simulate:
            os.makedirs(point_dir, exist_ok=True)
            trace = simulate(u0, p, cfg.sim)
            trace.write_csv(os.path.join(point_dir, "trace.csv"))
            row[6] = trace.termination
    except MissingLedgerEntry:
        row[7] = f"exit {EXIT_LEDGER}: missing ledger entry"
    except (InvalidParams, HypothesisRangeViolated, ValueError) as exc:
        row[7] = f"exit {EXIT_CONFIG}: {type(exc).__name__}"
    except Exception as exc:  # isolate the point, never abort the sweep
        row[7] = f"exit {EXIT_SOLVER}: {type(exc).__name__}"
    return row


def _fill_ledger(cfg: RunConfig) -> None:
    """Solve and store the ground state for every swept σ the ledger lacks."""
    ledger = _load_ledger(cfg.ledger_file)
    changed = False
    for s in cfg.sweep_sigmas:
        try:
            p = cfg.problem.replace(sigma=s)
            ledger.ground_state(p.d, p.b, p.sigma)
            continue
        except InvalidParams:
            continue
        except MissingLedgerEntry:
            pass
        try:
            gs = solve_ground_state(p.d, p.b, p.sigma, grid=cfg.grid)
            ledger.add_ground_state(gs, gn_constant(gs))
            changed = True
        except (GroundStateError, WrongRegime, InvalidParams, ValueError):
            continue  # the affected rows report the missing entry
    if changed:
        ledger.save(cfg.ledger_file)


def cmd_sweep(cfg: RunConfig, workers: int | None = None) -> int:
    if cfg.sweep_solve:
        _fill_ledger(cfg)
    points = []
    for i, (A, s) in enumerate((A, s) for s in cfg.sweep_sigmas for A in cfg.sweep_amplitudes):
        points.append((i, cfg, A, s, os.path.join(cfg.out_dir, f"point_{i:04d}")))
    workers = max(1, workers or os.cpu_count() or 1)
    if workers == 1 or len(points) <= 1:
        rows = [_sweep_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
            rows = list(pool.map(_sweep_point, points))
    with open(os.path.join(cfg.out_dir, "sweep.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows(rows)
    print(f"{len(rows)} points, {sum(1 for r in rows if r[7])} errors")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inls", description="Inhomogeneous NLS numerical laboratory")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="INI run configuration")
    ap.add_argument("--out", help="output directory (overrides [output] directory)")
    ap.add_argument("--workers", type=int, default=None, help="sweep worker processes")
    ap.add_argument("--cross-check", action="store_true", help="classify: also run the simulation")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_metadata(cfg.out_dir, args.command, args.config)
    cmd = args.command
    try:
        if cmd == "exponents":
            return cmd_exponents(cfg)
        if cmd == "pairs":
            return cmd_pairs(cfg)
        if cmd == "groundstate":
            return cmd_groundstate(cfg)
        if cmd == "constants":
            return cmd_constants(cfg)
        if cmd == "simulate":
            return cmd_simulate(cfg)
        if cmd == "classify":
            return cmd_classify(cfg, args.cross_check)
        return cmd_sweep(cfg, args.workers)
    except InvalidParams as exc:
        print(f"error: invalid parameters ({exc.invariant}): {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
