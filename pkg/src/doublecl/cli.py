"""Command-line entry point: ``doublecl <subcommand> [options]``.

Exit codes: 0 success, 1 invalid model, 2 a verification check failed,
64 usage error. Every table goes out as CSV; figure presets write one CSV
per curve and a manifest in the config format.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .decoherence import (FIGURE_LAMBDA, FIGURE_SAMPLES, FIGURE_STATES, FIGURE_TIME_MAX, VISIBILITY_TOL, StateKind,
                          build_state, decoherence_series, default_workers, figure_scenarios)
from .errors import DoubleCLError, InvalidAxis, ParameterError, ValidationError
from .master_eq import build_drift_system, effective_coefficients
from .model import CouplingParams, ModelParams, OscillatorParams, ReservoirSpec, Topology, check, validate
from .normal_modes import build_mode_transform, stability_check
from .propagator import COORDS, GridSpec, grid_eval
from .spectral import eigendecompose

EXIT_OK, EXIT_INVALID, EXIT_ORACLE, EXIT_USAGE = 0, 1, 2, 64
ENV_OUTPUT_DIR = "DOUBLECL_OUTPUT_DIR"
ENV_THREADS = "DOUBLECL_THREADS"
MAX_SWEEP_CELLS = 100_000


# ---------------------------------------------------------------- scenario config

@dataclass(frozen=True)
class TimeSpec:
    """Grid in scaled time gamma_1 t. ``log`` spacing puts samples at 0 and log-spaced from t_min."""

    t_max: float = FIGURE_TIME_MAX
    samples: int = FIGURE_SAMPLES
    spacing: str = "linear"
    t_min: float = 1e-7

    def scaled(self) -> np.ndarray:
        if self.samples < 1:
            raise InvalidAxis("samples must be >= 1")
        if self.samples == 1:
            return np.array([0.0])
        if self.spacing == "linear":
            return np.linspace(0.0, self.t_max, self.samples)
        if self.spacing == "log":
            if not 0 < self.t_min < self.t_max:
                raise InvalidAxis("log spacing needs 0 < t_min < t_max")
            return np.concatenate([[0.0], np.geomspace(self.t_min, self.t_max, self.samples - 1)])
        raise InvalidAxis(f"spacing must be 'linear' or 'log', got {self.spacing!r}")


@dataclass(frozen=True)
class StateSpec:
    kind: str = "Psi1"
    sigma_1: float = 1.0
    magnitudes: dict = field(default_factory=dict)

    def build(self, model=None):
        return build_state(self.kind, self.sigma_1, model=model, **self.magnitudes)


@dataclass(frozen=True)
class Scenario:
    model: ModelParams = field(default_factory=lambda: ModelParams(
        OscillatorParams(), CouplingParams(lambda_11=0.1, lambda_22=0.1), ReservoirSpec()))
    state: StateSpec = field(default_factory=StateSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    output_dir: str = "out"
    seed: int = 20240611
    threads: int = 1

    def times(self) -> np.ndarray:
        """Physical times of the grid."""
        return self.time.scaled() / self.model.reservoir.gamma_1


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if x is None:
        return "none"
    return str(getattr(x, "value", x))


def scenario_to_config(sc: Scenario) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    m = sc.model
    cp["oscillators"] = {f.name: _fmt(getattr(m.oscillators, f.name)) for f in fields(OscillatorParams)}
    cp["couplings"] = {f.name: _fmt(getattr(m.couplings, f.name)) for f in fields(CouplingParams)}
    cp["reservoir"] = {f.name: _fmt(getattr(m.reservoir, f.name)) for f in fields(ReservoirSpec)}
    st = {"kind": sc.state.kind, "sigma_1": _fmt(sc.state.sigma_1)}
    st.update({k: _fmt(v) for k, v in sorted(sc.state.magnitudes.items())})
    cp["state"] = st
    cp["time"] = {f.name: _fmt(getattr(sc.time, f.name)) for f in fields(TimeSpec)}
    cp["output"] = {"dir": sc.output_dir, "seed": str(sc.seed), "threads": str(sc.threads)}
    return cp


def dump_scenario(sc: Scenario) -> str:
    buf = io.StringIO()
    scenario_to_config(sc).write(buf)
    return buf.getvalue()


def _float(s: str):
    return None if s.strip().lower() == "none" else float(s)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def scenario_from_config(cp: configparser.ConfigParser) -> Scenario:
    base = Scenario()
    known = {"oscillators", "couplings", "reservoir", "state", "time", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ValueError(f"unknown config sections {sorted(extra)}")

    def section(name, cls, current, conv):
        if not cp.has_section(name):
            return current
        names = {f.name for f in fields(cls)}
        bad = set(cp[name]) - names
        if bad:
            raise ValueError(f"unknown keys {sorted(bad)} in [{name}]")
        return replace(current, **{k: conv(k, v) for k, v in cp[name].items()})

    num = lambda k, v: float(v)
    res_conv = lambda k, v: (v.strip() if k == "topology" else _bool(v) if k == "cutoff_enabled" else _float(v))
    time_conv = lambda k, v: (int(v) if k == "samples" else v.strip() if k == "spacing" else float(v))
    osc = section("oscillators", OscillatorParams, base.model.oscillators, num)
    cpl = section("couplings", CouplingParams, base.model.couplings, num)
    res = section("reservoir", ReservoirSpec, base.model.reservoir, res_conv)
    tm = section("time", TimeSpec, base.time, time_conv)
    state = base.state
    if cp.has_section("state"):
        s = dict(cp["state"])
        kind = s.pop("kind", state.kind)
        sigma_1 = float(s.pop("sigma_1", state.sigma_1))
        mags = {k: _float(v) for k, v in s.items()}
        state = StateSpec(StateKind(kind).value, sigma_1, mags)
    out = dict(cp["output"]) if cp.has_section("output") else {}
    bad = set(out) - {"dir", "seed", "threads"}
    if bad:
        raise ValueError(f"unknown keys {sorted(bad)} in [output]")
    return Scenario(ModelParams(osc, cpl, res), state, tm, out.get("dir", base.output_dir),
                    int(out.get("seed", base.seed)), int(out.get("threads", base.threads)))


def load_scenario(path=None) -> Scenario:
    if path is None:
        return Scenario()
    cp = configparser.ConfigParser()
    cp.optionxform = str
    with open(path) as fh:
        cp.read_file(fh)
    return scenario_from_config(cp)


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    return scenario_from_config(cp)


def output_dir(sc: Scenario, override=None) -> Path:
    return Path(override or os.environ.get(ENV_OUTPUT_DIR) or sc.output_dir)


def thread_count(sc: Scenario) -> int:
    if os.environ.get(ENV_THREADS):
        return default_workers()
    return max(1, sc.threads)


# ---------------------------------------------------------------- csv helpers

def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x) + 0.0)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(rows, header, dest=None):
    """Write rows to ``dest`` (path) or stdout with shortest round-trip floats."""
    fh = open(dest, "w", newline="") if dest else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    finally:
        if dest:
            fh.close()


def series_rows(series, gamma_1):
    for t, g, ld, v in zip(series.times, series.gamma_t, series.log_d_t, series.visibility_t):
        yield (float(t * gamma_1), float(g), math.exp(ld), float(v))


CURVE_HEADER = ("t", "gamma", "D", "visibility")


# ---------------------------------------------------------------- subcommands

def cmd_validate(sc: Scenario, args) -> int:
    violations = check(sc.model)
    if violations:
        for v in violations:
            print(f"{v.kind}: {v.message}", file=sys.stderr)
        return EXIT_INVALID
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        vm = validate(sc.model)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"valid: Omega_1={vm.Omega[0]!r} Omega_2={vm.Omega[1]!r}")
    return EXIT_OK


def cmd_spectrum(sc: Scenario, args) -> int:
    rep = stability_check(sc.model)
    rows = [("stable", rep.stable), ("reason", rep.reason or "")]
    if rep.stable:
        nm = build_mode_transform(sc.model)
        rows += [("Omega_1", nm.Omega_1), ("Omega_2", nm.Omega_2), ("degenerate", nm.degenerate)]
    rows += [("printed_12b", rep.printed_12b), ("printed_12c", rep.printed_12c),
             ("printed_Omega_1_sq", rep.printed_omega_sq[0]), ("printed_Omega_2_sq", rep.printed_omega_sq[1]),
             ("printed_agrees", rep.printed_agrees)]
    write_csv(rows, ("name", "value"), args.out)
    return EXIT_OK if rep.stable else EXIT_INVALID


def cmd_drift(sc: Scenario, args) -> int:
    validate(sc.model)
    ds = build_drift_system(sc.model)
    e = effective_coefficients(sc.model)
    labels = ("r1", "K1", "r2", "K2")
    rows = [(f"M_{labels[i]}",) + tuple(ds.M[i]) for i in range(4)]
    P = ds.diffusion_4x4()
    rows += [(f"D_{labels[i]}",) + tuple(P[i]) for i in range(4)]
    write_csv(rows, ("row",) + labels, args.out)
    if args.coefficients:
        for f in fields(e):
            print(f"# {f.name}={getattr(e, f.name)!r}", file=sys.stderr)
    return EXIT_OK


def cmd_eig(sc: Scenario, args) -> int:
    validate(sc.model)
    s = eigendecompose(build_drift_system(sc.model).M)
    rows = [(k, lam.real, lam.imag) for k, lam in enumerate(s.lambdas)]
    write_csv(rows, ("index", "re", "im"), args.out)
    print(f"# condition_number={s.condition_number!r} defective={str(s.defective).lower()}", file=sys.stderr)
    return EXIT_OK


def cmd_curve(sc: Scenario, args) -> int:
    validate(sc.model)
    state = sc.state.build(sc.model)
    series = decoherence_series(sc.model, state, sc.times(), workers=thread_count(sc))
    write_csv(series_rows(series, sc.model.reservoir.gamma_1), CURVE_HEADER, args.out)
    _report_divergence(series)
    return EXIT_OK


def _report_divergence(series, label=""):
    n = int(np.count_nonzero(series.divergent()))
    if n:
        print(f"# {label}{n} of {len(series.times)} samples have |D - visibility| > {VISIBILITY_TOL:g}",
              file=sys.stderr)
    return n


def _manifest(n, lam, scenarios, sc: Scenario, files, divergent) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    grid = sc.time
    cp["figure"] = {
        "figure": str(n), "state": FIGURE_STATES[n].value, "lambda": repr(lam),
        "time_axis": "gamma_1 t", "t_max": repr(grid.t_max), "samples": str(grid.samples),
        "spacing": grid.spacing, "t_min": repr(grid.t_min), "version": __version__,
        "columns": ",".join(CURVE_HEADER),
    }
    for c, path, nd in zip(scenarios, files, divergent):
        sub = scenario_to_config(Scenario(c.model, StateSpec(c.state.kind.value, c.state.params["sigma_1"]),
                                          grid, sc.output_dir, sc.seed, sc.threads))
        sec = {"file": path.name, "visibility_divergent_samples": str(nd)}
        for name in ("oscillators", "couplings", "reservoir", "state"):
            sec.update({f"{name}.{k}": v for k, v in sub[name].items()})
        sec.update({f"magnitude.{k}": _fmt(v) for k, v in sorted(c.state.params.items())})
        cp[f"curve:{c.label}"] = sec
    return cp


def cmd_figure(sc: Scenario, args) -> int:
    n = args.number
    lam = FIGURE_LAMBDA[n] if args.lam is None else args.lam
    scenarios = figure_scenarios(n, lam)
    for c in scenarios:
        validate(c.model)
    out = output_dir(sc, args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, divergent = [], []
    for c in scenarios:
        g1 = c.model.reservoir.gamma_1
        series = decoherence_series(c.model, c.state, sc.time.scaled() / g1, workers=thread_count(sc))
        path = out / f"figure{n}_{c.label}.csv"
        write_csv(series_rows(series, g1), CURVE_HEADER, path)
        files.append(path)
        divergent.append(_report_divergence(series, f"{c.label}: "))
    with open(out / f"figure{n}_manifest.ini", "w") as fh:
        _manifest(n, lam, scenarios, sc, files, divergent).write(fh)
    print("\n".join(str(p) for p in files + [out / f"figure{n}_manifest.ini"]))
    return EXIT_OK


def _parse_fixed(items):
    fixed = {}
    for it in items or []:
        if "=" not in it:
            raise InvalidAxis(f"--fixed expects NAME=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        fixed[k.strip()] = float(v)
    return fixed


def cmd_density_slice(sc: Scenario, args) -> int:
    validate(sc.model)
    grid = GridSpec(tuple(args.axes), ((args.range[0], args.range[1]), (args.range[2], args.range[3])),
                    tuple(args.counts), _parse_fixed(args.fixed))
    state = sc.state.build(sc.model)
    t = args.t / sc.model.reservoir.gamma_1
    A, B, vals = grid_eval(sc.model, state, t, grid)
    rows = zip(A.ravel(), B.ravel(), vals.real.ravel(), vals.imag.ravel())
    write_csv(rows, ("coord1", "coord2", "re", "im"), args.out)
    if args.out:
        cp = scenario_to_config(sc)
        cp["slice"] = {"axes": ",".join(grid.axes), "t_scaled": repr(args.t), "t": repr(t),
                       "ranges": ",".join(repr(float(x)) for x in args.range),
                       "counts": ",".join(str(int(c)) for c in grid.counts),
                       "fixed": ",".join(f"{k}={v!r}" for k, v in sorted(grid.fixed.items())) or "none",
                       "version": __version__}
        with open(str(args.out) + ".meta.ini", "w") as fh:
            cp.write(fh)
    return EXIT_OK


SWEEP_TARGETS = {
    **{f.name: "oscillators" for f in fields(OscillatorParams)},
    **{f.name: "couplings" for f in fields(CouplingParams)},
    "gamma_1": "reservoir", "gamma_2": "reservoir", "T_1": "reservoir", "T_2": "reservoir",
    "gamma": "reservoir", "T": "reservoir", "cutoff": "reservoir", "sigma_1": "state",
}


def with_parameter(sc: Scenario, name: str, value: float) -> Scenario:
    """Scenario with one scalar parameter replaced; ``gamma``/``T`` set both reservoirs."""
    if name not in SWEEP_TARGETS:
        raise InvalidAxis(f"cannot sweep {name!r}; choose from {sorted(SWEEP_TARGETS)}")
    m = sc.model
    where = SWEEP_TARGETS[name]
    if where == "state":
        return replace(sc, state=replace(sc.state, sigma_1=value))
    if where == "oscillators":
        return replace(sc, model=replace(m, oscillators=replace(m.oscillators, **{name: value})))
    if where == "couplings":
        return replace(sc, model=replace(m, couplings=replace(m.couplings, **{name: value})))
    upd = {f"{name}_1": value, f"{name}_2": value} if name in ("gamma", "T") else {name: value}
    return replace(sc, model=replace(m, reservoir=replace(m.reservoir, **upd)))


def sweep(sc: Scenario, name: str, values, times_scaled, workers=1):
    """Rows (value, gamma_1 t, D) in value-major order."""
    values = [float(v) for v in values]
    times_scaled = [float(t) for t in times_scaled]
    if not values or not times_scaled:
        raise InvalidAxis("sweep needs at least one value and one time")
    if len(values) * len(times_scaled) > MAX_SWEEP_CELLS:
        raise InvalidAxis(f"sweep has more than {MAX_SWEEP_CELLS} cells")
    cells = []
    for v in values:
        s = with_parameter(sc, name, v)
        validate(s.model)
        cells.append(s)

    def one(s):
        state = s.state.build(s.model)
        g1 = s.model.reservoir.gamma_1
        grid = sorted(set([0.0] + times_scaled))
        series = decoherence_series(s.model, state, np.array(grid) / g1, workers=1)
        d = dict(zip(grid, np.exp(series.log_d_t)))
        return [d[t] for t in times_scaled]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, cells))
    else:
        results = [one(s) for s in cells]
    return [(v, t, d) for v, ds in zip(values, results) for t, d in zip(times_scaled, ds)]


def cmd_sweep(sc: Scenario, args) -> int:
    rows = sweep(sc, args.param, args.values, args.t, workers=thread_count(sc))
    write_csv(rows, (args.param, "t", "D"), args.out)
    return EXIT_OK


def cmd_verify(sc: Scenario, args) -> int:
    from .verification import run_suite

    reports = run_suite(seed=args.seed if args.seed is not None else sc.seed, quick=not args.full)
    rows = [(r.name, r.max_abs_err, r.max_rel_err, r.points_tested, r.tolerance, r.passed) for r in reports]
    write_csv(rows, ("name", "max_abs_err", "max_rel_err", "points_tested", "tolerance", "pass"), args.out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ORACLE


def cmd_show_config(sc: Scenario, args) -> int:
    sys.stdout.write(dump_scenario(sc))
    return EXIT_OK


# ---------------------------------------------------------------- parser

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="doublecl", description="Two coupled damped oscillators at high temperature.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("-c", "--config", help="scenario file (INI sections oscillators, couplings, "
                                                "reservoir, state, time, output)")
    common.add_argument("-o", "--out", help="output CSV path (default stdout)")
    common.add_argument("--topology", choices=[t.value for t in Topology])
    common.add_argument("--state", choices=[k.value for k in StateKind])
    common.add_argument("--t-max", type=float, help="largest scaled time gamma_1 t")
    common.add_argument("--samples", type=int)
    common.add_argument("--spacing", choices=["linear", "log"])
    common.add_argument("--set", action="append", metavar="NAME=VALUE",
                        help="override a scalar parameter, e.g. lambda_22=0.5 (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[common], help="check the model and print normal-mode frequencies")
    sub.add_parser("spectrum", parents=[common], help="normal-mode frequencies and stability diagnostics")
    d = sub.add_parser("drift", parents=[common], help="drift and diffusion matrices")
    d.add_argument("--coefficients", action="store_true", help="also print effective coefficients to stderr")
    sub.add_parser("eig", parents=[common], help="eigenvalues of the drift matrix")
    sub.add_parser("curve", parents=[common], help="decoherence series of the configured scenario")
    f = sub.add_parser("figure", parents=[common], help="figure preset: cat reference plus four curves")
    f.add_argument("number", type=int, choices=[1, 2, 3, 4])
    f.add_argument("--lambda", dest="lam", type=float, help="override the coupling strength")
    f.add_argument("--out-dir", help=f"directory for the CSVs (env {ENV_OUTPUT_DIR})")
    s = sub.add_parser("density-slice", parents=[common], help="density on a 2D grid")
    s.add_argument("--t", type=float, default=0.0, help="scaled time gamma_1 t")
    s.add_argument("--axes", nargs=2, default=["R1", "R2"], metavar="AXIS", help=f"two of {', '.join(COORDS)}")
    s.add_argument("--range", nargs=4, type=float, default=[-15.0, 15.0, -15.0, 15.0], metavar=("LO1", "HI1", "LO2", "HI2"))
    s.add_argument("--counts", nargs=2, type=int, default=[101, 101], metavar=("N1", "N2"))
    s.add_argument("--fixed", nargs="*", metavar="NAME=VALUE", help="values of the other two coordinates (default 0)")
    w = sub.add_parser("sweep", parents=[common], help="D over one parameter and a set of times")
    w.add_argument("--param", required=True)
    w.add_argument("--values", nargs="+", type=float, required=True)
    w.add_argument("--t", nargs="+", type=float, required=True, help="scaled times gamma_1 t")
    v = sub.add_parser("verify", parents=[common], help="run the oracle cross-checks")
    v.add_argument("--seed", type=int)
    v.add_argument("--full", action="store_true", help="larger sampling plan")
    sub.add_parser("show-config", parents=[common], help="print the effective scenario")
    return p


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if args.topology:
        r = sc.model.reservoir
        res = (ReservoirSpec.common(r.gamma_1, r.T_1, r.cutoff, r.cutoff_enabled) if args.topology == "common"
               else replace(r, topology=Topology.DISTINCT))
        sc = replace(sc, model=replace(sc.model, reservoir=res))
    if args.state:
        sc = replace(sc, state=StateSpec(args.state, sc.state.sigma_1))
    tm = sc.time
    for key, val in (("t_max", args.t_max), ("samples", args.samples), ("spacing", args.spacing)):
        if val is not None:
            tm = replace(tm, **{key: val})
    sc = replace(sc, time=tm)
    for it in args.set or []:
        if "=" not in it:
            raise UsageError(f"--set expects NAME=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        try:
            sc = with_parameter(sc, k.strip(), float(v))
        except InvalidAxis as e:
            raise UsageError(str(e)) from None
    return sc


COMMANDS = {
    "validate": cmd_validate, "spectrum": cmd_spectrum, "drift": cmd_drift, "eig": cmd_eig,
    "curve": cmd_curve, "figure": cmd_figure, "density-slice": cmd_density_slice, "sweep": cmd_sweep,
    "verify": cmd_verify, "show-config": cmd_show_config,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        sc = _apply_overrides(load_scenario(args.config), args)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)
    except (OSError, ValueError, configparser.Error) as e:
        print(f"doublecl: bad config: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](sc, args)
    except ValidationError as e:
        for v in e.violations:
            print(f"{v.kind}: {v.message}", file=sys.stderr)
        return EXIT_INVALID
    except ParameterError as e:
        print(f"doublecl: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidAxis, ValueError) as e:
        print(f"doublecl: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DoubleCLError as e:
        print(f"doublecl: {e}", file=sys.stderr)
        return EXIT_INVALID


def main(argv=None):
    sys.exit(run(argv))
