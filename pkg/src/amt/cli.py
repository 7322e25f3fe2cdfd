"""Command-line entry point: ``amt {geometry,evolve,fig1,converge,stability}``.

Parameters come from built-in defaults, then the ``[<command>]`` section of
an optional INI config file (``--config``), then command-line flags; the
effective values are echoed into the metadata header of every CSV written.

Exit codes: 0 success, 1 invalid configuration, 2 computation failure,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .convergence import INDISTINGUISHABLE, truncation_study
from .crossover import (Normalization, stability_table, STABILITY_COLUMNS, sweep_crossover)
from .dynamics import Regulator, leakage_from_state
from .errors import AmtError
from .geometry import geometry_trace
from .io import (convergence_rows, crossover_rows, crossover_svg, geometry_rows,
                 trajectory_rows, write_csv)
from .models import ModelFamily, ModelSpec, model_trajectory
from .protocols import ProtocolKind, make_protocol

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO = 0, 1, 2, 3


class ConfigError(Exception):
    """Aggregated configuration problems; one message per violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).replace(" ", "").split(",") if x]


@dataclass(frozen=True)
class Param:
    name: str
    type: object
    default: object
    help: str
    unit: str = ""
    choices: tuple | None = None

    @property
    def flag(self):
        return "--" + self.name.replace("_", "-")

    def help_text(self):
        unit = f" [{self.unit}]" if self.unit else ""
        return f"{self.help}{unit} (default: {self.default})"


def _protocol_params(default_kind="constant_eta", t_end=1.0):
    kinds = tuple(k.value for k in ProtocolKind)
    return [
        Param("protocol", str, default_kind, "frequency protocol kind", choices=kinds),
        Param("omega0", float, 1.0, "base frequency Omega0", "1/time"),
        Param("rate", float, 0.1, "linear_ramp slope r", "1/time^2"),
        Param("lam", float, 1.0, "exponential_chirp exponent lambda", "1/time"),
        Param("amplitude", float, 0.5, "tanh_sweep amplitude", "1/time"),
        Param("width", float, 1.0, "tanh_sweep width", "time"),
        Param("center", float, 0.0, "tanh_sweep center", "time"),
        Param("target_eta", float, 0.5, "constant_eta target eta", "dimensionless"),
        Param("t_start", float, 0.0, "start of the time interval", "time"),
        Param("t_end", float, t_end, "end of the time interval", "time"),
    ]


def _xi_params(count=20):
    return [
        Param("xi_min", float, 0.05, "smallest xi = eta/U", "dimensionless"),
        Param("xi_max", float, 2.0, "largest xi", "dimensionless"),
        Param("xi_count", int, count, "number of xi points", "count"),
        Param("xi_spacing", str, "log", "xi grid spacing", choices=("log", "linear")),
    ]


def _window_params():
    return [
        Param("tau_min", float, 0.5, "start of the averaging window", "local time"),
        Param("tau_max", float, 5.0, "end of the averaging window", "local time"),
        Param("samples", int, 451, "samples in the averaging window", "count"),
    ]


_REGULATORS = tuple(r.value for r in Regulator)

COMMANDS = {
    "geometry": (
        "Fubini-Study geometry of the instantaneous vacuum along a protocol.",
        _protocol_params() + [
            Param("points", int, 101, "number of time-grid points", "count"),
            Param("output", str, "geometry.csv", "output CSV path", "path"),
        ]),
    "evolve": (
        "Propagate a two-level, three-level or truncated-Fock model from its lowest state.",
        [
            Param("family", str, "two_level", "model family",
                  choices=("two_level", "three_level", "fock", "fock_even")),
            Param("eta", float, 1.0, "non-adiabatic coupling eta", "dimensionless"),
            Param("u", float, 0.0, "nonlinear regulator U", "dimensionless"),
            Param("t_final", float, 1.0, "evolution time", "local time"),
            Param("samples", int, 101, "output samples including t=0", "count"),
            Param("n_levels", int, 100, "Fock cutoff N (fock families)", "count"),
            Param("regulator", str, "kerr_nn1", "regulator form r(n)", choices=_REGULATORS),
            Param("max_step", float, 0.0, "max propagation step for time-dependent "
                  "couplings, 0 = automatic", "local time"),
            Param("populations", int, 8, "population columns written", "count"),
            Param("output", str, "trajectory.csv", "output CSV path", "path"),
        ] + [p for p in _protocol_params(t_end=math.inf) if p.name != "target_eta"]),
    "fig1": (
        "Crossover curves for the two-level, three-level and even-Fock models plus an SVG plot.",
        _xi_params() + _window_params() + [
            Param("eta", float, 0.5, "fixed eta of the sweep (U = eta/xi)", "dimensionless"),
            Param("fixed_u", float, 0.0, "hold U at this value and set eta = xi*U instead, "
                  "0 = hold eta fixed", "dimensionless"),
            Param("n_levels", int, 100, "Fock cutoff N", "count"),
            Param("regulator", str, "kerr_nn1", "regulator form r(n)", choices=_REGULATORS),
            Param("normalization", str, "by_max_xi_point", "curve normalization",
                  choices=tuple(n.value for n in Normalization)),
            Param("check_n", int, 0, "rerun the Fock curve at this cutoff and report the "
                  "deviation, 0 = off", "count"),
            Param("out_dir", str, ".", "output directory", "path"),
            Param("prefix", str, "fig1", "output file prefix"),
        ]),
    "converge": (
        "Truncation convergence study of the even-Fock crossover curve.",
        _xi_params() + _window_params() + [
            Param("n_values", _int_list, "100,200,400", "comma-separated Fock cutoffs", "count"),
            Param("eta", float, 0.5, "fixed eta of the sweep", "dimensionless"),
            Param("regulator", str, "kerr_nn1", "regulator form r(n)", choices=_REGULATORS),
            Param("top_fraction", float, 0.1, "fraction of top Fock levels counted as tail",
                  "ratio"),
            Param("out_dir", str, ".", "output directory", "path"),
            Param("prefix", str, "converge", "output file prefix"),
        ]),
    "stability": (
        "Closed-form stability chain over a xi grid.",
        _xi_params() + [
            Param("eta", float, 0.5, "eta (U = eta/xi)", "dimensionless"),
            Param("omega0", float, 1.0, "base frequency Omega0", "1/time"),
            Param("band", float, 0.1, "relative half-width of the critical band", "ratio"),
            Param("output", str, "stability.csv", "output CSV path", "path"),
        ]),
}


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="amt", description="Adiabatic-driving toolkit: geometry, dynamics and "
        "crossover sweeps. Exit codes: 0 ok, 1 invalid configuration, 2 computation "
        "failure, 3 I/O failure.")
    parser.add_argument("--version", action="version", version=f"amt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (desc, params) in COMMANDS.items():
        p = sub.add_parser(name, help=desc, description=desc)
        p.add_argument("--config", default=argparse.SUPPRESS,
                       help="INI config file; values are read from its "
                            f"[{name}] section (default: none)")
        for prm in params:
            p.add_argument(prm.flag, dest=prm.name, default=argparse.SUPPRESS,
                           choices=prm.choices, help=prm.help_text(),
                           type=str if prm.type is _int_list else prm.type)
    return parser


def resolve_config(command, flags):
    """Merge defaults < config file < flags; raise ConfigError listing every problem."""
    _, params = COMMANDS[command]
    by_name = {p.name: p for p in params}
    values = {p.name: p.default for p in params}
    problems = []
    cfg_path = flags.pop("config", None)
    if cfg_path is not None:
        parser = configparser.ConfigParser()
        with open(cfg_path, encoding="utf-8") as fh:  # OSError -> exit 3
            try:
                parser.read_file(fh)
            except configparser.Error as exc:
                raise ConfigError([f"{cfg_path}: {exc}"]) from None
        if parser.has_section(command):
            for key, raw in parser.items(command, raw=True):
                if key in parser.defaults() and not parser.has_option(command, key):
                    continue
                name = key.replace("-", "_")
                prm = by_name.get(name)
                if prm is None:
                    problems.append(f"{cfg_path}: unknown key [{command}] {key}")
                    continue
                try:
                    value = prm.type(raw)
                except ValueError:
                    problems.append(f"{cfg_path}: [{command}] {key} = {raw!r} is not a valid "
                                    f"{getattr(prm.type, '__name__', 'value')}")
                    continue
                if prm.choices and value not in prm.choices:
                    problems.append(f"{cfg_path}: [{command}] {key} must be one of "
                                    f"{', '.join(prm.choices)}")
                    continue
                values[name] = value
    for name, value in flags.items():
        values[name] = value
    if isinstance(values.get("n_values"), str):
        try:
            values["n_values"] = _int_list(values["n_values"])
        except ValueError:
            problems.append(f"n_values {values['n_values']!r} is not a comma-separated "
                            "integer list")
    problems += VALIDATORS[command](values)
    if problems:
        raise ConfigError(problems)
    return values


# -- validation ------------------------------------------------------------

def _positive(values, *names):
    return [f"{n} must be positive (got {values[n]})" for n in names if not values[n] > 0]


def _nonnegative(values, *names):
    return [f"{n} must be non-negative (got {values[n]})" for n in names if not values[n] >= 0]


def _protocol_from(values, t_start, t_end, eta_key="target_eta"):
    params = {"t_start": t_start, "t_end": t_end}
    kind = ProtocolKind(values["protocol"])
    if kind is ProtocolKind.LINEAR_RAMP:
        params["rate"] = values["rate"]
    elif kind is ProtocolKind.EXPONENTIAL_CHIRP:
        params["lam"] = values["lam"]
    elif kind is ProtocolKind.TANH_SWEEP:
        params.update(amplitude=values["amplitude"], width=values["width"],
                      center=values["center"])
    elif kind is ProtocolKind.CONSTANT_ETA:
        params["eta"] = values[eta_key]
    return make_protocol(kind.value, values["omega0"], **params)


def _validate_protocol(values, eta_key="target_eta"):
    try:
        _protocol_from(values, values["t_start"], values["t_end"], eta_key)
    except AmtError as exc:
        return [f"protocol: {exc}"]
    return []


def _validate_xi(values):
    out = _positive(values, "xi_min", "xi_max")
    if values["xi_count"] < 1:
        out.append(f"xi_count must be >= 1 (got {values['xi_count']})")
    if values["xi_max"] < values["xi_min"]:
        out.append("xi_max must be >= xi_min")
    if values["xi_count"] > 1 and values["xi_max"] == values["xi_min"]:
        out.append("xi_max must exceed xi_min when xi_count > 1")
    return out


def _validate_window(values):
    out = []
    if not 0 <= values["tau_min"] < values["tau_max"]:
        out.append(f"need 0 <= tau_min < tau_max (got {values['tau_min']}, {values['tau_max']})")
    if values["samples"] < 200:
        out.append(f"samples must be >= 200 in the averaging window (got {values['samples']})")
    return out


def _validate_geometry(v):
    out = _validate_protocol(v)
    if v["points"] < 1:
        out.append(f"points must be >= 1 (got {v['points']})")
    if v["points"] > 1 and not v["t_end"] > v["t_start"]:
        out.append("t_end must exceed t_start")
    return out


def _validate_evolve(v):
    out = _nonnegative(v, "eta", "u") + _positive(v, "t_final")
    out += _nonnegative(v, "max_step", "populations")
    if v["samples"] < 2:
        out.append(f"samples must be >= 2 (got {v['samples']})")
    if v["family"] in ("fock", "fock_even") and v["n_levels"] < 4:
        out.append(f"n_levels must be >= 4 (got {v['n_levels']})")
    if v["protocol"] != "constant_eta":  # constant_eta here means a constant coupling eta
        out += _validate_protocol(v, eta_key="eta")
    return out


def _validate_fig1(v):
    out = _validate_xi(v) + _validate_window(v) + _positive(v, "eta")
    out += _nonnegative(v, "fixed_u")
    if v["n_levels"] < 4:
        out.append(f"n_levels must be >= 4 (got {v['n_levels']})")
    if v["check_n"] and v["check_n"] < 4:
        out.append(f"check_n must be 0 or >= 4 (got {v['check_n']})")
    return out


def _validate_converge(v):
    out = _validate_xi(v) + _validate_window(v) + _positive(v, "eta")
    ns = v["n_values"]
    if not isinstance(ns, list) or len(ns) < 2:
        out.append("n_values needs at least two cutoffs")
    else:
        if any(n < 20 for n in ns):
            out.append(f"every cutoff in n_values must be >= 20 (got {ns})")
        if any(b < a for a, b in zip(ns, ns[1:])):
            out.append("n_values must be non-decreasing")
    if not 0 < v["top_fraction"] < 1:
        out.append(f"top_fraction must lie in (0, 1) (got {v['top_fraction']})")
    return out


def _validate_stability(v):
    out = _validate_xi(v) + _nonnegative(v, "eta") + _positive(v, "omega0")
    if not 0 <= v["band"] < 1:
        out.append(f"band must lie in [0, 1) (got {v['band']})")
    return out


VALIDATORS = {
    "geometry": _validate_geometry,
    "evolve": _validate_evolve,
    "fig1": _validate_fig1,
    "converge": _validate_converge,
    "stability": _validate_stability,
}


# -- commands ------------------------------------------------------------

def _xi_grid(v):
    if v["xi_count"] == 1:
        return np.array([v["xi_min"]])
    if v["xi_spacing"] == "log":
        return np.geomspace(v["xi_min"], v["xi_max"], v["xi_count"])
    return np.linspace(v["xi_min"], v["xi_max"], v["xi_count"])


def _metadata(command, values, extra=None):
    meta = {"command": command, "amt_version": __version__}
    meta.update({f"config.{k}": values[k] for k in sorted(values)})
    for k, val in (extra or {}).items():
        meta[k] = val
    return meta


def cmd_geometry(v, out=None):
    p = _protocol_from(v, v["t_start"], v["t_end"])
    if v["points"] == 1:
        grid = np.array([v["t_start"]])
    else:
        hi = v["t_end"]
        if p.kind is ProtocolKind.CONSTANT_ETA and hi >= p.singular_time:
            hi = np.nextafter(p.singular_time, -np.inf)
        grid = np.linspace(v["t_start"], hi, v["points"])
    samples = geometry_trace(p, grid)
    header, rows = geometry_rows(samples)
    path = write_csv(v["output"], header, rows, _metadata("geometry", v))
    print(f"wrote {len(rows)} samples to {path}", file=out)
    print(f"max eta  = {max(s.eta for s in samples):.6g}", file=out)
    print(f"max g_tt = {max(s.g_tt for s in samples):.6g}", file=out)
    return samples


def cmd_evolve(v, out=None):
    family = ModelFamily(v["family"])
    protocol = None
    if v["protocol"] != "constant_eta":
        protocol = _protocol_from(v, v["t_start"], v["t_end"], eta_key="eta")
    model = ModelSpec(family, v["eta"], v["u"],
                      n_levels=v["n_levels"] if family in (ModelFamily.FOCK,
                                                           ModelFamily.FOCK_EVEN) else None,
                      regulator=Regulator(v["regulator"]), protocol=protocol)
    grid = np.linspace(0.0, v["t_final"], v["samples"])
    traj = model_trajectory(model, grid, max_step=v["max_step"] or None)
    header, rows = trajectory_rows(traj, v["populations"])
    path = write_csv(v["output"], header, rows,
                     _metadata("evolve", v, {f"model.{k}": x for k, x in model.describe().items()}))
    final = traj.final_state
    print(f"wrote {len(rows)} samples to {path}", file=out)
    print(f"final norm = {final.norm:.15f}", file=out)
    if family is ModelFamily.TWO_LEVEL:
        print(f"final P1 = {final.populations[1]:.10f}", file=out)
    elif family is ModelFamily.THREE_LEVEL:
        print(f"final P1 = {final.populations[1]:.10f}", file=out)
        print(f"final P2 = {final.populations[2]:.10f}", file=out)
        try:
            print(f"leakage fraction P2/(P1+P2) = {leakage_from_state(final):.10f}", file=out)
        except AmtError as exc:
            print(f"leakage fraction undefined: {exc}", file=out)
    else:
        print(f"final mean_n = {traj.mean_n[-1]:.10g}", file=out)
    return traj


def cmd_fig1(v, out=None):
    out_dir = Path(v["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    xi = _xi_grid(v)
    common = dict(normalization=v["normalization"], eta=v["eta"], u=v["fixed_u"] or None,
                  tau_min=v["tau_min"],
                  tau_max=v["tau_max"], n_samples=v["samples"])
    reg = Regulator(v["regulator"])
    curves = {
        "two_level": sweep_crossover(ModelFamily.TWO_LEVEL, xi, **common),
        "three_level": sweep_crossover(ModelFamily.THREE_LEVEL, xi, **common),
        "fock_even": sweep_crossover(ModelFamily.FOCK_EVEN, xi, n_levels=v["n_levels"],
                                     regulator=reg, **common),
    }
    paths = []
    for name, curve in curves.items():
        header, rows = crossover_rows(curve)
        meta = _metadata("fig1", v, {f"curve.{k}": x for k, x in curve.meta.items()})
        paths.append(write_csv(out_dir / f"{v['prefix']}_{name}.csv", header, rows, meta))
    labels = ["two-level", "three-level", f"Fock N={v['n_levels']} (even subspace)"]
    svg = crossover_svg(list(curves.values()), labels)
    svg_path = out_dir / f"{v['prefix']}.svg"
    svg_path.write_text(svg, encoding="utf-8")
    for p in paths + [svg_path]:
        print(f"wrote {p}", file=out)
    for name, curve in curves.items():
        print(f"{name:12s} normalized P_bar: min {curve.p_bar.min():.4g} "
              f"max {curve.p_bar.max():.4g}", file=out)
    result = {"curves": curves, "paths": paths, "svg": svg_path}
    if v["check_n"]:
        check = sweep_crossover(ModelFamily.FOCK_EVEN, xi, n_levels=v["check_n"],
                                regulator=reg, **common)
        dev = float(np.max(np.abs(check.p_bar - curves["fock_even"].p_bar)))
        verdict = "indistinguishable" if dev < INDISTINGUISHABLE else "DIFFERENT"
        print(f"check N={v['check_n']} vs N={v['n_levels']}: max deviation {dev:.3e} "
              f"({verdict}, bound {INDISTINGUISHABLE:g})", file=out)
        result["check_deviation"] = dev
    return result


def cmd_converge(v, out=None):
    out_dir = Path(v["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    report = truncation_study(v["n_values"], _xi_grid(v), eta=v["eta"],
                              regulator=Regulator(v["regulator"]), tau_min=v["tau_min"],
                              tau_max=v["tau_max"], n_samples=v["samples"],
                              top_fraction=v["top_fraction"])
    header, rows = convergence_rows(report)
    extra = {f"report.{k}": x for k, x in report.meta.items()}
    extra["report.subspace_dims"] = ",".join(map(str, report.subspace_dims))
    extra.update({f"report.tail_population_N{n}": t
                  for n, t in report.tail_population_max.items()})
    csv_path = write_csv(out_dir / f"{v['prefix']}.csv", header, rows,
                         _metadata("converge", v, extra))
    txt_path = out_dir / f"{v['prefix']}.txt"
    summary = report.summary()
    txt_path.write_text(summary + "\n", encoding="utf-8")
    print(summary, file=out)
    print(f"wrote {csv_path}\nwrote {txt_path}", file=out)
    return report


def cmd_stability(v, out=None):
    rows = stability_table(_xi_grid(v), eta=v["eta"], omega0=v["omega0"], band=v["band"])
    table = [[r[c] for c in STABILITY_COLUMNS] for r in rows]
    path = write_csv(v["output"], STABILITY_COLUMNS, table, _metadata("stability", v))
    print(f"{'xi':>10} {'class':>9} {'fs_sat':>12} {'fs_direct':>12} {'eta_eff':>10}", file=out)
    for r in rows:
        print(f"{r['xi']:10.4g} {r['classification']:>9} {r['fs_speed_saturated']:12.5g} "
              f"{r['fs_speed_saturated_direct']:12.5g} {r['eta_eff']:10.5g}", file=out)
    print(f"wrote {path}", file=out)
    return rows


HANDLERS = {
    "geometry": cmd_geometry,
    "evolve": cmd_evolve,
    "fig1": cmd_fig1,
    "converge": cmd_converge,
    "stability": cmd_stability,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    flags = vars(args)
    command = flags.pop("command")
    try:
        values = resolve_config(command, flags)
    except ConfigError as exc:
        print(f"amt {command}: invalid configuration:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"amt {command}: cannot read config {exc.filename}: {exc.strerror}",
              file=sys.stderr)
        return EXIT_IO
    try:
        HANDLERS[command](values)
    except OSError as exc:
        print(f"amt {command}: I/O error on {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except (AmtError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"amt {command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
