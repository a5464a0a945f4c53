"""Command-line front end.

Exit codes: 0 success, 1 usage/config/input error, 2 numerical failure.
Data goes to the output stream (or ``--output``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from cpsr import bloch, scenarios
from cpsr.analytic import Spectrum
from cpsr.configfile import format_config, parse_config
from cpsr.errors import CPSRError, DataError, NumericalError
from cpsr.lineshape import bundled_line_list, fit_cpsr_line, fit_one_photon, load_line_list
from cpsr.params import RATE_UNITS, DerivedRates, Species, derive_all, hz, to_hz

__all__ = ["main", "parse_config", "format_config", "format_params_report",
           "parse_params_report", "RunConfig"]

COMMANDS = ("params", "spectrum", "sweep", "fit-line", "fit-absorption", "scenario")
SPECTRUM_HEADER = ("omega_hz", "re_t", "im_t", "abs_t", "phase_deg")
REPORT_HEADER = "# frequencies in Hz, where 1 Hz means 2*pi rad/s"


class UsageError(CPSRError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    config_path: Optional[str] = None
    output_path: Optional[str] = None
    model: str = "analytic"
    grid: Optional[tuple] = None  # (omega_min, omega_max, n_points) in Hz
    seed: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.model not in ("analytic", "detailed", "both"):
            raise UsageError(f"model must be analytic, detailed or both, got {self.model!r}")
        if self.grid is not None:
            lo, hi, n = self.grid
            if int(n) != n or n < 2:
                raise UsageError("grid needs at least 2 points")
            if not lo < hi:
                raise UsageError("grid minimum must be below its maximum")

    @property
    def models(self):
        return scenarios.MODELS if self.model == "both" else (self.model,)

    def grid_rad(self):
        lo, hi, n = self.grid
        return hz(np.linspace(lo, hi, int(n)))


def num(x):
    return f"{x:.9g}"


# -- params report ------------------------------------------------------------

def _report_value(name, value):
    if RATE_UNITS[name][1]:
        return RATE_UNITS[name][0], to_hz(value)
    return RATE_UNITS[name][0], value


def format_params_report(cell, beam, rates: DerivedRates = None):
    """Config block followed by every derived quantity with its unit."""
    rates = derive_all(cell, beam) if rates is None else rates
    lines = [REPORT_HEADER, "[config]"]
    lines += [ln for ln in format_config(cell, beam).splitlines() if not ln.startswith("#")]
    lines.append("[rates]")
    for f in fields(rates):
        value = getattr(rates, f.name)
        if isinstance(value, Species):
            lines.append(f"{f.name} = {value.value}")
            continue
        unit, shown = _report_value(f.name, value)
        lines.append(f"{f.name} = {shown!r}  # {unit}")
    lines.append(f"omega_r = {to_hz(rates.omega_r)!r}  # Hz")
    return "\n".join(lines) + "\n"


def parse_params_report(text):
    """Inverse of :func:`format_params_report`.

    Returns ``(cell, beam, reported)`` where ``reported`` maps each rate
    name to the printed value in the printed unit.
    """
    section, cfg, reported = None, {}, {}
    for raw in text.splitlines():
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            section = body.strip("[]")
            continue
        key, _, value = (s.strip() for s in body.partition("="))
        if section == "config":
            cfg[key] = value
        elif section == "rates":
            reported[key] = value if key == "species" else float(value)
    cell, beam = parse_config("\n".join(f"{k} = {v}" for k, v in cfg.items()))
    return cell, beam, reported


def report_values(rates: DerivedRates):
    """The values :func:`format_params_report` prints, keyed by name."""
    out = {}
    for f in fields(rates):
        value = getattr(rates, f.name)
        out[f.name] = value.value if isinstance(value, Species) else _report_value(f.name, value)[1]
    out["omega_r"] = to_hz(rates.omega_r)
    return out


# -- CSV helpers --------------------------------------------------------------

def _spectrum_columns(spec: Spectrum, suffix=""):
    t = spec.transmission
    cols = {
        "re_t": t.real, "im_t": t.imag, "abs_t": np.abs(t),
        "phase_deg": np.degrees(np.angle(t)),
    }
    return {k + suffix: v for k, v in cols.items()}


def write_csv(out, header, rows):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([num(v) if isinstance(v, (float, np.floating, int, np.integer))
                         and not isinstance(v, bool) else v for v in row])


def spectra_csv(out, grid, spectra: dict):
    """One column group per model; a single model uses the bare header."""
    if len(spectra) == 1:
        (spec,) = spectra.values()
        cols = _spectrum_columns(spec)
        header = list(SPECTRUM_HEADER)
    else:
        cols, header = {}, ["omega_hz"]
        for model, spec in spectra.items():
            part = _spectrum_columns(spec, "_" + model)
            cols.update(part)
            header += list(part)
        a, d = spectra["analytic"].transmission, spectra["detailed"].transmission
        cols["abs_diff"] = np.abs(d - a)
        header.append("abs_diff")
    w = to_hz(np.asarray(grid))
    rows = ([w[i]] + [cols[h][i] for h in header[1:]] for i in range(w.size))
    write_csv(out, header, rows)


def read_xy(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    xs, ys, header_seen = [], [], False
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        parts = [p.strip() for p in body.split(",")]
        if len(parts) != 2:
            raise DataError(f"line {lineno}: expected two columns x,y")
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            if not xs and not header_seen:
                header_seen = True
                continue
            raise DataError(f"line {lineno}: malformed number") from None
        xs.append(x)
        ys.append(y)
    if not xs:
        raise DataError(f"{path}: no data rows")
    return np.array(xs), np.array(ys)


# -- commands -----------------------------------------------------------------

def _load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _settings(args):
    return bloch.SolverSettings(probe_pumping=not args.no_probe_pumping)


def _spectra(models, cell, beam, grid, mode, settings, rates=None):
    rates = derive_all(cell, beam) if rates is None else rates
    return {m: scenarios.model_spectrum(m, cell, beam, grid, rates=rates, mode=mode,
                                        settings=settings) for m in models}


def cmd_params(args, run, out):
    cell, beam = _load_config(run.config_path)
    out.write(format_params_report(cell, beam))


def cmd_spectrum(args, run, out):
    cell, beam = _load_config(run.config_path)
    if run.grid is None:
        raise UsageError("spectrum needs --grid MIN MAX N")
    grid = run.grid_rad()
    spectra = _spectra(run.models, cell, beam, grid, args.mode, _settings(args))
    if args.noise > 0:
        rng = np.random.default_rng(run.seed)
        spectra = {m: Spectrum(s.omega, s.transmission + args.noise * (
            rng.standard_normal(len(s)) + 1j * rng.standard_normal(len(s))),
            s.rates, s.model, s.attenuated) for m, s in spectra.items()}
    spectra_csv(out, grid, spectra)


METRIC_FIELDS = ("center_hz", "fwhm_hz", "contrast", "gain_center_hz", "extremum_contrast",
                 "gain_extremum_contrast", "fit_residual", "error")


def sweep_csv(out, result: scenarios.SweepResult, models, values):
    header = [result.param]
    for m in models:
        header += [f"{m}_{k}" for k in METRIC_FIELDS]
    rows = []
    for value in values:
        row = [float(value)]
        for m in models:
            (r,) = [r for r in result.by_model(m) if r["value"] == float(value)][:1]
            row += [r.get(k, "") if k == "error" else r.get(k, float("nan"))
                    for k in METRIC_FIELDS]
        rows.append(row)
    write_csv(out, header, rows)


def _report_row_errors(result):
    for r in result.rows:
        if r["error"]:
            print(f"warning: {result.param}={num(r['value'])} {r['model']}: {r['error']}",
                  file=sys.stderr)


def cmd_sweep(args, run, out):
    cell, beam = _load_config(run.config_path)
    base = scenarios.Scenario("config", cell, beam)
    values = _dedupe(args.values)
    result = scenarios.run_sweep(base, args.param, values, models=run.models, mode=args.mode,
                                 settings=_settings(args))
    _report_row_errors(result)
    sweep_csv(out, result, run.models, values)


def _dedupe(values):
    seen, out = set(), []
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def cmd_fit_line(args, run, out):
    x, y = read_xy(args.input)
    order = np.argsort(x)
    spec = Spectrum(hz(x[order]), y[order].astype(complex))
    absorption, gain = fit_cpsr_line(spec)
    se = absorption.stderr
    rows = [
        ("coupling_hz", to_hz(absorption.coupling), to_hz(se["coupling"])),
        ("omega_a_hz", to_hz(absorption.omega_a), to_hz(se["omega_a"])),
        ("gamma_hz", to_hz(absorption.gamma), to_hz(se["gamma"])),
        ("baseline", absorption.baseline, se["baseline"]),
        ("absorption_center_hz", to_hz(absorption.center), float("nan")),
        ("gain_center_hz", to_hz(gain.center), float("nan")),
        ("fwhm_hz", to_hz(absorption.fwhm), 2 * to_hz(se["gamma"])),
        ("contrast", absorption.contrast, float("nan")),
        ("fit_residual", absorption.fit_residual, float("nan")),
    ]
    write_csv(out, ("parameter", "value", "stderr"), rows)


def cmd_fit_absorption(args, run, out):
    if (args.lines is None) == (args.species is None):
        raise UsageError("give exactly one of --lines FILE or --species NAME")
    if args.lines is not None:
        try:
            lines = load_line_list(Path(args.lines))
        except OSError as exc:
            raise DataError(f"cannot read {args.lines}: {exc.strerror}") from None
    else:
        lines = bundled_line_list(Species.parse(args.species))
    x, y = read_xy(args.input)
    fit = fit_one_photon(x, y, lines)
    err = fit.stderr
    rows = [("od", fit.od, err[0]), ("gamma_opt_ghz", fit.gamma_opt, err[1]),
            ("p_ref", fit.p_ref, float("nan")), ("fit_residual", fit.residual, float("nan"))]
    write_csv(out, ("parameter", "value", "stderr"), rows)


def cmd_scenario(args, run, out):
    sc = scenarios.builtin(args.name)
    settings = _settings(args)
    if args.show_config:
        out.write(format_config(sc.cell, sc.beam))
        return
    if sc.name == "rb_pump_sweep":
        values = args.values or sc.sweep[1]
        result = scenarios.run_pump_sweep(sc, values, models=run.models, mode=args.mode,
                                          settings=settings)
        _report_row_errors(result)
        header = ["p_pump_mw", "omega_a_hz", "r_pump_over_q_hz"]
        header += [f"amplification_{m}" for m in run.models]
        rows = []
        for i, p in enumerate(values):
            per = [result.by_model(m)[i] for m in run.models]
            rows.append([float(p), per[0]["omega_a_hz"],
                         to_hz(per[0]["rates"].r_pump / per[0]["rates"].q)]
                        + [r.get("amplification", float("nan")) for r in per])
        write_csv(out, header, rows)
        for m, x in result.argmax.items():
            print(f"{m}: maximum amplification at R_pump/q = {num(x)} Hz", file=sys.stderr)
        return
    if sc.sweep is not None:
        values = args.values or sc.sweep[1]
        if sc.sweep[0] == "omega_a_hz":
            result = scenarios.run_serf_sweep(sc, values, models=run.models, mode=args.mode,
                                              settings=settings)
            for m, (a, b) in result.quadratic.items():
                print(f"{m}: FWHM = {num(a)} * omega_a^2 + {num(b)} Hz "
                      f"(spin-exchange prediction a = {num(result.predicted_a)})",
                      file=sys.stderr)
        else:
            result = scenarios.run_sweep(sc, sc.sweep[0], values, models=run.models,
                                         mode=args.mode, settings=settings)
        _report_row_errors(result)
        sweep_csv(out, result, run.models, values)
        return
    rates = sc.rates
    grid = run.grid_rad() if run.grid is not None else scenarios.auto_grid(rates)
    spectra_csv(out, grid, _spectra(run.models, sc.cell, sc.beam, grid, args.mode, settings,
                                    rates))


HANDLERS = {"params": cmd_params, "spectrum": cmd_spectrum, "sweep": cmd_sweep,
            "fit-line": cmd_fit_line, "fit-absorption": cmd_fit_absorption,
            "scenario": cmd_scenario}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="cpsr", description="Two-photon spin-light spectroscopy toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True, model=True):
        if config:
            sp.add_argument("--config", required=True, help="key = value config file")
        if model:
            sp.add_argument("--model", default="analytic",
                            choices=("analytic", "detailed", "both"))
            sp.add_argument("--mode", default="uniform", choices=("uniform", "spatial"),
                            help="detailed model: single cell or discretized along z")
            sp.add_argument("--no-probe-pumping", action="store_true",
                            help="detailed model: drop optical pumping by the probe")
        sp.add_argument("--output", "-o", help="write data here instead of stdout")

    common(sub.add_parser("params", help="print every derived quantity"), model=False)
    sp = sub.add_parser("spectrum", help="transmission spectrum as CSV")
    common(sp)
    sp.add_argument("--grid", nargs=3, type=float, metavar=("MIN", "MAX", "N"),
                    required=True, help="two-photon detuning grid in Hz")
    sp.add_argument("--noise", type=float, default=0.0,
                    help="add complex Gaussian noise of this rms (testing aid)")
    sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("sweep", help="fitted line metrics versus one config key")
    common(sp)
    sp.add_argument("--param", required=True)
    sp.add_argument("--values", nargs="+", type=float, required=True)
    sp = sub.add_parser("fit-line", help="fit a two-photon line to x,y CSV (Hz, |T|)")
    common(sp, config=False, model=False)
    sp.add_argument("input")
    sp = sub.add_parser("fit-absorption",
                        help="fit one-photon absorption to x,y CSV (GHz, power)")
    common(sp, config=False, model=False)
    sp.add_argument("input")
    sp.add_argument("--lines", help="line list file: offset_ghz strength [label]")
    sp.add_argument("--species", help="use the bundled line list of this species")
    sp = sub.add_parser("scenario", help="run a bundled parameter set")
    common(sp, config=False)
    sp.add_argument("name", help="one of " + ", ".join(scenarios.builtin_names()))
    sp.add_argument("--grid", nargs=3, type=float, metavar=("MIN", "MAX", "N"))
    sp.add_argument("--values", nargs="+", type=float, help="override the sweep values")
    sp.add_argument("--show-config", action="store_true",
                    help="print the scenario as a config file and exit")
    return p


def _run_config(args):
    grid = getattr(args, "grid", None)
    if grid is not None:
        if not float(grid[2]).is_integer():
            raise UsageError("grid point count must be an integer")
        grid = (grid[0], grid[1], int(grid[2]))
    return RunConfig(command=args.command, config_path=getattr(args, "config", None),
                     output_path=args.output, model=getattr(args, "model", "analytic"),
                     grid=grid, seed=getattr(args, "seed", 0))


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        run = _run_config(args)
        buf = io.StringIO()
        HANDLERS[args.command](args, run, buf)
        if run.output_path:
            Path(run.output_path).write_text(buf.getvalue(), encoding="utf-8")
        else:
            sys.stdout.write(buf.getvalue())
            sys.stdout.flush()
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ZeroDivisionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CPSRError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
