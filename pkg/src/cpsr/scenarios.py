"""Bundled parameter sets and the batch computations built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from cpsr import analytic, bloch
from cpsr.configfile import SWEEPABLE, with_value
from cpsr.errors import CPSRError, ConfigError, ScenarioLookupError
from cpsr.lineshape import fit_cpsr_line
from cpsr.params import (BeamConfig, CellConfig, DerivedRates, Species, derive_all,
                         slowing_down_factor, to_hz)

MODELS = ("analytic", "detailed")


@dataclass(frozen=True)
class Scenario:
    name: str
    cell: CellConfig
    beam: BeamConfig
    sweep: Optional[tuple] = None  # (config key, tuple of values)
    outputs: tuple = ("spectrum", "metrics")
    # Larmor frequency (Hz) at the low and high end of a pump-power sweep
    omega_a_ramp_hz: Optional[tuple] = None
    description: str = ""

    def __post_init__(self):
        if self.sweep is not None:
            key, values = self.sweep
            if key not in SWEEPABLE:
                raise ConfigError(f"sweep parameter {key!r} is not a config key")
            object.__setattr__(self, "sweep", (key, tuple(float(v) for v in values)))

    @property
    def rates(self) -> DerivedRates:
        return derive_all(self.cell, self.beam)


_RB_CELL = CellConfig(Species.RB_NATURAL, temperature_k=154.0 + 273.15, length_cm=1.0,
                      area_cm2=1.0, gamma_opt_ghz=2.6, wavelength_nm=795.0)
_RB_BEAM = BeamConfig(p_control_mw=15.2, p_signal_mw=0.020, delta_ghz=89.0, p_pump_mw=60.0,
                      delta_pump_ghz=45.0, omega_a_hz=268.0, r_sd_hz=98.0)
_K_CELL = CellConfig(Species.K, temperature_k=185.0 + 273.15, length_cm=1.0, area_cm2=1.5,
                     gamma_opt_ghz=12.0, wavelength_nm=770.0)
_K_BEAM = BeamConfig(p_control_mw=25.0, p_signal_mw=0.035, delta_ghz=215.0, p_pump_mw=1.6,
                     delta_pump_ghz=100.0, omega_a_hz=29.0, r_sd_hz=27.0)

_BUILTIN = {
    "rb_fig2": Scenario(
        "rb_fig2", _RB_CELL, _RB_BEAM, outputs=("spectrum", "metrics", "comparison"),
        description="natural Rb, 154 C: absorption/gain spectrum at omega_a = 268 Hz"),
    "rb_serf_sweep": Scenario(
        "rb_serf_sweep", _RB_CELL, _RB_BEAM,
        sweep=("omega_a_hz", tuple(np.arange(100.0, 601.0, 50.0))),
        outputs=("metrics",),
        description="natural Rb: linewidth and contrast versus Larmor frequency"),
    "rb_pump_sweep": Scenario(
        "rb_pump_sweep", _RB_CELL,
        replace(_RB_BEAM, delta_ghz=116.0, r_sd_hz=94.0, p_pump_mw=50.0, omega_a_hz=345.0),
        sweep=("p_pump_mw", tuple(np.linspace(0.0, 100.0, 21))),
        outputs=("amplification",), omega_a_ramp_hz=(290.0, 400.0),
        description="natural Rb: anti-resonance amplification versus pump power"),
    "k_fig4": Scenario(
        "k_fig4", _K_CELL, _K_BEAM, outputs=("spectrum", "metrics", "comparison"),
        description="K, 185 C: 10 Hz-wide lines distorted by probe pumping"),
}


def builtin(name) -> Scenario:
    try:
        return _BUILTIN[name]
    except KeyError:
        raise ScenarioLookupError(
            f"unknown scenario {name!r}; valid names: {', '.join(sorted(_BUILTIN))}") from None


def builtin_names():
    return sorted(_BUILTIN)


# -- spectra ------------------------------------------------------------------

def auto_grid(rates: DerivedRates, *, span_widths=6.0, points_per_width=12):
    """Symmetric grid (rad/s) covering both lines with >= 10 points per FWHM."""
    span = rates.omega_r + span_widths * rates.gamma
    step = 2.0 * rates.gamma / points_per_width
    half = math.ceil(span / step)
    return np.arange(-half, half + 1) * step


def model_spectrum(model, cell, beam, grid, *, rates=None, mode="uniform",
                   settings=bloch.SolverSettings()):
    rates = derive_all(cell, beam) if rates is None else rates
    if model == "analytic":
        return analytic.spectrum(grid, rates)
    if model == "detailed":
        return bloch.simulate_spectrum(cell, beam, grid, mode, rates=rates, settings=settings)
    raise ConfigError(f"model must be one of {MODELS}, got {model!r}")


# -- sweeps ---------------------------------------------------------------------

@dataclass
class SweepResult:
    param: str
    rows: list
    quadratic: dict = field(default_factory=dict)  # model -> (a, b)
    predicted_a: float = float("nan")
    argmax: dict = field(default_factory=dict)  # model -> R_pump/q at maximum (Hz)

    def by_model(self, model):
        return [r for r in self.rows if r["model"] == model]


def _metrics_row(value, model, cell, beam, mode, settings):
    rates = derive_all(cell, beam)
    row = {"value": float(value), "model": model, "rates": rates, "error": ""}
    try:
        spec = model_spectrum(model, cell, beam, auto_grid(rates), rates=rates, mode=mode,
                              settings=settings)
        absorption, gain = fit_cpsr_line(spec)
    except CPSRError as exc:
        row["error"] = str(exc)
        return row
    row.update(
        center_hz=to_hz(absorption.center), fwhm_hz=to_hz(absorption.fwhm),
        contrast=absorption.contrast, gain_center_hz=to_hz(gain.center),
        extremum_contrast=absorption.extremum_contrast,
        gain_extremum_contrast=gain.extremum_contrast,
        raw_fwhm_hz=to_hz(absorption.raw_fwhm), gain_raw_fwhm_hz=to_hz(gain.raw_fwhm),
        fit_residual=absorption.fit_residual)
    return row


def run_sweep(base: Scenario, param, values, *, models=MODELS, mode="uniform",
              settings=bloch.SolverSettings()) -> SweepResult:
    """Spectrum + line fit for each value of one config key, per model.

    A failing row records its error message and the sweep continues.
    """
    rows = []
    for value in values:
        cell, beam = with_value(base.cell, base.beam, param, value)
        for model in models:
            rows.append(_metrics_row(value, model, cell, beam, mode, settings))
    return SweepResult(param, rows)


def run_serf_sweep(base: Scenario, omega_a_values_hz, *, models=MODELS, mode="uniform",
                   settings=bloch.SolverSettings()) -> SweepResult:
    """Linewidth and contrast versus Larmor frequency, with FWHM = a w^2 + b fits.

    ``predicted_a`` is the spin-exchange coefficient (q^2 - q(1)^2)/(q R_se)
    in 1/Hz, the curvature the SERF broadening alone would give.
    """
    result = run_sweep(base, "omega_a_hz", omega_a_values_hz, models=models, mode=mode,
                       settings=settings)
    rates = base.rates
    q1 = slowing_down_factor(rates.species, 1.0)
    result.predicted_a = (rates.q ** 2 - q1 ** 2) / (rates.q * to_hz(rates.r_se))
    for model in models:
        good = [r for r in result.by_model(model) if not r["error"]]
        if len(good) >= 2:
            w2 = np.array([r["value"] for r in good]) ** 2
            fwhm = np.array([r["fwhm_hz"] for r in good])
            a, b = np.polyfit(w2, fwhm, 1)
            result.quadratic[model] = (float(a), float(b))
    return result


def _ramp(base: Scenario, values):
    lo, hi = min(values), max(values)
    if base.omega_a_ramp_hz is None or hi == lo:
        return lambda p: base.beam.omega_a_hz
    w0, w1 = base.omega_a_ramp_hz
    return lambda p: w0 + (w1 - w0) * (p - lo) / (hi - lo)


def anti_resonance_amplification(model, cell, beam, *, mode="uniform",
                                 settings=bloch.SolverSettings(), points=41):
    """max |T| - 1 on a window of +-2 gamma around the gain line."""
    rates = derive_all(cell, beam)
    sign = 1.0 if rates.coupling * rates.omega_a >= 0 else -1.0
    center = -sign * rates.omega_r
    grid = center + np.linspace(-2.0, 2.0, points) * rates.gamma
    spec = model_spectrum(model, cell, beam, grid, rates=rates, mode=mode, settings=settings)
    return float(np.max(np.abs(spec.transmission)) - 1.0), rates


def run_pump_sweep(base: Scenario, p_pump_values, *, models=("analytic",), mode="uniform",
                   settings=bloch.SolverSettings()) -> SweepResult:
    """Anti-resonance amplification versus pump power.

    The Larmor frequency follows the scenario's linear ramp across the swept
    range (pump lightshift). ``argmax`` holds the pumping rate R_pump/q (Hz)
    of the maximum, refined by a parabola through the three best samples.
    """
    values = [float(v) for v in p_pump_values]
    if not values:
        raise ConfigError("pump sweep needs at least one value")
    omega_a_of = _ramp(base, values)
    rows = []
    for p in values:
        beam = replace(base.beam, p_pump_mw=p, omega_a_hz=omega_a_of(p))
        for model in models:
            row = {"value": p, "model": model, "omega_a_hz": beam.omega_a_hz, "error": ""}
            try:
                amp, rates = anti_resonance_amplification(model, base.cell, beam, mode=mode,
                                                          settings=settings)
                row.update(amplification=amp, rates=rates,
                           r_pump_over_q_hz=to_hz(rates.r_pump / rates.q), p_a=rates.p_a)
            except CPSRError as exc:
                row["error"] = str(exc)
                row["rates"] = derive_all(base.cell, beam)
            rows.append(row)
    result = SweepResult("p_pump_mw", rows)
    for model in models:
        good = [r for r in result.by_model(model) if not r["error"]]
        if good:
            result.argmax[model] = _refined_argmax(
                [r["r_pump_over_q_hz"] for r in good], [r["amplification"] for r in good])
    return result


def _refined_argmax(x, y):
    order = np.argsort(x)
    x, y = np.asarray(x)[order], np.asarray(y)[order]
    i = int(np.argmax(y))
    if 0 < i < len(x) - 1:
        a, b, _ = np.polyfit(x[i - 1:i + 2], y[i - 1:i + 2], 2)
        if a < 0:
            return float(np.clip(-b / (2 * a), x[i - 1], x[i + 1]))
    return float(x[i])


# -- model comparison -------------------------------------------------------

@dataclass(frozen=True)
class ModelComparison:
    omega: np.ndarray
    analytic: np.ndarray
    detailed: np.ndarray
    abs_diff: np.ndarray
    max_dev: float
    rms_dev: float
    peak_contrast: float
    rates: DerivedRates


def compare_models(scenario: Scenario, grid=None, *, mode="uniform",
                   settings=bloch.SolverSettings()) -> ModelComparison:
    """Closed-form and time-domain spectra on one grid (rad/s) and their gap."""
    rates = scenario.rates
    grid = auto_grid(rates) if grid is None else np.asarray(grid, dtype=float)
    a = analytic.spectrum(grid, rates).transmission
    d = bloch.simulate_spectrum(scenario.cell, scenario.beam, grid, mode, rates=rates,
                                settings=settings).transmission
    diff = np.abs(d - a)
    peak = float(np.max(np.abs(1.0 - a)))
    return ModelComparison(grid, a, d, diff, float(diff.max()),
                           float(np.sqrt(np.mean(diff ** 2))), peak, rates)
