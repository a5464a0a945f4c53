"""Flat ``key = value`` configuration files for a cell and beam.

Units are part of each key name. Frequencies use the quoted convention
(Hz == 2*pi/s); :func:`cpsr.params.derive_all` converts them to rad/s.
"""

from __future__ import annotations

import math
from dataclasses import replace

from cpsr.errors import ConfigError
from cpsr.params import BeamConfig, CellConfig, Species

DEFAULT_WAVELENGTH_NM = {Species.RB_NATURAL: 795.0, Species.K: 770.0}

CELL_KEYS = ("species", "temperature_k", "length_cm", "area_cm2", "gamma_opt_ghz",
             "wavelength_nm", "f_osc", "sigma_se_cm2", "sigma_gamma_units")
BEAM_KEYS = ("p_control_mw", "p_signal_mw", "delta_ghz", "p_pump_mw", "delta_pump_ghz",
             "omega_a_hz", "r_sd_hz")
OPTIONAL_KEYS = {"wavelength_nm", "f_osc", "sigma_se_cm2", "sigma_gamma_units",
                 "temperature_c", "temperature_k"}
STRING_KEYS = {"species", "sigma_gamma_units"}
# every key accepted in a file (temperature may be given in C or K)
KNOWN_KEYS = set(CELL_KEYS) | set(BEAM_KEYS) | {"temperature_c"}
# keys a sweep may vary
SWEEPABLE = (set(KNOWN_KEYS) - STRING_KEYS)


def _parse_pairs(text):
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key: {key}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key: {key}")
        if key in STRING_KEYS:
            pairs[key] = value
            continue
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: malformed number for {key}: {value!r}") from None
        if not math.isfinite(number):
            raise ConfigError(f"line {lineno}: non-finite value for {key}")
        pairs[key] = number
    return pairs


def build_configs(pairs):
    """(CellConfig, BeamConfig) from a key -> value mapping."""
    pairs = dict(pairs)
    if "temperature_c" in pairs and "temperature_k" in pairs:
        raise ConfigError("give only one of temperature_c, temperature_k")
    if "temperature_c" in pairs:
        pairs["temperature_k"] = pairs.pop("temperature_c") + 273.15
    required = [k for k in CELL_KEYS + BEAM_KEYS if k not in OPTIONAL_KEYS]
    for key in required:
        if key not in pairs:
            raise ConfigError(f"missing key: {key}")
    if "temperature_k" not in pairs:
        raise ConfigError("missing key: temperature_c")
    species = Species.parse(pairs["species"])
    cell_kw = {k: pairs[k] for k in CELL_KEYS if k in pairs}
    cell_kw["species"] = species
    cell_kw.setdefault("wavelength_nm", DEFAULT_WAVELENGTH_NM[species])
    cell = CellConfig(**cell_kw)
    beam = BeamConfig(**{k: pairs[k] for k in BEAM_KEYS})
    return cell, beam


def parse_config(text):
    """Parse config text into ``(CellConfig, BeamConfig)``.

    Raises :class:`ConfigError` for unknown or missing keys and malformed
    numbers, and :class:`DomainError` when a value violates a config invariant.
    """
    return build_configs(_parse_pairs(text))


def config_pairs(cell: CellConfig, beam: BeamConfig):
    out = {}
    for key in CELL_KEYS:
        value = getattr(cell, key)
        out[key] = value.value if isinstance(value, Species) else value
    for key in BEAM_KEYS:
        out[key] = getattr(beam, key)
    return out


def format_config(cell: CellConfig, beam: BeamConfig):
    """Config text that :func:`parse_config` maps back to identical objects."""
    lines = ["# cell"]
    for key, value in config_pairs(cell, beam).items():
        if key == "p_control_mw":
            lines.append("# beam (frequencies in Hz == 2*pi/s)")
        lines.append(f"{key} = {value if isinstance(value, str) else repr(float(value))}")
    return "\n".join(lines) + "\n"


def with_value(cell: CellConfig, beam: BeamConfig, key, value):
    """Copy of the configs with one config-file key changed."""
    if key not in SWEEPABLE:
        raise ConfigError(f"cannot vary {key!r}; choose one of {sorted(SWEEPABLE)}")
    value = float(value)
    if key == "temperature_c":
        return replace(cell, temperature_k=value + 273.15), beam
    if key in CELL_KEYS:
        return replace(cell, **{key: value}), beam
    return cell, replace(beam, **{key: value})
