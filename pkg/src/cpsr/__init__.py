"""Coherent polarization self-rotation spectroscopy of pumped alkali vapors."""

from cpsr.params import (BeamConfig, CellConfig, DerivedRates, Species, derive_all,
                         hz, slowing_down_factor, serf_broadening, to_hz, vapor_density)
from cpsr.analytic import (LineMetrics, Spectrum, approx_coupling, closed_form_metrics,
                           complex_contrast, spectrum)

__all__ = [
    "BeamConfig", "CellConfig", "DerivedRates", "Species", "derive_all", "hz",
    "slowing_down_factor", "serf_broadening", "to_hz", "vapor_density",
    "LineMetrics", "Spectrum", "approx_coupling", "closed_form_metrics",
    "complex_contrast", "spectrum",
]
