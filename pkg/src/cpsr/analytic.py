"""Closed-form two-photon transmission spectrum of the linearized spin-light model."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from cpsr.errors import DomainError, ModelValidityWarning, SingularityError
from cpsr.params import DerivedRates


@dataclass(frozen=True)
class SpectrumPoint:
    omega: float
    transmission: complex


@dataclass(frozen=True)
class Spectrum:
    """Complex signal transmission versus two-photon detuning.

    ``omega`` is in rad/s and strictly increasing. ``transmission`` is
    normalized by the off-resonant attenuation exp(-d(Delta)) unless
    ``attenuated`` is set. ``extras`` holds model-specific side products
    (for example the demodulated S3 transmission of the time-domain model).
    """

    omega: np.ndarray
    transmission: np.ndarray
    rates: Optional[DerivedRates] = None
    model: str = "analytic"
    attenuated: bool = False
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float)
        trans = np.array(self.transmission, dtype=complex)
        if omega.ndim != 1 or omega.size == 0:
            raise DomainError("spectrum grid must be a nonempty 1-D sequence")
        if trans.shape != omega.shape:
            raise DomainError("transmission and grid lengths differ")
        if omega.size > 1 and not np.all(np.diff(omega) > 0):
            raise DomainError("spectrum grid must be strictly increasing")
        omega.flags.writeable = False
        trans.flags.writeable = False
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "transmission", trans)

    @property
    def points(self):
        return [SpectrumPoint(float(w), complex(t))
                for w, t in zip(self.omega, self.transmission)]

    def __len__(self):
        return self.omega.size


@dataclass(frozen=True)
class LineMetrics:
    """Metrics of one two-photon line (absorption or gain).

    ``fwhm`` and ``contrast`` come from the line model; ``extremum_contrast``
    and ``raw_fwhm`` are read off the data without a model. ``coupling``,
    ``omega_a`` and ``gamma`` are the model parameters behind the metrics
    (rad/s), ``stderr`` their one-sigma uncertainties when fitted.
    """

    center: float
    fwhm: float
    contrast: float
    is_gain: bool
    fit_residual: float = 0.0
    coupling: float = float("nan")
    omega_a: float = float("nan")
    gamma: float = float("nan")
    extremum_contrast: float = float("nan")
    raw_fwhm: float = float("nan")
    baseline: float = 0.0
    stderr: dict = field(default_factory=dict)


def complex_contrast(omega, coupling, omega_a, gamma):
    """Complex contrast i*Omega*omega_a / (omega_a**2 - (omega - i*gamma)**2).

    Accepts scalars or arrays for ``omega``. Transmission is ``1 - C``.
    """
    if not gamma > 0:
        raise SingularityError(f"decoherence rate must be positive, got {gamma}")
    w = np.asarray(omega, dtype=float)
    c = 1j * coupling * omega_a / (omega_a * omega_a - (w - 1j * gamma) ** 2)
    return complex(c) if np.ndim(c) == 0 else c


def transmission(omega, coupling, omega_a, gamma):
    return 1.0 - complex_contrast(omega, coupling, omega_a, gamma)


def spectrum(grid, rates: DerivedRates, *, attenuated=False) -> Spectrum:
    """Evaluate the closed-form spectrum on ``grid`` (rad/s)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("grid is empty")
    t = 1.0 - complex_contrast(grid, rates.coupling, rates.omega_a, rates.gamma)
    t = np.atleast_1d(t)
    if attenuated:
        t = t * math.exp(-rates.d_delta)
    return Spectrum(grid, t, rates, model="analytic", attenuated=attenuated)


class CouplingEstimate(NamedTuple):
    value: float
    valid: bool


def approx_coupling(d0, p_a, r_c, q, d_delta=None, *, small=0.1) -> CouplingEstimate:
    """Weak-absorption estimate Omega ~ d(0) p_a R_c / q.

    ``valid`` reports whether ``d_delta`` is below ``small``; it is True when
    no off-resonant depth is supplied.
    """
    valid = True if d_delta is None else bool(d_delta < small)
    return CouplingEstimate(d0 * p_a * r_c / q, valid)


def closed_form_metrics(rates: DerivedRates):
    """Predicted (absorption, gain) line metrics of the closed-form spectrum.

    The contrast is the weak-decoherence value Omega / (2 gamma); the exact
    extremum of |C| is smaller by omega_a / sqrt(omega_a**2 + gamma**2).
    """
    g, wa, om = rates.gamma, rates.omega_a, rates.coupling
    if g > 0.3 * abs(wa):
        warnings.warn(f"gamma={g:g} is not small against omega_a={wa:g}; "
                      "line centers and contrast are approximate",
                      ModelValidityWarning, stacklevel=2)
    wr = math.hypot(wa, g)
    contrast = abs(om) / (2.0 * g)
    sign = 1.0 if om * wa >= 0 else -1.0
    common = dict(fwhm=2.0 * g, contrast=contrast, coupling=om, omega_a=wa, gamma=g)
    return (LineMetrics(center=sign * wr, is_gain=False, **common),
            LineMetrics(center=-sign * wr, is_gain=True, **common))
