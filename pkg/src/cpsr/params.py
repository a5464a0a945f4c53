"""Physical parameters of a pumped alkali vapor cell and its optical drive.

Units
-----
Configs are the I/O boundary: frequencies there are quoted in the
convention ``1 Hz == 2*pi rad/s`` (a quoted "268 Hz" Larmor frequency is an
angular frequency of 2*pi*268 rad/s). Everything in :class:`DerivedRates`
is an angular rate in rad/s. Rates obtained from cross section times flux
(pumping, spin exchange, probe scattering) come out in events per second and
are used as angular rates directly, because that is what enters the Bloch
equations as a decay constant.

Lengths are in cm, powers in mW, optical frequencies and detunings in GHz.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, fields

from scipy import constants as _sc

from cpsr.errors import ConfigError, DomainError, ModelValidityWarning

# CGS constants
C_CM = _sc.c * 1e2
H_ERG = _sc.h * 1e7
KB_ERG = _sc.k * 1e7
R_E_CM = _sc.physical_constants["classical electron radius"][0] * 1e2

F_OSC = 0.34
SIGMA_SE_CM2 = 1.8e-14

TWO_PI = 2.0 * math.pi


def hz(value):
    """Quoted frequency (Hz == 2*pi/s) to internal rad/s."""
    return value * TWO_PI


def to_hz(value):
    """Internal rad/s to quoted frequency."""
    return value / TWO_PI


class Species(str, enum.Enum):
    RB_NATURAL = "RbNatural"
    K = "K"

    @classmethod
    def parse(cls, value) -> "Species":
        if isinstance(value, Species):
            return value
        for member in cls:
            if str(value).strip().lower() == member.value.lower():
                return member
        raise ConfigError(f"unknown species {value!r}; expected one of "
                          f"{[m.value for m in cls]}")


# (vapor-pressure A, B) for n[cm^-3] = 10**(A - B/T) / T
_VAPOR_FIT = {Species.RB_NATURAL: (26.178, 4040.0), Species.K: (26.268, 4453.0)}
# reduced mass of a colliding alkali pair, grams
_REDUCED_MASS_G = {Species.RB_NATURAL: 7.1e-23, Species.K: 3.25e-23}
_RB85_FRACTION = 0.722


@dataclass(frozen=True)
class CellConfig:
    """The vapor cell.

    ``gamma_opt_ghz`` is the half width (half of the FWHM) of the
    pressure-broadened D1 line. ``sigma_gamma_units`` selects how that width
    enters the absorption cross section: ``"cycles"`` (default) divides by
    the width in cycles/s, which reproduces the quoted on-resonance optical
    depth of the Rb cell (~130); ``"angular"`` divides by 2*pi times that and
    gives a ~6x smaller cross section.
    """

    species: Species
    temperature_k: float
    length_cm: float
    area_cm2: float
    gamma_opt_ghz: float
    wavelength_nm: float
    f_osc: float = F_OSC
    sigma_se_cm2: float = SIGMA_SE_CM2
    sigma_gamma_units: str = "cycles"

    def __post_init__(self):
        object.__setattr__(self, "species", Species.parse(self.species))
        if not self.temperature_k > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature_k} K")
        for name in ("length_cm", "area_cm2", "gamma_opt_ghz", "wavelength_nm",
                     "f_osc", "sigma_se_cm2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value}")

    @property
    def temperature_c(self):
        return self.temperature_k - 273.15


@dataclass(frozen=True)
class BeamConfig:
    """Probe (control + signal), pump and magnetic drive.

    ``omega_a_hz`` and ``r_sd_hz`` are quoted frequencies (Hz == 2*pi/s).
    ``delta_ghz`` is signed; only its magnitude matters for the coupling, its
    sign sets the handedness of the Faraday rotation relative to probe pumping.
    """

    p_control_mw: float
    p_signal_mw: float
    delta_ghz: float
    p_pump_mw: float
    delta_pump_ghz: float
    omega_a_hz: float
    r_sd_hz: float
    max_signal_ratio: float = 0.1

    def __post_init__(self):
        if not self.p_control_mw > 0:
            raise DomainError(f"control power must be positive, got {self.p_control_mw} mW")
        if self.p_signal_mw < 0:
            raise DomainError("signal power must be non-negative")
        if self.p_pump_mw < 0:
            raise DomainError("pump power must be non-negative")
        if self.r_sd_hz < 0:
            raise DomainError("spin-destruction rate must be non-negative")
        for name in ("delta_ghz", "delta_pump_ghz", "omega_a_hz"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.p_signal_mw > self.max_signal_ratio * self.p_control_mw:
            warnings.warn(
                f"signal power {self.p_signal_mw} mW is not small against control "
                f"{self.p_control_mw} mW; the linearized model assumes P_s << P_c",
                ModelValidityWarning, stacklevel=3)


@dataclass(frozen=True)
class DerivedRates:
    """Every derived quantity of a cell/beam configuration (rates in rad/s).

    ``coupling`` is the spin-light coupling rate Omega = k_la * k_al.
    """

    species: Species
    n_a: float  # cm^-3
    sigma0: float  # cm^2
    sigma_delta: float
    sigma_pump: float
    d0: float
    d_delta: float
    delta_over_gamma: float
    q: float
    p_a: float
    f_z: float  # cm^-3
    r_se: float
    r_pump: float
    r_sd: float
    r_c: float
    gamma_se: float
    gamma1: float
    gamma: float
    omega_a: float
    s1_in: float  # photons/s
    s_perp_in: float  # photons/s
    k_la: float  # dimensionless
    k_al: float  # 1/s
    coupling: float
    length_cm: float
    area_cm2: float

    @property
    def attenuation_average(self):
        """(1 - exp(-d)) / d, the cell-averaged probe intensity factor."""
        return _attenuation_average(self.d_delta)

    @property
    def omega_r(self):
        return math.hypot(self.omega_a, self.gamma)

    def as_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.value if isinstance(value, Species) else value
        return out


def _attenuation_average(d):
    if d < 1e-8:
        return 1.0 - d / 2.0
    return -math.expm1(-d) / d


def vapor_density(species, temperature_k):
    """Saturated alkali number density in cm^-3."""
    species = Species.parse(species)
    if not temperature_k > 0:
        raise DomainError(f"temperature must be positive, got {temperature_k} K")
    if not 300.0 <= temperature_k <= 600.0:
        warnings.warn(f"vapor-pressure fit used outside 300-600 K (T={temperature_k} K)",
                      ModelValidityWarning, stacklevel=2)
    a, b = _VAPOR_FIT[species]
    return 10.0 ** (a - b / temperature_k) / temperature_k


def _q32(p2):
    return (6.0 + 2.0 * p2) / (1.0 + p2)


def _q52(p2):
    return (38.0 + 52.0 * p2 + 6.0 * p2 * p2) / (3.0 + 10.0 * p2 + 3.0 * p2 * p2)


def slowing_down_factor(species, p_a):
    """Slowing-down factor q(p_a) for a spin-temperature distribution.

    Natural rubidium is treated as one composite spin (72.2 % Rb-85,
    27.8 % Rb-87); potassium uses the I=3/2 expression.
    """
    species = Species.parse(species)
    if not abs(p_a) <= 1.0:
        raise DomainError(f"|p_a| must not exceed 1, got {p_a}")
    p2 = p_a * p_a
    if species is Species.K:
        return _q32(p2)
    return _RB85_FRACTION * _q52(p2) + (1.0 - _RB85_FRACTION) * _q32(p2)


def serf_broadening(omega_a, r_se, species, p_a):
    """Spin-exchange contribution to transverse decoherence in the SERF limit.

    ``omega_a`` and ``r_se`` share one unit and so does the result.
    """
    if not r_se > 0:
        raise DomainError(f"spin-exchange rate must be positive, got {r_se}")
    if r_se < 10.0 * abs(omega_a):
        warnings.warn(f"R_se={r_se:g} is not >> omega_a={omega_a:g}; "
                      "the SERF expression is outside its regime",
                      ModelValidityWarning, stacklevel=2)
    q = slowing_down_factor(species, p_a)
    q1 = slowing_down_factor(species, 1.0)
    return (q * q - q1 * q1) * omega_a * omega_a / (2.0 * q * r_se)


def thermal_velocity(species, temperature_k):
    """Mean relative thermal velocity of colliding alkali atoms, cm/s."""
    mu = _REDUCED_MASS_G[Species.parse(species)]
    return math.sqrt(8.0 * KB_ERG * temperature_k / (math.pi * mu))


def photon_energy(wavelength_nm):
    """hc/lambda in erg."""
    return H_ERG * C_CM / (wavelength_nm * 1e-7)


def cross_section(cell: CellConfig, delta_ghz):
    """Lorentzian absorption cross section (cm^2) at detuning ``delta_ghz``."""
    if cell.sigma_gamma_units == "cycles":
        width = cell.gamma_opt_ghz * 1e9
    elif cell.sigma_gamma_units == "angular":
        width = hz(cell.gamma_opt_ghz * 1e9)
    else:
        raise ConfigError(f"sigma_gamma_units must be 'cycles' or 'angular', "
                          f"got {cell.sigma_gamma_units!r}")
    sigma0 = C_CM * R_E_CM * cell.f_osc / width
    x = delta_ghz / cell.gamma_opt_ghz
    return sigma0 / (1.0 + x * x)


def derive_all(cell: CellConfig, beam: BeamConfig) -> DerivedRates:
    """Evaluate every derived rate for ``cell`` and ``beam``."""
    n_a = vapor_density(cell.species, cell.temperature_k)
    sigma0 = cross_section(cell, 0.0)
    sigma_delta = cross_section(cell, beam.delta_ghz)
    sigma_pump = cross_section(cell, beam.delta_pump_ghz)
    d0 = n_a * sigma0 * cell.length_cm
    d_delta = n_a * sigma_delta * cell.length_cm
    delta_over_gamma = beam.delta_ghz / cell.gamma_opt_ghz

    e_photon = photon_energy(cell.wavelength_nm)
    mw = 1e4  # erg/s per mW
    r_pump = sigma_pump * beam.p_pump_mw * mw / (cell.area_cm2 * e_photon)
    s1_in = beam.p_control_mw * mw / (2.0 * e_photon)
    s_perp_in = math.sqrt(beam.p_control_mw * beam.p_signal_mw) * mw / e_photon
    r_c = 2.0 * sigma_delta * s1_in / cell.area_cm2

    r_sd = hz(beam.r_sd_hz)
    omega_a = hz(beam.omega_a_hz)
    # q cancels in the steady state of the axial spin
    total = r_pump + r_sd
    p_a = r_pump / total if total > 0 else 0.0
    q = slowing_down_factor(cell.species, p_a)

    r_se = n_a * cell.sigma_se_cm2 * thermal_velocity(cell.species, cell.temperature_k)
    gamma_se = serf_broadening(omega_a, r_se, cell.species, p_a)
    gamma1 = (r_sd + r_pump) / q
    gamma = gamma1 + gamma_se

    eta = _attenuation_average(d_delta)
    # <F_z> = q N_a p_a / 2 with N_a = n_a A l
    k_la = eta * delta_over_gamma * sigma_delta * n_a * cell.length_cm * p_a
    k_al = 2.0 * delta_over_gamma * sigma_delta * s1_in / (q * cell.area_cm2)

    return DerivedRates(
        species=cell.species, n_a=n_a, sigma0=sigma0, sigma_delta=sigma_delta,
        sigma_pump=sigma_pump, d0=d0, d_delta=d_delta,
        delta_over_gamma=delta_over_gamma, q=q, p_a=p_a,
        f_z=n_a * q * p_a / 2.0, r_se=r_se, r_pump=r_pump, r_sd=r_sd, r_c=r_c,
        gamma_se=gamma_se, gamma1=gamma1, gamma=gamma, omega_a=omega_a,
        s1_in=s1_in, s_perp_in=s_perp_in, k_la=k_la, k_al=k_al,
        coupling=k_la * k_al, length_cm=cell.length_cm, area_cm2=cell.area_cm2,
    )


# name -> (unit label, True if the value is a rate converted to quoted Hz on output)
RATE_UNITS = {
    "n_a": ("cm^-3", False), "sigma0": ("cm^2", False), "sigma_delta": ("cm^2", False),
    "sigma_pump": ("cm^2", False), "d0": ("1", False), "d_delta": ("1", False),
    "delta_over_gamma": ("1", False), "q": ("1", False), "p_a": ("1", False),
    "f_z": ("cm^-3", False), "r_se": ("Hz", True), "r_pump": ("Hz", True),
    "r_sd": ("Hz", True), "r_c": ("Hz", True), "gamma_se": ("Hz", True),
    "gamma1": ("Hz", True), "gamma": ("Hz", True), "omega_a": ("Hz", True),
    "s1_in": ("photons/s", False), "s_perp_in": ("photons/s", False),
    "k_la": ("1", False), "k_al": ("Hz", True), "coupling": ("Hz", True),
    "length_cm": ("cm", False), "area_cm2": ("cm^2", False),
}
