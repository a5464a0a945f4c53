"""Time-domain spin/Stokes dynamics with polarization-modulated drive.

The spin density f(x, t) obeys a Bloch equation driven by the local circular
Stokes component s3; the probe Stokes vector propagates through the frozen
spin field (photon transit is ~10 orders of magnitude faster than the spin
dynamics). The transmitted diagonal component s2 is lock-in demodulated at
the modulation frequency to give one complex spectrum point.

Along x, s3 only attenuates and (s1, s2) rotate rigidly by the accumulated
Faraday angle, so propagation through a cell of uniform f_x is exact.

Internal units: f in cm^-3, local Stokes parameters in photons/(s cm^2),
rates in rad/s, time in s.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numba
import numpy as np

from cpsr.analytic import Spectrum
from cpsr.errors import (ConvergenceError, DomainError, IntegrationError,
                         RefinementError)
from cpsr.params import BeamConfig, CellConfig, DerivedRates, Species, derive_all

MAX_ROTATION_PER_CELL = 0.1
DEFAULT_CELLS = 64
MAX_REFINEMENTS = 4

_STATUS_OK, _STATUS_NAN, _STATUS_DRIFT = 0, 1, 2


# -- slowing-down factor and self-consistent polarization (numba) -----------

@numba.njit(cache=True, nogil=True)
def _q_of_p(p, species_code):
    p2 = p * p
    q32 = (6.0 + 2.0 * p2) / (1.0 + p2)
    if species_code == 1:
        return q32
    q52 = (38.0 + 52.0 * p2 + 6.0 * p2 * p2) / (3.0 + 10.0 * p2 + 3.0 * p2 * p2)
    return 0.722 * q52 + 0.278 * q32


@numba.njit(cache=True, nogil=True)
def _solve_polarization(fz, n_a, species_code, p_guess):
    """p with p = 2 f_z / (q(p) n_a), by fixed-point iteration (rtol 1e-10, 50 iter)."""
    u = 2.0 * fz / n_a
    p = p_guess
    for _ in range(50):
        p_new = u / _q_of_p(p, species_code)
        if p_new > 1.0:
            p_new = 1.0
        elif p_new < -1.0:
            p_new = -1.0
        if abs(p_new - p) <= 1e-10 * max(abs(p_new), 1e-300):
            return p_new
        p = p_new
    return p


@numba.njit(cache=True, nogil=True)
def _rates_at(p, species_code, q1, r_pump, r_sd, omega_a, r_se):
    q = _q_of_p(p, species_code)
    gamma1 = (r_sd + r_pump) / q
    gamma = gamma1 + (q * q - q1 * q1) * omega_a * omega_a / (2.0 * q * r_se)
    return q, gamma1, gamma


@numba.njit(cache=True, nogil=True)
def _spin_rhs(fx, fy, fz, s3, p_guess, n_a, sigma, dg, r_pump, r_sd, omega_a,
              r_se, species_code, q1, probe_pumping):
    p = _solve_polarization(fz, n_a, species_code, p_guess)
    q, gamma1, gamma = _rates_at(p, species_code, q1, r_pump, r_sd, omega_a, r_se)
    ls = 2.0 / q * dg * sigma * s3
    dfx = omega_a * fy - gamma * fx + probe_pumping * n_a * sigma * s3
    dfy = -omega_a * fx - gamma * fy - ls * fz
    dfz = -gamma1 * fz + ls * fy + 0.5 * n_a * r_pump
    return dfx, dfy, dfz, p


@numba.njit(cache=True, nogil=True)
def _rk4_cells(f, pol, t, dt, cell_avg, n_a, sigma, dg, r_pump, r_sd,
               omega_a, r_se, species_code, q1, probe_pumping, omega, s_perp, dc):
    """Advance every cell by one RK4 step in place.

    The drive is s3_in(t) = -s_perp sin(omega t), or s_perp constant when ``dc``.
    """
    if dc:
        s0 = s_perp
        sh = s_perp
        s1 = s_perp
    else:
        s0 = -s_perp * math.sin(omega * t)
        sh = -s_perp * math.sin(omega * (t + 0.5 * dt))
        s1 = -s_perp * math.sin(omega * (t + dt))
    for j in range(f.shape[0]):
        a = cell_avg[j]
        x0, y0, z0 = f[j, 0], f[j, 1], f[j, 2]
        k1x, k1y, k1z, p = _spin_rhs(x0, y0, z0, a * s0, pol[j], n_a, sigma, dg, r_pump,
                                     r_sd, omega_a, r_se, species_code, q1, probe_pumping)
        k2x, k2y, k2z, p = _spin_rhs(x0 + 0.5 * dt * k1x, y0 + 0.5 * dt * k1y,
                                     z0 + 0.5 * dt * k1z, a * sh, p, n_a, sigma, dg,
                                     r_pump, r_sd, omega_a, r_se, species_code, q1,
                                     probe_pumping)
        k3x, k3y, k3z, p = _spin_rhs(x0 + 0.5 * dt * k2x, y0 + 0.5 * dt * k2y,
                                     z0 + 0.5 * dt * k2z, a * sh, p, n_a, sigma, dg,
                                     r_pump, r_sd, omega_a, r_se, species_code, q1,
                                     probe_pumping)
        k4x, k4y, k4z, p = _spin_rhs(x0 + dt * k3x, y0 + dt * k3y, z0 + dt * k3z,
                                     a * s1, p, n_a, sigma, dg, r_pump, r_sd, omega_a,
                                     r_se, species_code, q1, probe_pumping)
        f[j, 0] = x0 + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        f[j, 1] = y0 + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        f[j, 2] = z0 + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        pol[j] = p


@numba.njit(cache=True, nogil=True)
def _faraday_angle(f, pol, n_a, sigma, dg, dx, species_code):
    """Total rotation of (s1, s2) across the cell and the largest per-cell angle."""
    total = 0.0
    largest = 0.0
    for j in range(f.shape[0]):
        p = _solve_polarization(f[j, 2], n_a, species_code, pol[j])
        q = _q_of_p(p, species_code)
        phi = 2.0 / q * dg * sigma * f[j, 0] * dx
        total += phi
        if abs(phi) > largest:
            largest = abs(phi)
    return total, largest


@numba.njit(cache=True, nogil=True)
def _simulate_point(omega, delay, f_init, length, n_a, sigma, dg, r_pump, r_sd,
                    omega_a, r_se, species_code, q1, probe_pumping, s1_in, s_perp,
                    dt, n_settle, n_window, dc, drift_tol):
    n_cells = f_init.shape[0]
    dx = length / n_cells
    alpha = n_a * sigma
    d = alpha * length
    cell_avg = np.empty(n_cells)
    seg = alpha * dx
    seg_avg = 1.0 - 0.5 * seg if seg < 1e-8 else -math.expm1(-seg) / seg
    for j in range(n_cells):
        cell_avg[j] = math.exp(-alpha * j * dx) * seg_avg
    att = math.exp(-d)

    f = f_init.copy()
    pol = np.empty(n_cells)
    for j in range(n_cells):
        pol[j] = _solve_polarization(f[j, 2], n_a, species_code, 0.5)

    z2 = np.zeros(2, dtype=np.complex128)
    z3 = 0.0 + 0.0j
    max_rot = 0.0
    total = n_settle + 2 * n_window
    for k in range(total + 1):
        t = k * dt - delay
        if k >= n_settle:
            w = (k - n_settle) // n_window
            if w < 2:
                phi, largest = _faraday_angle(f, pol, n_a, sigma, dg, dx, species_code)
                if largest > max_rot:
                    max_rot = largest
                if dc:
                    s2o = att * math.sin(phi) * s1_in
                    z2[w] += s2o
                    if w == 1:
                        z3 += att * s_perp
                else:
                    c2 = s_perp * math.cos(omega * t)
                    s3 = -s_perp * math.sin(omega * t)
                    s2o = att * (math.cos(phi) * c2 + math.sin(phi) * s1_in)
                    ref = complex(math.cos(omega * (k * dt)), -math.sin(omega * (k * dt)))
                    z2[w] += s2o * ref
                    if w == 1:
                        z3 += att * s3 * ref
        if k == total:
            break
        _rk4_cells(f, pol, t, dt, cell_avg, n_a, sigma, dg, r_pump, r_sd, omega_a,
                   r_se, species_code, q1, probe_pumping, omega, s_perp, dc)
        if k % 64 == 0:
            for j in range(n_cells):
                if not (math.isfinite(f[j, 0]) and math.isfinite(f[j, 1])
                        and math.isfinite(f[j, 2])):
                    return z2, z3, _STATUS_NAN, max_rot, f
    if dc:
        scale = 1.0 / n_window
    else:
        scale = 2.0 / n_window
    z2 *= scale
    z3 *= scale
    status = _STATUS_OK
    norm = att * s_perp
    if abs(z2[1] - z2[0]) > drift_tol * norm:
        status = _STATUS_DRIFT
    return z2, z3, status, max_rot, f


# -- public surface ----------------------------------------------------------

def _species_code(species):
    return 1 if Species.parse(species) is Species.K else 0


def _q1(species):
    return float(_q_of_p(1.0, _species_code(species)))


@dataclass(frozen=True)
class DriveWaveform:
    """Polarization-modulated probe: s2 = s_perp cos(wt), s3 = -s_perp sin(wt).

    This is the real-field form of s2 = s_perp e^{iwt}, s3 = i s_perp e^{iwt};
    negative ``omega`` reverses the sense of rotation on the Poincare sphere.
    ``delay`` shifts the whole waveform later in time.
    """

    omega: float
    s1_in: float
    s_perp: float
    delay: float = 0.0

    def __post_init__(self):
        if self.s_perp > self.s1_in:
            raise DomainError("modulation depth s_perp exceeds s1")

    @classmethod
    def from_rates(cls, omega, rates: DerivedRates, delay=0.0):
        return cls(omega, rates.s1_in / rates.area_cm2,
                   rates.s_perp_in / rates.area_cm2, delay)

    def stokes(self, t):
        ph = self.omega * (t - self.delay)
        return np.array([self.s1_in, self.s_perp * math.cos(ph),
                         -self.s_perp * math.sin(ph)])


@dataclass(frozen=True)
class SpinLightState:
    """Spin density on N cells and the probe Stokes vector on the N+1 cell edges.

    ``f`` has shape (N, 3) in cm^-3, ``s`` shape (N+1, 3) with ``s[0]`` the
    input and ``s[-1]`` the transmitted Stokes vector.
    """

    grid_x: np.ndarray
    f: np.ndarray
    s: np.ndarray
    t: float = 0.0

    @property
    def n_cells(self):
        return self.f.shape[0]

    @classmethod
    def pumped(cls, rates: DerivedRates, n_cells=1, s_in=None, t=0.0):
        """Undriven steady state: f = (0, 0, n_a q p_a / 2) in every cell."""
        if n_cells < 1:
            raise DomainError("need at least one cell")
        edges = np.linspace(0.0, rates.length_cm, n_cells + 1)
        f = np.zeros((n_cells, 3))
        f[:, 2] = rates.f_z
        if s_in is None:
            s_in = np.array([rates.s1_in / rates.area_cm2, 0.0, 0.0])
        s = propagate_light(f, s_in, rates)
        return cls(0.5 * (edges[:-1] + edges[1:]), f, s, t)


def _cell_polarization(f, rates):
    code = _species_code(rates.species)
    return np.array([_solve_polarization(fz, rates.n_a, code, rates.p_a) for fz in f[:, 2]])


def propagate_light(f, s_in, rates: DerivedRates, *, check_refinement=None):
    """Stokes vectors on the cell edges for the spin field ``f`` (N, 3).

    Each cell attenuates by exp(-n_a sigma dx) and rotates (s1, s2) by
    (2/q)(Delta/Gamma) sigma f_x dx. With N == 1 this is the closed-form
    uniform-cell relation with rotation angle 2*theta. For N > 1 a rotation
    above 0.1 rad in any cell raises :class:`RefinementError`.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    s_in = np.asarray(s_in, dtype=float)
    n = f.shape[0]
    if check_refinement is None:
        check_refinement = n > 1
    dx = rates.length_cm / n
    pol = _cell_polarization(f, rates)
    q = np.array([_q_of_p(p, _species_code(rates.species)) for p in pol])
    phi = 2.0 / q * rates.delta_over_gamma * rates.sigma_delta * f[:, 0] * dx
    if check_refinement and np.max(np.abs(phi)) > MAX_ROTATION_PER_CELL:
        raise RefinementError(
            f"Faraday rotation of {np.max(np.abs(phi)):.3g} rad in one cell; "
            f"refine the grid beyond {n} cells")
    att = math.exp(-rates.n_a * rates.sigma_delta * dx)
    out = np.empty((n + 1, 3))
    out[0] = s_in
    for j in range(n):
        s1, s2, s3 = out[j]
        c, s = math.cos(phi[j]), math.sin(phi[j])
        out[j + 1] = att * np.array([c * s1 - s * s2, c * s2 + s * s1, s3])
    return out


def spin_derivative(f, s3, rates: DerivedRates, *, probe_pumping=True):
    """Time derivative of the spin field for local circular Stokes ``s3`` (N,)."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    s3 = np.broadcast_to(np.asarray(s3, dtype=float), (f.shape[0],))
    code = _species_code(rates.species)
    out = np.empty_like(f)
    for j in range(f.shape[0]):
        dfx, dfy, dfz, _ = _spin_rhs(f[j, 0], f[j, 1], f[j, 2], s3[j], rates.p_a,
                                     rates.n_a, rates.sigma_delta, rates.delta_over_gamma,
                                     rates.r_pump, rates.r_sd, rates.omega_a, rates.r_se,
                                     code, _q1(rates.species), float(probe_pumping))
        out[j] = dfx, dfy, dfz
    return out


def _local_s3(state: SpinLightState, s, t, rates):
    """Cell-averaged s3 from a drive (callable / DriveWaveform) or a frozen field."""
    if isinstance(s, DriveWaveform):
        s_in = s.stokes(t)
    elif callable(s):
        s_in = np.asarray(s(t), dtype=float)
    else:
        arr = np.asarray(s, dtype=float)
        if arr.ndim == 2:
            if arr.shape[0] == state.n_cells + 1:
                return 0.5 * (arr[:-1, 2] + arr[1:, 2])
            return arr[:, 2]
        s_in = arr
    n = state.n_cells
    alpha = rates.n_a * rates.sigma_delta
    dx = rates.length_cm / n
    seg = alpha * dx
    seg_avg = 1.0 - 0.5 * seg if seg < 1e-8 else -math.expm1(-seg) / seg
    return s_in[2] * np.exp(-alpha * dx * np.arange(n)) * seg_avg


def step_spin(state: SpinLightState, s, dt, rates: DerivedRates, *, probe_pumping=True):
    """One RK4 step of the spin field, then re-propagate the light.

    ``s`` is a :class:`DriveWaveform` or callable ``t -> (s1, s2, s3)`` giving
    the input Stokes vector (evaluated at the RK stages), or a Stokes field on
    the grid that is held frozen over the step.
    """
    if not dt > 0:
        raise DomainError("time step must be positive")
    t = state.t
    f = state.f
    k1 = spin_derivative(f, _local_s3(state, s, t, rates), rates, probe_pumping=probe_pumping)
    k2 = spin_derivative(f + 0.5 * dt * k1, _local_s3(state, s, t + 0.5 * dt, rates), rates,
                         probe_pumping=probe_pumping)
    k3 = spin_derivative(f + 0.5 * dt * k2, _local_s3(state, s, t + 0.5 * dt, rates), rates,
                         probe_pumping=probe_pumping)
    k4 = spin_derivative(f + dt * k3, _local_s3(state, s, t + dt, rates), rates,
                         probe_pumping=probe_pumping)
    f_new = f + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(f_new)):
        raise IntegrationError(f"non-finite spin density at t={t + dt:g} s", state=state)
    if isinstance(s, DriveWaveform):
        s_in = s.stokes(t + dt)
    elif callable(s):
        s_in = np.asarray(s(t + dt), dtype=float)
    else:
        arr = np.asarray(s, dtype=float)
        s_in = arr[0] if arr.ndim == 2 else arr
    return replace(state, f=f_new, s=propagate_light(f_new, s_in, rates), t=t + dt)


@dataclass(frozen=True)
class SolverSettings:
    """Time-stepping and demodulation controls for :func:`simulate_spectrum`.

    ``dt_factor`` bounds the step by dt_factor / (fastest rate in the problem);
    ``periods`` is the number K of modulation periods per demodulation window;
    ``drift_tol`` is the allowed change of the normalized transmission between
    the two last windows.
    """

    dt_factor: float = 0.05
    periods: int = 8
    settle_decays: float = 10.0
    settle_periods: float = 20.0
    drift_tol: float = 5e-3
    probe_pumping: bool = True

    def __post_init__(self):
        if self.periods < 8:
            raise DomainError("demodulation needs at least 8 periods")
        if not 0 < self.dt_factor <= 0.05:
            raise DomainError("dt_factor must lie in (0, 0.05]")


@dataclass(frozen=True)
class PointResult:
    omega: float
    transmission: complex
    s3_transmission: complex
    drift: float
    max_rotation: float
    n_cells: int
    steps: int


def _step_plan(omega, rates, settings):
    s_perp = rates.s_perp_in / rates.area_cm2
    lightshift = 2.0 / rates.q * abs(rates.delta_over_gamma) * rates.sigma_delta * s_perp
    fastest = max(abs(omega), abs(rates.omega_a), rates.gamma, rates.gamma1, lightshift)
    dt_max = settings.dt_factor / fastest
    slowest = min(rates.gamma, rates.gamma1)
    settle = settings.settle_decays / slowest
    if omega == 0.0:
        n_settle = math.ceil(settle / dt_max)
        window_time = settings.periods * 2.0 * math.pi / max(abs(rates.omega_a), rates.gamma)
        return dt_max, n_settle, math.ceil(window_time / dt_max)
    period = 2.0 * math.pi / abs(omega)
    per_period = math.ceil(period / dt_max)
    dt = period / per_period
    settle = max(settle, settings.settle_periods * period)
    n_settle = math.ceil(settle / period) * per_period
    return dt, n_settle, settings.periods * per_period


def simulate_point(omega, rates: DerivedRates, *, n_cells=1, settings=SolverSettings(),
                   delay=0.0, f_init=None) -> PointResult:
    """Demodulated complex transmission at one modulation frequency (rad/s).

    At omega == 0 the complex response is assembled from the static limit:
    the in-phase part is the bare transmitted s2 and the quadrature part is
    the rotation produced by a constant s3 drive.
    """
    dt, n_settle, n_window = _step_plan(omega, rates, settings)
    if f_init is None:
        f_init = np.zeros((n_cells, 3))
        f_init[:, 2] = rates.f_z
    f_init = np.ascontiguousarray(f_init, dtype=float)
    s_perp = rates.s_perp_in / rates.area_cm2
    s1 = rates.s1_in / rates.area_cm2
    if s_perp == 0.0:
        raise DomainError("signal power is zero; nothing to demodulate")
    dc = omega == 0.0
    z2, z3, status, max_rot, f_end = _simulate_point(
        float(omega), float(delay), f_init, rates.length_cm, rates.n_a,
        rates.sigma_delta, rates.delta_over_gamma, rates.r_pump, rates.r_sd,
        rates.omega_a, rates.r_se, _species_code(rates.species), _q1(rates.species),
        float(settings.probe_pumping), s1, s_perp, dt, n_settle, n_window, dc,
        settings.drift_tol)
    att = math.exp(-rates.d_delta)
    if status == _STATUS_NAN:
        raise IntegrationError(
            f"non-finite spin density at omega={omega:g} rad/s",
            state=SpinLightState(np.linspace(0, rates.length_cm, f_end.shape[0]),
                                 f_end, np.full((f_end.shape[0] + 1, 3), np.nan)))
    if dc:
        t_a, t_b = 1.0 + 1j * z2[0] / (att * s_perp), 1.0 + 1j * z2[1] / (att * s_perp)
        t3 = z3 / s_perp
    else:
        ref = s_perp * complex(math.cos(omega * delay), -math.sin(omega * delay))
        t_a, t_b = z2[0] / (att * ref), z2[1] / (att * ref)
        t3 = z3 / (1j * ref)
    drift = abs(t_b - t_a)
    if status == _STATUS_DRIFT:
        raise ConvergenceError(
            f"demodulated output drifted by {drift:.3g} between windows at "
            f"omega={omega:g} rad/s")
    return PointResult(float(omega), complex(t_b), complex(t3), float(drift),
                       float(max_rot), n_cells, n_settle + 2 * n_window)


def worker_count():
    """Workers for sweeps: ``CPSR_THREADS`` (0 or unset = one per CPU)."""
    raw = os.environ.get("CPSR_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _simulate_grid(grid, rates, n_cells, settings):
    def one(w):
        return simulate_point(w, rates, n_cells=n_cells, settings=settings)

    workers = min(worker_count(), len(grid))
    if workers <= 1:
        return [one(w) for w in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, grid))


def simulate_spectrum(cell: CellConfig, beam: BeamConfig, grid, mode="uniform", *,
                      n_cells=DEFAULT_CELLS, settings=SolverSettings(),
                      rates: DerivedRates | None = None) -> Spectrum:
    """Time-domain spectrum on ``grid`` (rad/s).

    ``mode="uniform"`` integrates the cell-averaged model (one spin cell,
    closed-form light propagation); ``mode="spatial"`` resolves x on
    ``n_cells`` cells and doubles the grid if any cell rotates the
    polarization by more than 0.1 rad.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a nonempty 1-D sequence")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise DomainError("grid must be strictly increasing")
    if rates is None:
        rates = derive_all(cell, beam)
    if mode == "uniform":
        cells = 1
    elif mode == "spatial":
        cells = int(n_cells)
    else:
        raise DomainError(f"mode must be 'uniform' or 'spatial', got {mode!r}")

    for _ in range(MAX_REFINEMENTS + 1):
        results = _simulate_grid(grid, rates, cells, settings)
        worst = max(r.max_rotation for r in results)
        if mode == "uniform" or worst <= MAX_ROTATION_PER_CELL:
            break
        cells *= 2
    else:
        raise RefinementError(f"rotation per cell {worst:.3g} rad even with {cells} cells")

    return Spectrum(
        grid, np.array([r.transmission for r in results]), rates,
        model=f"detailed-{mode}",
        extras={
            "s3_transmission": np.array([r.s3_transmission for r in results]),
            "drift": np.array([r.drift for r in results]),
            "n_cells": cells,
            "steps": np.array([r.steps for r in results]),
        })
