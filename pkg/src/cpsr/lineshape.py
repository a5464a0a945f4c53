"""Line-metric extraction by damped least squares.

Two line families are handled: the two-photon lines of a CPSR spectrum
(absorption near +omega_a, gain near -omega_a) and the pressure-broadened
one-photon absorption profile, modeled as a sum of Lorentzians at fixed
hyperfine offsets with one common width.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from cpsr.analytic import LineMetrics, Spectrum
from cpsr.errors import DataError, DomainError, FitError, ModelValidityWarning
from cpsr.params import Species

__all__ = [
    "LineMetrics", "HyperfineLineList", "AbsorptionFit", "LMResult",
    "levenberg_marquardt", "fit_cpsr_line", "one_photon_model",
    "fit_one_photon", "load_line_list", "bundled_line_list", "cpsr_magnitude",
]


# -- damped least squares ---------------------------------------------------

@dataclass(frozen=True)
class LMResult:
    params: np.ndarray
    covariance: np.ndarray
    residual_rms: float
    iterations: int


def _jacobian(fun, p, r0):
    jac = np.empty((r0.size, p.size))
    for i in range(p.size):
        h = 1e-6 * max(abs(p[i]), 1e-3)
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        jac[:, i] = (fun(up) - fun(dn)) / (2.0 * h)
    return jac


def levenberg_marquardt(fun, p0, *, max_iter=200, xtol=1e-8, lam0=1e-3):
    """Minimize ``sum(fun(p)**2)``.

    Damping is multiplied by 10 when a trial step raises the residual and
    divided by 10 when it lowers it; the fit converges once an accepted step
    changes the parameters by less than ``xtol`` relative to their size.
    The Jacobian is taken by central differences.
    """
    p = np.array(p0, dtype=float)
    r = np.asarray(fun(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residual is not finite at the initial guess")
    cost = float(r @ r)
    lam = lam0
    jac = _jacobian(fun, p, r)
    for it in range(1, max_iter + 1):
        jtj = jac.T @ jac
        grad = jac.T @ r
        scale = np.diag(jtj).copy()
        scale[scale == 0] = 1.0
        try:
            step = np.linalg.solve(jtj + lam * np.diag(scale), -grad)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = p + step
        r_trial = np.asarray(fun(trial), dtype=float)
        cost_trial = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else np.inf
        if cost_trial < cost:
            small = np.linalg.norm(step) <= xtol * (np.linalg.norm(p) + xtol)
            p, r, cost = trial, r_trial, cost_trial
            lam /= 10.0
            jac = _jacobian(fun, p, r)
            if small:
                break
        else:
            lam *= 10.0
            # no further decrease is reachable
            if lam > 1e16 or cost == 0.0:
                break
    else:
        raise FitError(f"no convergence after {max_iter} iterations "
                       f"(residual rms {math.sqrt(cost / r.size):.3g})",
                       residual=math.sqrt(cost / r.size))
    dof = max(r.size - p.size, 1)
    try:
        cov = np.linalg.inv(jac.T @ jac) * cost / dof
    except np.linalg.LinAlgError:
        cov = np.full((p.size, p.size), np.nan)
    return LMResult(p, cov, math.sqrt(cost / r.size), it)


# -- two-photon CPSR lines --------------------------------------------------

def cpsr_magnitude(omega, coupling, omega_a, gamma, baseline=0.0):
    """|1 - C(omega)| + baseline; tolerates any sign of gamma for the fit."""
    c = 1j * coupling * omega_a / (omega_a * omega_a - (omega - 1j * gamma) ** 2)
    return np.abs(1.0 - c) + baseline


def _half_prominence_width(x, y, i, level):
    """Width of the feature at index ``i`` where |y - level| first changes sign."""
    above = y[i] > level

    def crossing(step):
        j = i
        while 0 <= j + step < y.size:
            if (y[j + step] > level) != above:
                y0, y1 = y[j], y[j + step]
                frac = (level - y0) / (y1 - y0)
                return x[j] + frac * (x[j + step] - x[j])
            j += step
        return None

    lo, hi = crossing(-1), crossing(1)
    if lo is None or hi is None:
        return float("nan")
    return hi - lo


def fit_cpsr_line(spec: Spectrum, *, max_iter=200, flat_tol=1e-9):
    """Fit |1 - C(omega; Omega, omega_a, gamma)| + baseline to |transmission|.

    Returns ``(absorption, gain)`` :class:`LineMetrics`. Model metrics are
    FWHM = 2 gamma and contrast = Omega omega_a / (2 gamma omega_r) with
    omega_r = sqrt(omega_a**2 + gamma**2); ``extremum_contrast`` and
    ``raw_fwhm`` are read off the data directly.
    """
    x = np.asarray(spec.omega, dtype=float)
    y = np.abs(np.asarray(spec.transmission))
    if y.size < 5 or np.ptp(y) <= flat_tol:
        raise FitError("no extremum found")
    i_min, i_max = int(np.argmin(y)), int(np.argmax(y))
    dip, peak = 1.0 - y[i_min], y[i_max] - 1.0
    if dip <= flat_tol and peak <= flat_tol:
        raise FitError("no extremum found")

    raw_abs = _half_prominence_width(x, y, i_min, 1.0 - dip / 2.0) if dip > 0 else float("nan")
    raw_gain = _half_prominence_width(x, y, i_max, 1.0 + peak / 2.0) if peak > 0 else float("nan")

    # initial guess from extrema positions and widths
    if dip > flat_tol and peak > flat_tol and x[i_min] != x[i_max]:
        omega_a0 = abs(x[i_min] - x[i_max]) / 2.0
        sign = 1.0 if x[i_min] > x[i_max] else -1.0
    else:
        i = i_min if dip >= peak else i_max
        omega_a0 = abs(x[i])
        sign = 1.0 if (x[i] > 0) == (dip >= peak) else -1.0
    widths = [w for w in (raw_abs, raw_gain) if np.isfinite(w) and w > 0]
    if not widths or omega_a0 == 0:
        raise FitError("no extremum found")
    gamma0 = min(widths) / 2.0
    contrast0 = max(dip, peak)
    p0 = np.array([sign * 2.0 * gamma0 * contrast0, omega_a0, gamma0, 0.0])

    result = levenberg_marquardt(lambda p: cpsr_magnitude(x, *p) - y, p0, max_iter=max_iter)
    coupling, omega_a, gamma, baseline = result.params
    omega_a, gamma = abs(omega_a), abs(gamma)
    step = np.median(np.diff(x))
    if step > 0 and 2.0 * gamma / step < 10:
        warnings.warn("fewer than 10 grid points per linewidth", ModelValidityWarning,
                      stacklevel=2)
    wr = math.hypot(omega_a, gamma)
    contrast = abs(coupling) * omega_a / (2.0 * gamma * wr)
    err = np.sqrt(np.clip(np.diag(result.covariance), 0, None))
    stderr = dict(coupling=err[0], omega_a=err[1], gamma=err[2], baseline=err[3])
    center = math.copysign(wr, coupling)
    common = dict(fwhm=2.0 * gamma, contrast=contrast, fit_residual=result.residual_rms,
                  coupling=abs(coupling), omega_a=omega_a, gamma=gamma,
                  baseline=float(baseline), stderr=stderr)
    absorption = LineMetrics(center=center, is_gain=False, extremum_contrast=dip,
                             raw_fwhm=raw_abs, **common)
    gain = LineMetrics(center=-center, is_gain=True, extremum_contrast=peak,
                       raw_fwhm=raw_gain, **common)
    return absorption, gain


# -- one-photon absorption --------------------------------------------------

@dataclass(frozen=True)
class HyperfineLineList:
    """Fixed transition offsets (GHz) with strengths normalized to sum 1."""

    offsets: tuple
    strengths: tuple
    labels: tuple = ()

    def __post_init__(self):
        offsets = tuple(float(o) for o in self.offsets)
        strengths = tuple(float(s) for s in self.strengths)
        if not offsets:
            raise DomainError("line list is empty")
        if len(offsets) != len(strengths):
            raise DomainError("offsets and strengths differ in length")
        if not all(math.isfinite(o) for o in offsets):
            raise DomainError("line offsets must be finite")
        if not all(s > 0 for s in strengths):
            raise DomainError("line strengths must be positive")
        total = sum(strengths)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "strengths", tuple(s / total for s in strengths))

    def __len__(self):
        return len(self.offsets)


def load_line_list(source) -> HyperfineLineList:
    """Parse ``<offset_GHz> <relative_strength>`` lines; ``#`` starts a comment.

    ``source`` is a path or the file text itself.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).exists()):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    offsets, strengths, labels = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body, _, comment = raw.partition("#")
        if not body.strip():
            continue
        parts = body.split()
        if len(parts) != 2:
            raise DataError(f"line {lineno}: expected '<offset_GHz> <strength>'")
        try:
            offsets.append(float(parts[0]))
            strengths.append(float(parts[1]))
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        labels.append(comment.strip())
    if not offsets:
        raise DomainError("line list is empty")
    return HyperfineLineList(tuple(offsets), tuple(strengths), tuple(labels))


_BUNDLED = {Species.RB_NATURAL: "rb_natural_d1.txt", Species.K: "k_d1.txt"}


def bundled_line_list(species) -> HyperfineLineList:
    name = _BUNDLED[Species.parse(species)]
    return load_line_list(resources.files("cpsr").joinpath("data", name).read_text("utf-8"))


def one_photon_model(nu, od, gamma, lines: HyperfineLineList):
    """Optical depth od * sum_k w_k / (1 + ((nu - nu_k)/gamma)**2), nu in GHz."""
    if not gamma > 0:
        raise DomainError(f"linewidth must be positive, got {gamma}")
    if not len(lines):
        raise DomainError("line list is empty")
    nu = np.asarray(nu, dtype=float)
    out = np.zeros_like(nu)
    for nu_k, w_k in zip(lines.offsets, lines.strengths):
        out += w_k / (1.0 + ((nu - nu_k) / gamma) ** 2)
    return od * out


@dataclass(frozen=True)
class AbsorptionFit:
    od: float
    gamma_opt: float  # GHz
    covariance: np.ndarray  # (od, gamma_opt)
    residual: float
    p_ref: float

    @property
    def stderr(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))


def fit_one_photon(nu, power, lines: HyperfineLineList, *, max_iter=200) -> AbsorptionFit:
    """Fit overall optical depth and common width to transmitted power.

    Power is converted to optical depth as -log(P / P_ref); P_ref is fitted
    alongside as a nuisance scale.
    """
    nu = np.asarray(nu, dtype=float)
    power = np.asarray(power, dtype=float)
    if nu.shape != power.shape or nu.ndim != 1:
        raise DataError("frequency and power arrays must be 1-D and equal length")
    if nu.size < 10:
        raise DataError("need at least 10 data points")
    if not np.all(power > 0):
        raise DataError("transmitted powers must be positive")
    y = -np.log(power)
    base0 = float(np.min(y))
    height = float(np.max(y)) - base0
    i = int(np.argmax(y))
    width = _half_prominence_width(nu, y, i, base0 + height / 2.0)
    gamma0 = width / 2.0 if np.isfinite(width) and width > 0 else np.ptp(nu) / 10.0
    peak_norm = float(np.max(one_photon_model(nu, 1.0, gamma0, lines)))
    p0 = np.array([height / peak_norm, gamma0, base0])
    if np.ptp(nu) < 2.0 * gamma0:
        warnings.warn("data span less than 2 linewidths", ModelValidityWarning, stacklevel=2)

    def residual(p):
        return one_photon_model(nu, p[0], abs(p[1]), lines) + p[2] - y

    result = levenberg_marquardt(residual, p0, max_iter=max_iter)
    od, gamma, log_ref = result.params
    return AbsorptionFit(od=float(od), gamma_opt=float(abs(gamma)),
                         covariance=result.covariance[:2, :2],
                         residual=result.residual_rms, p_ref=float(math.exp(-log_ref)))
