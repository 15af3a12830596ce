"""Reduction of raw AFM sweeps to calibrated Casimir-force curves.

Separation model used throughout::

    a = z_piezo + m * S_def + z0        F_tot = k * m * S_def

`a_rel = z_piezo + m * S_def` is the separation relative to contact. Attractive
forces are negative, so the deflection signal is negative when the sphere is
pulled toward the plate.

Pipeline: :func:`subtract_drift` -> :func:`resample` -> parabola fit in the
applied voltage at every relative separation -> :func:`estimate_v0` and
:func:`fit_kinematics` (electrostatic calibration) -> :func:`extract_casimir`
-> :func:`error_budget`. :func:`calibrate` drives the first half, including
the uncertainty analysis.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from .curves import ForceCurve
from .electrostatics import curvature_table
from .errors import AlignmentError, ConfigError, DomainError, FitError, RangeError
from .lifshitz import SphereGeometry


class PartialSetWarning(UserWarning):
    """Some (voltage, repetition) sweeps are missing or do not reach a separation."""


# --------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class RawSweep:
    """One approach curve: piezo extension (nm) and deflection signal."""

    applied_voltage: float  # V
    repetition: int
    z_piezo: np.ndarray  # nm
    s_def: np.ndarray  # signal units
    sampling_step: float  # nm
    jump_to_contact: bool = False

    def __post_init__(self):
        z = np.asarray(self.z_piezo, dtype=float)
        s = np.asarray(self.s_def, dtype=float)
        if z.ndim != 1 or z.shape != s.shape or z.size < 2:
            raise ConfigError("sweep needs equally long 1-D z_piezo and s_def arrays")
        dz = np.diff(z)
        if not (np.all(dz > 0) or np.all(dz < 0)):
            raise ConfigError("z_piezo must be strictly monotone within a sweep")
        if not self.sampling_step > 0:
            raise ConfigError("sampling step must be positive")
        z.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "z_piezo", z)
        object.__setattr__(self, "s_def", s)
        object.__setattr__(self, "repetition", int(self.repetition))
        object.__setattr__(self, "applied_voltage", float(self.applied_voltage))

    @property
    def key(self) -> tuple[float, int]:
        return self.applied_voltage, self.repetition

    def relative_separation(self, m: float) -> np.ndarray:
        return self.z_piezo + m * self.s_def


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    sweeps: tuple[RawSweep, ...]
    m: float  # nm per signal unit
    m_sigma: float
    sphere: SphereGeometry
    radius_sigma: float = 0.0  # m

    def __post_init__(self):
        sweeps = tuple(self.sweeps)
        if not sweeps:
            raise ConfigError("measurement set contains no sweeps")
        keys = [s.key for s in sweeps]
        if len(set(keys)) != len(keys):
            raise ConfigError("duplicate (voltage, repetition) pair in measurement set")
        steps = {s.sampling_step for s in sweeps}
        if len(steps) != 1:
            raise ConfigError(f"sweeps use different sampling steps {sorted(steps)}")
        if not self.m > 0 or self.m_sigma < 0 or self.radius_sigma < 0:
            raise ConfigError("m must be positive and uncertainties non-negative")
        object.__setattr__(self, "sweeps", sweeps)

    @property
    def voltages(self) -> np.ndarray:
        return np.unique([s.applied_voltage for s in self.sweeps])

    @property
    def repetitions(self) -> np.ndarray:
        return np.unique([s.repetition for s in self.sweeps])

    def missing(self) -> list[tuple[float, int]]:
        """(voltage, repetition) pairs absent from the full voltage x repetition grid."""
        have = {s.key for s in self.sweeps}
        return [(float(v), int(r)) for v in self.voltages for r in self.repetitions if (v, r) not in have]

    def without_repetition(self, rep: int) -> "MeasurementSet":
        return replace(self, sweeps=tuple(s for s in self.sweeps if s.repetition != rep))


# --------------------------------------------------------------------------
# drift and resampling


@dataclass(frozen=True)
class DriftFit:
    intercept: float  # signal at z_piezo = 0
    slope: float  # signal / nm
    intercept_sigma: float
    slope_sigma: float
    samples: int


def _window_mask(sweep: RawSweep, far_window) -> np.ndarray:
    lo, hi = far_window
    if not lo < hi:
        raise ConfigError(f"drift window {far_window} is empty")
    z = sweep.z_piezo
    if lo < z.min() or hi > z.max():
        raise ConfigError(f"drift window [{lo}, {hi}] nm outside sweep range [{z.min():.6g}, {z.max():.6g}] nm")
    mask = (z >= lo) & (z <= hi)
    if mask.sum() < 50:
        raise ConfigError(f"drift window holds {int(mask.sum())} samples, need at least 50")
    return mask


def fit_drift(sweep: RawSweep, far_window=(1700.0, 2000.0), expected: Callable | None = None) -> DriftFit:
    """Least-squares line through the far-window samples.

    `expected(z_piezo)` is a model signal removed before the fit, so that a
    force still present in the window is not mistaken for drift.
    """
    mask = _window_mask(sweep, far_window)
    z = sweep.z_piezo[mask]
    s = sweep.s_def[mask]
    if expected is not None:
        s = s - np.asarray(expected(z), dtype=float)
    zm = z.mean()
    dz = z - zm
    sxx = float(dz @ dz)
    slope = float(dz @ (s - s.mean())) / sxx
    icpt_mid = float(s.mean())
    resid = s - icpt_mid - slope * dz
    n = z.size
    var = float(resid @ resid) / (n - 2)
    slope_sigma = math.sqrt(var / sxx)
    intercept = icpt_mid - slope * zm
    intercept_sigma = math.sqrt(var * (1.0 / n + zm * zm / sxx))
    return DriftFit(intercept, slope, intercept_sigma, slope_sigma, n)


def subtract_drift(sweep: RawSweep, far_window=(1700.0, 2000.0), expected: Callable | None = None) -> RawSweep:
    """Remove the far-window straight line from the whole sweep."""
    fit = fit_drift(sweep, far_window, expected)
    s = sweep.s_def - (fit.intercept + fit.slope * sweep.z_piezo)
    return replace(sweep, s_def=s)


@dataclass(frozen=True, eq=False)
class ResampledSweep:
    applied_voltage: float
    repetition: int
    a_rel: np.ndarray  # nm
    s_def: np.ndarray


def _sorted_coords(sweep: RawSweep, m: float | None):
    x = sweep.z_piezo if m is None else sweep.relative_separation(m)
    order = np.argsort(x, kind="stable")
    return x[order], sweep.s_def[order]


def resample(sweep: RawSweep, grid_step: float = 1.0, m: float | None = None, grid=None) -> ResampledSweep:
    """Linear interpolation of the signal onto a uniform separation grid.

    With `m` the abscissa is the relative separation z_piezo + m*S_def,
    otherwise the piezo extension itself. The default grid holds every
    multiple of `grid_step` inside the data range.
    """
    x, s = _sorted_coords(sweep, m)
    if grid is None:
        if not grid_step > 0:
            raise ConfigError("grid step must be positive")
        lo = math.ceil(x[0] / grid_step)
        hi = math.floor(x[-1] / grid_step)
        grid = grid_step * np.arange(lo, hi + 1, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or grid.min() < x[0] or grid.max() > x[-1]:
        raise RangeError(f"resampling grid leaves the data range [{x[0]:.6g}, {x[-1]:.6g}] nm")
    return ResampledSweep(sweep.applied_voltage, sweep.repetition, grid, np.interp(grid, x, s))


def _interp_or_nan(sweep: RawSweep, m: float, grid: np.ndarray) -> np.ndarray:
    x, s = _sorted_coords(sweep, m)
    return np.interp(grid, x, s, left=np.nan, right=np.nan)


@dataclass(frozen=True, eq=False)
class SignalGrid:
    """Signals of many sweeps on one relative-separation grid (NaN where a sweep has no data)."""

    a_rel: np.ndarray
    voltages: np.ndarray  # one entry per row
    repetitions: np.ndarray
    values: np.ndarray  # rows x grid


def resample_set(sweeps: Sequence[RawSweep], grid, m: float) -> SignalGrid:
    grid = np.asarray(grid, dtype=float)
    vals = np.vstack([_interp_or_nan(s, m, grid) for s in sweeps])
    return SignalGrid(
        grid,
        np.array([s.applied_voltage for s in sweeps]),
        np.array([s.repetition for s in sweeps]),
        vals,
    )


# --------------------------------------------------------------------------
# parabola fits


@dataclass(frozen=True, eq=False)
class ParabolaFits:
    """Per-separation quadratic fits S = c (V - V0)^2 + d.

    `cov` holds the covariance of (curvature, vertex, offset) at each
    separation from the delta method, using the residual variance of that
    separation alone. `degenerate` marks fits with numerically zero
    curvature, whose vertex is reported as NaN.
    """

    a_rel: np.ndarray
    curvature: np.ndarray  # signal / V^2
    vertex: np.ndarray  # V
    offset: np.ndarray  # signal
    cov: np.ndarray  # (n, 3, 3)
    residual_var: np.ndarray
    n_voltages: np.ndarray
    degenerate: np.ndarray
    _xtx_inv: np.ndarray = field(repr=False, default=None)
    _coef: np.ndarray = field(repr=False, default=None)

    def vertex_sigma(self, pooled: bool = False) -> np.ndarray:
        """1-sigma vertex uncertainty; `pooled` uses the mean residual variance over separations."""
        if not pooled:
            return np.sqrt(self.cov[:, 1, 1])
        ok = np.isfinite(self.residual_var)
        var = float(np.mean(self.residual_var[ok])) if ok.any() else math.nan
        c0, c1, c2 = self._coef.T
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.stack([np.zeros_like(c2), -0.5 / c2, 0.5 * c1 / c2**2], axis=1)
        return np.sqrt(var * np.einsum("ni,nij,nj->n", g, self._xtx_inv, g))

    def curvature_sigma(self) -> np.ndarray:
        return np.sqrt(self.cov[:, 0, 0])


def _design(v: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones_like(v), v, v * v])


def fit_parabola_per_separation(
    data: MeasurementSet | SignalGrid,
    a_rel=None,
    average_repetitions: bool = True,
) -> ParabolaFits:
    """Ordinary least-squares quadratic in the applied voltage at each separation.

    A MeasurementSet is resampled onto `a_rel` with its own m first (no drift
    subtraction). With `average_repetitions` the repetitions at each voltage
    are averaged before the fit; otherwise every sweep is a data point.
    """
    if isinstance(data, MeasurementSet):
        if a_rel is None:
            raise ConfigError("a_rel grid required when fitting a MeasurementSet")
        data = resample_set(data.sweeps, a_rel, data.m)
    if np.unique(data.voltages).size < 3:
        raise FitError("parabola fit needs at least 3 distinct voltages")
    if average_repetitions:
        volts = np.unique(data.voltages)
        rows = []
        for v in volts:
            block = data.values[data.voltages == v]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rows.append(np.nanmean(block, axis=0))
        y = np.vstack(rows)
    else:
        volts = data.voltages.astype(float)
        y = data.values
    n_grid = y.shape[1]
    coef = np.full((n_grid, 3), np.nan)
    xtx_inv = np.full((n_grid, 3, 3), np.nan)
    resvar = np.full(n_grid, np.nan)
    nvolt = np.zeros(n_grid, dtype=int)
    finite = np.isfinite(y)
    patterns, inverse = np.unique(finite.T, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).ravel()
    for p, mask in enumerate(patterns):
        cols = np.flatnonzero(inverse == p)
        v = volts[mask]
        distinct = np.unique(v).size
        nvolt[cols] = distinct
        if distinct < 3:
            continue
        X = _design(v)
        # scale columns for conditioning, undo afterwards
        scale = np.max(np.abs(X), axis=0)
        Xs = X / scale
        q, r = np.linalg.qr(Xs)
        yy = y[np.ix_(mask, cols)]
        beta = np.linalg.solve(r, q.T @ yy) / scale[:, None]
        coef[cols] = beta.T
        rinv = np.linalg.inv(r)
        xtx_inv[cols] = (rinv @ rinv.T) / np.outer(scale, scale)
        dof = v.size - 3
        if dof > 0:
            resid = yy - X @ beta
            resvar[cols] = np.sum(resid * resid, axis=0) / dof
    c0, c1, c2 = coef.T
    vspan = np.ptp(volts) if volts.size else 1.0
    ymax = np.nanmax(np.abs(y), axis=0, initial=0.0) if y.size else np.zeros(n_grid)
    degenerate = np.isfinite(c2) & (np.abs(c2) * max(vspan, np.max(np.abs(volts))) ** 2 <= 1e-12 * np.maximum(ymax, 1e-300))
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = np.where(degenerate, np.nan, -0.5 * c1 / c2)
        offset = np.where(degenerate, np.nan, c0 - 0.25 * c1 * c1 / c2)
        jac = np.zeros((n_grid, 3, 3))
        jac[:, 0, 2] = 1.0
        jac[:, 1, 1] = -0.5 / c2
        jac[:, 1, 2] = 0.5 * c1 / c2**2
        jac[:, 2, 0] = 1.0
        jac[:, 2, 1] = -0.5 * c1 / c2
        jac[:, 2, 2] = 0.25 * c1 * c1 / c2**2
        cov = resvar[:, None, None] * np.einsum("nij,njk,nlk->nil", jac, xtx_inv, jac)
    return ParabolaFits(
        a_rel=np.asarray(data.a_rel, dtype=float),
        curvature=c2,
        vertex=vertex,
        offset=offset,
        cov=cov,
        residual_var=resvar,
        n_voltages=nvolt,
        degenerate=degenerate,
        _xtx_inv=xtx_inv,
        _coef=coef,
    )


# --------------------------------------------------------------------------
# residual potential


@dataclass(frozen=True)
class V0Estimate:
    v0: float  # V
    sigma: float  # 1 sigma, V
    slope: float  # V / nm
    slope_sigma: float
    chi2_red: float
    points: int

    @property
    def independent(self) -> bool:
        """Slope consistent with zero at the 2-sigma level."""
        return abs(self.slope) <= 2.0 * self.slope_sigma


def _weighted_line(x, y, w):
    sw = w.sum()
    xm = float(w @ x) / sw
    ym = float(w @ y) / sw
    dx = x - xm
    sxx = float(w @ (dx * dx))
    slope = float(w @ (dx * (y - ym))) / sxx
    resid = y - ym - slope * dx
    return slope, ym, sxx, float(w @ (resid * resid))


def estimate_v0(a_rel, vertices, sigmas=None, min_points: int = 10) -> V0Estimate:
    """Inverse-variance weighted mean of the vertices and a linear-trend test.

    Without `sigmas` all vertices get equal weight and the scatter sets the
    uncertainty. With `sigmas` the uncertainties are inflated by the Birge
    ratio sqrt(chi2_red) when it exceeds one.
    """
    x = np.asarray(a_rel, dtype=float)
    y = np.asarray(vertices, dtype=float)
    s = np.ones_like(y) if sigmas is None else np.asarray(sigmas, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y) & np.isfinite(s) & (s > 0)
    x, y, s = x[ok], y[ok], s[ok]
    n = x.size
    if n < min_points:
        raise FitError(f"residual-potential estimate needs {min_points} separations, got {n}")
    w = 1.0 / (s * s)
    sw = float(w.sum())
    mean = float(w @ y) / sw
    slope, _, sxx, chi2_line = _weighted_line(x, y, w)
    chi2_mean = float(w @ (y - mean) ** 2)
    red_line = chi2_line / (n - 2)
    if sigmas is None:
        scale_mean = chi2_mean / (n - 1)
        scale_line = red_line
    else:
        scale_mean = max(1.0, chi2_mean / (n - 1))
        scale_line = max(1.0, red_line)
    return V0Estimate(
        v0=mean,
        sigma=math.sqrt(scale_mean / sw),
        slope=slope,
        slope_sigma=math.sqrt(scale_line / sxx),
        chi2_red=chi2_mean / (n - 1),
        points=n,
    )


# --------------------------------------------------------------------------
# kinematic calibration


@dataclass(frozen=True)
class KinematicsFit:
    z0: float  # nm
    k: float  # N/m
    cov: np.ndarray  # 1-sigma covariance of (z0, k)
    residual_rms: float
    evaluations: int

    @property
    def z0_sigma(self) -> float:
        return math.sqrt(self.cov[0, 0])

    @property
    def k_sigma(self) -> float:
        return math.sqrt(self.cov[1, 1])


def _window_line(fn, far_window, points: int = 301):
    """Value and slope of the least-squares line through fn(z) over the window, centred at z_mid."""
    z = np.linspace(far_window[0], far_window[1], points)
    dz = z - z.mean()
    f = fn(z)
    return float(f.mean()), float(dz @ f) / float(dz @ dz), float(z.mean())


def curvature_model(a_rel, z0: float, k: float, m: float, R: float, far_window=None) -> np.ndarray:
    """Parabola curvature in signal/V^2 predicted at relative separations `a_rel` (nm).

    With `far_window` the straight line that drift subtraction removes from
    the far-field electrostatic signal is taken out of the model as well.
    """
    table = curvature_table(R)
    x = np.asarray(a_rel, dtype=float)
    c = table((x + z0) * 1e-9)
    if far_window is not None:
        mean, slope, zm = _window_line(lambda z: table((z + z0) * 1e-9), far_window)
        c = c - (mean + slope * (x - zm))
    return c / (k * m * 1e-9)


def fit_kinematics(
    a_rel,
    curvatures,
    m: float,
    R: float,
    sigma=None,
    z0_init: float = 30.0,
    k_init: float = 0.01,
    min_points: int = 100,
    max_evaluations: int = 2000,
    far_window=None,
) -> KinematicsFit:
    """Levenberg-Marquardt fit of c(a_rel) = curvature(a_rel + z0, R) / (k m).

    `m` in nm per signal unit, `R` in m. The covariance comes from the
    Jacobian at the optimum scaled by the reduced chi-square. `far_window`
    selects the drift-aware model of :func:`curvature_model`, for curvatures
    measured on sweeps whose drift line absorbed part of the electrostatic
    force.
    """
    x = np.asarray(a_rel, dtype=float)
    c = np.asarray(curvatures, dtype=float)
    sig = np.ones_like(c) if sigma is None else np.asarray(sigma, dtype=float)
    ok = np.isfinite(x) & np.isfinite(c) & np.isfinite(sig) & (sig > 0)
    x, c, sig = x[ok], c[ok], sig[ok]
    if x.size < min_points:
        raise FitError(f"kinematic fit needs {min_points} separations, got {x.size}")
    if sigma is None:
        sig = sig * float(np.median(np.abs(c)))
    table = curvature_table(R)
    mm = m * 1e-9

    def parts(z0):
        a = (x + z0) * 1e-9
        f, df = table(a), table.derivative(a) * 1e-9
        if far_window is not None:
            mean, slope, zm = _window_line(lambda z: table((z + z0) * 1e-9), far_window)
            dmean, dslope, _ = _window_line(lambda z: table.derivative((z + z0) * 1e-9) * 1e-9, far_window)
            f = f - (mean + slope * (x - zm))
            df = df - (dmean + dslope * (x - zm))
        return f, df

    def resid(p):
        z0, k = p
        f, _ = parts(z0)
        return (f / (k * mm) - c) / sig

    def jac(p):
        z0, k = p
        f, df = parts(z0)
        return np.column_stack([df / (k * mm) / sig, -f / (k * k * mm) / sig])

    try:
        sol = optimize.least_squares(
            resid, [z0_init, k_init], jac=jac, method="lm", x_scale=[1.0, 1e-3], max_nfev=max_evaluations
        )
    except DomainError as exc:
        raise FitError(f"kinematic fit left the tabulated separation range: {exc}") from exc
    rms = float(np.sqrt(np.mean(sol.fun**2))) if sol.fun.size else math.nan
    if not sol.success or not np.all(np.isfinite(sol.x)) or sol.x[1] <= 0:
        raise FitError(f"kinematic fit did not converge: {sol.message}", residual=rms)
    J = sol.jac
    dof = max(x.size - 2, 1)
    try:
        cov = np.linalg.inv(J.T @ J) * float(sol.fun @ sol.fun) / dof
    except np.linalg.LinAlgError as exc:
        raise FitError("singular Jacobian at the kinematic optimum", residual=rms) from exc
    return KinematicsFit(float(sol.x[0]), float(sol.x[1]), cov, rms, int(sol.nfev))


# --------------------------------------------------------------------------
# calibration driver


@dataclass(frozen=True)
class CalibrationSettings:
    drift_window: tuple[float, float] = (1700.0, 2000.0)  # z_piezo, nm
    separation_range: tuple[float | None, float | None] = (None, 300.0)  # a_rel, nm
    grid_step: float = 1.0
    average_repetitions: bool = True
    compensate_far_field: bool = True
    uncertainty: str = "jackknife"  # or "jacobian"
    confidence: float = 0.95
    max_iterations: int = 30
    z0_init: float = 30.0
    k_init: float = 0.01
    threads: int = 1

    def __post_init__(self):
        if self.uncertainty not in ("jackknife", "jacobian"):
            raise ConfigError(f"unknown uncertainty method {self.uncertainty!r}")
        if not 0 < self.confidence < 1:
            raise ConfigError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class _Point:
    v0: float
    k: float
    z0: float
    grid: np.ndarray
    fits: ParabolaFits
    v0_estimate: V0Estimate
    kinematics: KinematicsFit
    iterations: int


def far_field_signal(calib, voltage: float, m: float, R: float) -> Callable:
    """Electrostatic signal expected from a calibration, as a function of z_piezo (nm)."""
    table = curvature_table(R)
    dv = voltage - calib.v0
    mm = m * 1e-9

    def signal(z):
        a = (np.asarray(z, dtype=float) + calib.z0) * 1e-9
        s = table(a) * dv * dv / (calib.k * mm)
        # one fixed-point step for the deflection-induced approach
        return table(a + m * s * 1e-9) * dv * dv / (calib.k * mm)

    return signal


def detrend_sweeps(sweeps, settings: CalibrationSettings, calib=None, m=None, R=None) -> list[RawSweep]:
    out = []
    for s in sweeps:
        expected = None
        if calib is not None and settings.compensate_far_field:
            expected = far_field_signal(calib, s.applied_voltage, m, R)
        out.append(subtract_drift(s, settings.drift_window, expected))
    return out


def _calibration_grid(sweeps: Sequence[RawSweep], m: float, settings: CalibrationSettings) -> np.ndarray:
    lows, highs = [], []
    for s in sweeps:
        x = s.relative_separation(m)
        lows.append(x.min())
        highs.append(x.max())
    lo = max(lows)
    hi = min(highs)
    want_lo, want_hi = settings.separation_range
    if want_lo is not None:
        lo = max(lo, want_lo)
    if want_hi is not None:
        hi = min(hi, want_hi)
    step = settings.grid_step
    grid = step * np.arange(math.ceil(lo / step), math.floor(hi / step) + 1, dtype=float)
    if grid.size == 0:
        raise FitError("sweeps share no common separation range")
    return grid


def _single_pass(sweeps, m, R, settings: CalibrationSettings, prev, init) -> _Point:
    clean = detrend_sweeps(sweeps, settings, prev, m, R)
    grid = _calibration_grid(clean, m, settings)
    data = resample_set(clean, grid, m)
    fits = fit_parabola_per_separation(data, average_repetitions=settings.average_repetitions)
    v0e = estimate_v0(grid, fits.vertex, fits.vertex_sigma(pooled=True))
    # first compensated pass: the drift-aware model gives a close starting point
    window = settings.drift_window if (prev is None and settings.compensate_far_field) else None
    kin = fit_kinematics(grid, fits.curvature, m, R, z0_init=init[0], k_init=init[1], far_window=window)
    return _Point(v0e.v0, kin.k, kin.z0, grid, fits, v0e, kin, 0)


_SCALES = np.array([1e-4, 1e-5, 1.0])  # v0 (V), k (N/m), z0 (nm)


def _vec(p) -> np.ndarray:
    return np.array([p.v0, p.k, p.z0])


def _calibrate_point(sweeps, m: float, R: float, settings: CalibrationSettings, start=None) -> _Point:
    """Calibration with the far-field electrostatic signal excluded from the drift fit.

    The compensation depends on the calibration itself, so the map
    params -> params is iterated to its fixed point. The map contracts
    linearly; every third step is extrapolated along the observed geometric
    decay.
    """
    init = (settings.z0_init, settings.k_init) if start is None else (start.z0, start.k)
    if not settings.compensate_far_field:
        return _single_pass(sweeps, m, R, settings, None, init)
    prev = start if start is not None else _single_pass(sweeps, m, R, settings, None, init)
    history = [_vec(prev)]
    for it in range(1, settings.max_iterations + 1):
        point = _single_pass(sweeps, m, R, settings, prev, (prev.z0, prev.k))
        x = _vec(point)
        step = (x - _vec(prev)) / _SCALES
        if np.all(np.abs(step) < np.array([1e-4, 1e-4, 1e-5])):
            return replace(point, iterations=it)
        history.append(x)
        prev = point
        if len(history) >= 3:
            d1 = (history[-2] - history[-3]) / _SCALES
            d2 = (history[-1] - history[-2]) / _SCALES
            lam = float(d2 @ d1) / float(d1 @ d1) if float(d1 @ d1) > 0 else 0.0
            if 0.0 < lam < 0.9:
                v0, k, z0 = history[-1] + lam / (1.0 - lam) * (history[-1] - history[-2])
                if k > 0:
                    prev = replace(point, v0=float(v0), k=float(k), z0=float(z0))
                history = [_vec(prev)]
    warnings.warn(f"far-field compensation not settled after {settings.max_iterations} iterations", RuntimeWarning)
    return replace(point, iterations=settings.max_iterations)


@dataclass(frozen=True)
class CalibrationResult:
    """Calibrated parameters with 95%-confidence half-widths (or `confidence`)."""

    v0: float  # V
    v0_err: float
    k: float  # N/m
    k_err: float
    z0: float  # nm
    z0_err: float
    m: float  # nm / signal unit, passed through
    m_err: float
    confidence: float
    v0_vs_separation: dict  # a_rel_nm, vertex_v, vertex_sigma_v
    independence: V0Estimate
    components: dict  # statistical / systematic half-widths per parameter
    iterations: int
    method: str

    def to_dict(self) -> dict:
        ind = self.independence
        return {
            "confidence": self.confidence,
            "uncertainty_method": self.method,
            "v0_v": self.v0,
            "v0_err_v": self.v0_err,
            "k_n_per_m": self.k,
            "k_err_n_per_m": self.k_err,
            "z0_nm": self.z0,
            "z0_err_nm": self.z0_err,
            "m_nm_per_unit": self.m,
            "m_err_nm_per_unit": self.m_err,
            "v0_independence": {
                "slope_v_per_nm": ind.slope,
                "slope_sigma_v_per_nm": ind.slope_sigma,
                "independent": bool(ind.independent),
                "chi2_red": ind.chi2_red,
                "separations": ind.points,
            },
            "components": self.components,
            "iterations": self.iterations,
            "v0_vs_separation": {k: [float(x) for x in v] for k, v in self.v0_vs_separation.items()},
        }


def _student(confidence: float, dof: int) -> float:
    return float(stats.t.ppf(0.5 * (1.0 + confidence), dof))


def calibrate(mset: MeasurementSet, settings: CalibrationSettings = CalibrationSettings()) -> CalibrationResult:
    """Electrostatic calibration of V0, k and z0 with uncertainty analysis.

    Drift is removed with a line fitted over the far window. Because the
    electrostatic force has not vanished there, the calibration is iterated
    with the expected far-field signal taken out of the line fit.

    Statistical half-widths come from a leave-one-repetition-out jackknife
    times the Student coefficient with R-1 degrees of freedom (the drift
    extrapolation correlates the noise across separations, which a
    per-separation error model would miss). With a single repetition, or
    ``uncertainty="jacobian"``, the fit covariances are used instead. The
    uncertainties of m and R are propagated by re-running the calibration at
    m +- dm and R +- dR and are added in quadrature.
    """
    R = mset.sphere.radius
    m = mset.m
    missing = mset.missing()
    if missing:
        warnings.warn(f"{len(missing)} sweep(s) missing from the voltage x repetition grid", PartialSetWarning)
    base = _calibrate_point(mset.sweeps, m, R, settings)
    reps = mset.repetitions
    method = settings.uncertainty if reps.size >= 2 else "jacobian"
    names = ("v0", "k", "z0")

    def values(p):
        return np.array([p.v0, p.k, p.z0, p.v0_estimate.slope])

    def run(job):
        kind, arg = job
        if kind == "rep":
            sub = [s for s in mset.sweeps if s.repetition != arg]
            return values(_calibrate_point(sub, m, R, settings, base))
        if kind == "m":
            return values(_calibrate_point(mset.sweeps, m + arg, R, settings, base))
        return values(_calibrate_point(mset.sweeps, m, R + arg, settings, base))

    jobs = []
    if method == "jackknife":
        jobs += [("rep", int(r)) for r in reps]
    if mset.m_sigma > 0:
        jobs += [("m", mset.m_sigma), ("m", -mset.m_sigma)]
    if mset.radius_sigma > 0:
        jobs += [("R", mset.radius_sigma), ("R", -mset.radius_sigma)]
    if settings.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    by_kind: dict[str, list] = {"rep": [], "m": [], "R": []}
    for (kind, _), val in zip(jobs, results):
        by_kind[kind].append(val)

    independence = base.v0_estimate
    if method == "jackknife":
        thetas = np.vstack(by_kind["rep"])
        n = thetas.shape[0]
        sd = np.sqrt((n - 1) / n * np.sum((thetas - thetas.mean(axis=0)) ** 2, axis=0))
        dof = n - 1
        stat = _student(settings.confidence, dof) * sd[:3]
        # separations share drift-extrapolation noise, so the slope error is taken from the replicates too
        independence = replace(independence, slope_sigma=float(sd[3]))
    else:
        kin = base.kinematics
        v0e = base.v0_estimate
        dof = base.grid.size - 2
        stat = _student(settings.confidence, dof) * np.array([v0e.sigma, kin.k_sigma, kin.z0_sigma])
    sys_m = np.abs(by_kind["m"][0] - by_kind["m"][1])[:3] / 2 if by_kind["m"] else np.zeros(3)
    sys_r = np.abs(by_kind["R"][0] - by_kind["R"][1])[:3] / 2 if by_kind["R"] else np.zeros(3)
    total = np.sqrt(stat**2 + sys_m**2 + sys_r**2)

    components = {
        f"{name}": {"statistical": float(stat[i]), "systematic_m": float(sys_m[i]), "systematic_radius": float(sys_r[i])}
        for i, name in enumerate(names)
    }
    components["student_dof"] = int(dof)
    return CalibrationResult(
        v0=base.v0,
        v0_err=float(total[0]),
        k=base.k,
        k_err=float(total[1]),
        z0=base.z0,
        z0_err=float(total[2]),
        m=m,
        m_err=mset.m_sigma,
        confidence=settings.confidence,
        v0_vs_separation={
            "a_rel_nm": base.grid,
            "vertex_v": base.fits.vertex,
            "vertex_sigma_v": base.fits.vertex_sigma(pooled=True),
        },
        independence=independence,
        components=components,
        iterations=base.iterations,
        method=method,
    )


# --------------------------------------------------------------------------
# Casimir extraction


@dataclass(frozen=True, eq=False)
class CasimirCurves:
    """Casimir force of every sweep on the absolute separation grid, plus their mean."""

    a_nm: np.ndarray
    forces_pn: np.ndarray  # sweeps x grid, NaN where a sweep does not reach
    voltages: np.ndarray
    repetitions: np.ndarray
    counts: np.ndarray  # curves contributing at each separation
    mean: ForceCurve

    def curves(self) -> list[ForceCurve]:
        return [ForceCurve(self.a_nm, row) for row in self.forces_pn]

    def per_voltage_means(self) -> dict[float, np.ndarray]:
        out = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for v in np.unique(self.voltages):
                out[float(v)] = np.nanmean(self.forces_pn[self.voltages == v], axis=0)
        return out


def extract_casimir(
    mset: MeasurementSet,
    calibration: CalibrationResult,
    grid=None,
    drift_window=(1700.0, 2000.0),
    compensate_far_field: bool = True,
) -> CasimirCurves:
    """F_cas = k m S_def - curvature(a) (V - V0)^2 on an absolute grid (nm).

    The default grid is 60-300 nm in 1 nm steps. Each sweep is drift
    corrected with the calibrated far-field signal removed from the window
    fit and read off at a_rel = a - z0. Separations a sweep does not reach
    (jump to contact) are NaN and excluded from the mean.
    """
    grid = np.arange(60.0, 301.0, 1.0) if grid is None else np.asarray(grid, dtype=float)
    R = mset.sphere.radius
    m = mset.m
    table = curvature_table(R)
    curv = table(grid * 1e-9)
    km = calibration.k * m * 1e-9  # N per signal unit
    settings = CalibrationSettings(drift_window=tuple(drift_window), compensate_far_field=compensate_far_field)
    clean = detrend_sweeps(mset.sweeps, settings, calibration, m, R)
    rows = []
    for s in clean:
        sig = _interp_or_nan(s, m, grid - calibration.z0)
        dv = s.applied_voltage - calibration.v0
        rows.append((km * sig - curv * (dv * dv)) * 1e12)
    forces = np.vstack(rows)
    counts = np.sum(np.isfinite(forces), axis=0)
    missing = mset.missing()
    if missing:
        warnings.warn(f"{len(missing)} sweep(s) missing; means use the remaining curves", PartialSetWarning)
    if np.any(counts < len(clean)):
        short = int(np.sum(counts < len(clean)))
        warnings.warn(f"{short} separation(s) not reached by every sweep", PartialSetWarning)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(forces, axis=0)
    return CasimirCurves(
        a_nm=grid,
        forces_pn=forces,
        voltages=np.array([s.applied_voltage for s in clean]),
        repetitions=np.array([s.repetition for s in clean]),
        counts=counts,
        mean=ForceCurve(grid, mean),
    )


# --------------------------------------------------------------------------
# error budget


def combine_rss(systematic, random):
    return np.hypot(systematic, random)


def combine_linear(systematic, random):
    return np.asarray(systematic) + np.asarray(random)


COMBINATION_RULES = {"rss": combine_rss, "linear": combine_linear}


@dataclass(frozen=True)
class ErrorModel:
    """Systematic profile plus random error of the mean at a given confidence.

    The systematic profile is interpolated linearly in log(a) between the
    anchors (nm, pN) and held constant outside them. `random_sigma_of_mean`
    is the standard deviation of the mean force in pN; when None it is
    estimated from the curves.
    """

    systematic_anchors: tuple[tuple[float, float], ...] = ((60.0, 2.1), (100.0, 1.5), (200.0, 1.1))
    random_sigma_of_mean: float | None = None  # pN
    confidence: float = 0.95
    repetitions: int | None = None
    combine: str = "rss"

    def __post_init__(self):
        anchors = tuple((float(a), float(v)) for a, v in self.systematic_anchors)
        a = np.array([x for x, _ in anchors])
        v = np.array([y for _, y in anchors])
        if a.size == 0 or np.any(a <= 0) or np.any(np.diff(a) <= 0):
            raise ConfigError("systematic anchors need positive, ascending separations")
        if np.any(v < 0) or np.any(np.diff(v) > 0):
            raise ConfigError("systematic profile must be non-negative and nonincreasing in a")
        if not 0 < self.confidence < 1:
            raise ConfigError("confidence must lie in (0, 1)")
        if self.combine not in COMBINATION_RULES:
            raise ConfigError(f"unknown combination rule {self.combine!r}; choose from {sorted(COMBINATION_RULES)}")
        if self.random_sigma_of_mean is not None and not self.random_sigma_of_mean >= 0:
            raise ConfigError("random standard deviation must be non-negative")
        object.__setattr__(self, "systematic_anchors", anchors)

    def systematic(self, a_nm) -> np.ndarray:
        a = np.asarray(a_nm, dtype=float)
        xs = np.log([x for x, _ in self.systematic_anchors])
        ys = np.array([y for _, y in self.systematic_anchors])
        return np.interp(np.log(a), xs, ys)

    def student(self, n: int) -> float:
        if n < 2:
            raise ConfigError("the Student coefficient needs at least 2 repetitions")
        return _student(self.confidence, n - 1)


def _as_matrix(curves) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(curves, CasimirCurves):
        return curves.a_nm, curves.forces_pn
    curves = list(curves)
    if not curves:
        raise ConfigError("no curves supplied")
    a = curves[0].a_nm
    for c in curves[1:]:
        if c.a_nm.shape != a.shape or not np.array_equal(c.a_nm, a):
            raise AlignmentError("curves do not share a separation grid")
    return a, np.vstack([c.force_pn for c in curves])


def error_budget(curves, error_model: ErrorModel = ErrorModel()) -> ForceCurve:
    """Mean curve with systematic, random and total errors at the model's confidence.

    Random error: Student coefficient (N-1 degrees of freedom) times the
    standard deviation of the mean, pooled over separations into one value.
    """
    a, forces = _as_matrix(curves)
    counts = np.sum(np.isfinite(forces), axis=0)
    n = error_model.repetitions or int(counts.max())
    if n < 2:
        raise ConfigError("error budget needs at least 2 repetitions")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(forces, axis=0)
        if error_model.random_sigma_of_mean is None:
            ok = counts >= 2
            var_mean = np.nanvar(forces[:, ok], axis=0, ddof=1) / counts[ok]
            sigma = math.sqrt(float(np.mean(var_mean))) if var_mean.size else 0.0
        else:
            sigma = error_model.random_sigma_of_mean
    rand = error_model.student(n) * sigma
    sys = error_model.systematic(a)
    total = COMBINATION_RULES[error_model.combine](sys, rand)
    return ForceCurve(a, mean, err_sys_pn=sys, err_rand_pn=rand, err_tot_pn=total)


@dataclass(frozen=True, eq=False)
class RelativeDifference:
    a_nm: np.ndarray
    value: np.ndarray  # (|F_a| - |F_b|) / |F_a|
    error: np.ndarray

    def columns(self) -> dict[str, np.ndarray]:
        return {"a_nm": self.a_nm, "rel_diff": self.value, "rel_diff_err": self.error}


def compare_curves(curve_a: ForceCurve, curve_b: ForceCurve) -> RelativeDifference:
    """Relative decrease of |F_b| against |F_a| with first-order error propagation.

    Errors are taken from each curve's total error column when present.
    """
    if curve_a.a_nm.shape != curve_b.a_nm.shape or np.max(np.abs(curve_a.a_nm - curve_b.a_nm), initial=0.0) > 1e-9:
        raise AlignmentError("curves are not on a common separation grid")
    fa = np.abs(curve_a.force_pn)
    fb = np.abs(curve_b.force_pn)
    ea = np.zeros_like(fa) if curve_a.err_tot_pn is None else curve_a.err_tot_pn
    eb = np.zeros_like(fb) if curve_b.err_tot_pn is None else curve_b.err_tot_pn
    with np.errstate(divide="ignore", invalid="ignore"):
        value = (fa - fb) / fa
        error = np.hypot(eb / fa, fb * ea / (fa * fa))
    return RelativeDifference(curve_a.a_nm.copy(), value, error)


# --------------------------------------------------------------------------
# files


def _fmt(x) -> str:
    return format(float(x), ".17g")


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_sweep(sweep: RawSweep, path) -> None:
    """Sweep CSV `z_piezo_nm,s_def` plus its JSON sidecar."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z_piezo_nm", "s_def"])
        for z, s in zip(sweep.z_piezo, sweep.s_def):
            w.writerow([_fmt(z), _fmt(s)])
    meta = {
        "applied_voltage_v": sweep.applied_voltage,
        "repetition": sweep.repetition,
        "sampling_step_nm": sweep.sampling_step,
    }
    if sweep.jump_to_contact:
        meta["jump_to_contact"] = True
    sidecar_path(path).write_text(json.dumps(meta, indent=1) + "\n", encoding="utf-8")


def read_sweep(path) -> RawSweep:
    path = Path(path)
    try:
        meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sweep {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["z_piezo_nm", "s_def"]:
        raise ConfigError(f"{path}: expected header z_piezo_nm,s_def")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r])
        return RawSweep(
            applied_voltage=float(meta["applied_voltage_v"]),
            repetition=int(meta["repetition"]),
            z_piezo=data[:, 0],
            s_def=data[:, 1],
            sampling_step=float(meta["sampling_step_nm"]),
            jump_to_contact=bool(meta.get("jump_to_contact", False)),
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed sweep ({exc})") from exc


def write_manifest(path, sweep_files, m: float, m_sigma: float, radius: float, radius_sigma: float) -> None:
    """Measurement-set manifest; sweep paths are stored relative to the manifest."""
    path = Path(path)
    doc = {
        "sweeps": [str(Path(f).relative_to(path.parent)) if Path(f).is_absolute() else str(f) for f in sweep_files],
        "m_nm_per_unit": m,
        "m_sigma_nm_per_unit": m_sigma,
        "radius_um": radius * 1e6,
        "radius_sigma_um": radius_sigma * 1e6,
    }
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_measurement_set(path) -> MeasurementSet:
    """Read a manifest; sweeps whose files are missing are skipped with a warning."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    try:
        files = list(doc["sweeps"])
        m, m_sigma = float(doc["m_nm_per_unit"]), float(doc.get("m_sigma_nm_per_unit", 0.0))
        radius = float(doc["radius_um"]) * 1e-6
        radius_sigma = float(doc.get("radius_sigma_um", 0.0)) * 1e-6
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed manifest ({exc})") from exc
    sweeps = []
    absent = []
    for f in files:
        p = path.parent / f
        if not p.exists():
            absent.append(f)
            continue
        sweeps.append(read_sweep(p))
    if absent:
        warnings.warn(f"{len(absent)} sweep file(s) listed in {path.name} are missing: {absent[:5]}", PartialSetWarning)
    return MeasurementSet(tuple(sweeps), m, m_sigma, SphereGeometry(radius), radius_sigma)
