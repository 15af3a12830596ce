"""Synthetic AFM sweeps from known ground truth, used as the oracle for the analysis.

Each sample solves the cantilever force balance

    k * delta = F_cas(a) + curvature(a) * (V - V0)^2,    a = z_piezo + z0 + delta

for the deflection `delta` (nm) on the stable branch, then reports
S_def = delta / m with white Gaussian noise and a linear drift added.
Attraction is negative, so delta and S_def are negative.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline

from .analysis import MeasurementSet, RawSweep, write_manifest, write_sweep
from .electrostatics import curvature_table
from .errors import ConfigError, NumericalError
from .lifshitz import LayerStack, LifshitzSettings, PFAValidityWarning, SphereGeometry, StackLike, force_curve

BALANCE_REL_TOL = 1e-6
# white noise (signal units) whose 100-curve mean force scatters by 0.55 pN
# after the full reduction; measured through analysis.extract_casimir
REFERENCE_NOISE_SIGMA = 4.4e-3


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Parameters of a synthetic measurement. Lengths in nm except the sphere radius (m)."""

    v0: float = -0.1968  # V
    k: float = 0.0139  # N/m
    z0: float = 29.5  # nm
    m: float = 104.4  # nm per signal unit
    sphere: SphereGeometry = SphereGeometry(101.23e-6)
    sphere_material: StackLike | None = None
    plate: StackLike | None = None  # Casimir force disabled when None
    temperature: float = 275.15
    voltages: tuple[float, ...] = tuple(np.round(np.linspace(-0.26, -0.10, 10), 6))
    repetitions: int = 10
    noise_sigma: float = 0.0  # signal units
    drift_slope: float = 0.0  # signal / nm
    drift_offset: float = 0.0  # signal
    seed: int = 0
    z_max: float = 2000.0
    step: float = 0.2
    m_sigma: float = 0.5  # reported with the data set
    radius_sigma: float = 0.5e-6
    electrostatic: bool = True

    def __post_init__(self):
        if not (self.k > 0 and self.z0 >= 0 and self.m > 0):
            raise ConfigError("ground truth needs k > 0, z0 >= 0 and m > 0")
        volts = tuple(float(v) for v in self.voltages)
        if len(set(volts)) != len(volts) or not volts:
            raise ConfigError("voltages must be distinct and non-empty")
        if self.repetitions < 1 or self.noise_sigma < 0 or self.step <= 0 or self.z_max <= 0:
            raise ConfigError("invalid sampling or noise settings")
        if (self.plate is None) != (self.sphere_material is None):
            raise ConfigError("give both sphere_material and plate, or neither")
        object.__setattr__(self, "voltages", volts)

    @property
    def z_piezo(self) -> np.ndarray:
        n = int(round(self.z_max / self.step))
        return self.z_max - self.step * np.arange(n + 1, dtype=float)


class CasimirTable:
    """Log-log cubic spline of the PFA Casimir force on [a_min, a_max] (m)."""

    def __init__(self, sphere, sphere_material, plate, temperature, a_min=15e-9, a_max=2.5e-6, points=96, threads=1):
        a = np.geomspace(a_min, a_max, points)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PFAValidityWarning)
            curve = force_curve(a, sphere, sphere_material, plate, LifshitzSettings(temperature=temperature), threads)
        f = curve.force_pn * 1e-12
        if np.any(f >= 0):
            raise ConfigError("synthetic Casimir force must be attractive over the tabulated range")
        self.a_min, self.a_max = a_min, a_max
        self._spline = CubicSpline(np.log(a), np.log(-f))
        self._dspline = self._spline.derivative()

    def __call__(self, a):
        return -np.exp(self._spline(np.log(a)))

    def derivative(self, a):
        la = np.log(a)
        return -np.exp(self._spline(la)) * self._dspline(la) / a


@lru_cache(maxsize=8)
def casimir_table(sphere: SphereGeometry, sphere_material, plate, temperature: float) -> CasimirTable:
    return CasimirTable(sphere, sphere_material, plate, temperature)


class _Force:
    """Total force (N) and gradient (N/m) at separation a (nm) for one voltage."""

    def __init__(self, truth: GroundTruth, voltage: float):
        self.cas = None
        if truth.plate is not None:
            self.cas = casimir_table(truth.sphere, truth.sphere_material, truth.plate, truth.temperature)
        self.el = curvature_table(truth.sphere.radius) if truth.electrostatic else None
        dv = voltage - truth.v0
        self.dv2 = dv * dv
        lows = [1e-9 if self.el else 0.0, self.cas.a_min if self.cas else 0.0]
        self.a_min = max(lows) * 1e9

    def value(self, a_nm):
        a = np.asarray(a_nm, dtype=float) * 1e-9
        out = np.zeros_like(a)
        if self.cas is not None:
            out = out + self.cas(a)
        if self.el is not None and self.dv2 != 0:
            out = out + self.el(a) * self.dv2
        return out

    def gradient(self, a_nm):
        a = np.asarray(a_nm, dtype=float) * 1e-9
        out = np.zeros_like(a)
        if self.cas is not None:
            out = out + self.cas.derivative(a)
        if self.el is not None and self.dv2 != 0:
            out = out + self.el.derivative(a) * self.dv2
        return out


def jump_to_contact(truth: GroundTruth, voltage: float) -> tuple[float, float] | None:
    """(a_jump, z_jump) in nm where dF/da first reaches k on approach, or None.

    Below z_jump the stable equilibrium no longer exists.
    """
    force = _Force(truth, voltage)
    hi = truth.z_max + truth.z0
    grid = np.geomspace(force.a_min * 1.0001, hi, 400)
    g = force.gradient(grid) - truth.k
    above = np.flatnonzero(g > 0)
    if above.size == 0:
        return None
    i = int(above[-1])
    if i == grid.size - 1:
        raise ConfigError("force gradient exceeds k over the whole piezo range")
    a_jump = optimize.brentq(lambda a: float(force.gradient(np.array([a]))[0]) - truth.k, grid[i], grid[i + 1], xtol=1e-12, rtol=1e-14)
    z_jump = a_jump - truth.z0 - float(force.value(np.array([a_jump]))[0]) / truth.k * 1e9
    return a_jump, z_jump


def _solve_deflection(force: _Force, k: float, base: np.ndarray, a_floor: float) -> np.ndarray:
    """Deflection delta (nm) with k*delta = F(base + delta) on the stable branch; base = z + z0."""
    delta = force.value(base) / k * 1e9
    todo = np.ones(base.shape, dtype=bool)
    for _ in range(200):
        if not todo.any():
            break
        a = base[todo] + delta[todo]
        a = np.maximum(a, a_floor)
        target = force.value(a) / k * 1e9
        ratio = force.gradient(a) / k
        # under-relax where the balance stiffens toward the instability
        w = np.where(ratio > 0.5, 0.5, 1.0)
        new = delta[todo] + w * (target - delta[todo])
        done = np.abs(new - delta[todo]) <= 1e-12 * np.abs(new) + 1e-15
        delta[todo] = new
        idx = np.flatnonzero(todo)
        todo[idx[done]] = False
    if todo.any():
        # bisection on a in [a_floor, base]: h(a) = a - base - F(a)/k changes sign once
        b = base[todo]
        lo = np.full(b.shape, a_floor)
        hi = b.copy()
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            h = mid - b - force.value(mid) / k * 1e9
            neg = h < 0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
            if np.all(hi - lo <= 1e-13 * hi):
                break
        delta[todo] = 0.5 * (lo + hi) - b
    return delta


def clean_signal(truth: GroundTruth, voltage: float) -> tuple[np.ndarray, np.ndarray, bool]:
    """Noise-free (z_piezo, S_def) for one voltage and whether the sweep hit the instability."""
    z = truth.z_piezo
    force = _Force(truth, voltage)
    if force.cas is None and (force.el is None or force.dv2 == 0):
        return z, np.zeros_like(z), False
    jump = jump_to_contact(truth, voltage)
    if jump is not None:
        a_floor, z_stop = jump
    else:
        a_floor, z_stop = force.a_min, force.a_min - truth.z0
    keep = z > z_stop
    z = z[keep]
    base = z + truth.z0
    delta = _solve_deflection(force, truth.k, base, a_floor)
    a = base + delta
    f = force.value(a)
    resid = np.abs(truth.k * delta * 1e-9 - f)
    bad = resid > BALANCE_REL_TOL * np.abs(f) + 1e-30
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NumericalError(f"force balance not met at z_piezo={z[i]:.6g} nm (residual {resid[i]:.3g} N)")
    return z, delta / truth.m, bool(jump is not None and np.any(~keep))


def sweep_rng(truth: GroundTruth, voltage_index: int, repetition: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(truth.seed, spawn_key=(voltage_index, repetition))))


def _noisy(truth: GroundTruth, voltage_index: int, repetition: int, z, s_clean, jumped) -> RawSweep:
    rng = sweep_rng(truth, voltage_index, repetition)
    noise = rng.standard_normal(z.size) * truth.noise_sigma
    s = s_clean + noise + truth.drift_offset + truth.drift_slope * z
    return RawSweep(truth.voltages[voltage_index], repetition, z, s, truth.step, jumped)


def simulate_sweep(truth: GroundTruth, voltage: float, repetition: int) -> RawSweep:
    """One sweep at `voltage` (must be one of the truth's voltages)."""
    try:
        vi = truth.voltages.index(float(voltage))
    except ValueError:
        raise ConfigError(f"voltage {voltage} is not part of the ground truth") from None
    z, s, jumped = clean_signal(truth, voltage)
    return _noisy(truth, vi, repetition, z, s, jumped)


def simulate_set(truth: GroundTruth, threads: int = 1) -> MeasurementSet:
    """All voltage x repetition sweeps; the clean signal is solved once per voltage."""
    if truth.plate is not None:
        casimir_table(truth.sphere, truth.sphere_material, truth.plate, truth.temperature)

    def per_voltage(vi):
        z, s, jumped = clean_signal(truth, truth.voltages[vi])
        return [_noisy(truth, vi, r, z, s, jumped) for r in range(truth.repetitions)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(per_voltage, range(len(truth.voltages))))
    else:
        blocks = [per_voltage(vi) for vi in range(len(truth.voltages))]
    sweeps = tuple(s for block in blocks for s in block)
    return MeasurementSet(sweeps, truth.m, truth.m_sigma, truth.sphere, truth.radius_sigma)


def truth_to_dict(truth: GroundTruth, extra: dict | None = None) -> dict:
    doc = {
        "v0_v": truth.v0,
        "k_n_per_m": truth.k,
        "z0_nm": truth.z0,
        "m_nm_per_unit": truth.m,
        "m_sigma_nm_per_unit": truth.m_sigma,
        "radius_um": truth.sphere.radius * 1e6,
        "radius_sigma_um": truth.radius_sigma * 1e6,
        "temperature_k": truth.temperature,
        "voltages_v": list(truth.voltages),
        "repetitions": truth.repetitions,
        "noise_sigma": truth.noise_sigma,
        "drift_slope_per_nm": truth.drift_slope,
        "drift_offset": truth.drift_offset,
        "seed": truth.seed,
        "z_max_nm": truth.z_max,
        "step_nm": truth.step,
        "electrostatic": truth.electrostatic,
        "casimir": truth.plate is not None,
    }
    if extra:
        doc.update(extra)
    return doc


def write_dataset(mset: MeasurementSet, truth: GroundTruth, directory, extra: dict | None = None) -> list[Path]:
    """Sweep files, `manifest.json` and `truth.json` under `directory`. Returns written paths."""
    directory = Path(directory)
    sweep_dir = directory / "sweeps"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    written = []
    names = []
    index = {v: i for i, v in enumerate(truth.voltages)}
    for s in mset.sweeps:
        name = f"sweeps/v{index[s.applied_voltage]:02d}_r{s.repetition:02d}.csv"
        write_sweep(s, directory / name)
        names.append(name)
        written += [directory / name, (directory / name).with_suffix(".json")]
    manifest = directory / "manifest.json"
    write_manifest(manifest, names, mset.m, mset.m_sigma, mset.sphere.radius, mset.radius_sigma)
    truth_path = directory / "truth.json"
    truth_path.write_text(json.dumps(truth_to_dict(truth, extra), indent=1) + "\n", encoding="utf-8")
    return written + [manifest, truth_path]
