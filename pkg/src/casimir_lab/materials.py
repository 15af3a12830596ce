"""Dielectric response along the imaginary frequency axis.

All frequencies in this module are photon energies in eV (hbar*omega,
hbar*xi). Conversion to wave numbers happens in :mod:`casimir_lab.lifshitz`.

Models
------
Drude
    eps(i xi) = 1 + wp^2 / (xi (xi + gamma))
GeneralizedPlasma
    eps(i xi) = 1 + wp^2 / xi^2 + sum_j f_j w_j^2 / (w_j^2 + xi^2 + g_j xi)
TabulatedKK
    Measured Im eps(omega) on a finite band, mapped to the imaginary axis by
    the Kramers-Kronig relation, with a Drude tail below the band and an
    oscillator tail above it.
DielectricTable
    Tabulated eps(i xi), interpolated linearly in log(xi).
IdealMetal
    Perfect reflector.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import integrate

from .constants import CONSTANTS
from .errors import ConfigError, DomainError, NumericalError

_TWO_OVER_PI = 2.0 / math.pi


@dataclass(frozen=True)
class DrudeParams:
    omega_p: float  # eV
    gamma: float  # eV

    def __post_init__(self):
        if not (self.omega_p > 0 and self.gamma > 0):
            raise ConfigError(
                f"Drude parameters must be positive, got omega_p={self.omega_p}, gamma={self.gamma}"
            )

    def eps(self, xi):
        xi = np.asarray(xi, dtype=float)
        return 1.0 + self.omega_p**2 / (xi * (xi + self.gamma))

    def im_eps(self, omega):
        omega = np.asarray(omega, dtype=float)
        g = self.gamma
        return self.omega_p**2 * g / (omega * (omega**2 + g**2))

    def tail_integral(self, upper, xi):
        """Integral of omega*Im eps/(omega^2 + xi^2) from 0 to `upper`, xi > 0."""
        xi = np.asarray(xi, dtype=float)
        g = self.gamma
        W = float(upper)

        def h(s):
            return np.arctan(W / s) / s

        with np.errstate(divide="ignore", invalid="ignore"):
            out = (h(g) - h(xi)) / (xi**2 - g**2)
        # removable singularity at xi == gamma
        near = np.abs(xi - g) < 1e-4 * g
        if np.any(near):
            s = 0.5 * (xi[near] + g)
            dh = -np.arctan(W / s) / s**2 - W / (s * (s**2 + W**2))
            out = np.where(near, 0.0, out)
            out[near] = -dh / (2.0 * s)
        return self.omega_p**2 * g * out


@dataclass(frozen=True)
class Oscillator:
    strength: float  # dimensionless
    resonance: float  # eV
    width: float  # eV


@dataclass(frozen=True)
class OscillatorSet:
    oscillators: tuple[Oscillator, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "oscillators", tuple(self.oscillators))
        prev = 0.0
        for osc in self.oscillators:
            if osc.strength < 0 or osc.width < 0 or not osc.resonance > 0:
                raise ConfigError(f"invalid oscillator {osc}")
            if osc.resonance <= prev:
                raise ConfigError("oscillator resonances must be strictly ascending")
            prev = osc.resonance

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "OscillatorSet":
        return cls(tuple(Oscillator(float(f), float(w0), float(g)) for f, w0, g in rows))

    def __len__(self):
        return len(self.oscillators)

    def eps(self, xi):
        """Contribution sum_j f_j w_j^2/(w_j^2 + xi^2 + g_j xi) (without the leading 1)."""
        xi = np.asarray(xi, dtype=float)
        out = np.zeros_like(xi)
        for o in self.oscillators:
            out = out + o.strength * o.resonance**2 / (o.resonance**2 + xi**2 + o.width * xi)
        return out

    def im_eps(self, omega):
        omega = np.asarray(omega, dtype=float)
        out = np.zeros_like(omega)
        for o in self.oscillators:
            if o.width == 0:
                continue
            w2 = o.resonance**2
            out = out + o.strength * w2 * o.width * omega / ((w2 - omega**2) ** 2 + (o.width * omega) ** 2)
        return out

    def tail_integral(self, lower, xi):
        """Integral of omega*Im eps/(omega^2 + xi^2) from `lower` to infinity.

        Evaluated analytically by partial fractions in omega^2; a zero-width
        oscillator contributes its delta-function weight when its resonance
        lies above `lower`.
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        W = float(lower)
        total = np.zeros_like(xi)
        for o in self.oscillators:
            if o.strength == 0:
                continue
            if o.width == 0:
                if o.resonance > W:
                    total += 0.5 * math.pi * o.strength * o.resonance**2 / (o.resonance**2 + xi**2)
                continue
            total += np.array([_lorentz_tail(o, W, x) for x in xi])
        return total


def _lorentz_tail(o: Oscillator, W: float, xi: float) -> float:
    w2 = o.resonance**2
    g = o.width
    disc = w2 - 0.25 * g * g
    re = w2 - 0.5 * g * g
    if disc > 0:
        im = g * math.sqrt(disc)
        roots = [complex(re, im), complex(re, -im)]
    else:
        sq = g * math.sqrt(-disc)
        roots = [complex(re + sq, 0.0), complex(re - sq, 0.0)]
    roots.append(complex(-xi * xi, 0.0))
    # partial fractions of u / prod(u - p_j) need distinct poles
    gaps = [abs(roots[i] - roots[j]) for i in range(3) for j in range(i + 1, 3)]
    scale = max(abs(r) for r in roots) + 1e-300
    if min(gaps) < 1e-7 * scale:
        val, _ = integrate.quad(
            lambda w: w * w / (((w2 - w * w) ** 2 + (g * w) ** 2) * (w * w + xi * xi)),
            W,
            np.inf,
            epsabs=0.0,
            epsrel=1e-11,
            limit=200,
        )
        return o.strength * w2 * g * val
    acc = 0j
    for j, p in enumerate(roots):
        if p == 0:
            continue  # the u/(u - p) numerator vanishes there
        denom = 1.0 + 0j
        for i, q in enumerate(roots):
            if i != j:
                denom *= p - q
        s = np.sqrt(-p)  # principal root, Re(s) >= 0
        if W == 0:
            piece = 0.5 * math.pi / s
        else:
            piece = np.arctan(s / W) / s
        acc += p / denom * piece
    return o.strength * w2 * g * acc.real


@dataclass(frozen=True, eq=False)
class OpticalSpectrum:
    frequencies: np.ndarray  # eV, ascending
    im_eps: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        y = np.asarray(self.im_eps, dtype=float)
        if w.ndim != 1 or w.shape != y.shape or w.size < 2:
            raise ConfigError("spectrum needs two equally long 1-D arrays with at least 2 samples")
        if not np.all(np.diff(w) > 0) or w[0] <= 0:
            raise ConfigError("spectrum frequencies must be positive and strictly ascending")
        if np.any(y < 0) or not np.all(np.isfinite(y)):
            raise ConfigError("Im eps must be finite and non-negative")
        w.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "im_eps", y)

    @property
    def band(self) -> tuple[float, float]:
        return float(self.frequencies[0]), float(self.frequencies[-1])


def _band_integral(w: np.ndarray, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Exact integral of omega*y(omega)/(omega^2 + xi^2) for piecewise-linear y."""
    w1, w2 = w[:-1], w[1:]
    slope = np.diff(y) / np.diff(w)
    icpt = y[:-1] - slope * w1
    x = xi[:, None]
    x2 = x * x
    log_part = np.log1p((w2 * w2 - w1 * w1) / (w1 * w1 + x2))
    with np.errstate(divide="ignore", invalid="ignore"):
        dat = np.where(x > 0, np.arctan(x * (w2 - w1) / (x2 + w1 * w2)), 0.0)
    lin_part = (w2 - w1) - x * dat
    seg = 0.5 * icpt * log_part + slope * lin_part
    out = seg.sum(axis=1)
    if not np.all(np.isfinite(out)):
        bad_row = int(np.argmax(~np.isfinite(out)))
        bad = int(np.argmax(~np.isfinite(seg[bad_row])))
        raise NumericalError(
            f"non-finite Kramers-Kronig integral on [{w1[bad]}, {w2[bad]}] eV at xi={xi[bad_row]} eV"
        )
    return out


def _band_integral_adaptive(w, y, xi, rel_tol=1e-8):
    out = np.empty_like(xi)
    chunk = 40
    for n, x in enumerate(xi):
        total = 0.0
        for start in range(0, w.size - 1, chunk):
            stop = min(start + chunk, w.size - 1)
            lo, hi = w[start], w[stop]

            def f(om, x=x):
                return om * np.interp(om, w, y) / (om * om + x * x)

            val, _ = integrate.quad(
                f, lo, hi, points=w[start + 1:stop], epsabs=0.0, epsrel=rel_tol, limit=4 * chunk + 50
            )
            if not math.isfinite(val):
                raise NumericalError(f"non-finite Kramers-Kronig integral on [{lo}, {hi}] eV at xi={x} eV")
            total += val
        out[n] = total
    return out


@dataclass(frozen=True)
class StaticLimit:
    """Leading behaviour of eps(i xi) as xi -> 0.

    order 0: eps -> weight (dielectric); order 1: eps ~ weight/xi (Drude-like);
    order 2: eps ~ weight/xi^2 (plasma-like, weight = wp^2 and the evanescent
    wave number picks up wp/(hbar c)); order inf: ideal reflector.
    """

    order: float
    weight: float
    plasma_ev: float = 0.0


class _Model:
    def eps(self, xi):
        raise NotImplementedError

    def static(self) -> StaticLimit:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Drude(_Model):
    params: DrudeParams
    name: str = "drude"

    def eps(self, xi):
        return self.params.eps(xi)

    def static(self):
        p = self.params
        return StaticLimit(1, p.omega_p**2 / p.gamma)


@dataclass(frozen=True, eq=False)
class GeneralizedPlasma(_Model):
    omega_p: float
    oscillators: OscillatorSet = field(default_factory=OscillatorSet)
    name: str = "generalized_plasma"

    def __post_init__(self):
        if not self.omega_p > 0:
            raise ConfigError("plasma frequency must be positive")

    def eps(self, xi):
        xi = np.asarray(xi, dtype=float)
        return 1.0 + self.omega_p**2 / xi**2 + self.oscillators.eps(xi)

    def static(self):
        return StaticLimit(2, self.omega_p**2, plasma_ev=self.omega_p)


@dataclass(frozen=True, eq=False)
class TabulatedKK(_Model):
    spectrum: OpticalSpectrum
    low_extrapolation: DrudeParams
    high_extrapolation: OscillatorSet = field(default_factory=OscillatorSet)
    carriers_included: bool = True
    high_envelopes: tuple[OscillatorSet, OscillatorSet] | None = None
    subtract_band_carriers: bool = False
    method: str = "exact"
    name: str = "tabulated_kk"

    def __post_init__(self):
        if self.method not in ("exact", "adaptive"):
            raise ConfigError(f"unknown Kramers-Kronig method {self.method!r}")
        if self.high_envelopes is not None:
            lower, upper = self.high_envelopes
            _check_envelopes(lower, upper, self.spectrum.band[1])

    def _band_values(self):
        y = self.spectrum.im_eps
        if self.subtract_band_carriers and not self.carriers_included:
            y = np.clip(y - self.low_extrapolation.im_eps(self.spectrum.frequencies), 0.0, None)
        return y

    def eps(self, xi):
        xi = np.asarray(xi, dtype=float)
        flat = np.atleast_1d(xi).ravel()
        if np.any(flat <= 0):
            raise DomainError("Kramers-Kronig evaluation requires xi > 0; use static() for xi = 0")
        return self._kk(flat).reshape(xi.shape)

    def _kk(self, flat):
        lo, hi = self.spectrum.band
        y = self._band_values()
        if self.method == "exact":
            total = _band_integral(self.spectrum.frequencies, y, flat)
        else:
            total = _band_integral_adaptive(self.spectrum.frequencies, y, flat)
        if self.carriers_included:
            total = total + self.low_extrapolation.tail_integral(lo, flat)
        total = total + self.high_extrapolation.tail_integral(hi, flat)
        return 1.0 + _TWO_OVER_PI * total

    def static(self):
        if self.carriers_included:
            p = self.low_extrapolation
            return StaticLimit(1, p.omega_p**2 / p.gamma)
        w = self.spectrum.frequencies
        y = self._band_values()
        slope = np.diff(y) / np.diff(w)
        icpt = y[:-1] - slope * w[:-1]
        band = float(np.sum(icpt * np.log(w[1:] / w[:-1]) + slope * np.diff(w)))
        tail = float(self.high_extrapolation.tail_integral(w[-1], np.array([0.0]))[0])
        return StaticLimit(0, 1.0 + _TWO_OVER_PI * (band + tail))

    def with_high_extrapolation(self, oscillators: OscillatorSet) -> "TabulatedKK":
        return replace(self, high_extrapolation=oscillators, high_envelopes=None)


def _check_envelopes(lower: OscillatorSet, upper: OscillatorSet, start: float):
    omega = np.geomspace(start, start * 1e3, 2000)
    lo, up = lower.im_eps(omega), upper.im_eps(omega)
    excess = lo - up
    if np.any(excess > 1e-12 * np.maximum(np.abs(up), 1e-300)):
        where = omega[np.argmax(excess)]
        raise ConfigError(f"high-frequency envelopes cross (lower exceeds upper near {where:.4g} eV)")


@dataclass(frozen=True, eq=False)
class DielectricTable(_Model):
    xi: np.ndarray  # eV, ascending, >= 0
    values: np.ndarray
    name: str = "dielectric_table"

    def __post_init__(self):
        x = np.asarray(self.xi, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ConfigError("dielectric table needs two equally long 1-D arrays")
        if x[0] < 0 or not np.all(np.diff(x) > 0):
            raise ConfigError("dielectric table xi must be non-negative and strictly ascending")
        if np.any(v < 1) or np.any(np.diff(v) > 0):
            raise ConfigError("dielectric table values must be >= 1 and nonincreasing")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "xi", x)
        object.__setattr__(self, "values", v)

    def eps(self, xi):
        xi = np.asarray(xi, dtype=float)
        pos = self.xi > 0
        lx, lv = np.log(self.xi[pos]), self.values[pos]
        with np.errstate(divide="ignore"):
            out = np.interp(np.log(xi), lx, lv)
        if self.xi[0] == 0:
            # linear in xi between the static value and the first positive node
            x1 = self.xi[pos][0]
            below = xi < x1
            out = np.where(below, self.values[0] + (lv[0] - self.values[0]) * xi / x1, out)
        return out

    def static(self):
        return StaticLimit(0, float(self.values[0]))


@dataclass(frozen=True, eq=False)
class IdealMetal(_Model):
    name: str = "ideal_metal"

    def eps(self, xi):
        return np.full(np.shape(xi), np.inf)

    def static(self):
        return StaticLimit(math.inf, math.inf)


MaterialModel = Union[Drude, GeneralizedPlasma, TabulatedKK, DielectricTable, IdealMetal]


def eps_imaginary(model: MaterialModel, xi):
    """Permittivity at imaginary frequency `xi` (eV).

    At xi = 0 only dielectric and ideal-metal models have a value; the
    diverging conductor models raise :class:`DomainError` and must go through
    the zero-frequency handling in the Lifshitz module.
    """
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(xi_arr < 0):
        raise DomainError("xi must be non-negative")
    zero = xi_arr == 0
    if np.any(zero):
        st = model.static()
        if st.order == 0:
            val = st.weight
        elif st.order == math.inf:
            val = math.inf
        else:
            raise DomainError(f"{model.name}: eps(i xi) diverges at xi = 0")
        out = np.full(xi_arr.shape, val)
        if np.any(~zero):
            out[~zero] = model.eps(xi_arr[~zero])
        return out if out.ndim else float(out)
    out = model.eps(xi_arr)
    return out if np.ndim(out) else float(out)


def kk_transform(model: TabulatedKK, xi):
    """1 + (2/pi) * int_0^inf omega Im eps(omega) / (omega^2 + xi^2) d omega, xi > 0."""
    if not isinstance(model, TabulatedKK):
        raise ConfigError("kk_transform needs a TabulatedKK model")
    out = model.eps(xi)
    return out if np.ndim(out) else float(out)


def envelope_models(model: TabulatedKK) -> tuple[TabulatedKK, TabulatedKK]:
    if not isinstance(model, TabulatedKK) or model.high_envelopes is None:
        raise ConfigError("extrapolation band needs a TabulatedKK model with lower/upper envelopes")
    lower, upper = model.high_envelopes
    return model.with_high_extrapolation(lower), model.with_high_extrapolation(upper)


def extrapolation_band(model: TabulatedKK, xi):
    """(lower, upper) eps(i xi) from the two high-frequency envelopes."""
    lo_model, up_model = envelope_models(model)
    lo, up = kk_transform(lo_model, xi), kk_transform(up_model, xi)
    return lo, up


def matsubara_frequencies(T: float, l_max: int) -> np.ndarray:
    """xi_l = 2 pi k_B T l (as photon energies, eV) for l = 0..l_max."""
    if not T > 0:
        raise DomainError("temperature must be positive")
    if l_max < 0:
        raise DomainError("l_max must be >= 0")
    return 2.0 * math.pi * CONSTANTS.k_B * T * np.arange(l_max + 1, dtype=float)


# --------------------------------------------------------------------------
# file formats


def load_spectrum(path) -> OpticalSpectrum:
    w, y = _read_two_columns(path, ("omega_ev", "im_eps"))
    return OpticalSpectrum(w, y)


def load_dielectric_table(path) -> DielectricTable:
    x, v = _read_two_columns(path, ("xi_ev", "eps"))
    return DielectricTable(x, v, name=Path(path).stem)


def _read_two_columns(path, header):
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows or [h.strip() for h in rows[0]] != list(header):
        raise ConfigError(f"{path}: expected header {','.join(header)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigError(f"{path}: expected two numeric columns")
    return data[:, 0], data[:, 1]


def _oscillators(rows) -> OscillatorSet:
    return OscillatorSet(
        tuple(Oscillator(float(r["strength"]), float(r["resonance_ev"]), float(r["width_ev"])) for r in rows)
    )


def _drude(d) -> DrudeParams:
    return DrudeParams(float(d["omega_p_ev"]), float(d["gamma_ev"]))


def material_from_dict(d: dict, base_dir=".") -> MaterialModel:
    """Build a model from its JSON description; relative paths resolve against `base_dir`."""
    base = Path(base_dir)
    try:
        kind = d["type"]
        name = d.get("name", kind)
        if kind == "drude":
            return Drude(_drude(d), name=name)
        if kind == "generalized_plasma":
            return GeneralizedPlasma(float(d["omega_p_ev"]), _oscillators(d.get("oscillators", [])), name=name)
        if kind == "tabulated_kk":
            env = d.get("high_envelopes")
            envelopes = None
            if env is not None:
                envelopes = (_oscillators(env["lower"]), _oscillators(env["upper"]))
            return TabulatedKK(
                spectrum=load_spectrum(base / d["spectrum"]),
                low_extrapolation=_drude(d["low_extrapolation"]),
                high_extrapolation=_oscillators(d.get("high_extrapolation", [])),
                carriers_included=bool(d.get("carriers_included", True)),
                high_envelopes=envelopes,
                subtract_band_carriers=bool(d.get("subtract_band_carriers", False)),
                name=name,
            )
        if kind == "dielectric_table":
            table = load_dielectric_table(base / d["table"])
            return replace(table, name=name)
        if kind == "ideal_metal":
            return IdealMetal(name=name)
    except KeyError as exc:
        raise ConfigError(f"material definition missing field {exc}") from exc
    raise ConfigError(f"unknown material type {d.get('type')!r}")


def load_material(path) -> MaterialModel:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read material file {path}: {exc}") from exc
    return material_from_dict(d, base_dir=path.parent)
