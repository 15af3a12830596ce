"""Finite-temperature Lifshitz free energy between layered planar bodies and the
sphere-plate force in the proximity force approximation.

    E(a) = k_B T / (2 pi) sum'_l int_0^inf k dk sum_pol ln(1 - r1 r2 exp(-2 a q0))

with q0 = sqrt(k^2 + xi_l^2/c^2). The k integral is carried out in
y = 2 a q0, which turns the measure into y dy / (4 a^2) and leaves a
decaying exponential in the integrand.
"""

from __future__ import annotations

import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .constants import CONSTANTS, HBAR_C_EV_M
from .curves import ForceCurve
from .errors import ConfigError, ConvergenceError, DomainError
from .materials import (
    IdealMetal,
    MaterialModel,
    StaticLimit,
    TabulatedKK,
    envelope_models,
    eps_imaginary,
    matsubara_frequencies,
)

TM, TE = "TM", "TE"
POLARIZATIONS = (TM, TE)


class PFAValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Layer:
    thickness: float  # m
    material: MaterialModel

    def __post_init__(self):
        if not (math.isfinite(self.thickness) and self.thickness > 0):
            raise ConfigError(f"layer thickness must be finite and positive, got {self.thickness}")


@dataclass(frozen=True)
class LayerStack:
    """Films ordered from the vacuum gap inward, on a semi-infinite substrate."""

    layers: tuple[Layer, ...]
    substrate: MaterialModel

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @classmethod
    def half_space(cls, material: MaterialModel) -> "LayerStack":
        return cls((), material)

    @property
    def media(self) -> list[MaterialModel]:
        return [layer.material for layer in self.layers] + [self.substrate]

    @property
    def thicknesses(self) -> list[float]:
        return [layer.thickness for layer in self.layers]


@dataclass(frozen=True)
class LifshitzSettings:
    temperature: float = 275.15
    matsubara_rel_tol: float = 1e-7
    quadrature_rel_tol: float = 1e-9
    l_max_cap: int = 20000

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive")
        for name in ("matsubara_rel_tol", "quadrature_rel_tol"):
            tol = getattr(self, name)
            if not 0 < tol <= 1e-2:
                raise ConfigError(f"{name} must lie in (0, 1e-2], got {tol}")
        if self.l_max_cap < 1:
            raise ConfigError("l_max_cap must be >= 1")


@dataclass(frozen=True)
class SphereGeometry:
    radius: float  # m

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError("sphere radius must be positive")


StackLike = Union[LayerStack, MaterialModel]


def as_stack(obj: StackLike) -> LayerStack:
    return obj if isinstance(obj, LayerStack) else LayerStack.half_space(obj)


# --------------------------------------------------------------------------
# reflection coefficients


def _q(q0, eps, xc2):
    # sqrt(q0^2 + (eps - 1) xi^2/c^2) avoids cancellation in k^2 = q0^2 - xi^2/c^2
    return np.sqrt(q0 * q0 + (eps - 1.0) * xc2)


def _interface(pol, eps_a, eps_b, q_a, q_b):
    if pol == TM:
        return (eps_b * q_a - eps_a * q_b) / (eps_b * q_a + eps_a * q_b)
    return (q_a - q_b) / (q_a + q_b)


def _ideal_r(pol):
    return 1.0 if pol == TM else -1.0


def _truncate_at_ideal(media, thicknesses):
    for i, m in enumerate(media):
        if isinstance(m, IdealMetal):
            return media[: i + 1], thicknesses[:i]
    return media, thicknesses


def _combine(r_top, r_below, q_film, d):
    ph = r_below * np.exp(-2.0 * q_film * d)
    return (r_top + ph) / (1.0 + r_top * ph)


def _reflection_dynamic(media, thicknesses, eps_values, q0, xc2):
    """(r_TM, r_TE) for xi > 0.

    eps_values[i] is eps of media[i] broadcastable against q0; q0 in 1/m.
    """
    media, thicknesses = _truncate_at_ideal(media, thicknesses)
    eps = [1.0] + list(eps_values[: len(media)])
    ideal_last = isinstance(media[-1], IdealMetal)
    qs = [q0] + [None if ideal_last and i == len(media) - 1 else _q(q0, e, xc2) for i, e in enumerate(eps[1:])]
    out = []
    for pol in POLARIZATIONS:
        n = len(media)
        if ideal_last:
            r = np.broadcast_to(_ideal_r(pol), np.shape(q0))
        else:
            r = _interface(pol, eps[n - 1], eps[n], qs[n - 1], qs[n])
        for j in range(n - 1, 0, -1):
            # film j (media index j-1) lies between eps[j-1] (above) and eps[j]
            r_top = _interface(pol, eps[j - 1], eps[j], qs[j - 1], qs[j])
            r = _combine(r_top, r, qs[j], thicknesses[j - 1])
        out.append(r)
    return out[0], out[1]


def _static_interface(pol, sa: StaticLimit, sb: StaticLimit, qa, qb):
    if pol == TE:
        if sb.order == math.inf:
            return np.full(np.shape(qa), -1.0)
        if sa.order == math.inf:
            return np.full(np.shape(qa), 1.0)
        return (qa - qb) / (qa + qb)
    if sa.order == sb.order:
        if sa.order == math.inf:
            return np.zeros(np.shape(qa))
        return (sb.weight * qa - sa.weight * qb) / (sb.weight * qa + sa.weight * qb)
    return np.full(np.shape(qa), 1.0 if sb.order > sa.order else -1.0)


def _static_q(k, s: StaticLimit):
    if s.order == 2:
        kp = s.plasma_ev / HBAR_C_EV_M
        return np.sqrt(k * k + kp * kp)
    return k


_VACUUM_STATIC = StaticLimit(0, 1.0)


def _reflection_static(media, thicknesses, k):
    """(r_TM, r_TE) in the xi -> 0 limit at in-plane wave number k > 0."""
    media, thicknesses = _truncate_at_ideal(media, thicknesses)
    st = [_VACUUM_STATIC] + [m.static() for m in media]
    qs = [k] + [None if s.order == math.inf else _static_q(k, s) for s in st[1:]]
    out = []
    for pol in POLARIZATIONS:
        n = len(media)
        r = _static_interface(pol, st[n - 1], st[n], qs[n - 1], qs[n] if qs[n] is not None else k)
        for j in range(n - 1, 0, -1):
            r_top = _static_interface(pol, st[j - 1], st[j], qs[j - 1], qs[j])
            r = _combine(r_top, r, qs[j], thicknesses[j - 1])
        out.append(r)
    return out[0], out[1]


def fresnel_interface(polarization, eps_a, eps_b, k_perp, xi):
    """Single-interface Fresnel coefficient at imaginary frequency xi (eV).

    eps_a is the medium the wave comes from; ``math.inf`` marks an ideal metal.
    """
    if polarization not in POLARIZATIONS:
        raise ConfigError(f"unknown polarization {polarization!r}")
    k = np.asarray(k_perp, dtype=float)
    if xi < 0 or np.any(k < 0) or (xi == 0 and np.any(k == 0)):
        raise DomainError("need xi >= 0, k_perp >= 0 and not both zero")
    if math.isinf(eps_b) and math.isinf(eps_a):
        return np.zeros_like(k) if k.ndim else 0.0
    if math.isinf(eps_b):
        r = np.full(k.shape, _ideal_r(polarization))
    elif math.isinf(eps_a):
        r = np.full(k.shape, -_ideal_r(polarization))
    else:
        xc2 = (xi / HBAR_C_EV_M) ** 2
        qa = np.sqrt(k * k + eps_a * xc2)
        qb = np.sqrt(k * k + eps_b * xc2)
        r = _interface(polarization, eps_a, eps_b, qa, qb)
    return r if r.ndim else float(r)


def stack_reflection(stack: StackLike, polarization, k_perp, xi):
    """Reflection coefficient of a layered plate seen from the vacuum gap."""
    stack = as_stack(stack)
    if polarization not in POLARIZATIONS:
        raise ConfigError(f"unknown polarization {polarization!r}")
    k = np.asarray(k_perp, dtype=float)
    if xi < 0 or np.any(k < 0) or (xi == 0 and np.any(k == 0)):
        raise DomainError("need xi >= 0, k_perp >= 0 and not both zero")
    if xi == 0:
        r_tm, r_te = _reflection_static(stack.media, stack.thicknesses, k)
    else:
        xc = xi / HBAR_C_EV_M
        q0 = np.sqrt(k * k + xc * xc)
        eps = [m.eps(np.array(xi)) if not isinstance(m, IdealMetal) else math.inf for m in stack.media]
        r_tm, r_te = _reflection_dynamic(stack.media, stack.thicknesses, eps, q0, xc * xc)
    r = r_tm if polarization == TM else r_te
    r = np.asarray(r, dtype=float)
    return r if r.ndim else float(r)


# --------------------------------------------------------------------------
# permittivity cache along the Matsubara ladder

_BLOCK = 64


class MatsubaraCache:
    """eps(i xi_l) per material, filled in fixed blocks of l so values never
    depend on request order or thread scheduling."""

    def __init__(self, temperature: float):
        self.temperature = temperature
        self._step = 2.0 * math.pi * CONSTANTS.k_B * temperature
        self._data: dict[int, tuple[MaterialModel, list[np.ndarray]]] = {}
        self._lock = threading.Lock()

    def xi(self, ls: np.ndarray) -> np.ndarray:
        return self._step * ls

    def eps(self, material: MaterialModel, l_lo: int, l_hi: int) -> np.ndarray:
        """eps for l in [l_lo, l_hi), l_lo >= 1."""
        if isinstance(material, IdealMetal):
            return np.full(l_hi - l_lo, np.inf)
        with self._lock:
            entry = self._data.setdefault(id(material), (material, []))
            blocks = entry[1]
            need = (l_hi - 1) // _BLOCK + 1
            while len(blocks) < need:
                b = len(blocks)
                ls = np.arange(b * _BLOCK, (b + 1) * _BLOCK, dtype=float)
                ls[0] = max(ls[0], 1.0)  # l = 0 is handled by the static limit
                blocks.append(np.asarray(material.eps(self._step * ls), dtype=float))
            first = l_lo // _BLOCK
            flat = np.concatenate(blocks[first:need])
        return flat[l_lo - first * _BLOCK : l_hi - first * _BLOCK]


# --------------------------------------------------------------------------
# k-integration rules

_NEAR_PANELS = np.array([0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.6, 1.5, 3, 5.5, 9, 14, 21, 30, 42, 60])
_FAR_PANELS = np.array([0.0, 1, 3, 6, 10, 16, 24, 35, 50, 70])
_ORDERS = (4, 6, 8, 12, 16, 24, 32)
_NEAR_ZETA = 1.0


@lru_cache(maxsize=None)
def _panel_rule(kind: str, order: int):
    bounds = _NEAR_PANELS if kind == "near" else _FAR_PANELS
    x, w = leggauss(order)
    lo, hi = bounds[:-1, None], bounds[1:, None]
    t = (lo + 0.5 * (hi - lo) * (x + 1)).ravel()
    wt = (0.5 * (hi - lo) * w).ravel()
    t.setflags(write=False)
    wt.setflags(write=False)
    return t, wt


class _Integrand:
    """Per-term integrals I_l = int_{zeta_l}^inf y sum_pol ln(1 - r1 r2 e^-y) dy."""

    def __init__(self, a, stack_1, stack_2, cache: MatsubaraCache):
        self.a = a
        self.s1, self.s2 = stack_1, stack_2
        self.cache = cache
        self.zeta_step = 2.0 * a * cache._step / HBAR_C_EV_M

    def static(self, t, w):
        y = t
        k = y / (2.0 * self.a)
        r1 = _reflection_static(self.s1.media, self.s1.thicknesses, k)
        r2 = _reflection_static(self.s2.media, self.s2.thicknesses, k)
        ey = np.exp(-y)
        val = y * (np.log1p(-r1[0] * r2[0] * ey) + np.log1p(-r1[1] * r2[1] * ey))
        return float(val @ w)

    def dynamic(self, l_lo, l_hi, t, w):
        ls = np.arange(l_lo, l_hi, dtype=float)
        zeta = self.zeta_step * ls
        xc = self.cache.xi(ls) / HBAR_C_EV_M
        xc2 = (xc * xc)[:, None]
        eps = [[self.cache.eps(m, l_lo, l_hi)[:, None] for m in s.media] for s in (self.s1, self.s2)]
        return self._integrate(zeta, xc2, eps, t, w)

    def continuum(self, zeta, t, w):
        """I(zeta) off the Matsubara ladder, with eps evaluated directly."""
        xc = zeta / (2.0 * self.a)
        xi = xc * HBAR_C_EV_M
        eps = [
            [(np.full(len(zeta), np.inf) if isinstance(m, IdealMetal) else np.asarray(m.eps(xi), dtype=float))[:, None] for m in s.media]
            for s in (self.s1, self.s2)
        ]
        return self._integrate(zeta, (xc * xc)[:, None], eps, t, w)

    def _integrate(self, zeta, xc2, eps, t, w):
        y = zeta[:, None] + t[None, :]
        q0 = y / (2.0 * self.a)
        r = [_reflection_dynamic(s.media, s.thicknesses, e, q0, xc2) for s, e in zip((self.s1, self.s2), eps)]
        # in place, same operation order as y * (log1p(-r r e^-y) + log1p(-r r e^-y))
        ey = np.negative(y)
        np.exp(ey, out=ey)
        val = np.multiply(r[0][0], r[1][0])
        te = np.multiply(r[0][1], r[1][1])
        for p in (val, te):
            p *= ey
            np.negative(p, out=p)
            np.log1p(p, out=p)
        val += te
        val *= y
        return val @ w


def _close(a, b, tol):
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def _choose_orders(f: _Integrand, tol: float, l_cap: int):
    """Pick GL orders for the near (zeta < 1) and far panel sets from probe terms."""
    zs = f.zeta_step
    l_near_end = min(int(math.ceil(_NEAR_ZETA / zs)), l_cap + 1)
    near_probes = sorted({1, max(1, l_near_end // 2), max(1, l_near_end - 1)}) if l_near_end > 1 else []
    far_probes = sorted({max(l_near_end, int(math.ceil(z / zs))) for z in (1.0, 5.0, 15.0)})
    far_probes = [l for l in far_probes if l <= l_cap]

    def settle(evaluate, kind):
        prev = None
        for order in _ORDERS:
            t, w = _panel_rule(kind, order)
            vals = evaluate(t, w)
            if prev is not None and all(_close(p, v, tol) for p, v in zip(prev, vals)):
                return order
            prev = vals
        raise ConvergenceError(f"k-integration did not reach rel. tol {tol} with order {_ORDERS[-1]} ({kind} panels)")

    def near_eval(t, w):
        vals = [f.static(t, w)]
        vals += [float(f.dynamic(l, l + 1, t, w)[0]) for l in near_probes]
        return vals

    def far_eval(t, w):
        return [float(f.dynamic(l, l + 1, t, w)[0]) for l in far_probes]

    near_order = settle(near_eval, "near")
    far_order = settle(far_eval, "far") if far_probes else _ORDERS[0]
    return l_near_end, near_order, far_order


_SUM_BLOCK = 256
# Below this Matsubara spacing (eV) the summand is smooth in l and the terms
# from _EM_START on are replaced by a midpoint Euler-Maclaurin integral.
_EM_XI_STEP = 0.01
_EM_START = 2048
_EM_PANELS = np.array([0, 0.25, 0.5, 1, 2, 3.5, 5.5, 8, 11, 15, 20, 26, 33, 42, 55, 70])


def _em_tail(f: _Integrand, g_last: float, g_prev: float, t, w, tol: float, scale: float) -> float:
    """Sum of the terms l >= _EM_START from the integral over l in [L - 1/2, inf)."""
    zs = f.zeta_step
    lo = (_EM_START - 0.5) * zs
    prev = None
    for order in _ORDERS:
        x, wx = leggauss(order)
        a_, b_ = lo + _EM_PANELS[:-1, None], lo + _EM_PANELS[1:, None]
        zeta = (a_ + 0.5 * (b_ - a_) * (x + 1)).ravel()
        wz = (0.5 * (b_ - a_) * wx).ravel()
        val = float(f.continuum(zeta, t, w) @ wz) / zs
        if prev is not None and abs(val - prev) <= tol * max(abs(scale), 1e-300):
            # midpoint rule correction g'(L - 1/2) / 24 from the last two explicit terms
            return val + (g_last - g_prev) / 24.0
        prev = val
    raise ConvergenceError(f"Matsubara tail integral did not reach rel. tol {tol} with order {_ORDERS[-1]}")


def _matsubara_sum(f: _Integrand, settings: LifshitzSettings) -> float:
    tol = settings.matsubara_rel_tol
    cap = settings.l_max_cap
    l_near_end, near_order, far_order = _choose_orders(f, settings.quadrature_rel_tol, cap)
    t_near, w_near = _panel_rule("near", near_order)
    t_far, w_far = _panel_rule("far", far_order)

    partial = 0.5 * f.static(t_near, w_near)
    l = 1
    last_ratio = math.inf
    prev_term = math.nan
    em = f.cache._step <= _EM_XI_STEP and cap >= _EM_START
    while l <= cap:
        hi = min(l + _SUM_BLOCK, cap + 1)
        if em:
            hi = min(hi, _EM_START)
        if l < l_near_end:
            hi = min(hi, l_near_end)
            terms = f.dynamic(l, hi, t_near, w_near)
        else:
            terms = f.dynamic(l, hi, t_far, w_far)
        sums = partial + np.cumsum(terms)
        # geometric estimate of everything after the current term
        before = np.concatenate([[prev_term], terms[:-1]])
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = terms / before
        tail = np.where((rho > 0) & (rho < 1), np.abs(terms) * rho / (1.0 - rho), np.inf)
        tail[terms == 0] = 0.0
        bound = tol * np.abs(sums)
        done = (np.abs(terms) <= bound) & (tail <= bound)
        if np.any(done):
            return float(sums[int(np.argmax(done))])
        partial = float(sums[-1])
        g_prev = float(terms[-2]) if len(terms) > 1 else prev_term
        prev_term = float(terms[-1])
        last_ratio = abs(prev_term) / max(abs(partial), 1e-300)
        l = hi
        if em and l == _EM_START:
            t, w = (t_near, w_near) if _EM_START - 1 < l_near_end else (t_far, w_far)
            return partial + _em_tail(f, prev_term, g_prev, t, w, 0.1 * tol, partial)
    raise ConvergenceError(
        f"Matsubara sum not converged within l_max_cap={cap} (last term/partial sum = {last_ratio:.3g})",
        bound=last_ratio,
    )


def free_energy_per_area(
    a: float,
    stack_1: StackLike,
    stack_2: StackLike,
    settings: LifshitzSettings = LifshitzSettings(),
    cache: MatsubaraCache | None = None,
) -> float:
    """Lifshitz free energy per unit area (J/m^2) at separation `a` (m)."""
    if not a > 0:
        raise DomainError("separation must be positive")
    if cache is None or cache.temperature != settings.temperature:
        cache = MatsubaraCache(settings.temperature)
    f = _Integrand(a, as_stack(stack_1), as_stack(stack_2), cache)
    total = _matsubara_sum(f, settings)
    kT = CONSTANTS.k_B_si * settings.temperature
    return kT / (2.0 * math.pi) * total / (4.0 * a * a)


def pfa_sphere_plate_force(
    a: float,
    sphere: SphereGeometry,
    sphere_material: StackLike,
    plate: StackLike,
    settings: LifshitzSettings = LifshitzSettings(),
    cache: MatsubaraCache | None = None,
) -> float:
    """F(a) = 2 pi R E(a) in newtons; attraction is negative."""
    if a / sphere.radius > 0.01:
        warnings.warn(
            f"a/R = {a / sphere.radius:.3g} > 0.01: proximity force approximation degraded",
            PFAValidityWarning,
            stacklevel=2,
        )
    return 2.0 * math.pi * sphere.radius * free_energy_per_area(a, sphere_material, plate, settings, cache)


# --------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class ParameterSpread:
    """Optional experimental-parameter widening of the theory band."""

    radius_sigma: float = 0.0  # m
    thickness_sigma: float = 0.0  # m, applied to every film


def _envelope_variant(stack: LayerStack, which: int, seen: list) -> LayerStack:
    def swap(m):
        if isinstance(m, TabulatedKK) and m.high_envelopes is not None:
            seen.append(m)
            return envelope_models(m)[which]
        return m

    layers = tuple(Layer(layer.thickness, swap(layer.material)) for layer in stack.layers)
    return LayerStack(layers, swap(stack.substrate))


def _shift_thickness(stack: LayerStack, delta: float) -> LayerStack:
    return LayerStack(tuple(Layer(l.thickness + delta, l.material) for l in stack.layers), stack.substrate)


def _curve_values(a_m, sphere, s1, s2, settings, threads):
    cache = MatsubaraCache(settings.temperature)
    failures = []

    def one(i):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PFAValidityWarning)
                return pfa_sphere_plate_force(a_m[i], sphere, s1, s2, settings, cache)
        except ConvergenceError as exc:
            failures.append((i, exc))
            return math.nan

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, range(len(a_m))))
    else:
        vals = [one(i) for i in range(len(a_m))]
    if failures:
        idx = sorted(i for i, _ in failures)
        raise ConvergenceError(
            f"{len(idx)} grid point(s) failed to converge (indices {idx[:10]}): {failures[0][1]}",
            bound=failures[0][1].bound,
            indices=idx,
        )
    return np.array(vals)


def force_curve(
    a_grid,
    sphere: SphereGeometry,
    sphere_material: StackLike,
    plate: StackLike,
    settings: LifshitzSettings = LifshitzSettings(),
    threads: int = 1,
    band: bool = False,
    spread: ParameterSpread | None = None,
) -> ForceCurve:
    """PFA force on a separation grid (m). Returns a ForceCurve in nm / pN.

    With ``band=True`` every TabulatedKK material carrying two high-frequency
    envelopes is evaluated with each envelope and the pointwise extremes are
    reported as ``force_lo``/``force_hi``; the central column uses the
    model's own extrapolation. ``spread`` additionally folds in radius and
    film-thickness uncertainties.
    """
    a_m = np.asarray(a_grid, dtype=float).ravel()
    if a_m.size == 0 or np.any(a_m <= 0) or np.any(np.diff(a_m) <= 0):
        raise DomainError("separation grid must be positive and strictly ascending")
    if a_m[-1] / sphere.radius > 0.01:
        warnings.warn("grid extends beyond a/R = 0.01", PFAValidityWarning, stacklevel=2)
    s1, s2 = as_stack(sphere_material), as_stack(plate)
    force = _curve_values(a_m, sphere, s1, s2, settings, threads)
    lo = hi = None
    if band or spread is not None:
        variants = []
        if band:
            seen: list = []
            for which in (0, 1):
                variants.append((_envelope_variant(s1, which, seen), _envelope_variant(s2, which, seen)))
            if not seen:
                raise ConfigError("band mode needs at least one material with high-frequency envelopes")
        else:
            variants.append((s1, s2))
        if spread is not None and spread.thickness_sigma > 0:
            variants = [
                (v1, _shift_thickness(v2, d)) for v1, v2 in variants for d in (-spread.thickness_sigma, 0.0, spread.thickness_sigma)
            ]
        curves = [_curve_values(a_m, sphere, v1, v2, settings, threads) for v1, v2 in variants]
        if spread is not None and spread.radius_sigma > 0:
            scale = spread.radius_sigma / sphere.radius
            curves = [c * f for c in curves for f in (1 - scale, 1 + scale)]
        stacked = np.vstack(curves)
        lo, hi = stacked.min(axis=0), stacked.max(axis=0)
    return ForceCurve(
        a_nm=a_m * 1e9,
        force_pn=force * 1e12,
        force_lo_pn=None if lo is None else lo * 1e12,
        force_hi_pn=None if hi is None else hi * 1e12,
    )


def ideal_metal_pfa_force(a, R):
    """Closed form -pi^3 hbar c R / (360 a^3) in newtons (T = 0)."""
    a = np.asarray(a, dtype=float)
    return -(math.pi**3) * CONSTANTS.hbar * CONSTANTS.c * R / (360.0 * a**3)


def ideal_metal_energy(a):
    """Closed form -pi^2 hbar c / (720 a^3) in J/m^2 (T = 0)."""
    a = np.asarray(a, dtype=float)
    return -(math.pi**2) * CONSTANTS.hbar * CONSTANTS.c / (720.0 * a**3)
