"""Exact electrostatic force between a sphere and a plane at potential difference dV.

    F = 2 pi eps0 dV^2 sum_{n>=1} (coth a - n coth n a) / sinh n a,   cosh a = 1 + sep/R

Attractive forces are negative.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import CONSTANTS
from .errors import ConvergenceError, DomainError

SERIES_REL_TOL = 1e-12
MAX_TERMS = 1_000_000
_ASYMPTOTIC_NALPHA = 30.0
_CHUNK = 4096


def alpha_of(a: float, R: float) -> float:
    """arccosh(1 + a/R) in the log form that keeps precision for a << R."""
    x = a / R
    return math.log1p(x + math.sqrt(x * (2.0 + x)))


def _coth_minus_inv(x):
    """coth(x) - 1/x, stable for small x."""
    x = np.asarray(x, dtype=float)
    small = x < 0.5
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    series = xs * (1 / 3 - x2 * (1 / 45 - x2 * (2 / 945 - x2 * (1 / 4725 - x2 * 2 / 93555))))
    xl = np.where(small, 1.0, x)
    direct = 1.0 / np.tanh(xl) - 1.0 / xl
    return np.where(small, series, direct)


def series_terms(alpha: float, n) -> np.ndarray:
    """Terms (coth a - n coth n a)/sinh n a; the n = 1 term is exactly zero."""
    n = np.asarray(n, dtype=float)
    na = n * alpha
    phi_a = float(_coth_minus_inv(alpha))
    # coth a - n coth na = phi(a) - n phi(na): the 1/a pieces cancel identically
    numer = phi_a - n * _coth_minus_inv(na)
    far = na > _ASYMPTOTIC_NALPHA
    na_near = np.where(far, 1.0, na)
    near_val = numer / np.sinh(na_near)
    coth_a = 1.0 / math.tanh(alpha)
    far_val = (coth_a - n) * 2.0 * np.exp(-np.where(far, na, 0.0))
    return np.where(far, far_val, near_val)


def _series_sum(alpha: float) -> float:
    total = 0.0
    start = 1
    while start <= MAX_TERMS:
        n = np.arange(start, min(start + _CHUNK, MAX_TERMS + 1))
        terms = series_terms(alpha, n)
        partial = total + np.cumsum(terms)
        small = np.abs(terms) < SERIES_REL_TOL * np.abs(partial)
        small[n == 1] = False  # the first term is identically zero
        if np.any(small):
            return float(partial[int(np.argmax(small))])
        total = float(partial[-1])
        start = int(n[-1]) + 1
    raise ConvergenceError(
        f"sphere-plate series did not converge within {MAX_TERMS} terms (alpha={alpha:.3g})",
        bound=abs(float(terms[-1])) / abs(total),
    )


def electrostatic_curvature(a: float, R: float) -> float:
    """Voltage-independent factor 2 pi eps0 * sum(...), so that F = factor * dV^2 (N/V^2)."""
    if not (a > 0 and R > 0):
        raise DomainError("separation and radius must be positive")
    return 2.0 * math.pi * CONSTANTS.epsilon_0 * _series_sum(alpha_of(a, R))


def electrostatic_force(a: float, R: float, delta_v: float) -> float:
    """Sphere-plate electrostatic force in N for dV = V - V0 in volts."""
    if delta_v == 0:
        if not (a > 0 and R > 0):
            raise DomainError("separation and radius must be positive")
        return 0.0
    return electrostatic_curvature(a, R) * delta_v * delta_v


def leading_asymptote(a: float, R: float, delta_v: float) -> float:
    """-pi eps0 R dV^2 / a, the a << R limit."""
    return -math.pi * CONSTANTS.epsilon_0 * R * delta_v**2 / a


class CurvatureTable:
    """Spline of log|curvature| against log(a) for repeated evaluation at fixed R.

    Used by the calibration fit and the sweep simulator, which evaluate the
    curvature thousands of times. Relative accuracy is ~1e-10 inside the range.
    """

    def __init__(self, R: float, a_min: float = 1e-9, a_max: float = 2e-5, points: int = 600):
        self.R = R
        self.a_min, self.a_max = a_min, a_max
        la = np.linspace(math.log(a_min), math.log(a_max), points)
        vals = np.array([electrostatic_curvature(math.exp(x), R) for x in la])
        self._spline = CubicSpline(la, np.log(-vals))
        self._dspline = self._spline.derivative()

    def _check(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < self.a_min) or np.any(a > self.a_max):
            raise DomainError(f"separation outside tabulated range [{self.a_min}, {self.a_max}] m")
        return a

    def __call__(self, a):
        a = self._check(a)
        return -np.exp(self._spline(np.log(a)))

    def derivative(self, a):
        """d(curvature)/da in N/(V^2 m)."""
        a = self._check(a)
        la = np.log(a)
        return -np.exp(self._spline(la)) * self._dspline(la) / a


@lru_cache(maxsize=16)
def curvature_table(R: float) -> CurvatureTable:
    return CurvatureTable(R)
