"""Roughness correction by geometrical averaging over discrete height distributions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True, eq=False)
class HeightDistribution:
    """Heights in nm from the mean plane (positive toward the gap) with weights.

    Construct through :func:`from_histogram` or :func:`gaussian_surrogate`,
    which normalise and centre the input.
    """

    heights: np.ndarray
    weights: np.ndarray
    variance: float

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if h.ndim != 1 or h.shape != w.shape or h.size == 0:
            raise ConfigError("heights and weights must be equally long 1-D arrays")
        if np.any(w < 0):
            raise ConfigError("weights must be non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError(f"weights sum to {w.sum()!r}, expected 1")
        if abs(float(w @ h)) > 1e-9:
            raise ConfigError(f"distribution mean is {float(w @ h)} nm, expected 0")
        if abs(float(w @ h**2) - self.variance) > 1e-9 * max(1.0, self.variance):
            raise ConfigError("cached variance does not match the distribution")
        h.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "weights", w)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)


def from_histogram(heights, weights) -> tuple[HeightDistribution, dict]:
    """Normalise and re-centre a histogram. Returns the distribution and the shifts applied."""
    h = np.asarray(heights, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ConfigError("histogram weights must be non-negative with a positive sum")
    total = float(w.sum())
    w = w / total
    mean = float(w @ h)
    h = h - mean
    # second pass removes the rounding left by the first
    w = w / w.sum()
    residual = float(w @ h)
    h = h - residual
    var = float(w @ h**2)
    return HeightDistribution(h, w, var), {"mean_shift_nm": mean + residual, "weight_scale": 1.0 / total}


def gaussian_surrogate(sigma: float, bin_width: float = 0.5, cutoff: float = 4.0) -> HeightDistribution:
    """Gaussian discretised on bins of `bin_width` nm, truncated at +-cutoff*sigma."""
    if sigma < 0 or bin_width <= 0:
        raise ConfigError("sigma must be >= 0 and bin width > 0")
    if sigma == 0:
        return DELTA
    n = int(math.floor(cutoff * sigma / bin_width))
    h = bin_width * np.arange(-n, n + 1, dtype=float)
    w = np.exp(-0.5 * (h / sigma) ** 2)
    return from_histogram(h, w)[0]


DELTA = HeightDistribution(np.zeros(1), np.ones(1), 0.0)


def load_histogram(path) -> tuple[HeightDistribution, dict]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["height_nm", "weight"]:
        raise ConfigError(f"{path}: expected header height_nm,weight")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r])
    return from_histogram(data[:, 0], data[:, 1])


def _evaluate(force_fn, xs: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(force_fn(xs), dtype=float)
        if vals.shape == xs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(force_fn(float(x))) for x in xs])


def _pair_table(d1: HeightDistribution, d2: HeightDistribution):
    s = (d1.heights[:, None] + d2.heights[None, :]).ravel()
    w = (d1.weights[:, None] * d2.weights[None, :]).ravel()
    # canonical order makes the sum independent of which surface is which
    order = np.lexsort((w, s))
    return s[order], w[order]


def averaged_force(force_fn: Callable, a: float, dist_sphere: HeightDistribution, dist_plate: HeightDistribution) -> float:
    """sum_ij w_i v_j F(a - h_i - h_j); `a` in m, heights in nm.

    `force_fn` may be vectorised; it is called once on the distinct local
    separations when it accepts an array.
    """
    s_nm, w = _pair_table(dist_sphere, dist_plate)
    local = a - s_nm * 1e-9
    if np.any(local <= 0):
        i = int(np.argmin(local))
        raise DomainError(
            f"local separation {local[i]:.3g} m is not positive (height sum {s_nm[i]:.3g} nm at a={a:.3g} m)"
        )
    uniq, inv = np.unique(local, return_inverse=True)
    vals = _evaluate(force_fn, uniq)
    return float(np.sum(w * vals[inv]))


def correction_factor(force_fn: Callable, a: float, dist_sphere: HeightDistribution, dist_plate: HeightDistribution) -> float:
    """averaged_force / force_fn(a)."""
    return averaged_force(force_fn, a, dist_sphere, dist_plate) / float(_evaluate(force_fn, np.array([a]))[0])
