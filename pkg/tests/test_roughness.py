from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casimir_lab.errors import ConfigError, DomainError
from casimir_lab.roughness import (
    DELTA,
    HeightDistribution,
    averaged_force,
    correction_factor,
    from_histogram,
    gaussian_surrogate,
    load_histogram,
)

SIGMA_SPHERE, SIGMA_PLATE = 3.17, 2.28


def power_law(n):
    return lambda a: -1e-30 * np.asarray(a, dtype=float) ** -n


def direct_average(fn, a, d1, d2):
    """Plain double loop over the two distributions."""
    total = 0.0
    for h1, w1 in zip(d1.heights, d1.weights):
        for h2, w2 in zip(d2.heights, d2.weights):
            total += w1 * w2 * float(fn(a - (h1 + h2) * 1e-9))
    return total


def test_delta_distributions_are_identity():
    fn = power_law(3)
    assert averaged_force(fn, 80e-9, DELTA, DELTA) == float(fn(80e-9))
    assert correction_factor(fn, 80e-9, DELTA, DELTA) == 1.0


def test_matches_direct_double_loop():
    d1, d2 = gaussian_surrogate(SIGMA_SPHERE), gaussian_surrogate(SIGMA_PLATE)
    fn = power_law(3)
    assert averaged_force(fn, 80e-9, d1, d2) == pytest.approx(direct_average(fn, 80e-9, d1, d2), rel=1e-13)


def test_cubic_law_second_order_value():
    d1, d2 = gaussian_surrogate(SIGMA_SPHERE), gaussian_surrogate(SIGMA_PLATE)
    factor = correction_factor(power_law(3), 80e-9, d1, d2)
    assert 1 + 6 * 15.25 / 80**2 == pytest.approx(1.0143, abs=5e-5)
    assert factor == pytest.approx(1.0143, abs=1e-3)


def test_correction_scales_as_inverse_square():
    d1, d2 = gaussian_surrogate(SIGMA_SPHERE), gaussian_surrogate(SIGMA_PLATE)
    c80 = correction_factor(power_law(3), 80e-9, d1, d2) - 1
    c160 = correction_factor(power_law(3), 160e-9, d1, d2) - 1
    assert c160 == pytest.approx(c80 / 4, rel=0.03)


def test_swap_symmetry_is_exact():
    d1, d2 = gaussian_surrogate(SIGMA_SPHERE), gaussian_surrogate(SIGMA_PLATE, bin_width=0.3)
    fn = power_law(3)
    assert averaged_force(fn, 70e-9, d1, d2) == averaged_force(fn, 70e-9, d2, d1)


@settings(max_examples=40, deadline=None)
@given(
    n=st.sampled_from([2, 3, 4]),
    s1=st.floats(0.5, 3.0),
    s2=st.floats(0.5, 3.0),
    a_nm=st.floats(60.0, 300.0),
)
def test_second_order_expansion(n, s1, s2, a_nm):
    d1, d2 = gaussian_surrogate(s1, bin_width=0.1), gaussian_surrogate(s2, bin_width=0.1)
    var = d1.variance + d2.variance
    if var / a_nm**2 > 0.05**2:
        return
    factor = correction_factor(power_law(n), a_nm * 1e-9, d1, d2)
    assert factor == pytest.approx(1 + n * (n + 1) * var / (2 * a_nm**2), abs=1e-3)


def test_factor_decreases_with_separation():
    d1, d2 = gaussian_surrogate(SIGMA_SPHERE), gaussian_surrogate(SIGMA_PLATE)
    a = np.linspace(40e-9, 300e-9, 27)
    f = np.array([correction_factor(power_law(3), x, d1, d2) for x in a])
    assert np.all(f > 1)
    assert np.all(np.diff(f) < 0)


def test_nonpositive_local_separation_named():
    d = gaussian_surrogate(5.0)
    with pytest.raises(DomainError, match="height sum"):
        averaged_force(power_law(3), 10e-9, d, d)


def test_scalar_only_force_function():
    d1, d2 = gaussian_surrogate(2.0), gaussian_surrogate(1.0)

    def scalar_fn(a):
        return -1e-30 / float(a) ** 3

    assert averaged_force(scalar_fn, 80e-9, d1, d2) == pytest.approx(averaged_force(power_law(3), 80e-9, d1, d2), rel=1e-14)


def test_gaussian_surrogate_shape():
    d = gaussian_surrogate(2.0)
    assert d.heights.max() <= 4 * 2.0
    assert np.allclose(np.diff(d.heights), 0.5)
    assert d.sigma == pytest.approx(2.0, rel=0.02)
    assert gaussian_surrogate(0.0) is DELTA


def test_histogram_is_recentred_and_renormalised(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("height_nm,weight\n1.0,2\n2.0,4\n3.0,2\n", encoding="utf-8")
    d, shifts = load_histogram(path)
    assert shifts["mean_shift_nm"] == pytest.approx(2.0)
    assert shifts["weight_scale"] == pytest.approx(1 / 8)
    assert np.allclose(d.heights, [-1, 0, 1])
    assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert d.variance == pytest.approx(0.5)


def test_histogram_header_enforced(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("h,w\n1,1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_histogram(path)


@pytest.mark.parametrize(
    "heights, weights, variance",
    [([0.0, 1.0], [0.5, 0.6], 0.25), ([1.0], [1.0], 0.0), ([-1.0, 1.0], [0.5, 0.5], 2.0), ([0.0], [-1.0], 0.0)],
)
def test_distribution_invariants(heights, weights, variance):
    with pytest.raises(ConfigError):
        HeightDistribution(np.array(heights), np.array(weights), variance)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(0.01, 5.0)), min_size=1, max_size=30))
def test_from_histogram_invariants(rows):
    h = np.array([r[0] for r in rows])
    w = np.array([r[1] for r in rows])
    d, _ = from_histogram(h, w)
    assert abs(d.weights.sum() - 1) <= 1e-12
    assert abs(float(d.weights @ d.heights)) <= 1e-9
