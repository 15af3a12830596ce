from __future__ import annotations

import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from casimir_lab.errors import ConfigError, ConvergenceError, DomainError
from casimir_lab import lifshitz
from casimir_lab.lifshitz import (
    TE,
    TM,
    Layer,
    LayerStack,
    LifshitzSettings,
    PFAValidityWarning,
    SphereGeometry,
    force_curve,
    free_energy_per_area,
    fresnel_interface,
    ideal_metal_energy,
    ideal_metal_pfa_force,
    pfa_sphere_plate_force,
    stack_reflection,
)
from casimir_lab.materials import (
    DielectricTable,
    Drude,
    DrudeParams,
    GeneralizedPlasma,
    IdealMetal,
    OpticalSpectrum,
    Oscillator,
    OscillatorSet,
    TabulatedKK,
    eps_imaginary,
)

from oracles import HBAR_C_EV_M, brute_free_energy, tmm_reflection

ITO = Drude(DrudeParams(1.5, 0.128), name="ito")
AU = Drude(DrudeParams(9.0, 0.035), name="au")
QUARTZ = DielectricTable(np.array([0.0, 0.1, 1.0, 5.0, 10.0, 30.0]), np.array([3.8, 3.8, 2.2, 2.05, 1.7, 1.1]), name="quartz")
FILM = LayerStack((Layer(74.6e-9, ITO),), QUARTZ)
SPHERE = SphereGeometry(101.23e-6)
XI1 = 0.14898


# ---------------------------------------------------------------- Fresnel


@pytest.mark.parametrize("pol", [TM, TE])
def test_no_interface_no_reflection(pol):
    assert fresnel_interface(pol, 2.5, 2.5, 1e7, 0.3) == 0.0


def test_ideal_metal_limit():
    assert fresnel_interface(TM, 1.0, math.inf, 1e7, 0.3) == 1.0
    assert fresnel_interface(TE, 1.0, math.inf, 1e7, 0.3) == -1.0


def test_fresnel_value_against_direct_arithmetic():
    k, eps_b = 1e7, 55.53
    xc = XI1 / HBAR_C_EV_M
    qa, qb = math.sqrt(k * k + xc * xc), math.sqrt(k * k + eps_b * xc * xc)
    assert fresnel_interface(TM, 1.0, eps_b, k, XI1) == pytest.approx((eps_b * qa - qb) / (eps_b * qa + qb), rel=1e-14)
    assert fresnel_interface(TE, 1.0, eps_b, k, XI1) == pytest.approx((qa - qb) / (qa + qb), rel=1e-14)


def test_fresnel_preconditions():
    with pytest.raises(DomainError):
        fresnel_interface(TM, 1.0, 2.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        fresnel_interface("XX", 1.0, 2.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    eps_a=st.floats(1.0, 1e4),
    eps_b=st.floats(1.0, 1e4),
    k=st.floats(0.0, 1e9),
    xi=st.floats(1e-3, 50.0),
    pol=st.sampled_from([TM, TE]),
)
def test_fresnel_bounded_and_antisymmetric(eps_a, eps_b, k, xi, pol):
    r = fresnel_interface(pol, eps_a, eps_b, k, xi)
    assert -1.0 <= r <= 1.0
    assert fresnel_interface(pol, eps_b, eps_a, k, xi) == pytest.approx(-r, abs=1e-12)


# ---------------------------------------------------------------- stacks


@pytest.mark.parametrize("pol", [TM, TE])
def test_bare_stack_is_single_interface(pol):
    eps_q = float(eps_imaginary(QUARTZ, XI1))
    assert stack_reflection(LayerStack((), QUARTZ), pol, 3e6, XI1) == fresnel_interface(pol, 1.0, eps_q, 3e6, XI1)


@pytest.mark.parametrize("pol", [TM, TE])
def test_opaque_film_is_film_half_space(pol):
    stack = LayerStack((Layer(1.0, ITO),), QUARTZ)
    eps_f = float(eps_imaginary(ITO, XI1))
    for k in (1e5, 5e6, 1e8):
        assert stack_reflection(stack, pol, k, XI1) == pytest.approx(fresnel_interface(pol, 1.0, eps_f, k, XI1), abs=1e-12)


@pytest.mark.parametrize("pol", [TM, TE])
def test_film_matches_transfer_matrix_oracle(pol):
    k = 1.0 / (2 * 100e-9)
    eps = [1.0, float(eps_imaginary(ITO, XI1)), float(eps_imaginary(QUARTZ, XI1))]
    expected = tmm_reflection(eps, [74.6e-9], pol, k, XI1)
    assert stack_reflection(FILM, pol, k, XI1) == pytest.approx(expected, rel=1e-10)


def test_three_film_stack_matches_oracle():
    stack = LayerStack((Layer(20e-9, AU), Layer(50e-9, ITO), Layer(10e-9, QUARTZ)), ITO)
    for xi in (0.05, 1.0, 12.0):
        eps = [1.0] + [float(eps_imaginary(m, xi)) for m in stack.media]
        for k in (1e4, 3e6, 4e7):
            for pol in (TM, TE):
                expected = tmm_reflection(eps, stack.thicknesses, pol, k, xi)
                assert stack_reflection(stack, pol, k, xi) == pytest.approx(expected, rel=1e-10, abs=1e-14)


def test_ideal_metal_substrate_under_film():
    stack = LayerStack((Layer(10e-9, ITO),), IdealMetal())
    assert abs(stack_reflection(stack, TM, 1e7, 1.0)) <= 1.0


# ---------------------------------------------------------------- zero frequency


def test_static_te_vanishes_for_drude_but_not_for_ideal_metal():
    k = 1e7
    assert stack_reflection(LayerStack((), AU), TE, k, 0.0) == 0.0
    assert stack_reflection(LayerStack((), AU), TM, k, 0.0) == 1.0
    assert stack_reflection(LayerStack((), IdealMetal()), TE, k, 0.0) == -1.0
    assert stack_reflection(LayerStack((), IdealMetal()), TM, k, 0.0) == 1.0


def test_static_te_plasma_model_matches_small_xi_limit():
    gp = GeneralizedPlasma(9.0)
    k = 1e7
    static = stack_reflection(LayerStack((), gp), TE, k, 0.0)
    assert static < -0.1
    assert static == pytest.approx(stack_reflection(LayerStack((), gp), TE, k, 1e-7), rel=1e-6)


def test_static_limit_matches_tiny_frequency_for_film():
    for pol in (TM, TE):
        static = stack_reflection(FILM, pol, 5e6, 0.0)
        tiny = stack_reflection(FILM, pol, 5e6, 1e-10)
        assert static == pytest.approx(tiny, abs=1e-6)


# ---------------------------------------------------------------- free energy


def test_ideal_metal_free_energy_near_zero_temperature():
    s = LifshitzSettings(temperature=1.0, l_max_cap=400000)
    e = free_energy_per_area(100e-9, IdealMetal(), IdealMetal(), s)
    assert e == pytest.approx(float(ideal_metal_energy(100e-9)), rel=1e-2)


def test_free_energy_against_brute_force_oracle():
    a, T = 80e-9, 275.15
    got = free_energy_per_area(a, AU, FILM, LifshitzSettings(temperature=T))
    side_au = ([lambda x: eps_imaginary(AU, x)], [])
    side_film = ([lambda x: eps_imaginary(ITO, x), lambda x: eps_imaginary(QUARTZ, x)], [74.6e-9])
    expected = brute_free_energy(a, side_au, side_film, T)
    assert got < 0
    assert got == pytest.approx(expected, rel=2e-5)


def test_free_energy_decreases_in_magnitude():
    s = LifshitzSettings()
    e1 = free_energy_per_area(80e-9, AU, FILM, s)
    e2 = free_energy_per_area(160e-9, AU, FILM, s)
    assert abs(e2) < abs(e1)


def test_free_energy_monotone_on_grid():
    a = np.linspace(60e-9, 300e-9, 13)
    e = np.array([free_energy_per_area(x, AU, FILM) for x in a])
    assert np.all(e < 0)
    assert np.all(np.diff(e) > 0)


def test_halving_matsubara_tolerance_is_self_consistent():
    tol = 1e-6
    f1 = pfa_sphere_plate_force(100e-9, SPHERE, AU, FILM, LifshitzSettings(matsubara_rel_tol=tol))
    f2 = pfa_sphere_plate_force(100e-9, SPHERE, AU, FILM, LifshitzSettings(matsubara_rel_tol=tol / 2))
    assert abs(f1 - f2) < tol * abs(f2)


def test_extending_matsubara_sum_changes_little():
    f1 = pfa_sphere_plate_force(100e-9, SPHERE, AU, FILM, LifshitzSettings())
    f2 = pfa_sphere_plate_force(100e-9, SPHERE, AU, FILM, LifshitzSettings(matsubara_rel_tol=1e-10))
    assert abs(f1 - f2) < 1e-4 * abs(f2)


def test_convergence_error_carries_bound():
    with pytest.raises(ConvergenceError) as info:
        free_energy_per_area(100e-9, AU, FILM, LifshitzSettings(l_max_cap=3))
    assert info.value.bound is not None and info.value.bound > 0


def test_nonpositive_separation_rejected():
    with pytest.raises(DomainError):
        free_energy_per_area(0.0, AU, FILM)


@pytest.mark.parametrize("kwargs", [{"temperature": 0.0}, {"matsubara_rel_tol": 0.5}, {"quadrature_rel_tol": 0.0}, {"l_max_cap": 0}])
def test_settings_validation(kwargs):
    with pytest.raises(ConfigError):
        LifshitzSettings(**kwargs)


def test_layer_thickness_validation():
    with pytest.raises(ConfigError):
        Layer(-1e-9, ITO)
    with pytest.raises(ConfigError):
        Layer(math.inf, ITO)


# ---------------------------------------------------------------- PFA and curves


def test_ideal_metal_pfa_force():
    s = LifshitzSettings(temperature=1.0, l_max_cap=400000)
    f = pfa_sphere_plate_force(100e-9, SPHERE, IdealMetal(), IdealMetal(), s)
    assert float(ideal_metal_pfa_force(100e-9, SPHERE.radius)) * 1e12 == pytest.approx(-275.6, abs=0.05)
    assert f * 1e12 == pytest.approx(-275.6, rel=1e-2)


def test_pfa_warning_for_large_separation():
    with pytest.warns(PFAValidityWarning):
        pfa_sphere_plate_force(2e-6, SphereGeometry(100e-6), IdealMetal(), IdealMetal())


def test_single_point_curve_equals_force():
    curve = force_curve([90e-9], SPHERE, AU, FILM)
    assert curve.force_pn[0] == pfa_sphere_plate_force(90e-9, SPHERE, AU, FILM) * 1e12
    assert curve.a_nm[0] == pytest.approx(90.0)


def test_curve_independent_of_thread_count():
    a = np.linspace(60e-9, 300e-9, 9)
    c1 = force_curve(a, SPHERE, AU, FILM, threads=1)
    c3 = force_curve(a, SPHERE, AU, FILM, threads=3)
    assert np.array_equal(c1.force_pn, c3.force_pn)


def test_curve_magnitude_decreases():
    c = force_curve(np.linspace(60e-9, 300e-9, 25), SPHERE, AU, FILM)
    assert np.all(np.diff(np.abs(c.force_pn)) < 0)


def test_grid_validation():
    with pytest.raises(DomainError):
        force_curve([100e-9, 90e-9], SPHERE, AU, FILM)


def _banded_ito():
    w = np.linspace(0.04, 8.27, 60)
    spec = OpticalSpectrum(w, 0.8 + 0.6 * np.exp(-((w - 5.0) ** 2)))
    lower = OscillatorSet((Oscillator(0.8, 12.0, 3.0),))
    upper = OscillatorSet((Oscillator(1.3, 12.0, 3.0),))
    return TabulatedKK(spec, DrudeParams(1.5, 0.128), lower, high_envelopes=(lower, upper))


def test_band_mode_orders_lo_hi():
    plate = LayerStack((Layer(74.6e-9, _banded_ito()),), QUARTZ)
    c = force_curve(np.array([60e-9, 120e-9, 240e-9]), SPHERE, AU, plate, band=True)
    assert np.all(c.force_lo_pn <= c.force_hi_pn)
    assert np.all(c.force_lo_pn < c.force_hi_pn)


def test_band_mode_needs_envelopes():
    with pytest.raises(ConfigError):
        force_curve([100e-9], SPHERE, AU, FILM, band=True)


def test_carriers_increase_attraction():
    w = np.linspace(0.04, 8.27, 200)
    y = DrudeParams(1.5, 0.128).im_eps(w) + 0.5 * np.exp(-((w - 5.0) ** 2))
    spec = OpticalSpectrum(w, y)
    with_c = LayerStack((Layer(74.6e-9, TabulatedKK(spec, DrudeParams(1.5, 0.128), carriers_included=True)),), QUARTZ)
    without = LayerStack((Layer(74.6e-9, TabulatedKK(spec, DrudeParams(1.5, 0.128), carriers_included=False)),), QUARTZ)
    a = np.array([60e-9, 150e-9, 300e-9])
    f_with = force_curve(a, SPHERE, AU, with_c).force_pn
    f_without = force_curve(a, SPHERE, AU, without).force_pn
    assert np.all(np.abs(f_with) > np.abs(f_without))


def test_ideal_metal_grid_runtime():
    s = LifshitzSettings(temperature=1.0, l_max_cap=400000)
    a = np.arange(60, 301, 20) * 1e-9
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        t0 = time.perf_counter()
        c = force_curve(a, SPHERE, IdealMetal(), IdealMetal(), s)
        elapsed = time.perf_counter() - t0
    exact = ideal_metal_pfa_force(a, SPHERE.radius) * 1e12
    assert np.max(np.abs(c.force_pn / exact - 1)) < 1e-2
    assert elapsed < 10


@pytest.mark.parametrize("a", [60e-9, 300e-9])
def test_low_temperature_tail_matches_explicit_sum(a, monkeypatch):
    s = LifshitzSettings(temperature=1.0, l_max_cap=400000)
    with_tail = free_energy_per_area(a, AU, FILM, s)
    monkeypatch.setattr(lifshitz, "_EM_XI_STEP", 0.0)
    explicit = free_energy_per_area(a, AU, FILM, s)
    assert with_tail == pytest.approx(explicit, rel=1e-6)


def test_room_temperature_sum_has_no_tail(monkeypatch):
    before = free_energy_per_area(100e-9, AU, FILM)
    monkeypatch.setattr(lifshitz, "_EM_XI_STEP", 0.0)
    assert free_energy_per_area(100e-9, AU, FILM) == before
