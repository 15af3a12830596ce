from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from casimir_lab.constants import CONSTANTS
from casimir_lab.errors import ConfigError, DomainError
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
    extrapolation_band,
    kk_transform,
    load_material,
    material_from_dict,
    matsubara_frequencies,
)

ITO_DRUDE = DrudeParams(1.5, 0.128)


def drude_spectrum(params=ITO_DRUDE, lo=1e-4, hi=1e3, n=4000):
    w = np.geomspace(lo, hi, n)
    return OpticalSpectrum(w, params.im_eps(w))


def quad_kk(spectrum: OpticalSpectrum, xi: float) -> float:
    """Independent oracle: scipy quadrature of the band integral with linear interpolation."""
    w, y = spectrum.frequencies, spectrum.im_eps
    val, _ = integrate.quad(
        lambda om: om * np.interp(om, w, y) / (om * om + xi * xi),
        w[0],
        w[-1],
        points=w[1:-1][:: max(1, w.size // 40)],
        limit=2000,
        epsabs=0.0,
        epsrel=1e-11,
    )
    return 1.0 + 2.0 / math.pi * val


# ---------------------------------------------------------------- eps_imaginary


def test_drude_gold_value():
    assert eps_imaginary(Drude(DrudeParams(9.0, 0.035)), 9.0) == pytest.approx(1.9961, abs=5e-5)


def test_drude_ito_at_first_matsubara():
    assert eps_imaginary(Drude(ITO_DRUDE), 0.14898) == pytest.approx(55.53, abs=5e-3)


def test_drude_vacuum_limit():
    assert eps_imaginary(Drude(DrudeParams(1e-12, 0.1)), 2.0) == pytest.approx(1.0, abs=1e-20)


def test_drude_rejects_static_evaluation():
    with pytest.raises(DomainError):
        eps_imaginary(Drude(ITO_DRUDE), 0.0)


def test_negative_xi_rejected():
    with pytest.raises(DomainError):
        eps_imaginary(IdealMetal(), -1.0)


def test_ideal_metal_is_infinite():
    assert eps_imaginary(IdealMetal(), 0.0) == math.inf
    assert eps_imaginary(IdealMetal(), 3.0) == math.inf


def test_generalized_plasma_formula():
    osc = OscillatorSet((Oscillator(2.0, 4.0, 0.5),))
    gp = GeneralizedPlasma(9.0, osc)
    xi = 0.7
    expected = 1 + 81 / xi**2 + 2.0 * 16 / (16 + xi**2 + 0.5 * xi)
    assert eps_imaginary(gp, xi) == pytest.approx(expected, rel=1e-14)


def test_dielectric_table_static_and_interpolation():
    table = DielectricTable(np.array([0.0, 0.1, 1.0, 10.0]), np.array([3.8, 3.7, 2.5, 1.2]))
    assert eps_imaginary(table, 0.0) == 3.8
    # linear in log xi between nodes: halfway in log between 0.1 and 1.0
    assert eps_imaginary(table, math.sqrt(0.1)) == pytest.approx(3.1, rel=1e-12)


@pytest.mark.parametrize(
    "xi, values",
    [([0.0, 1.0], [3.0, 3.5]), ([0.0, 1.0], [0.9, 0.8]), ([1.0, 0.5], [2.0, 1.5])],
)
def test_dielectric_table_invariants(xi, values):
    with pytest.raises(ConfigError):
        DielectricTable(np.array(xi), np.array(values))


@settings(max_examples=50, deadline=None)
@given(
    wp=st.floats(0.05, 20.0),
    gamma=st.floats(1e-3, 2.0),
    xi=st.floats(1e-3, 50.0),
    factor=st.floats(1.0, 10.0),
)
def test_drude_at_least_one_and_nonincreasing(wp, gamma, xi, factor):
    m = Drude(DrudeParams(wp, gamma))
    e1, e2 = eps_imaginary(m, xi), eps_imaginary(m, xi * factor)
    assert e1 >= 1.0
    assert e2 <= e1


def test_packaged_materials_satisfy_invariants():
    from importlib import resources

    data = resources.files("casimir_lab") / "data"
    xi = np.geomspace(1e-3, 100.0, 200)
    for name in ("au", "au_drude", "au_generalized_plasma", "ito_untreated", "ito_uv", "ito_untreated_no_carriers", "quartz"):
        eps = np.asarray(eps_imaginary(load_material(data / f"{name}.json"), xi))
        assert np.all(eps >= 1.0), name
        assert np.all(np.diff(eps) <= 1e-12 * eps[:-1]), name


# ---------------------------------------------------------------- Kramers-Kronig


def test_kk_drude_spectrum_matches_closed_form():
    model = TabulatedKK(drude_spectrum(), ITO_DRUDE, carriers_included=False)
    assert kk_transform(model, 1.0) == pytest.approx(2.9947, rel=5e-3)
    assert 1 + 1.5**2 / (1.0 * 1.128) == pytest.approx(2.9947, abs=5e-5)


def test_kk_identity_on_decade_grid():
    # the analytic Drude tail supplies the part below the tabulated band
    model = TabulatedKK(drude_spectrum(), ITO_DRUDE, carriers_included=True)
    xi = np.geomspace(0.01, 10.0, 31)
    exact = ITO_DRUDE.eps(xi)
    assert np.max(np.abs(kk_transform(model, xi) / exact - 1)) < 5e-3


def test_kk_identity_without_tails_on_wide_band():
    model = TabulatedKK(drude_spectrum(lo=1e-6, hi=1e4, n=6000), ITO_DRUDE, carriers_included=False)
    xi = np.geomspace(0.01, 10.0, 31)
    assert np.max(np.abs(kk_transform(model, xi) / ITO_DRUDE.eps(xi) - 1)) < 5e-3


def test_kk_band_integral_matches_quadrature_oracle():
    w = np.linspace(0.04, 8.27, 60)
    y = 0.3 + 2.0 * np.exp(-((w - 4.0) ** 2)) + 0.05 * w
    spec = OpticalSpectrum(w, y)
    model = TabulatedKK(spec, ITO_DRUDE, carriers_included=False)
    for xi in (0.02, 0.3, 2.0, 9.0):
        assert kk_transform(model, xi) == pytest.approx(quad_kk(spec, xi), rel=1e-9)


def test_kk_exact_and_adaptive_agree():
    w = np.linspace(0.04, 8.27, 80)
    y = 1.0 + np.sin(w) ** 2
    a = TabulatedKK(OpticalSpectrum(w, y), ITO_DRUDE, method="exact")
    b = TabulatedKK(OpticalSpectrum(w, y), ITO_DRUDE, method="adaptive")
    xi = np.array([0.05, 0.5, 5.0])
    assert np.allclose(a.eps(xi), b.eps(xi), rtol=1e-8, atol=0)


def test_drude_tail_below_band_matches_quadrature():
    lo = 0.04
    for xi in (0.01, 0.128, 0.5, 3.0):
        val, _ = integrate.quad(lambda w: w * ITO_DRUDE.im_eps(w) / (w * w + xi * xi), 0, lo, epsrel=1e-12, limit=400)
        assert float(ITO_DRUDE.tail_integral(lo, np.array([xi]))[0]) == pytest.approx(val, rel=1e-9)


@pytest.mark.parametrize("width", [0.0, 0.3, 25.0])
def test_oscillator_tail_above_band_matches_quadrature(width):
    osc = OscillatorSet((Oscillator(1.5, 12.0, width),))
    hi = 8.27
    for xi in (0.0, 0.1, 3.0, 40.0):
        got = float(osc.tail_integral(hi, np.array([xi]))[0])
        if width == 0:
            expected = 0.5 * math.pi * 1.5 * 144 / (144 + xi * xi)
        else:
            expected, _ = integrate.quad(
                lambda w: w * float(osc.im_eps(np.array([w]))[0]) / (w * w + xi * xi), hi, np.inf, epsrel=1e-12, limit=400
            )
        assert got == pytest.approx(expected, rel=1e-8)


def test_zero_spectrum_gives_vacuum():
    spec = OpticalSpectrum(np.array([0.1, 1.0, 5.0]), np.zeros(3))
    model = TabulatedKK(spec, ITO_DRUDE, carriers_included=False)
    assert np.all(kk_transform(model, np.array([0.01, 1.0, 10.0])) == 1.0)


def test_excluding_carriers_lowers_eps():
    spec = drude_spectrum(lo=0.04, hi=8.27, n=400)
    with_c = TabulatedKK(spec, ITO_DRUDE, carriers_included=True)
    without = TabulatedKK(spec, ITO_DRUDE, carriers_included=False)
    assert kk_transform(without, 0.1) < kk_transform(with_c, 0.1)
    xi = np.geomspace(0.01, 10, 40)
    assert np.all(without.eps(xi) <= with_c.eps(xi))


def test_kk_requires_positive_xi_and_tabulated_model():
    model = TabulatedKK(drude_spectrum(n=50), ITO_DRUDE)
    with pytest.raises(DomainError):
        kk_transform(model, 0.0)
    with pytest.raises(ConfigError):
        kk_transform(Drude(ITO_DRUDE), 1.0)


# ---------------------------------------------------------------- extrapolation band


def _banded(lower, upper):
    spec = OpticalSpectrum(np.linspace(0.04, 8.27, 50), np.full(50, 0.5))
    return TabulatedKK(spec, ITO_DRUDE, high_extrapolation=lower, high_envelopes=(lower, upper))


def test_identical_envelopes_collapse_band():
    env = OscillatorSet((Oscillator(1.0, 12.0, 2.0),))
    lo, hi = extrapolation_band(_banded(env, env), np.array([0.1, 1.0, 10.0]))
    assert np.array_equal(lo, hi)


def test_stronger_upper_envelope_raises_eps():
    lower = OscillatorSet((Oscillator(1.0, 12.0, 2.0),))
    upper = OscillatorSet((Oscillator(1.4, 12.0, 2.0),))
    lo, hi = extrapolation_band(_banded(lower, upper), np.geomspace(0.01, 50, 30))
    assert np.all(hi > lo)


def test_crossing_envelopes_rejected():
    lower = OscillatorSet((Oscillator(1.0, 12.0, 2.0),))
    upper = OscillatorSet((Oscillator(1.0, 30.0, 2.0),))
    with pytest.raises(ConfigError):
        _banded(lower, upper)


def test_band_needs_envelopes():
    with pytest.raises(ConfigError):
        extrapolation_band(TabulatedKK(drude_spectrum(n=50), ITO_DRUDE), 1.0)


# ---------------------------------------------------------------- Matsubara


def test_matsubara_frequencies_examples():
    assert matsubara_frequencies(275.15, 1)[1] == pytest.approx(0.14898, abs=5e-6)
    # 0.162433 exactly; the quoted 0.16244 is rounded in its last digit
    assert matsubara_frequencies(300.0, 1)[1] == pytest.approx(0.16244, abs=1e-5)
    assert matsubara_frequencies(300.0, 0)[0] == 0.0


@settings(max_examples=50, deadline=None)
@given(T=st.floats(0.5, 1000.0), scale=st.integers(1, 7), l_max=st.integers(1, 200))
def test_matsubara_linear_in_t_and_l(T, scale, l_max):
    xi = matsubara_frequencies(T, l_max)
    assert np.allclose(xi, 2 * math.pi * CONSTANTS.k_B * T * np.arange(l_max + 1), rtol=1e-15, atol=0)
    xi_scaled = matsubara_frequencies(T * scale, l_max)
    assert np.allclose(xi_scaled, scale * xi, rtol=1e-14, atol=0)


def test_matsubara_preconditions():
    with pytest.raises(DomainError):
        matsubara_frequencies(0.0, 3)
    with pytest.raises(DomainError):
        matsubara_frequencies(300.0, -1)


# ---------------------------------------------------------------- files


def test_material_json_round_trip(tmp_path):
    (tmp_path / "spec.csv").write_text("omega_ev,im_eps\n0.1,2.0\n1.0,1.0\n5.0,0.5\n", encoding="utf-8")
    doc = {
        "type": "tabulated_kk",
        "spectrum": "spec.csv",
        "low_extrapolation": {"omega_p_ev": 1.5, "gamma_ev": 0.128},
        "high_extrapolation": [{"strength": 0.5, "resonance_ev": 10.0, "width_ev": 1.0}],
        "carriers_included": True,
    }
    (tmp_path / "m.json").write_text(json.dumps(doc), encoding="utf-8")
    model = load_material(tmp_path / "m.json")
    assert isinstance(model, TabulatedKK)
    assert model.eps(np.array([1.0]))[0] > 1


@pytest.mark.parametrize("doc", [{"type": "warp"}, {"type": "drude", "omega_p_ev": 1.0}])
def test_bad_material_definitions(doc):
    with pytest.raises(ConfigError):
        material_from_dict(doc)


def test_spectrum_header_enforced(tmp_path):
    (tmp_path / "bad.csv").write_text("w,eps\n0.1,1\n0.2,1\n", encoding="utf-8")
    doc = {"type": "tabulated_kk", "spectrum": "bad.csv", "low_extrapolation": {"omega_p_ev": 1, "gamma_ev": 0.1}}
    with pytest.raises(ConfigError):
        material_from_dict(doc, tmp_path)
