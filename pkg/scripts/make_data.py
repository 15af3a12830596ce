"""Regenerate the representative material tables in src/casimir_lab/data.

None of these tables is measured data. The ITO spectra are Drude + Lorentz
models with the published Drude extrapolation parameters; the Au spectrum is a
Drude + Lorentz (Rakic-type) model; quartz is a two-oscillator eps(i xi)
representation. Replace them with measured tables where available.
"""

import json
from pathlib import Path

import numpy as np

from casimir_lab.materials import DrudeParams, OscillatorSet

DATA = Path(__file__).resolve().parents[1] / "src" / "casimir_lab" / "data"

ITO_INTERBAND = [(1.9, 5.0, 1.5), (0.9, 8.5, 4.0)]
ITO_ENV_LOWER = [(1.9, 5.0, 1.5), (0.6, 8.5, 4.0)]
ITO_ENV_UPPER = [(1.9, 5.0, 1.5), (1.2, 8.5, 4.0)]

AU_WP = 9.03
# (f, omega_j eV, Gamma_j eV) in the f * wp^2 / (omega_j^2 - omega^2 - i omega Gamma_j) convention
AU_LD = [(0.024, 0.415, 0.241), (0.010, 0.830, 0.345), (0.071, 2.969, 0.870), (0.601, 4.304, 2.494), (4.384, 13.32, 2.214)]
AU_OSC = [(f * AU_WP**2 / w**2, w, g) for f, w, g in AU_LD]


def osc_json(rows):
    return [{"strength": f, "resonance_ev": w, "width_ev": g} for f, w, g in rows]


def write_spectrum(name, omega, im):
    with (DATA / name).open("w", encoding="utf-8") as fh:
        fh.write("omega_ev,im_eps\n")
        for w, y in zip(omega, im):
            fh.write(f"{w:.17g},{y:.17g}\n")


def ito(tag, gamma):
    omega = np.geomspace(0.04, 8.27, 400)
    drude = DrudeParams(1.5, gamma)
    im = drude.im_eps(omega) + OscillatorSet.from_rows(ITO_INTERBAND).im_eps(omega)
    write_spectrum(f"ito_{tag}_spectrum.csv", omega, im)
    for carriers in (True, False):
        doc = {
            "type": "tabulated_kk",
            "name": f"ITO {tag}" + ("" if carriers else " (carriers neglected)"),
            "spectrum": f"ito_{tag}_spectrum.csv",
            "low_extrapolation": {"omega_p_ev": 1.5, "gamma_ev": gamma},
            "high_extrapolation": osc_json(ITO_INTERBAND),
            "high_envelopes": {"lower": osc_json(ITO_ENV_LOWER), "upper": osc_json(ITO_ENV_UPPER)},
            "carriers_included": carriers,
            "subtract_band_carriers": not carriers,
        }
        suffix = "" if carriers else "_no_carriers"
        (DATA / f"ito_{tag}{suffix}.json").write_text(json.dumps(doc, indent=2) + "\n")


def au():
    omega = np.geomspace(0.125, 9.9, 400)
    drude = DrudeParams(9.0, 0.035)
    im = drude.im_eps(omega) + OscillatorSet.from_rows(AU_OSC).im_eps(omega)
    write_spectrum("au_spectrum.csv", omega, im)
    doc = {
        "type": "tabulated_kk",
        "name": "Au (Drude + Lorentz representative table)",
        "spectrum": "au_spectrum.csv",
        "low_extrapolation": {"omega_p_ev": 9.0, "gamma_ev": 0.035},
        "high_extrapolation": osc_json(AU_OSC),
        "carriers_included": True,
    }
    (DATA / "au.json").write_text(json.dumps(doc, indent=2) + "\n")
    (DATA / "au_drude.json").write_text(
        json.dumps({"type": "drude", "name": "Au Drude", "omega_p_ev": 9.0, "gamma_ev": 0.035}, indent=2) + "\n"
    )
    gp = {"type": "generalized_plasma", "name": "Au generalized plasma-like", "omega_p_ev": 9.0, "oscillators": osc_json(AU_OSC)}
    (DATA / "au_generalized_plasma.json").write_text(json.dumps(gp, indent=2) + "\n")


def quartz():
    xi = np.concatenate([[0.0], np.geomspace(1e-4, 1e3, 300)])
    eps = 1 + 1.93 / (1 + (xi / 0.1378) ** 2) + 1.359 / (1 + (xi / 13.38) ** 2)
    with (DATA / "quartz_eps_imag.csv").open("w", encoding="utf-8") as fh:
        fh.write("xi_ev,eps\n")
        for x, e in zip(xi, eps):
            fh.write(f"{x:.17g},{e:.17g}\n")
    doc = {"type": "dielectric_table", "name": "quartz", "table": "quartz_eps_imag.csv"}
    (DATA / "quartz.json").write_text(json.dumps(doc, indent=2) + "\n")
    (DATA / "ideal_metal.json").write_text(json.dumps({"type": "ideal_metal"}, indent=2) + "\n")


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    ito("untreated", 0.128)
    ito("uv", 0.132)
    au()
    quartz()
