"""Command-line interface: ``casimir-lab {compute,analyze,synth,compare,kk}``.

Every command takes an optional JSON config (``--config``) whose values are
overridden by explicit flags, and writes its outputs plus a
``run_manifest.json`` into ``--out``. The manifest records the resolved
configuration with absolute paths and SHA-256 digests of every input and
output file; passing it back as ``--config`` re-executes the run. Thread
counts are deliberately left out of the manifest since results do not
depend on them.

Material references are either paths to material JSON files or short names
looked up as ``<name>.json`` in ``$CASIMIR_LAB_DATA`` and then in the
packaged data directory.

Exit codes: 0 ok, 2 configuration error, 3 convergence failure, 4 fit failure.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import math
import os
import sys
import warnings
from importlib import resources
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import __version__
from .analysis import (
    CalibrationSettings,
    ErrorModel,
    calibrate,
    compare_curves,
    error_budget,
    extract_casimir,
    load_measurement_set,
    sidecar_path,
)
from .curves import ForceCurve, read_curve, write_curve, write_table
from .electrostatics import electrostatic_force
from .errors import CasimirLabError, ConfigError
from .lifshitz import Layer, LayerStack, LifshitzSettings, ParameterSpread, SphereGeometry, force_curve
from .materials import TabulatedKK, eps_imaginary, extrapolation_band, load_material
from .roughness import _pair_table, correction_factor, gaussian_surrogate, load_histogram
from .synth import REFERENCE_NOISE_SIGMA, GroundTruth, simulate_set, write_dataset

TOOL = "casimir-lab"
DATA_ENV = "CASIMIR_LAB_DATA"
MANIFEST = "run_manifest.json"

_DEFAULT_PLATE = {"layers": [{"material": "ito_untreated", "thickness_nm": 74.6}], "substrate": "quartz"}

DEFAULTS = {
    "compute": {
        "sphere_radius_um": 101.23,
        "sphere_material": "au",
        "plate": _DEFAULT_PLATE,
        "temperature_k": 275.15,
        "matsubara_rel_tol": 1e-7,
        "quadrature_rel_tol": 1e-9,
        "l_max_cap": 20000,
        "grid_nm": [60.0, 300.0, 1.0],
        "band": False,
        "spread": None,  # {"radius_sigma_um", "thickness_sigma_nm"}
        "electrostatic": False,
        "dv_v": None,
        "roughness": None,  # {"sphere": {"sigma_nm"} | {"histogram"}, "plate": ...}
    },
    "analyze": {
        "manifest": None,
        "calibration": None,  # calibration.json of an earlier run; skips the fit
        "grid_nm": [60.0, 300.0, 1.0],
        "drift_window_nm": [1700.0, 2000.0],
        "separation_range_nm": [None, 300.0],
        "average_repetitions": True,
        "compensate_far_field": True,
        "uncertainty": "jackknife",
        "confidence": 0.95,
        "error_model": {
            "systematic_anchors": [[60.0, 2.1], [100.0, 1.5], [200.0, 1.1]],
            "random_sigma_of_mean_pn": None,
            "combine": "rss",
        },
    },
    "synth": {
        "truth": {
            "v0_v": -0.1968,
            "k_n_per_m": 0.0139,
            "z0_nm": 29.5,
            "m_nm_per_unit": 104.4,
            "m_sigma_nm_per_unit": 0.5,
            "radius_um": 101.23,
            "radius_sigma_um": 0.5,
            "temperature_k": 275.15,
            "voltages_v": [float(v) for v in np.round(np.linspace(-0.26, -0.10, 10), 6)],
            "repetitions": 10,
            "noise_sigma": REFERENCE_NOISE_SIGMA,
            "drift_slope_per_nm": 2e-5,
            "drift_offset": 0.01,
            "seed": 0,
            "z_max_nm": 2000.0,
            "step_nm": 0.2,
            "electrostatic": True,
        },
        "casimir": {"sphere_material": "au", "plate": _DEFAULT_PLATE},
    },
    "compare": {"curve_a": None, "curve_b": None},
    "kk": {"material": None, "xi_ev": {"start": 0.01, "stop": 10.0, "points": 61}, "band": False},
}


# --------------------------------------------------------------------------
# configuration


def data_dirs() -> list[Path]:
    dirs = []
    env = os.environ.get(DATA_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(Path(str(resources.files("casimir_lab") / "data")))
    return dirs


def resolve_material_path(ref: str, base: Path) -> Path:
    p = Path(ref)
    candidates = [p if p.is_absolute() else base / p]
    if p.suffix != ".json" and len(p.parts) == 1:
        candidates += [d / f"{ref}.json" for d in data_dirs()]
    for c in candidates:
        if c.is_file():
            return c.resolve()
    raise ConfigError(f"material {ref!r} not found (searched {', '.join(str(c) for c in candidates)})")


def _resolve_file(ref, base: Path, what: str) -> str:
    if ref is None:
        raise ConfigError(f"{what} is required")
    p = Path(ref)
    p = p if p.is_absolute() else base / p
    if not p.is_file():
        raise ConfigError(f"{what} {ref!r} does not exist")
    return str(p.resolve())


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path, command: str) -> tuple[dict, Path]:
    """Config file contents and the directory its relative paths refer to.

    A run manifest is accepted too; its ``config`` section is used.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "config" in doc and "command" in doc:
        if doc["command"] != command:
            raise ConfigError(f"{path} records a {doc['command']!r} run, not {command!r}")
        doc = doc["config"]
    unknown = set(doc) - set(DEFAULTS[command])
    if unknown:
        raise ConfigError(f"{path}: unknown {command} settings {sorted(unknown)}")
    return doc, path.parent


def _grid(spec, what="grid_nm") -> np.ndarray:
    try:
        start, stop, step = (float(x) for x in spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be [start, stop, step]") from exc
    if not (step > 0 and stop >= start > 0):
        raise ConfigError(f"{what} needs 0 < start <= stop and step > 0")
    n = int(math.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n + 1, dtype=float)


class _Inputs:
    """Collects the files a run reads, for hashing."""

    def __init__(self):
        self.paths: set[str] = set()

    def add(self, path) -> str:
        p = str(Path(path).resolve())
        self.paths.add(p)
        return p

    def material(self, ref: str, base: Path):
        path = resolve_material_path(ref, base)
        self.add(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        for key in ("spectrum", "table"):
            if key in doc:
                self.add(path.parent / doc[key])
        return str(path), load_material(path)

    def digests(self) -> dict[str, str]:
        return {p: sha256(p) for p in sorted(self.paths)}


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _stack(spec, base: Path, inputs: _Inputs) -> tuple[dict, LayerStack]:
    """Plate from `{"layers": [{"material", "thickness_nm"}], "substrate"}` or a bare material name."""
    if isinstance(spec, str):
        spec = {"layers": [], "substrate": spec}
    try:
        layers = []
        resolved = []
        for layer in spec.get("layers", []):
            path, model = inputs.material(layer["material"], base)
            layers.append(Layer(float(layer["thickness_nm"]) * 1e-9, model))
            resolved.append({"material": path, "thickness_nm": float(layer["thickness_nm"])})
        sub_path, substrate = inputs.material(spec["substrate"], base)
    except (KeyError, TypeError, AttributeError) as exc:
        raise ConfigError(f"malformed plate specification: {exc}") from exc
    return {"layers": resolved, "substrate": sub_path}, LayerStack(tuple(layers), substrate)


# --------------------------------------------------------------------------
# commands


def _distribution(spec, base: Path, inputs: _Inputs, resolved: dict, side: str):
    if spec is None:
        return gaussian_surrogate(0.0)
    if "histogram" in spec:
        path = _resolve_file(spec["histogram"], base, f"{side} roughness histogram")
        inputs.add(path)
        resolved[side] = {"histogram": path}
        return load_histogram(path)[0]
    if "sigma_nm" in spec:
        sigma = float(spec["sigma_nm"])
        bin_width = float(spec.get("bin_nm", 0.5))
        resolved[side] = {"sigma_nm": sigma, "bin_nm": bin_width}
        return gaussian_surrogate(sigma, bin_width)
    raise ConfigError(f"{side} roughness needs 'sigma_nm' or 'histogram'")


def run_compute(cfg: dict, base: Path, out: Path, fmt: str, threads: int) -> tuple[dict, list[str], _Inputs]:
    inputs = _Inputs()
    grid = _grid(cfg["grid_nm"])
    sphere = SphereGeometry(float(cfg["sphere_radius_um"]) * 1e-6)
    resolved = dict(cfg)
    name = f"force.{fmt}"
    if cfg["electrostatic"]:
        if cfg["dv_v"] is None:
            raise ConfigError("electrostatic mode needs dv_v")
        dv = float(cfg["dv_v"])
        # + 0.0 turns the -0.0 of a vanishing product into 0.0
        force = np.array([electrostatic_force(a * 1e-9, sphere.radius, dv) for a in grid]) * 1e12 + 0.0
        write_curve(ForceCurve(grid, force), out / name, fmt)
        return resolved, [name], inputs

    sphere_path, sphere_model = inputs.material(cfg["sphere_material"], base)
    plate_resolved, plate = _stack(cfg["plate"], base, inputs)
    resolved["sphere_material"] = sphere_path
    resolved["plate"] = plate_resolved
    settings = LifshitzSettings(
        temperature=float(cfg["temperature_k"]),
        matsubara_rel_tol=float(cfg["matsubara_rel_tol"]),
        quadrature_rel_tol=float(cfg["quadrature_rel_tol"]),
        l_max_cap=int(cfg["l_max_cap"]),
    )
    spread = None
    if cfg["spread"]:
        spread = ParameterSpread(
            radius_sigma=float(cfg["spread"].get("radius_sigma_um", 0.0)) * 1e-6,
            thickness_sigma=float(cfg["spread"].get("thickness_sigma_nm", 0.0)) * 1e-9,
        )
    a_m = grid * 1e-9
    curve = force_curve(a_m, sphere, sphere_model, plate, settings, threads, bool(cfg["band"]), spread)
    # report the configured grid, not its nm -> m -> nm round trip
    curve = dataclasses.replace(curve, a_nm=grid)
    outputs = [name]
    rough = cfg["roughness"]
    if rough:
        rres: dict = {}
        d_sphere = _distribution(rough.get("sphere"), base, inputs, rres, "sphere")
        d_plate = _distribution(rough.get("plate"), base, inputs, rres, "plate")
        resolved["roughness"] = rres
        s_nm, _ = _pair_table(d_sphere, d_plate)
        # every local separation the averaging visits, evaluated in one sweep
        local = np.unique(np.concatenate([a_m] + [a - s_nm * 1e-9 for a in a_m]))
        if local[0] <= 0:
            raise ConfigError("roughness heights reach below zero separation on this grid")
        lookup = force_curve(local, sphere, sphere_model, plate, settings, threads).force_pn * 1e-12

        def force_fn(x):
            x = np.asarray(x, dtype=float)
            return lookup[np.searchsorted(local, x)]

        factor = np.array([correction_factor(force_fn, a, d_sphere, d_plate) for a in a_m])
        curve = ForceCurve(
            a_nm=grid,
            force_pn=curve.force_pn * factor,
            force_lo_pn=None if curve.force_lo_pn is None else curve.force_lo_pn * factor,
            force_hi_pn=None if curve.force_hi_pn is None else curve.force_hi_pn * factor,
        )
        rname = f"roughness_correction.{fmt}"
        write_table({"a_nm": grid, "correction_factor": factor}, out / rname, fmt)
        outputs.append(rname)
    write_curve(curve, out / name, fmt)
    return resolved, outputs, inputs


def _calibration_json(path: str):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return SimpleNamespace(v0=float(doc["v0_v"]), k=float(doc["k_n_per_m"]), z0=float(doc["z0_nm"]))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot use calibration {path}: {exc}") from exc


def run_analyze(cfg: dict, base: Path, out: Path, fmt: str, threads: int) -> tuple[dict, list[str], _Inputs]:
    inputs = _Inputs()
    resolved = dict(cfg)
    manifest = _resolve_file(cfg["manifest"], base, "manifest")
    resolved["manifest"] = manifest
    inputs.add(manifest)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mset = load_measurement_set(manifest)
        # only the sweeps actually read count as inputs
        listed = json.loads(Path(manifest).read_text(encoding="utf-8"))["sweeps"]
        for f in listed:
            p = Path(manifest).parent / f
            if p.exists():
                inputs.add(p)
                inputs.add(sidecar_path(p))
        lo, hi = cfg["separation_range_nm"]
        settings = CalibrationSettings(
            drift_window=tuple(float(x) for x in cfg["drift_window_nm"]),
            separation_range=(None if lo is None else float(lo), None if hi is None else float(hi)),
            average_repetitions=bool(cfg["average_repetitions"]),
            compensate_far_field=bool(cfg["compensate_far_field"]),
            uncertainty=cfg["uncertainty"],
            confidence=float(cfg["confidence"]),
            threads=threads,
        )
        outputs = []
        if cfg["calibration"] is not None:
            cal_path = _resolve_file(cfg["calibration"], base, "calibration")
            resolved["calibration"] = cal_path
            inputs.add(cal_path)
            calib = _calibration_json(cal_path)
            report = {"v0_v": calib.v0, "k_n_per_m": calib.k, "z0_nm": calib.z0, "source": cal_path}
        else:
            calib = calibrate(mset, settings)
            report = calib.to_dict()
        em = cfg["error_model"]
        model = ErrorModel(
            systematic_anchors=tuple(tuple(x) for x in em["systematic_anchors"]),
            random_sigma_of_mean=em["random_sigma_of_mean_pn"],
            confidence=float(cfg["confidence"]),
            combine=em["combine"],
        )
        curves = extract_casimir(mset, calib, _grid(cfg["grid_nm"]), settings.drift_window, settings.compensate_far_field)
        mean = error_budget(curves, model) if curves.forces_pn.shape[0] >= 2 else curves.mean
    report["sweeps_used"] = len(mset.sweeps)
    report["warnings"] = [f"{w.category.__name__}: {w.message}" for w in caught]
    for line in report["warnings"]:
        print(f"warning: {line}", file=sys.stderr)
    (out / "calibration.json").write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    outputs.append("calibration.json")
    write_curve(mean, out / f"casimir_mean.{fmt}", fmt)
    outputs.append(f"casimir_mean.{fmt}")
    wide = {"a_nm": curves.a_nm}
    for v, r, row in zip(curves.voltages, curves.repetitions, curves.forces_pn):
        wide[f"force_pN_V{v:+.6f}_r{int(r)}"] = row
    write_table(wide, out / f"casimir_curves.{fmt}", fmt)
    outputs.append(f"casimir_curves.{fmt}")
    return resolved, outputs, inputs


def run_synth(cfg: dict, base: Path, out: Path, fmt: str, threads: int) -> tuple[dict, list[str], _Inputs]:
    inputs = _Inputs()
    resolved = dict(cfg)
    t = cfg["truth"]
    sphere_material = plate = None
    if cfg["casimir"]:
        sphere_path, sphere_material = inputs.material(cfg["casimir"]["sphere_material"], base)
        plate_resolved, plate = _stack(cfg["casimir"]["plate"], base, inputs)
        resolved["casimir"] = {"sphere_material": sphere_path, "plate": plate_resolved}
    try:
        truth = GroundTruth(
            v0=float(t["v0_v"]),
            k=float(t["k_n_per_m"]),
            z0=float(t["z0_nm"]),
            m=float(t["m_nm_per_unit"]),
            sphere=SphereGeometry(float(t["radius_um"]) * 1e-6),
            sphere_material=sphere_material,
            plate=plate,
            temperature=float(t["temperature_k"]),
            voltages=tuple(float(v) for v in t["voltages_v"]),
            repetitions=int(t["repetitions"]),
            noise_sigma=float(t["noise_sigma"]),
            drift_slope=float(t["drift_slope_per_nm"]),
            drift_offset=float(t["drift_offset"]),
            seed=int(t["seed"]),
            z_max=float(t["z_max_nm"]),
            step=float(t["step_nm"]),
            m_sigma=float(t["m_sigma_nm_per_unit"]),
            radius_sigma=float(t["radius_sigma_um"]) * 1e-6,
            electrostatic=bool(t["electrostatic"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed truth settings: {exc}") from exc
    mset = simulate_set(truth, threads)
    written = write_dataset(mset, truth, out, extra={"casimir_config": resolved["casimir"]})
    return resolved, [str(p.relative_to(out)) for p in written], inputs


def run_compare(cfg: dict, base: Path, out: Path, fmt: str, threads: int) -> tuple[dict, list[str], _Inputs]:
    inputs = _Inputs()
    resolved = dict(cfg)
    for key in ("curve_a", "curve_b"):
        resolved[key] = inputs.add(_resolve_file(cfg[key], base, key))
    diff = compare_curves(read_curve(resolved["curve_a"]), read_curve(resolved["curve_b"]))
    name = f"rel_diff.{fmt}"
    write_table(diff.columns(), out / name, fmt)
    return resolved, [name], inputs


def run_kk(cfg: dict, base: Path, out: Path, fmt: str, threads: int) -> tuple[dict, list[str], _Inputs]:
    inputs = _Inputs()
    resolved = dict(cfg)
    if cfg["material"] is None:
        raise ConfigError("kk needs a material")
    path, model = inputs.material(cfg["material"], base)
    resolved["material"] = path
    spec = cfg["xi_ev"]
    if isinstance(spec, dict):
        try:
            xi = np.geomspace(float(spec["start"]), float(spec["stop"]), int(spec["points"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"xi_ev needs start, stop and points: {exc}") from exc
    else:
        xi = np.asarray(spec, dtype=float)
    if xi.size == 0 or np.any(xi <= 0):
        raise ConfigError("xi_ev values must be positive")
    cols = {"xi_ev": xi, "eps": np.asarray(eps_imaginary(model, xi), dtype=float)}
    if cfg["band"]:
        if not isinstance(model, TabulatedKK):
            raise ConfigError("band mode needs a tabulated_kk material with envelopes")
        lo, hi = extrapolation_band(model, xi)
        cols["eps_lo"], cols["eps_hi"] = np.asarray(lo), np.asarray(hi)
    name = f"eps.{fmt}"
    write_table(cols, out / name, fmt)
    return resolved, [name], inputs


RUNNERS = {"compute": run_compute, "analyze": run_analyze, "synth": run_synth, "compare": run_compare, "kk": run_kk}


# --------------------------------------------------------------------------
# argument handling


def _flag_overrides(command: str, args: argparse.Namespace) -> dict:
    o: dict = {}

    def put(key, value):
        if value is not None:
            o[key] = value

    if command == "compute":
        put("sphere_radius_um", args.radius_um)
        put("sphere_material", args.sphere_material)
        put("temperature_k", args.temperature)
        put("l_max_cap", args.l_max_cap)
        put("matsubara_rel_tol", args.matsubara_rel_tol)
        put("grid_nm", args.grid)
        put("dv_v", args.dv)
        if args.band:
            o["band"] = True
        if args.electrostatic:
            o["electrostatic"] = True
        if args.substrate is not None or args.film is not None:
            o["plate"] = {
                "layers": [{"material": m, "thickness_nm": float(d)} for m, d in (args.film or [])],
                "substrate": args.substrate or "quartz",
            }
        if args.roughness_sigma is not None:
            s1, s2 = args.roughness_sigma
            o["roughness"] = {"sphere": {"sigma_nm": s1}, "plate": {"sigma_nm": s2}}
    elif command == "analyze":
        put("manifest", args.manifest)
        put("calibration", args.calibration)
        put("grid_nm", args.grid)
        put("uncertainty", args.uncertainty)
        if args.fit_all_points:
            o["average_repetitions"] = False
        if args.no_far_field:
            o["compensate_far_field"] = False
    elif command == "synth":
        truth = {}
        for key, val in (
            ("seed", args.seed),
            ("noise_sigma", args.noise_sigma),
            ("repetitions", args.repetitions),
            ("drift_slope_per_nm", args.drift_slope),
            ("step_nm", args.step),
        ):
            if val is not None:
                truth[key] = val
        if truth:
            o["truth"] = truth
        if args.no_casimir:
            o["casimir"] = None
    elif command == "compare":
        put("curve_a", args.curve_a)
        put("curve_b", args.curve_b)
    elif command == "kk":
        put("material", args.material)
        if args.xi is not None:
            o["xi_ev"] = args.xi
        if args.band:
            o["band"] = True
    return o


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=TOOL, description="Casimir force theory and AFM data reduction.")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config or run manifest; flags override it")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), default=None, help="table format (default csv)")
        sp.add_argument("--threads", type=int, default=1, help="maximum worker threads")

    c = sub.add_parser("compute", help="PFA Casimir (or electrostatic) force curve")
    common(c)
    c.add_argument("--radius-um", type=float)
    c.add_argument("--sphere-material")
    c.add_argument("--substrate", help="plate substrate material")
    c.add_argument("--film", nargs=2, action="append", metavar=("MATERIAL", "THICKNESS_NM"), help="plate film, gap side first")
    c.add_argument("--temperature", type=float, help="kelvin")
    c.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "STEP"), help="separations in nm")
    c.add_argument("--l-max-cap", type=int)
    c.add_argument("--matsubara-rel-tol", type=float)
    c.add_argument("--band", action="store_true", help="add force_lo/force_hi from the extrapolation envelopes")
    c.add_argument("--electrostatic", action="store_true", help="electrostatic force instead of Casimir")
    c.add_argument("--dv", type=float, help="V - V0 in volts for --electrostatic")
    c.add_argument("--roughness-sigma", type=float, nargs=2, metavar=("SPHERE_NM", "PLATE_NM"))

    a = sub.add_parser("analyze", help="calibrate a measurement set and extract Casimir forces")
    common(a)
    a.add_argument("--manifest")
    a.add_argument("--calibration", help="calibration.json to reuse instead of fitting")
    a.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    a.add_argument("--uncertainty", choices=("jackknife", "jacobian"))
    a.add_argument("--fit-all-points", action="store_true", help="fit parabolas to every repetition")
    a.add_argument("--no-far-field", action="store_true", help="plain drift line fit")

    s = sub.add_parser("synth", help="synthetic measurement set from ground truth")
    common(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--noise-sigma", type=float)
    s.add_argument("--repetitions", type=int)
    s.add_argument("--drift-slope", type=float)
    s.add_argument("--step", type=float, help="piezo step in nm")
    s.add_argument("--no-casimir", action="store_true")

    m = sub.add_parser("compare", help="relative difference of two force curves")
    common(m)
    m.add_argument("curve_a", nargs="?")
    m.add_argument("curve_b", nargs="?")

    k = sub.add_parser("kk", help="permittivity along the imaginary frequency axis")
    common(k)
    k.add_argument("--material")
    k.add_argument("--xi", type=float, nargs="+", help="imaginary frequencies in eV")
    k.add_argument("--band", action="store_true")
    return p


def _canonical(obj):
    """JSON-ready copy: tuples to lists, numpy scalars to floats."""
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    cfg = copy.deepcopy(DEFAULTS[command])
    base = Path.cwd()
    fmt = args.format
    if args.config:
        file_cfg, cfg_base = load_config(args.config, command)
        cfg = _merge(cfg, file_cfg)
        base = cfg_base
        if fmt is None:
            try:
                fmt = json.loads(Path(args.config).read_text(encoding="utf-8")).get("format")
            except (OSError, json.JSONDecodeError):
                fmt = None
    flags = _flag_overrides(command, args)
    # flag paths are relative to the working directory, config paths to the config file
    if flags and base != Path.cwd():
        cfg = _resolve_relative(cfg, base)
        base = Path.cwd()
    cfg = _merge(cfg, flags)
    fmt = fmt or "csv"
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved, outputs, inputs = RUNNERS[command](cfg, base, out, fmt, args.threads)
    manifest = {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "format": fmt,
        "config": _canonical(resolved),
        "inputs": inputs.digests(),
        "outputs": {name: sha256(out / name) for name in sorted(outputs)},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return 0


_PATH_KEYS = ("manifest", "calibration", "curve_a", "curve_b", "histogram")


def _resolve_relative(cfg, base: Path):
    """Make file paths in a config absolute against `base` (material names are left alone)."""
    if isinstance(cfg, dict):
        out = {}
        for k, v in cfg.items():
            if k in _PATH_KEYS and isinstance(v, str) and not Path(v).is_absolute():
                out[k] = str((base / v).resolve())
            elif k in ("material", "sphere_material", "substrate") and isinstance(v, str):
                out[k] = resolve_material_path(v, base).as_posix()
            elif k == "plate" and isinstance(v, str):
                out[k] = resolve_material_path(v, base).as_posix()
            else:
                out[k] = _resolve_relative(v, base)
        return out
    if isinstance(cfg, list):
        return [_resolve_relative(v, base) for v in cfg]
    return cfg


def main(argv=None) -> int:
    try:
        return run(argv)
    except CasimirLabError as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
