"""Casimir forces from dielectric data and reduction of AFM force measurements."""

from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (
    CalibrationResult,
    CalibrationSettings,
    ErrorModel,
    MeasurementSet,
    RawSweep,
    calibrate,
    compare_curves,
    error_budget,
    estimate_v0,
    extract_casimir,
    fit_kinematics,
    fit_parabola_per_separation,
    load_measurement_set,
    resample,
    subtract_drift,
)
from .constants import CONSTANTS, PhysicalConstants
from .curves import ForceCurve, read_curve, write_curve
from .electrostatics import electrostatic_curvature, electrostatic_force
from .errors import (
    AlignmentError,
    CasimirLabError,
    ConfigError,
    ConvergenceError,
    DomainError,
    FitError,
    NumericalError,
    RangeError,
)
from .lifshitz import (
    Layer,
    LayerStack,
    LifshitzSettings,
    SphereGeometry,
    force_curve,
    fresnel_interface,
    free_energy_per_area,
    pfa_sphere_plate_force,
    stack_reflection,
)
from .materials import (
    Drude,
    DrudeParams,
    GeneralizedPlasma,
    IdealMetal,
    OpticalSpectrum,
    Oscillator,
    OscillatorSet,
    TabulatedKK,
    DielectricTable,
    eps_imaginary,
    extrapolation_band,
    kk_transform,
    load_material,
    matsubara_frequencies,
)
from .roughness import HeightDistribution, averaged_force, correction_factor, from_histogram, gaussian_surrogate
from .synth import GroundTruth, simulate_set, simulate_sweep
