"""Physical constants (CODATA 2018 via scipy.constants) in the units used here."""

from __future__ import annotations

from dataclasses import dataclass

from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    hbar_c: float  # eV * nm
    k_B: float  # eV / K
    epsilon_0: float  # F / m
    c: float  # m / s
    hbar: float  # J * s
    k_B_si: float  # J / K
    eV: float  # J per eV

    @property
    def hbar_c_m(self) -> float:
        """hbar*c in eV * m."""
        return self.hbar_c * 1e-9


CONSTANTS = PhysicalConstants(
    hbar_c=_sc.hbar * _sc.c / _sc.e * 1e9,
    k_B=_sc.k / _sc.e,
    epsilon_0=_sc.epsilon_0,
    c=_sc.c,
    hbar=_sc.hbar,
    k_B_si=_sc.k,
    eV=_sc.e,
)

HBAR_C_EV_M = CONSTANTS.hbar_c_m
