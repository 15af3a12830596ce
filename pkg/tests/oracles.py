"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import math

import numpy as np
from scipy import constants as sc

HBAR_C_EV_M = sc.hbar * sc.c / sc.e
K_B_EV = sc.k / sc.e


def tmm_reflection(eps: list[float], thicknesses: list[float], pol: str, k: float, xi_ev: float) -> float:
    """Reflection of a layered half-space from boundary conditions solved as one linear system.

    eps[0] is the incidence medium, eps[-1] the substrate, thicknesses (m) the
    films in between. In medium j the field is A_j e^{-q_j (z - z_j)} +
    B_j e^{q_j (z - z_{j+1})}; psi and psi'/w are continuous with w = eps for
    TM and 1 for TE. Incident amplitude 1, unknowns r, (A_j, B_j), t.
    """
    n_films = len(thicknesses)
    xc2 = (xi_ev / HBAR_C_EV_M) ** 2
    q = [math.sqrt(k * k + e * xc2) for e in eps]
    w = [e if pol == "TM" else 1.0 for e in eps]
    z = np.concatenate([[0.0], np.cumsum(thicknesses)])
    n_unknown = 2 + 2 * n_films
    M = np.zeros((n_unknown, n_unknown))
    rhs = np.zeros(n_unknown)
    # column layout: 0 -> r, 1 + 2j -> A_j, 2 + 2j -> B_j (films), last -> t

    def film_terms(j, at):
        d = thicknesses[j]
        ea = math.exp(-q[j + 1] * (at - z[j]))
        eb = math.exp(q[j + 1] * (at - z[j + 1]))
        return (1 + 2 * j, ea, -q[j + 1] * ea), (2 + 2 * j, eb, q[j + 1] * eb)

    row = 0
    for iface in range(n_films + 1):
        at = z[iface]
        # upper side
        if iface == 0:
            # vacuum side: e^{-q0 z} + r e^{q0 z} at z = 0
            rhs[row] -= 1.0
            rhs[row + 1] -= -q[0] / w[0]
            M[row, 0] += 1.0
            M[row + 1, 0] += q[0] / w[0]
        else:
            for col, val, dval in film_terms(iface - 1, at):
                M[row, col] += val
                M[row + 1, col] += dval / w[iface]
        # lower side enters with a minus sign
        if iface == n_films:
            M[row, -1] -= 1.0
            M[row + 1, -1] -= -q[-1] / w[-1]
        else:
            for col, val, dval in film_terms(iface, at):
                M[row, col] -= val
                M[row + 1, col] -= dval / w[iface + 1]
        row += 2
    return float(np.linalg.solve(M, rhs)[0])


def _chain_reflection(eps, thicknesses, pol, q0, xc2):
    """Characteristic-matrix product (vectorised over q0) for the brute-force free energy."""
    qs = [np.sqrt(q0 * q0 + (e - 1.0) * xc2) for e in eps]
    ws = [e if pol == "TM" else 1.0 for e in eps]

    def r_ij(i, j):
        a = qs[i] / ws[i]
        b = qs[j] / ws[j]
        return (a - b) / (a + b)

    m00 = np.ones_like(q0)
    m01 = r_ij(0, 1)
    m10 = m01.copy()
    m11 = np.ones_like(q0)
    for f, d in enumerate(thicknesses, start=1):
        e = np.exp(-2.0 * qs[f] * d)
        # multiply by diag(1, e) then by [[1, r], [r, 1]]
        r = r_ij(f, f + 1)
        m01, m11 = m01 * e, m11 * e
        m00, m01 = m00 + m01 * r, m00 * r + m01
        m10, m11 = m10 + m11 * r, m10 * r + m11
    return m10 / m00


def brute_free_energy(a, side_1, side_2, T, static_xi_factor=1e-9, rel_tol=1e-10, points=40000):
    """Matsubara sum with trapezoid k-integration on a dense log grid (J/m^2).

    Each side is (eps_functions, thicknesses) with eps functions taking xi in
    eV; the l = 0 term is approximated at xi = static_xi_factor * xi_1.
    """
    step = 2 * math.pi * K_B_EV * T
    kT = sc.k * T
    total = 0.0
    l = 0
    while True:
        xi = step * (l if l else static_xi_factor)
        xc = xi / HBAR_C_EV_M
        k = np.concatenate([[0.0], np.geomspace(1e-4 / a, 60.0 / a, points)])
        q0 = np.sqrt(k * k + xc * xc)
        val = 0.0
        for pol in ("TM", "TE"):
            r = []
            for fns, th in (side_1, side_2):
                eps = [1.0] + [float(fn(xi)) for fn in fns]
                r.append(_chain_reflection(eps, th, pol, q0, xc * xc))
            val += np.trapezoid(k * np.log1p(-r[0] * r[1] * np.exp(-2 * a * q0)), k)
        term = val * (0.5 if l == 0 else 1.0)
        total += term
        if l > 0 and abs(term) < rel_tol * abs(total):
            break
        l += 1
    return kT / (2 * math.pi) * total
