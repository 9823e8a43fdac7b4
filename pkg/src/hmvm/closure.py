"""Quasi-linear moment system: transport terms, regularization, wave speeds
and the Lorentz coupling.

The transport operator in direction j is evaluated through the identity

    v_j d_j f  ->  P_M[ v_j P_M[ d_j f ] ]          (regularized)
    v_j d_j f  ->  P_M[ v_j d_j f ]                 (plain truncation)

with both written in the cell's own basis (u, T). The two differ only on the
|alpha| = M rows, by exactly the regularization term R_M^j. Converting the
coefficient rates to rates of (rho, u, T, f_alpha) uses the adaptive-basis
chain rule.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import kernels
from .hermite import ABSENT, MultiIndexTable, largest_root
from .moments import CellMomentState


class Gradient(NamedTuple):
    """Spatial derivative of (rho, u, T, f) along one direction."""

    rho: float
    u: np.ndarray
    T: float
    f: np.ndarray


class MomentRates(NamedTuple):
    """Right-hand side of d/dt(rho, u, T, f) = -rates."""

    rho: float
    u: np.ndarray
    T: float
    f: np.ndarray


def basis_derivative(state: CellMomentState, grad: Gradient) -> np.ndarray:
    """Coefficients of P_M[d_x f] in the cell basis."""
    tab = state.table
    c = state.coeffs
    g = np.array(grad.f, dtype=float)
    g[0] = grad.rho
    for n in range(tab.size):
        acc = 0.0
        for d in range(tab.D):
            p = tab.down[d, n, 1] if tab.alphas[n, d] >= 1 else ABSENT
            if p != ABSENT:
                acc += grad.u[d] * c[p]
            q = tab.down[d, n, 2] if tab.alphas[n, d] >= 2 else ABSENT
            if q != ABSENT:
                acc += 0.5 * grad.T * c[q]
        g[n] += acc
    return g


def regularization_correction(state: CellMomentState, du, dT: float, j: int) -> np.ndarray:
    """R_M^j on the top-order rows, zero elsewhere."""
    return kernels.regularize(
        state.coeffs[None, :], np.asarray(du, dtype=float)[None, :], np.array([float(dT)]), j, state.table
    )[0]


def coefficient_rates_to_primitive(state: CellMomentState, h: np.ndarray) -> MomentRates:
    tab = state.table
    D = tab.D
    c = state.coeffs
    rho = state.rho
    r_rho = h[0]
    r_u = np.array([h[tab.unit(d)] / rho for d in range(D)])
    r_T = 2.0 * sum(h[tab.unit2(d)] for d in range(D)) / (D * rho)
    r_f = np.zeros(tab.size)
    for n in range(tab.size):
        if tab.order[n] < 2:
            continue
        acc = h[n]
        for d in range(D):
            if tab.alphas[n, d] >= 1:
                acc -= r_u[d] * c[tab.down[d, n, 1]]
            if tab.alphas[n, d] >= 2:
                acc -= 0.5 * r_T * c[tab.down[d, n, 2]]
        r_f[n] = acc
    return MomentRates(r_rho, r_u, r_T, r_f)


def convective_rhs(
    state: CellMomentState, grads: dict[int, Gradient], regularized: bool = False
) -> MomentRates:
    """Sum over directions j of M_j(f) d_j f (or the regularized M-hat_j).

    ``grads`` maps a velocity/space direction j to its gradient.
    """
    tab = state.table
    h = np.zeros(tab.size)
    for j, grad in grads.items():
        g = basis_derivative(state, grad)
        hj = kernels.vmul(g[None, :], state.u[None, :], np.array([state.T]), j, tab)[0]
        if not regularized:
            hj += regularization_correction(state, grad.u, grad.T, j)
        h += hj
    return coefficient_rates_to_primitive(state, h)


def char_speeds(state_or_u, T=None, d: int = 0, M: int | None = None) -> tuple[float, float]:
    """u_d -/+ C_{M+1} sqrt(T); accepts a state or explicit (u_d, T, M)."""
    if isinstance(state_or_u, CellMomentState):
        ud = float(state_or_u.u[d])
        T = state_or_u.T
        M = state_or_u.M
    else:
        ud = float(state_or_u)
    if not T > 0:
        raise ValueError("temperature must be positive")
    c = largest_root(M + 1) * np.sqrt(T)
    return ud - c, ud + c


# --- dense assembly (test path only) ------------------------------------------


def reduced_layout(tab: MultiIndexTable) -> list[tuple[str, int]]:
    """Variable list (rho, u_d, T, f_alpha for |alpha|>=2 without f_{2e_D})."""
    D = tab.D
    skip = tab.unit2(D - 1)
    out = [("rho", 0)] + [("u", d) for d in range(D)] + [("T", 0)]
    out += [("f", n) for n in range(tab.size) if tab.order[n] >= 2 and n != skip]
    return out


def assemble_jacobian(state: CellMomentState, n, regularized: bool = True) -> np.ndarray:
    """Dense sum_j n_j M-hat_j in the reduced variables (for eigen tests)."""
    tab = state.table
    D = tab.D
    layout = reduced_layout(tab)
    skip = tab.unit2(D - 1)
    e2 = [tab.unit2(d) for d in range(D - 1)]
    size = len(layout)
    A = np.zeros((size, size))
    for col, (kind, k) in enumerate(layout):
        drho, du, dT = 0.0, np.zeros(D), 0.0
        df = np.zeros(tab.size)
        if kind == "rho":
            drho = 1.0
            df[0] = 1.0
        elif kind == "u":
            du[k] = 1.0
        elif kind == "T":
            dT = 1.0
        else:
            df[k] = 1.0
            if k in e2:
                df[skip] = -1.0
        grads = {j: Gradient(n[j] * drho, n[j] * du, n[j] * dT, n[j] * df) for j in range(D) if n[j] != 0.0}
        r = convective_rhs(state, grads, regularized=regularized)
        for row, (rk, ri) in enumerate(layout):
            if rk == "rho":
                A[row, col] = r.rho
            elif rk == "u":
                A[row, col] = r.u[ri]
            elif rk == "T":
                A[row, col] = r.T
            else:
                A[row, col] = r.f[ri]
    return A


def expected_eigenvalues(u_n: float, T: float, M: int) -> np.ndarray:
    """u.n + C_{i,j} sqrt(T) with the multiplicities of the characteristic polynomial."""
    from .hermite import hermite_roots

    vals = []
    for j in range(M + 1):
        roots = hermite_roots(j + 1)
        vals.extend(list(roots) * (M + 1 - j))
    return np.sort(u_n + np.sqrt(T) * np.array(vals))


# --- Lorentz coupling -----------------------------------------------------------


def lorentz_matrix(B, tab: MultiIndexTable) -> np.ndarray:
    """Dense G (Ncoef x Ncoef); production code applies it matrix-free."""
    B = np.asarray(B, dtype=float)
    N = tab.size
    G = np.zeros((N, N))
    eye = np.eye(N)
    for n in range(N):
        G[:, n] = kernels.rotate(eye[n][None, :], B[None, :], tab)[0]
    return G


def lorentz_vector(E, tab: MultiIndexTable) -> np.ndarray:
    g = np.zeros(tab.size)
    for d in range(tab.D):
        g[tab.unit(d)] = E[d]
    return g
