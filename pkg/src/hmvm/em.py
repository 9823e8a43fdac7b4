"""Maxwell fields, the Lorentz step and the energy-conserving couplings.

Single- and multi-species runs share one per-cell linear system. With
c_k = (q_k/m_k)(omega_ce/omega_pe) and w = omega_pe/omega_ce it reads

    u_k+ - dt c_k/2 (E+ + u_k+ x B) = u_k* + dt c_k/2 (E^n + u_k* x B)
    E+ + dt w/2 sum_k q_k rho_k u_k+ = E^n + dt curl(B) - dt w/2 sum_k q_k rho_k u_k*

where B is the field held fixed during the step (B^{n+1/2} for the leapfrog
scheme, the Picard iterate of (B^n + B^{n+1})/2 for the implicit one).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .convection import Grid
from .moments import SpeciesParams, SpeciesState


class SchemeError(RuntimeError):
    """Implicit coupling failed to converge."""


@dataclass
class EmField:
    """E and B at integer level n; ``B_half`` is B^{n-1/2} once known."""

    E: np.ndarray
    B: np.ndarray
    B_half: np.ndarray | None = None

    def copy(self) -> "EmField":
        return EmField(self.E.copy(), self.B.copy(), None if self.B_half is None else self.B_half.copy())

    @classmethod
    def zeros(cls, ncell: int) -> "EmField":
        return cls(np.zeros((ncell, 3)), np.zeros((ncell, 3)))


def _diff(F: np.ndarray, grid: Grid, d: int) -> np.ndarray:
    if d >= grid.ndim:
        return np.zeros_like(F)
    return (F[grid.right[d]] - F[grid.left[d]]) / (2.0 * grid.dx[d])


def curl(F: np.ndarray, grid: Grid) -> np.ndarray:
    """Central-difference curl of a (ncell, 3) field."""
    out = np.empty_like(F)
    out[:, 0] = _diff(F[:, 2], grid, 1) - _diff(F[:, 1], grid, 2)
    out[:, 1] = _diff(F[:, 0], grid, 2) - _diff(F[:, 2], grid, 0)
    out[:, 2] = _diff(F[:, 1], grid, 0) - _diff(F[:, 0], grid, 1)
    return out


def divergence(F: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(_diff(F[:, d], grid, d) for d in range(grid.ndim))


def charge_density(states: list[SpeciesState], species: list[SpeciesParams]) -> np.ndarray:
    w = 1.0 / species[0].omega_ratio
    return w * sum(sp.charge * st.rho for st, sp in zip(states, species))


def gauss_consistent_initial_E(rho_free: np.ndarray, rho_bound, grid: Grid) -> np.ndarray:
    """E = -grad(phi) with lap(phi) = -(rho_free - rho_bound), spectrally.

    ``rho_free`` already carries charges and normalisation factors.
    """
    src = np.asarray(rho_free, dtype=float) - rho_bound
    total = np.sum(src) * grid.dV
    scale = np.sum(np.abs(rho_free)) * grid.dV + 1e-300
    if abs(total) > 1e-10 * scale:
        raise ValueError(f"non-neutral total charge {total:.3e}")
    s = src.reshape(grid.shape)
    ks = [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(grid.shape, grid.dx)]
    K = np.meshgrid(*ks, indexing="ij")
    k2 = sum(k**2 for k in K)
    sh = np.fft.fftn(s)
    phi_h = np.zeros_like(sh)
    nz = k2 > 0
    phi_h[nz] = sh[nz] / k2[nz]
    E = np.zeros((grid.ncell, 3))
    for d in range(grid.ndim):
        E[:, d] = np.real(np.fft.ifftn(-1j * K[d] * phi_h)).ravel()
    return E


# --- Lorentz step ----------------------------------------------------------------


def _cross_matrix(B: np.ndarray, D: int) -> np.ndarray:
    """X with (X u) = u x B restricted to the first D components, batched."""
    n = B.shape[0]
    X = np.zeros((n, 3, 3))
    X[:, 0, 1] = B[:, 2]
    X[:, 0, 2] = -B[:, 1]
    X[:, 1, 0] = -B[:, 2]
    X[:, 1, 2] = B[:, 0]
    X[:, 2, 0] = B[:, 1]
    X[:, 2, 1] = -B[:, 0]
    return X[:, :D, :D]


def solve_lorentz_system(
    u_star: list[np.ndarray],
    rho: list[np.ndarray],
    species: list[SpeciesParams],
    E: np.ndarray,
    source: np.ndarray,
    Bbar: np.ndarray,
    dt: float,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Solve the coupled midpoint system for (E^{n+1}, u_k^{n+1}) per cell.

    ``source`` is curl(B) (zero for Vlasov-Ampere). Components of E beyond the
    velocity dimension carry no current and are advanced explicitly.
    """
    n = E.shape[0]
    D = u_star[0].shape[1]
    s = len(species)
    w = 1.0 / species[0].omega_ratio
    X = _cross_matrix(Bbar, D)
    m = D * (1 + s)
    A = np.zeros((n, m, m))
    b = np.zeros((n, m))
    eye = np.eye(D)
    A[:, :D, :D] = eye
    b[:, :D] = E[:, :D] + dt * source[:, :D]
    for k, (us, r, sp) in enumerate(zip(u_star, rho, species)):
        c = sp.force_factor
        o = D * (k + 1)
        A[:, o : o + D, o : o + D] = eye - 0.5 * dt * c * X
        A[:, o : o + D, :D] = -0.5 * dt * c * eye
        b[:, o : o + D] = us + 0.5 * dt * c * (E[:, :D] + np.einsum("nij,nj->ni", X, us))
        A[:, :D, o : o + D] = (0.5 * dt * w * sp.charge * r)[:, None, None] * eye
        b[:, :D] -= 0.5 * dt * w * sp.charge * r[:, None] * us
    x = kernels.solve(A, b)
    if not np.all(np.isfinite(x)):
        kernels.singular_check(A)
        raise FloatingPointError("non-finite Lorentz solve")
    E_new = E + dt * source
    E_new[:, :D] = x[:, :D]
    u_new = [x[:, D * (k + 1) : D * (k + 2)] for k in range(s)]
    return E_new, u_new


def _rotate_high(state: SpeciesState, u_new, Bbar, dt, sp: SpeciesParams) -> SpeciesState:
    tab = state.table
    f = state.f
    Gf = kernels.rotate(f, Bbar, tab)
    f_new = f + dt * sp.force_factor * Gf
    low = tab.order < 2
    f_new[:, low] = f[:, low]
    return SpeciesState(state.rho.copy(), u_new, state.T.copy(), f_new, tab)


def lorentz_update(states, species, em_E, source, Bbar, dt):
    E_new, u_new = solve_lorentz_system(
        [st.u for st in states], [st.rho for st in states], species, em_E, source, Bbar, dt
    )
    out = [_rotate_high(st, u, Bbar, dt, sp) for st, u, sp in zip(states, u_new, species)]
    return out, E_new


def scheme2_step(grid: Grid, states, em: EmField, dt: float, species):
    """Leapfrog B, midpoint (E, u) coupling; ``states`` are post-convection."""
    if em.B_half is None:
        B_half = em.B - 0.5 * dt * curl(em.E, grid)
    else:
        B_half = em.B_half - dt * curl(em.E, grid)
    new_states, E_new = lorentz_update(states, species, em.E, curl(B_half, grid), B_half, dt)
    B_new = B_half - 0.5 * dt * curl(E_new, grid)
    return new_states, EmField(E_new, B_new, B_half)


def scheme1_step(grid: Grid, states, em: EmField, dt: float, species, tol: float = 1e-13, max_iter: int = 200):
    """Implicit midpoint coupling of (E, B, u) by Picard iteration on B^{n+1}."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    curlE_n = curl(em.E, grid)
    B_next = em.B - dt * curlE_n
    scale = max(1.0, float(np.max(np.abs(em.B))))
    for it in range(1, max_iter + 1):
        Bbar = 0.5 * (em.B + B_next)
        new_states, E_new = lorentz_update(states, species, em.E, curl(Bbar, grid), Bbar, dt)
        B_upd = em.B - dt * curl(0.5 * (em.E + E_new), grid)
        change = float(np.max(np.abs(B_upd - B_next)))
        B_next = B_upd
        if change <= tol * scale:
            break
    else:
        raise SchemeError("scheme1 stiff; reduce dt")
    return new_states, EmField(E_new, B_next, None), it


def va_step(states, E: np.ndarray, dt: float, species):
    """Vlasov-Ampere coupling: no magnetic field, E^{n+1} = E^n - dt J^{n+1/2}."""
    zero = np.zeros_like(E)
    return lorentz_update(states, species, E, zero, zero, dt)
