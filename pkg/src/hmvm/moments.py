"""Adaptive Hermite representation of a distribution and its re-expansion.

A distribution is stored as (rho, u, T, f_alpha) with

    f(v) = sum_alpha f_alpha H_{T,alpha}((v - u)/sqrt(T)).

Its moment generating function is c(z) exp(u.z + T|z|^2/2) with
c(z) = sum f_alpha z^alpha. Changing the basis to (u', T') therefore multiplies
c(z) by exp((u-u').z + (T-T')|z|^2/2); truncated at order M this preserves
every raw moment up to order M exactly. ``kernels.recenter`` applies that
product one velocity direction at a time.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .hermite import MultiIndexTable, build_index_table, hermite_all, hermite_table


class PositivityError(RuntimeError):
    """Density or temperature became non-positive."""


@dataclass(frozen=True)
class SpeciesParams:
    name: str = "e"
    charge: float = 1.0
    mass: float = 1.0
    omega_ratio: float = 1.0  # omega_ce / omega_pe

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("species mass must be positive")
        if not self.omega_ratio > 0:
            raise ValueError("frequency ratio must be positive")

    @property
    def force_factor(self) -> float:
        return self.charge / self.mass * self.omega_ratio


@dataclass
class CellMomentState:
    """One cell's adaptive Hermite representation."""

    rho: float
    u: np.ndarray
    T: float
    coeffs: np.ndarray
    table: MultiIndexTable = field(repr=False)

    @property
    def M(self) -> int:
        return self.table.M

    @property
    def D(self) -> int:
        return self.table.D

    def copy(self) -> "CellMomentState":
        return CellMomentState(self.rho, self.u.copy(), self.T, self.coeffs.copy(), self.table)


@dataclass
class SpeciesState:
    """Batched cell states for one species: rho (n,), u (n,D), T (n,), f (n,Ncoef)."""

    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray
    f: np.ndarray
    table: MultiIndexTable = field(repr=False)

    @property
    def ncell(self) -> int:
        return self.rho.shape[0]

    def copy(self) -> "SpeciesState":
        return SpeciesState(self.rho.copy(), self.u.copy(), self.T.copy(), self.f.copy(), self.table)

    def cell(self, i: int) -> CellMomentState:
        return CellMomentState(float(self.rho[i]), self.u[i].copy(), float(self.T[i]), self.f[i].copy(), self.table)

    @classmethod
    def from_cells(cls, cells: list[CellMomentState]) -> "SpeciesState":
        tab = cells[0].table
        return cls(
            np.array([c.rho for c in cells]),
            np.array([c.u for c in cells]),
            np.array([c.T for c in cells]),
            np.array([c.coeffs for c in cells]),
            tab,
        )


class MacroState(NamedTuple):
    rho: float
    u: np.ndarray
    T: float
    velocity_violation: float
    trace_violation: float


class DerivedMoments(NamedTuple):
    p: np.ndarray
    q: np.ndarray


def from_maxwellian(rho: float, u, T: float, M: int, D: int | None = None) -> CellMomentState:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    D = u.size if D is None else D
    if not rho > 0 or not T > 0:
        raise ValueError("Maxwellian needs rho > 0 and T > 0")
    tab = build_index_table(M, D)
    c = np.zeros(tab.size)
    c[0] = rho
    return CellMomentState(float(rho), np.broadcast_to(u, (D,)).astype(float), float(T), c, tab)


def _tensor_nodes(Q: int, D: int):
    ht_nodes, ht_w = hermite_table(2, Q).nodes, hermite_table(2, Q).weights
    grids = np.meshgrid(*([ht_nodes] * D), indexing="ij")
    xi = np.stack([g.ravel() for g in grids], axis=-1)
    wg = np.meshgrid(*([ht_w] * D), indexing="ij")
    w = np.prod(np.stack([g.ravel() for g in wg], axis=-1), axis=-1)
    return xi, w


def project_to_basis(
    func: Callable[[np.ndarray], np.ndarray], u, T: float, M: int, D: int | None = None, Q: int | None = None
) -> np.ndarray:
    """Coefficients of ``func`` about (u, T) by tensor Gauss-Hermite quadrature.

    f_alpha = T^{|alpha|/2} / alpha! * int f(v) He_alpha((v-u)/sqrt(T)) dv.
    ``func`` maps an (..., D) velocity array to values.
    """
    if not T > 0:
        raise ValueError("scale T must be positive")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    D = u.size if D is None else D
    u = np.broadcast_to(u, (D,))
    Q = M + 8 if Q is None else Q
    tab = build_index_table(M, D)
    xi, w = _tensor_nodes(Q, D)
    sq = np.sqrt(T)
    vals = np.asarray(func(u + sq * xi), dtype=float)
    g = w * np.exp(0.5 * np.sum(xi**2, axis=-1)) * vals * T ** (D / 2)
    He = hermite_all(M, xi.T)  # (M+1, D, nq)
    prod = np.ones((tab.size, xi.shape[0]))
    for d in range(D):
        prod *= He[tab.alphas[:, d], d, :]
    c = prod @ g
    return c * T ** (tab.order / 2) / tab.alpha_factorial


def maxwellian_pdf(rho: float, u, T: float):
    u = np.asarray(u, dtype=float)

    def f(v):
        D = v.shape[-1]
        return rho * (2 * np.pi * T) ** (-D / 2) * np.exp(-np.sum((v - u) ** 2, axis=-1) / (2 * T))

    return f


# --- batched helpers ---------------------------------------------------------


def raw_macros(rho, u, T, f, tab: MultiIndexTable):
    """Native (rho, u, T) of coefficient rows stored in basis (u, T)."""
    D = tab.D
    rho_n = f[:, 0].copy()
    e1 = [tab.unit(d) for d in range(D)]
    e2 = [tab.unit2(d) for d in range(D)]
    mom1 = rho_n[:, None] * u + f[:, e1]
    second = np.zeros_like(rho_n)
    for d in range(D):
        second += 2.0 * f[:, e2[d]] + 2.0 * f[:, e1[d]] * u[:, d] + rho_n * (u[:, d] ** 2 + T)
    with np.errstate(divide="ignore", invalid="ignore"):
        u_n = mom1 / rho_n[:, None]
        T_n = (second - rho_n * np.sum(u_n**2, axis=1)) / (D * rho_n)
    return rho_n, u_n, T_n


def renormalize(f, u, T, tab: MultiIndexTable, where: str = "update") -> SpeciesState:
    """Recompute native (rho, u, T) and recenter rows onto it."""
    rho_n, u_n, T_n = raw_macros(None, u, T, f, tab)
    bad = ~(rho_n > 0) | ~(T_n > 0) | ~np.all(np.isfinite(u_n), axis=1)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise PositivityError(
            f"positivity loss in {where}: cell {i} rho={rho_n[i]:.6g} T={T_n[i]:.6g}"
        )
    g = kernels.recenter(f, u - u_n, T - T_n, tab)
    # pin the constraint entries exactly
    g[:, 0] = rho_n
    for d in range(tab.D):
        g[:, tab.unit(d)] = 0.0
    e2 = [tab.unit2(d) for d in range(tab.D)]
    tr = g[:, e2].sum(axis=1) / tab.D
    g[:, e2] -= tr[:, None]
    return SpeciesState(rho_n, u_n, T_n, g, tab)


# --- single-cell API ------------------------------------------------------


def macro_from_coeffs(state: CellMomentState) -> MacroState:
    tab = state.table
    c = state.coeffs
    if not c[0] > 0:
        raise PositivityError(f"positivity loss: f_0 = {c[0]:.6g}")
    r, un, Tn = raw_macros(None, state.u[None, :], np.array([state.T]), c[None, :], tab)
    vv = max(abs(c[tab.unit(d)]) for d in range(tab.D))
    tv = abs(sum(c[tab.unit2(d)] for d in range(tab.D)))
    return MacroState(float(r[0]), un[0], float(Tn[0]), float(vv), float(tv))


def recenters(state: CellMomentState, u_new, T_new: float) -> CellMomentState:
    if not T_new > 0:
        raise ValueError("T_new must be positive")
    u_new = np.broadcast_to(np.asarray(u_new, dtype=float), (state.D,))
    f = kernels.recenter(
        state.coeffs[None, :], (state.u - u_new)[None, :], np.array([state.T - T_new]), state.table
    )[0]
    return CellMomentState(state.rho, u_new.copy(), float(T_new), f, state.table)


def renormalized(state: CellMomentState) -> CellMomentState:
    s = renormalize(state.coeffs[None, :], state.u[None, :], np.array([state.T]), state.table)
    return s.cell(0)


def raw_moments(state: CellMomentState) -> np.ndarray:
    """Raw moments int v^beta f dv for every stored beta (|beta| <= M)."""
    tab = state.table
    # expanding about (0, 0) turns c(z) into the moment generating function
    g = kernels.recenter(state.coeffs[None, :], state.u[None, :], np.array([state.T]), tab)[0]
    return g * tab.alpha_factorial


def derived_moments(state: CellMomentState) -> DerivedMoments:
    tab = state.table
    D = tab.D
    c = state.coeffs
    p = np.zeros((D, D))
    for i in range(D):
        for j in range(D):
            a = [0] * D
            a[i] += 1
            a[j] += 1
            p[i, j] = (state.rho * state.T if i == j else 0.0) + (2.0 if i == j else 1.0) * c[tab.idx(a)]
    q = np.zeros(D)
    if tab.M >= 3:
        for i in range(D):
            a = [0] * D
            a[i] = 3
            q[i] = 2.0 * c[tab.idx(a)]
            for d in range(D):
                b = [0] * D
                b[d] += 2
                b[i] += 1
                q[i] += c[tab.idx(b)]
    return DerivedMoments(p, q)


# --- snapshot I/O ------------------------------------------------------------

_MAGIC = b"HMVMSNP1"
_HEADER = struct.Struct("<8s4q")


def write_snapshot(path, state: SpeciesState) -> None:
    """Little-endian binary: magic, (M, D, Ncoef, ncell) int64, then per cell
    rho, u[D], T, coeffs[Ncoef] as float64."""
    tab = state.table
    n = state.ncell
    rows = np.concatenate([state.rho[:, None], state.u, state.T[:, None], state.f], axis=1)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, tab.M, tab.D, tab.size, n))
        fh.write(rows.astype("<f8").tobytes())


def read_snapshot(path) -> SpeciesState:
    with open(path, "rb") as fh:
        magic, M, D, N, n = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError("not a snapshot file")
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(n, 2 + D + N)
    tab = build_index_table(M, D)
    data = data.astype(float)
    return SpeciesState(data[:, 0].copy(), data[:, 1 : 1 + D].copy(), data[:, 1 + D].copy(), data[:, 2 + D :].copy(), tab)
