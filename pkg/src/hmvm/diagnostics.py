"""Conserved-quantity audits, marginals and the damping-rate fit."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .convection import Grid
from .em import EmField, charge_density, curl, divergence
from .hermite import hermite_all
from .moments import SpeciesParams, SpeciesState


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    mass: float
    mass_species: list[float]
    kinetic: list[float]
    E_E: float
    E_E1: float
    E_E2: float
    E_E3: float
    E_B: float
    E_B_exact: float
    E_total_modified: float
    E_total_exact: float
    V_mass: float = 0.0
    V_energy: float = 0.0
    gauss_residual: float = 0.0
    species_names: list[str] = field(default_factory=list)

    def row(self) -> dict:
        r = {"step": self.step, "t": self.t, "mass": self.mass}
        for name, ek in zip(self.species_names, self.kinetic):
            r[f"E_K_{name}"] = ek
        r.update(
            E_E=self.E_E,
            E_E1=self.E_E1,
            E_E2=self.E_E2,
            E_B=self.E_B,
            E_total_modified=self.E_total_modified,
            E_total_exact=self.E_total_exact,
            V_mass=self.V_mass,
            V_energy=self.V_energy,
            gauss_residual=self.gauss_residual,
        )
        return r


def kinetic_energy(grid: Grid, state: SpeciesState, sp: SpeciesParams) -> float:
    D = state.table.D
    return 0.5 * sp.mass * grid.dV * float(np.sum(state.rho * (np.sum(state.u**2, axis=1) + D * state.T)))


def audit(
    grid: Grid,
    states: list[SpeciesState],
    em: EmField,
    species: list[SpeciesParams],
    dt: float | None = None,
    step: int = 0,
    t: float = 0.0,
    rho_bound=None,
    reference: DiagnosticsRecord | None = None,
) -> DiagnosticsRecord:
    """Energies and residuals at integer time level.

    The modified magnetic energy uses B^{n-1/2}.B^{n+1/2}, which for the
    leapfrog scheme equals |B^n|^2 - dt^2/4 |curl E^n|^2 when dt is fixed.
    With ``dt=None`` the modified and exact forms coincide.
    """
    r2 = species[0].omega_ratio ** 2
    dV = grid.dV
    ms = [dV * float(np.sum(st.rho)) for st in states]
    mass = float(sum(sp.mass * m for sp, m in zip(species, ms)))
    ek = [kinetic_energy(grid, st, sp) for st, sp in zip(states, species)]
    Ec = [0.5 * r2 * dV * float(np.sum(em.E[:, i] ** 2)) for i in range(3)]
    EE = sum(Ec)
    EB_exact = 0.5 * r2 * dV * float(np.sum(em.B**2))
    if dt is None:
        EB = EB_exact
    else:
        cE = curl(em.E, grid)
        EB = 0.5 * r2 * dV * float(np.sum(em.B**2 - 0.25 * dt * dt * cE**2))
    tot_mod = sum(ek) + EE + EB
    tot_ex = sum(ek) + EE + EB_exact
    rho_c = charge_density(states, species)
    if rho_bound is None:
        rho_bound = float(np.mean(rho_c))
    gauss = float(np.max(np.abs(divergence(em.E, grid) - (rho_c - rho_bound))))
    rec = DiagnosticsRecord(
        step, t, mass, ms, ek, EE, Ec[0], Ec[1], Ec[2], EB, EB_exact, tot_mod, tot_ex,
        gauss_residual=gauss, species_names=[sp.name for sp in species],
    )
    if reference is not None:
        rec.V_mass = abs(mass - reference.mass) / abs(reference.mass)
        rec.V_energy = abs(tot_mod - reference.E_total_modified) / abs(reference.E_total_modified)
    return rec


def species_mass_drift(records: list[DiagnosticsRecord]) -> list[float]:
    m0 = records[0].mass_species
    return [max(abs(r.mass_species[k] - m0[k]) / abs(m0[k]) for r in records) for k in range(len(m0))]


class CsvWriter:
    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._w = None

    def write(self, rec: DiagnosticsRecord) -> None:
        row = rec.row()
        if self._w is None:
            self._w = csv.DictWriter(self._fh, fieldnames=list(row))
            self._w.writeheader()
        self._w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class MarginalSlice:
    v: np.ndarray
    g: np.ndarray  # (ncell, len(v))
    axis: int


def marginal(state: SpeciesState, axis: int, v) -> MarginalSlice:
    """g(x, v_i) = integral of f over the other velocity components.

    Only coefficients whose other indices vanish survive the integration.
    """
    tab = state.table
    v = np.asarray(v, dtype=float)
    others = [d for d in range(tab.D) if d != axis]
    keep = np.all(tab.alphas[:, others] == 0, axis=1)
    ks = tab.alphas[keep, axis]
    coef = state.f[:, keep]  # (ncell, nk)
    T = state.T[:, None]
    xi = (v[None, :] - state.u[:, axis, None]) / np.sqrt(T)
    He = hermite_all(tab.M, xi)  # (M+1, ncell, nv)
    base = np.exp(-0.5 * xi**2) / np.sqrt(2 * np.pi * T)
    g = np.zeros_like(xi)
    for j, k in enumerate(ks):
        g += coef[:, j, None] * T ** (-k / 2) * He[k]
    return MarginalSlice(v, g * base, axis)


def find_peaks(y: np.ndarray) -> np.ndarray:
    """Indices of strict maxima over a centred 5-sample window."""
    y = np.asarray(y)
    out = []
    for i in range(2, len(y) - 2):
        w = y[i - 2 : i + 3]
        if y[i] == w.max() and np.sum(w == y[i]) == 1:
            out.append(i)
    return np.array(out, dtype=int)


def damping_fit(t, E_E, skip_first: bool = True, t_max: float | None = None) -> float:
    """Least-squares slope of log(2 E_E)/2 through the peaks of E_E.

    ``t_max`` drops peaks after that time (default: keep all).
    """
    t = np.asarray(t, dtype=float)
    E_E = np.asarray(E_E, dtype=float)
    pk = find_peaks(E_E)
    if skip_first and pk.size:
        pk = pk[1:]
    if t_max is not None:
        pk = pk[t[pk] <= t_max]
    if pk.size < 3:
        raise ValueError(f"need at least 3 peaks for the fit, found {pk.size}")
    y = 0.5 * np.log(2.0 * E_E[pk])
    slope, _ = np.polyfit(t[pk], y, 1)
    return float(slope)


def records_to_arrays(records: list[DiagnosticsRecord]) -> dict[str, np.ndarray]:
    keys = [k for k, v in asdict(records[0]).items() if isinstance(v, (int, float))]
    return {k: np.array([getattr(r, k) for r in records]) for k in keys}
