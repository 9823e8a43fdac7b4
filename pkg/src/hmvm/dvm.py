"""Discrete-velocity reference solver for 1D2V problems.

f is sampled on a tensor velocity grid [-v_max, v_max]^2 and advanced with
first-order upwinding in x and in v (conservative fluxes, zero flux through
the velocity-box boundary). Deliberately simple: it is an oracle, not a
production solver, so resolution stands in for accuracy.

One step of size dt:
  1. x-transport of every velocity node,
  2. B^{n+1/2} = B^n - dt/2 curl E^n,
  3. E^{n+1} = E^n + dt (curl B^{n+1/2} - J), J from the transported f,
  4. v-transport with E = (E^n + E^{n+1})/2 and B^{n+1/2}, sub-stepped,
  5. B^{n+1} = B^{n+1/2} - dt/2 curl E^{n+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convection import Grid
from .em import EmField, curl
from .scenarios import InitialData


@dataclass
class DvmState:
    f: np.ndarray  # (ncell, Nv, Nv)
    v: np.ndarray  # (Nv,)
    em: EmField

    @property
    def dv(self) -> float:
        return float(self.v[1] - self.v[0])

    def weights(self) -> np.ndarray:
        w = np.full(self.v.size, self.dv)
        w[0] = w[-1] = 0.5 * self.dv
        return w


def default_vmax(data: InitialData) -> float:
    """6 sqrt(T) + |u| over the initial components, rounded up to 0.1."""
    best = 0.0
    X = data.grid.centers()
    for comps in data.components:
        for c in comps:
            u = np.asarray(c.velocity(X), dtype=float)
            best = max(best, 6.0 * math.sqrt(c.T) + float(np.max(np.abs(u))))
    return math.ceil(best * 10.0) / 10.0


def initial_state(data: InitialData, Nv: int, vmax: float | None = None) -> DvmState:
    if data.grid.ndim != 1 or data.states[0].table.D != 2 or len(data.species) != 1:
        raise ValueError("the velocity-grid oracle supports single-species 1D2V problems only")
    if Nv % 2:
        raise ValueError("N_v must be even")
    vmax = default_vmax(data) if not vmax else vmax
    v = np.linspace(-vmax, vmax, Nv)
    V1, V2 = np.meshgrid(v, v, indexing="ij")
    X = data.grid.centers()
    n = data.grid.ncell
    f = np.zeros((n, Nv, Nv))
    for c in data.components[0]:
        rho = np.broadcast_to(np.asarray(c.density(X), dtype=float), (n,))
        u = np.broadcast_to(np.asarray(c.velocity(X), dtype=float), (n, 2))
        r2 = (V1[None] - u[:, 0, None, None]) ** 2 + (V2[None] - u[:, 1, None, None]) ** 2
        f += rho[:, None, None] / (2 * np.pi * c.T) * np.exp(-r2 / (2 * c.T))
    return DvmState(f, v, data.em.copy())


def dvm_moments(state: DvmState, M: int = 2):
    """(rho, u, T, raw) with raw[(a, b)] = sum v1^a v2^b f by trapezoid sums."""
    w = state.weights()
    W = w[:, None] * w[None, :]
    V1, V2 = np.meshgrid(state.v, state.v, indexing="ij")
    raw = {}
    for a in range(M + 1):
        for b in range(M + 1 - a):
            raw[(a, b)] = np.sum(state.f * (W * V1**a * V2**b)[None], axis=(1, 2))
    if M < 2:
        return None, None, None, raw
    rho = raw[(0, 0)]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.stack([raw[(1, 0)] / rho, raw[(0, 1)] / rho], axis=1)
        T = ((raw[(2, 0)] + raw[(0, 2)]) / rho - np.sum(u**2, axis=1)) / 2.0
    return rho, u, T, raw


def _upwind_x(f, v, dt, dx):
    vp = np.maximum(v, 0.0)[None, :, None]
    vm = np.minimum(v, 0.0)[None, :, None]
    fl = np.roll(f, 1, axis=0)
    fr = np.roll(f, -1, axis=0)
    return f - dt / dx * (vp * (f - fl) + vm * (fr - f))


def _upwind_v(f, a, dt, dv, axis):
    """Conservative upwind in one velocity direction, zero boundary flux.

    ``a`` is the (broadcastable) acceleration at nodes; it does not depend on
    the transported coordinate, so node values serve as face values. The end
    nodes own half cells, matching the trapezoid weights, so the trapezoid
    mass is conserved exactly.
    """
    fm = np.moveaxis(f, axis, -1)
    am = np.moveaxis(np.broadcast_to(a, f.shape), axis, -1)
    a_face = 0.5 * (am[..., 1:] + am[..., :-1])
    flux = np.where(a_face > 0, a_face * fm[..., :-1], a_face * fm[..., 1:])
    div = np.zeros_like(fm)
    div[..., :-1] -= flux
    div[..., 1:] += flux
    div[..., 0] *= 2.0
    div[..., -1] *= 2.0
    out = fm + dt / dv * div
    return np.moveaxis(out, -1, axis)


class DvmSolver:
    def __init__(self, data: InitialData, Nv: int = 64, vmax: float | None = None, cfl: float = 0.5):
        self.grid: Grid = data.grid
        self.state = initial_state(data, Nv, vmax)
        v = self.state.v
        dx = self.grid.dx[0]
        self.dt = cfl * min(dx / float(np.max(np.abs(v))), dx)
        self.t = 0.0
        self.mode = data.mode

    def current(self) -> np.ndarray:
        _, _, _, raw = dvm_moments(self.state, 1)
        J = np.zeros((self.grid.ncell, 3))
        J[:, 0] = raw[(1, 0)]
        J[:, 1] = raw[(0, 1)]
        return J

    def step(self, dt: float) -> None:
        st = self.state
        g = self.grid
        dv = st.dv
        st.f = _upwind_x(st.f, st.v, dt, g.dx[0])
        E0 = st.em.E
        if self.mode == "va":
            Bh = np.zeros_like(st.em.B)
            E1 = E0 - dt * self.current()
        else:
            Bh = st.em.B - 0.5 * dt * curl(E0, g)
            E1 = E0 + dt * (curl(Bh, g) - self.current())
        Ebar = 0.5 * (E0 + E1)
        V1 = st.v[None, :, None]
        V2 = st.v[None, None, :]
        a1 = Ebar[:, 0, None, None] + V2 * Bh[:, 2, None, None]
        a2 = Ebar[:, 1, None, None] - V1 * Bh[:, 2, None, None]
        amax = max(float(np.max(np.abs(a1))), float(np.max(np.abs(a2))))
        nsub = max(1, math.ceil(amax * dt / (0.5 * dv)))
        h = dt / nsub
        for _ in range(nsub):
            st.f = _upwind_v(st.f, a1, h, dv, 1)
            st.f = _upwind_v(st.f, a2, h, dv, 2)
        B1 = Bh - 0.5 * dt * curl(E1, g) if self.mode != "va" else st.em.B
        st.em = EmField(E1, B1, Bh)
        self.t += dt

    def energies(self) -> dict:
        st = self.state
        dx = self.grid.dx[0]
        rho, u, T, raw = dvm_moments(st, 2)
        ek = 0.5 * dx * float(np.sum(raw[(2, 0)] + raw[(0, 2)]))
        E = st.em.E
        return {
            "t": self.t,
            "mass": dx * float(np.sum(rho)),
            "E_K": ek,
            "E_E": 0.5 * dx * float(np.sum(E**2)),
            "E_E1": 0.5 * dx * float(np.sum(E[:, 0] ** 2)),
            "E_E2": 0.5 * dx * float(np.sum(E[:, 1] ** 2)),
            "E_B": 0.5 * dx * float(np.sum(st.em.B**2)),
        }


def dvm_run(data: InitialData, Nv: int = 64, vmax: float | None = None, t_end: float = 40.0, sample_every: float = 0.0):
    """Evolve to t_end and return a dict of time series (numpy arrays)."""
    solver = DvmSolver(data, Nv, vmax)
    nsteps = max(1, math.ceil(t_end / solver.dt - 1e-9))
    dt = t_end / nsteps
    every = max(1, int(round(sample_every / dt))) if sample_every > 0 else 1
    rows = [solver.energies()]
    for i in range(1, nsteps + 1):
        solver.step(dt)
        if i % every == 0 or i == nsteps:
            rows.append(solver.energies())
    out = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    out["solver"] = solver
    return out


CHANNELS = ("E_K", "E_E", "E_B")


def log_l2_distance(t_ref, y_ref, t, y, t_max: float | None = None) -> float:
    """Relative L2 distance ||log10 y - log10 y_ref|| / ||log10 y_ref||.

    ``y`` is interpolated onto the reference times in (0, t_max]; samples
    where either history is not strictly positive are dropped.
    """
    t_ref = np.asarray(t_ref, dtype=float)
    y_ref = np.asarray(y_ref, dtype=float)
    hi = t_ref[-1] if t_max is None else t_max
    keep = (t_ref > 0) & (t_ref <= hi + 1e-12)
    tr, yr = t_ref[keep], y_ref[keep]
    yi = np.interp(tr, np.asarray(t, dtype=float), np.asarray(y, dtype=float))
    ok = (yr > 0) & (yi > 0)
    if not np.any(ok):
        raise ValueError("no positive samples to compare")
    a = np.log10(yi[ok])
    b = np.log10(yr[ok])
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def compare_histories(moment: dict, reference: dict, t_max: float | None = None) -> dict[str, float]:
    """Per-channel log-L2 distances; both dicts carry "t" and the CHANNELS keys."""
    return {ch: log_l2_distance(reference["t"], reference[ch], moment["t"], moment[ch], t_max) for ch in CHANNELS}
