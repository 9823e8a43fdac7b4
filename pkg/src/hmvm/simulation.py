"""Time loop: convection, Lorentz/Maxwell coupling, re-centering, audits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .convection import Grid, cfl_dt, convection_step, speed_bounds
from .diagnostics import DiagnosticsRecord, audit
from .em import EmField, scheme1_step, scheme2_step, va_step
from .moments import SpeciesParams, SpeciesState
from .scenarios import InitialData

log = logging.getLogger(__name__)


@dataclass
class Simulation:
    """Strang-type split integrator with a fixed time step.

    The leapfrog scheme conserves its modified energy only when every step
    uses the same dt, so dt is chosen from the CFL condition once, at t=0,
    and shortened so that ``t_end`` is hit exactly. If the running CFL number
    later exceeds ``cfl_limit`` the step is halved and the leapfrog restarts
    from the integer level (logged; counted in ``dt_changes``).
    """

    grid: Grid
    species: list[SpeciesParams]
    states: list[SpeciesState]
    em: EmField
    scheme: str
    cfl: float = 0.1
    rho_bound: float | None = None
    dt: float = 0.0
    t: float = 0.0
    step_count: int = 0
    dt_changes: int = 0
    picard_iters: list[int] = field(default_factory=list)
    records: list[DiagnosticsRecord] = field(default_factory=list)
    cfl_limit: float = 0.0

    def __post_init__(self):
        if self.scheme not in ("1", "2", "va"):
            raise ValueError("scheme must be '1', '2' or 'va'")
        if len({sp.omega_ratio for sp in self.species}) != 1:
            raise ValueError("all species must share omega_ce/omega_pe")
        if self.cfl_limit == 0.0:
            self.cfl_limit = min(0.9, 2.0 * self.cfl)

    @classmethod
    def from_initial(cls, data: InitialData, scheme: str | None = None, cfl: float | None = None) -> "Simulation":
        c = data.config
        scheme = scheme or (c.scheme if c is not None else ("va" if data.mode == "va" else "2"))
        cfl = cfl if cfl is not None else (c.cfl if c is not None else 0.1)
        return cls(data.grid, data.species, [s.copy() for s in data.states], data.em.copy(), scheme, cfl, data.rho_bound)

    # ------------------------------------------------------------------

    def plan(self, t_end: float) -> int:
        """Fix dt from the CFL condition so that t_end is a whole number of steps."""
        dt = self.cfl_step()
        remaining = t_end - self.t
        n = max(1, math.ceil(remaining / dt - 1e-9))
        self.dt = remaining / n
        return n

    def cfl_step(self) -> float:
        dt = cfl_dt(self.grid, self.states, self.cfl)
        if self.scheme != "va":
            # light waves of the central-difference Maxwell solver
            dt = min(dt, self.cfl * min(self.grid.dx))
        return dt

    def current_cfl(self) -> float:
        rate = 0.0
        for st in self.states:
            for d in range(self.grid.ndim):
                lo, hi = speed_bounds(st, d)
                rate = max(rate, float(np.max(np.maximum(np.abs(lo), np.abs(hi)))) / self.grid.dx[d])
        return rate * self.dt

    def audit(self) -> DiagnosticsRecord:
        ref = self.records[0] if self.records else None
        dt = self.dt if self.scheme == "2" and self.dt > 0 else None
        return audit(self.grid, self.states, self.em, self.species, dt, self.step_count, self.t, self.rho_bound, ref)

    def step(self) -> None:
        dt = self.dt
        if self.current_cfl() > self.cfl_limit:
            self.dt = dt = 0.5 * dt
            self.dt_changes += 1
            self.em.B_half = None
            log.warning("CFL exceeded; halving dt to %.4g at t=%.4g", dt, self.t)
        star = [convection_step(self.grid, st, dt) for st in self.states]
        if self.scheme == "va":
            self.states, E = va_step(star, self.em.E, dt, self.species)
            self.em = EmField(E, self.em.B, self.em.B_half)
        elif self.scheme == "2":
            self.states, self.em = scheme2_step(self.grid, star, self.em, dt, self.species)
        else:
            self.states, self.em, it = scheme1_step(self.grid, star, self.em, dt, self.species)
            self.picard_iters.append(it)
        self.t += dt
        self.step_count += 1

    def run(self, t_end: float | None = None, nsteps: int | None = None, diag_every: int = 1, callback=None):
        """Advance to ``t_end`` (or by ``nsteps``), auditing every ``diag_every`` steps."""
        if nsteps is None:
            nsteps = self.plan(t_end)
        elif self.dt <= 0:
            self.dt = self.cfl_step()
        if not self.records:
            self.records.append(self.audit())
            if callback:
                callback(self, self.records[-1])
        for i in range(1, nsteps + 1):
            self.step()
            if i % diag_every == 0 or i == nsteps:
                self.records.append(self.audit())
                if callback:
                    callback(self, self.records[-1])
        return self.records
