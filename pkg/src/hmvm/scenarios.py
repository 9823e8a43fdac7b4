"""Initial data for the benchmark problems and the run configuration.

Every initial distribution is a sum of Maxwellians per species. The moment
state is expanded about the mixture's own bulk velocity and temperature; the
same component list lets the discrete-velocity oracle sample f directly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .convection import Grid
from .em import EmField, gauss_consistent_initial_E
from .hermite import build_index_table
from .moments import SpeciesParams, SpeciesState, renormalize
from . import kernels

SCENARIOS = ("landau", "two-stream", "weibel", "orszag-tang")


@dataclass
class ScenarioConfig:
    """Run configuration. Zero-valued sizes fall back to scenario defaults."""

    scenario: str = "landau"
    scheme: str = ""  # "1", "2" or "va"; empty picks the scenario default
    N: int = 0
    Nx: int = 0
    Ny: int = 0
    M: int = 0
    cfl: float = 0.1
    t_end: float = 0.0
    diag_every: int = 1
    snapshot_every: int = 0
    out_dir: str = "out"
    threads: int = 1
    compare_dvm: bool = False
    # physics parameters (NaN keeps the scenario default)
    k: float = float("nan")
    A: float = float("nan")
    u0: float = float("nan")
    T0: float = float("nan")
    # oracle resolution
    dvm_Nv: int = 64
    dvm_vmax: float = 0.0
    seed: int = 0

    def resolved(self) -> "ScenarioConfig":
        d = DEFAULTS[self.scenario]
        c = replace(self)
        if c.scenario == "orszag-tang" and c.N:
            c.Nx = c.Nx or c.N
            c.Ny = c.Ny or c.N
        for key, val in d.items():
            cur = getattr(c, key)
            if key in _PHYSICS:
                unset = np.isnan(cur)
            else:
                unset = cur in (0, "", 0.0)
            if unset:
                setattr(c, key, val)
        return c


_PHYSICS = ("k", "A", "u0", "T0")

DEFAULTS = {
    "landau": dict(scheme="va", N=256, M=20, t_end=50.0, k=0.3, A=1e-5, u0=0.0, T0=1.0),
    "two-stream": dict(scheme="2", N=200, M=30, t_end=40.0, k=1.0, A=1e-3, u0=0.2, T0=1e-3),
    "weibel": dict(scheme="2", N=512, M=20, t_end=70.0, k=0.2, A=1e-3, u0=0.5, T0=5e-3),
    "orszag-tang": dict(scheme="2", Nx=32, Ny=32, M=8, t_end=1.0, cfl=0.1, k=1.0, A=0.5, u0=0.5, T0=0.024),
}


@dataclass
class Component:
    """rho_c(x) Maxwellian(u_c(x), T_c); callables take the list of coordinates."""

    density: Callable
    velocity: Callable
    T: float


@dataclass
class InitialData:
    grid: Grid
    species: list[SpeciesParams]
    states: list[SpeciesState]
    em: EmField
    mode: str  # "va" or "vm"
    rho_bound: float | None
    components: list[list[Component]] = field(default_factory=list)
    config: ScenarioConfig | None = None


def mixture_state(grid: Grid, comps: list[Component], M: int, D: int) -> SpeciesState:
    tab = build_index_table(M, D)
    X = grid.centers()
    n = grid.ncell
    rc = [np.broadcast_to(np.asarray(c.density(X), dtype=float), (n,)) for c in comps]
    uc = [np.broadcast_to(np.asarray(c.velocity(X), dtype=float), (n, D)) for c in comps]
    rho = sum(rc)
    mom = sum(r[:, None] * u for r, u in zip(rc, uc))
    u = mom / rho[:, None]
    e2 = sum(r * (np.sum(v**2, axis=1) + D * c.T) for r, v, c in zip(rc, uc, comps))
    T = (e2 - rho * np.sum(u**2, axis=1)) / (D * rho)
    f = np.zeros((n, tab.size))
    for r, v, c in zip(rc, uc, comps):
        g = np.zeros((n, tab.size))
        g[:, 0] = r
        f += kernels.recenter(g, v - u, np.full(n, c.T) - T, tab)
    # exact re-centring; renormalize only pins round-off in the constraints
    return renormalize(f, u, T, tab, where="initialization")


def _const(v):
    return lambda X: np.asarray(v, dtype=float)


def landau(k: float = 0.3, A: float = 1e-5, N: int = 256, M: int = 20) -> InitialData:
    if not k > 0:
        raise ValueError("wave number must be positive")
    grid = Grid((N,), (2 * np.pi / k,))
    comps = [Component(lambda X: 1.0 + A * np.cos(k * X[0]), _const([0.0, 0.0]), 1.0)]
    st = mixture_state(grid, comps, M, 2)
    sp = SpeciesParams("e")
    em = EmField.zeros(grid.ncell)
    em.E = gauss_consistent_initial_E(st.rho, 1.0, grid)
    return InitialData(grid, [sp], [st], em, "va", 1.0, [comps])


def _stream_pair(w1, u1, w2, u2, T):
    return [
        Component(_const(w1), _const(u1), T),
        Component(_const(w2), _const(u2), T),
    ]


def two_stream(N: int = 200, M: int = 30, u0: float = 0.2, T0: float = 1e-3, A: float = 1e-3, k: float = 1.0) -> InitialData:
    grid = Grid((N,), (2 * np.pi / k,))
    comps = _stream_pair(0.5, [u0, 0.0], 0.5, [-u0, 0.0], T0)
    st = mixture_state(grid, comps, M, 2)
    em = EmField.zeros(grid.ncell)
    em.B[:, 2] = A * np.sin(k * grid.centers()[0])
    return InitialData(grid, [SpeciesParams("e")], [st], em, "vm", None, [comps])


def weibel(N: int = 512, M: int = 20, u0: float = 0.5, T0: float = 5e-3, A: float = 1e-3, k: float = 0.2) -> InitialData:
    grid = Grid((N,), (2 * np.pi / k,))
    comps = _stream_pair(1.0 / 6.0, [0.0, u0], 5.0 / 6.0, [0.0, -u0 / 5.0], T0)
    st = mixture_state(grid, comps, M, 2)
    em = EmField.zeros(grid.ncell)
    em.B[:, 2] = A * np.sin(k * grid.centers()[0])
    return InitialData(grid, [SpeciesParams("e")], [st], em, "vm", None, [comps])


def orszag_tang(Nx: int = 32, Ny: int = 32, M: int = 8, Bbar: float = 0.5, vbar: float = 0.5) -> InitialData:
    gamma = 5.0 / 3.0
    L = 2 * np.pi
    grid = Grid((Nx, Ny), (L, L))
    ratio = 1.0  # omega_ce / omega_pe
    ions = SpeciesParams("i", charge=1.0, mass=25.0, omega_ratio=ratio)
    elec = SpeciesParams("e", charge=-1.0, mass=1.0, omega_ratio=ratio)

    def vel(X):
        x, y = X
        return np.stack([-Bbar * vbar * np.sin(y), Bbar * vbar * np.sin(x), np.zeros_like(x)], axis=1)

    comps_i = [Component(_const(gamma**2), vel, 0.024)]
    comps_e = [Component(_const(gamma**2), vel, 0.6)]
    states = [mixture_state(grid, comps_i, M, 3), mixture_state(grid, comps_e, M, 3)]
    em = EmField.zeros(grid.ncell)
    em.B[:, 1] = Bbar * np.sin(2 * grid.centers()[0])
    return InitialData(grid, [ions, elec], states, em, "vm", 0.0, [comps_i, comps_e])


ALFVEN_TIME = 2.0  # L_0 / vbar with vbar = 0.5


def build(config: ScenarioConfig) -> InitialData:
    c = config.resolved()
    if c.scenario == "landau":
        data = landau(c.k, c.A, c.N, c.M)
    elif c.scenario == "two-stream":
        data = two_stream(c.N, c.M, c.u0, c.T0, c.A, c.k)
    elif c.scenario == "weibel":
        data = weibel(c.N, c.M, c.u0, c.T0, c.A, c.k)
    elif c.scenario == "orszag-tang":
        data = orszag_tang(c.Nx or c.N, c.Ny or c.N, c.M, c.A, c.u0)
    else:
        raise ValueError(f"unknown scenario {c.scenario!r}; choose from {SCENARIOS}")
    data.config = c
    return data


# --- configuration files -----------------------------------------------------------


def _coerce(name: str, raw: str):
    typ = {f.name: f.type for f in fields(ScenarioConfig)}[name]
    if typ in ("int", int):
        return int(raw)
    if typ in ("float", float):
        return float(raw)
    if typ in ("bool", bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return raw.strip()


def load_config(path, section: str | None = None) -> ScenarioConfig:
    """Read an INI file; keys of ``[run]`` (or ``section``) map onto ScenarioConfig."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    with open(path) as fh:
        cp.read_file(fh)
    sec = section or ("run" if cp.has_section("run") else cp.sections()[0])
    # keys are matched case-insensitively (no two fields differ only in case)
    known = {f.name.lower(): f.name for f in fields(ScenarioConfig)}
    kw = {}
    for key, raw in cp.items(sec):
        name = known.get(key.replace("-", "_").lower())
        if name is None:
            raise ValueError(f"unknown configuration key {key!r}")
        kw[name] = _coerce(name, raw)
    return ScenarioConfig(**kw)


def dump_config(config: ScenarioConfig, path) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["run"] = {f.name: str(getattr(config, f.name)) for f in fields(ScenarioConfig)}
    with open(path, "w") as fh:
        cp.write(fh)
