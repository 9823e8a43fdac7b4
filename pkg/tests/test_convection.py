import math

import numpy as np
import pytest

from hmvm import closure
from hmvm.convection import (
    Grid,
    cfl_dt,
    convection_step,
    hll_flux,
    nonconservative_correction,
    reconstruct,
    spatial_rate,
    speed_bounds,
)
from hmvm.hermite import basis_eval, build_index_table, largest_root
from hmvm.moments import SpeciesState, project_to_basis, renormalize
from hmvm.scenarios import landau


def smooth_state(N, M=4, D=2, seed=3, L=2 * np.pi):
    tab = build_index_table(M, D)
    rng = np.random.default_rng(seed)
    pert = 0.02 * rng.standard_normal(tab.size)
    g = Grid((N,), (L,))
    x = g.centers()[0] * 2 * np.pi / L
    rho = 1 + 0.3 * np.sin(x)
    u = np.stack([0.2 * np.cos(x), 0.1 * np.sin(2 * x)] + [0.05 * np.cos(x)] * (D - 2), 1)
    T = 1 + 0.2 * np.cos(x)
    f = np.zeros((N, tab.size))
    f[:, 0] = rho
    hi = tab.order >= 2
    f[:, hi] = np.outer(1 + 0.5 * np.sin(x), pert[hi])
    return g, renormalize(f, u, T, tab)


def uniform_state(n, M=3, D=2, u=(0.1, -0.2), T=0.8):
    tab = build_index_table(M, D)
    f = np.zeros((n, tab.size))
    f[:, 0] = 1.2
    f[:, tab.idx((2, 1) + (0,) * (D - 2)) if M >= 3 else -1] = 0.01
    return renormalize(f, np.tile(np.asarray(u, float), (n, 1)), np.full(n, T), tab)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((3,), (1.0,))
    with pytest.raises(ValueError):
        Grid((8,), (0.0,))
    with pytest.raises(ValueError):
        Grid((8, 8, 8), (1.0, 1.0, 1.0))
    g = Grid((4, 5), (2.0, 5.0))
    assert g.ncell == 20 and g.dx == (0.5, 1.0) and g.dV == 0.5
    # right neighbour in direction 1 of cell (0, 4) wraps to (0, 0)
    assert g.right[1][4] == 0 and g.left[0][0] == 15


def test_cfl_dt():
    tab = build_index_table(2, 2)
    f = np.zeros((10, tab.size))
    f[:, 0] = 1.0
    st = SpeciesState(np.ones(10), np.zeros((10, 2)), np.ones(10), f, tab)
    g = Grid((10,), (1.0,))
    assert cfl_dt(g, [st], 0.1) == pytest.approx(0.1 * 0.1 / math.sqrt(3), rel=1e-14)
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            cfl_dt(g, [st], bad)
    st.T[3] = np.nan
    with pytest.raises(FloatingPointError):
        cfl_dt(g, [st], 0.1)


def test_cfl_uniform_for_two_stream():
    from hmvm.scenarios import two_stream

    d = two_stream(N=16, M=6)
    lo, hi = speed_bounds(d.states[0], 0)
    assert np.ptp(hi) < 1e-15 and cfl_dt(d.grid, d.states, 0.1) > 0


def test_reconstruct_constant_and_linear():
    g = Grid((12,), (1.0,))
    st = uniform_state(12)
    faces = reconstruct(g, st, 0)
    for a in ("rho", "u", "T", "f"):
        assert np.array_equal(getattr(faces.left, a), getattr(st, a))
        assert np.array_equal(getattr(faces.right, a), getattr(st, a))
    # linear density: interior faces reproduced exactly
    x = g.centers()[0]
    st.rho = 1.0 + 0.5 * x
    faces = reconstruct(g, st, 0)
    inner = slice(1, 10)
    xf = x[inner] + 0.5 * g.dx[0]
    assert np.allclose(faces.left.rho[inner], 1 + 0.5 * xf, atol=1e-15)
    assert np.allclose(faces.right.rho[inner], 1 + 0.5 * xf, atol=1e-15)


def test_reconstruct_second_order():
    errs = []
    for N in (32, 64, 128, 256):
        g = Grid((N,), (2 * np.pi,))
        st = uniform_state(N)
        x = g.centers()[0]
        st.rho = 1 + 0.5 * np.cos(x)
        faces = reconstruct(g, st, 0)
        exact = 1 + 0.5 * np.cos(x + 0.5 * g.dx[0])
        errs.append(np.max(np.abs(faces.left.rho - exact)))
    slopes = -np.diff(np.log2(errs))
    assert np.all(np.abs(slopes - 2) < 0.3)


def test_first_order_fallback():
    g = Grid((8,), (1.0,))
    st = uniform_state(8)
    st.rho[4] = 1e-3  # steep one-sided hole: unlimited slopes go negative
    st.rho[5] = 2.0
    faces = reconstruct(g, st, 0)
    assert faces.first_order.any()
    bad = faces.first_order
    assert np.array_equal(faces.left.rho[bad], st.rho[bad])
    assert np.all(faces.left.rho > 0) and np.all(faces.right.rho > 0)


def _exact_flux(st, d):
    from hmvm import kernels

    return kernels.vmul(st.f, st.u, st.T, d, st.table)


def test_hll_consistency():
    st = uniform_state(6, M=4)
    faces = reconstruct(Grid((6,), (1.0,)), st, 0)
    F = hll_flux(faces)
    assert np.allclose(F.flux, _exact_flux(st, 0), atol=1e-14)
    # all three branches agree for identical states
    for lam in ((0.5, 2.0), (-3.0, -1.0), (-1.0, 1.0)):
        G = hll_flux(faces, np.full(6, lam[0]), np.full(6, lam[1]))
        assert np.allclose(G.flux, F.flux, atol=1e-14)


def test_hll_supersonic_branch():
    g = Grid((6,), (1.0,))
    st = uniform_state(6, M=4, u=(5.0, 0.0), T=0.1)
    st.rho = st.rho * np.linspace(1.0, 1.5, 6)
    st.f[:, 0] = st.rho
    faces = reconstruct(g, st, 0)
    F = hll_flux(faces)
    assert np.all(F.lam_left >= 0)
    # in the face basis, exact flux of the left state
    from hmvm import kernels

    fl = kernels.recenter(faces.left.f, faces.left.u - F.u, faces.left.T - F.T, st.table)
    assert np.allclose(F.flux, kernels.vmul(fl, F.u, F.T, 0, st.table), atol=1e-13)


def test_hll_matches_velocity_space_oracle():
    """Riemann data, M=5: HLL formed pointwise in v and projected by quadrature."""
    M, D = 5, 2
    tab = build_index_table(M, D)
    rng = np.random.default_rng(7)

    def state(rho, u, T):
        f = np.zeros(tab.size)
        f[0] = rho
        hi = tab.order >= 2
        f[hi] = 0.03 * rho * rng.standard_normal(hi.sum())
        return f, np.array(u), T

    fL, uL, TL = state(1.0, [0.3, 0.1], 1.0)
    fR, uR, TR = state(0.125, [-0.2, 0.0], 0.8)
    rows = lambda a, b: np.stack([a, b])
    L = renormalize(rows(fL, fL), rows(uL, uL), np.array([TL, TL]), tab)
    R = renormalize(rows(fR, fR), rows(uR, uR), np.array([TR, TR]), tab)
    from hmvm.convection import InterfaceStates

    faces = InterfaceStates(0, SpeciesState(L.rho[:1], L.u[:1], L.T[:1], L.f[:1], tab),
                            SpeciesState(R.rho[:1], R.u[:1], R.T[:1], R.f[:1], tab), np.zeros(1, bool))
    F = hll_flux(faces)
    lamL, lamR = float(F.lam_left[0]), float(F.lam_right[0])

    def series(f, u, T):
        return lambda v: sum(f[n] * basis_eval(a, T, (v - u) / math.sqrt(T)) for n, a in enumerate(tab.alphas))

    sL = series(L.f[0], L.u[0], L.T[0])
    sR = series(R.f[0], R.u[0], R.T[0])

    def hll_v(v):
        pl, pr = v[..., 0] * sL(v), v[..., 0] * sR(v)
        return (lamR * pl - lamL * pr + lamL * lamR * (sR(v) - sL(v))) / (lamR - lamL)

    ref = project_to_basis(hll_v, F.u[0], float(F.T[0]), M, D, Q=40)
    assert np.max(np.abs(F.flux[0] - ref)) < 1e-8


def test_degenerate_fan_upwinds():
    st = uniform_state(6, M=3)
    faces = reconstruct(Grid((6,), (1.0,)), st, 0)
    F = hll_flux(faces, np.zeros(6), np.zeros(6))
    assert np.allclose(F.flux, _exact_flux(st, 0), atol=1e-14)


def test_nonconservative_zero_for_continuous_fields():
    g = Grid((8,), (1.0,))
    st = uniform_state(8, M=4)
    faces = reconstruct(g, st, 0)
    a, b = nonconservative_correction(faces, hll_flux(faces), g.dx[0])
    assert not np.any(a) and not np.any(b)


def test_constant_state_unchanged():
    g = Grid((8,), (1.0,))
    st = uniform_state(8, M=4)
    new = convection_step(g, st, 0.01)
    assert np.allclose(new.f, st.f, atol=1e-14, rtol=0)
    assert np.allclose(new.u, st.u, atol=1e-15) and np.allclose(new.T, st.T, atol=1e-15)


def _totals(g, st):
    D = st.table.D
    return np.array([
        g.dV * st.rho.sum(),
        *(g.dV * (st.rho[:, None] * st.u).sum(0)),
        g.dV * (st.rho * (np.sum(st.u**2, 1) + D * st.T)).sum(),
    ])


@pytest.mark.parametrize("D", [2, 3])
def test_step_conserves_mass_momentum_energy(D):
    g, st = smooth_state(32, M=4, D=D)
    dt = cfl_dt(g, [st], 0.3)
    a = _totals(g, st)
    b = _totals(g, convection_step(g, st, dt))
    assert np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))) < 1e-13


def test_2d_grid_step_conserves():
    tab = build_index_table(3, 3)
    g = Grid((8, 6), (2 * np.pi, 2 * np.pi))
    x, y = g.centers()
    f = np.zeros((g.ncell, tab.size))
    rho = 1 + 0.2 * np.sin(x) * np.cos(y)
    f[:, 0] = rho
    u = np.stack([0.1 * np.sin(y), 0.1 * np.sin(x), 0 * x], 1)
    st = renormalize(f, u, 1 + 0.1 * np.cos(x + y), tab)
    a = _totals(g, st)
    b = _totals(g, convection_step(g, st, cfl_dt(g, [st], 0.2)))
    assert np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))) < 1e-13


def test_mass_over_many_steps():
    g, st = smooth_state(16, M=3)
    m0 = g.dV * st.rho.sum()
    dt = cfl_dt(g, [st], 0.2)
    for _ in range(1000):
        st = convection_step(g, st, dt)
    assert abs(g.dV * st.rho.sum() - m0) / m0 < 1e-13


def test_landau_one_step_kinetic_energy():
    d = landau(0.3, 0.01, N=64, M=8)
    st = d.states[0]
    dt = cfl_dt(d.grid, [st], 0.1)
    new = convection_step(d.grid, st, dt)
    a, b = _totals(d.grid, st)[-1], _totals(d.grid, new)[-1]
    assert abs(a - b) / a < 1e-12


def test_spatial_operator_converges_to_moment_system():
    """Semi-discrete rate at a fixed point vs the term-wise regularized rhs."""
    errs = []
    for N in (32, 64, 128, 256):
        g, st = smooth_state(N)
        i = N // 4  # x = pi/2 + dx/2 ... fixed fraction of the domain
        dt = 1e-7
        s2 = convection_step(g, st, dt)
        k = np.fft.fftfreq(N, 1 / N)

        def der(a):
            if a.ndim > 1:
                return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(a, axis=0), axis=0))
            return np.real(np.fft.ifft(1j * k * np.fft.fft(a)))

        grad = closure.Gradient(der(st.rho)[i], der(st.u)[i], der(st.T)[i], der(st.f)[i])
        r = closure.convective_rhs(st.cell(i), {0: grad}, regularized=True)
        hi = st.table.order >= 2
        e = max(
            abs((s2.rho[i] - st.rho[i]) / dt + r.rho),
            np.max(np.abs((s2.u[i] - st.u[i]) / dt + r.u)),
            abs((s2.T[i] - st.T[i]) / dt + r.T),
            np.max(np.abs((s2.f[i, hi] - st.f[i, hi]) / dt + r.f[hi])),
        )
        errs.append(e)
    slopes = -np.diff(np.log2(errs))
    assert np.all(slopes > 1.7), (errs, slopes)
