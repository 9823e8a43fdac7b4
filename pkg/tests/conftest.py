"""Shared quadrature oracles.

These evaluate integrals of the truncated Hermite series by tensor
Gauss-Hermite quadrature, independently of the recurrence kernels under test.
"""

import itertools
import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from hmvm.hermite import hermite_all


def quad_raw_moment(beta, u, T, coeffs, tab, Q=None):
    """Integral of prod v_d^beta_d * f over velocity space."""
    Q = Q or tab.M + sum(beta) + 4
    x, w = hermegauss(Q)
    w = w / math.sqrt(2 * math.pi)
    He = hermite_all(tab.M, x)  # (M+1, Q)
    sT = math.sqrt(T)
    # one-dimensional factors I_d[k] = int (u_d + sqrt(T) xi)^b He_k(xi) w(xi) dxi
    I = []
    for d in range(tab.D):
        poly = (u[d] + sT * x) ** beta[d]
        I.append(He @ (w * poly))
    total = 0.0
    for n, alpha in enumerate(tab.alphas):
        term = coeffs[n] * T ** (-alpha.sum() / 2)
        for d in range(tab.D):
            term *= I[d][alpha[d]]
        total += term
    return total


def all_betas(M, D):
    for b in itertools.product(range(M + 1), repeat=D):
        if sum(b) <= M:
            yield b


def random_state(rng, tab, amp=0.05):
    """Admissible random state: rho, u, T and decaying random coefficients."""
    rho = rng.uniform(0.5, 2.0)
    u = rng.uniform(-1, 1, tab.D)
    T = rng.uniform(0.5, 2.0)
    f = amp * rng.standard_normal(tab.size) * rho
    f[0] = rho
    for d in range(tab.D):
        f[tab.unit(d)] = 0.0
    tr = sum(f[tab.unit2(d)] for d in range(tab.D))
    for d in range(tab.D):
        f[tab.unit2(d)] -= tr / tab.D
    return rho, u, T, f


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --- acceptance verdict lines ----------------------------------------------------

_VERDICTS = []


@pytest.fixture
def verdict(request):
    """verdict(tag, ok, detail) writes one PASS/FAIL (or INFO, ok=None) line."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(tag, ok, detail):
        word = "INFO" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{word} {tag}: {detail}"
        _VERDICTS.append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
