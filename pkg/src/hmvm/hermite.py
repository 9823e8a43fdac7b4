"""Multi-index algebra and probabilists' Hermite polynomials.

Coefficients f_alpha are stored in a flat array. The flat ordering is graded
by |alpha|; inside one order, alpha_1 descends first, then alpha_2. For D=3
this coincides with the classical binomial-sum ordering

    N(alpha) - 1 = C(|alpha|+2, 3) + C(alpha_2+alpha_3+1, 2) + alpha_3 ,

so a 0-based flat index equals that formula exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import eigvalsh_tridiagonal

ABSENT = -1


def _enumerate(M: int, D: int) -> np.ndarray:
    out = []
    for k in range(M + 1):
        if D == 2:
            for a1 in range(k, -1, -1):
                out.append((a1, k - a1))
        else:
            for a1 in range(k, -1, -1):
                for a2 in range(k - a1, -1, -1):
                    out.append((a1, a2, k - a1 - a2))
    return np.array(out, dtype=np.int64)


def table_size(M: int, D: int) -> int:
    return comb(M + D, D)


@dataclass(frozen=True, eq=False)
class MultiIndexTable:
    """Flat enumeration of all multi-indices with |alpha| <= M.

    Neighbour tables hold ``ABSENT`` (-1) where the shifted index would leave
    the stored set. ``down[d, n, m]`` is idx(alpha - m e_d), ``up[d, n]`` is
    idx(alpha + e_d), ``swap[d, l, n]`` is idx(alpha - e_d + e_l) and
    ``swap2[d, l, n]`` is idx(alpha - 2 e_d + e_l).
    """

    M: int
    D: int
    alphas: np.ndarray
    order: np.ndarray
    dense: np.ndarray
    down: np.ndarray
    up: np.ndarray
    swap: np.ndarray
    swap2: np.ndarray
    alpha_factorial: np.ndarray
    top: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.alphas.shape[0])

    def idx(self, alpha) -> int:
        a = tuple(int(x) for x in alpha)
        if len(a) != self.D or min(a) < 0 or sum(a) > self.M:
            return ABSENT
        return int(self.dense[a])

    def inv(self, n: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.alphas[n])

    def unit(self, d: int) -> int:
        e = [0] * self.D
        e[d] = 1
        return self.idx(e)

    def unit2(self, d: int) -> int:
        e = [0] * self.D
        e[d] = 2
        return self.idx(e)

    def shifted(self, alpha, *shifts: tuple[int, int]) -> int:
        """idx of alpha + sum(sign * e_d) for (d, sign) pairs."""
        a = list(alpha)
        for d, s in shifts:
            a[d] += s
        return self.idx(a)


@lru_cache(maxsize=None)
def build_index_table(M: int, D: int) -> MultiIndexTable:
    if D not in (2, 3):
        raise ValueError(f"velocity dimension must be 2 or 3, got {D}")
    if M < 2:
        raise ValueError(f"truncation order must be >= 2, got {M}")
    alphas = _enumerate(M, D)
    size = alphas.shape[0]
    assert size == table_size(M, D)
    order = alphas.sum(axis=1)
    dense = np.full((M + 1,) * D, ABSENT, dtype=np.int64)
    for n, a in enumerate(alphas):
        dense[tuple(a)] = n

    def look(a):
        if a.min() < 0 or a.sum() > M:
            return ABSENT
        return dense[tuple(a)]

    down = np.full((D, size, M + 1), ABSENT, dtype=np.int64)
    up = np.full((D, size), ABSENT, dtype=np.int64)
    swap = np.full((D, D, size), ABSENT, dtype=np.int64)
    swap2 = np.full((D, D, size), ABSENT, dtype=np.int64)
    eye = np.eye(D, dtype=np.int64)
    for n, a in enumerate(alphas):
        for d in range(D):
            for m in range(a[d] + 1):
                down[d, n, m] = dense[tuple(a - m * eye[d])]
            up[d, n] = look(a + eye[d])
            for l in range(D):
                swap[d, l, n] = look(a - eye[d] + eye[l])
                swap2[d, l, n] = look(a - 2 * eye[d] + eye[l])
    fact = np.array([np.prod([factorial(int(x)) for x in a]) for a in alphas], dtype=float)
    for arr in (alphas, order, dense, down, up, swap, swap2, fact):
        arr.setflags(write=False)
    top = np.nonzero(order == M)[0]
    top.setflags(write=False)
    return MultiIndexTable(M, D, alphas, order, dense, down, up, swap, swap2, fact, top)


def hermite_eval(k: int, x):
    """He_k(x) by the three-term recurrence; He_{-1} = 0."""
    x = np.asarray(x, dtype=float)
    if k < 0:
        return np.zeros_like(x)[()]
    h_prev = np.zeros_like(x)
    h = np.ones_like(x)
    for n in range(k):
        h_prev, h = h, x * h - n * h_prev
    return h[()]


def hermite_all(kmax: int, x) -> np.ndarray:
    """Stack of He_0..He_kmax evaluated at x, shape (kmax+1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for n in range(1, kmax):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


@lru_cache(maxsize=None)
def _roots_cached(j: int) -> tuple[float, ...]:
    if j < 1:
        raise ValueError("root order must be >= 1")
    if j == 1:
        return (0.0,)
    off = np.sqrt(np.arange(1, j, dtype=float))
    x = eigvalsh_tridiagonal(np.zeros(j), off)
    # one Newton step: He_j' = j He_{j-1}
    h = hermite_all(j, x)
    x = x - h[j] / (j * h[j - 1])
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])  # enforce exact symmetry
    return tuple(float(v) for v in x)


def hermite_roots(j: int) -> np.ndarray:
    return np.array(_roots_cached(j))


def largest_root(j: int) -> float:
    return _roots_cached(j)[-1]


def basis_eval(alpha, T: float, xi) -> float:
    """H_{T,alpha}(xi) = (2 pi)^{-D/2} T^{-(|alpha|+D)/2} prod He_{a_d}(xi_d) exp(-xi_d^2/2)."""
    if T <= 0:
        raise ValueError("scale T must be positive")
    alpha = [int(a) for a in alpha]
    xi = np.asarray(xi, dtype=float)
    D = len(alpha)
    val = (2 * np.pi) ** (-D / 2) * T ** (-(sum(alpha) + D) / 2)
    for d in range(D):
        val = val * hermite_eval(alpha[d], xi[..., d]) * np.exp(-0.5 * xi[..., d] ** 2)
    return val


@dataclass(frozen=True)
class HermiteTable:
    M: int
    roots: dict
    c_max: float
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def hermite_table(M: int, Q: int | None = None) -> HermiteTable:
    Q = M + 8 if Q is None else Q
    if Q < M + 1:
        raise ValueError("quadrature order must be at least M+1")
    roots = {j: hermite_roots(j) for j in range(1, M + 2)}
    nodes, weights = hermegauss(Q)
    return HermiteTable(M, roots, largest_root(M + 1), nodes, weights)
