"""Hot per-cell kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from the ``HMVM_BACKEND`` environment
variable (``numba`` or ``numpy``). Without numba installed the numpy path is
used regardless. Both paths take the same arguments and are interchangeable;
``tests/test_kernels.py`` checks them against each other.

All kernels work on batches: ``f`` has shape (ncell, Ncoef).
"""

from __future__ import annotations

import os

import numpy as np

from .hermite import MultiIndexTable

_REQUESTED = os.environ.get("HMVM_BACKEND", "numba").strip().lower()
if _REQUESTED not in ("numba", "numpy"):
    raise ValueError(f"HMVM_BACKEND must be 'numba' or 'numpy', got {_REQUESTED!r}")

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

BACKEND = "numba" if (_REQUESTED == "numba" and HAVE_NUMBA) else "numpy"
PARALLEL = os.environ.get("HMVM_PARALLEL", "0") == "1"


# ---------------------------------------------------------------------------
# shared helpers


def shift_kernel(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    """Taylor coefficients of exp(a z + b z^2 / 2) up to z^M, batched.

    a, b have shape (n,); result has shape (n, M+1).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    K = np.zeros(a.shape + (M + 1,))
    K[..., 0] = 1.0
    if M >= 1:
        K[..., 1] = a
    for m in range(1, M):
        K[..., m + 1] = (a * K[..., m] + b * K[..., m - 1]) / (m + 1)
    return K


def _padded(idx: np.ndarray, size: int) -> np.ndarray:
    out = idx.copy()
    out[out < 0] = size
    return out


class _NumpyTables:
    """Padded index tables; absent entries point at an appended zero column."""

    def __init__(self, tab: MultiIndexTable):
        N = tab.size
        self.N = N
        self.down = _padded(tab.down, N)
        self.up = _padded(tab.up, N)
        self.swap = _padded(tab.swap, N)
        self.swap2 = _padded(tab.swap2, N)
        self.alphas = tab.alphas.astype(float)


_np_cache: dict[int, _NumpyTables] = {}


def _np_tables(tab: MultiIndexTable) -> _NumpyTables:
    key = id(tab)
    t = _np_cache.get(key)
    if t is None:
        t = _NumpyTables(tab)
        _np_cache[key] = t
    return t


def _pad(f: np.ndarray) -> np.ndarray:
    return np.concatenate([f, np.zeros(f.shape[:-1] + (1,))], axis=-1)


# ---------------------------------------------------------------------------
# numpy implementations


def recenter_np(f, du, dT, tab: MultiIndexTable):
    """Re-expand coefficient rows from basis (u, T) to (u - du, T - dT)."""
    t = _np_tables(tab)
    M, D = tab.M, tab.D
    a = np.asarray(f, dtype=float)
    for d in range(D):
        K = shift_kernel(du[:, d], dT, M)
        ap = _pad(a)
        out = np.zeros_like(a)
        for m in range(M + 1):
            out += K[:, m, None] * ap[:, t.down[d, :, m]]
        a = out
    return a


def vmul_np(f, u, T, d, tab: MultiIndexTable):
    """Coefficients of P_M[v_d f] in the same basis."""
    t = _np_tables(tab)
    fp = _pad(f)
    return (
        (t.alphas[:, d] + 1.0) * fp[:, t.up[d]]
        + u[:, d, None] * f
        + T[:, None] * fp[:, t.down[d, :, 1]] * (t.alphas[:, d] >= 1)
    )


def regularize_np(f, du, dT, j, tab: MultiIndexTable):
    """R_M^j on the top-order rows; du is (n, D), dT is (n,)."""
    t = _np_tables(tab)
    fp = _pad(f)
    out = np.zeros_like(f)
    top = tab.top
    acc = np.zeros((f.shape[0], top.size))
    for d in range(tab.D):
        acc += du[:, d, None] * fp[:, t.swap[d, j, top]]
        acc += 0.5 * dT[:, None] * fp[:, t.swap2[d, j, top]]
    out[:, top] = (t.alphas[top, j] + 1.0) * acc
    return out


def rotate_np(f, B, tab: MultiIndexTable):
    """(G f)_alpha = sum eps_{dlm} (alpha_l + 1) B_m f_{alpha - e_d + e_l}."""
    t = _np_tables(tab)
    fp = _pad(f)
    al = t.alphas
    if tab.D == 2:
        return B[:, 2, None] * (
            (al[:, 1] + 1.0) * fp[:, t.swap[0, 1]] - (al[:, 0] + 1.0) * fp[:, t.swap[1, 0]]
        )
    out = np.zeros_like(f)
    for d, l, m, s in _EPS3:
        out += s * B[:, m, None] * (al[:, l] + 1.0) * fp[:, t.swap[d, l]]
    return out


def hll_np(fl, fr, pl, pr, lam_l, lam_r):
    """Three-branch HLL combination; lam_l < lam_r assumed."""
    lamL = lam_l[:, None]
    lamR = lam_r[:, None]
    mid = (lamR * pl - lamL * pr + lamL * lamR * (fr - fl)) / (lamR - lamL)
    return np.where(lamL >= 0, pl, np.where(lamR <= 0, pr, mid))


def solve_np(A, b):
    return np.linalg.solve(A, b[..., None])[..., 0]


_EPS3 = [
    (0, 1, 2, 1.0),
    (1, 2, 0, 1.0),
    (2, 0, 1, 1.0),
    (1, 0, 2, -1.0),
    (2, 1, 0, -1.0),
    (0, 2, 1, -1.0),
]


# ---------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:
    _jit = njit(cache=True, parallel=PARALLEL, fastmath=False)

    @_jit
    def _recenter_nb(f, du, dT, down, alphas, M):
        n, N = f.shape
        D = du.shape[1]
        out = np.empty_like(f)
        for i in prange(n):
            K = np.empty(M + 1)
            a = f[i].copy()
            b = np.empty(N)
            for d in range(D):
                s = du[i, d]
                t = dT[i]
                K[0] = 1.0
                if M >= 1:
                    K[1] = s
                for m in range(1, M):
                    K[m + 1] = (s * K[m] + t * K[m - 1]) / (m + 1)
                for k in range(N):
                    acc = 0.0
                    for m in range(alphas[k, d] + 1):
                        acc += K[m] * a[down[d, k, m]]
                    b[k] = acc
                a, b = b, a
            out[i] = a
        return out

    @_jit
    def _recenter2_nb(f, du, dT, alphas, M):
        # D=2 variant on a dense triangular (M+1)x(M+1) layout: the two
        # Toeplitz passes then run over contiguous rows
        n, N = f.shape
        out = np.empty_like(f)
        for i in prange(n):
            A = np.zeros((M + 1, M + 1))
            Bm = np.zeros((M + 1, M + 1))
            K0 = np.empty(M + 1)
            K1 = np.empty(M + 1)
            for k in range(N):
                A[alphas[k, 0], alphas[k, 1]] = f[i, k]
            t = dT[i]
            s0 = du[i, 0]
            s1 = du[i, 1]
            K0[0] = 1.0
            K1[0] = 1.0
            if M >= 1:
                K0[1] = s0
                K1[1] = s1
            for m in range(1, M):
                K0[m + 1] = (s0 * K0[m] + t * K0[m - 1]) / (m + 1)
                K1[m + 1] = (s1 * K1[m] + t * K1[m - 1]) / (m + 1)
            for p in range(M + 1):
                for m in range(p + 1):
                    c = K0[m]
                    for q in range(M + 1 - p):
                        Bm[p, q] += c * A[p - m, q]
            for p in range(M + 1):
                for q in range(M + 1 - p):
                    acc = 0.0
                    for m in range(q + 1):
                        acc += K1[m] * Bm[p, q - m]
                    A[p, q] = acc
            for k in range(N):
                out[i, k] = A[alphas[k, 0], alphas[k, 1]]
        return out

    @_jit
    def _vmul_nb(f, u, T, d, up, down, alphas):
        n, N = f.shape
        out = np.empty_like(f)
        for i in prange(n):
            for k in range(N):
                v = u[i, d] * f[i, k]
                p = up[d, k]
                if p >= 0:
                    v += (alphas[k, d] + 1.0) * f[i, p]
                if alphas[k, d] >= 1:
                    v += T[i] * f[i, down[d, k, 1]]
                out[i, k] = v
        return out

    @_jit
    def _regularize_nb(f, du, dT, j, swap, swap2, alphas, top):
        n, N = f.shape
        D = du.shape[1]
        out = np.zeros_like(f)
        for i in prange(n):
            for t in range(top.shape[0]):
                k = top[t]
                acc = 0.0
                for d in range(D):
                    p = swap[d, j, k]
                    if p >= 0:
                        acc += du[i, d] * f[i, p]
                    q = swap2[d, j, k]
                    if q >= 0:
                        acc += 0.5 * dT[i] * f[i, q]
                out[i, k] = (alphas[k, j] + 1.0) * acc
        return out

    @_jit
    def _rotate2_nb(f, B, swap, alphas):
        n, N = f.shape
        out = np.zeros_like(f)
        for i in prange(n):
            b3 = B[i, 2]
            for k in range(N):
                acc = 0.0
                p = swap[0, 1, k]
                if p >= 0:
                    acc += (alphas[k, 1] + 1.0) * f[i, p]
                q = swap[1, 0, k]
                if q >= 0:
                    acc -= (alphas[k, 0] + 1.0) * f[i, q]
                out[i, k] = b3 * acc
        return out

    @_jit
    def _rotate3_nb(f, B, swap, alphas):
        n, N = f.shape
        out = np.zeros_like(f)
        for i in prange(n):
            for k in range(N):
                acc = 0.0
                for d in range(3):
                    for l in range(3):
                        if d == l:
                            continue
                        p = swap[d, l, k]
                        if p < 0:
                            continue
                        m = 3 - d - l
                        s = 1.0 if (l - d) % 3 == 1 else -1.0
                        acc += s * B[i, m] * (alphas[k, l] + 1.0) * f[i, p]
                out[i, k] = acc
        return out

    @_jit
    def _hll_nb(fl, fr, pl, pr, lam_l, lam_r):
        n, N = fl.shape
        out = np.empty_like(fl)
        for i in prange(n):
            a = lam_l[i]
            b = lam_r[i]
            if a >= 0.0:
                out[i] = pl[i]
            elif b <= 0.0:
                out[i] = pr[i]
            else:
                w = 1.0 / (b - a)
                for k in range(N):
                    out[i, k] = (b * pl[i, k] - a * pr[i, k] + a * b * (fr[i, k] - fl[i, k])) * w
        return out

    @_jit
    def _solve_nb(A, b):
        n, m, _ = A.shape
        x = np.empty((n, m))
        for i in prange(n):
            a = A[i].copy()
            r = b[i].copy()
            for c in range(m):
                piv = c
                best = abs(a[c, c])
                for rr in range(c + 1, m):
                    if abs(a[rr, c]) > best:
                        best = abs(a[rr, c])
                        piv = rr
                if piv != c:
                    for cc in range(m):
                        tmp = a[c, cc]
                        a[c, cc] = a[piv, cc]
                        a[piv, cc] = tmp
                    tmp = r[c]
                    r[c] = r[piv]
                    r[piv] = tmp
                for rr in range(c + 1, m):
                    fac = a[rr, c] / a[c, c]
                    if fac != 0.0:
                        for cc in range(c, m):
                            a[rr, cc] -= fac * a[c, cc]
                        r[rr] -= fac * r[c]
            for c in range(m - 1, -1, -1):
                s = r[c]
                for cc in range(c + 1, m):
                    s -= a[c, cc] * x[i, cc]
                x[i, c] = s / a[c, c]
        return x

    def recenter_nb(f, du, dT, tab):
        if tab.D == 2:
            return _recenter2_nb(_c(f), _c(du), _c(dT), tab.alphas, tab.M)
        return _recenter_nb(_c(f), _c(du), _c(dT), tab.down, tab.alphas, tab.M)

    def vmul_nb(f, u, T, d, tab):
        return _vmul_nb(_c(f), _c(u), _c(T), d, tab.up, tab.down, tab.alphas)

    def regularize_nb(f, du, dT, j, tab):
        return _regularize_nb(_c(f), _c(du), _c(dT), j, tab.swap, tab.swap2, tab.alphas, tab.top)

    def rotate_nb(f, B, tab):
        if tab.D == 2:
            return _rotate2_nb(_c(f), _c(B), tab.swap, tab.alphas)
        return _rotate3_nb(_c(f), _c(B), tab.swap, tab.alphas)

    def hll_nb(fl, fr, pl, pr, lam_l, lam_r):
        return _hll_nb(_c(fl), _c(fr), _c(pl), _c(pr), _c(lam_l), _c(lam_r))

    def solve_nb(A, b):
        return _solve_nb(_c(A), _c(b))


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def singular_check(A: np.ndarray) -> None:
    det = np.linalg.det(A)
    if not np.all(np.isfinite(det)) or np.any(det == 0.0):
        raise FloatingPointError("singular per-cell Lorentz system")


def _pick(name):
    if BACKEND == "numba":
        return globals()[name + "_nb"]
    return globals()[name + "_np"]


recenter = _pick("recenter")
vmul = _pick("vmul")
regularize = _pick("regularize")
rotate = _pick("rotate")
solve = _pick("solve")
hll = _pick("hll")


def set_threads(n: int) -> None:
    """Set numba worker threads (effective only with HMVM_PARALLEL=1)."""
    if HAVE_NUMBA and PARALLEL and n >= 1:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
