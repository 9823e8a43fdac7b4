"""Time the hot kernels under both backends.

The backend is fixed at import time by HMVM_BACKEND, so each backend runs in
its own interpreter:

    python benchmarks/bench_kernels.py            # both, side by side
    python benchmarks/bench_kernels.py --M 30 --N 512
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def measure(M, N, repeat):
    from hmvm import kernels
    from hmvm.convection import convection_step
    from hmvm.em import va_step
    from hmvm.scenarios import landau

    d = landau(k=0.3, A=1e-3, N=N, M=M)
    st = d.states[0]
    tab = st.table
    rng = np.random.default_rng(0)
    f = st.f
    du = rng.normal(size=(N, tab.D)) * 0.1
    dT = rng.normal(size=N) * 0.05
    B = rng.normal(size=(N, 3))
    A = rng.normal(size=(N, 4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=(N, 4))
    cases = {
        "recenter": lambda: kernels.recenter(f, du, dT, tab),
        "vmul": lambda: kernels.vmul(f, st.u, st.T, 0, tab),
        "regularize": lambda: kernels.regularize(f, du, dT, 0, tab),
        "rotate": lambda: kernels.rotate(f, B, tab),
        "solve": lambda: kernels.solve(A, b),
        "convection_step": lambda: convection_step(d.grid, st, 1e-3),
        "va_step": lambda: va_step([st], d.em.E, 1e-3, d.species),
    }
    return {"backend": kernels.BACKEND, "times": {k: _best(fn, repeat) for k, fn in cases.items()}}


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--M", type=int, default=20)
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    a = p.parse_args()
    if a.child:
        print(json.dumps(measure(a.M, a.N, a.repeat)))
        return
    res = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, HMVM_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, __file__, "--child", "--M", str(a.M), "--N", str(a.N), "--repeat", str(a.repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        r = json.loads(out.stdout.strip().splitlines()[-1])
        if r["backend"] != backend:
            print(f"note: {backend} requested, {r['backend']} used (numba missing?)")
        res[backend] = r["times"]
    print(f"M={a.M}, N={a.N} cells, 1D2V, best of {a.repeat}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for k in res["numpy"]:
        tn, tb = res["numpy"][k], res["numba"][k]
        print(f"{k:<18}{1e3 * tn:>12.3f}{1e3 * tb:>12.3f}{tn / tb:>9.1f}")


if __name__ == "__main__":
    main()
