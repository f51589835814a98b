"""Timing for the dense operator builders: numba backend vs numpy fallback.

Run directly:

    python3 benchmarks/bench_kernels.py

The script times the current backend, then re-runs itself in a subprocess
with DIPOLARXY_DISABLE_NUMBA=1 so both paths go through the same public
dispatch, and prints the two side by side.  The builders are the only
compiled hot spot; the eigendecompositions that dominate long ensemble
runs are LAPACK either way, so the end-to-end row puts the speedup in
perspective.
"""

import json
import os
import subprocess
import sys
import timeit

import numpy as np

from dipolarxy import kernels
from dipolarxy.ensemble import EnsembleSpec, run_ensemble
from dipolarxy.sequences import SpinEcho

SIZES = ("8", "10")


def bench_builders(n: int) -> dict:
    rng = np.random.default_rng(0)
    j = rng.normal(size=(n, n))
    j = j + j.T
    np.fill_diagonal(j, 0.0)
    h = rng.normal(size=n)
    cases = {
        "exchange": lambda: kernels.exchange_dense(j),
        "ising_y": lambda: kernels.ising_dense(j, "y"),
        "heisenberg": lambda: kernels.heisenberg_dense(j),
        "onsite_x": lambda: kernels.onsite_dense(h, "x"),
    }
    out = {}
    for name, fn in cases.items():
        fn()                            # jit warm-up / first touch
        number = 5 if n >= 10 else 20
        out[name] = min(timeit.repeat(fn, number=number, repeat=3)) / number
    return out


def bench_ensemble() -> float:
    spec = EnsembleSpec(n_s=46.0, n_realizations=4, N=9, master_seed=1)
    grid = np.linspace(0.1, 2.0, 8)
    t0 = timeit.default_timer()
    run_ensemble(spec, SpinEcho(tau=1.0), grid)
    return timeit.default_timer() - t0


def collect() -> dict:
    return {"backend": kernels.BACKEND,
            "builders": {n: bench_builders(int(n)) for n in SIZES},
            "ensemble_s": bench_ensemble()}


def main() -> int:
    if os.environ.get("_BENCH_CHILD"):
        print(json.dumps(collect()))
        return 0
    here = collect()
    env = dict(os.environ, DIPOLARXY_DISABLE_NUMBA="1", _BENCH_CHILD="1")
    proc = subprocess.run([sys.executable, os.path.abspath(__file__)],
                          env=env, capture_output=True, text=True, check=True)
    other = json.loads(proc.stdout.splitlines()[-1])
    a, b = here, other
    if a["backend"] != "numba":
        a, b = b, a
    if a["backend"] == b["backend"]:
        print("numba unavailable; both runs used the numpy fallback")
    print(f"{'builder':>12} {'N':>3} {a['backend'] + ' ms':>10} "
          f"{b['backend'] + ' ms':>10} {'ratio':>7}")
    for n in SIZES:
        for name, ta in a["builders"][n].items():
            tb = b["builders"][n][name]
            print(f"{name:>12} {n:>3} {1e3 * ta:>10.3f} {1e3 * tb:>10.3f} "
                  f"{tb / ta:>6.1f}x")
    print(f"\nspin-echo ensemble (N = 9, 4 realizations): "
          f"{a['ensemble_s']:.2f} s ({a['backend']}) vs "
          f"{b['ensemble_s']:.2f} s ({b['backend']})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
