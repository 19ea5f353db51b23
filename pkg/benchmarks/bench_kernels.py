"""Compiled vs numpy kernel timings.

Run ``python3 benchmarks/bench_kernels.py`` from the repository root.
Each kernel is timed with ``timeit`` on both backends; the last section
times a full solve with each backend forced through a subprocess.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from qlinsolve import kernels
from qlinsolve.invpoly import inverse_phases, signal_matrices

SOLVE_SNIPPET = """
import time
from qlinsolve import kernels
from qlinsolve.pde import random_complex_tridiagonal
from qlinsolve.qsvt import PhaseCache, solve_linear_system
A, y = random_complex_tridiagonal(3, 15)
t0 = time.perf_counter()
solve_linear_system(A, y, kappa=8.0, cache=PhaseCache())
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def _cases(n_qubits):
    rng = np.random.default_rng(0)
    dim = 1 << n_qubits
    psi = rng.standard_normal((dim, 4)) + 1j * rng.standard_normal((dim, 4))
    u = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
    g0 = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
    phases = np.ascontiguousarray(inverse_phases(8.0, 0.1).phases)
    sig = signal_matrices(np.cos(np.linspace(0.1, 1.5, 108)))
    mask = (1 << (n_qubits - 1)) | (1 << (n_qubits - 2))

    def jacobi(impl):
        g = g0.copy()
        v = np.eye(32, dtype=np.complex128)
        impl.jacobi_sweep(g, v, 1e-15, 0.0)

    return {
        f"apply_1q ({n_qubits} qubits, batch 4)": lambda impl: impl.apply_1q(psi, n_qubits, n_qubits // 2, u),
        f"apply_mcx ({n_qubits} qubits, 2 controls)": lambda impl: impl.apply_mcx(psi, mask, 0, 1),
        "jacobi_sweep (32x32)": jacobi,
        "qsp_response (d=107, 108 points, jacobian)": lambda impl: impl.qsp_response(phases, sig, True),
    }


def _solve_time(pure):
    env = dict(os.environ)
    env.pop("QLINSOLVE_PURE_PYTHON", None)
    if pure:
        env["QLINSOLVE_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env, capture_output=True, text=True, check=True)
    name, seconds = out.stdout.split()
    return name, float(seconds)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--qubits", type=int, default=12)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--skip-solve", action="store_true")
    args = p.parse_args(argv)

    impls = kernels.implementations()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(impls)}")
    print(f"{'kernel':48s} " + " ".join(f"{n:>12s}" for n in impls) + "   speedup")
    for name, fn in _cases(args.qubits).items():
        times = {}
        for backend, impl in impls.items():
            timer = timeit.Timer(lambda: fn(impl))
            number, _ = timer.autorange()
            times[backend] = min(timer.repeat(args.repeat, number)) / number
        cells = " ".join(f"{times[b] * 1e6:10.1f}us" for b in impls)
        speed = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else "       -"
        print(f"{name:48s} {cells} {speed}")

    if not args.skip_solve:
        res = dict(_solve_time(pure) for pure in (True, False))
        line = "  ".join(f"{k}={v:.3f}s" for k, v in res.items())
        extra = f"  speedup {res['python'] / res['cython']:.1f}x" if "cython" in res else ""
        print(f"full solve (8x8 complex system, kappa=8, phases computed): {line}{extra}")


if __name__ == "__main__":
    main()
