"""Compare the compiled kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--repeats N]

Times the three hot paths: statevector gate application (QNN training),
run fusion + ZSX angle extraction (dataset generation, brute force), and a
full end-to-end transpile of a small classifier.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from untranspile import _kernels_py
from untranspile.circuit import GateKind, bind
from untranspile.qnn import AnsatzSpec, build_ansatz
from untranspile.transpiler import TranspileOptions, transpile

try:
    from untranspile import _kernels as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_apply_1q(mod, batch=256, n_qubits=8, gates=64):
    rng = np.random.default_rng(0)
    states = np.ascontiguousarray(
        rng.normal(size=(batch, 2**n_qubits)) + 1j * rng.normal(size=(batch, 2**n_qubits))
    )
    u = mod.gate_matrix(mod.K_RY, 0.37)

    def run():
        for g in range(gates):
            mod.apply_1q(states, g % n_qubits, u[0, 0], u[0, 1], u[1, 0], u[1, 1])

    return run


def bench_fuse_zyz(mod, n=20000):
    rng = np.random.default_rng(0)
    codes = rng.integers(0, 3, size=(n, 3)).astype(np.int64)
    angles = rng.uniform(-np.pi, np.pi, size=(n, 3))

    def run():
        for i in range(n):
            u00, u01, u10, u11 = mod.fuse_run(codes[i], angles[i])
            mod.zyz_angles(u00, u01, u10, u11)

    return run


def bench_transpile(n=300):
    spec = AnsatzSpec(4, 2, (GateKind.RY, GateKind.RZ))
    rng = np.random.default_rng(0)
    circuits = [bind(build_ansatz(spec), rng.uniform(-np.pi, np.pi, spec.n_params)) for _ in range(n)]
    opts = TranspileOptions()

    def run():
        for c in circuits:
            transpile(c, opts)

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if compiled is None:
        print("compiled kernels unavailable; showing pure-python numbers only")
    rows = []
    for name, make in [
        ("apply_1q (256x8q, 64 gates)", bench_apply_1q),
        ("fuse+zyz (20k runs)", bench_fuse_zyz),
    ]:
        t_py = timeit(make(_kernels_py), args.repeats)
        t_c = timeit(make(compiled), args.repeats) if compiled else float("nan")
        rows.append((name, t_py, t_c))
    # transpile goes through whichever backend kernels.py selected
    t_full = timeit(bench_transpile(), args.repeats)
    from untranspile import kernels

    print(f"{'benchmark':38} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, t_py, t_c in rows:
        speed = t_py / t_c if t_c == t_c else float("nan")
        print(f"{name:38} {t_py:9.4f}s {t_c:9.4f}s {speed:7.1f}x")
    print(f"{'transpile 300 classifiers (' + kernels.IMPL + ')':38} {t_full:9.4f}s")


if __name__ == "__main__":
    main()
