"""Time the numba kernels against their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--steps 200000] [--repeat 3]

Each kernel is run once untimed so JIT compilation is excluded, then the
best of ``--repeat`` runs is reported along with the max abs difference
between the two backends.
"""

import argparse
import time

import numpy as np

from olsbpi import kernels
from olsbpi.presets import PENDULUM_SETTINGS, preset_triple_pendulum
from olsbpi.sim import cascade_matrices


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(steps):
    model, _, K1 = preset_triple_pendulum()
    drift, noise_mats, additive = cascade_matrices(model, K1, PENDULUM_SETTINGS["sigma_u"])
    N = drift.shape[0]
    rng = np.random.default_rng(0)
    dt = 1e-3
    dW = rng.standard_normal((steps, noise_mats.shape[0] + additive.shape[1])) * np.sqrt(dt)
    v0 = np.zeros(N)

    def em(kernel):
        out = np.empty((steps + 1, N))
        kernel(v0, drift, noise_mats, additive, dW, dt, 1e12, out)
        return out

    Z = rng.standard_normal((steps, 9))

    T = -np.eye(21) + 0.1 * rng.standard_normal((21, 21))
    M = np.eye(21) + 0.01 * T
    c = 0.01 * rng.standard_normal(21)

    def aff(kernel):
        return kernel(M, c, np.zeros(21), 10_000, 1e10)[0]

    return [
        ("em_cascade", lambda: em(kernels.em_cascade_numpy), lambda: em(kernels.em_cascade_numba)),
        ("sym_features", lambda: kernels.sym_features_numpy(Z),
         lambda: kernels.sym_features_numba(Z)),
        ("affine_iterate", lambda: aff(kernels.affine_iterate_numpy),
         lambda: aff(kernels.affine_iterate_numba)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'kernel':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, f_np, f_nb in cases(args.steps):
        t_np = best_of(f_np, args.repeat)
        t_nb = best_of(f_nb, args.repeat)
        diff = float(np.max(np.abs(f_np() - f_nb())))
        print(f"{name:<16}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
