"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--delta-max 100] [--slots 20000] [--repeat 3]

Workloads are sized like the default experiment: buffer 2, two sensors, one
channel, gamma 0.99.  The first compiled call is timed separately because it
includes JIT compilation (or loading from the on-disk cache).
"""

import argparse
import time

import numpy as np

from aoibuf import _kernels as K
from aoibuf.aoi import enumerate_states
from aoibuf.dual import dual_ascent, make_sensor_problem
from aoibuf.source import build_error_table, reference_model


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--delta-max", type=int, default=100)
    ap.add_argument("--slots", type=int, default=20000)
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    model = reference_model(0.8)
    S = enumerate_states(2, args.delta_max)
    err = build_error_table(model, S).values
    v0 = np.zeros(len(S))
    vi_args = (err, S.on_success, S.on_failure, 0.8, 0.2, 0.99, v0, 1e-9 * 0.01 / 0.99, 10**6)

    sp = make_sensor_problem(model, 2, args.delta_max, states=S)
    gains = dual_ascent([sp, sp], 1, 0.99).q_tables[0].gains
    N, R, T = 2, args.replications, args.slots
    rng = np.random.default_rng(0)
    uniforms = rng.random((R, T, N))
    keys = np.zeros((R, 1, N))
    err_tab = np.stack([err] * N)
    gain_tab = np.stack([gains] * N)
    p = np.full(N, 0.8)

    def sim(fn):
        def run():
            fn(K.MGF, 1, 0, T, 20, 0.99, err_tab, gain_tab, S.on_success, S.on_failure, S.head_age, p,
               uniforms, keys, np.full((R, N), S.initial, np.int64), np.zeros(R), np.zeros(R),
               np.zeros((R, N), np.int64), np.zeros((N, len(S)), np.int64), np.zeros(1, np.int64))
        return run

    t0 = time.perf_counter()
    K.value_iteration_nb(*vi_args)
    sim(K.simulate_chunk_nb)()
    first = time.perf_counter() - t0

    rows = [
        ("value iteration", lambda: K.value_iteration_np(*vi_args), lambda: K.value_iteration_nb(*vi_args)),
        ("simulation (MGF)", sim(K.simulate_chunk_np), sim(K.simulate_chunk_nb)),
    ]
    print(f"states={len(S)} slots={T} replications={R} first compiled call={first:.2f}s")
    print(f"{'kernel':<18}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, np_fn, nb_fn in rows:
        a, b = best_of(np_fn, args.repeat), best_of(nb_fn, args.repeat)
        print(f"{name:<18}{a:>12.4f}{b:>12.4f}{a / b:>9.1f}x")


if __name__ == "__main__":
    main()
