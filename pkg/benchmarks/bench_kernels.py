"""
Time every numeric kernel under both backends.

    python benchmarks/bench_kernels.py [--repeat 5]

The numba flavour is compiled (or loaded from cache) before timing.  Prints
the best wall time per call for each flavour and the numpy/numba ratio.
"""
import argparse
import time

import numpy as np

from cassl import kernels
from cassl.environments import tabletop_6d
from cassl.quasirandom import direction_numbers


def _cases():
    rng = np.random.default_rng(0)
    k, n = 6, 2048
    f_a, f_b = rng.random(n), rng.random(n)
    f_ab, f_ba = rng.random((k, n)), rng.random((k, n))
    gap = rng.normal(size=12)
    s2 = np.abs(rng.normal(size=(12, 12)))
    s2 = s2 + s2.T
    np.fill_diagonal(s2, 0)
    m = 20_000
    bins = np.column_stack([rng.integers(0, b, m) for b in (20, 10, 10, 5, 3, 20)])
    y = rng.integers(0, 2, m).astype(float)
    w = rng.uniform(0.5, 2, m)
    feats = rng.random((m, 4))
    W, b = rng.normal(size=(6, 20, 4)), rng.normal(size=(6, 20))
    orders = np.stack([rng.permutation(m) for _ in range(2)])
    env = tabletop_6d()
    grasp = (env._main, env._pair_i, env._pair_j, env._pair_tab)
    idx = rng.integers(0, 512, (200, 512))

    def adam(fn):
        return lambda: fn(W.copy(), b.copy(), feats, bins, y, w, orders, 64, 1e-4, 0.9, 0.999, 1e-8,
                          np.zeros_like(W), np.zeros_like(W), np.zeros_like(b), np.zeros_like(b), 0)

    return {
        "sobol_block (12-d, 65536 pts)": lambda fn: (lambda: fn(direction_numbers(12), 0, 65536)),
        "sobol_estimates (K=6, N=2048)": lambda fn: (lambda: fn(f_a, f_b, f_ab, f_ba)),
        "bootstrap_estimates (200 x 512)": lambda fn: (lambda: fn(f_a[:512], f_b[:512], f_ab[:, :512],
                                                                  f_ba[:, :512], idx)),
        "subset_energies (K=12)": lambda fn: (lambda: fn(gap, s2)),
        "tabular_counts (20k records)": lambda fn: (lambda: fn(np.zeros(m, dtype=np.int64), bins, y, w, 1, 20)),
        "logistic_loss_grad (20k records)": lambda fn: (lambda: fn(W, b, feats, bins, y, w)),
        "adam_epochs (2 epochs, 20k records)": adam,
        "grasp_logits (20k actions)": lambda fn: (lambda: fn(bins, *grasp)),
    }


def _best(call, repeat):
    call()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        call()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':40s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'ratio':>7s}")
    for name, make in _cases().items():
        base = name.split()[0]
        t_nb = _best(make(getattr(kernels, f"{base}_nb")), args.repeat)
        t_np = _best(make(getattr(kernels, f"{base}_np")), args.repeat)
        print(f"{name:40s} {1e3 * t_nb:11.2f} {1e3 * t_np:11.2f} {t_np / t_nb:7.1f}")


if __name__ == "__main__":
    main()
