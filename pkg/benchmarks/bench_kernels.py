"""Compare the compiled and pure-Python kernels on a realistic workload.

Run with ``python3 benchmarks/bench_kernels.py``. Results agree to
rounding; the script reports the largest discrepancy alongside timings.
"""
import argparse
import timeit

import numpy as np

from nmcontrol import _pykernels
from nmcontrol.bloch import REFERENCE_INITIAL_STATE, TimeGrid, target_trajectory

try:
    from nmcontrol import _ckernels
except ImportError:
    _ckernels = None


def workload(n_steps: int):
    grid = TimeGrid(0.0, 20.0, n_steps)
    t = grid.times
    x0 = REFERENCE_INITIAL_STATE.as_array()
    ux, uy = 0.1 * np.sin(t), 0.1 * np.cos(0.7 * t)
    delta = 0.01 * (1.0 - np.exp(-t))
    gamma = 0.001 * (1.0 - np.exp(-0.1 * t))
    tgt = target_trajectory(t, x0)
    tgt_mid = target_trajectory(grid.midpoints, x0)
    return grid, x0, ux, uy, delta, gamma, tgt, tgt_mid


def cases(kern, n_steps):
    grid, x0, ux, uy, delta, gamma, tgt, tgt_mid = workload(n_steps)
    states = kern.rk4_state(x0, ux, uy, delta, gamma, grid.h, 1.0)
    return {
        "rk4_state": lambda: kern.rk4_state(x0, ux, uy, delta, gamma, grid.h, 1.0),
        "rk4_costate": lambda: kern.rk4_costate(states, tgt, tgt_mid, ux, uy, delta, gamma,
                                                grid.h, 1.0),
        "hyp2f1_series": lambda: kern.hyp2f1_series(0.3j, 1.0, 1.0 + 0.3j, 0.95, 1e-12, 100000),
    }


def _as_array(value):
    if isinstance(value, tuple):
        return np.asarray([complex(value[0])])
    return np.asarray(value)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-steps", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")
    py = cases(_pykernels, args.n_steps)
    cy = cases(_ckernels, args.n_steps)
    print(f"{'kernel':<15}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'max |diff|':>13}")
    for name in py:
        tp = min(timeit.repeat(py[name], number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(cy[name], number=1, repeat=args.repeat)) * 1e3
        diff = np.max(np.abs(_as_array(py[name]()) - _as_array(cy[name]())))
        print(f"{name:<15}{tp:>14.3f}{tc:>14.3f}{tp / tc:>10.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
