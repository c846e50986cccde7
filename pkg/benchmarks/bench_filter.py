"""Compare the compiled and pure-Python filtering kernels.

Run ``python3 benchmarks/bench_filter.py``. Each row times one forward and
one backward pass on random inputs of the given size and reports the best
of several repeats.
"""

import argparse
import timeit

import numpy as np

from regimeswitch import _kernels_py
from regimeswitch.chain import expanded_transition

try:
    from regimeswitch import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def make_problem(n, M, p, seed=0):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(M), size=M)
    T = expanded_transition(P, p)
    S = T.shape[0]
    logg = rng.normal(-1.0, 2.0, size=(n, S))
    return logg, T, np.full(S, 1.0 / S)


def time_backend(mod, problem, repeat):
    logg, T, xi = problem

    def run():
        pred, filt, obs, shift = mod.forward(logg, T, xi)
        mod.backward(logg, T, pred, obs, shift)

    number = 3
    return min(timeit.repeat(run, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = [(800, 2, 1), (800, 2, 5), (2000, 2, 5), (800, 3, 2), (5000, 2, 2)]
    print(f"{'n':>6} {'M':>3} {'p':>3} {'states':>7} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n, M, p in cases:
        prob = make_problem(n, M, p)
        t_py = time_backend(_kernels_py, prob, args.repeat)
        if compiled is None:
            print(f"{n:>6} {M:>3} {p:>3} {M**p:>7} {t_py * 1e3:>10.2f} {'n/a':>10} {'n/a':>8}")
            continue
        t_c = time_backend(compiled, prob, args.repeat)
        print(f"{n:>6} {M:>3} {p:>3} {M**p:>7} {t_py * 1e3:>10.2f} {t_c * 1e3:>10.2f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
