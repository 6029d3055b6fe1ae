"""Compare the compiled and pure-Python kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from honestqse import kernels
from honestqse.core import Povm, counter_rng


def _particles(rng, n, d):
    g = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    m = g @ np.conj(np.swapaxes(g, 1, 2))
    return m / np.trace(m, axis1=1, axis2=2).real[:, None, None]


def cases():
    rng = counter_rng(0)
    parts2 = _particles(rng, 20_000, 2)
    parts4 = _particles(rng, 5_000, 4)
    pauli = Povm.pauli6().effects
    counts = rng.integers(0, 200, size=6).astype(float)
    eff4 = np.array([np.outer(v, v.conj()) for v in np.eye(4)])
    counts4 = rng.integers(0, 50, size=4).astype(float)
    probs = rng.dirichlet(np.ones(8))
    u = rng.random(1_000_000)
    w = rng.dirichlet(np.ones(100_000))
    return {
        "log_likelihoods 20000x(2x2), 6 effects": lambda b: kernels.log_likelihoods(parts2, pauli, counts, backend=b),
        "log_likelihoods 5000x(4x4), 4 effects": lambda b: kernels.log_likelihoods(parts4, eff4, counts4, backend=b),
        "sample_outcomes 1e6 draws, 8 outcomes": lambda b: kernels.sample_outcomes(probs, u, backend=b),
        "systematic_resample 1e5 particles": lambda b: kernels.systematic_resample(w, 0.3, backend=b),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"default backend: {kernels.BACKEND}")
    print(f"{'kernel':44s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases().items():
        times = [min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat)) for b in backends]
        row = f"{name:44s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
