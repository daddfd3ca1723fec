"""Compare the compiled and pure-NumPy ellipsoid kernels.

Usage: ``python benchmarks/bench_kernels.py [--repeat N] [--steps N]``.

Two measurements per configuration: a fixed number of raw coordinate steps
(the loop the extension accelerates) and a full ``mvee_circled`` solve.
Both backends start from the same state and must agree on the result.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mwlab.kernels import _module, available_backends, mvee_circled

CASES = [(2, 256), (2, 1024), (3, 576), (4, 1024)]


def _points(d: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    # stretch so the iteration has real work to do
    X[:, 0] *= 4.0
    return np.ascontiguousarray(X)


def _state(X: np.ndarray):
    n = len(X)
    u = np.full(n, 1.0 / n)
    sigma = (X.T * u) @ X.conj()
    sinv = np.ascontiguousarray(np.linalg.inv(sigma))
    g = np.ascontiguousarray(np.real(np.einsum("ik,kl,il->i", X.conj(), sinv, X)))
    return u, sinv, g


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_steps(X: np.ndarray, backend: str, steps: int, repeat: int) -> tuple[float, np.ndarray]:
    kern = _module(backend)
    out = {}

    def once() -> None:
        u, sinv, g = _state(X)
        kern.mvee_steps(X, u, sinv, g, steps, 0.0)
        out["u"] = u

    return _best(once, repeat), out["u"]


def bench_solve(X: np.ndarray, backend: str, repeat: int) -> tuple[float, np.ndarray]:
    out = {}

    def once() -> None:
        out["M"] = mvee_circled(X, backend=backend)[0]

    return _best(once, repeat), out["M"]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the NumPy backend is available")
    print(f"{'d':>2} {'n':>5} {'kernel':>8} " + " ".join(f"{b:>10}" for b in backends) + "   speedup  agree")
    for d, n in CASES:
        X = _points(d, n, seed=d * 1000 + n)
        for label, runner in (("steps", lambda b: bench_steps(X, b, args.steps, args.repeat)),
                              ("solve", lambda b: bench_solve(X, b, args.repeat))):
            times, results = [], []
            for b in backends:
                t, r = runner(b)
                times.append(t)
                results.append(r)
            agree = all(np.allclose(results[0], r, rtol=1e-8, atol=1e-12) for r in results[1:])
            speed = times[0] / times[-1] if len(times) > 1 else 1.0
            cols = " ".join(f"{t * 1e3:9.2f}ms" for t in times)
            print(f"{d:>2} {n:>5} {label:>8} {cols}   {speed:7.1f}x  {agree}")


if __name__ == "__main__":
    main()
