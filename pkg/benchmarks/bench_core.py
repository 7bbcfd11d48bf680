"""Compare the compiled core, the NumPy fallback and the FFT path.

Run with ``python3 benchmarks/bench_core.py``.  When the extension is not
built only the fallback and FFT timings are shown.
"""

import argparse
import timeit

import numpy as np

from svolterra import _fallback, core

try:
    from svolterra import _core
except ImportError:  # pragma: no cover
    _core = None


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_solver(n_modes, n_steps, repeat):
    rng = np.random.default_rng(0)
    omega = rng.uniform(0, 1e-3, n_steps + 1)
    left = rng.uniform(0, 1e-3, n_steps + 1)
    mu = -np.arange(1, n_modes + 1, dtype=float) ** 2
    forcing = np.ones((1, n_modes, n_steps + 1))
    row = {"fallback": _time(lambda: _fallback.volterra_solve(omega, left, mu, forcing), repeat)}
    if _core is not None:
        row["cython"] = _time(lambda: _core.volterra_solve(omega, left, mu, forcing), repeat)
    return row


def bench_convolve(n_paths, n_modes, n_steps, repeat):
    rng = np.random.default_rng(1)
    kern = rng.standard_normal((n_modes, n_steps))
    sig = rng.standard_normal((n_paths, n_modes, n_steps))
    row = {
        "fallback": _time(lambda: _fallback.causal_convolve(kern, sig), repeat),
        "fft": _time(lambda: core.fft_causal_convolve(kern, sig), repeat),
    }
    if _core is not None:
        row["cython"] = _time(lambda: _core.causal_convolve(kern, sig), repeat)
    return row


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    print(f"active backend: {core.BACKEND}")
    print("volterra_solve (modes x steps)")
    for n_modes, n_steps in ((1, 512), (64, 512), (64, 2048)):
        row = bench_solver(n_modes, n_steps, args.repeat)
        cells = "  ".join(f"{k}={v * 1e3:9.2f} ms" for k, v in sorted(row.items()))
        speed = f"  speedup={row['fallback'] / row['cython']:.1f}x" if "cython" in row else ""
        print(f"  {n_modes:3d} x {n_steps:5d}  {cells}{speed}")
    print("causal_convolve (paths x modes x steps)")
    for shape in ((100, 1, 512), (100, 8, 512), (20, 64, 512)):
        row = bench_convolve(*shape, args.repeat)
        cells = "  ".join(f"{k}={v * 1e3:9.2f} ms" for k, v in sorted(row.items()))
        print(f"  {shape[0]:3d} x {shape[1]:3d} x {shape[2]:5d}  {cells}")


if __name__ == "__main__":
    main()
