"""Compare the compiled and pure-numpy survival kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Prints one row per system
size with the best-of-``repeat`` wall time of each backend and their ratio.
"""
import argparse
import timeit

import numpy as np

from qfd import kernels


def random_problem(dim, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    U = q * (np.diag(r) / np.abs(np.diag(r)))
    psi_d = np.zeros(dim, complex)
    psi_d[0] = 1.0
    psi_in = np.zeros(dim, complex)
    psi_in[dim // 2] = 1.0
    return np.ascontiguousarray(U), psi_d, psi_in


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", type=int, nargs="+", default=[6, 16, 32, 64, 96, 256])
    parser.add_argument("--n-max", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = kernels.BACKENDS
    if "cython" not in backends:
        print("compiled extension not built; only the numpy fallback is timed")
    header = f"{'dim':>5} {'n_max':>6}" + "".join(f" {name + ' [ms]':>14}" for name in backends)
    if "cython" in backends:
        header += f" {'speedup':>8} {'max |dF|':>10}"
    print(header)
    for dim in args.dims:
        U, psi_d, psi_in = random_problem(dim)
        times, outputs = {}, {}
        for name, fn in backends.items():
            outputs[name] = fn(U, psi_d, psi_in, args.n_max)
            t = timeit.repeat(lambda: fn(U, psi_d, psi_in, args.n_max), number=1, repeat=args.repeat)
            times[name] = min(t) * 1e3
        row = f"{dim:>5} {args.n_max:>6}" + "".join(f" {times[n]:>14.3f}" for n in backends)
        if "cython" in backends:
            diff = np.max(np.abs(np.asarray(outputs["cython"][0]) - np.asarray(outputs["python"][0])))
            row += f" {times['python'] / times['cython']:>8.2f} {diff:>10.1e}"
        print(row)


if __name__ == "__main__":
    main()
