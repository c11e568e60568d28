"""Benchmark: compiled assembly kernel vs the pure-NumPy fallback.

Times the occupation-basis ladder loop on representative workloads (the hot
kernel of every exact-diagonalization study here) and verifies that both
backends produce bit-identical matrices. Run:

    python3 benchmarks/bench_assembly.py
"""

import time

import numpy as np

from bogobench import _kernels, fock
from bogobench._kernels import py_fallback
from bogobench.eigen import SparseHermitian
from bogobench.hartree import minimize_hartree, rotate_model
from bogobench.model import builtin_model
from bogobench.quadratic import QuadraticForm

try:
    from bogobench._kernels import _assembly as compiled
except ImportError:
    compiled = None


def time_call(fn, *args, repeat=3):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_sector(model, n):
    basis = fock.sector_basis(model.M, n)
    tsym, widx, wval = fock._prepared_tensors(model)
    keys_sorted, key_perm, shifts = basis.lookup_arrays()
    half_kappa = 0.5 / (n - 1) if model.W else 0.0
    args = (basis.states, keys_sorted, key_perm, shifts, tsym, widx, wval,
            half_kappa)
    return basis.dim, args, py_fallback.assemble_number_conserving, \
        compiled.assemble_number_conserving if compiled else None


def bench_pairing(qf, cutoff):
    basis = fock.truncated_basis(qf.d, cutoff)
    hsym = 0.5 * (qf.H + qf.H.conj().T)
    ksym = 0.5 * (qf.K + qf.K.T)
    keys_sorted, key_perm, shifts = basis.lookup_arrays()
    args = (basis.states, keys_sorted, key_perm, shifts, hsym, ksym)
    return basis.dim, args, py_fallback.assemble_pairing, \
        compiled.assemble_pairing if compiled else None


def merged(dim, triplets):
    return SparseHermitian.from_triplets(dim, *triplets)


def main():
    print(f"active backend: {_kernels.BACKEND}")
    if compiled is None:
        print("compiled kernel not available; timing the fallback only\n")

    m4 = builtin_model("lattice4")
    sol = minimize_hartree(m4)
    rot4 = rotate_model(m4, sol.R)
    qf4 = QuadraticForm.from_hartree(sol)
    m2 = builtin_model("two_mode")
    sol2 = minimize_hartree(m2)
    rot2 = rotate_model(m2, sol2.R)

    cases = [
        ("sector  M=2 N=800 (two_mode)", bench_sector(rot2, 800)),
        ("sector  M=4 N=32  (lattice4)", bench_sector(rot4, 32)),
        ("sector  M=4 N=64  (lattice4)", bench_sector(rot4, 64)),
        ("pairing d=3 cutoff=40", bench_pairing(qf4, 40)),
        ("pairing d=3 cutoff=60", bench_pairing(qf4, 60)),
    ]

    header = f"{'case':<30} {'dim':>8} {'python':>10} {'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, (dim, args, py_fn, c_fn) in cases:
        t_py, out_py = time_call(py_fn, *args)
        if c_fn is None:
            print(f"{name:<30} {dim:>8} {t_py:>9.4f}s {'-':>10} {'-':>8}")
            continue
        t_c, out_c = time_call(c_fn, *args)
        a = merged(dim, out_py)
        b = merged(dim, out_c)
        identical = (np.array_equal(a.rows, b.rows)
                     and np.array_equal(a.cols, b.cols)
                     and np.array_equal(a.vals, b.vals))
        mark = "" if identical else "  MISMATCH!"
        print(f"{name:<30} {dim:>8} {t_py:>9.4f}s {t_c:>9.4f}s "
              f"{t_py / t_c:>7.1f}x{mark}")


if __name__ == "__main__":
    main()
