"""Occupation-basis assembly kernels.

The ladder-rule inner loop dominates runtime for every exact-diagonalization
study in this package, so it exists twice: a compiled Cython extension and a
vectorized pure-NumPy fallback. The backend is chosen at import time; set
``BOGOBENCH_PURE=1`` to force the fallback. Both backends evaluate the same
floating-point expressions in the same order per (term, ket) pair and feed a
stable merge, so assembled matrices are bit-identical across backends.

Interface (both backends):

``assemble_number_conserving(states, keys_sorted, key_perm, shifts, tmat,
widx, wval, half_kappa)``
    Triplets (rows, cols, vals) with rows <= cols of
    sum_{mn} T[m,n] adag_m a_n + half_kappa * sum_t W_t adag adag a a.

``assemble_pairing(states, keys_sorted, key_perm, shifts, hmat, kmat)``
    Triplets of sum H[m,n] adag_m a_n + 1/2 sum K[m,n] adag_m adag_n
    + 1/2 sum conj(K[m,n]) a_m a_n.
"""

import os

import numpy as np

from . import py_fallback

_impl = None
if not os.environ.get("BOGOBENCH_PURE"):
    try:
        from . import _assembly as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = None
if _impl is None:
    _impl = py_fallback

BACKEND = "compiled" if _impl is not py_fallback else "python"
HAVE_COMPILED = _impl is not py_fallback

assemble_number_conserving = _impl.assemble_number_conserving
assemble_pairing = _impl.assemble_pairing


def encode_states(states: np.ndarray, bits: int) -> np.ndarray:
    """Pack occupation vectors into lexicographic-order-preserving int64 keys."""
    states = np.asarray(states, dtype=np.int64)
    M = states.shape[1]
    if bits * M > 62:
        raise OverflowError(
            f"cannot pack {M} modes at {bits} bits/mode into an int64 key"
        )
    shifts = mode_shifts(M, bits)
    return (states << shifts[None, :]).sum(axis=1)


def mode_shifts(M: int, bits: int) -> np.ndarray:
    return np.array([bits * (M - 1 - i) for i in range(M)], dtype=np.int64)


def bits_for(max_occupation: int) -> int:
    # +2 headroom: pairing terms probe states two quanta above the cutoff
    return max(int(max_occupation + 2).bit_length(), 1)
