# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled assembly backend; see package docstring for the interface.

Term-major loops mirror py_fallback.py operation for operation, so both
backends assemble bit-identical matrices. Image-state lookup uses a monotone
merge scan when basis keys are ascending (the standard lexicographic bases),
falling back to binary search for reordered state sets.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef cnp.int64_t i64

ctypedef fused value_t:
    double
    double complex


cdef inline Py_ssize_t _find(const i64[::1] keys_sorted, i64 key) nogil:
    cdef Py_ssize_t lo = 0, hi = keys_sorted.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys_sorted[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < keys_sorted.shape[0] and keys_sorted[lo] == key:
        return lo
    return -1


cdef Py_ssize_t _onebody_term(const i64[:, ::1] states, const i64[::1] ket_keys,
                              const i64[::1] keys_sorted,
                              const i64[::1] key_perm, bint ascending,
                              Py_ssize_t m, Py_ssize_t n, value_t coeff,
                              i64 delta, i64[::1] out_r, i64[::1] out_c,
                              value_t[::1] out_v, Py_ssize_t count) nogil:
    cdef Py_ssize_t ns = states.shape[0]
    cdef Py_ssize_t j, pos = 0
    cdef i64 i, occn, target
    cdef double amp
    if m == n:
        for j in range(ns):
            occn = states[j, n]
            if occn > 0:
                out_r[count] = j
                out_c[count] = j
                out_v[count] = coeff * (<double> occn)
                count += 1
        return count
    for j in range(ns):
        target = ket_keys[j] + delta
        if ascending:
            while pos < ns and keys_sorted[pos] < target:
                pos += 1
            if pos >= ns or keys_sorted[pos] != target:
                continue
            i = key_perm[pos]
        else:
            i = _find(keys_sorted, target)
            if i < 0:
                continue
            i = key_perm[i]
        occn = states[j, n]
        if occn <= 0 or i > j:
            continue
        amp = sqrt(<double> occn) * sqrt(<double> (states[j, m] + 1))
        out_r[count] = i
        out_c[count] = j
        out_v[count] = coeff * amp
        count += 1
    return count


cdef Py_ssize_t _twobody_term(const i64[:, ::1] states, const i64[::1] ket_keys,
                              const i64[::1] keys_sorted,
                              const i64[::1] key_perm, bint ascending,
                              Py_ssize_t m, Py_ssize_t n, Py_ssize_t p,
                              Py_ssize_t q, value_t coeff, i64 delta,
                              i64[::1] out_r, i64[::1] out_c,
                              value_t[::1] out_v, Py_ssize_t count) nogil:
    cdef Py_ssize_t ns = states.shape[0]
    cdef Py_ssize_t j, pos = 0
    cdef i64 i, f1, f2, f3, f4, target
    cdef double amp
    for j in range(ns):
        target = ket_keys[j] + delta
        if ascending:
            while pos < ns and keys_sorted[pos] < target:
                pos += 1
            if pos >= ns or keys_sorted[pos] != target:
                continue
            i = key_perm[pos]
        else:
            i = _find(keys_sorted, target)
            if i < 0:
                continue
            i = key_perm[i]
        f1 = states[j, q]
        f2 = states[j, p] - (1 if p == q else 0)
        if f1 <= 0 or f2 <= 0 or i > j:
            continue
        f3 = states[j, n] - (1 if n == q else 0) - (1 if n == p else 0) + 1
        f4 = (states[j, m] - (1 if m == q else 0) - (1 if m == p else 0)
              + (1 if m == n else 0) + 1)
        amp = sqrt(<double> f1)
        amp = amp * sqrt(<double> f2)
        amp = amp * sqrt(<double> f3)
        amp = amp * sqrt(<double> f4)
        out_r[count] = i
        out_c[count] = j
        out_v[count] = coeff * amp
        count += 1
    return count


cdef Py_ssize_t _pair_create_term(const i64[:, ::1] states,
                                  const i64[::1] ket_keys,
                                  const i64[::1] keys_sorted,
                                  const i64[::1] key_perm, bint ascending,
                                  Py_ssize_t m, Py_ssize_t n, value_t coeff,
                                  i64 delta, i64[::1] out_r, i64[::1] out_c,
                                  value_t[::1] out_v, Py_ssize_t count) nogil:
    cdef Py_ssize_t ns = states.shape[0]
    cdef Py_ssize_t j, pos = 0
    cdef i64 i, target
    cdef double amp
    for j in range(ns):
        target = ket_keys[j] + delta
        if ascending:
            while pos < ns and keys_sorted[pos] < target:
                pos += 1
            if pos >= ns or keys_sorted[pos] != target:
                continue
            i = key_perm[pos]
        else:
            i = _find(keys_sorted, target)
            if i < 0:
                continue
            i = key_perm[i]
        if i > j:
            continue
        amp = sqrt(<double> (states[j, n] + 1))
        amp = amp * sqrt(<double> (states[j, m] + (1 if m == n else 0) + 1))
        out_r[count] = i
        out_c[count] = j
        out_v[count] = coeff * amp
        count += 1
    return count


cdef Py_ssize_t _pair_annihilate_term(const i64[:, ::1] states,
                                      const i64[::1] ket_keys,
                                      const i64[::1] keys_sorted,
                                      const i64[::1] key_perm, bint ascending,
                                      Py_ssize_t m, Py_ssize_t n,
                                      value_t coeff, i64 delta,
                                      i64[::1] out_r, i64[::1] out_c,
                                      value_t[::1] out_v,
                                      Py_ssize_t count) nogil:
    cdef Py_ssize_t ns = states.shape[0]
    cdef Py_ssize_t j, pos = 0
    cdef i64 i, f1, f2, target
    cdef double amp
    for j in range(ns):
        target = ket_keys[j] + delta
        if ascending:
            while pos < ns and keys_sorted[pos] < target:
                pos += 1
            if pos >= ns or keys_sorted[pos] != target:
                continue
            i = key_perm[pos]
        else:
            i = _find(keys_sorted, target)
            if i < 0:
                continue
            i = key_perm[i]
        f1 = states[j, n]
        f2 = states[j, m] - (1 if m == n else 0)
        if f1 <= 0 or f2 <= 0 or i > j:
            continue
        amp = sqrt(<double> f1)
        amp = amp * sqrt(<double> f2)
        out_r[count] = i
        out_c[count] = j
        out_v[count] = coeff * amp
        count += 1
    return count


def _assemble_nc(const i64[:, ::1] states, const i64[::1] ket_keys,
                 const i64[::1] keys_sorted, const i64[::1] key_perm,
                 bint ascending, const i64[::1] shifts, value_t[:, ::1] tmat,
                 const i64[:, ::1] widx, value_t[::1] coeffs,
                 i64[::1] out_r, i64[::1] out_c, value_t[::1] out_v):
    cdef Py_ssize_t M = states.shape[1], nt = widx.shape[0]
    cdef Py_ssize_t m, n, t, count = 0
    cdef i64 delta
    cdef value_t coeff
    with nogil:
        for m in range(M):
            for n in range(M):
                coeff = tmat[m, n]
                if coeff == 0:
                    continue
                delta = ((<i64> 1) << shifts[m]) - ((<i64> 1) << shifts[n])
                count = _onebody_term(states, ket_keys, keys_sorted, key_perm,
                                      ascending, m, n, coeff, delta,
                                      out_r, out_c, out_v, count)
        for t in range(nt):
            coeff = coeffs[t]
            if coeff == 0:
                continue
            delta = (((<i64> 1) << shifts[widx[t, 0]])
                     + ((<i64> 1) << shifts[widx[t, 1]])
                     - ((<i64> 1) << shifts[widx[t, 2]])
                     - ((<i64> 1) << shifts[widx[t, 3]]))
            count = _twobody_term(states, ket_keys, keys_sorted, key_perm,
                                  ascending, widx[t, 0], widx[t, 1],
                                  widx[t, 2], widx[t, 3], coeff, delta,
                                  out_r, out_c, out_v, count)
    return count


def _assemble_pairing(const i64[:, ::1] states, const i64[::1] ket_keys,
                      const i64[::1] keys_sorted, const i64[::1] key_perm,
                      bint ascending, const i64[::1] shifts,
                      value_t[:, ::1] hmat, value_t[:, ::1] kmat,
                      i64[::1] out_r, i64[::1] out_c, value_t[::1] out_v):
    cdef Py_ssize_t M = states.shape[1]
    cdef Py_ssize_t m, n, count = 0
    cdef i64 delta
    cdef value_t coeff
    with nogil:
        for m in range(M):
            for n in range(M):
                coeff = hmat[m, n]
                if coeff == 0:
                    continue
                delta = ((<i64> 1) << shifts[m]) - ((<i64> 1) << shifts[n])
                count = _onebody_term(states, ket_keys, keys_sorted, key_perm,
                                      ascending, m, n, coeff, delta,
                                      out_r, out_c, out_v, count)
        for m in range(M):
            for n in range(M):
                coeff = kmat[m, n]
                if coeff == 0:
                    continue
                coeff = 0.5 * coeff
                delta = ((<i64> 1) << shifts[m]) + ((<i64> 1) << shifts[n])
                count = _pair_create_term(states, ket_keys, keys_sorted,
                                          key_perm, ascending, m, n, coeff,
                                          delta, out_r, out_c, out_v, count)
        for m in range(M):
            for n in range(M):
                coeff = kmat[m, n]
                if coeff == 0:
                    continue
                if value_t is double:
                    coeff = 0.5 * coeff
                else:
                    coeff = 0.5 * coeff.conjugate()
                delta = (-((<i64> 1) << shifts[m])
                         - ((<i64> 1) << shifts[n]))
                count = _pair_annihilate_term(states, ket_keys, keys_sorted,
                                              key_perm, ascending, m, n,
                                              coeff, delta, out_r, out_c,
                                              out_v, count)
    return count


def _prep(states, keys_sorted, key_perm, shifts):
    states = np.ascontiguousarray(states, dtype=np.int64)
    shifts = np.ascontiguousarray(shifts, dtype=np.int64)
    ket_keys = (states << shifts[None, :]).sum(axis=1)
    key_perm = np.ascontiguousarray(key_perm, dtype=np.int64)
    ascending = bool(np.array_equal(key_perm, np.arange(states.shape[0])))
    return (states, np.ascontiguousarray(ket_keys),
            np.ascontiguousarray(keys_sorted, dtype=np.int64), key_perm,
            ascending, shifts)


def assemble_number_conserving(states, keys_sorted, key_perm, shifts, tmat,
                               widx, wval, half_kappa):
    states, ket_keys, keys_sorted, key_perm, ascending, shifts = _prep(
        states, keys_sorted, key_perm, shifts)
    ns = states.shape[0]
    nt = widx.shape[0]
    n_tnz = int(np.count_nonzero(tmat))
    cap = max(ns * (n_tnz + nt), 1)
    out_r = np.empty(cap, dtype=np.int64)
    out_c = np.empty(cap, dtype=np.int64)
    out_v = np.empty(cap, dtype=tmat.dtype)
    widx = np.ascontiguousarray(widx, dtype=np.int64).reshape(nt, 4)
    coeffs = np.ascontiguousarray(half_kappa * wval)
    count = _assemble_nc(states, ket_keys, keys_sorted, key_perm, ascending,
                         shifts, np.ascontiguousarray(tmat), widx, coeffs,
                         out_r, out_c, out_v)
    return out_r[:count], out_c[:count], out_v[:count]


def assemble_pairing(states, keys_sorted, key_perm, shifts, hmat, kmat):
    states, ket_keys, keys_sorted, key_perm, ascending, shifts = _prep(
        states, keys_sorted, key_perm, shifts)
    ns = states.shape[0]
    n_hnz = int(np.count_nonzero(hmat))
    n_knz = int(np.count_nonzero(kmat))
    cap = max(ns * (n_hnz + 2 * n_knz), 1)
    out_r = np.empty(cap, dtype=np.int64)
    out_c = np.empty(cap, dtype=np.int64)
    out_v = np.empty(cap, dtype=hmat.dtype)
    count = _assemble_pairing(states, ket_keys, keys_sorted, key_perm,
                              ascending, shifts,
                              np.ascontiguousarray(hmat),
                              np.ascontiguousarray(kmat),
                              out_r, out_c, out_v)
    return out_r[:count], out_c[:count], out_v[:count]
