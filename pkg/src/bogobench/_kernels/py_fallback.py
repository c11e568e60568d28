"""Pure-NumPy assembly backend.

Vectorized over basis states per term instance. Term order, operand order and
associativity match the compiled kernel exactly, so merged matrices agree
bit-for-bit (duplicate triplets are summed by a stable merge downstream, and
within one (row, col) group both backends emit contributions in identical
term order).
"""

import numpy as np


def _lookup(keys_sorted, key_perm, image_keys, valid):
    pos = np.searchsorted(keys_sorted, image_keys)
    pos_ok = pos < keys_sorted.shape[0]
    pos_safe = np.where(pos_ok, pos, 0)
    found = valid & pos_ok & (keys_sorted[pos_safe] == image_keys)
    return key_perm[pos_safe], found


def assemble_number_conserving(states, keys_sorted, key_perm, shifts, tmat,
                               widx, wval, half_kappa):
    ns, M = states.shape
    ket = np.arange(ns, dtype=np.int64)
    ket_keys = (states << shifts[None, :]).sum(axis=1)
    out_r, out_c, out_v = [], [], []

    for m in range(M):
        for n in range(M):
            t = tmat[m, n]
            if t == 0:
                continue
            occ_n = states[:, n]
            if m == n:
                mask = occ_n > 0
                if mask.any():
                    out_r.append(ket[mask])
                    out_c.append(ket[mask])
                    out_v.append(t * occ_n[mask].astype(np.float64))
                continue
            valid = occ_n > 0
            amp = np.sqrt(occ_n) * np.sqrt(states[:, m] + 1)
            ikeys = ket_keys + ((1 << shifts[m]) - (1 << shifts[n]))
            idx, found = _lookup(keys_sorted, key_perm, ikeys, valid)
            keep = found & (idx <= ket)
            if keep.any():
                out_r.append(idx[keep])
                out_c.append(ket[keep])
                out_v.append(t * amp[keep])

    for t in range(widx.shape[0]):
        m, n, p, q = (int(x) for x in widx[t])
        coeff = half_kappa * wval[t]
        if coeff == 0:
            continue
        f1 = states[:, q]
        f2 = states[:, p] - (1 if p == q else 0)
        valid = (f1 > 0) & (f2 > 0)
        f3 = states[:, n] - (1 if n == q else 0) - (1 if n == p else 0) + 1
        f4 = (states[:, m] - (1 if m == q else 0) - (1 if m == p else 0)
              + (1 if m == n else 0) + 1)
        amp = np.sqrt(np.maximum(f1, 0))
        amp = amp * np.sqrt(np.maximum(f2, 0))
        amp = amp * np.sqrt(np.maximum(f3, 0))
        amp = amp * np.sqrt(np.maximum(f4, 0))
        delta = ((1 << shifts[m]) + (1 << shifts[n])
                 - (1 << shifts[p]) - (1 << shifts[q]))
        idx, found = _lookup(keys_sorted, key_perm, ket_keys + delta, valid)
        keep = found & (idx <= ket)
        if keep.any():
            out_r.append(idx[keep])
            out_c.append(ket[keep])
            out_v.append(coeff * amp[keep])

    return _concat(out_r, out_c, out_v, np.result_type(tmat, wval))


def assemble_pairing(states, keys_sorted, key_perm, shifts, hmat, kmat):
    ns, M = states.shape
    ket = np.arange(ns, dtype=np.int64)
    ket_keys = (states << shifts[None, :]).sum(axis=1)
    out_r, out_c, out_v = [], [], []

    for m in range(M):
        for n in range(M):
            h = hmat[m, n]
            if h == 0:
                continue
            occ_n = states[:, n]
            if m == n:
                mask = occ_n > 0
                if mask.any():
                    out_r.append(ket[mask])
                    out_c.append(ket[mask])
                    out_v.append(h * occ_n[mask].astype(np.float64))
                continue
            valid = occ_n > 0
            amp = np.sqrt(occ_n) * np.sqrt(states[:, m] + 1)
            ikeys = ket_keys + ((1 << shifts[m]) - (1 << shifts[n]))
            idx, found = _lookup(keys_sorted, key_perm, ikeys, valid)
            keep = found & (idx <= ket)
            if keep.any():
                out_r.append(idx[keep])
                out_c.append(ket[keep])
                out_v.append(h * amp[keep])

    for m in range(M):
        for n in range(M):
            k = kmat[m, n]
            if k == 0:
                continue
            coeff = 0.5 * k
            amp = np.sqrt(states[:, n] + 1)
            amp = amp * np.sqrt(states[:, m] + (1 if m == n else 0) + 1)
            delta = (1 << shifts[m]) + (1 << shifts[n])
            valid = np.ones(ns, dtype=bool)
            idx, found = _lookup(keys_sorted, key_perm, ket_keys + delta, valid)
            keep = found & (idx <= ket)
            if keep.any():
                out_r.append(idx[keep])
                out_c.append(ket[keep])
                out_v.append(coeff * amp[keep])

    for m in range(M):
        for n in range(M):
            k = kmat[m, n]
            if k == 0:
                continue
            coeff = 0.5 * np.conj(k)
            f1 = states[:, n]
            f2 = states[:, m] - (1 if m == n else 0)
            valid = (f1 > 0) & (f2 > 0)
            amp = np.sqrt(np.maximum(f1, 0))
            amp = amp * np.sqrt(np.maximum(f2, 0))
            delta = -(1 << shifts[m]) - (1 << shifts[n])
            idx, found = _lookup(keys_sorted, key_perm, ket_keys + delta, valid)
            keep = found & (idx <= ket)
            if keep.any():
                out_r.append(idx[keep])
                out_c.append(ket[keep])
                out_v.append(coeff * amp[keep])

    return _concat(out_r, out_c, out_v, kmat.dtype)


def _concat(out_r, out_c, out_v, dtype):
    if not out_r:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=dtype)
    return (np.concatenate(out_r), np.concatenate(out_c),
            np.concatenate(out_v).astype(dtype, copy=False))
