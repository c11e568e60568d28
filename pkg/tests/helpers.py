"""Independent oracles shared by the test modules.

The dense Fock-space construction below builds annihilation operators as
explicit matrices from their defining ladder action, with its own state
enumeration. It shares no code with the production assembly kernels, so
agreement between the two is a genuine cross check.
"""

import itertools
import math

import numpy as np


def dense_fock_ops(M, ntot):
    """(states, index, [a_0, ..., a_{M-1}]) on the Fock space truncated at
    ``ntot`` total quanta; states ordered by (total, lex) unlike production."""
    states = sorted(
        (t for t in itertools.product(range(ntot + 1), repeat=M)
         if sum(t) <= ntot),
        key=lambda t: (sum(t), t),
    )
    index = {t: i for i, t in enumerate(states)}
    ops = []
    for m in range(M):
        a = np.zeros((len(states), len(states)))
        for j, s in enumerate(states):
            if s[m] > 0:
                t = list(s)
                t[m] -= 1
                a[index[tuple(t)], j] = math.sqrt(s[m])
        ops.append(a)
    return states, index, ops


def dense_hn(model, N):
    """N-body Hamiltonian on the sector, built from dense ladder matrices.

    Returns (sector_states_in_order, matrix); the state order matches the
    production lexicographic sector basis so matrices compare entrywise.
    """
    states, index, ops = dense_fock_ops(model.M, N)
    adag = [a.conj().T for a in ops]
    dim = len(states)
    h = np.zeros((dim, dim), dtype=complex)
    for m in range(model.M):
        for n in range(model.M):
            if model.T[m, n] != 0:
                h += model.T[m, n] * (adag[m] @ ops[n])
    if model.W:
        kappa = 1.0 / (N - 1)
        for (m, n, p, q), v in model.W.items():
            h += 0.5 * kappa * v * (adag[m] @ adag[n] @ ops[p] @ ops[q])
    sector = sorted(t for t in index if sum(t) == N)
    sel = [index[t] for t in sector]
    return sector, h[np.ix_(sel, sel)]


def dense_bogoliubov(hmat, kmat, cutoff):
    """Quadratic Hamiltonian on the truncated space from dense ladders."""
    d = hmat.shape[0]
    states, index, ops = dense_fock_ops(d, cutoff)
    adag = [a.conj().T for a in ops]
    dim = len(states)
    h = np.zeros((dim, dim), dtype=complex)
    for m in range(d):
        for n in range(d):
            if hmat[m, n] != 0:
                h += hmat[m, n] * (adag[m] @ ops[n])
            if kmat[m, n] != 0:
                h += 0.5 * kmat[m, n] * (adag[m] @ adag[n])
                h += 0.5 * np.conj(kmat[m, n]) * (ops[m] @ ops[n])
    lex = sorted(index)
    sel = [index[t] for t in lex]
    return lex, h[np.ix_(sel, sel)]


def random_pd_form(rng, d, k_scale=0.35):
    """Random real positive-definite quadratic form data (H, K).

    H has spectrum in [1, 2]; K is symmetric and rescaled until the doubled
    block matrix has a comfortable gap, which also keeps truncated-Fock
    oracles converged at moderate cutoffs.
    """
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    hmat = q @ np.diag(1.0 + rng.random(d)) @ q.T
    hmat = 0.5 * (hmat + hmat.T)
    kmat = rng.standard_normal((d, d))
    kmat = 0.5 * (kmat + kmat.T)
    kmat *= k_scale / max(np.abs(np.linalg.eigvalsh(kmat)).max(), 1e-12)
    while True:
        block = np.block([[hmat, kmat], [kmat.T, hmat]])
        if np.linalg.eigvalsh(block)[0] >= 0.3:
            return hmat, kmat
        kmat *= 0.5
