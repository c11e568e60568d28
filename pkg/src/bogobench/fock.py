"""Occupation-number combinatorics and sparse second quantization.

Bases are lexicographically ordered occupation-vector lists with exact index
lookup; the N-particle sector of M modes and the excitation Fock space
truncated at a maximum total are both supported. Hamiltonians are assembled
as upper-triangle triplets through the kernels in ``_kernels`` (compiled when
available), which makes Hermiticity exact by construction. The condensate
stripping unitary is an index relabeling: (n0, n1, ..., n_{M-1}) maps to
(n1, ..., n_{M-1}) with the coefficient untouched.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .eigen import SparseHermitian
from .errors import ResourceLimitError, ValidationError
from .model import ModelSystem, symmetrize_tensor
from .quadratic import QuadraticForm

DEFAULT_DIM_CAP = 5_000_000
GIBBS_DENSE_CAP = 4000


class OccupationBasis:
    """Ordered list of occupation vectors with exact lookup.

    ``kind`` is "sector" (all vectors summing to ``total``) or "truncated"
    (all vectors summing to at most ``total``). States are in ascending
    lexicographic order and ``index_of[state] == i`` for ``states[i]``.
    """

    def __init__(self, M: int, kind: str, total: int, states: np.ndarray):
        self.M = int(M)
        self.kind = kind
        self.total = int(total)
        self.states = np.ascontiguousarray(states, dtype=np.int64)
        self._lookup = None
        self._index = None

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def index_of(self) -> dict:
        if self._index is None:
            self._index = {tuple(int(x) for x in s): i
                           for i, s in enumerate(self.states)}
        return self._index

    def indices_of(self, states: np.ndarray) -> np.ndarray:
        """Vectorized exact lookup; -1 where a state is not in the basis."""
        states = np.asarray(states, dtype=np.int64)
        keys_sorted, key_perm, shifts = self.lookup_arrays()
        keys = (states << shifts[None, :]).sum(axis=1)
        pos = np.searchsorted(keys_sorted, keys)
        ok = pos < keys_sorted.shape[0]
        pos_safe = np.where(ok, pos, 0)
        found = ok & (keys_sorted[pos_safe] == keys)
        return np.where(found, key_perm[pos_safe], -1)

    def lookup_arrays(self):
        """(keys_sorted, key_perm, shifts) for the assembly kernels."""
        if self._lookup is None:
            bits = _kernels.bits_for(self.total)
            shifts = _kernels.mode_shifts(self.M, bits)
            keys = _kernels.encode_states(self.states, bits)
            perm = np.argsort(keys, kind="stable").astype(np.int64)
            self._lookup = (np.ascontiguousarray(keys[perm]), perm, shifts)
        return self._lookup


def _check_cap(dim: int, cap: int, what: str) -> None:
    if dim > cap:
        raise ResourceLimitError(
            f"{what} dimension {dim} exceeds the cap {cap}", estimate=dim
        )


def _sector_states(M: int, N: int) -> np.ndarray:
    out = np.empty((math.comb(N + M - 1, M - 1), M), dtype=np.int64)
    state = [0] * M
    pos = 0

    def rec(i, rem):
        nonlocal pos
        if i == M - 1:
            state[i] = rem
            out[pos] = state
            pos += 1
            return
        for v in range(rem + 1):
            state[i] = v
            rec(i + 1, rem - v)
        state[i] = 0

    rec(0, N)
    return out


def _truncated_states(M: int, nmax: int) -> np.ndarray:
    out = np.empty((math.comb(nmax + M, M), M), dtype=np.int64)
    state = [0] * M
    pos = 0

    def rec(i, rem):
        nonlocal pos
        if i == M:
            out[pos] = state
            pos += 1
            return
        for v in range(rem + 1):
            state[i] = v
            rec(i + 1, rem - v)
        state[i] = 0

    rec(0, nmax)
    return out


def sector_basis(M: int, N: int, cap: int = DEFAULT_DIM_CAP) -> OccupationBasis:
    """All occupation vectors of M modes with exactly N particles."""
    if M < 1 or N < 0:
        raise ValidationError(f"need M >= 1 and N >= 0, got M={M}, N={N}")
    _check_cap(math.comb(N + M - 1, M - 1), cap, f"sector (M={M}, N={N})")
    return OccupationBasis(M, "sector", N, _sector_states(M, N))


def truncated_basis(M: int, nmax: int, cap: int = DEFAULT_DIM_CAP) -> OccupationBasis:
    """All occupation vectors of M modes with at most ``nmax`` particles."""
    if M < 1 or nmax < 0:
        raise ValidationError(f"need M >= 1 and nmax >= 0, got M={M}, nmax={nmax}")
    _check_cap(math.comb(nmax + M, M), cap, f"truncated (M={M}, <={nmax})")
    return OccupationBasis(M, "truncated", nmax, _truncated_states(M, nmax))


def _prepared_tensors(m: ModelSystem):
    """Exactly Hermitian coefficient arrays for assembly."""
    tsym = 0.5 * (m.T + m.T.conj().T)
    w = symmetrize_tensor(m.W)
    keys = sorted(w)
    widx = np.array(keys, dtype=np.int64).reshape(len(keys), 4)
    dtype = np.float64 if m.is_real else np.complex128
    wval = np.array([w[k] for k in keys], dtype=dtype)
    tsym = tsym.astype(dtype)
    return tsym, widx, wval


def _restricted_sector_basis(M: int, N: int, nplus_max: int,
                             cap: int) -> OccupationBasis:
    """Sector states with N - n0 <= nplus_max, ordered like the excitation
    basis they relabel to."""
    exc = truncated_basis(M - 1, min(nplus_max, N), cap)
    n0 = N - exc.states.sum(axis=1)
    states = np.column_stack([n0, exc.states])
    return OccupationBasis(M, "sector", N, states)


def assemble_HN(m: ModelSystem, N: int, coupling_kappa: float | None = None,
                nplus_max: int | None = None, cap: int = DEFAULT_DIM_CAP,
                basis: OccupationBasis | None = None) -> SparseHermitian:
    """Sparse N-body Hamiltonian sum T a+a + (kappa_N/2) sum W a+a+aa.

    The model must already be rotated so that mode 0 is the condensate.
    kappa_N = 1/(N-1), plus coupling_kappa/N^2 when given. With ``nplus_max``
    the matrix is restricted (projected) to sector states carrying at most
    that many excited particles, indexed in excitation-basis order. A
    prebuilt sector ``basis`` may be passed to avoid rebuilding it.
    """
    if N < 1:
        raise ValidationError(f"need N >= 1, got {N}")
    has_w = len(m.W) > 0
    if has_w and N < 2:
        raise ValidationError("N = 1 with interaction: kappa_N = 1/(N-1) undefined")
    if basis is not None:
        if nplus_max is not None or basis.kind != "sector" \
                or basis.M != m.M or basis.total != N:
            raise ValidationError("supplied basis does not match the request")
    elif nplus_max is None:
        basis = sector_basis(m.M, N, cap)
    else:
        basis = _restricted_sector_basis(m.M, N, nplus_max, cap)
    tsym, widx, wval = _prepared_tensors(m)
    half_kappa = 0.0
    if has_w:
        kappa_n = 1.0 / (N - 1)
        if coupling_kappa is not None:
            kappa_n += coupling_kappa / (N * N)
        half_kappa = 0.5 * kappa_n
    keys_sorted, key_perm, shifts = basis.lookup_arrays()
    rows, cols, vals = _kernels.assemble_number_conserving(
        basis.states, keys_sorted, key_perm, shifts, tsym, widx, wval,
        half_kappa)
    return SparseHermitian.from_triplets(basis.dim, rows, cols, vals)


def assemble_bogoliubov_fock(qf: QuadraticForm, cutoff: int,
                             cap: int = DEFAULT_DIM_CAP) -> SparseHermitian:
    """The quadratic Hamiltonian on the excitation basis truncated at
    ``cutoff`` total quanta: a band matrix coupling sectors k and k +/- 2."""
    if cutoff < 2:
        raise ValidationError(f"cutoff must be >= 2, got {cutoff}")
    basis = truncated_basis(qf.d, cutoff, cap)
    dtype = np.float64 if qf.is_real else np.complex128
    hsym = (0.5 * (qf.H + qf.H.conj().T)).astype(dtype)
    ksym = (0.5 * (qf.K + qf.K.T)).astype(dtype)
    keys_sorted, key_perm, shifts = basis.lookup_arrays()
    rows, cols, vals = _kernels.assemble_pairing(
        basis.states, keys_sorted, key_perm, shifts, hsym, ksym)
    return SparseHermitian.from_triplets(basis.dim, rows, cols, vals)


def reference_energy(m: ModelSystem) -> float:
    """Mean-field energy per particle of the rotated model: T00 + W0000/2."""
    return float(np.real(m.T[0, 0]) + 0.5 * np.real(m.W.get((0, 0, 0, 0), 0.0)))


def _relabel_permutation(sector: OccupationBasis, exc: OccupationBasis) -> np.ndarray:
    if sector.kind != "sector" or exc.kind != "truncated":
        raise ValidationError("relabeling needs a sector and a truncated basis")
    if exc.M != sector.M - 1 or exc.total != sector.total:
        raise ValidationError(
            f"basis mismatch: sector (M={sector.M}, N={sector.total}) vs "
            f"truncated (M={exc.M}, <={exc.total})"
        )
    perm = exc.indices_of(sector.states[:, 1:])
    if np.any(perm < 0):
        raise ValidationError("relabeling target basis is incomplete")
    return perm


def apply_UN(psi: np.ndarray, basis_from: OccupationBasis,
             basis_to: OccupationBasis) -> np.ndarray:
    """Excitation relabeling of a sector-N coefficient vector; exactly
    norm-preserving (a coefficient permutation)."""
    psi = np.asarray(psi)
    if psi.shape != (basis_from.dim,):
        raise ValidationError("coefficient vector does not match the basis")
    perm = _relabel_permutation(basis_from, basis_to)
    out = np.empty(basis_to.dim, dtype=psi.dtype)
    out[perm] = psi
    return out


def apply_UN_dagger(phi: np.ndarray, basis_to: OccupationBasis,
                    basis_from: OccupationBasis) -> np.ndarray:
    """Inverse relabeling (truncated excitation basis back to the sector)."""
    phi = np.asarray(phi)
    if phi.shape != (basis_to.dim,):
        raise ValidationError("coefficient vector does not match the basis")
    perm = _relabel_permutation(basis_from, basis_to)
    return phi[perm]


def transformed_HN(m: ModelSystem, N: int, coupling_kappa: float | None = None,
                   nplus_max: int | None = None,
                   cap: int = DEFAULT_DIM_CAP) -> SparseHermitian:
    """H_N conjugated by the relabeling unitary, shifted by -N * e_H.

    Without ``nplus_max`` this is the exact relabeling of ``assemble_HN``
    (identical spectrum); with it, the projection onto at most ``nplus_max``
    excited particles is assembled directly.
    """
    e_h = reference_energy(m)
    if nplus_max is not None:
        hn = assemble_HN(m, N, coupling_kappa, nplus_max=nplus_max, cap=cap)
        return hn.add_to_diagonal(-N * e_h)
    hn = assemble_HN(m, N, coupling_kappa, cap=cap)
    sector = sector_basis(m.M, N, cap)
    exc = truncated_basis(m.M - 1, N, cap)
    perm = _relabel_permutation(sector, exc)
    rows = perm[hn.rows]
    cols = perm[hn.cols]
    vals = hn.vals.copy()
    flip = rows > cols
    rows[flip], cols[flip] = cols[flip], rows[flip].copy()
    vals[flip] = np.conj(vals[flip])
    out = SparseHermitian.from_triplets(hn.dim, rows, cols, vals)
    return out.add_to_diagonal(-N * e_h)


def number_plus(basis: OccupationBasis) -> np.ndarray:
    """Diagonal of the excited-particle counter (integers)."""
    if basis.kind == "sector":
        return basis.total - basis.states[:, 0]
    return basis.states.sum(axis=1)


def _smoothstep(y: np.ndarray) -> np.ndarray:
    y = np.clip(y, 0.0, 1.0)
    return y * y * (3.0 - 2.0 * y)


def _profile_f(x: np.ndarray) -> np.ndarray:
    s = _smoothstep(2.0 * np.abs(x) - 1.0)
    # pin the flat regions so f is exactly 1 below 1/2 and exactly 0 above 1
    return np.where(s >= 1.0, 0.0, np.where(s <= 0.0, 1.0, np.cos(0.5 * np.pi * s)))


def _profile_g(x: np.ndarray) -> np.ndarray:
    s = _smoothstep(2.0 * np.abs(x) - 1.0)
    return np.where(s >= 1.0, 1.0, np.where(s <= 0.0, 0.0, np.sin(0.5 * np.pi * s)))


@lru_cache(maxsize=1)
def _profile_cf() -> float:
    """C_f = 2(||f'||_inf^2 + ||g'||_inf^2) for the smoothstep profile.

    |f'(x)| = pi sin(pi s(y)/2) s'(y) and |g'(x)| = pi cos(pi s(y)/2) s'(y)
    at y = 2|x| - 1; the suprema are located by a fine grid plus a bounded
    scalar maximization.
    """
    def sup(of):
        grid = np.linspace(0.0, 1.0, 20001)
        sp = 6.0 * grid - 6.0 * grid * grid
        vals = of(0.5 * np.pi * _smoothstep(grid)) * sp
        y0 = grid[int(np.argmax(vals))]
        res = minimize_scalar(
            lambda y: -(of(0.5 * np.pi * _smoothstep(np.array([y])))[0]
                        * (6.0 * y - 6.0 * y * y)),
            bounds=(max(0.0, y0 - 1e-3), min(1.0, y0 + 1e-3)),
            method="bounded",
            options={"xatol": 1e-14},
        )
        return np.pi * max(float(-res.fun), float(vals.max()))

    fmax = sup(np.sin)
    gmax = sup(np.cos)
    return 2.0 * (fmax * fmax + gmax * gmax)


def localization_ops(basis: OccupationBasis, m_loc: int):
    """Diagonal localization pair (f, g) in the excited-particle number.

    f = 1 up to m_loc/2 excitations, f = 0 from m_loc on, f^2 + g^2 = 1
    identically. Returns (f_diag, g_diag, C_f) with C_f the profile constant
    2(||f'||^2 + ||g'||^2).
    """
    if m_loc < 1:
        raise ValidationError("m_loc must be >= 1")
    x = number_plus(basis).astype(np.float64) / float(m_loc)
    return _profile_f(x), _profile_g(x), _profile_cf()


def one_body_dm(psi: np.ndarray, basis: OccupationBasis):
    """One-body density matrices gamma[m,n] = <adag_n a_m>, alpha[m,n] =
    <a_n a_m> of a normalized coefficient vector."""
    psi = np.asarray(psi)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ValidationError("psi must be normalized")
    M = basis.M
    keys_sorted, key_perm, shifts = basis.lookup_arrays()
    states = basis.states
    ket_keys = (states << shifts[None, :]).sum(axis=1)
    dtype = np.complex128 if np.iscomplexobj(psi) else np.float64
    gamma = np.zeros((M, M), dtype=dtype)
    alpha = np.zeros((M, M), dtype=dtype)

    def find(ikeys, valid):
        pos = np.searchsorted(keys_sorted, ikeys)
        ok = pos < keys_sorted.shape[0]
        pos_safe = np.where(ok, pos, 0)
        found = valid & ok & (keys_sorted[pos_safe] == ikeys)
        return key_perm[pos_safe], found

    for m in range(M):
        occ_m = states[:, m]
        for n in range(M):
            # gamma: target = s - e_m + e_n, amplitude sqrt(s_m (s_n - d_mn + 1))
            f1 = occ_m
            f2 = states[:, n] - (1 if m == n else 0) + 1
            valid = f1 > 0
            amp = np.sqrt(np.maximum(f1, 0)) * np.sqrt(np.maximum(f2, 0))
            ikeys = ket_keys - (1 << shifts[m]) + (1 << shifts[n])
            idx, found = find(ikeys, valid)
            if found.any():
                gamma[m, n] = np.sum(
                    np.conj(psi[idx[found]]) * amp[found] * psi[found]
                )
            # alpha: target = s - e_m - e_n, amplitude sqrt(s_m (s_n - d_mn))
            g2 = states[:, n] - (1 if m == n else 0)
            valid = (f1 > 0) & (g2 > 0)
            amp = np.sqrt(np.maximum(f1, 0)) * np.sqrt(np.maximum(g2, 0))
            ikeys = ket_keys - (1 << shifts[m]) - (1 << shifts[n])
            idx, found = find(ikeys, valid)
            if found.any():
                alpha[m, n] = np.sum(
                    np.conj(psi[idx[found]]) * amp[found] * psi[found]
                )
    return gamma, alpha


def condensation_fraction(psi: np.ndarray, basis: OccupationBasis) -> float:
    """<n_0>_psi / N for a sector-N vector; 1 means full condensation."""
    if basis.kind != "sector":
        raise ValidationError("condensation fraction needs a sector basis")
    psi = np.asarray(psi)
    weight = float(np.sum(basis.states[:, 0] * np.abs(psi) ** 2))
    return weight / float(basis.total)


def gibbs_objects(h, beta: float, cap: int = GIBBS_DENSE_CAP):
    """(free energy, normalized Gibbs matrix) from the full dense spectrum.

    Uses a max-shifted log-sum-exp; needs the complete spectrum, so the
    dimension is capped -- restrict the model size rather than approximate.
    """
    if beta <= 0:
        raise ValidationError("beta must be positive")
    a = h.to_dense() if isinstance(h, SparseHermitian) else np.asarray(h)
    if a.shape[0] > cap:
        raise ResourceLimitError(
            f"dense Gibbs needs the full spectrum; dim {a.shape[0]} exceeds "
            f"{cap}. Restrict the model or use a spectrum-window "
            f"approximation.", estimate=a.shape[0]
        )
    vals, vecs = np.linalg.eigh(a)
    w = np.exp(-beta * (vals - vals[0]))
    z = float(w.sum())
    free_energy = float(vals[0] - np.log(z) / beta)
    gibbs = (vecs * (w / z)[None, :]) @ vecs.conj().T
    return free_energy, gibbs
