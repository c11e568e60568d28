"""Spectral kernels shared by the whole pipeline.

Dense paths wrap LAPACK (``numpy.linalg.eigh``); the sparse lowest-eigenpair
solver is a Lanczos iteration with full reorthogonalization and deflation
restarts, written here so that multiplicities are resolved and runs are
reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError, ValidationError

HERMITICITY_RTOL = 1e-12


def require_hermitian(a: np.ndarray, rtol: float = HERMITICITY_RTOL) -> np.ndarray:
    """Validate ||A - A^dag||_max <= rtol*(1 + ||A||_max); return A unchanged."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    asym = np.abs(a - a.conj().T)
    amax = np.abs(a).max(initial=0.0)
    worst = asym.max(initial=0.0)
    if worst > rtol * (1.0 + amax):
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        raise ValidationError(
            f"matrix is not Hermitian: max asymmetry {worst:.3e} at entry "
            f"({i},{j}) = {a[i, j]!r} vs conj(A[{j},{i}]) = {np.conj(a[j, i])!r}"
        )
    return a


@dataclass
class EigResult:
    """Eigenpairs in ascending order; ``vectors[:, i]`` belongs to ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.values) < 0):
            raise ValidationError("eigenvalues not sorted ascending")


def eigh_dense(a: np.ndarray) -> EigResult:
    """Full spectral decomposition of a Hermitian matrix."""
    a = require_hermitian(a)
    vals, vecs = np.linalg.eigh(a)
    res = np.linalg.norm(a @ vecs - vecs * vals[None, :], axis=0)
    return EigResult(values=vals, vectors=vecs, residuals=res)


def sqrt_psd(a: np.ndarray, floor: float) -> np.ndarray:
    """Hermitian square root of a positive definite matrix.

    ``floor`` is the caller's certified lower bound on the spectrum; an
    eigenvalue below it signals a gap violation upstream and raises.
    """
    if not floor > 0:
        raise ValidationError(f"floor must be positive, got {floor!r}")
    a = require_hermitian(a)
    vals, vecs = np.linalg.eigh(a)
    lam_min = float(vals[0])
    if lam_min < floor:
        raise ValidationError(
            f"matrix not positive definite above floor: lambda_min = "
            f"{lam_min:.6e} < floor = {floor:.6e}"
        )
    root = (vecs * np.sqrt(vals)[None, :]) @ vecs.conj().T
    return 0.5 * (root + root.conj().T)


def trace_norm_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of |eigenvalues| of (A - B); symmetric in its arguments."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = require_hermitian(a - b, rtol=1e-10)
    return float(np.abs(np.linalg.eigvalsh(d)).sum())


class SparseHermitian:
    """Hermitian sparse matrix stored as upper-triangle triplets (row <= col).

    The full matrix is implied by conjugate symmetry, so Hermiticity is exact
    by construction. Triplets are merged (duplicates summed in emission order)
    and sorted at assembly; matvec goes through a cached SciPy CSR matrix.
    """

    def __init__(self, dim: int, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray):
        self.dim = int(dim)
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self._csr = None

    @classmethod
    def from_triplets(cls, dim, rows, cols, vals) -> "SparseHermitian":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals)
        if vals.dtype not in (np.float64, np.complex128):
            vals = vals.astype(np.complex128 if np.iscomplexobj(vals) else np.float64)
        if rows.size and (rows.min(initial=0) < 0 or cols.max(initial=-1) >= dim):
            raise ValidationError("triplet index out of range")
        if np.any(rows > cols):
            raise ValidationError("triplets must satisfy row <= col")
        if rows.size:
            # stable sort keeps emission order inside duplicate groups, so the
            # merged sums are reproducible independent of backend
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            keys = rows * dim + cols
            boundaries = np.flatnonzero(np.diff(keys)) + 1
            starts = np.concatenate(([0], boundaries))
            merged = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
            keep = merged != 0
            rows, cols, vals = rows[keep], cols[keep], merged[keep]
        diag = rows == cols
        if vals.size and np.iscomplexobj(vals) and diag.any():
            dmax = np.abs(vals[diag].imag).max(initial=0.0)
            scale = np.abs(vals).max(initial=0.0)
            if dmax > 1e-12 * (1.0 + scale):
                raise ValidationError(f"diagonal entry has imaginary part {dmax:.3e}")
        return cls(dim, rows, cols, vals)

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "SparseHermitian":
        a = require_hermitian(a)
        r, c = np.nonzero(a)
        keep = r <= c
        return cls.from_triplets(a.shape[0], r[keep], c[keep], a[r[keep], c[keep]])

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    def to_csr(self) -> sps.csr_matrix:
        if self._csr is None:
            off = self.rows != self.cols
            r = np.concatenate([self.rows, self.cols[off]])
            c = np.concatenate([self.cols, self.rows[off]])
            v = np.concatenate([self.vals, np.conj(self.vals[off])])
            self._csr = sps.csr_matrix((v, (r, c)), shape=(self.dim, self.dim))
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_csr() @ x

    def subtract(self, other: "SparseHermitian") -> "SparseHermitian":
        if self.dim != other.dim:
            raise ValidationError("dimension mismatch")
        return SparseHermitian.from_triplets(
            self.dim,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate(
                [self.vals.astype(np.result_type(self.vals, other.vals, -1.0)),
                 -other.vals]
            ),
        )

    def scaled(self, c: float) -> "SparseHermitian":
        return SparseHermitian(self.dim, self.rows.copy(), self.cols.copy(),
                               self.vals * c)

    def add_to_diagonal(self, c: float) -> "SparseHermitian":
        d = np.arange(self.dim, dtype=np.int64)
        return SparseHermitian.from_triplets(
            self.dim,
            np.concatenate([self.rows, d]),
            np.concatenate([self.cols, d]),
            np.concatenate([self.vals, np.full(self.dim, c, dtype=self.vals.dtype if self.vals.size else float)]),
        )


def _project_out(w: np.ndarray, block) -> np.ndarray:
    if np.iscomplexobj(block):
        coefs = np.conj(block @ np.conj(w))
    else:
        coefs = block @ w
    return w - block.T @ coefs


def _orthogonalize(w: np.ndarray, basis_blocks) -> np.ndarray:
    """Full reorthogonalization against row-major blocks of vectors.

    One classical Gram-Schmidt pass over every kept vector, with a second
    pass when cancellation ate more than half the norm (DGKS criterion).
    Only vectors are conjugated so no block-sized temporaries are made.
    """
    blocks = [b for b in basis_blocks if b is not None and b.shape[0]]
    if not blocks:
        return w
    before = np.linalg.norm(w)
    for block in blocks:
        w = _project_out(w, block)
    if np.linalg.norm(w) < 0.5 * before:
        for block in blocks:
            w = _project_out(w, block)
    return w


def lanczos_lowest(
    a: SparseHermitian,
    k: int,
    tol: float = 1e-10,
    max_iter: int = 20000,
    seed: int = 0,
) -> EigResult:
    """Lowest ``k`` eigenpairs (with multiplicity) of a sparse Hermitian matrix.

    One eigenpair is extracted per deflated restart: each sweep runs Lanczos
    with full reorthogonalization against both the current Krylov basis and
    the already-converged vectors, and only the lowest converged Ritz pair is
    kept. This resolves degenerate eigenvalues, which a single Krylov space
    cannot see. ``max_iter`` caps the total number of matvecs; the residual
    scale ||A||_est is the largest |Ritz value| encountered.
    """
    n = a.dim
    if k >= n:
        return eigh_dense(a.to_dense())
    if k < 1:
        raise ValidationError("k must be >= 1")
    if a.nnz == 0 or np.all(a.rows == a.cols):
        # exactly diagonal: read off the lowest entries directly
        diag = np.zeros(n, dtype=a.vals.dtype if a.vals.size else float)
        diag[a.rows] = a.vals
        order = np.argsort(np.real(diag), kind="stable")[:k]
        vectors = np.zeros((n, k), dtype=diag.dtype)
        vectors[order, np.arange(k)] = 1.0
        return EigResult(values=np.real(diag[order]), vectors=vectors,
                         residuals=np.zeros(k))

    rng = np.random.default_rng(seed)
    complex_arith = np.iscomplexobj(a.vals)
    dtype = np.complex128 if complex_arith else np.float64

    kept_vals: list[float] = []
    kept_vecs: list[np.ndarray] = []
    kept_res: list[float] = []
    matvecs = 0
    norm_est = 0.0
    best_bound = np.inf
    cap = min(n, max(2 * k + 40, 80))

    def draw_start(kept_mat):
        for _ in range(20):
            v = rng.standard_normal(n)
            if complex_arith:
                v = v + 1j * rng.standard_normal(n)
            v = v.astype(dtype)
            v = _orthogonalize(v, [kept_mat])
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                return v / nv
        raise ConvergenceError("could not draw a start vector outside the kept space")

    basis_buf = np.empty((cap, n), dtype=dtype)  # Krylov vectors as rows
    warm_start = None
    while len(kept_vals) < k:
        kept_mat = np.array(kept_vecs) if kept_vecs else None
        v = draw_start(kept_mat)
        if warm_start is not None:
            # mix in the previous sweep's next Ritz vector: it speeds up the
            # common case, while the random half keeps full support so
            # degenerate copies orthogonal to it are still found
            cand = _orthogonalize(warm_start, [kept_mat])
            nv = np.linalg.norm(cand)
            if nv > 1e-6:
                v = v + cand / nv
                v = v / np.linalg.norm(v)
            warm_start = None
        alphas: list[float] = []
        betas: list[float] = []
        basis_buf[0] = v
        m = 1
        w = a.matvec(v)
        matvecs += 1
        extracted = False
        while not extracted:
            vmat = basis_buf[:m]
            alpha = float(np.real(np.vdot(vmat[m - 1], w)))
            alphas.append(alpha)
            w = w - alpha * vmat[m - 1]
            if m > 1:
                w = w - betas[-1] * vmat[m - 2]
            w = _orthogonalize(w, [kept_mat, vmat])
            beta = float(np.linalg.norm(w))

            theta, s = eigh_tridiagonal(alphas, betas)
            norm_est = max(norm_est, float(np.abs(theta).max()))
            scale = max(norm_est, 1e-300)
            bound = beta * abs(s[-1, 0])
            best_bound = min(best_bound, bound)
            exhausted = beta <= 1e-14 * max(scale, 1.0) or m >= cap
            if bound <= tol * scale or exhausted:
                y = vmat.T @ s[:, 0]
                y = _orthogonalize(y, [kept_mat])
                y = y / np.linalg.norm(y)
                ay = a.matvec(y)
                matvecs += 1
                lam = float(np.real(np.vdot(y, ay)))
                resid = float(np.linalg.norm(ay - lam * y))
                if resid <= tol * scale or beta <= 1e-14 * max(scale, 1.0):
                    kept_vals.append(lam)
                    kept_vecs.append(y)
                    kept_res.append(resid)
                    if m > 1 and s.shape[1] > 1:
                        # seed the next deflated sweep with the second Ritz
                        # vector; it already approximates the next eigenpair
                        warm_start = vmat.T @ s[:, 1]
                    extracted = True
                    continue
                if m >= cap:
                    # Krylov space full but unconverged: thick restart from
                    # the current best Ritz vector
                    alphas, betas = [], []
                    basis_buf[0] = y
                    m = 1
                    w = ay
                    continue
            if matvecs >= max_iter:
                raise ConvergenceError(
                    f"Lanczos did not converge within {max_iter} matvecs "
                    f"({len(kept_vals)}/{k} pairs kept, best residual bound "
                    f"{best_bound:.3e})",
                    residuals=np.array(kept_res + [best_bound]),
                )
            basis_buf[m] = w / beta
            betas.append(beta)
            m += 1
            w = a.matvec(basis_buf[m - 1])
            matvecs += 1

    order = np.argsort(kept_vals, kind="stable")
    values = np.array([kept_vals[i] for i in order])
    vectors = np.array([kept_vecs[i] for i in order]).T
    residuals = np.array([kept_res[i] for i in order])
    return EigResult(values=values, vectors=vectors, residuals=residuals)
