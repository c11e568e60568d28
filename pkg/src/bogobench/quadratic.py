"""Exact treatment of quadratic boson Hamiltonians on d excitation modes:
symplectic diagonalization, spectrum enumeration, quasi-free ground-state
density matrices, thermal sums, and the X_t bisection cross check.

Conventions. The form data is (H, K) with H Hermitian, K symmetric; the block
matrix A = [[H, K], [K*, conj(H)]] must be positive definite (gap eta > 0).
The transform blocks are stored mode-major: column i of (U, V) is the i-th
quasiparticle, with U^dag U - V^dag V = 1 and U^T V symmetric. The ground
state has gamma = conj(V) V^T and alpha = -conj(V) U^T, and the ground energy
of the normal-ordered form is E0 = (sum_i xi_i - Tr H) / 2, certified against
truncated-Fock diagonalization in the test suite rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, GapViolationError, ResourceLimitError, ValidationError
from .eigen import require_hermitian

ENUM_HARD_CAP = 5_000_000


@dataclass
class QuadraticForm:
    H: np.ndarray
    K: np.ndarray
    is_real: bool

    def __post_init__(self):
        self.H = require_hermitian(np.asarray(self.H))
        k = np.asarray(self.K)
        if k.shape != self.H.shape:
            raise ValidationError(f"H and K shapes differ: {self.H.shape} vs {k.shape}")
        if np.abs(k - k.T).max(initial=0.0) > 1e-12 * (1.0 + np.abs(k).max(initial=0.0)):
            raise ValidationError("K must be symmetric (K^T = K)")
        self.K = k
        if self.is_real and (np.iscomplexobj(self.H) or np.iscomplexobj(k)):
            if max(np.abs(self.H.imag).max(), np.abs(k.imag).max()) > 1e-14:
                raise ValidationError("is_real set but H or K has imaginary entries")
            self.H = self.H.real
            self.K = k.real

    @property
    def d(self) -> int:
        return self.H.shape[0]

    def block(self) -> np.ndarray:
        a = np.block([[self.H, self.K],
                      [self.K.conj().T, np.conj(self.H)]])
        return 0.5 * (a + a.conj().T)

    def eta(self) -> float:
        return float(np.linalg.eigvalsh(self.block())[0])

    @classmethod
    def from_hartree(cls, sol) -> "QuadraticForm":
        is_real = not (np.iscomplexobj(sol.h_plus) or np.iscomplexobj(sol.K1)
                       or np.iscomplexobj(sol.K2))
        return cls(sol.h_plus + sol.K1, sol.K2, is_real)


@dataclass
class BogoliubovSpectrum:
    xi: np.ndarray
    E0: float
    U: np.ndarray
    V: np.ndarray

    @property
    def d(self) -> int:
        return self.xi.shape[0]

    def transform_residuals(self) -> tuple[float, float]:
        """(||U^dag U - V^dag V - 1||_max, ||U^T V - (U^T V)^T||_max)."""
        eye = np.eye(self.d)
        r1 = np.abs(self.U.conj().T @ self.U - self.V.conj().T @ self.V - eye).max()
        utv = self.U.T @ self.V
        r2 = np.abs(utv - utv.T).max()
        return float(r1), float(r2)


@dataclass
class QuasiFreePair:
    gamma: np.ndarray
    alpha: np.ndarray

    def residuals(self) -> tuple[float, float, float]:
        """Violations of the pure quasi-free identities.

        (||alpha alpha^dag - gamma(1 + conj(gamma))||, ||gamma alpha -
        alpha conj(gamma)||, ||alpha - alpha^T||), all max-norm.
        """
        g, a = self.gamma, self.alpha
        eye = np.eye(g.shape[0])
        r1 = np.abs(a @ a.conj().T - g @ (eye + np.conj(g))).max()
        r2 = np.abs(g @ a - a @ np.conj(g)).max()
        r3 = np.abs(a - a.T).max()
        return float(r1), float(r2), float(r3)


def _sa_eigensystem(block: np.ndarray, d: int, eta: float):
    """Positive-frequency eigenpairs of S*A with S-orthonormalized vectors."""
    s_diag = np.concatenate([np.ones(d), -np.ones(d)])
    sa = s_diag[:, None] * block
    lam, vecs = np.linalg.eig(sa)
    scale = float(np.abs(lam).max(initial=1.0))
    if np.abs(lam.imag).max(initial=0.0) > 1e-8 * (1.0 + scale):
        raise ValidationError(
            f"S*A eigenvalue with imaginary part "
            f"{np.abs(lam.imag).max():.3e}: block matrix not compatible with "
            f"a positive gap"
        )
    lam = lam.real
    # eigenvalues come in (+xi, -xi) pairs; compare the branches as sorted
    # multisets so degenerate frequencies pass
    plus = np.sort(lam[lam > 0])
    minus = np.sort(-lam[lam < 0])
    if plus.size != d or minus.size != d or \
            np.abs(plus - minus).max(initial=0.0) > 1e-8 * (1.0 + scale):
        raise ConvergenceError(
            "S*A spectrum does not split into matching +/- pairs"
        )
    pos = np.flatnonzero(lam > 0)
    if pos.size != d:
        raise ConvergenceError(
            f"expected {d} positive S*A eigenvalues, found {pos.size}"
        )
    xi = lam[pos]
    asc = np.argsort(xi, kind="stable")
    pos = pos[asc]
    xi = xi[asc]
    x = vecs[:d, pos]
    y = vecs[d:, pos]
    # S-orthonormalize within near-degenerate groups; across groups the
    # indefinite form is orthogonal automatically
    tol = 1e-8 * (1.0 + scale)
    start = 0
    while start < d:
        stop = start + 1
        while stop < d and xi[stop] - xi[stop - 1] <= tol:
            stop += 1
        xg = x[:, start:stop]
        yg = y[:, start:stop]
        gram = xg.conj().T @ xg - yg.conj().T @ yg
        gram = 0.5 * (gram + gram.conj().T)
        gvals, gvecs = np.linalg.eigh(gram)
        if gvals[0] <= 0:
            raise ConvergenceError(
                "positive-frequency eigenvectors are not S-positive; "
                f"Gram eigenvalue {gvals[0]:.3e}"
            )
        trans = gvecs @ np.diag(1.0 / np.sqrt(gvals)) @ gvecs.conj().T
        x[:, start:stop] = xg @ trans
        y[:, start:stop] = yg @ trans
        start = stop
    return xi, x, y


def diagonalize(qf: QuadraticForm) -> BogoliubovSpectrum:
    """Frequencies xi, ground energy E0 and transform blocks (U, V).

    Real data goes through the symmetric product
    (H-K)^(1/2) (H+K) (H-K)^(1/2), whose eigenvalues are xi^2; the general
    path takes the positive spectrum of S*A. On real input both paths are
    computed and must agree to 1e-9.
    """
    block = qf.block()
    eta = float(np.linalg.eigvalsh(block)[0])
    if eta <= 0:
        raise GapViolationError(eta)
    d = qf.d
    if np.abs(qf.K).max(initial=0.0) == 0.0:
        vals, vecs = np.linalg.eigh(qf.H)
        return BogoliubovSpectrum(
            xi=vals, E0=0.0, U=vecs, V=np.zeros_like(vecs)
        )

    if qf.is_real:
        b = qf.H - qf.K
        a = qf.H + qf.K
        bvals, bvecs = np.linalg.eigh(b)
        if bvals[0] <= 0:
            raise GapViolationError(float(bvals[0]),
                                    f"H - K not positive definite: "
                                    f"lambda_min = {bvals[0]:.6e}")
        broot = (bvecs * np.sqrt(bvals)[None, :]) @ bvecs.T
        brinv = (bvecs * (1.0 / np.sqrt(bvals))[None, :]) @ bvecs.T
        c = broot @ a @ broot
        w2, phi = np.linalg.eigh(0.5 * (c + c.T))
        if w2[0] <= 0:
            raise GapViolationError(float(w2[0]),
                                    "squared frequencies not positive")
        xi = np.sqrt(w2)
        psi = (broot @ phi) / np.sqrt(xi)[None, :]
        chi = (brinv @ phi) * np.sqrt(xi)[None, :]
        u = 0.5 * (chi + psi)
        v = 0.5 * (chi - psi)
        xi_sa, _, _ = _sa_eigensystem(block, d, eta)
        if np.abs(xi - xi_sa).max() > 1e-9 * (1.0 + float(xi.max())):
            raise ConvergenceError(
                f"real-path and S*A frequencies disagree by "
                f"{np.abs(xi - xi_sa).max():.3e}"
            )
    else:
        xi, u, v = _sa_eigensystem(block, d, eta)

    e0 = 0.5 * float(xi.sum() - np.real(np.trace(qf.H)))
    spec = BogoliubovSpectrum(xi=xi, E0=e0, U=u, V=v)
    r1, r2 = spec.transform_residuals()
    if max(r1, r2) > 1e-8 * (1.0 + float(np.abs(spec.U).max()) ** 2):
        raise ConvergenceError(
            f"symplectic conditions violated: residuals {r1:.3e}, {r2:.3e}"
        )
    return spec


def xi_min_via_Xt(qf: QuadraticForm, bracket: tuple[float, float] | None = None,
                  tol: float = 1e-10) -> float:
    """Smallest frequency by bisecting t -> lambda_min(H + K - t^2/(H-K)).

    The map is continuous and strictly decreasing in t, positive at t below
    the smallest frequency and negative above it, so the first sign change of
    the lowest eigenvalue is the smallest frequency. Real data only.
    """
    if not qf.is_real or np.iscomplexobj(qf.H) or np.iscomplexobj(qf.K):
        raise ValidationError("X_t bisection is defined for real form data")
    eta = qf.eta()
    if eta <= 0:
        raise GapViolationError(eta)
    b = qf.H - qf.K
    bvals, bvecs = np.linalg.eigh(b)
    if bvals[0] <= 0:
        raise GapViolationError(float(bvals[0]))
    binv = (bvecs * (1.0 / bvals)[None, :]) @ bvecs.T
    a = qf.H + qf.K

    def lam_min(t: float) -> float:
        return float(np.linalg.eigvalsh(a - (t * t) * binv)[0])

    if bracket is None:
        knorm = float(np.abs(np.linalg.eigvalsh(qf.K)).max(initial=0.0))
        bracket = (0.5 * eta, float(np.real(np.trace(qf.H))) + knorm * qf.d)
    lo, hi = bracket
    flo, fhi = lam_min(lo), lam_min(hi)
    if not (flo > 0.0 > fhi):
        raise ValidationError(
            f"bracket ({lo!r}, {hi!r}) does not straddle a root: "
            f"lambda_min = ({flo:.6e}, {fhi:.6e})"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lam_min(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def enumerate_spectrum(spec: BogoliubovSpectrum, window: float,
                       max_count: int) -> tuple[np.ndarray, bool]:
    """All levels E0 + sum_i n_i xi_i within ``window`` of E0, sorted with
    multiplicity; returns (values, truncated). ``truncated`` is set when more
    than ``max_count`` levels fit in the window."""
    if window <= 0:
        raise ValidationError("window must be positive")
    if np.any(spec.xi <= 0):
        raise ValidationError("all frequencies must be positive")
    slack = window + 1e-12 * (1.0 + abs(window))
    sums = np.zeros(1)
    for x in spec.xi:
        if x > slack:
            break
        kmax = int(np.floor(slack / x))
        chunks = [sums + k * x for k in range(kmax + 1)]
        sums = np.concatenate(chunks)
        sums = sums[sums <= slack]
        if sums.size > ENUM_HARD_CAP:
            raise ResourceLimitError(
                f"spectrum enumeration exceeds {ENUM_HARD_CAP} levels",
                estimate=int(sums.size),
            )
    sums.sort(kind="stable")
    truncated = sums.size > max_count
    if truncated:
        sums = sums[:max_count]
    return spec.E0 + sums, truncated


def ground_state_dm(spec: BogoliubovSpectrum) -> QuasiFreePair:
    """One-body density matrices of the (pure, quasi-free) ground state."""
    gamma = np.conj(spec.V) @ spec.V.T
    alpha = -np.conj(spec.V) @ spec.U.T
    pair = QuasiFreePair(gamma=gamma, alpha=alpha)
    scale = 1.0 + float(np.abs(gamma).max(initial=0.0)) ** 2
    if max(pair.residuals()) > 1e-10 * scale:
        raise ConvergenceError(
            f"quasi-free identities violated: residuals {pair.residuals()}"
        )
    return pair


def evaluate_q(qf: QuadraticForm, pair: QuasiFreePair) -> float:
    """Energy of a quasi-free pair: Tr[H gamma] + Re Tr[K conj(alpha)].

    The pairing term contracts K against the conjugate of alpha; for real
    data this is the plain Tr[K alpha]. For any valid pair the value is
    bounded below by E0 (variational principle over quasi-free states).
    """
    if pair.gamma.shape != qf.H.shape:
        raise ValidationError("shape mismatch between form and pair")
    e_one = float(np.real(np.trace(qf.H @ pair.gamma)))
    e_pair = float(np.real(np.sum(qf.K * np.conj(pair.alpha))))
    return e_one + e_pair


def free_energy_bogoliubov(spec: BogoliubovSpectrum, beta: float) -> float:
    """E0 + beta^-1 sum_i log(1 - e^(-beta xi_i)).

    Equals -beta^-1 log of the full thermal trace of the diagonalized form.
    Increases with beta and tends to E0 from below as beta -> infinity.
    """
    if beta <= 0:
        raise ValidationError("beta must be positive")
    if np.any(spec.xi <= 0):
        raise ValidationError(f"xi_min = {spec.xi.min():.6e} <= 0")
    return float(spec.E0 + np.sum(np.log1p(-np.exp(-beta * spec.xi))) / beta)
