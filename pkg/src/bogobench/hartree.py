"""Mean-field ground state of a finite-mode model and the operators of the
fluctuation expansion around it.

The minimizer runs projected gradient descent on the unit sphere with Armijo
backtracking and seeded multi-restarts; restart agreement probes uniqueness of
the minimizer up to a phase. The global phase is fixed by rotating the first
component of u0 to be real nonnegative, and the basis rotation R (Householder,
column 0 = u0) carries the tensors into the frame where mode 0 is the
condensate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .model import ModelSystem, validate_model

ARMIJO_DECREASE = 1e-4
TIE_RTOL = 1e-12  # restart energies closer than this count as ties


def _require_unit(u: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    u = np.asarray(u)
    nrm = np.linalg.norm(u)
    if abs(nrm - 1.0) > tol:
        raise ValidationError(f"vector is not normalized: ||u|| = {nrm!r}")
    return u


def hartree_energy(m: ModelSystem, u: np.ndarray) -> float:
    """<u,Tu> + (1/2) sum W[m,n,p,q] conj(u_m) conj(u_n) u_p u_q."""
    u = _require_unit(u)
    idx, vals = m.w_arrays()
    cu = np.conj(u)
    quart = 0.0
    if len(vals):
        quart = np.sum(vals * cu[idx[:, 0]] * cu[idx[:, 1]]
                       * u[idx[:, 2]] * u[idx[:, 3]])
    return float(np.real(np.vdot(u, m.T @ u)) + 0.5 * np.real(quart))


def mean_field_matrix(m: ModelSystem, u: np.ndarray) -> np.ndarray:
    """MF[r,p] = sum_{n,q} W[r,n,p,q] conj(u_n) u_q (the |u|^2 * w operator)."""
    idx, vals = m.w_arrays()
    dtype = np.float64 if (m.is_real and not np.iscomplexobj(u)) else np.complex128
    mf = np.zeros((m.M, m.M), dtype=dtype)
    if len(vals):
        contrib = vals * np.conj(u)[idx[:, 1]] * u[idx[:, 3]]
        np.add.at(mf, (idx[:, 0], idx[:, 2]), contrib)
    return mf


def hartree_gradient(m: ModelSystem, u: np.ndarray) -> np.ndarray:
    """Tangent-projected Euclidean gradient 2*(T u + MF(u) u)."""
    u = _require_unit(u)
    g = 2.0 * (m.T @ u + mean_field_matrix(m, u) @ u)
    return g - u * np.vdot(u, g)


@dataclass
class HartreeSolution:
    u0: np.ndarray
    e_H: float
    mu_H: float
    R: np.ndarray
    h_plus: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    eta_H: float
    grad_norm: float
    restart_agreement: float
    nonunique_warning: bool


def householder_from_e0(u0: np.ndarray) -> np.ndarray:
    """Unitary reflector R with R e0 = u0; requires <e0,u0> real nonnegative.

    Deterministic and orthogonal to machine precision; returns the identity
    when u0 is e0 itself, so exact anchor models stay bit-exact.
    """
    u0 = np.asarray(u0)
    M = u0.shape[0]
    if abs(np.imag(u0[0])) > 1e-12 or np.real(u0[0]) < -1e-12:
        raise ValidationError("householder_from_e0 needs u0[0] real nonnegative")
    e0 = np.zeros_like(u0)
    e0[0] = 1.0
    v = u0 - e0
    s = np.real(np.vdot(v, v))
    if s == 0.0:
        return np.eye(M, dtype=u0.dtype)
    return np.eye(M, dtype=np.result_type(u0.dtype, float)) - (2.0 / s) * np.outer(v, np.conj(v))


def _gauge_phase(u: np.ndarray) -> np.ndarray:
    """Rotate the global phase so u[0] is real nonnegative (no-op if it is)."""
    c = complex(u[0])
    if c == 0:
        return u
    if c.imag == 0.0 and c.real > 0.0:
        return u
    ph = np.conj(c) / abs(c)
    out = ph * u
    if not np.iscomplexobj(u):
        out = np.real(out)
    return out


def rotate_model(m: ModelSystem, r: np.ndarray, name: str | None = None) -> ModelSystem:
    """All four W legs and T rotated into the basis given by R's columns."""
    rc = np.conj(r)
    t_rot = r.conj().T @ m.T @ r
    wd = m.w_dense()
    w1 = np.einsum("ma,mnpq->anpq", rc, wd)
    w2 = np.einsum("nb,anpq->abpq", rc, w1)
    w3 = np.einsum("pc,abpq->abcq", r, w2)
    w4 = np.einsum("qd,abcq->abcd", r, w3)
    is_real = m.is_real and not np.iscomplexobj(r)
    if is_real:
        t_rot = np.real(t_rot)
        w4 = np.real(w4)
    w_dict = {tuple(int(i) for i in k): w4[tuple(k)] for k in zip(*np.nonzero(w4))}
    return ModelSystem(name or (m.name + "_rotated"), t_rot, w_dict, is_real=is_real)


def build_excitation_operators(m: ModelSystem, u0: np.ndarray):
    """Rotate to the condensate frame and slice out (h_plus, K1, K2).

    Returns (R, h_plus, K1, K2, mu_H). In the rotated tensor Wt (all legs
    carried by R): h[m,n] = Tt[m,n] + Wt[m,0,n,0] - mu_H delta,
    K1[m,n] = Wt[m,0,0,n], K2[m,n] = Wt[m,n,0,0], restricted to modes >= 1.
    """
    u0 = _require_unit(np.asarray(u0))
    u0 = _gauge_phase(u0)
    r = householder_from_e0(u0)
    rotated = rotate_model(m, r)
    t_rot = rotated.T
    wt = rotated.w_dense()
    mu_h = float(np.real(t_rot[0, 0]) + np.real(wt[0, 0, 0, 0]))
    h_full = t_rot + wt[:, 0, :, 0] - mu_h * np.eye(m.M, dtype=t_rot.dtype)
    h_plus = h_full[1:, 1:]
    k1 = wt[1:, 0, 0, 1:]
    k2 = wt[1:, 1:, 0, 0]
    return r, h_plus, k1, k2, mu_h


def hessian_gap(h_plus: np.ndarray, k1: np.ndarray, k2: np.ndarray,
                is_real: bool) -> float:
    """Smallest eigenvalue of the doubled Hessian block matrix.

    In the real case the block matrix decouples into h+K1+K2 and h+K1-K2;
    both routes are computed and must agree to 1e-10.
    """
    a = h_plus + k1
    block = np.block([[a, k2], [k2.conj().T, np.conj(a)]])
    eta_block = float(np.linalg.eigvalsh(0.5 * (block + block.conj().T))[0])
    if is_real and not (np.iscomplexobj(a) or np.iscomplexobj(k2)):
        plus = np.linalg.eigvalsh(0.5 * ((a + k2) + (a + k2).T))[0]
        minus = np.linalg.eigvalsh(0.5 * ((a - k2) + (a - k2).T))[0]
        eta_real = float(min(plus, minus))
        scale = 1.0 + max(abs(eta_block), abs(eta_real))
        if abs(eta_block - eta_real) > 1e-10 * scale:
            raise ConvergenceError(
                f"Hessian gap paths disagree: block {eta_block!r} vs "
                f"real reduction {eta_real!r}"
            )
    return eta_block


def _euclidean_gradient(m: ModelSystem, u: np.ndarray) -> np.ndarray:
    return 2.0 * (m.T @ u + mean_field_matrix(m, u) @ u)


def _hessvec(m: ModelSystem, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Real-linear derivative of the Euclidean gradient in direction v."""
    idx, vals = m.w_arrays()
    out = m.T @ v
    if len(vals):
        cu, cv = np.conj(u), np.conj(v)
        accum = np.zeros(m.M, dtype=np.result_type(vals, u, v))
        contrib = (vals * cv[idx[:, 1]] * u[idx[:, 2]] * u[idx[:, 3]]
                   + vals * cu[idx[:, 1]] * v[idx[:, 2]] * u[idx[:, 3]]
                   + vals * cu[idx[:, 1]] * u[idx[:, 2]] * v[idx[:, 3]])
        np.add.at(accum, idx[:, 0], contrib)
        out = out + accum
    return 2.0 * out


def _to_real(u: np.ndarray, complex_mode: bool) -> np.ndarray:
    return np.concatenate([u.real, u.imag]) if complex_mode else u.real


def _from_real(x: np.ndarray, complex_mode: bool) -> np.ndarray:
    if not complex_mode:
        return x
    m = x.shape[0] // 2
    return x[:m] + 1j * x[m:]


def _newton_polish(m: ModelSystem, u: np.ndarray, tol: float,
                   max_steps: int = 50):
    """Equality-constrained Newton on the sphere; quadratic local rate.

    The bordered system is solved by least squares, which also absorbs the
    global-phase null direction of complex models. Returns (u, grad_norm).
    """
    complex_mode = np.iscomplexobj(u)
    nreal = 2 * m.M if complex_mode else m.M
    basis = np.eye(nreal)
    best_u = u
    best_gn = float(np.linalg.norm(hartree_gradient(m, u)))
    for _ in range(max_steps):
        if best_gn <= tol:
            break
        x = _to_real(u, complex_mode)
        g = _to_real(_euclidean_gradient(m, u), complex_mode)
        lam = 0.5 * float(x @ g)
        hess = np.empty((nreal, nreal))
        for j in range(nreal):
            v = _from_real(basis[j], complex_mode)
            hess[:, j] = _to_real(_hessvec(m, u, v), complex_mode)
        hess = 0.5 * (hess + hess.T)
        kkt = np.zeros((nreal + 1, nreal + 1))
        kkt[:nreal, :nreal] = hess - 2.0 * lam * np.eye(nreal)
        kkt[:nreal, nreal] = -2.0 * x
        kkt[nreal, :nreal] = 2.0 * x
        rhs = np.concatenate([-(g - 2.0 * lam * x), [1.0 - float(x @ x)]])
        step = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:nreal]
        improved = False
        scale = 1.0
        for _ in range(8):
            cand = _from_real(x + scale * step, complex_mode)
            cand = cand / np.linalg.norm(cand)
            gn = float(np.linalg.norm(hartree_gradient(m, cand)))
            if gn < best_gn:
                u, best_u, best_gn = cand, cand, gn
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
    return best_u, best_gn


def _descend(m: ModelSystem, u: np.ndarray, tol: float, max_iter: int,
             step0: float):
    """Projected gradient descent with Armijo backtracking (factor 1/2),
    followed by a Newton polish once the gradient is small. The first-order
    phase alone stalls near sqrt(machine eps) because the Armijo decrease
    drops below float resolution of the energy."""
    u = u / np.linalg.norm(u)
    energy = hartree_energy(m, u)
    step = step0
    phase_tol = max(tol, 1e-6)
    for _ in range(max_iter):
        g = hartree_gradient(m, u)
        gn = float(np.linalg.norm(g))
        if gn <= phase_tol:
            break
        s = min(2.0 * step, 1e3)
        accepted = False
        while s > 1e-18:
            cand = u - s * g
            cand = cand / np.linalg.norm(cand)
            e_cand = hartree_energy(m, cand)
            if e_cand <= energy - ARMIJO_DECREASE * s * gn * gn:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        u, energy, step = cand, e_cand, s
    u, gn = _newton_polish(m, u, tol)
    return u, hartree_energy(m, u), gn, gn <= tol


def minimize_hartree(m: ModelSystem, restarts: int = 8, tol: float = 1e-10,
                     max_iter: int = 20000, step0: float = 1.0,
                     seed: int = 0) -> HartreeSolution:
    """Best-of-restarts mean-field minimizer returning the full solution.

    Restart 0 starts from e0; the rest from seeded random unit vectors.
    Energies within 1e-12*(1+|E|) are ties, resolved toward the lowest
    restart index, so exact critical-point starts are not displaced by
    round-off. restart_agreement = min_r |<u0_best, u0_r>| over converged
    restarts; below 0.999 the solution carries a non-uniqueness warning.
    """
    report = validate_model(m)
    if not report.passed:
        raise ValidationError(f"model failed validation: {report}")
    rng = np.random.default_rng(seed)
    dtype = np.float64 if m.is_real else np.complex128
    starts = []
    e0 = np.zeros(m.M, dtype=dtype)
    e0[0] = 1.0
    starts.append(e0)
    for _ in range(max(0, restarts - 1)):
        v = rng.standard_normal(m.M)
        if dtype == np.complex128:
            v = v + 1j * rng.standard_normal(m.M)
        starts.append(v / np.linalg.norm(v))

    results = [_descend(m, s, tol, max_iter, step0) for s in starts]
    converged = [(i, r) for i, r in enumerate(results) if r[3]]
    if not converged:
        summary = "; ".join(
            f"restart {i}: E={r[1]:.12g}, |grad|={r[2]:.3e}"
            for i, r in enumerate(results)
        )
        raise ConvergenceError(f"no Hartree restart converged: {summary}")

    best_i, best = converged[0]
    for i, r in converged[1:]:
        if r[1] < best[1] - TIE_RTOL * (1.0 + abs(best[1])):
            best_i, best = i, r
    u0, e_h, grad_norm, _ = best
    agreement = min(abs(np.vdot(u0, r[0])) for _, r in converged)

    u0 = _gauge_phase(u0)
    r_mat, h_plus, k1, k2, mu_h = build_excitation_operators(m, u0)
    eta = hessian_gap(h_plus, k1, k2, m.is_real)
    return HartreeSolution(
        u0=u0,
        e_H=e_h,
        mu_H=mu_h,
        R=r_mat,
        h_plus=h_plus,
        K1=k1,
        K2=k2,
        eta_H=eta,
        grad_norm=grad_norm,
        restart_agreement=float(agreement),
        nonunique_warning=bool(agreement < 0.999),
    )
