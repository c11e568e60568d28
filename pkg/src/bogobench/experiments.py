"""Study runners: eigenvalue/eigenvector convergence along an N ladder,
truncated-space residual scaling, number localization checks, thermal
convergence, and assumption validation. Each runner returns plain data and
can write a CSV with 17-significant-digit floats; identical config, seed and
thread count give byte-identical files.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fock, quadratic
from .eigen import SparseHermitian, lanczos_lowest, trace_norm_diff
from .errors import GapViolationError, ValidationError
from .hartree import HartreeSolution, minimize_hartree, rotate_model
from .model import ModelSystem, builtin_model, lattice_gas, load_model, separable_gas, validate_model

DENSE_EIG_MAX = 1200  # below this, runners use the dense path for eigenpairs


class ConfigError(ValueError):
    """Bad study configuration (usage error, not a physics failure)."""


@dataclass
class StudyConfig:
    model: dict | str
    N_list: list[int]
    L: int = 3
    beta: float | None = None
    kappa: float | None = None
    cutoff: int = 16
    M_loc_list: list[int] = field(default_factory=lambda: [4, 8])
    seed: int = 0
    output_dir: str = "runs/study"
    eps0: float = 0.25
    ims_samples: int = 200
    validate_N_list: list[int] = field(default_factory=lambda: [4, 6])
    lanczos_tol: float = 1e-11
    lanczos_max_iter: int = 400000
    hartree_restarts: int = 8
    hartree_tol: float = 1e-10

    def __post_init__(self):
        if not self.N_list:
            raise ConfigError("N_list must not be empty")
        if any(n < 2 for n in self.N_list):
            raise ConfigError(f"all N in N_list must be >= 2, got {self.N_list}")
        if any(b >= a for a, b in zip(self.N_list[1:], self.N_list)):
            raise ConfigError(f"N_list must be strictly ascending, got {self.N_list}")
        if self.L < 1:
            raise ConfigError(f"L must be >= 1, got {self.L}")
        if self.cutoff < 2:
            raise ConfigError(f"cutoff must be >= 2, got {self.cutoff}")

    @classmethod
    def from_json(cls, path) -> "StudyConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: "
                              f"{exc.msg}") from exc
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config fields {sorted(unknown)}")
        if "model" not in doc or "N_list" not in doc:
            raise ConfigError(f"{path}: 'model' and 'N_list' are required")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_model(spec) -> ModelSystem:
    """Model from a config entry: builtin name, file path, or generator."""
    if isinstance(spec, str):
        from .model import BUILTIN_MODELS
        if spec in BUILTIN_MODELS:
            return builtin_model(spec)
        return load_model(spec)
    if not isinstance(spec, dict):
        raise ConfigError(f"model spec must be a string or object, got {spec!r}")
    if "builtin" in spec:
        return builtin_model(spec["builtin"])
    if "path" in spec:
        return load_model(spec["path"])
    if "generator" in spec:
        gen = spec["generator"]
        params = spec.get("params", {})
        if gen == "lattice_gas":
            return lattice_gas(**params)
        if gen == "separable_gas":
            return separable_gas(**params)
        raise ConfigError(f"unknown generator {gen!r}")
    raise ConfigError(f"model spec needs 'builtin', 'path' or 'generator': {spec!r}")


@dataclass
class Pipeline:
    model: ModelSystem
    sol: HartreeSolution
    rotated: ModelSystem
    qf: quadratic.QuadraticForm
    spec: quadratic.BogoliubovSpectrum


def run_pipeline(model: ModelSystem, cfg: StudyConfig) -> Pipeline:
    """Hartree minimization, gap certification, quadratic diagonalization."""
    report = validate_model(model)
    if not report.passed:
        raise ValidationError(f"model {model.name!r} failed validation: {report}")
    sol = minimize_hartree(model, restarts=cfg.hartree_restarts,
                           tol=cfg.hartree_tol, seed=cfg.seed)
    if sol.eta_H <= 0:
        raise GapViolationError(sol.eta_H)
    qf = quadratic.QuadraticForm.from_hartree(sol)
    spec = quadratic.diagonalize(qf)
    rotated = rotate_model(model, sol.R, name=model.name + "_cond")
    return Pipeline(model, sol, rotated, qf, spec)


def _lowest_eigs(h: SparseHermitian, k: int, cfg: StudyConfig):
    res = lanczos_lowest(h, k, tol=cfg.lanczos_tol,
                         max_iter=cfg.lanczos_max_iter, seed=cfg.seed)
    return res.values[:k], res.vectors[:, :k]


def _spectral_norm(d: SparseHermitian, cfg: StudyConfig) -> float:
    """Largest |eigenvalue|; dense for small blocks, Lanczos above."""
    if d.nnz == 0:
        return 0.0
    if d.dim <= DENSE_EIG_MAX:
        return float(np.abs(np.linalg.eigvalsh(d.to_dense())).max())
    lo = lanczos_lowest(d, 1, tol=1e-9, seed=cfg.seed).values[0]
    hi = lanczos_lowest(d.scaled(-1.0), 1, tol=1e-9, seed=cfg.seed).values[0]
    return float(max(abs(lo), abs(hi)))


def _fix_vacuum_phase(v: np.ndarray, basis: fock.OccupationBasis) -> np.ndarray:
    """Rotate the global phase so the vacuum component is real nonnegative."""
    if basis.states[0].sum() != 0:
        return v
    c = complex(v[0])  # the vacuum is lexicographically first
    if c == 0:
        return v
    ph = np.conj(c) / abs(c)
    if ph == 1.0:
        return v
    out = ph * v
    return np.real(out) if not np.iscomplexobj(v) else out


def _truncated_overlap(v1, b1: fock.OccupationBasis, v2, b2: fock.OccupationBasis) -> float:
    """|<v1, v2>| over the common excitation states of two truncated bases."""
    if b1.dim <= b2.dim:
        small_v, small_b, big_v, big_b = v1, b1, v2, b2
    else:
        small_v, small_b, big_v, big_b = v2, b2, v1, b1
    idx = big_b.indices_of(small_b.states)
    found = idx >= 0
    acc = np.sum(np.conj(small_v[found]) * big_v[idx[found]])
    return float(abs(acc))


@dataclass
class ConvergenceRow:
    N: int
    lam_shifted: list[float]     # lambda_L(H_N) - N e_H, L = 1..L
    lam_target: list[float]      # lambda_L of the quadratic form (+ kappa shift)
    abs_err: list[float]
    condensation_deficit: float
    overlap: float
    residual_ratio: float        # abs_err_1 * N^(1/3), empirical rate constant


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    e_H: float
    mu_H: float
    eta_H: float
    xi: list[float]
    E0: float
    fitted_exponent: float

    def header(self, L: int) -> list[str]:
        cols = ["N"]
        cols += [f"lam{j}_shifted" for j in range(1, L + 1)]
        cols += [f"lam{j}_target" for j in range(1, L + 1)]
        cols += [f"abs_err{j}" for j in range(1, L + 1)]
        cols += ["condensation_deficit", "overlap", "residual_ratio"]
        return cols

    def table(self) -> list[list]:
        return [
            [r.N, *r.lam_shifted, *r.lam_target, *r.abs_err,
             r.condensation_deficit, r.overlap, r.residual_ratio]
            for r in self.rows
        ]


def bogoliubov_levels(spec: quadratic.BogoliubovSpectrum, L: int) -> np.ndarray:
    """Lowest L levels of the quadratic Hamiltonian by exact enumeration."""
    window = float(L * spec.xi.max() + 1.0)
    values, _ = quadratic.enumerate_spectrum(spec, window, max(64, 16 * L))
    if values.size < L:
        raise ValidationError(f"window {window} produced only {values.size} levels")
    return values[:L]


def run_convergence(model: ModelSystem, cfg: StudyConfig) -> ConvergenceReport:
    pipe = run_pipeline(model, cfg)
    L = cfg.L
    targets = bogoliubov_levels(pipe.spec, L)
    shift = 0.0
    if cfg.kappa is not None:
        shift = cfg.kappa * (pipe.sol.mu_H - pipe.sol.e_H)
    targets_shifted = targets + shift

    hb = fock.assemble_bogoliubov_fock(pipe.qf, cfg.cutoff)
    hb_basis = fock.truncated_basis(pipe.qf.d, cfg.cutoff)
    _, vecs = _lowest_eigs(hb, 1, cfg)
    phi = _fix_vacuum_phase(vecs[:, 0], hb_basis)

    rows = []
    for n in cfg.N_list:
        sector = fock.sector_basis(pipe.rotated.M, n)
        hn = fock.assemble_HN(pipe.rotated, n, cfg.kappa, basis=sector)
        vals, vecs_n = _lowest_eigs(hn, L, cfg)
        lam_shifted = [float(v - n * pipe.sol.e_H) for v in vals]
        abs_err = [abs(a - b) for a, b in zip(lam_shifted, targets_shifted)]
        psi = vecs_n[:, 0]
        deficit = 1.0 - fock.condensation_fraction(psi, sector)
        exc = fock.truncated_basis(pipe.rotated.M - 1, n)
        un_psi = _fix_vacuum_phase(fock.apply_UN(psi, sector, exc), exc)
        overlap = _truncated_overlap(un_psi, exc, phi, hb_basis)
        rows.append(ConvergenceRow(
            N=n,
            lam_shifted=lam_shifted,
            lam_target=[float(t) for t in targets_shifted],
            abs_err=abs_err,
            condensation_deficit=float(deficit),
            overlap=overlap,
            residual_ratio=float(abs_err[0] * n ** (1.0 / 3.0)),
        ))

    errs = np.array([r.abs_err[0] for r in rows])
    ns = np.array([float(r.N) for r in rows])
    mask = errs > 0
    if mask.sum() >= 2:
        slope = np.polyfit(np.log(ns[mask]), np.log(errs[mask]), 1)[0]
    else:
        slope = float("nan")
    return ConvergenceReport(
        rows=rows,
        e_H=pipe.sol.e_H,
        mu_H=pipe.sol.mu_H,
        eta_H=pipe.sol.eta_H,
        xi=[float(x) for x in pipe.spec.xi],
        E0=pipe.spec.E0,
        fitted_exponent=float(slope),
    )


def run_residual(model: ModelSystem, cfg: StudyConfig) -> list[dict]:
    """Rows (N, M_loc, r, ratio): r is the 2-norm of the projected difference
    between the stripped N-body matrix and the quadratic matrix; ratio divides
    out sqrt(M_loc / N)."""
    pipe = run_pipeline(model, cfg)
    rows = []
    for n in cfg.N_list:
        for m_loc in cfg.M_loc_list:
            if m_loc > n:
                continue
            a = fock.transformed_HN(pipe.rotated, n, cfg.kappa, nplus_max=m_loc)
            b = fock.assemble_bogoliubov_fock(pipe.qf, cutoff=m_loc)
            r = _spectral_norm(a.subtract(b), cfg)
            rows.append({
                "N": n, "M_loc": m_loc, "r": r,
                "ratio": r / np.sqrt(m_loc / n),
            })
    return rows


def run_ims(model: ModelSystem, cfg: StudyConfig) -> list[dict]:
    """Sampled localization defect against the band bound C_f sigma^3/M^2."""
    pipe = run_pipeline(model, cfg)
    cutoff = max(cfg.cutoff, 2 * max(cfg.M_loc_list) + 2)
    hb = fock.assemble_bogoliubov_fock(pipe.qf, cutoff)
    basis = fock.truncated_basis(pipe.qf.d, cutoff)
    lam1, _ = _lowest_eigs(hb, 1, cfg)
    shifted = hb.add_to_diagonal(-float(lam1[0]))
    a_csr = shifted.to_csr()
    nplus = fock.number_plus(basis)
    same_sector = nplus[shifted.rows] == nplus[shifted.cols]
    a0 = SparseHermitian.from_triplets(
        shifted.dim, shifted.rows[same_sector], shifted.cols[same_sector],
        shifted.vals[same_sector]).to_csr()
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for m_loc in cfg.M_loc_list:
        f, g, c_f = fock.localization_ops(basis, m_loc)
        bound = c_f * 8.0 / (m_loc * m_loc)
        worst = 0.0
        for _ in range(cfg.ims_samples):
            v = rng.standard_normal(basis.dim)
            if not pipe.qf.is_real:
                v = v + 1j * rng.standard_normal(basis.dim)
            v /= np.linalg.norm(v)
            ea = float(np.real(np.vdot(v, a_csr @ v)))
            fv = f * v
            gv = g * v
            eaf = float(np.real(np.vdot(fv, a_csr @ fv)))
            eag = float(np.real(np.vdot(gv, a_csr @ gv)))
            e0 = float(np.real(np.vdot(v, a0 @ v)))
            defect = abs(ea - eaf - eag)
            if e0 > 0:
                worst = max(worst, defect / e0)
        rows.append({
            "M_loc": m_loc, "max_defect_ratio": worst, "bound": bound,
            "passed": worst <= bound,
        })
    return rows


def run_thermal(model: ModelSystem, cfg: StudyConfig) -> list[dict]:
    """Free-energy gap and truncated Gibbs trace-norm distance per N."""
    if cfg.beta is None:
        raise ConfigError("thermal study needs 'beta' in the config")
    beta = float(cfg.beta)
    pipe = run_pipeline(model, cfg)
    f_bog = quadratic.free_energy_bogoliubov(pipe.spec, beta)

    pad = 8
    hb_big = fock.assemble_bogoliubov_fock(pipe.qf, cfg.cutoff + pad)
    big_basis = fock.truncated_basis(pipe.qf.d, cfg.cutoff + pad)
    _, gibbs_b = fock.gibbs_objects(hb_big, beta)
    nplus_big = fock.number_plus(big_basis)

    rows = []
    for n in cfg.N_list:
        sector = fock.sector_basis(pipe.rotated.M, n)
        hn = fock.assemble_HN(pipe.rotated, n, cfg.kappa)
        f_n, gibbs_n = fock.gibbs_objects(hn, beta)
        f_eff = f_n - n * pipe.sol.e_H
        exc = fock.truncated_basis(pipe.rotated.M - 1, n)
        perm = fock._relabel_permutation(sector, exc)
        relabeled = np.zeros_like(gibbs_n)
        relabeled[np.ix_(perm, perm)] = gibbs_n
        # both truncated bases list the states with at most c_common quanta
        # in the same lexicographic order, so masked blocks are comparable
        c_common = min(cfg.cutoff, n)
        keep_n = np.flatnonzero(fock.number_plus(exc) <= c_common)
        keep_b = np.flatnonzero(nplus_big <= c_common)
        gn_cut = relabeled[np.ix_(keep_n, keep_n)]
        gb_cut = gibbs_b[np.ix_(keep_b, keep_b)]
        tdist = trace_norm_diff(gn_cut, gb_cut)
        rows.append({
            "N": n,
            "F_minus_NeH": float(f_eff),
            "F_bogoliubov": float(f_bog),
            "gap": float(abs(f_eff - f_bog)),
            "gibbs_trace_dist": float(tdist),
        })
    return rows


def validate_assumptions(model: ModelSystem, cfg: StudyConfig) -> dict:
    """Uniqueness/gap/condensation diagnostics; negative gaps are reported,
    never raised."""
    report = validate_model(model)
    sol = minimize_hartree(model, restarts=cfg.hartree_restarts,
                           tol=cfg.hartree_tol, seed=cfg.seed)
    rotated = rotate_model(model, sol.R, name=model.name + "_cond")
    out = {
        "model": model.name,
        "model_validation_passed": bool(report.passed),
        "hermiticity_residual_T": report.hermiticity_residual_T,
        "symmetry_residual_W": report.symmetry_residual_W,
        "hermiticity_residual_W": report.hermiticity_residual_W,
        "restart_agreement": sol.restart_agreement,
        "nonunique_warning": sol.nonunique_warning,
        "eta_H": sol.eta_H,
        "e_H": sol.e_H,
        "mu_H": sol.mu_H,
        "K1_hs_norm": float(np.linalg.norm(sol.K1)),
        "K2_hs_norm": float(np.linalg.norm(sol.K2)),
        "eps0": cfg.eps0,
        "strong_condensation": [],
    }
    if sol.eta_H <= 0:
        return out
    # one-body operator h in the condensate frame (full M x M; kills mode 0)
    wt = rotated.w_dense()
    h_full = rotated.T + wt[:, 0, :, 0] - sol.mu_H * np.eye(rotated.M,
                                                            dtype=rotated.T.dtype)
    h_model = ModelSystem("dGamma_h", h_full, {}, is_real=rotated.is_real,
                          symmetrize=False)
    ratios = []
    for n in cfg.validate_N_list:
        hn = fock.assemble_HN(rotated, n, cfg.kappa)
        dg = fock.assemble_HN(h_model, n)
        x = hn.add_to_diagonal(-n * sol.e_H).subtract(dg.scaled(1.0 - cfg.eps0))
        if x.dim <= DENSE_EIG_MAX:
            lam = float(np.linalg.eigvalsh(x.to_dense())[0])
        else:
            lam = float(lanczos_lowest(x, 1, tol=1e-9, seed=cfg.seed).values[0])
        ratios.append(min(lam, 0.0) / n)
        out["strong_condensation"].append({"N": n, "lambda_min": lam,
                                           "lambda_min_over_N": lam / n})
    # the bound carries an o(N) allowance: require the violation per particle
    # to shrink along the ladder and to be small at the largest N
    shrinking = all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))
    small = abs(ratios[-1]) <= 0.05 * max(1.0, abs(sol.e_H)) if ratios else True
    out["strong_condensation_passed"] = bool(shrinking and small)
    return out


# ----------------------------------------------------------------------------
# CSV output
# ----------------------------------------------------------------------------

def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(x) for x in row) + "\n")
