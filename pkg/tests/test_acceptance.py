"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured quantity next to its tolerance. Run with

    pytest tests/test_acceptance.py -v -s
"""

import time

import numpy as np
import pytest

from helpers import random_pd_form

from bogobench import experiments, fock, quadratic
from bogobench.eigen import lanczos_lowest
from bogobench.hartree import hartree_energy, hartree_gradient, hessian_gap
from bogobench.model import ModelSystem, builtin_model, separable_gas
from bogobench.quadratic import QuadraticForm

LADDER = [25, 50, 100, 200, 400, 800]


def _report(num, text):
    print(f"\nACCEPTANCE {num}: PASS - {text}")


@pytest.fixture(scope="module")
def two_mode_ladder():
    cfg = experiments.StudyConfig(model={"builtin": "two_mode"},
                                  N_list=LADDER, L=3, cutoff=16, seed=1)
    t0 = time.perf_counter()
    rep = experiments.run_convergence(builtin_model("two_mode"), cfg)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def anchor_ladders():
    out = {}
    for name in ("free_gas", "contact_condensate"):
        cfg = experiments.StudyConfig(model={"builtin": name},
                                      N_list=LADDER, L=3, cutoff=16, seed=1)
        out[name] = experiments.run_convergence(builtin_model(name), cfg)
    return out


def test_criterion_1_bogoliubov_oracle_agreement():
    t0 = time.perf_counter()
    # fixed d = 1 anchor
    qf1 = QuadraticForm(np.array([[2.0]]), np.array([[1.0]]), True)
    spec1 = quadratic.diagonalize(qf1)
    hb1 = fock.assemble_bogoliubov_fock(qf1, 60)
    v1 = np.linalg.eigvalsh(hb1.to_dense())
    worst = abs(v1[0] - spec1.E0)
    # ten random real positive-definite instances, d <= 3
    rng = np.random.default_rng(20260810)
    dims = [1, 2, 3, 1, 2, 3, 1, 2, 3, 3]
    for d in dims:
        h, k = random_pd_form(rng, d)
        qf = QuadraticForm(h, k, True)
        spec = quadratic.diagonalize(qf)
        hb = fock.assemble_bogoliubov_fock(qf, 60)
        if hb.dim <= 2000:
            vals = np.linalg.eigvalsh(hb.to_dense())[:3]
        else:
            vals = lanczos_lowest(hb, 3, tol=1e-9, seed=7).values
        levels, _ = quadratic.enumerate_spectrum(
            spec, float(3 * spec.xi.max() + 1), 64)
        worst = max(worst, abs(vals[0] - spec.E0),
                    float(np.abs(vals[:3] - levels[:3]).max()))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-8
    assert elapsed < 10.0
    _report(1, f"E0 and first three levels vs cutoff-60 matrices: worst "
               f"|diff| = {worst:.2e} <= 1e-8 in {elapsed:.1f}s < 10s")


def test_criterion_2_cross_method_consistency():
    rng = np.random.default_rng(22)
    worst_xt = 0.0
    worst_gap = 0.0
    for i in range(20):
        d = 1 + i % 3
        h, k = random_pd_form(rng, d)
        qf = QuadraticForm(h, k, True)
        xi0 = quadratic.diagonalize(qf).xi[0]
        t = quadratic.xi_min_via_Xt(qf, tol=1e-10)
        worst_xt = max(worst_xt, abs(t - xi0))
        # Hessian-gap block path vs real reduction
        k1 = rng.standard_normal((d, d))
        k1 = 0.5 * (k1 + k1.T)
        block = np.block([[h + k1, k], [k.T, h + k1]])
        eta_block = np.linalg.eigvalsh(block)[0]
        eta_red = min(np.linalg.eigvalsh(h + k1 + k)[0],
                      np.linalg.eigvalsh(h + k1 - k)[0])
        worst_gap = max(worst_gap, abs(eta_block - eta_red))
        assert abs(hessian_gap(h, k1, k, True) - eta_block) <= 1e-10
    assert worst_xt <= 1e-8
    assert worst_gap <= 1e-10
    _report(2, f"X_t bisection vs diagonalize: {worst_xt:.2e} <= 1e-8; "
               f"gap paths: {worst_gap:.2e} <= 1e-10 (20 instances)")


def test_criterion_3_quasi_free_identities():
    rng = np.random.default_rng(33)
    worst_id = 0.0
    worst_q = 0.0
    for i in range(20):
        d = 1 + i % 3
        h, k = random_pd_form(rng, d)
        qf = QuadraticForm(h, k, True)
        spec = quadratic.diagonalize(qf)
        pair = quadratic.ground_state_dm(spec)
        worst_id = max(worst_id, max(pair.residuals()))
        worst_q = max(worst_q, abs(quadratic.evaluate_q(qf, pair) - spec.E0))
    assert worst_id <= 1e-10
    assert worst_q <= 1e-9
    _report(3, f"pure quasi-free identities: {worst_id:.2e} <= 1e-10; "
               f"q(gamma,alpha) vs E0: {worst_q:.2e} <= 1e-9 (20 instances)")


def test_criterion_4_eigenvalue_convergence(two_mode_ladder):
    rep, elapsed = two_mode_ladder
    assert rep.eta_H > 0
    errs = np.array([r.abs_err for r in rep.rows])
    assert np.all(np.diff(errs, axis=0) <= 0), "errors must not increase in N"
    tol_final = [0.02 * max(1.0, abs(t)) for t in rep.rows[-1].lam_target]
    assert all(e <= t for e, t in zip(errs[-1], tol_final))
    assert elapsed < 120.0
    _report(4, f"lambda_L(H_N) - N e_H -> lambda_L for L=1..3, monotone over "
               f"N={LADDER}; final errors {errs[-1].max():.2e} within 2% in "
               f"{elapsed:.1f}s < 120s")


def test_criterion_5_ground_vector_convergence(two_mode_ladder):
    rep, _ = two_mode_ladder
    overlaps = [r.overlap for r in rep.rows]
    assert all(b >= a for a, b in zip(overlaps, overlaps[1:]))
    assert overlaps[-1] >= 0.99
    _report(5, f"relabeled ground-vector overlap increases along the ladder "
               f"to {overlaps[-1]:.6f} >= 0.99 at N=800")


def test_criterion_6_condensation(two_mode_ladder):
    rep, _ = two_mode_ladder
    deficits = [r.condensation_deficit for r in rep.rows]
    assert all(b <= a for a, b in zip(deficits, deficits[1:]))
    assert deficits[-1] <= 0.05
    _report(6, f"condensation deficit decreases along the ladder to "
               f"{deficits[-1]:.2e} <= 0.05 at N=800")


def test_criterion_7_residual_scaling():
    cfg = experiments.StudyConfig(model={"builtin": "lattice4"},
                                  N_list=[8, 16, 32, 64],
                                  M_loc_list=[4, 8], seed=1)
    rows = experiments.run_residual(builtin_model("lattice4"), cfg)
    worst_factor = 1.0
    for m_loc in (4, 8):
        ratios = [r["ratio"] for r in rows if r["M_loc"] == m_loc]
        for a, b in zip(ratios, ratios[1:]):
            factor = max(b / a, a / b)
            worst_factor = max(worst_factor, factor)
            assert factor < 2.0
    _report(7, f"|P(H_N-stripped - quadratic)P| / sqrt(M_loc/N) varies by at "
               f"most x{worst_factor:.2f} < 2 across N doublings "
               f"(M_loc in {{4,8}}, N up to 64)")


def test_criterion_8_ims_localization():
    worst_margin = 0.0
    for name in ("two_mode", "lattice4", "free_gas", "contact_condensate"):
        cfg = experiments.StudyConfig(model={"builtin": name}, N_list=[4],
                                      M_loc_list=[4, 8, 16], cutoff=16,
                                      ims_samples=200, seed=1)
        rows = experiments.run_ims(builtin_model(name), cfg)
        for r in rows:
            assert r["passed"], (name, r)
            worst_margin = max(worst_margin, r["max_defect_ratio"] / r["bound"])
    _report(8, f"sampled IMS defect <= C_f*8/M_loc^2 on all builtin models "
               f"(M_loc in {{4,8,16}}, 200 vectors); worst defect/bound = "
               f"{worst_margin:.2e}")


def test_criterion_9_thermal_convergence():
    t0 = time.perf_counter()
    cfg = experiments.StudyConfig(model={"builtin": "two_mode"},
                                  N_list=[10, 20, 40, 80], beta=2.0,
                                  cutoff=14, seed=1)
    rows = experiments.run_thermal(builtin_model("two_mode"), cfg)
    gaps = [r["gap"] for r in rows]
    dists = [r["gibbs_trace_dist"] for r in rows]
    elapsed = time.perf_counter() - t0
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert all(b <= a for a, b in zip(dists, dists[1:]))
    assert elapsed < 60.0
    _report(9, f"free-energy gap {gaps[0]:.2e} -> {gaps[-1]:.2e} and Gibbs "
               f"trace distance {dists[0]:.2e} -> {dists[-1]:.2e} both "
               f"decrease along N={cfg.N_list} at beta=2 in {elapsed:.1f}s "
               f"< 60s")


def test_criterion_10_exactness_anchors(anchor_ladders):
    worst = 0.0
    for name, rep in anchor_ladders.items():
        for row in rep.rows:
            worst = max(worst, max(row.abs_err), row.condensation_deficit,
                        1.0 - row.overlap)
    assert worst <= 1e-10
    _report(10, f"W=0 and condensate-only models: eigenvalue errors, "
                f"deficit and 1-overlap all <= {worst:.2e} <= 1e-10 at every "
                f"N in the ladder")


def test_criterion_11_kernel_contracts():
    # Lanczos vs dense, dim <= 2000, k <= 8
    rng = np.random.default_rng(44)
    n = 800
    a = rng.standard_normal((n, n))
    a[np.abs(a) < 1.2] = 0.0
    a = 0.5 * (a + a.T)
    from bogobench.eigen import SparseHermitian
    sp = SparseHermitian.from_dense(a)
    res = lanczos_lowest(sp, 8, tol=1e-11, seed=0)
    lz_err = float(np.abs(res.values - np.linalg.eigvalsh(a)[:8]).max())
    assert lz_err <= 1e-8

    # analytic gradient vs central differences
    rng = np.random.default_rng(45)
    worst_fd = 0.0
    for _ in range(20):
        t = rng.standard_normal((3, 3))
        t = 0.5 * (t + t.T)
        base = separable_gas(3, np.zeros(3), [(0.5, rng.standard_normal(3))])
        m = ModelSystem("fd", t, base.W, is_real=True)
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        d = rng.standard_normal(3)
        d -= u * (u @ d)
        d /= np.linalg.norm(d)
        eps = 1e-5
        up = (u + eps * d) / np.linalg.norm(u + eps * d)
        um = (u - eps * d) / np.linalg.norm(u - eps * d)
        fd = (hartree_energy(m, up) - hartree_energy(m, um)) / (2 * eps)
        an = float(hartree_gradient(m, u) @ d)
        worst_fd = max(worst_fd, abs(fd - an) / max(1.0, abs(an)))
    assert worst_fd <= 1e-6

    # relabeling unitary round-trip, bit exact
    sector = fock.sector_basis(3, 6)
    exc = fock.truncated_basis(2, 6)
    psi = np.random.default_rng(46).standard_normal(sector.dim)
    psi /= np.linalg.norm(psi)
    back = fock.apply_UN_dagger(fock.apply_UN(psi, sector, exc), exc, sector)
    assert np.array_equal(psi, back)
    _report(11, f"Lanczos vs dense {lz_err:.2e} <= 1e-8 (dim 800, k=8); "
                f"gradient vs central differences {worst_fd:.2e} <= 1e-6; "
                f"relabeling round-trip bit-exact")
