import numpy as np
import pytest

from helpers import dense_bogoliubov, random_pd_form

from bogobench import fock
from bogobench.errors import GapViolationError, ValidationError
from bogobench.hartree import minimize_hartree
from bogobench.model import builtin_model
from bogobench.quadratic import (
    BogoliubovSpectrum,
    QuadraticForm,
    QuasiFreePair,
    diagonalize,
    enumerate_spectrum,
    evaluate_q,
    free_energy_bogoliubov,
    ground_state_dm,
    xi_min_via_Xt,
)

D1 = QuadraticForm(np.array([[2.0]]), np.array([[1.0]]), True)


class TestDiagonalize:
    def test_no_pairing_reduces_to_eigh(self):
        rng = np.random.default_rng(0)
        h = rng.standard_normal((4, 4))
        h = 0.5 * (h + h.T) + 4.0 * np.eye(4)
        qf = QuadraticForm(h, np.zeros((4, 4)), True)
        spec = diagonalize(qf)
        assert np.allclose(spec.xi, np.linalg.eigvalsh(h), atol=1e-12)
        assert spec.E0 == 0.0
        assert np.abs(spec.V).max() == 0.0

    def test_single_mode_exact(self):
        spec = diagonalize(D1)
        assert abs(spec.xi[0] - np.sqrt(3)) <= 1e-12
        assert abs(spec.E0 - (np.sqrt(3) - 2) / 2) <= 1e-12

    def test_single_mode_truncated_fock_oracle(self):
        spec = diagonalize(D1)
        hb = fock.assemble_bogoliubov_fock(D1, 60)
        vals = np.linalg.eigvalsh(hb.to_dense())
        assert abs(vals[0] - spec.E0) <= 1e-8

    def test_lattice_paired_blocks_closed_form(self):
        w_hat = [0.5, 0.3, 0.2, 0.3]
        m = builtin_model("lattice4")
        sol = minimize_hartree(m)
        spec = diagonalize(QuadraticForm.from_hartree(sol))
        eps = [2.0 * (1 - np.cos(2 * np.pi * p / 4)) for p in (1, 2, 3)]
        closed = sorted(np.sqrt(e * e + 2 * e * w_hat[p] / 4)
                        for p, e in zip((1, 2, 3), eps))
        assert np.abs(spec.xi - closed).max() <= 1e-10

    def test_gap_violation_raises_with_eta(self):
        qf = QuadraticForm(np.array([[1.0]]), np.array([[2.0]]), True)
        with pytest.raises(GapViolationError) as exc:
            diagonalize(qf)
        assert exc.value.eta < 0

    def test_symplectic_invariants_random(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            h, k = random_pd_form(rng, int(rng.integers(1, 4)))
            spec = diagonalize(QuadraticForm(h, k, True))
            r1, r2 = spec.transform_residuals()
            assert r1 <= 1e-10 and r2 <= 1e-10
            eta = QuadraticForm(h, k, True).eta()
            assert np.all(spec.xi >= eta - 1e-10)

    def test_complex_path_single_mode_gauge(self):
        k = 0.8 * np.exp(0.93j)
        qf = QuadraticForm(np.array([[2.0]], dtype=complex),
                           np.array([[k]]), False)
        spec = diagonalize(qf)
        assert abs(spec.xi[0] - np.sqrt(4 - 0.64)) <= 1e-10
        hb = fock.assemble_bogoliubov_fock(qf, 60)
        vals = np.linalg.eigvalsh(hb.to_dense())
        assert abs(vals[0] - spec.E0) <= 1e-8
        r1, r2 = spec.transform_residuals()
        assert max(r1, r2) <= 1e-10

    def test_complex_path_matches_dense_oracle_d2(self):
        rng = np.random.default_rng(2)
        h, k = random_pd_form(rng, 2)
        phase = np.exp(0.4j)
        kc = k.astype(complex) * phase
        qf = QuadraticForm(h.astype(complex), kc, False)
        spec = diagonalize(qf)
        _, dense = dense_bogoliubov(qf.H, qf.K, 40)
        vals = np.linalg.eigvalsh(dense)
        assert abs(vals[0] - spec.E0) <= 1e-8

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(3)
        h, k = random_pd_form(rng, 3)
        c = 2.5
        s1 = diagonalize(QuadraticForm(h, k, True))
        s2 = diagonalize(QuadraticForm(c * h, c * k, True))
        assert np.abs(s2.xi - c * s1.xi).max() <= 1e-12 * c * s1.xi.max()
        assert abs(s2.E0 - c * s1.E0) <= 1e-12 * max(1.0, abs(c * s1.E0))

    def test_e0_strictly_negative_iff_pairing(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            h, k = random_pd_form(rng, 2)
            assert diagonalize(QuadraticForm(h, k, True)).E0 < 0
            assert diagonalize(QuadraticForm(h, 0 * k, True)).E0 == 0.0


class TestXt:
    def test_single_mode_root(self):
        t = xi_min_via_Xt(D1, tol=1e-12)
        assert abs(t - np.sqrt(3)) <= 1e-10

    def test_no_pairing_root_at_lambda_min(self):
        h = np.diag([1.5, 3.0])
        qf = QuadraticForm(h, np.zeros((2, 2)), True)
        t = xi_min_via_Xt(qf, tol=1e-12)
        assert abs(t - 1.5) <= 1e-10

    def test_matches_diagonalize_random(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            h, k = random_pd_form(rng, 3)
            qf = QuadraticForm(h, k, True)
            t = xi_min_via_Xt(qf, tol=1e-10)
            assert abs(t - diagonalize(qf).xi[0]) <= 1e-9

    def test_bad_bracket(self):
        with pytest.raises(ValidationError, match="straddle"):
            xi_min_via_Xt(D1, bracket=(10.0, 20.0))


class TestEnumerate:
    def test_pi_window(self):
        spec = BogoliubovSpectrum(xi=np.array([1.0, np.pi]), E0=0.0,
                                  U=np.eye(2), V=np.zeros((2, 2)))
        vals, truncated = enumerate_spectrum(spec, 3.0, 100)
        assert np.allclose(vals, [0, 1, 2, 3], atol=1e-12)
        assert not truncated

    def test_degenerate_combinatorics(self):
        spec = BogoliubovSpectrum(xi=np.array([1.0, 1.0]), E0=0.0,
                                  U=np.eye(2), V=np.zeros((2, 2)))
        vals, _ = enumerate_spectrum(spec, 2.0, 100)
        assert np.allclose(vals, [0, 1, 1, 2, 2, 2], atol=1e-12)

    def test_truncation_flag(self):
        spec = BogoliubovSpectrum(xi=np.array([1.0]), E0=0.0,
                                  U=np.eye(1), V=np.zeros((1, 1)))
        vals, truncated = enumerate_spectrum(spec, 50.0, 10)
        assert truncated
        assert len(vals) == 10

    def test_matches_truncated_fock_d2(self):
        rng = np.random.default_rng(6)
        h, k = random_pd_form(rng, 2)
        qf = QuadraticForm(h, k, True)
        spec = diagonalize(qf)
        window = 4.0 * spec.xi.max()
        levels, _ = enumerate_spectrum(spec, window, 500)
        hb = fock.assemble_bogoliubov_fock(qf, 40)
        vals = np.linalg.eigvalsh(hb.to_dense())
        take = min(len(levels), 12)
        assert np.abs(levels[:take] - vals[:take]).max() <= 1e-8

    def test_additivity_exhaustive_d2(self):
        rng = np.random.default_rng(7)
        h, k = random_pd_form(rng, 2)
        spec = diagonalize(QuadraticForm(h, k, True))
        window = 6.0 * float(spec.xi.max())
        levels, _ = enumerate_spectrum(spec, window, 100000)
        offsets = np.sort(levels - spec.E0)
        for a in offsets:
            for b in offsets:
                if a + b <= window:
                    hit = np.min(np.abs(offsets - (a + b)))
                    assert hit <= 1e-9


class TestQuasiFree:
    def test_vacuum_for_no_pairing(self):
        h = np.diag([1.0, 2.0])
        spec = diagonalize(QuadraticForm(h, np.zeros((2, 2)), True))
        pair = ground_state_dm(spec)
        assert np.abs(pair.gamma).max() == 0.0
        assert np.abs(pair.alpha).max() == 0.0

    def test_single_mode_depletion_value(self):
        pair = ground_state_dm(diagonalize(D1))
        assert abs(np.trace(pair.gamma) - (2 / np.sqrt(3) - 1) / 2) <= 1e-12

    def test_identities_random(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            h, k = random_pd_form(rng, 3)
            pair = ground_state_dm(diagonalize(QuadraticForm(h, k, True)))
            assert max(pair.residuals()) <= 1e-10

    def test_q_vacuum_zero(self):
        qf = QuadraticForm(np.diag([1.0, 2.0]), np.zeros((2, 2)), True)
        pair = QuasiFreePair(np.zeros((2, 2)), np.zeros((2, 2)))
        assert evaluate_q(qf, pair) == 0.0

    def test_q_of_ground_pair_is_e0(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            h, k = random_pd_form(rng, 3)
            qf = QuadraticForm(h, k, True)
            spec = diagonalize(qf)
            assert abs(evaluate_q(qf, ground_state_dm(spec)) - spec.E0) <= 1e-9

    def test_variational_bound_on_foreign_pairs(self):
        # ground pairs of other random forms are valid quasi-free pairs
        rng = np.random.default_rng(10)
        h, k = random_pd_form(rng, 3)
        qf = QuadraticForm(h, k, True)
        e0 = diagonalize(qf).E0
        for _ in range(10):
            h2, k2 = random_pd_form(rng, 3)
            pair = ground_state_dm(diagonalize(QuadraticForm(h2, k2, True)))
            assert evaluate_q(qf, pair) >= e0 - 1e-9


class TestFreeEnergy:
    def test_single_mode_log2(self):
        spec = BogoliubovSpectrum(xi=np.array([np.log(2.0)]), E0=0.0,
                                  U=np.eye(1), V=np.zeros((1, 1)))
        assert abs(free_energy_bogoliubov(spec, 1.0) - (-np.log(2.0))) <= 1e-14

    def test_zero_temperature_limit(self):
        spec = diagonalize(D1)
        beta = 200.0 / spec.xi[0]
        assert abs(free_energy_bogoliubov(spec, beta) - spec.E0) <= 1e-9

    def test_monotone_toward_e0(self):
        spec = diagonalize(D1)
        betas = [0.5, 1.0, 2.0, 5.0, 20.0]
        vals = [free_energy_bogoliubov(spec, b) for b in betas]
        assert all(a <= b + 1e-14 for a, b in zip(vals, vals[1:]))
        assert all(v <= spec.E0 for v in vals)

    def test_matches_direct_sum_d2(self):
        rng = np.random.default_rng(11)
        h, k = random_pd_form(rng, 2)
        spec = diagonalize(QuadraticForm(h, k, True))
        beta = 1.3
        levels, truncated = enumerate_spectrum(spec, 40.0 / beta, 2_000_000)
        assert not truncated
        direct = -np.log(np.sum(np.exp(-beta * (levels - levels[0])))) / beta \
            + levels[0]
        assert abs(free_energy_bogoliubov(spec, beta) - direct) <= 1e-9


class TestFormDomainSandwich:
    @pytest.mark.parametrize("name", ["two_mode", "lattice4",
                                      "contact_condensate"])
    def test_sandwich_with_bounded_constant(self, name):
        # C^-1 dGamma(h+1) - C <= H-matrix <= dGamma(h+C) + C with C <= 100,
        # checked at cutoff 8 on the excitation space (d <= 3)
        m = builtin_model(name)
        sol = minimize_hartree(m)
        qf = QuadraticForm.from_hartree(sol)
        cutoff = 8
        hb = fock.assemble_bogoliubov_fock(qf, cutoff).to_dense()
        basis = fock.truncated_basis(qf.d, cutoff)
        nplus = fock.number_plus(basis).astype(float)
        h_plus_model = QuadraticForm(sol.h_plus + np.eye(qf.d),
                                     np.zeros_like(sol.K2), qf.is_real)
        dgamma_h1 = fock.assemble_bogoliubov_fock(
            QuadraticForm(sol.h_plus, np.zeros_like(sol.K2), qf.is_real),
            cutoff).to_dense() + np.diag(nplus)
        found = None
        c = 1.0
        while c <= 100.0:
            upper = (fock.assemble_bogoliubov_fock(
                QuadraticForm(sol.h_plus + c * np.eye(qf.d),
                              np.zeros_like(sol.K2), qf.is_real),
                cutoff).to_dense() + c * np.eye(basis.dim)) - hb
            lower = hb - (dgamma_h1 / c - c * np.eye(basis.dim))
            if (np.linalg.eigvalsh(upper)[0] >= -1e-10
                    and np.linalg.eigvalsh(lower)[0] >= -1e-10):
                found = c
                break
            c *= 2.0
        assert found is not None and found <= 100.0
