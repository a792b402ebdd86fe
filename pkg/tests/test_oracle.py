import numpy as np
import pytest

from rabispec import oracle
from rabispec.errors import LevelNotConverged
from rabispec.series import ModelParams


class TestMatrix:
    def test_symmetric_and_real(self):
        H = oracle.build_matrix(ModelParams(0.7, 0.4, 0.3), 30)
        assert H.shape == (60, 60)
        assert H.dtype == np.float64
        np.testing.assert_array_equal(H, H.T)

    def test_rejects_empty_basis(self):
        with pytest.raises(ValueError):
            oracle.build_matrix(ModelParams(1.0, 0.7), 0)

    def test_commutes_with_parity(self):
        H = oracle.build_matrix(ModelParams(1.3, 0.9), 40)
        P = np.diag(oracle.parity_diagonal(40))
        assert np.abs(H @ P - P @ H).max() == 0.0

    def test_bias_breaks_parity(self):
        H = oracle.build_matrix(ModelParams(1.0, 0.7, 0.2), 10)
        P = np.diag(oracle.parity_diagonal(10))
        assert np.abs(H @ P - P @ H).max() > 0.1


class TestExactLimits:
    def test_two_level_block(self):
        # g -> 0 and one Fock state: eigenvalues -Delta, +Delta
        res = oracle.eigensolve(oracle.build_matrix(ModelParams(1e-300, 0.7), 1))
        np.testing.assert_allclose(res.eigenvalues, [-0.7, 0.7], atol=1e-15)

    def test_uncoupled_ladder(self):
        res = oracle.solve(ModelParams(1e-12, 0.7), 40)
        expected = np.sort(np.concatenate([np.arange(40) + 0.7, np.arange(40) - 0.7]))
        np.testing.assert_allclose(res.eigenvalues, expected[:res.converged_count], atol=1e-10)

    def test_displaced_oscillator(self):
        p = ModelParams(1.0, 0.0)
        res = oracle.solve(p, 200)
        x = res.spectral(p)
        n = np.arange(len(x)) // 2
        assert res.converged_count > 100
        np.testing.assert_allclose(x, n, atol=1e-10)

    def test_fig1_level(self):
        p = ModelParams(1.0, 0.7)
        res = oracle.solve(p, 400)
        E = res.eigenvalues
        i = int(np.argmin(np.abs(E - 70.00462935)))
        assert abs(E[i] - 70.00462935) < 1e-6
        assert res.parity_labels[i] > 0.99


@pytest.fixture(scope="module")
def solved():
    H = oracle.build_matrix(ModelParams(1.0, 0.7), 120)
    w, v = np.linalg.eigh(H)
    return H, w, v, oracle.eigensolve(H, oracle.build_matrix(ModelParams(1.0, 0.7), 170))


class TestEigensolve:
    def test_residuals(self, solved):
        H, _, _, res = solved
        norm = np.linalg.norm(H, 2)
        assert np.all(res.residuals[:res.converged_count] < 1e-10 * norm)

    def test_orthonormal(self, solved):
        _, _, v, _ = solved
        assert np.abs(v.T @ v - np.eye(v.shape[1])).max() < 1e-12

    def test_sorted(self, solved):
        res = solved[3]
        assert np.all(np.diff(res.eigenvalues) >= 0)

    def test_parity_labels_sharp(self, solved):
        res = solved[3]
        assert np.all(np.abs(np.abs(res.parity_labels) - 1) < 1e-2)
        assert res.flagged.size == 0

    def test_only_certified_levels_exposed(self, solved):
        res = solved[3]
        assert 0 < res.converged_count < len(res.all_eigenvalues)
        assert len(res.eigenvalues) == res.converged_count

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            oracle.eigensolve(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestProperties:
    def test_variational_monotonicity(self):
        p = ModelParams(1.0, 0.7)
        prev = None
        for n in (40, 60, 80, 120):
            w = np.linalg.eigvalsh(oracle.build_matrix(p, n))[:30]
            if prev is not None:
                assert np.all(w <= prev + 1e-12)
            prev = w

    def test_sectors_partition_spectrum(self):
        p = ModelParams(0.7, 0.4)
        full = oracle.solve(p, 150).eigenvalues
        both = np.sort(np.concatenate([oracle.sector_eigenvalues(p, s, 150) for s in "+-"]))
        m = min(len(full), len(both))
        np.testing.assert_allclose(full[:m], both[:m], atol=1e-11)

    def test_sector_labels_agree_with_full_solve(self):
        p = ModelParams(1.0, 0.7)
        res = oracle.solve(p, 150)
        plus = oracle.sector_eigenvalues(p, "+", 150)
        m = min(len(plus), len(res.sector("+")))
        np.testing.assert_allclose(res.sector("+")[:m], plus[:m], atol=1e-11)

    def test_eps_continuity(self):
        a = oracle.solve(ModelParams(1.0, 0.7, 0.0), 150)
        b = oracle.solve(ModelParams(1.0, 0.7, 1e-6), 150)
        m = min(a.converged_count, b.converged_count)
        assert np.abs(a.eigenvalues[:m] - b.eigenvalues[:m]).max() < 1e-4
        assert b.parity_labels is None
        with pytest.raises(ValueError):
            b.sector("+")


class TestDegeneracyGap:
    def test_displaced_oscillator(self):
        assert abs(oracle.degeneracy_gap(ModelParams(1.0, 0.0), 1)) < 1e-10

    def test_generic(self):
        assert abs(oracle.degeneracy_gap(ModelParams(1.0, 0.7), 1)) > 1e-3

    def test_juddian(self):
        assert abs(oracle.degeneracy_gap(ModelParams(0.3, 0.8), 1)) < 1e-10

    def test_sign_flips_across_juddian_point(self):
        lo = oracle.degeneracy_gap(ModelParams(0.3, 0.7), 1)
        hi = oracle.degeneracy_gap(ModelParams(0.3, 0.9), 1)
        assert lo * hi < 0

    def test_outside_window(self):
        with pytest.raises(LevelNotConverged):
            oracle.degeneracy_gap(ModelParams(1.0, 0.7), 60, n_fock=40)

    def test_requires_symmetric_model(self):
        with pytest.raises(ValueError):
            oracle.sector_matrix(ModelParams(1.0, 0.7, 0.1), "+", 10)
