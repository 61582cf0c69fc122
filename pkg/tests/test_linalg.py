import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from pitcorr.linalg import (
    DIRICHLET,
    NEUMANN,
    apply_laplacian,
    build_operator,
    factorization_count,
    kronecker_sum,
    laplacian_1d,
    spectral_factorize,
    sylvester_solve,
)


class TestLaplacian1D:
    def test_dirichlet_matrix_entries(self):
        M = laplacian_1d(DIRICHLET, 3, 1.0).dense()
        expected = np.array([[-2.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -2.0]])
        np.testing.assert_array_equal(M, expected)

    def test_dirichlet_eigenvalues_m3(self):
        lam = np.linalg.eigvalsh(laplacian_1d(DIRICHLET, 3, 1.0).dense())
        np.testing.assert_allclose(
            np.sort(lam), np.sort([-2.0 - np.sqrt(2.0), -2.0, -2.0 + np.sqrt(2.0)]),
            atol=1e-12,
        )

    def test_neumann_matrix_rows_m3(self):
        M = laplacian_1d(NEUMANN, 3, 1.0).dense()
        expected = np.array([[-2.0, 2.0, 0.0], [1.0, -2.0, 1.0], [0.0, 2.0, -2.0]])
        np.testing.assert_array_equal(M, expected)

    def test_neumann_eigenvalues_m3(self):
        lam = np.linalg.eigvals(laplacian_1d(NEUMANN, 3, 1.0).dense())
        np.testing.assert_allclose(np.sort(lam.real), [-4.0, -2.0, 0.0], atol=1e-12)

    def test_mixed_ends(self):
        M = laplacian_1d((DIRICHLET, NEUMANN), 3, 0.5)
        s = 4.0
        assert M.upper[0] == s
        assert M.lower[-1] == 2.0 * s

    def test_scaling(self):
        dr = 0.25
        M = laplacian_1d(DIRICHLET, 4, dr).dense()
        assert M[0, 0] == pytest.approx(-2.0 / dr**2)

    def test_validation(self):
        with pytest.raises(ValueError):
            laplacian_1d("robin", 3, 1.0)
        with pytest.raises(ValueError):
            laplacian_1d(DIRICHLET, 1, 1.0)
        with pytest.raises(ValueError):
            laplacian_1d(DIRICHLET, 3, 0.0)


class TestSpectralFactorize:
    @pytest.mark.parametrize("kind", [
        DIRICHLET, NEUMANN, (DIRICHLET, NEUMANN), (NEUMANN, DIRICHLET),
    ])
    @pytest.mark.parametrize("m", [2, 3, 8, 17])
    def test_reconstruction(self, kind, m):
        M = laplacian_1d(kind, m, 0.37)
        f = spectral_factorize(M)
        approx = f.Gamma @ np.diag(f.lam) @ f.GammaInv
        assert np.abs(approx - M.dense()).max() < 1e-8 / 0.37**2
        assert np.abs(f.GammaInv @ f.Gamma - np.eye(m)).max() < 1e-10

    def test_eigenvalues_ascending_nonpositive(self):
        for kind in (DIRICHLET, NEUMANN, (NEUMANN, DIRICHLET)):
            f = spectral_factorize(laplacian_1d(kind, 9, 0.2))
            assert np.all(np.diff(f.lam) >= 0)
            assert np.all(f.lam <= 1e-10)

    def test_neumann_has_zero_eigenvalue(self):
        f = spectral_factorize(laplacian_1d(NEUMANN, 7, 0.3))
        assert np.abs(f.lam).min() < 1e-10

    def test_dirichlet_analytic_values(self):
        m, dr = 6, 0.11
        f = spectral_factorize(laplacian_1d(DIRICHLET, m, dr))
        k = np.arange(1, m + 1)
        analytic = -(4.0 / dr**2) * np.sin(k * np.pi / (2 * (m + 1))) ** 2
        np.testing.assert_allclose(f.lam, np.sort(analytic), rtol=1e-13)


def _random_operator(rng, shapes, kinds, a=None, b=None):
    laps = [
        laplacian_1d(kind, m, 0.1 + 0.4 * rng.random())
        for kind, m in zip(kinds, shapes)
    ]
    a = 1.0 + 2.0 * rng.random() if a is None else a
    b = -(0.01 + rng.random()) if b is None else b
    return a, b, laps


class TestSylvesterSolve:
    def test_scalar_shift_case(self):
        # With b = 0 the solve reduces to division by a.
        lap = laplacian_1d(DIRICHLET, 4, 1.0)
        op = build_operator(5.0, 0.0, (lap, lap))
        Y = np.arange(16.0).reshape(4, 4)
        np.testing.assert_allclose(op.solve(Y), Y / 5.0, rtol=1e-14, atol=1e-14)

    def test_matches_dense_2d_random(self):
        rng = np.random.default_rng(42)
        kinds = [DIRICHLET, NEUMANN, (DIRICHLET, NEUMANN), (NEUMANN, DIRICHLET)]
        for trial in range(30):
            mx, my = rng.integers(2, 9, size=2)
            kx, ky = rng.choice(len(kinds), size=2)
            a, b, laps = _random_operator(rng, (mx, my), (kinds[kx], kinds[ky]))
            op = build_operator(a, b, laps)
            Y = rng.standard_normal((mx, my))
            X = sylvester_solve(op, Y)
            A = a * sp.identity(mx * my) + b * kronecker_sum(laps)
            Xd = np.linalg.solve(A.toarray(), Y.ravel(order="F"))
            Xd = Xd.reshape(mx, my, order="F")
            denom = max(np.abs(Xd).max(), 1e-30)
            assert np.abs(X - Xd).max() / denom < 1e-10

    def test_matches_dense_3d(self):
        rng = np.random.default_rng(7)
        for kinds in [(DIRICHLET,) * 3, (NEUMANN,) * 3,
                      (DIRICHLET, NEUMANN, (NEUMANN, DIRICHLET))]:
            a, b, laps = _random_operator(rng, (3, 4, 5), kinds)
            op = build_operator(a, b, laps)
            Y = rng.standard_normal((3, 4, 5))
            X = op.solve(Y)
            A = a * sp.identity(60) + b * kronecker_sum(laps)
            Xd = np.linalg.solve(A.toarray(), Y.ravel(order="F"))
            Xd = Xd.reshape(3, 4, 5, order="F")
            assert np.abs(X - Xd).max() / np.abs(Xd).max() < 1e-10

    def test_solve_shape_mismatch(self):
        lap = laplacian_1d(DIRICHLET, 4, 1.0)
        op = build_operator(1.0, -0.1, (lap, lap))
        with pytest.raises(ValueError):
            op.solve(np.zeros((4, 5)))

    def test_factorization_count_stable_across_solves(self):
        lap = laplacian_1d(NEUMANN, 6, 0.2)
        op = build_operator(2.0, -0.3, (lap, lap))
        before = factorization_count()
        for _ in range(10):
            op.solve(np.ones((6, 6)))
        assert factorization_count() == before
        assert op.solve_count == 10

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 7), st.integers(2, 7), st.integers(0, 3))
    def test_solve_inverts_apply(self, mx, my, kind_idx):
        kinds = [DIRICHLET, NEUMANN, (DIRICHLET, NEUMANN), (NEUMANN, DIRICHLET)]
        laps = (laplacian_1d(kinds[kind_idx], mx, 0.3),
                laplacian_1d(kinds[(kind_idx + 1) % 4], my, 0.2))
        a, b = 3.0, -0.05
        op = build_operator(a, b, laps)
        rng = np.random.default_rng(mx * 100 + my)
        X = rng.standard_normal((mx, my))
        Y = a * X + b * apply_laplacian(laps, X)
        np.testing.assert_allclose(op.solve(Y), X, atol=1e-9)


class TestKroneckerSum:
    def test_matches_apply_2d(self):
        rng = np.random.default_rng(3)
        laps = (laplacian_1d(NEUMANN, 4, 0.5), laplacian_1d(DIRICHLET, 5, 0.4))
        U = rng.standard_normal((4, 5))
        direct = apply_laplacian(laps, U)
        via_kron = (kronecker_sum(laps) @ U.ravel(order="F")).reshape(4, 5, order="F")
        np.testing.assert_allclose(direct, via_kron, rtol=1e-12)

    def test_matches_apply_3d(self):
        rng = np.random.default_rng(4)
        laps = (
            laplacian_1d(DIRICHLET, 3, 0.5),
            laplacian_1d(NEUMANN, 4, 0.4),
            laplacian_1d((DIRICHLET, NEUMANN), 2, 0.3),
        )
        U = rng.standard_normal((3, 4, 2))
        direct = apply_laplacian(laps, U)
        via_kron = (kronecker_sum(laps) @ U.ravel(order="F")).reshape(
            3, 4, 2, order="F"
        )
        np.testing.assert_allclose(direct, via_kron, rtol=1e-12)

    def test_row_sums_vanish_all_neumann(self):
        laps = (laplacian_1d(NEUMANN, 4, 0.5), laplacian_1d(NEUMANN, 3, 0.25))
        M = kronecker_sum(laps)
        np.testing.assert_allclose(np.asarray(M.sum(axis=1)).ravel(), 0.0, atol=1e-10)
