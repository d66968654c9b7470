import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkpdec.nogo import (
    CodeError,
    OrthogonalBasis,
    SymplecticCode,
    check_orthogonal_basis,
    complete_pure_errors,
    cv_toric_code,
    identity_code,
    logical_noise,
    nullifier_projector,
    orthogonal_spread_out_basis,
    random_symplectic_code,
    random_symplectic_matrix,
    sample_residual_logical,
    spread_out_basis,
    symplectic_form,
)

code_shapes = st.integers(2, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1)))


def max_z(cov, target, n):
    se = np.sqrt((target ** 2 + np.outer(np.diag(target), np.diag(target))) / n)
    return float(np.max(np.abs(cov - target) / se))


class TestCodes:
    @given(st.integers(0, 2**31), code_shapes)
    @settings(max_examples=40)
    def test_random_code_constraints(self, seed, shape):
        n, k = shape
        code = random_symplectic_code(np.random.default_rng(seed), n, k)
        assert code.symplectic_residual() < 1e-10
        assert np.linalg.det(code.A) == pytest.approx(1.0, abs=1e-8)

    def test_random_matrix_is_symplectic(self, rng):
        for n in (1, 3, 5):
            A = random_symplectic_matrix(rng, n)
            S = symplectic_form(n)
            assert np.abs(A @ S @ A.T - S).max() < 1e-10

    def test_bad_k(self, rng):
        with pytest.raises(CodeError):
            random_symplectic_code(rng, 3, 3)

    def test_validate_rejects_non_symplectic(self, rng):
        code = random_symplectic_code(rng, 3, 1)
        with pytest.raises(CodeError):
            SymplecticCode(3, 1, code.G, 2 * code.P, code.D, code.Q).validate()
        with pytest.raises(CodeError):
            SymplecticCode(3, 1, code.G[:1], code.P, code.D, code.Q).validate()

    def test_toric_sizes(self):
        code = cv_toric_code(2, 2)
        assert (code.n, code.k) == (8, 2)
        assert code.G.shape == (6, 16)
        with pytest.raises(CodeError):
            cv_toric_code(1, 3)


class TestSpreadOut:
    def test_already_orthogonal_unchanged(self):
        code = identity_code(3)
        sp = spread_out_basis(code)
        assert np.array_equal(sp.C, code.C)

    def test_orthogonal_to_nullifiers(self, rng):
        for n, k in [(4, 1), (5, 2), (6, 3)]:
            sp = spread_out_basis(random_symplectic_code(rng, n, k))
            assert np.abs(sp.C @ sp.G.T).max() < 1e-10
            assert sp.symplectic_residual() < 1e-9

    def test_projector_fixes_result(self, rng):
        sp = spread_out_basis(random_symplectic_code(rng, 4, 1))
        Pi = nullifier_projector(sp.G)
        np.testing.assert_allclose(sp.C @ Pi, sp.C, atol=1e-10)
        np.testing.assert_allclose(Pi @ Pi, Pi, atol=1e-10)

    def test_toric_spread_coefficients(self):
        sp = spread_out_basis(cv_toric_code(5, 5))
        for row in np.vstack([sp.P, sp.Q]):
            support = row[np.abs(row) > 1e-9]
            assert support.size == 25
            np.testing.assert_allclose(np.abs(support), 0.2, atol=1e-10)

    @given(st.integers(0, 2**31), code_shapes)
    @settings(max_examples=30)
    def test_logical_matrix_identity(self, seed, shape):
        n, k = shape
        sp = spread_out_basis(random_symplectic_code(np.random.default_rng(seed), n, k))
        P, Q = sp.P, sp.Q
        lhs = P @ P.T @ Q @ Q.T - P @ Q.T @ P @ Q.T
        np.testing.assert_allclose(lhs, np.eye(k), atol=1e-8 * max(1.0, np.abs(P).max() * np.abs(Q).max()) ** 2)

    def test_gauge_invariance(self, rng):
        for _ in range(10):
            code = random_symplectic_code(rng, 5, 2)
            shifted_P = code.P + rng.normal(size=(2, 3)) @ code.G
            shifted_Q = code.Q + rng.normal(size=(2, 3)) @ code.G
            # adding nullifiers to logicals keeps the code symplectic once D is re-completed
            D = complete_pure_errors(code.G, np.vstack([shifted_P, shifted_Q]))
            other = SymplecticCode(5, 2, code.G, shifted_P, D, shifted_Q).validate(1e-8)
            np.testing.assert_allclose(logical_noise(other).SigmaInv, logical_noise(code).SigmaInv,
                                       atol=1e-8)


class TestOrthogonalBasis:
    def test_single_pair(self, rng):
        code = random_symplectic_code(rng, 3, 1)
        b = orthogonal_spread_out_basis(spread_out_basis(code))
        assert b.P.shape == (1, 6) and b.Q.shape == (1, 6)
        assert b.lambda_p[0] * b.lambda_q[0] == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("Lx,Ly,lp,lq", [
        (3, 2, [1.5, 2 / 3], [2 / 3, 1.5]),
        (4, 2, [2.0, 0.5], [0.5, 2.0]),
        (2, 2, [1.0, 1.0], [1.0, 1.0]),
        (5, 5, [1.0, 1.0], [1.0, 1.0]),
    ])
    def test_toric_eigenvalues(self, Lx, Ly, lp, lq):
        m = logical_noise(cv_toric_code(Lx, Ly))
        np.testing.assert_allclose(m.lambda_p, lp, atol=1e-9)
        np.testing.assert_allclose(m.lambda_q, lq, atol=1e-9)

    @given(st.integers(0, 2**31), code_shapes)
    @settings(max_examples=50)
    def test_pairing_random(self, seed, shape):
        n, k = shape
        m = logical_noise(random_symplectic_code(np.random.default_rng(seed), n, k))
        assert m.pairing_residual() < 1e-9
        assert m.det == pytest.approx(1.0, rel=1e-8)
        w = np.linalg.eigvalsh(m.SigmaInv)
        assert w.min() > 0
        np.testing.assert_allclose(m.SigmaInv, m.SigmaInv.T, atol=1e-12)

    def test_check_catches_bad_basis(self, rng):
        b = orthogonal_spread_out_basis(spread_out_basis(random_symplectic_code(rng, 4, 2)))
        with pytest.raises(CodeError):
            check_orthogonal_basis(OrthogonalBasis(b.P, 2 * b.Q), 4)


class TestLogicalNoise:
    def test_identity_code(self):
        m = logical_noise(identity_code(3))
        np.testing.assert_allclose(m.SigmaInv, np.eye(6), atol=1e-14)

    def test_rejects_bad_sigma(self):
        with pytest.raises(CodeError):
            logical_noise(identity_code(1), 0.0)

    def test_offset_map_shape(self, rng):
        code = random_symplectic_code(rng, 4, 2)
        m = logical_noise(code)
        assert m.mu_map.shape == (8, 4)

    @pytest.mark.parametrize("n,k", [(3, 1), (4, 2), (5, 1)])
    def test_monte_carlo_covariance(self, n, k):
        rng = np.random.default_rng(100 * n + k)
        code = random_symplectic_code(rng, n, k)
        sigma0 = 0.4
        m = logical_noise(code, sigma0)
        r = sample_residual_logical(rng, code, sigma0, 100_000)
        assert np.abs(r.mean(axis=0)).max() < 5 * np.sqrt(np.diag(m.covariance).max() / 100_000)
        assert max_z(np.cov(r.T), m.covariance, 100_000) < 3.0

    def test_monte_carlo_toric(self):
        rng = np.random.default_rng(5)
        code = cv_toric_code(3, 2)
        m = logical_noise(code, 0.3)
        r = sample_residual_logical(rng, code, 0.3, 100_000)
        assert max_z(np.cov(r.T), m.covariance, 100_000) < 3.0
