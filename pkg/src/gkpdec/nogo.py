"""Logical noise of linear oscillator codes under Gaussian displacements.

Phase-space vectors are rows ``(p_1..p_n, q_1..q_n)`` and the symplectic form
is ``S = [[0, I], [-I, 0]]``. A code is a symplectic matrix ``A`` whose rows
are split as ``G`` (nullifiers, n-k rows), ``P`` (k logical p), ``D``
(pure errors, n-k rows) and ``Q`` (k logical q), so ``A S A^T = S``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm, null_space, orth

CONSTRAINT_TOL = 1e-10


class CodeError(ValueError):
    """Raised for rank-deficient or non-symplectic code data."""


def symplectic_form(n: int) -> np.ndarray:
    S = np.zeros((2 * n, 2 * n))
    S[:n, n:] = np.eye(n)
    S[n:, :n] = -np.eye(n)
    return S


@dataclass(frozen=True)
class SymplecticCode:
    """Nullifier, logical and pure-error rows of a linear oscillator code."""

    n: int
    k: int
    G: np.ndarray
    P: np.ndarray
    D: np.ndarray
    Q: np.ndarray

    @property
    def S(self) -> np.ndarray:
        return symplectic_form(self.n)

    @property
    def A(self) -> np.ndarray:
        return np.vstack([self.G, self.P, self.D, self.Q])

    @property
    def C(self) -> np.ndarray:
        return np.vstack([self.P, self.Q])

    def symplectic_residual(self) -> float:
        """Largest entry of ``A S A^T - S``."""
        A = self.A
        return float(np.max(np.abs(A @ self.S @ A.T - self.S), initial=0.0))

    def validate(self, tol: float = CONSTRAINT_TOL) -> "SymplecticCode":
        m = self.n - self.k
        shapes = {"G": (m, 2 * self.n), "P": (self.k, 2 * self.n),
                  "D": (m, 2 * self.n), "Q": (self.k, 2 * self.n)}
        for name, shape in shapes.items():
            if getattr(self, name).shape != shape:
                raise CodeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        res = self.symplectic_residual()
        if res > tol:
            raise CodeError(f"symplectic constraints violated by {res:.3e}")
        return self


# ---------------------------------------------------------------- spread-out basis

def _gram_inverse(G: np.ndarray) -> np.ndarray:
    if G.shape[0] == 0:
        return np.zeros((0, 0))
    GG = G @ G.T
    if np.linalg.matrix_rank(GG) < G.shape[0]:
        raise CodeError("nullifier matrix is rank deficient")
    return np.linalg.inv(GG)


def nullifier_projector(G: np.ndarray) -> np.ndarray:
    """``I - G^T (G G^T)^{-1} G``, acting on row vectors from the right."""
    G = np.asarray(G, float)
    Pi = np.eye(G.shape[1])
    if G.shape[0]:
        Pi -= G.T @ _gram_inverse(G) @ G
    return Pi


def spread_out_basis(code: SymplecticCode) -> SymplecticCode:
    """Logical rows made orthogonal to every nullifier, pure errors re-completed.

    ``C' = C + Lam G`` with ``Lam = -C G^T (G G^T)^{-1}``. The pure errors become
    ``D' = D + Lam^T S_2k^T C - W G / 2`` where ``W = Lam^T S_2k Lam``; the last
    term keeps the pure errors mutually commuting.
    """
    G = code.G
    C = code.C
    k = code.k
    if G.shape[0]:
        Lam = -C @ G.T @ _gram_inverse(G)
    else:
        Lam = np.zeros((2 * k, 0))
    Cp = C + Lam @ G
    S2k = symplectic_form(k)
    W = Lam.T @ S2k @ Lam
    Dp = code.D + Lam.T @ S2k.T @ C - 0.5 * W @ G
    return replace(code, P=Cp[:k], Q=Cp[k:], D=Dp).validate(tol=_scaled_tol(code))


def _scaled_tol(code: SymplecticCode) -> float:
    # the constraint check inherits the conditioning of A
    scale = max(1.0, float(np.max(np.abs(code.A))) ** 2)
    return CONSTRAINT_TOL * scale * max(1, code.n)


def _gram_schmidt(rows: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # orthogonal but not normalized, so the first vector is kept as given
    out = []
    for v in rows:
        w = v.astype(float).copy()
        for u in out:
            w -= (w @ u) / (u @ u) * u
        if np.linalg.norm(w) > tol * max(1.0, np.linalg.norm(v)):
            out.append(w)
    return np.array(out).reshape(len(out), rows.shape[1])


@dataclass(frozen=True)
class OrthogonalBasis:
    """Logical pairs that are orthogonal, conjugate and free of nullifier overlap."""

    P: np.ndarray
    Q: np.ndarray

    @property
    def lambda_p(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.P, self.P)

    @property
    def lambda_q(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.Q, self.Q)


def orthogonal_spread_out_basis(code: SymplecticCode, tol: float = 1e-9) -> OrthogonalBasis:
    """Build conjugate pairs inside the spread-out logical span, one pair at a time.

    Each step keeps the first orthogonalized vector as ``p``, takes for ``q``
    the shortest vector of the remaining span with symplectic product 1 with
    ``p``, then projects ``q`` out of the rest.

    Raises
    ------
    CodeError
        If no conjugate partner exists or the result violates the pairing.
    """
    n, k = code.n, code.k
    S = symplectic_form(n)
    span = _gram_schmidt(code.C)
    if span.shape[0] != 2 * k:
        raise CodeError("logical rows are linearly dependent")
    Pt, Qt = [], []
    for _ in range(k):
        p = span[0]
        rest = span[1:]
        if rest.shape[0] == 0:
            raise CodeError("no conjugate partner left")
        basis = orth(rest.T).T
        w = -(p @ S)             # q . w equals the symplectic product q S p^T
        proj = basis.T @ (basis @ w)
        nrm = proj @ proj
        if nrm < tol:
            raise CodeError("singular conjugate solve")
        q = -proj / nrm
        Pt.append(p)
        Qt.append(q)
        rest = rest - np.outer(rest @ q / (q @ q), q)
        span = _gram_schmidt(rest)
    out = OrthogonalBasis(np.array(Pt), np.array(Qt))
    check_orthogonal_basis(out, n, tol)
    return out


def check_orthogonal_basis(basis: OrthogonalBasis, n: int, tol: float = 1e-9):
    S = symplectic_form(n)
    P, Q = basis.P, basis.Q
    k = P.shape[0]
    off = lambda M: M - np.diag(np.diag(M))
    errs = {
        "P P^T off-diagonal": np.abs(off(P @ P.T)).max(initial=0.0),
        "Q Q^T off-diagonal": np.abs(off(Q @ Q.T)).max(initial=0.0),
        "P Q^T": np.abs(P @ Q.T).max(initial=0.0),
        "P S Q^T - I": np.abs(P @ S @ Q.T - np.eye(k)).max(initial=0.0),
        "P S P^T": np.abs(P @ S @ P.T).max(initial=0.0),
        "Q S Q^T": np.abs(Q @ S @ Q.T).max(initial=0.0),
    }
    for name, err in errs.items():
        if err > tol:
            raise CodeError(f"orthogonal basis check failed: {name} = {err:.3e}")


# ---------------------------------------------------------------- logical noise

@dataclass(frozen=True)
class LogicalNoiseModel:
    """Inverse covariance of the post-decoding logical shift, in units of sigma0^2.

    ``mu_map`` is the (2n, 2k) matrix with ``mu(e) = e @ mu_map``.
    """

    SigmaInv: np.ndarray
    mu_map: np.ndarray
    lambda_p: np.ndarray
    lambda_q: np.ndarray
    sigma0: float

    @property
    def Sigma(self) -> np.ndarray:
        return np.linalg.inv(self.SigmaInv)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.SigmaInv))

    @property
    def covariance(self) -> np.ndarray:
        """Covariance of the residual logical shift, ``sigma0^2 Sigma``."""
        return self.sigma0 ** 2 * self.Sigma

    def pairing_residual(self) -> float:
        return float(np.max(np.abs(self.lambda_p * self.lambda_q - 1.0), initial=0.0))


def logical_noise(code: SymplecticCode, sigma0: float = 1.0) -> LogicalNoiseModel:
    """Residual logical noise after maximum-likelihood decoding of Gaussian shifts."""
    if not sigma0 > 0:
        raise CodeError("sigma0 must be positive")
    spread = spread_out_basis(code)
    Cp = spread.C
    SigmaInv = Cp @ Cp.T
    Sigma = np.linalg.inv(SigmaInv)
    mu_map = -Cp.T @ Sigma
    basis = orthogonal_spread_out_basis(spread)
    return LogicalNoiseModel(SigmaInv, mu_map, basis.lambda_p, basis.lambda_q, float(sigma0))


def sample_residual_logical(rng: np.random.Generator, code: SymplecticCode, sigma0: float,
                            n_samples: int) -> np.ndarray:
    """Residual logical shifts from sampled errors and least-squares decoding.

    For each error ``e'``, the syndrome fixes a candidate ``e = -(e' S G^T) D``;
    the true logical part solves ``e' - e = c C + a G`` and the decoder's most
    likely class minimizes ``|c C + a G + e|`` over ``(c, a)``. Both are found by
    generic least squares rather than the closed form.
    """
    n, k = code.n, code.k
    S = symplectic_form(n)
    E = rng.normal(0.0, sigma0, (n_samples, 2 * n))
    syn = E @ S @ code.G.T
    cand = -syn @ code.D
    basis = np.vstack([code.C, code.G])
    true_coef = np.linalg.lstsq(basis.T, (E - cand).T, rcond=None)[0].T
    ml_coef = np.linalg.lstsq(basis.T, -cand.T, rcond=None)[0].T
    return true_coef[:, :2 * k] - ml_coef[:, :2 * k]


# ---------------------------------------------------------------- code builders

def complete_pure_errors(G: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Pure-error rows ``D`` with ``G S D^T = I``, ``C S D^T = 0`` and ``D S D^T = 0``."""
    G = np.asarray(G, float)
    C = np.asarray(C, float)
    m = G.shape[0]
    n = G.shape[1] // 2
    S = symplectic_form(n)
    Mx = np.vstack([G, C]) @ S
    rhs = np.vstack([np.eye(m), np.zeros((C.shape[0], m))])
    if np.linalg.matrix_rank(Mx) < Mx.shape[0]:
        raise CodeError("nullifiers and logicals are linearly dependent")
    D = np.linalg.lstsq(Mx, rhs, rcond=None)[0].T
    W = D @ S @ D.T
    return D - 0.5 * W @ G


def _random_symmetric(rng, n, scale):
    B = rng.normal(0.0, scale, (n, n))
    return 0.5 * (B + B.T)


def random_symplectic_matrix(rng: np.random.Generator, n: int, factors: int = 4) -> np.ndarray:
    """Product of random shears, squeezes and passive rotations."""
    S = symplectic_form(n)
    A = np.eye(2 * n)
    for _ in range(factors):
        kind = rng.integers(3)
        if kind == 0:
            F = np.eye(2 * n)
            F[:n, n:] = _random_symmetric(rng, n, 0.6)
            if rng.random() < 0.5:
                F = F.T
        elif kind == 1:
            U = np.linalg.qr(rng.normal(size=(n, n)))[0] @ np.diag(np.exp(rng.normal(0, 0.3, n)))
            F = np.zeros((2 * n, 2 * n))
            F[:n, :n] = U
            F[n:, n:] = np.linalg.inv(U).T
        else:
            # exp of S times a symmetric generator is symplectic
            H = _random_symmetric(rng, 2 * n, 0.5)
            F = expm(S @ H)
        A = F @ A
    return A


def random_symplectic_code(rng: np.random.Generator, n: int, k: int, retries: int = 20) -> SymplecticCode:
    """Random code obtained by slicing a random symplectic matrix."""
    if not 1 <= k < n:
        raise CodeError("need 1 <= k < n")
    m = n - k
    for _ in range(retries):
        A = random_symplectic_matrix(rng, n)
        # rows 0..n-1 pair with rows n..2n-1, so slicing preserves the block pattern
        code = SymplecticCode(n, k, A[:m], A[m:n], A[n:n + m], A[n + m:])
        try:
            return code.validate()
        except CodeError:
            continue
    raise CodeError("could not generate a well-conditioned symplectic code")


def _rect_edge(Lx, Ly, d, x, y):
    return d * Lx * Ly + (x % Lx) * Ly + (y % Ly)


def cv_toric_code(Lx: int, Ly: int) -> SymplecticCode:
    """Continuous-variable toric code on an Lx x Ly torus with one mode per edge.

    Vertex rows take the divergence of the p quadratures, plaquette rows the
    circulation of the q quadratures; the last row of each kind is dropped.
    ``P`` holds p shifts along dual loops and ``Q`` q shifts along primal loops,
    paired so that ``P S Q^T = I``.
    """
    if Lx < 2 or Ly < 2:
        raise CodeError("torus sides must be at least 2")
    nE = 2 * Lx * Ly
    e = lambda d, x, y: _rect_edge(Lx, Ly, d, x, y)
    vert = np.zeros((Lx * Ly, 2 * nE))
    plaq = np.zeros((Lx * Ly, 2 * nE))
    for x in range(Lx):
        for y in range(Ly):
            v = x * Ly + y
            vert[v, e(0, x, y)] += 1
            vert[v, e(1, x, y)] += 1
            vert[v, e(0, x - 1, y)] -= 1
            vert[v, e(1, x, y - 1)] -= 1
            plaq[v, nE + e(0, x, y)] += 1
            plaq[v, nE + e(1, x + 1, y)] += 1
            plaq[v, nE + e(0, x, y + 1)] -= 1
            plaq[v, nE + e(1, x, y)] -= 1
    G = np.vstack([vert[:-1], plaq[:-1]])
    P = np.zeros((2, 2 * nE))
    Q = np.zeros((2, 2 * nE))
    for x in range(Lx):
        P[0, e(1, x, 0)] = 1.0          # y-edges of row 0: dual loop along x
        Q[1, nE + e(0, x, 0)] = 1.0     # x-edges of row 0: primal loop along x
    for y in range(Ly):
        P[1, e(0, 0, y)] = 1.0          # x-edges of column 0: dual loop along y
        Q[0, nE + e(1, 0, y)] = 1.0     # y-edges of column 0: primal loop along y
    D = complete_pure_errors(G, np.vstack([P, Q]))
    return SymplecticCode(nE, 2, G, P, D, Q).validate()


def identity_code(n: int) -> SymplecticCode:
    """Every mode is logical; there are no nullifiers."""
    I = np.eye(2 * n)
    return SymplecticCode(n, n, I[:0], I[:n], I[:0], I[n:]).validate()


def nullifier_null_space(code: SymplecticCode) -> np.ndarray:
    """Orthonormal basis of the row vectors orthogonal to every nullifier."""
    return null_space(code.G).T
