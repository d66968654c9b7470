"""Repeated error correction of a single GKP qubit against shifts in q.

Each round t the data oscillator picks up a Gaussian shift ``eps_t`` and the
ancilla readout a Gaussian shift ``delta_t``; only the last readout is exact.
The decoders below infer the parity of the total winding ``k_M`` in
``phi_M = q_M + 2 pi k_M`` from the wrapped outcomes ``q_1..q_M``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .core import (
    TWO_PI,
    ConfigurationError,
    NoiseParams,
    _wrap_scalar,
    villain_derivative_nb,
    villain_value_nb,
    wrap,
)

# fixed-point solver settings for the forward-minimization step
PICARD_DAMPING = 0.5
PICARD_TOL = 1e-10
PICARD_MAXITER = 500

ML_TIE_RTOL = 1e-12
ML_PRUNE = 50.0


class NumericalFault(RuntimeError):
    """A decoder's inner solver failed to converge."""


@dataclass(frozen=True)
class ShiftRecord:
    """Sampled data shifts and readout shifts for one oscillator.

    ``eps`` and ``phi`` have length M, ``delta`` has length M with the last
    entry fixed to zero (perfect final readout).
    """

    M: int
    eps: np.ndarray
    delta: np.ndarray
    phi: np.ndarray


@dataclass(frozen=True)
class SyndromeHistory:
    """Wrapped readouts ``q_t`` in ``[-pi, pi)``, ``t = 1..M``."""

    q: np.ndarray

    @property
    def M(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of one decoding call.

    Attributes
    ----------
    logical_parity : int
        0 for no logical X correction, 1 to apply one.
    path : ndarray or None
        Estimated trajectory ``phi_1..phi_M`` when the decoder builds one.
    energy : float or None
        Energy of the returned path.
    log_partition : tuple of float or None
        ``(ln Z_0, ln Z_1)`` up to a common constant, for the ML decoder.
    """

    logical_parity: int
    path: Optional[np.ndarray] = None
    energy: Optional[float] = None
    log_partition: Optional[tuple] = None


@dataclass(frozen=True)
class MlMatrices:
    """Gaussian-integration matrices of the ML decoder for M rounds."""

    B: np.ndarray
    A: np.ndarray
    A_tilde: np.ndarray
    c: np.ndarray
    b: float
    cutoff: int


def _as_q(q) -> np.ndarray:
    if isinstance(q, SyndromeHistory):
        q = q.q
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size < 1:
        raise ConfigurationError("need at least one round")
    return q


def _check_decoder_params(params: NoiseParams):
    if not params.sigma > 0:
        raise ConfigurationError("decoders need sigma > 0")


# ---------------------------------------------------------------- sampling

def simulate_history(rng: np.random.Generator, params: NoiseParams, M: int):
    """Sample one shift record and the readouts it produces.

    Returns
    -------
    record : ShiftRecord
    history : SyndromeHistory
    """
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    eps, delta, phi, q, _ = simulate_batch(rng, params, M, 1)
    return (ShiftRecord(M, eps[0], delta[0], phi[0]), SyndromeHistory(q[0]))


def simulate_batch(rng: np.random.Generator, params: NoiseParams, M: int, n: int):
    """Sample ``n`` independent records at once.

    Returns
    -------
    eps, delta, phi, q : ndarray, shape (n, M)
    k_true : ndarray of int, shape (n,)
        Winding with ``phi_M = q_M + 2 pi k_true``.
    """
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    eps = rng.normal(0.0, 1.0, (n, M)) * params.sigma
    delta = np.zeros((n, M))
    if M > 1 and params.sigmaM > 0:
        delta[:, :-1] = rng.normal(0.0, 1.0, (n, M - 1)) * params.sigmaM
    phi = np.cumsum(eps, axis=1)
    q, _ = wrap(phi + delta, TWO_PI)
    _, k = wrap(phi[:, -1], TWO_PI)
    # phi_M = q_M + 2 pi k  with q_M the wrapped remainder
    return eps, delta, phi, q, k


# ---------------------------------------------------------------- energies

@njit(cache=True)
def _path_energy(path, q, sigma, sigmaM, cutoff, cosine):
    M = q.shape[0]
    e = 0.0
    prev = 0.0
    inv = 1.0 / (2.0 * sigma * sigma)
    for t in range(M):
        d = path[t] - prev
        e += d * d * inv
        prev = path[t]
        if t < M - 1 and sigmaM > 0:
            if cosine:
                e -= math.cos(q[t] - path[t]) / (sigmaM * sigmaM)
            else:
                e += villain_value_nb(q[t] - path[t], sigmaM, cutoff)
    return e


def path_energy(path, q, params: NoiseParams, potential: str = "villain",
                cutoff: int = 10) -> float:
    """Discrete-time action of a trajectory ``phi_1..phi_M``.

    ``potential`` selects the Villain form or its cosine approximation for
    the readout terms. With ``sigmaM = 0`` only the kinetic part remains.
    """
    q = _as_q(q)
    path = np.asarray(path, dtype=float)
    return float(_path_energy(path, q, params.sigma, params.sigmaM, cutoff,
                              potential == "cosine"))


# ---------------------------------------------------------------- forward-min

@njit(cache=True)
def _descend_to_min(prev, q, s2, sigmaM, cutoff):
    # first local minimum of (phi-prev)^2/2s2 + V(q-phi) along the descent
    # direction from prev; used when the damped iteration oscillates
    g0 = -villain_derivative_nb(q - prev, sigmaM, cutoff)
    if g0 == 0.0:
        return prev, True
    d = -1.0 if g0 > 0 else 1.0
    h = min(0.05, 0.25 * sigmaM)
    a = prev
    b = prev
    found = False
    for _ in range(100000):
        b = a + d * h
        g = (b - prev) / s2 - villain_derivative_nb(q - b, sigmaM, cutoff)
        if g * d >= 0.0:
            found = True
            break
        a = b
    if not found:
        return prev, False
    for _ in range(200):
        m = 0.5 * (a + b)
        g = (m - prev) / s2 - villain_derivative_nb(q - m, sigmaM, cutoff)
        if g * d >= 0.0:
            b = m
        else:
            a = m
        if abs(b - a) < 1e-13:
            break
    return 0.5 * (a + b), True


@njit(cache=True)
def _forward_step(prev, q, sigma, sigmaM, cutoff):
    if sigmaM == 0.0:
        # infinitely stiff readout: snap to the branch nearest prev
        r, _ = _wrap_scalar(prev - q, TWO_PI)
        return prev - r, True
    s2 = sigma * sigma
    phi = prev
    for _ in range(PICARD_MAXITER):
        target = prev + s2 * villain_derivative_nb(q - phi, sigmaM, cutoff)
        new = phi + PICARD_DAMPING * (target - phi)
        if abs(new - phi) < PICARD_TOL:
            return new, True
        phi = new
    return _descend_to_min(prev, q, s2, sigmaM, cutoff)


@njit(cache=True)
def _nearest_branch(q, ref):
    # q + 2 pi k closest to ref
    r, _ = _wrap_scalar(ref - q, TWO_PI)
    return ref - r


@njit(cache=True)
def _forward_path(q, sigma, sigmaM, cutoff, path):
    M = q.shape[0]
    prev = 0.0
    ok = True
    for t in range(M - 1):
        phi, good = _forward_step(prev, q[t], sigma, sigmaM, cutoff)
        ok = ok and good
        path[t] = phi
        prev = phi
    path[M - 1] = _nearest_branch(q[M - 1], prev)
    return ok


@njit(cache=True)
def _branch_parity(phi_M, q_M):
    k = int(round((phi_M - q_M) / TWO_PI))
    return k & 1


@njit(cache=True)
def forward_min_batch(q, sigma, sigmaM, cutoff):
    """Parities for every row of ``q`` (shape (n, M)); -1 flags a solver fault."""
    n, M = q.shape
    out = np.empty(n, np.int64)
    path = np.empty(M)
    for i in range(n):
        ok = _forward_path(q[i], sigma, sigmaM, cutoff, path)
        out[i] = _branch_parity(path[M - 1], q[i, M - 1]) if ok else -1
    return out


def decode_forward_min(q, params: NoiseParams, cutoff: int = 10) -> DecodeOutcome:
    """Greedy per-round minimization of the path action.

    Each ``phi_t`` is the local minimum of
    ``(phi - phi_{t-1})^2 / 2 sigma^2 + V_{sigmaM}(q_t - phi)`` reached by
    damped fixed-point iteration started at ``phi_{t-1}``; the final value is
    the branch of ``q_M`` nearest ``phi_{M-1}``.

    Raises
    ------
    NumericalFault
        If the inner solve fails to locate a minimum.
    """
    _check_decoder_params(params)
    q = _as_q(q)
    path = np.empty(q.size)
    if not _forward_path(q, params.sigma, params.sigmaM, cutoff, path):
        raise NumericalFault("forward-minimization step did not converge")
    parity = int(_branch_parity(path[-1], q[-1]))
    energy = float(_path_energy(path, q, params.sigma, params.sigmaM, cutoff, False))
    return DecodeOutcome(parity, path, energy)


@njit(cache=True)
def _backward_path(q, sigma, sigmaM, cutoff, phi_M, path):
    # the same greedy step run from the fixed end point towards t = 1
    M = q.shape[0]
    prev = phi_M
    ok = True
    for t in range(M - 2, -1, -1):
        phi, good = _forward_step(prev, q[t], sigma, sigmaM, cutoff)
        ok = ok and good
        path[t] = phi
        prev = phi
    path[M - 1] = phi_M
    return ok


@njit(cache=True)
def _relax_backward(q, sigma, sigmaM, cutoff, fwd, path):
    # re-minimise each phi_t from t = M-1 down with both neighbours held:
    # phi_{t-1} from the forward pass, phi_{t+1} already updated
    M = q.shape[0]
    path[M - 1] = fwd[M - 1]
    s_half = sigma / math.sqrt(2.0)
    ok = True
    for t in range(M - 2, -1, -1):
        left = fwd[t - 1] if t > 0 else 0.0
        phi, good = _forward_step(0.5 * (left + path[t + 1]), q[t], s_half, sigmaM, cutoff)
        ok = ok and good
        path[t] = phi
    return ok


BACKWARD_AVERAGE = 0
BACKWARD_RELAX = 1


@njit(cache=True)
def forward_backward_paths(q, sigma, sigmaM, cutoff, out, mode=BACKWARD_RELAX):
    """Forward pass followed by a backward pass from the fixed end point.

    ``q`` has shape (n, M); ``out`` receives the refined trajectories. With
    ``mode == BACKWARD_RELAX`` each ``phi_t`` is re-minimised against its
    forward-pass predecessor and its updated successor. With
    ``mode == BACKWARD_AVERAGE`` the greedy step is rerun in reversed time and
    averaged with the forward path. The return value counts rows whose inner
    solves failed.
    """
    n, M = q.shape
    fwd = np.empty(M)
    bwd = np.empty(M)
    bad = 0
    for i in range(n):
        ok1 = _forward_path(q[i], sigma, sigmaM, cutoff, fwd)
        if mode == BACKWARD_RELAX:
            ok2 = _relax_backward(q[i], sigma, sigmaM, cutoff, fwd, bwd)
            for t in range(M):
                out[i, t] = bwd[t]
        else:
            ok2 = _backward_path(q[i], sigma, sigmaM, cutoff, fwd[M - 1], bwd)
            for t in range(M - 1):
                out[i, t] = 0.5 * (fwd[t] + bwd[t])
            out[i, M - 1] = fwd[M - 1]
        if not (ok1 and ok2):
            bad += 1
    return bad


# ---------------------------------------------------------------- memoryless / passive

@njit(cache=True)
def _memoryless_parity(q):
    M = q.shape[0]
    corr = 0.0
    for t in range(M - 1):
        r, _ = _wrap_scalar(q[t] + corr, TWO_PI)
        corr -= r
    # final exact readout of the corrected data
    r, _ = _wrap_scalar(q[M - 1] + corr, TWO_PI)
    corr -= r
    # the decoder's estimate of phi_M is -corr, on a branch of q_M
    return _branch_parity(-corr, q[M - 1])


@njit(cache=True)
def memoryless_batch(q):
    n = q.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        out[i] = _memoryless_parity(q[i])
    return out


def decode_memoryless(q, params: NoiseParams = None) -> DecodeOutcome:
    """Trust every readout and undo it immediately."""
    q = _as_q(q)
    return DecodeOutcome(int(_memoryless_parity(q)))


@njit(cache=True)
def passive_batch(q):
    n, M = q.shape
    out = np.empty(n, np.int64)
    for i in range(n):
        _, k = _wrap_scalar(q[i, M - 1], TWO_PI)
        out[i] = k & 1
    return out


def decode_passive(q, params: NoiseParams = None) -> DecodeOutcome:
    """Ignore intermediate readouts; keep the final branch nearest zero."""
    q = _as_q(q)
    _, k = wrap(float(q[-1]), TWO_PI)
    return DecodeOutcome(int(k & 1))


# ---------------------------------------------------------------- dynamic programming

@njit(cache=True)
def _min_plus_parabola(g, a, f, arg, v, z):
    # f[p] = min_j g[j] + a (p - j)^2 via the lower envelope of parabolas
    n = g.shape[0]
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for j in range(1, n):
        vk = v[k]
        s = ((g[j] + a * j * j) - (g[vk] + a * vk * vk)) / (2.0 * a * (j - vk))
        while s <= z[k]:
            k -= 1
            vk = v[k]
            s = ((g[j] + a * j * j) - (g[vk] + a * vk * vk)) / (2.0 * a * (j - vk))
        k += 1
        v[k] = j
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for p in range(n):
        while z[k + 1] < p:
            k += 1
        d = p - v[k]
        f[p] = g[v[k]] + a * d * d
        arg[p] = v[k]


@njit(cache=True)
def _dp_decode(q, sigma, sigmaM, cutoff, per_period, periods, cosine, path):
    # returns (k_M parity, status); status 1 = argmin on window edge
    M = q.shape[0]
    N = per_period * periods
    h = TWO_PI / per_period
    x0 = q[M - 1] - 0.5 * periods * TWO_PI
    inv = 1.0 / (2.0 * sigma * sigma)
    grid = x0 + h * np.arange(N)
    cur = np.empty(N)
    nxt = np.empty(N)
    args = np.empty((max(M - 1, 1), N), np.int64)
    v = np.empty(N, np.int64)
    z = np.empty(N + 1)
    for j in range(N):
        cur[j] = grid[j] * grid[j] * inv
    a = h * h * inv
    for t in range(M - 1):
        if t > 0:
            _min_plus_parabola(cur, a, nxt, args[t], v, z)
            cur, nxt = nxt, cur
        if sigmaM > 0:
            for j in range(N):
                if cosine:
                    cur[j] -= math.cos(q[t] - grid[j]) / (sigmaM * sigmaM)
                else:
                    cur[j] += villain_value_nb(q[t] - grid[j], sigmaM, cutoff)
    # final exact readout: phi_M on the branches of q_M inside the window
    best = np.inf
    best_phi = 0.0
    best_j = -1
    kmax = periods // 2
    for kk in range(-kmax, kmax + 1):
        phiM = q[M - 1] + TWO_PI * kk
        if phiM < grid[0] or phiM > grid[N - 1]:
            continue
        if M == 1:
            e = phiM * phiM * inv
            jj = -1
        else:
            e = np.inf
            jj = -1
            for j in range(N):
                d = phiM - grid[j]
                c = cur[j] + d * d * inv
                if c < e:
                    e = c
                    jj = j
        if e < best:
            best = e
            best_phi = phiM
            best_j = jj
    path[M - 1] = best_phi
    status = 0
    j = best_j
    for t in range(M - 2, -1, -1):
        if j == 0 or j == N - 1:
            status = 1
        path[t] = grid[j]
        if t > 0:
            j = args[t, j]
    return _branch_parity(best_phi, q[M - 1]), status


@njit(cache=True)
def dp_batch(q, sigma, sigmaM, cutoff, per_period, periods, cosine):
    """Parities for every row of ``q``; -1 flags an argmin on the window edge."""
    n, M = q.shape
    out = np.empty(n, np.int64)
    path = np.empty(M)
    for i in range(n):
        par, status = _dp_decode(q[i], sigma, sigmaM, cutoff, per_period, periods,
                                 cosine, path)
        out[i] = par if status == 0 else -1
    return out


def _refine_path(path, q, params, cosine, cutoff, iters=50):
    # Newton polish of phi_1..phi_{M-1} on the same energy, phi_M held fixed
    M = q.size
    if M < 2 or params.sigmaM == 0:
        return path
    s2 = params.sigma ** 2
    m2 = params.sigmaM ** 2
    cur = path.copy()
    e_cur = _path_energy(cur, q, params.sigma, params.sigmaM, cutoff, cosine)
    for _ in range(iters):
        phi = cur[:-1]
        left = np.concatenate(([0.0], cur[:-2]))
        right = cur[1:]
        x = q[:-1] - phi
        if cosine:
            dU = -np.sin(x) / m2
            d2U = np.cos(x) / m2
        else:
            dU = -np.array([villain_derivative_nb(xi, params.sigmaM, cutoff) for xi in x])
            d2U = np.array([_villain_second(xi, params.sigmaM, cutoff) for xi in x])
        grad = (2 * phi - left - right) / s2 + dU
        diag = 2.0 / s2 + d2U
        H = np.diag(diag) - np.diag(np.full(M - 2, 1.0 / s2), 1) - np.diag(np.full(M - 2, 1.0 / s2), -1)
        try:
            step = np.linalg.solve(H, grad)
            if grad @ step <= 0:
                step = grad * s2 / 4
        except np.linalg.LinAlgError:
            step = grad * s2 / 4
        t = 1.0
        improved = False
        while t > 1e-6:
            trial = cur.copy()
            trial[:-1] -= t * step
            e_trial = _path_energy(trial, q, params.sigma, params.sigmaM, cutoff, cosine)
            if e_trial <= e_cur:
                improved = e_cur - e_trial > 1e-15
                cur, e_cur = trial, e_trial
                break
            t *= 0.5
        if not improved:
            break
    return cur


@njit(cache=True)
def _villain_second(x, sigma, cutoff):
    r, _ = _wrap_scalar(x, TWO_PI)
    inv = 1.0 / (2.0 * sigma * sigma)
    lead = -r * r * inv
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    for k in range(-cutoff, cutoff + 1):
        y = r + TWO_PI * k
        a = -y * y * inv - lead
        if a > -80.0:
            w = math.exp(a)
            s0 += w
            s1 += w * y
            s2 += w * y * y
    mean = s1 / s0
    var = s2 / s0 - mean * mean
    return (1.0 - var / (sigma * sigma)) / (sigma * sigma)


def decode_dynamic_programming(q, params: NoiseParams, per_period: int = 200,
                               periods: int = 4, potential: str = "cosine",
                               cutoff: int = 10, refine: bool = False) -> DecodeOutcome:
    """Exact minimum of the discretized path action by dynamic programming.

    Parameters
    ----------
    q : SyndromeHistory or array_like
    params : NoiseParams
    per_period : int
        Grid points per 2*pi period (at least 100).
    periods : int
        Window width in periods, centred on the last readout (at least 4).
    potential : {"cosine", "villain"}
        Readout term used in the action.
    refine : bool
        Polish the grid optimum with Newton steps on the continuous action
        before reporting the path and energy.

    Raises
    ------
    ConfigurationError
        If the grid is too coarse or the optimum touches the window edge.
    """
    _check_decoder_params(params)
    if per_period < 100 or periods < 4:
        raise ConfigurationError("grid needs >= 100 points per period and >= 4 periods")
    if potential not in ("cosine", "villain"):
        raise ConfigurationError(f"unknown potential {potential!r}")
    q = _as_q(q)
    cosine = potential == "cosine"
    path = np.empty(q.size)
    parity, status = _dp_decode(q, params.sigma, params.sigmaM, cutoff, per_period,
                                periods, cosine, path)
    if status:
        raise ConfigurationError("dynamic-programming optimum lies on the window edge")
    if refine:
        path = _refine_path(path, q, params, cosine, cutoff)
    energy = float(_path_energy(path, q, params.sigma, params.sigmaM, cutoff, cosine))
    return DecodeOutcome(int(parity), path, energy)


# ---------------------------------------------------------------- maximum likelihood

def ml_matrices(params: NoiseParams, M: int, cutoff: int = 2) -> MlMatrices:
    """Quadratic form left after integrating out ``phi_1..phi_{M-1}``.

    The integrand is ``exp(-R/2)`` with
    ``R = sum_{t<M} (q_t - phi_t)^2 / sigmaM^2 + sum_t (phi_t - phi_{t-1})^2 / sigma^2``
    and ``phi_M`` pinned to the last readout branch. Completing the square
    leaves ``exp(-y A y^T / 2)`` in the unwrapped readouts ``y``.

    Raises
    ------
    ConfigurationError
        If the noise parameters make ``B`` singular.
    """
    _check_decoder_params(params)
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    s2 = params.sigma ** 2
    if M == 1:
        A = np.array([[1.0 / s2]])
        return MlMatrices(np.zeros((0, 0)), A, np.zeros((0, 0)), np.zeros(0), 1.0 / s2, cutoff)
    m2 = params.sigmaM ** 2
    if m2 == 0:
        raise ConfigurationError("ML matrices need sigmaM > 0")
    n = M - 1
    B = np.zeros((n, n))
    idx = np.arange(n)
    B[idx, idx] = 1.0 / m2 + 2.0 / s2
    B[idx[:-1], idx[:-1] + 1] = -1.0 / s2
    B[idx[:-1] + 1, idx[:-1]] = -1.0 / s2
    try:
        np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("B is not positive definite") from exc
    Binv = np.linalg.inv(B)
    Binv = 0.5 * (Binv + Binv.T)
    A_tilde = np.eye(n) / m2 - Binv / m2 ** 2
    c = -Binv[n - 1, :] / (s2 * m2)
    b = 1.0 / s2 - Binv[n - 1, n - 1] / s2 ** 2
    A = np.empty((M, M))
    A[:n, :n] = A_tilde
    A[n, :n] = c
    A[:n, n] = c
    A[n, n] = b
    return MlMatrices(B, A, A_tilde, c, float(b), cutoff)


@njit(cache=True)
def _log_partition(q, R, cutoff, parity, prune):
    # ln sum exp(-|R (q + 2 pi k)|^2 / 2) over the truncated winding box
    M = q.shape[0]
    width = 4 * cutoff + 1
    vals = np.empty((M, width))
    nv = np.empty(M, np.int64)
    for i in range(M - 1):
        nv[i] = 2 * cutoff + 1
        for j in range(2 * cutoff + 1):
            vals[i, j] = j - cutoff
    cnt = 0
    for kk in range(-2 * cutoff, 2 * cutoff + 1):
        if (kk - parity) % 2 == 0:
            vals[M - 1, cnt] = kk
            cnt += 1
    nv[M - 1] = cnt
    ys = np.zeros(M)
    cost = np.zeros(M + 1)
    idx = np.zeros(M, np.int64)
    emin = np.inf
    acc = 0.0
    i = M - 1
    idx[i] = 0
    while True:
        if idx[i] < nv[i]:
            y = q[i] + TWO_PI * vals[i, idx[i]]
            idx[i] += 1
            t = R[i, i] * y
            for j in range(i + 1, M):
                t += R[i, j] * ys[j]
            ci = cost[i + 1] + t * t
            if 0.5 * ci > emin + prune:
                continue
            ys[i] = y
            cost[i] = ci
            if i == 0:
                e = 0.5 * ci
                if e < emin:
                    acc = acc * math.exp(e - emin) + 1.0 if acc > 0 else 1.0
                    emin = e
                else:
                    acc += math.exp(emin - e)
            else:
                i -= 1
                idx[i] = 0
        else:
            i += 1
            if i == M:
                break
    return -emin + math.log(acc)


@njit(cache=True)
def _ml_parity(lz0, lz1):
    # ties within relative ML_TIE_RTOL go to parity 0
    if lz1 > lz0 and lz0 - lz1 < math.log1p(-ML_TIE_RTOL):
        return 1
    return 0


@njit(cache=True)
def ml_batch(q, R, cutoff, prune):
    n = q.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        lz0 = _log_partition(q[i], R, cutoff, 0, prune)
        lz1 = _log_partition(q[i], R, cutoff, 1, prune)
        out[i] = _ml_parity(lz0, lz1)
    return out


def ml_upper_factor(mats: MlMatrices) -> np.ndarray:
    """Upper-triangular ``R`` with ``A = R^T R``."""
    L = np.linalg.cholesky(mats.A)
    return np.ascontiguousarray(L.T)


def decode_ml(q, params: NoiseParams, cutoff: int = 2, prune: float = ML_PRUNE) -> DecodeOutcome:
    """Maximum-likelihood parity from the truncated Gaussian sums ``Z_0``, ``Z_1``.

    Windings run over ``|k_t| <= cutoff`` for ``t < M`` and ``|k_M| <= 2 cutoff``
    with the parity of ``k_M`` fixed by the class. Subtrees of the winding
    enumeration whose exponent exceeds the running minimum by more than
    ``prune`` are skipped (``prune=inf`` sums every term).
    """
    q = _as_q(q)
    if cutoff < 1:
        raise ConfigurationError("cutoff must be >= 1")
    mats = ml_matrices(params, q.size, cutoff)
    R = ml_upper_factor(mats)
    lz0 = _log_partition(q, R, cutoff, 0, prune)
    lz1 = _log_partition(q, R, cutoff, 1, prune)
    return DecodeOutcome(int(_ml_parity(lz0, lz1)), log_partition=(lz0, lz1))


# ---------------------------------------------------------------- rate fitting

@dataclass(frozen=True)
class RateFit:
    """Exponential decay fit ``1 - 2 P(M) = exp(a + s M)``.

    ``rate`` is the per-round flip probability ``(1 - exp(s)) / 2``.
    """

    rate: float
    rate_stderr: float
    slope: float
    intercept: float
    residual: float
    chi2: float
    dof: int
    used: tuple


def fit_error_rate(points: Sequence, trials: Optional[Sequence] = None) -> RateFit:
    """Fit ``ln(1 - 2 P_err)`` linearly in the number of rounds.

    Parameters
    ----------
    points : sequence of (M, P_err)
    trials : sequence of int, optional
        Trials behind each point. When given, the fit is weighted by the
        binomial variance of ``ln(1 - 2 P)`` and ``chi2`` is meaningful.

    Returns
    -------
    RateFit

    Notes
    -----
    Points with ``P_err >= 1/2`` carry no decay information and are dropped
    with a warning. At least three usable points are required.
    """
    pts = [(float(m), float(p)) for m, p in points]
    if trials is not None and len(trials) != len(pts):
        raise ConfigurationError("trials must match points")
    keep = [i for i, (_, p) in enumerate(pts) if p < 0.5]
    dropped = len(pts) - len(keep)
    if dropped:
        warnings.warn(f"dropped {dropped} point(s) with P_err >= 1/2", RuntimeWarning)
    if len({pts[i][0] for i in keep}) < 3:
        raise ConfigurationError("need at least three distinct M values with P_err < 1/2")
    Ms = np.array([pts[i][0] for i in keep])
    P = np.array([pts[i][1] for i in keep])
    y = np.log1p(-2.0 * P)
    if trials is not None:
        n = np.array([float(trials[i]) for i in keep])
        # binomial variance, floored at one event so zero-failure points keep finite weight
        var_p = np.maximum(P * (1 - P), 1.0 / n) / n
        var_y = 4.0 * var_p / (1 - 2 * P) ** 2
        w = 1.0 / var_y
    else:
        w = np.ones_like(y)
    X = np.column_stack([np.ones_like(Ms), Ms])
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    intercept, slope = cov @ (WX.T @ y)
    resid = y - (intercept + slope * Ms)
    chi2 = float(np.sum(w * resid ** 2))
    lam = math.exp(slope)
    rate = 0.5 * (1.0 - lam)
    rate_se = 0.5 * lam * math.sqrt(cov[1, 1]) if trials is not None else float("nan")
    return RateFit(rate, rate_se, float(slope), float(intercept),
                   float(np.sqrt(np.mean(resid ** 2))), chi2, len(keep) - 2, tuple(keep))
