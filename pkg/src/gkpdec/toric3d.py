"""Space-time decoding of the GKP toric code with noisy measurements.

Layers ``t = 1..M`` are stored at array row ``t - 1``. Per layer there are
``2 L^2`` edges (flat order of :class:`~gkpdec.toric_channel.TorusLattice`)
and ``L^2`` plaquettes. Error records hold

* ``eps[t, e]``: data shift on edge ``e`` just before measurement ``t``,
* ``delta[t, e]``: GKP ancilla shift, zero in the last row,
* ``xi[t, h]``: toric ancilla shift, zero in the last row.

The matching problem lives on the cubic lattice. Cube ``(t, h)`` sits between
time slices ``t-1`` and ``t`` above plaquette ``h``. Its coupled faces are the
four vertical plaquettes ``(t, e)`` over the edges of ``h`` plus the
horizontal plaquettes ``(t-1, h)`` and ``(t, h)`` when those lie strictly
between the fixed bottom and top slices. Every coupled face therefore borders
exactly two cubes. Vertical face ``(t, e)`` has flat index ``t * 2L^2 + e``
and horizontal face ``(t, h)`` has index ``M * 2L^2 + t * L^2 + h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import TWO_PI, ConfigurationError, NoiseParams, _wrap_scalar, villain_value_nb
from .gkp_single import BACKWARD_AVERAGE, BACKWARD_RELAX, forward_backward_paths
from .matching import CsrGraph, defect_distance_table, match_defects_nb, min_weight_perfect_matching_dense
from .toric_channel import _curl_flat, _defects_flat, _homology_flat

FOUR_PI = 2.0 * TWO_PI
# regenerated syndromes must agree with the input to this many radians
SYNDROME_ATOL = 1e-7

ALG1 = 1
ALG2 = 2

# status codes returned by the batch kernel
OK = 0
ODD_FRUSTRATION = -1
RESIDUAL_SYNDROME = -2
NOT_A_CYCLE = -3


class InvariantViolation(RuntimeError):
    """Raised when a decoding step breaks a structural guarantee."""


@dataclass(frozen=True)
class CubicLattice:
    """Space-time lattice of an L x L torus repeated over M rounds."""

    L: int
    M: int

    def __post_init__(self):
        if int(self.L) < 2:
            raise ConfigurationError("lattice size must be at least 2")
        if int(self.M) < 1:
            raise ConfigurationError("need at least one round")

    @property
    def n_edges(self) -> int:
        return 2 * self.L * self.L

    @property
    def n_plaq2d(self) -> int:
        return self.L * self.L

    @property
    def n_vertical(self) -> int:
        return self.M * self.n_edges

    @property
    def n_horizontal(self) -> int:
        return (self.M - 1) * self.n_plaq2d

    @property
    def n_faces(self) -> int:
        return self.n_vertical + self.n_horizontal

    @property
    def n_cubes(self) -> int:
        return self.M * self.n_plaq2d

    def vertical_index(self, t: int, e: int) -> int:
        return t * self.n_edges + e

    def horizontal_index(self, t: int, h: int) -> int:
        if not 0 <= t < self.M - 1:
            raise IndexError("horizontal faces exist only between rounds")
        return self.n_vertical + t * self.n_plaq2d + h

    def face_cubes(self) -> np.ndarray:
        """(n_faces, 2) array of the two cubes bordering each coupled face."""
        L, M = self.L, self.M
        P = self.n_plaq2d
        out = np.empty((self.n_faces, 2), np.int64)
        for x in range(L):
            for y in range(L):
                ex = x * L + y
                ey = L * L + x * L + y
                for t in range(M):
                    out[t * self.n_edges + ex] = (t * P + x * L + y, t * P + x * L + (y - 1) % L)
                    out[t * self.n_edges + ey] = (t * P + x * L + y, t * P + ((x - 1) % L) * L + y)
        for t in range(M - 1):
            for h in range(P):
                out[self.n_vertical + t * P + h] = (t * P + h, (t + 1) * P + h)
        return out

    def cube_graph(self) -> CsrGraph:
        fc = self.face_cubes()
        return CsrGraph.from_edges(self.n_cubes, fc[:, 0], fc[:, 1])


@dataclass(frozen=True)
class SpaceTimeError:
    eps: np.ndarray
    delta: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True)
class SpaceTimeSyndrome:
    q_gkp: np.ndarray
    q_tor: np.ndarray


@dataclass(frozen=True)
class RpgmWeights:
    """Face couplings plus a label naming the formula that produced them."""

    tau: np.ndarray
    provenance: str


# ---------------------------------------------------------------- sampling / syndromes

def sample_space_time_error(rng: np.random.Generator, params: NoiseParams, L: int, M: int):
    """Draw one error record and its syndrome."""
    lat = CubicLattice(L, M)
    eps, delta, xi = _sample_arrays(rng, params, lat, None)
    err = SpaceTimeError(eps, delta, xi)
    return err, syndrome_of(err, L)


def _sample_arrays(rng, params, lat: CubicLattice, n):
    shape = (lat.M,) if n is None else (n, lat.M)
    eps = rng.normal(0.0, params.sigma, shape + (lat.n_edges,)) if params.sigma > 0 \
        else np.zeros(shape + (lat.n_edges,))
    delta = rng.normal(0.0, params.sigmaM, shape + (lat.n_edges,)) if params.sigmaM > 0 \
        else np.zeros(shape + (lat.n_edges,))
    xi = rng.normal(0.0, params.sigmaT, shape + (lat.n_plaq2d,)) if params.sigmaT > 0 \
        else np.zeros(shape + (lat.n_plaq2d,))
    # the last round is measured perfectly
    delta[..., lat.M - 1, :] = 0.0
    xi[..., lat.M - 1, :] = 0.0
    return eps, delta, xi


@njit(cache=True)
def _syndromes(eps, delta, xi, L, q_gkp, q_tor):
    M, ne = eps.shape
    phi = np.zeros(ne)
    for t in range(M):
        for e in range(ne):
            phi[e] += eps[t, e]
            q_gkp[t, e] = _wrap_scalar(phi[e] + delta[t, e], TWO_PI)[0]
        c = _curl_flat(phi, L)
        for h in range(L * L):
            q_tor[t, h] = _wrap_scalar(xi[t, h] + c[h], FOUR_PI)[0]


def syndrome_of(err: SpaceTimeError, L: int) -> SpaceTimeSyndrome:
    """Syndrome history generated by an error record."""
    eps = np.asarray(err.eps, float)
    M = eps.shape[0]
    q_gkp = np.empty_like(eps)
    q_tor = np.empty((M, L * L))
    _syndromes(eps, np.asarray(err.delta, float), np.asarray(err.xi, float), int(L), q_gkp, q_tor)
    return SpaceTimeSyndrome(q_gkp, q_tor)


def syndromes_agree(a: SpaceTimeSyndrome, b: SpaceTimeSyndrome, atol: float = SYNDROME_ATOL) -> bool:
    """Equality of syndrome records modulo their periods."""
    dg = np.abs(_wrap_scalar_array(a.q_gkp - b.q_gkp, TWO_PI))
    dt = np.abs(_wrap_scalar_array(a.q_tor - b.q_tor, FOUR_PI))
    return bool(dg.max(initial=0.0) <= atol and dt.max(initial=0.0) <= atol)


def _wrap_scalar_array(x, period):
    return x - period * np.floor(x / period + 0.5)


# ---------------------------------------------------------------- Algorithm 1 candidate

@njit(cache=True)
def _route_toric(T, L, f):
    # edge field on one slice whose circulation equals T modulo 4 pi:
    # push each row's charge leftwards on y-edges, then column 0 downwards on x-edges
    LL = L * L
    for e in range(2 * LL):
        f[e] = 0.0
    col = np.zeros(L)
    for y in range(L):
        R = 0.0
        for x in range(L - 1, 0, -1):
            R += T[x * L + y]
            f[LL + x * L + y] = -R
        col[y] = R + T[0 * L + y]
    U = 0.0
    for y in range(L - 1, 0, -1):
        U += col[y]
        f[0 * L + y] = U
    for e in range(2 * LL):
        f[e] = _wrap_scalar(f[e], FOUR_PI)[0]


@njit(cache=True)
def _top_gauge(R, L, g):
    # curl-free field agreeing with R modulo 2 pi: a tree gradient plus two holonomies
    LL = L * L
    chi = np.zeros(LL)
    for y in range(L - 1):
        chi[0 * L + y + 1] = chi[0 * L + y] + R[LL + 0 * L + y]
    for y in range(L):
        for x in range(L - 1):
            chi[(x + 1) * L + y] = chi[x * L + y] + R[x * L + y]
    for x in range(L):
        xp = (x + 1) % L
        for y in range(L):
            yp = (y + 1) % L
            g[x * L + y] = chi[xp * L + y] - chi[x * L + y]
            g[LL + x * L + y] = chi[x * L + yp] - chi[x * L + y]
    a = _wrap_scalar(R[(L - 1) * L + 0] - g[(L - 1) * L + 0], TWO_PI)[0]
    b = _wrap_scalar(R[LL + 0 * L + (L - 1)] - g[LL + 0 * L + (L - 1)], TWO_PI)[0]
    for y in range(L):
        g[(L - 1) * L + y] += a
    for x in range(L):
        g[LL + x * L + (L - 1)] += b


@njit(cache=True)
def _candidate_alg1(q_gkp, q_tor, L, eps, delta, xi):
    M, ne = q_gkp.shape
    P = L * L
    for t in range(M):
        for e in range(ne):
            eps[t, e] = 0.0
            delta[t, e] = 0.0
        for h in range(P):
            xi[t, h] = 0.0
    # step 1: toric increments become ancilla errors, leaving q_tor(M) everywhere
    for t in range(M - 1):
        for h in range(P):
            xi[t, h] = _wrap_scalar(q_tor[t, h] - q_tor[M - 1, h], FOUR_PI)[0]
    # step 2: first-slice data errors carrying the remaining toric syndrome
    f = np.empty(ne)
    _route_toric(q_tor[M - 1], L, f)
    for e in range(ne):
        eps[0, e] = f[e]
    # step 3: GKP syndromes below the top become ancilla errors
    for t in range(M - 1):
        for e in range(ne):
            delta[t, e] = _wrap_scalar(q_gkp[t, e] - f[e], TWO_PI)[0]
    # step 4: top-slice gauge transformation absorbing the last GKP syndrome
    R = np.empty(ne)
    for e in range(ne):
        R[e] = _wrap_scalar(q_gkp[M - 1, e] - f[e], TWO_PI)[0]
    g = np.empty(ne)
    _top_gauge(R, L, g)
    for e in range(ne):
        eps[M - 1, e] += g[e]


def candidate_error_algorithm1(syndrome: SpaceTimeSyndrome, L: int, check: bool = True) -> SpaceTimeError:
    """Error record reproducing ``syndrome``, built by sequential syndrome suppression.

    Raises
    ------
    InvariantViolation
        If ``check`` and the regenerated syndrome differs from the input.
    """
    q_gkp = np.asarray(syndrome.q_gkp, float)
    q_tor = np.asarray(syndrome.q_tor, float)
    M, ne = q_gkp.shape
    eps = np.empty((M, ne))
    delta = np.empty((M, ne))
    xi = np.empty((M, L * L))
    _candidate_alg1(q_gkp, q_tor, int(L), eps, delta, xi)
    cand = SpaceTimeError(eps, delta, xi)
    if check and not syndromes_agree(syndrome_of(cand, L), syndrome):
        raise InvariantViolation("candidate does not reproduce the syndrome")
    return cand


def absorb_measurement_shifts(err: SpaceTimeError, L: int) -> SpaceTimeError:
    """Equivalent record with the GKP ancilla shifts moved into the data shifts.

    ``eps'(t) = eps(t) + delta(t) - delta(t-1)`` and ``xi' = xi - curl delta``
    leave every syndrome unchanged and set ``delta' = 0``.
    """
    eps = np.asarray(err.eps, float)
    delta = np.asarray(err.delta, float)
    prev = np.vstack([np.zeros((1, eps.shape[1])), delta[:-1]])
    curl = np.array([_curl_flat(d, int(L)) for d in delta])
    return SpaceTimeError(eps + delta - prev, np.zeros_like(delta), np.asarray(err.xi, float) - curl)


# ---------------------------------------------------------------- weights

@njit(cache=True)
def _face_weights(eps, delta, xi, L, sigma, sigmaT, use_delta, villain, cutoff, tau):
    M, ne = eps.shape
    P = L * L
    nv = M * ne
    cv = 4.0 / (sigma * sigma)
    ch = 4.0 / (sigmaT * sigmaT) if M > 1 else 0.0
    for t in range(M):
        for e in range(ne):
            x = eps[t, e]
            if use_delta:
                x += delta[t, e] - (delta[t - 1, e] if t > 0 else 0.0)
            if villain:
                tau[t * ne + e] = 0.5 * (villain_value_nb(0.5 * x - math.pi, 0.5 * sigma, cutoff)
                                         - villain_value_nb(0.5 * x, 0.5 * sigma, cutoff))
            else:
                tau[t * ne + e] = cv * math.cos(0.5 * x)
    for t in range(M - 1):
        cd = _curl_flat(delta[t], L)
        for h in range(P):
            x = xi[t, h]
            if use_delta:
                x -= cd[h]
            if villain:
                tau[nv + t * P + h] = 0.5 * (villain_value_nb(0.5 * x - math.pi, 0.5 * sigmaT, cutoff)
                                             - villain_value_nb(0.5 * x, 0.5 * sigmaT, cutoff))
            else:
                tau[nv + t * P + h] = ch * math.cos(0.5 * x)


def rpgm_weights(candidate: SpaceTimeError, params: NoiseParams, L: int, mode: str = "general",
                 potential: str = "cosine", cutoff: int = 10) -> RpgmWeights:
    """Face couplings of the random-plaquette gauge model for a candidate error.

    ``mode="general"`` includes the GKP ancilla shifts through the differences
    ``delta(t) - delta(t-1)`` and ``curl delta``; ``mode="perfect-gkp"`` and
    ``mode="no-delta"`` ignore them.
    """
    if mode not in ("general", "perfect-gkp", "no-delta"):
        raise ConfigurationError(f"unknown weight mode {mode!r}")
    if potential not in ("cosine", "villain"):
        raise ConfigurationError(f"unknown potential {potential!r}")
    eps = np.asarray(candidate.eps, float)
    M = eps.shape[0]
    _check_widths(params, M)
    tau = np.empty(CubicLattice(L, M).n_faces)
    _face_weights(eps, np.asarray(candidate.delta, float), np.asarray(candidate.xi, float),
                  int(L), float(params.sigma), float(params.sigmaT), mode == "general",
                  potential == "villain", int(cutoff), tau)
    return RpgmWeights(tau, f"{mode}/{potential}")


def _check_widths(params: NoiseParams, M: int):
    if not params.sigma > 0:
        raise ConfigurationError("space-time decoding needs sigma > 0")
    if M > 1 and not params.sigmaT > 0:
        raise ConfigurationError("space-time decoding needs sigmaT > 0 when M > 1")


# ---------------------------------------------------------------- matching on cubes

@njit(cache=True)
def _frustrated_cubes(tau, fc, n_cubes):
    par = np.zeros(n_cubes, np.int64)
    for f in range(tau.shape[0]):
        if tau[f] < 0.0:
            par[fc[f, 0]] ^= 1
            par[fc[f, 1]] ^= 1
    cnt = 0
    for c in range(n_cubes):
        cnt += par[c]
    out = np.empty(cnt, np.int64)
    j = 0
    for c in range(n_cubes):
        if par[c]:
            out[j] = c
            j += 1
    return out


@njit(cache=True)
def _flip_set(tau, fc, n_cubes, indptr, nbr, eid):
    # faces to shift by 2 pi: minimum unsatisfied set XOR candidate's negative faces
    nf = tau.shape[0]
    absw = np.empty(nf)
    for f in range(nf):
        absw[f] = abs(tau[f])
    defects = _frustrated_cubes(tau, fc, n_cubes)
    if defects.shape[0] & 1:
        return np.zeros(nf, np.int8), False
    flips = match_defects_nb(indptr, nbr, eid, absw, defects, nf)
    for f in range(nf):
        if tau[f] < 0.0:
            flips[f] ^= 1
    return flips, True


@njit(cache=True)
def _classify(eps_true, eps_corr, flips, L):
    # homology class of true minus corrected data shifts in the top slice
    M, ne = eps_true.shape
    k = np.empty(ne, np.int64)
    for e in range(ne):
        d = 0.0
        for t in range(M):
            d += eps_true[t, e] - eps_corr[t, e] - TWO_PI * flips[t * ne + e]
        kk = round(d / TWO_PI)
        if abs(d - TWO_PI * kk) > 1e-6:
            return RESIDUAL_SYNDROME, 0, 0
        k[e] = int(kk) & 1
    dd = _defects_flat(k, L)
    for h in range(L * L):
        if dd[h]:
            return NOT_A_CYCLE, 0, 0
    px, py = _homology_flat(k, L)
    return OK, px, py


@njit(cache=True)
def _decode_one(q_gkp, q_tor, L, sigma, sigmaM, sigmaT, algorithm, villain, cutoff, backward,
                fc, n_cubes, indptr, nbr, eid, eps_c, tau):
    M, ne = q_gkp.shape
    P = L * L
    delta_c = np.empty((M, ne))
    xi_c = np.empty((M, P))
    if algorithm == ALG1:
        _candidate_alg1(q_gkp, q_tor, L, eps_c, delta_c, xi_c)
        _face_weights(eps_c, delta_c, xi_c, L, sigma, sigmaT, True, villain, cutoff, tau)
    else:
        # per-oscillator time tracks give e0, Algorithm 1 on the residual gives e1
        qT = np.empty((ne, M))
        for e in range(ne):
            for t in range(M):
                qT[e, t] = q_gkp[t, e]
        phi = np.empty((ne, M))
        forward_backward_paths(qT, sigma, sigmaM, cutoff, phi, backward)
        rq_gkp = np.empty((M, ne))
        rq_tor = np.empty((M, P))
        col = np.empty(ne)
        for t in range(M):
            for e in range(ne):
                col[e] = phi[e, t]
                rq_gkp[t, e] = _wrap_scalar(q_gkp[t, e] - phi[e, t], TWO_PI)[0]
            c = _curl_flat(col, L)
            for h in range(P):
                rq_tor[t, h] = _wrap_scalar(q_tor[t, h] - c[h], FOUR_PI)[0]
        _candidate_alg1(rq_gkp, rq_tor, L, eps_c, delta_c, xi_c)
        for t in range(M):
            for e in range(ne):
                eps_c[t, e] += phi[e, t] - (phi[e, t - 1] if t > 0 else 0.0)
        _face_weights(eps_c, delta_c, xi_c, L, sigma, sigmaT, False, villain, cutoff, tau)
    return _flip_set(tau, fc, n_cubes, indptr, nbr, eid)


@njit(cache=True)
def space_time_batch(eps, delta, xi, L, sigma, sigmaM, sigmaT, algorithm, villain, cutoff, backward,
                     fc, n_cubes, indptr, nbr, eid):
    """Decode every record of a batch; returns (n, 3) rows ``(status, px, py)``."""
    n, M, ne = eps.shape
    P = L * L
    out = np.zeros((n, 3), np.int64)
    q_gkp = np.empty((M, ne))
    q_tor = np.empty((M, P))
    eps_c = np.empty((M, ne))
    tau = np.empty(M * ne + (M - 1) * P)
    for i in range(n):
        _syndromes(eps[i], delta[i], xi[i], L, q_gkp, q_tor)
        flips, ok = _decode_one(q_gkp, q_tor, L, sigma, sigmaM, sigmaT, algorithm, villain,
                                cutoff, backward, fc, n_cubes, indptr, nbr, eid, eps_c, tau)
        if not ok:
            out[i, 0] = ODD_FRUSTRATION
            continue
        st, px, py = _classify(eps[i], eps_c, flips, L)
        out[i, 0] = st
        out[i, 1] = px
        out[i, 2] = py
    return out


_STATUS_TEXT = {
    ODD_FRUSTRATION: "odd number of frustrated cubes",
    RESIDUAL_SYNDROME: "correction does not reproduce the top GKP syndrome",
    NOT_A_CYCLE: "residual top-slice error has plaquette defects",
}

_DECODERS = {"alg1": ALG1, "perfect-gkp": ALG1, "alg2": ALG2}
_BACKWARD = {"relax": BACKWARD_RELAX, "average": BACKWARD_AVERAGE}


@dataclass(frozen=True)
class SpaceTimeDecoder:
    """Prepared incidence tables for repeated decoding on one (L, M) lattice."""

    lattice: CubicLattice
    algorithm: str = "alg1"
    potential: str = "cosine"
    cutoff: int = 10
    backward: str = "relax"

    def __post_init__(self):
        if self.algorithm not in _DECODERS:
            raise ConfigurationError(f"unknown space-time decoder {self.algorithm!r}")
        if self.potential not in ("cosine", "villain"):
            raise ConfigurationError(f"unknown potential {self.potential!r}")
        if self.backward not in _BACKWARD:
            raise ConfigurationError(f"unknown backward pass {self.backward!r}")
        fc = self.lattice.face_cubes()
        g = CsrGraph.from_edges(self.lattice.n_cubes, fc[:, 0], fc[:, 1])
        object.__setattr__(self, "_fc", fc)
        object.__setattr__(self, "_graph", g)

    def _check(self, params: NoiseParams):
        _check_widths(params, self.lattice.M)
        if self.algorithm == "perfect-gkp" and params.sigmaM != 0:
            raise ConfigurationError("the perfect-gkp decoder assumes sigmaM = 0")

    def classify_batch(self, eps, delta, xi, params: NoiseParams) -> np.ndarray:
        """(n, 3) rows of status and homology parities for records shaped (n, M, .)."""
        self._check(params)
        lat = self.lattice
        g = self._graph
        return space_time_batch(np.ascontiguousarray(eps, float), np.ascontiguousarray(delta, float),
                                np.ascontiguousarray(xi, float), lat.L, float(params.sigma),
                                float(params.sigmaM), float(params.sigmaT),
                                _DECODERS[self.algorithm], self.potential == "villain",
                                int(self.cutoff), _BACKWARD[self.backward], self._fc, lat.n_cubes,
                                g.indptr, g.nbr, g.eid)

    def decode(self, err: SpaceTimeError, params: NoiseParams) -> tuple:
        """Homology parities of truth minus correction; ``(0, 0)`` is success."""
        row = self.classify_batch(err.eps[None], err.delta[None], err.xi[None], params)[0]
        if row[0] != OK:
            raise InvariantViolation(_STATUS_TEXT[int(row[0])])
        return int(row[1]), int(row[2])

    def correction(self, syndrome: SpaceTimeSyndrome, params: NoiseParams) -> SpaceTimeError:
        """Corrected candidate error (candidate plus 2 pi on the flipped faces)."""
        self._check(params)
        lat = self.lattice
        g = self._graph
        q_gkp = np.ascontiguousarray(syndrome.q_gkp, float)
        q_tor = np.ascontiguousarray(syndrome.q_tor, float)
        M, ne = q_gkp.shape
        eps_c = np.empty((M, ne))
        tau = np.empty(lat.n_faces)
        flips, ok = _decode_one(q_gkp, q_tor, lat.L, float(params.sigma), float(params.sigmaM),
                                float(params.sigmaT), _DECODERS[self.algorithm],
                                self.potential == "villain", int(self.cutoff),
                                _BACKWARD[self.backward], self._fc,
                                lat.n_cubes, g.indptr, g.nbr, g.eid, eps_c, tau)
        if not ok:
            raise InvariantViolation(_STATUS_TEXT[ODD_FRUSTRATION])
        eps = eps_c + TWO_PI * flips[:lat.n_vertical].reshape(M, ne)
        return SpaceTimeError(eps, np.zeros_like(eps), np.zeros((M, lat.L * lat.L)))


def apply_correction_and_classify(true_eps, corr_eps, L: int) -> tuple:
    """Homology class left in the top slice by ``true - correction`` data shifts.

    Raises
    ------
    InvariantViolation
        If the difference is not a 2 pi multiple on every edge or its parities
        have plaquette defects.
    """
    true_eps = np.asarray(true_eps, float)
    corr_eps = np.asarray(corr_eps, float)
    flips = np.zeros(true_eps.size, np.int8)
    st, px, py = _classify(true_eps, corr_eps, flips, int(L))
    if st != OK:
        raise InvariantViolation(_STATUS_TEXT[st])
    return int(px), int(py)


def frustrated_cubes(tau, lattice: CubicLattice) -> np.ndarray:
    """Indices of cubes with an odd number of negative faces."""
    return _frustrated_cubes(np.asarray(tau, float), lattice.face_cubes(), lattice.n_cubes)


def rpgm_ground_energy(tau, lattice: CubicLattice) -> float:
    """Minimum of ``-sum_p tau_p u_p`` from the frustrated-cube matching.

    Equals ``-sum |tau| + 2 * (weight of the minimum unsatisfied face set)``.
    """
    tau = np.asarray(tau, float)
    g = lattice.cube_graph()
    absw = np.abs(tau)
    defects = frustrated_cubes(tau, lattice)
    if defects.size % 2:
        raise InvariantViolation(_STATUS_TEXT[ODD_FRUSTRATION])
    if defects.size == 0:
        return float(-absw.sum())
    D, preds = defect_distance_table(g.indptr, g.nbr, g.eid, absw, defects)
    mate = min_weight_perfect_matching_dense(D)
    total = sum(D[i, mate[i]] for i in range(defects.size) if i < mate[i])
    return float(-absw.sum() + 2.0 * total)
