"""Toric code built from GKP qubits, decoded with perfect syndromes.

Lattice convention
------------------
An L x L periodic square lattice has vertices ``(x, y)``. Edge ``(0, x, y)``
is the x-edge ``(x, y) -> (x+1, y)`` and edge ``(1, x, y)`` is the y-edge
``(x, y) -> (x, y+1)``; both point along their coordinate axis. The flat
edge index is ``d * L**2 + x * L + y`` and plaquette / vertex ``(x, y)`` has
index ``x * L + y``. Plaquette ``(x, y)`` has corners ``(x, y)`` and
``(x+1, y+1)``; its counter-clockwise circulation is::

    curl f (x, y) = f0(x, y) + f1(x+1, y) - f0(x, y+1) - f1(x, y)

so an x-edge ``(x, y)`` borders plaquettes ``(x, y)`` and ``(x, y-1)`` and a
y-edge ``(x, y)`` borders plaquettes ``(x, y)`` and ``(x-1, y)``.

Homology of a binary dual cycle ``b`` is read off two fixed primal loops:
``parity_x`` counts x-edges on the row ``y = 0`` and ``parity_y`` counts
y-edges on the column ``x = 0``. A dual loop winding in the y direction
(for example all x-edges in one column) has class ``(1, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import TWO_PI, ConfigurationError, NoiseParams, _wrap_scalar, wrap
from .matching import CsrGraph, match_defects_nb

FLIP_CUTOFF = 3


class CycleError(ValueError):
    """Raised when an edge set that should be a dual cycle has defects."""


@dataclass(frozen=True)
class TorusLattice:
    """Incidence tables of the periodic L x L lattice."""

    L: int

    def __post_init__(self):
        if int(self.L) < 2:
            raise ConfigurationError("lattice size must be at least 2")

    @property
    def n_edges(self) -> int:
        return 2 * self.L * self.L

    @property
    def n_plaquettes(self) -> int:
        return self.L * self.L

    @property
    def n_vertices(self) -> int:
        return self.L * self.L

    def edge_index(self, d: int, x: int, y: int) -> int:
        L = self.L
        return d * L * L + (x % L) * L + (y % L)

    def edge_plaquettes(self) -> np.ndarray:
        """(n_edges, 2) array with the two plaquettes bordering each edge."""
        L = self.L
        out = np.empty((self.n_edges, 2), np.int64)
        for x in range(L):
            for y in range(L):
                out[self.edge_index(0, x, y)] = (x * L + y, x * L + (y - 1) % L)
                out[self.edge_index(1, x, y)] = (x * L + y, ((x - 1) % L) * L + y)
        return out

    def edge_vertices(self) -> np.ndarray:
        """(n_edges, 2) array of (tail, head) vertices in the preferred orientation."""
        L = self.L
        out = np.empty((self.n_edges, 2), np.int64)
        for x in range(L):
            for y in range(L):
                v = x * L + y
                out[self.edge_index(0, x, y)] = (v, ((x + 1) % L) * L + y)
                out[self.edge_index(1, x, y)] = (v, x * L + (y + 1) % L)
        return out

    def plaquette_edges(self) -> tuple:
        """Edges of every plaquette and the matching circulation signs."""
        L = self.L
        edges = np.empty((self.n_plaquettes, 4), np.int64)
        signs = np.array([1, 1, -1, -1], np.int64)
        for x in range(L):
            for y in range(L):
                edges[x * L + y] = (self.edge_index(0, x, y), self.edge_index(1, x + 1, y),
                                    self.edge_index(0, x, y + 1), self.edge_index(1, x, y))
        return edges, np.tile(signs, (self.n_plaquettes, 1))

    def vertex_edges(self) -> tuple:
        """Edges at every vertex and the outward signs used by the divergence."""
        L = self.L
        edges = np.empty((self.n_vertices, 4), np.int64)
        # outgoing edges count +, incoming ones -
        signs = np.array([1, 1, -1, -1], np.int64)
        for x in range(L):
            for y in range(L):
                edges[x * L + y] = (self.edge_index(0, x, y), self.edge_index(1, x, y),
                                    self.edge_index(0, x - 1, y), self.edge_index(1, x, y - 1))
        return edges, np.tile(signs, (self.n_vertices, 1))

    def dual_graph(self) -> CsrGraph:
        """Plaquette adjacency; arc ids are edge indices."""
        ep = self.edge_plaquettes()
        return CsrGraph.from_edges(self.n_plaquettes, ep[:, 0], ep[:, 1])

    def curl(self, f) -> np.ndarray:
        """Circulation of an edge field (flat length ``n_edges``) per plaquette."""
        f = np.asarray(f, dtype=float)
        return _curl_flat(f, self.L)

    def divergence(self, f) -> np.ndarray:
        """Sum of outgoing edge values at every vertex."""
        f = np.asarray(f, dtype=float).reshape(2, self.L, self.L)
        return (f[0] + f[1] - np.roll(f[0], 1, axis=0) - np.roll(f[1], 1, axis=1)).reshape(-1)


@njit(cache=True)
def _curl_flat(f, L):
    out = np.empty(L * L)
    LL = L * L
    for x in range(L):
        xp = (x + 1) % L
        for y in range(L):
            yp = (y + 1) % L
            out[x * L + y] = (f[x * L + y] + f[LL + xp * L + y]
                              - f[x * L + yp] - f[LL + x * L + y])
    return out


@njit(cache=True)
def _defects_flat(b, L):
    # plaquettes with odd binary circulation
    out = np.zeros(L * L, np.int8)
    LL = L * L
    for x in range(L):
        xp = (x + 1) % L
        for y in range(L):
            yp = (y + 1) % L
            s = b[x * L + y] + b[LL + xp * L + y] + b[x * L + yp] + b[LL + x * L + y]
            out[x * L + y] = s & 1
    return out


@njit(cache=True)
def _homology_flat(b, L):
    px = 0
    py = 0
    LL = L * L
    for x in range(L):
        px += b[x * L + 0]
    for y in range(L):
        py += b[LL + 0 * L + y]
    return px & 1, py & 1


def plaquette_defects(b, L: int) -> np.ndarray:
    """0/1 plaquette syndrome of a binary edge set."""
    return _defects_flat(np.asarray(b, np.int64) & 1, int(L))


def homology_class(b, lattice: TorusLattice) -> tuple:
    """Homology parities ``(parity_x, parity_y)`` of a binary dual cycle.

    Raises
    ------
    CycleError
        If ``b`` has plaquette defects.
    """
    b = np.asarray(b, np.int64) & 1
    if b.shape != (lattice.n_edges,):
        raise ValueError("edge vector has the wrong length")
    if np.any(_defects_flat(b, lattice.L)):
        raise CycleError("edge set is not a dual cycle")
    px, py = _homology_flat(b, lattice.L)
    return int(px), int(py)


# ---------------------------------------------------------------- conditional probabilities

@njit(cache=True)
def _log_sum_branches(q, sigma, start, step, cutoff):
    # ln sum_k exp(-(q + start + step k)^2 / 2 sigma^2) for |k| <= cutoff
    inv = 1.0 / (2.0 * sigma * sigma)
    lead = -1e300
    for k in range(-cutoff, cutoff + 1):
        y = q + start + step * k
        a = -y * y * inv
        if a > lead:
            lead = a
    s = 0.0
    for k in range(-cutoff, cutoff + 1):
        y = q + start + step * k
        s += math.exp(-y * y * inv - lead)
    return lead + math.log(s)


@njit(cache=True)
def _flip_log_odds(q, sigma, cutoff):
    # ln(even / odd) with the Gaussian normalization cancelling
    even = _log_sum_branches(q, sigma, 0.0, 2.0 * TWO_PI, cutoff)
    odd = _log_sum_branches(q, sigma, -TWO_PI, 2.0 * TWO_PI, cutoff)
    return even - odd


@njit(cache=True)
def conditional_flip_probability_nb(q, sigma, cutoff):
    allb = _log_sum_branches(q, sigma, 0.0, TWO_PI, cutoff)
    odd = _log_sum_branches(q, sigma, -TWO_PI, 2.0 * TWO_PI, cutoff)
    return math.exp(odd - allb)


def conditional_flip_probability(q: float, sigma: float, cutoff: int = FLIP_CUTOFF) -> float:
    """Probability that the nearest-branch correction of syndrome ``q`` leaves an X flip.

    Both sums run over ``|k| <= cutoff`` and are evaluated in log space.
    """
    if int(cutoff) < 1:
        raise ConfigurationError("cutoff must be at least 1")
    if not sigma > 0:
        raise ConfigurationError("sigma must be positive")
    return conditional_flip_probability_nb(float(q), float(sigma), int(cutoff))


def edge_weight(q: float, sigma: float, cutoff: int = FLIP_CUTOFF) -> float:
    """Matching weight ``ln((1 - P) / P)`` of an edge with GKP syndrome ``q``."""
    if int(cutoff) < 1:
        raise ConfigurationError("cutoff must be at least 1")
    return float(_flip_log_odds(float(q), float(sigma), int(cutoff)))


# ---------------------------------------------------------------- sampling and decoding

@dataclass(frozen=True)
class ChannelSample:
    """One channel-model draw on the torus (flat edge order)."""

    eps: np.ndarray
    q: np.ndarray
    b: np.ndarray


def sample_channel(rng: np.random.Generator, params: NoiseParams, lattice: TorusLattice) -> ChannelSample:
    eps = rng.normal(0.0, params.sigma, lattice.n_edges) if params.sigma > 0 else np.zeros(lattice.n_edges)
    q, k = wrap(eps, TWO_PI)
    return ChannelSample(eps, q, (k & 1).astype(np.int8))


@njit(cache=True)
def _decode_one(q, b, sigma, cutoff, use_info, L, indptr, nbr, eid, w):
    ne = 2 * L * L
    for e in range(ne):
        if use_info:
            w[e] = _flip_log_odds(q[e], sigma, cutoff)
            # odds are never below 1 for |q| <= pi; clamp round-off
            if w[e] < 0.0:
                w[e] = 0.0
        else:
            w[e] = 1.0
    d = _defects_flat(b, L)
    nd = 0
    for h in range(L * L):
        nd += d[h]
    defects = np.empty(nd, np.int64)
    j = 0
    for h in range(L * L):
        if d[h]:
            defects[j] = h
            j += 1
    corr = match_defects_nb(indptr, nbr, eid, w, defects, ne)
    resid = np.empty(ne, np.int64)
    for e in range(ne):
        resid[e] = (b[e] + corr[e]) & 1
    return resid


@njit(cache=True)
def channel_batch(eps, sigma, cutoff, use_info, L, indptr, nbr, eid):
    """Homology class of the residual for every row of ``eps`` (shape (n, 2L^2)).

    Returns an (n, 2) array; -1 rows flag a residual that is not a cycle.
    """
    n = eps.shape[0]
    ne = 2 * L * L
    out = np.empty((n, 2), np.int64)
    q = np.empty(ne)
    b = np.empty(ne, np.int64)
    w = np.empty(ne)
    for i in range(n):
        for e in range(ne):
            r, k = _wrap_scalar(eps[i, e], TWO_PI)
            q[e] = r
            b[e] = k & 1
        resid = _decode_one(q, b, sigma, cutoff, use_info, L, indptr, nbr, eid, w)
        bad = False
        dd = _defects_flat(resid, L)
        for h in range(L * L):
            if dd[h]:
                bad = True
        if bad:
            out[i, 0] = -1
            out[i, 1] = -1
        else:
            px, py = _homology_flat(resid, L)
            out[i, 0] = px
            out[i, 1] = py
    return out


def decode_channel(sample: ChannelSample, lattice: TorusLattice, params: NoiseParams,
                   use_gkp_info: bool = True, cutoff: int = FLIP_CUTOFF) -> tuple:
    """Match plaquette defects and return the homology class of the residual.

    Success means ``(0, 0)``.
    """
    g = lattice.dual_graph()
    w = np.empty(lattice.n_edges)
    resid = _decode_one(np.asarray(sample.q, float), np.asarray(sample.b, np.int64),
                        float(params.sigma), int(cutoff), bool(use_gkp_info), lattice.L,
                        g.indptr, g.nbr, g.eid, w)
    return homology_class(resid, lattice)


def channel_failures(rng: np.random.Generator, params: NoiseParams, L: int, n: int,
                     use_gkp_info: bool = True, cutoff: int = FLIP_CUTOFF) -> int:
    """Number of logical failures in ``n`` channel-model trials."""
    lat = TorusLattice(L)
    g = lat.dual_graph()
    eps = rng.normal(0.0, params.sigma, (n, lat.n_edges))
    cls = channel_batch(eps, float(params.sigma), int(cutoff), bool(use_gkp_info), int(L),
                        g.indptr, g.nbr, g.eid)
    if np.any(cls < 0):
        raise CycleError("decoder left plaquette defects")
    return int(np.count_nonzero(cls.sum(axis=1)))
