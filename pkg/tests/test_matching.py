import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from gkpdec.matching import (
    CsrGraph,
    MatchingError,
    WeightedGraph,
    all_pairs_defect_distances,
    brute_force_min_matching,
    match_defects_nb,
    min_weight_perfect_matching,
    min_weight_perfect_matching_dense,
)
from gkpdec.toric_channel import TorusLattice


def bellman_ford(n, edges, weights, source):
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    for _ in range(n - 1):
        changed = False
        for k, (u, v) in enumerate(edges):
            w = weights[k]
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
            if dist[v] + w < dist[u]:
                dist[u] = dist[v] + w
                changed = True
        if not changed:
            break
    return dist


def greedy_pairing_weight(W):
    rest = list(range(W.shape[0]))
    total = 0.0
    while rest:
        a = rest.pop(0)
        b = min(rest, key=lambda j: W[a, j])
        rest.remove(b)
        total += W[a, b]
    return total


def random_complete(rng, n, integer=False):
    W = rng.integers(0, 5, (n, n)).astype(float) if integer else rng.uniform(0, 10, (n, n))
    W = np.triu(W, 1)
    return W + W.T


def torus_edges(L):
    lat = TorusLattice(L)
    return lat, lat.edge_plaquettes()


class TestMatching:
    def test_two_nodes(self):
        m = min_weight_perfect_matching(WeightedGraph(2, ((0, 1, 3.5),)))
        assert m.pairs == ((0, 1),) and m.weight == 3.5

    def test_empty(self):
        m = min_weight_perfect_matching(WeightedGraph(0, ()))
        assert m.pairs == () and m.weight == 0.0

    def test_odd_rejected(self):
        with pytest.raises(MatchingError):
            min_weight_perfect_matching(WeightedGraph(3, ((0, 1, 1.0), (1, 2, 1.0))))

    def test_no_perfect_matching(self):
        star = WeightedGraph(4, ((0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)))
        with pytest.raises(MatchingError):
            min_weight_perfect_matching(star)

    def test_invalid_edges(self):
        with pytest.raises(MatchingError):
            WeightedGraph(2, ((0, 0, 1.0),))
        with pytest.raises(MatchingError):
            WeightedGraph(2, ((0, 1, -1.0),))

    @pytest.mark.parametrize("n", [4, 6, 8, 10])
    def test_brute_force(self, n, rng):
        for integer in (False, True):
            for _ in range(30):
                W = random_complete(rng, n, integer)
                m = min_weight_perfect_matching(WeightedGraph.complete(W))
                assert m.weight == pytest.approx(brute_force_min_matching(W), abs=1e-9)

    def test_against_networkx_sparse(self, rng):
        checked = 0
        while checked < 40:
            n = 2 * int(rng.integers(5, 30))
            G = nx.gnp_random_graph(n, 0.3, seed=int(rng.integers(1 << 30)))
            for u, v in G.edges:
                G[u][v]["weight"] = float(rng.integers(1, 20))
            ref = nx.max_weight_matching(G, maxcardinality=True)
            if 2 * len(ref) != n:
                continue
            want = sum(G[u][v]["weight"] for u, v in nx.min_weight_matching(G))
            edges = tuple((u, v, G[u][v]["weight"]) for u, v in G.edges)
            got = min_weight_perfect_matching(WeightedGraph(n, edges))
            assert got.weight == pytest.approx(want)
            checked += 1

    def test_pairs_partition_nodes(self, rng):
        W = random_complete(rng, 12)
        m = min_weight_perfect_matching(WeightedGraph.complete(W))
        nodes = sorted(itertools.chain.from_iterable(m.pairs))
        assert nodes == list(range(12))
        assert m.weight == pytest.approx(sum(W[u, v] for u, v in m.pairs))
        assert list(m.pairs) == sorted(m.pairs)

    @given(st.integers(1, 6), st.randoms(use_true_random=False), st.integers(0, 2**31))
    def test_relabel_invariance_and_greedy_bound(self, half, pyrng, seed):
        n = 2 * half
        W = random_complete(np.random.default_rng(seed), n)
        perm = list(range(n))
        pyrng.shuffle(perm)
        Wp = W[np.ix_(perm, perm)]
        a = min_weight_perfect_matching(WeightedGraph.complete(W)).weight
        b = min_weight_perfect_matching(WeightedGraph.complete(Wp)).weight
        assert a == pytest.approx(b)
        assert a <= greedy_pairing_weight(W) + 1e-9

    def test_dense_kernel_matches_brute_force(self, rng):
        for _ in range(50):
            W = random_complete(rng, 6)
            mate = min_weight_perfect_matching_dense(W)
            total = sum(W[i, mate[i]] for i in range(6) if mate[i] > i)
            assert total == pytest.approx(brute_force_min_matching(W))

    def test_deterministic(self, rng):
        W = random_complete(rng, 10, integer=True)
        a = min_weight_perfect_matching(WeightedGraph.complete(W))
        b = min_weight_perfect_matching(WeightedGraph.complete(W))
        assert a == b


class TestShortestPaths:
    def test_single_edge(self):
        g = CsrGraph.from_edges(2, [0], [1])
        dd = all_pairs_defect_distances(g, [0, 1], [3.0])
        assert dd.dist[0, 1] == 3.0
        assert list(dd.path(0, 1)) == [0]

    def test_uniform_torus_lee_metric(self, rng):
        L = 5
        lat, ep = torus_edges(L)
        g = lat.dual_graph()
        defects = rng.choice(L * L, 6, replace=False)
        dd = all_pairs_defect_distances(g, defects, np.full(lat.n_edges, 2.0))
        for i, a in enumerate(defects):
            for j, b in enumerate(defects):
                dx = abs(a // L - b // L)
                dy = abs(a % L - b % L)
                lee = min(dx, L - dx) + min(dy, L - dy)
                assert dd.dist[i, j] == 2.0 * lee

    def test_bellman_ford_oracle(self, rng):
        L = 5
        lat, ep = torus_edges(L)
        g = lat.dual_graph()
        for _ in range(20):
            w = rng.uniform(0, 5, lat.n_edges)
            defects = np.arange(L * L)
            dd = all_pairs_defect_distances(g, defects, w)
            for s in rng.choice(L * L, 4, replace=False):
                ref = bellman_ford(L * L, ep, w, s)
                np.testing.assert_allclose(dd.dist[s], ref, rtol=1e-12)
                for t in rng.choice(L * L, 3, replace=False):
                    path = dd.path(s, t)
                    assert w[path].sum() == pytest.approx(dd.dist[s, t])
                    # the path's endpoints are exactly s and t
                    deg = np.zeros(L * L, int)
                    for e in path:
                        deg[ep[e, 0]] ^= 1
                        deg[ep[e, 1]] ^= 1
                    assert set(np.flatnonzero(deg)) == ({s, t} if s != t else set())

    def test_triangle_inequality(self, rng):
        lat, _ = torus_edges(4)
        dd = all_pairs_defect_distances(lat.dual_graph(), np.arange(16), rng.uniform(0, 3, lat.n_edges))
        D = dd.dist
        assert np.all(D[:, :, None] <= D[:, None, :] + D.T[None, :, :] + 1e-12)

    def test_disconnected(self):
        g = CsrGraph.from_edges(4, [0, 2], [1, 3])
        dd = all_pairs_defect_distances(g, [0, 2], [1.0, 1.0])
        assert np.isinf(dd.dist[0, 1])
        with pytest.raises(MatchingError):
            dd.path(0, 1)

    def test_negative_weight_rejected(self):
        g = CsrGraph.from_edges(2, [0], [1])
        with pytest.raises(MatchingError):
            all_pairs_defect_distances(g, [0, 1], [-1.0])

    def test_matched_flips_clear_defects(self, rng):
        L = 6
        lat, ep = torus_edges(L)
        g = lat.dual_graph()
        for _ in range(20):
            defects = np.sort(rng.choice(L * L, 2 * int(rng.integers(1, 6)), replace=False))
            w = rng.uniform(0.1, 2, lat.n_edges)
            flips = match_defects_nb(g.indptr, g.nbr, g.eid, w, defects.astype(np.int64), lat.n_edges)
            par = np.zeros(L * L, int)
            for e in np.flatnonzero(flips):
                par[ep[e, 0]] ^= 1
                par[ep[e, 1]] ^= 1
            assert np.array_equal(np.flatnonzero(par), defects)
