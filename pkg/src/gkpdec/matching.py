"""Minimum-weight perfect matching and shortest paths on weighted graphs.

The matching routine is a compiled, array-based version of the classic
O(n^3) primal-dual blossom algorithm for maximum-weight matching; minimum
perfect matchings are obtained by maximizing ``C - w`` at maximum
cardinality. Dijkstra runs on compressed adjacency lists and keeps the
predecessor edge of every node so matched paths can be recovered.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit


class MatchingError(ValueError):
    """Raised when no perfect matching exists or the input is malformed."""


# ---------------------------------------------------------------- blossom kernel
#
# Vertices are 0..n-1, blossoms n..2n-1. Edge k joins endpoint[2k] and
# endpoint[2k+1]; "p" below always denotes an endpoint index. Labels: 0 free,
# 1 outer (S), 2 inner (T); bit 4 marks blossoms visited by _scan_blossom.
# Variable-length per-blossom lists live in fixed rows with a length array.

@njit(cache=True)
def _slack(k, ends, wt, dual):
    return dual[ends[2 * k]] + dual[ends[2 * k + 1]] - 2.0 * wt[k]


@njit(cache=True)
def _leaves(b, nv, childs, nchild, out):
    # fill out with the vertices inside blossom b; returns the count
    cnt = 0
    stack = np.empty(2 * nv, np.int64)
    sp = 0
    stack[sp] = b
    sp += 1
    while sp > 0:
        sp -= 1
        x = stack[sp]
        if x < nv:
            out[cnt] = x
            cnt += 1
        else:
            for i in range(nchild[x] - 1, -1, -1):
                stack[sp] = childs[x, i]
                sp += 1
    return cnt


@njit(cache=True)
def _assign_label(w, t, p, st):
    (nv, ends, mate, label, labelend, inblossom, blossombase, bestedge,
     childs, nchild, queue, qlen, tmp) = st
    while True:
        b = inblossom[w]
        label[w] = t
        label[b] = t
        labelend[w] = p
        labelend[b] = p
        bestedge[w] = -1
        bestedge[b] = -1
        if t == 1:
            cnt = _leaves(b, nv, childs, nchild, tmp)
            for i in range(cnt):
                queue[qlen[0]] = tmp[i]
                qlen[0] += 1
            return
        base = blossombase[b]
        mb = mate[base]
        w = ends[mb]
        t = 1
        p = mb ^ 1


@njit(cache=True)
def _scan_blossom(v, w, nv, ends, mate, label, labelend, inblossom, blossombase, path):
    plen = 0
    base = -1
    while v != -1 or w != -1:
        b = inblossom[v]
        if label[b] & 4:
            base = blossombase[b]
            break
        path[plen] = b
        plen += 1
        label[b] = 5
        if labelend[b] == -1:
            v = -1
        else:
            v = ends[labelend[b]]
            b = inblossom[v]
            v = ends[labelend[b]]
        if w != -1:
            v, w = w, v
    for i in range(plen):
        label[path[i]] = 1
    return base


@njit(cache=True)
def _maxweight_matching(nv, ends, wt, neigh, nneigh, maxcard):
    ne = wt.shape[0]
    nb = 2 * nv
    maxw = 0.0
    for k in range(ne):
        if wt[k] > maxw:
            maxw = wt[k]
    mate = -np.ones(nv, np.int64)
    label = np.zeros(nb, np.int64)
    labelend = -np.ones(nb, np.int64)
    inblossom = np.arange(nv)
    blossomparent = -np.ones(nb, np.int64)
    childs = np.zeros((nb, nv + 1), np.int64)
    endps = np.zeros((nb, nv + 1), np.int64)
    nchild = np.zeros(nb, np.int64)
    blossombase = -np.ones(nb, np.int64)
    blossombase[:nv] = np.arange(nv)
    bestedge = -np.ones(nb, np.int64)
    bbest = np.zeros((nb, nb), np.int64)
    nbbest = -np.ones(nb, np.int64)  # -1 means "no list"
    unused = np.arange(nv, nb)[::-1].copy()
    nunused = nv
    dual = np.zeros(nb)
    dual[:nv] = maxw
    allow = np.zeros(ne, np.bool_)
    queue = np.empty(nv * nv + 4 * nv + 16, np.int64)
    qlen = np.zeros(1, np.int64)
    tmp = np.empty(nv, np.int64)
    tmp2 = np.empty(nv, np.int64)
    pathbuf = np.empty(nb, np.int64)
    bestto = -np.ones(nb, np.int64)
    st = (nv, ends, mate, label, labelend, inblossom, blossombase, bestedge,
          childs, nchild, queue, qlen, tmp)

    for _stage in range(nv):
        label[:] = 0
        bestedge[:] = -1
        nbbest[nv:] = -1
        allow[:] = False
        qlen[0] = 0
        for v in range(nv):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                _assign_label(v, 1, -1, st)
        augmented = False
        while True:
            while qlen[0] > 0 and not augmented:
                qlen[0] -= 1
                v = queue[qlen[0]]
                for ii in range(nneigh[v]):
                    p = neigh[v, ii]
                    k = p // 2
                    w = ends[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0.0
                    if not allow[k]:
                        kslack = _slack(k, ends, wt, dual)
                        if kslack <= 0.0:
                            allow[k] = True
                    if allow[k]:
                        if label[inblossom[w]] == 0:
                            _assign_label(w, 2, p ^ 1, st)
                        elif label[inblossom[w]] == 1:
                            base = _scan_blossom(v, w, nv, ends, mate, label, labelend,
                                                 inblossom, blossombase, pathbuf)
                            if base >= 0:
                                nunused = _add_blossom(base, k, st, blossomparent, endps,
                                                       dual, bbest, nbbest, neigh, nneigh,
                                                       wt, unused, nunused, tmp2, bestto)
                            else:
                                _augment_matching(k, st, blossomparent, endps)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < _slack(bestedge[b], ends, wt, dual):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < _slack(bestedge[w], ends, wt, dual):
                            bestedge[w] = k
            if augmented:
                break
            deltatype = -1
            delta = 0.0
            deltaedge = -1
            deltablossom = -1
            if not maxcard:
                deltatype = 1
                delta = dual[:nv].min()
            for v in range(nv):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = _slack(bestedge[v], ends, wt, dual)
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(nb):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    d = 0.5 * _slack(bestedge[b], ends, wt, dual)
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(nv, nb):
                if (blossombase[b] >= 0 and blossomparent[b] == -1 and label[b] == 2
                        and (deltatype == -1 or dual[b] < delta)):
                    delta = dual[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                delta = max(0.0, dual[:nv].min())
            for v in range(nv):
                lb = label[inblossom[v]]
                if lb == 1:
                    dual[v] -= delta
                elif lb == 2:
                    dual[v] += delta
            for b in range(nv, nb):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dual[b] += delta
                    elif label[b] == 2:
                        dual[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                allow[deltaedge] = True
                i = ends[2 * deltaedge]
                j = ends[2 * deltaedge + 1]
                if label[inblossom[i]] == 0:
                    i, j = j, i
                queue[qlen[0]] = i
                qlen[0] += 1
            elif deltatype == 3:
                allow[deltaedge] = True
                i = ends[2 * deltaedge]
                queue[qlen[0]] = i
                qlen[0] += 1
            else:
                nunused = _expand_blossom(deltablossom, False, st, blossomparent, endps,
                                          dual, bbest, nbbest, allow, unused, nunused)
        if not augmented:
            break
        for b in range(nv, nb):
            if (blossomparent[b] == -1 and blossombase[b] >= 0 and label[b] == 1
                    and dual[b] == 0.0):
                nunused = _expand_blossom(b, True, st, blossomparent, endps, dual,
                                          bbest, nbbest, allow, unused, nunused)
    out = -np.ones(nv, np.int64)
    for v in range(nv):
        if mate[v] >= 0:
            out[v] = ends[mate[v]]
    return out


@njit(cache=True)
def _add_blossom(base, k, st, blossomparent, endps, dual, bbest, nbbest, neigh, nneigh,
                 wt, unused, nunused, tmp, bestto):
    (nv, ends, mate, label, labelend, inblossom, blossombase, bestedge,
     childs, nchild, queue, qlen, _tmp) = st
    v = ends[2 * k]
    w = ends[2 * k + 1]
    bb = inblossom[base]
    bv = inblossom[v]
    bw = inblossom[w]
    nunused -= 1
    b = unused[nunused]
    blossombase[b] = base
    blossomparent[b] = -1
    blossomparent[bb] = b
    n = 0
    while bv != bb:
        blossomparent[bv] = b
        childs[b, n] = bv
        endps[b, n] = labelend[bv]
        n += 1
        v = ends[labelend[bv]]
        bv = inblossom[v]
    childs[b, n] = bb
    n += 1
    # reverse the child list and the first n-1 endpoints
    for i in range(n // 2):
        childs[b, i], childs[b, n - 1 - i] = childs[b, n - 1 - i], childs[b, i]
    m = n - 1
    for i in range(m // 2):
        endps[b, i], endps[b, m - 1 - i] = endps[b, m - 1 - i], endps[b, i]
    endps[b, m] = 2 * k
    m += 1
    while bw != bb:
        blossomparent[bw] = b
        childs[b, n] = bw
        n += 1
        endps[b, m] = labelend[bw] ^ 1
        m += 1
        w = ends[labelend[bw]]
        bw = inblossom[w]
    nchild[b] = n
    label[b] = 1
    labelend[b] = labelend[bb]
    dual[b] = 0.0
    cnt = _leaves(b, nv, childs, nchild, tmp)
    for i in range(cnt):
        x = tmp[i]
        if label[inblossom[x]] == 2:
            queue[qlen[0]] = x
            qlen[0] += 1
        inblossom[x] = b
    nb = 2 * nv
    bestto[:] = -1
    for ci in range(n):
        bvv = childs[b, ci]
        if nbbest[bvv] < 0:
            cnt = _leaves(bvv, nv, childs, nchild, tmp)
            for li in range(cnt):
                x = tmp[li]
                for ii in range(nneigh[x]):
                    kk = neigh[x, ii] // 2
                    i = ends[2 * kk]
                    j = ends[2 * kk + 1]
                    if inblossom[j] == b:
                        i, j = j, i
                    bj = inblossom[j]
                    if (bj != b and label[bj] == 1 and
                            (bestto[bj] == -1 or
                             _slack(kk, ends, wt, dual) < _slack(bestto[bj], ends, wt, dual))):
                        bestto[bj] = kk
        else:
            for li in range(nbbest[bvv]):
                kk = bbest[bvv, li]
                i = ends[2 * kk]
                j = ends[2 * kk + 1]
                if inblossom[j] == b:
                    i, j = j, i
                bj = inblossom[j]
                if (bj != b and label[bj] == 1 and
                        (bestto[bj] == -1 or
                         _slack(kk, ends, wt, dual) < _slack(bestto[bj], ends, wt, dual))):
                    bestto[bj] = kk
        nbbest[bvv] = -1
        bestedge[bvv] = -1
    cnt = 0
    for x in range(nb):
        if bestto[x] != -1:
            bbest[b, cnt] = bestto[x]
            cnt += 1
    nbbest[b] = cnt
    bestedge[b] = -1
    for li in range(cnt):
        kk = bbest[b, li]
        if bestedge[b] == -1 or _slack(kk, ends, wt, dual) < _slack(bestedge[b], ends, wt, dual):
            bestedge[b] = kk
    return nunused


@njit(cache=True)
def _expand_blossom(b0, endstage, st, blossomparent, endps, dual, bbest, nbbest, allow,
                    unused, nunused):
    (nv, ends, mate, label, labelend, inblossom, blossombase, bestedge,
     childs, nchild, queue, qlen, tmp) = st
    # blossoms are released through an explicit stack (end-of-stage
    # expansion recurses into zero-dual sub-blossoms)
    stack = np.empty(2 * nv, np.int64)
    sp = 0
    stack[sp] = b0
    sp += 1
    while sp > 0:
        sp -= 1
        b = stack[sp]
        n = nchild[b]
        for ci in range(n):
            s = childs[b, ci]
            blossomparent[s] = -1
            if s < nv:
                inblossom[s] = s
            elif endstage and dual[s] == 0.0:
                stack[sp] = s
                sp += 1
            else:
                cnt = _leaves(s, nv, childs, nchild, tmp)
                for li in range(cnt):
                    inblossom[tmp[li]] = s
        if (not endstage) and label[b] == 2:
            entrychild = inblossom[ends[labelend[b] ^ 1]]
            j = 0
            for ci in range(n):
                if childs[b, ci] == entrychild:
                    j = ci
                    break
            if j & 1:
                j -= n
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = labelend[b]
            while j != 0:
                label[ends[p ^ 1]] = 0
                label[ends[endps[b, (j - endptrick) % n] ^ endptrick ^ 1]] = 0
                _assign_label(ends[p ^ 1], 2, p, st)
                allow[endps[b, (j - endptrick) % n] // 2] = True
                j += jstep
                p = endps[b, (j - endptrick) % n] ^ endptrick
                allow[p // 2] = True
                j += jstep
            bv = childs[b, j % n]
            label[ends[p ^ 1]] = 2
            label[bv] = 2
            labelend[ends[p ^ 1]] = p
            labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while childs[b, j % n] != entrychild:
                bv = childs[b, j % n]
                if label[bv] == 1:
                    j += jstep
                    continue
                cnt = _leaves(bv, nv, childs, nchild, tmp)
                found = -1
                for li in range(cnt):
                    if label[tmp[li]] != 0:
                        found = tmp[li]
                        break
                if found >= 0:
                    label[found] = 0
                    label[ends[mate[blossombase[bv]]]] = 0
                    _assign_label(found, 2, labelend[found], st)
                j += jstep
        label[b] = -1
        labelend[b] = -1
        nchild[b] = 0
        blossombase[b] = -1
        nbbest[b] = -1
        bestedge[b] = -1
        unused[nunused] = b
        nunused += 1
    return nunused


@njit(cache=True)
def _augment_blossom(b0, v0, st, blossomparent, endps):
    (nv, ends, mate, label, labelend, inblossom, blossombase, bestedge,
     childs, nchild, queue, qlen, tmp) = st
    # iterative form of the recursive augmentation: a work stack of
    # (blossom, vertex) requests processed depth-first in the original order
    sb = np.empty(4 * nv + 4, np.int64)
    sv = np.empty(4 * nv + 4, np.int64)
    sphase = np.empty(4 * nv + 4, np.int64)
    sj = np.empty(4 * nv + 4, np.int64)
    si = np.empty(4 * nv + 4, np.int64)
    sp = 0
    sb[0] = b0
    sv[0] = v0
    sphase[0] = 0
    sp = 1
    rot = np.empty(nv + 1, np.int64)
    while sp > 0:
        top = sp - 1
        b = sb[top]
        v = sv[top]
        ph = sphase[top]
        n = nchild[b]
        if ph == 0:
            t = v
            while blossomparent[t] != b:
                t = blossomparent[t]
            i = 0
            for ci in range(n):
                if childs[b, ci] == t:
                    i = ci
                    break
            si[top] = i
            sj[top] = i
            sphase[top] = 1
            if t >= nv:
                sb[sp] = t
                sv[sp] = v
                sphase[sp] = 0
                sp += 1
            continue
        i = si[top]
        j = sj[top]
        if i & 1:
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        if ph == 1:
            # first entry into the walk: normalize j as the original code does
            if i & 1:
                j = i - n
            else:
                j = i
            sj[top] = j
            sphase[top] = 2
            ph = 2
        if ph == 2:
            if j == 0:
                sphase[top] = 5
                continue
            j += jstep
            t = childs[b, j % n]
            p = endps[b, (j - endptrick) % n] ^ endptrick
            sj[top] = j
            sphase[top] = 3
            if t >= nv:
                sb[sp] = t
                sv[sp] = ends[p]
                sphase[sp] = 0
                sp += 1
            continue
        if ph == 3:
            p = endps[b, (j - endptrick) % n] ^ endptrick
            j += jstep
            t = childs[b, j % n]
            sj[top] = j
            sphase[top] = 4
            if t >= nv:
                sb[sp] = t
                sv[sp] = ends[p ^ 1]
                sphase[sp] = 0
                sp += 1
            continue
        if ph == 4:
            # j now points past the pair; recover the endpoint of the pair
            p = endps[b, (j - jstep - endptrick) % n] ^ endptrick
            mate[ends[p]] = p ^ 1
            mate[ends[p ^ 1]] = p
            sphase[top] = 2
            continue
        # ph == 5: rotate the child list so the entry child comes first
        for ci in range(n):
            rot[ci] = childs[b, (i + ci) % n]
        for ci in range(n):
            childs[b, ci] = rot[ci]
        for ci in range(n):
            rot[ci] = endps[b, (i + ci) % n]
        for ci in range(n):
            endps[b, ci] = rot[ci]
        blossombase[b] = blossombase[childs[b, 0]]
        sp -= 1


@njit(cache=True)
def _augment_matching(k, st, blossomparent, endps):
    (nv, ends, mate, label, labelend, inblossom, blossombase, bestedge,
     childs, nchild, queue, qlen, tmp) = st
    for side in range(2):
        if side == 0:
            s = ends[2 * k]
            p = 2 * k + 1
        else:
            s = ends[2 * k + 1]
            p = 2 * k
        while True:
            bs = inblossom[s]
            if bs >= nv:
                _augment_blossom(bs, s, st, blossomparent, endps)
            mate[s] = p
            if labelend[bs] == -1:
                break
            t = ends[labelend[bs]]
            bt = inblossom[t]
            s = ends[labelend[bt]]
            j = ends[labelend[bt] ^ 1]
            if bt >= nv:
                _augment_blossom(bt, j, st, blossomparent, endps)
            mate[j] = labelend[bt]
            p = labelend[bt] ^ 1


@njit(cache=True)
def _complete_graph_arrays(n):
    ne = n * (n - 1) // 2
    ends = np.empty(2 * ne, np.int64)
    neigh = np.empty((n, max(n - 1, 1)), np.int64)
    nneigh = np.zeros(n, np.int64)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            ends[2 * k] = i
            ends[2 * k + 1] = j
            neigh[i, nneigh[i]] = 2 * k + 1
            nneigh[i] += 1
            neigh[j, nneigh[j]] = 2 * k
            nneigh[j] += 1
            k += 1
    return ends, neigh, nneigh


@njit(cache=True)
def min_weight_perfect_matching_dense(W):
    """Mate array of a minimum-weight perfect matching of the complete graph ``W``.

    ``W`` is a symmetric (n, n) array of finite non-negative weights, ``n`` even.
    """
    n = W.shape[0]
    if n == 0:
        return np.empty(0, np.int64)
    ends, neigh, nneigh = _complete_graph_arrays(n)
    ne = n * (n - 1) // 2
    top = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if W[i, j] > top:
                top = W[i, j]
    wt = np.empty(ne)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            wt[k] = top + 1.0 - W[i, j]
            k += 1
    return _maxweight_matching(n, ends, wt, neigh, nneigh, True)


@njit(cache=True)
def max_weight_matching_edges(nv, ends, wt, maxcard):
    """Maximum-weight matching on an explicit edge list (endpoint pairs in ``ends``)."""
    ne = wt.shape[0]
    deg = np.zeros(nv, np.int64)
    for k in range(ne):
        deg[ends[2 * k]] += 1
        deg[ends[2 * k + 1]] += 1
    neigh = np.empty((nv, max(deg.max() if nv > 0 else 1, 1)), np.int64)
    nneigh = np.zeros(nv, np.int64)
    for k in range(ne):
        i = ends[2 * k]
        j = ends[2 * k + 1]
        neigh[i, nneigh[i]] = 2 * k + 1
        nneigh[i] += 1
        neigh[j, nneigh[j]] = 2 * k
        nneigh[j] += 1
    return _maxweight_matching(nv, ends, wt, neigh, nneigh, maxcard)


# ---------------------------------------------------------------- public matching API

@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph with non-negative edge weights.

    Parameters
    ----------
    n : int
        Number of nodes.
    edges : tuple of (u, v, weight)
    """

    n: int
    edges: tuple

    def __post_init__(self):
        for u, v, w in self.edges:
            if u == v:
                raise MatchingError("self-loops are not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise MatchingError("edge endpoint out of range")
            if not w >= 0:
                raise MatchingError("edge weights must be non-negative")

    @classmethod
    def complete(cls, W) -> "WeightedGraph":
        W = np.asarray(W, dtype=float)
        n = W.shape[0]
        return cls(n, tuple((i, j, float(W[i, j])) for i in range(n) for j in range(i + 1, n)))


@dataclass(frozen=True)
class Matching:
    """Set of matched pairs ``(u, v)`` with ``u < v``, sorted, and their total weight."""

    pairs: tuple
    weight: float


def min_weight_perfect_matching(g: WeightedGraph) -> Matching:
    """Perfect matching of globally minimum total weight.

    Raises
    ------
    MatchingError
        If ``n`` is odd or the graph has no perfect matching.
    """
    n = g.n
    if n % 2:
        raise MatchingError("perfect matching needs an even number of nodes")
    if n == 0:
        return Matching((), 0.0)
    m = len(g.edges)
    if m == 0:
        raise MatchingError("graph has no perfect matching")
    ends = np.empty(2 * m, np.int64)
    wt = np.empty(m)
    top = max(w for _, _, w in g.edges)
    lookup = {}
    for k, (u, v, w) in enumerate(g.edges):
        ends[2 * k] = u
        ends[2 * k + 1] = v
        # shift so every edge is worth taking; max cardinality then forces perfection
        wt[k] = top + 1.0 - w
        key = (min(u, v), max(u, v))
        if key in lookup and lookup[key] <= w:
            continue
        lookup[key] = w
    mate = max_weight_matching_edges(n, ends, wt, True)
    if np.any(mate < 0):
        raise MatchingError("graph has no perfect matching")
    pairs = tuple(sorted((int(u), int(mate[u])) for u in range(n) if u < mate[u]))
    total = float(np.sum([lookup[p] for p in pairs])) if pairs else 0.0
    return Matching(pairs, total)


def brute_force_min_matching(W) -> float:
    """Minimum perfect-matching weight by enumerating every pairing (small n only)."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]

    def rec(rest):
        if not rest:
            return 0.0
        a = rest[0]
        best = np.inf
        for i in range(1, len(rest)):
            b = rest[i]
            sub = rest[1:i] + rest[i + 1:]
            best = min(best, W[a, b] + rec(sub))
        return best

    return rec(tuple(range(n)))


# ---------------------------------------------------------------- shortest paths

@dataclass(frozen=True)
class CsrGraph:
    """Undirected graph in compressed adjacency form.

    ``indptr[u]:indptr[u+1]`` slices ``nbr`` (neighbour node) and ``eid``
    (index into the caller's edge-weight array) for node ``u``.
    """

    n: int
    indptr: np.ndarray
    nbr: np.ndarray
    eid: np.ndarray

    @classmethod
    def from_edges(cls, n: int, u, v) -> "CsrGraph":
        u = np.asarray(u, np.int64)
        v = np.asarray(v, np.int64)
        m = u.size
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.argsort(src, kind="stable")
        indptr = np.zeros(n + 1, np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(n, indptr, dst[order].copy(), eid[order].copy())


@njit(cache=True)
def dijkstra_nb(indptr, nbr, eid, weights, source, dist, pred):
    """Single-source shortest paths; ``pred`` holds the edge used to reach each node."""
    n = indptr.shape[0] - 1
    for i in range(n):
        dist[i] = np.inf
        pred[i] = -1
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(n, np.bool_)
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for a in range(indptr[u], indptr[u + 1]):
            v = nbr[a]
            nd = d + weights[eid[a]]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = a
                heapq.heappush(heap, (nd, v))


@njit(cache=True)
def defect_distance_table(indptr, nbr, eid, weights, defects):
    """Distances between all defect pairs plus per-source predecessor tables."""
    n = indptr.shape[0] - 1
    nd = defects.shape[0]
    D = np.empty((nd, nd))
    preds = np.empty((nd, n), np.int64)
    dist = np.empty(n)
    for i in range(nd):
        dijkstra_nb(indptr, nbr, eid, weights, defects[i], dist, preds[i])
        for j in range(nd):
            D[i, j] = dist[defects[j]]
    return D, preds


@njit(cache=True)
def trace_path_edges(indptr, nbr, eid, pred, target, out):
    """Edge ids on the stored shortest path ending at ``target``; returns count."""
    cnt = 0
    v = target
    while pred[v] != -1:
        a = pred[v]
        out[cnt] = eid[a]
        cnt += 1
        # the arc a sits in the adjacency of its tail node; find that node
        lo = 0
        hi = indptr.shape[0] - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if indptr[mid] <= a:
                lo = mid
            else:
                hi = mid
        v = lo
    return cnt


@dataclass(frozen=True)
class DefectDistances:
    """Pairwise defect distances with path recovery."""

    defects: np.ndarray
    dist: np.ndarray
    _graph: CsrGraph
    _preds: np.ndarray

    def path(self, i: int, j: int) -> np.ndarray:
        """Edge ids of a minimum path from defect ``i`` to defect ``j`` (table indices)."""
        if not np.isfinite(self.dist[i, j]):
            raise MatchingError("defects are disconnected")
        out = np.empty(self._graph.n, np.int64)
        cnt = trace_path_edges(self._graph.indptr, self._graph.nbr, self._graph.eid,
                               self._preds[i], int(self.defects[j]), out)
        return out[:cnt][::-1].copy()


def all_pairs_defect_distances(graph: CsrGraph, defects, weights) -> DefectDistances:
    """Dijkstra from every defect node; disconnected pairs get ``inf``.

    Raises
    ------
    MatchingError
        If any weight is negative (callers flip such edges beforehand).
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise MatchingError("shortest paths need non-negative weights")
    defects = np.asarray(defects, np.int64)
    D, preds = defect_distance_table(graph.indptr, graph.nbr, graph.eid, weights, defects)
    return DefectDistances(defects, D, graph, preds)


@njit(cache=True)
def match_defects_nb(indptr, nbr, eid, weights, defects, nedges):
    """Minimum-weight pairing of defects; returns the XOR of the matched paths.

    The result is a 0/1 array over the ``nedges`` graph edges.
    """
    nd = defects.shape[0]
    flips = np.zeros(nedges, np.int8)
    if nd == 0:
        return flips
    D, preds = defect_distance_table(indptr, nbr, eid, weights, defects)
    big = 1.0
    for i in range(nd):
        for j in range(nd):
            if np.isfinite(D[i, j]):
                big += D[i, j]
    for i in range(nd):
        for j in range(nd):
            if not np.isfinite(D[i, j]):
                D[i, j] = big
    mate = min_weight_perfect_matching_dense(D)
    buf = np.empty(indptr.shape[0], np.int64)
    for i in range(nd):
        j = mate[i]
        if j > i:
            cnt = trace_path_edges(indptr, nbr, eid, preds[i], defects[j], buf)
            for c in range(cnt):
                flips[buf[c]] ^= 1
    return flips
