"""Deliberately naive reference implementations used to cross-check the
package. Everything here favors obviousness over speed: plain Python loops,
sets, and textbook formulas.
"""
import math

import numpy as np

from cohprop.graph import DirectedGraph, Direction


def naive_neighbors(edges, v, direction):
    if direction is Direction.UP:
        return {b for a, b in edges if a == v}
    return {a for a, b in edges if b == v}


def naive_neighborhood(edges, nodes, direction):
    out = set()
    for v in nodes:
        out |= naive_neighbors(edges, v, direction)
    return out


def naive_norm(vec, p):
    return sum(abs(x) ** p for x in vec) ** (1.0 / p)


def naive_error(est, truth, p):
    return naive_norm([a - b for a, b in zip(est, truth)], p)


def naive_centroid(vectors):
    dim = len(vectors[0])
    return [sum(v[d] for v in vectors) / len(vectors) for d in range(dim)]


def naive_incoherence(vectors, p):
    c = naive_centroid(vectors)
    total = 0.0
    for v in vectors:
        total += naive_norm([x - y for x, y in zip(v, c)], p) ** 2
    return math.sqrt(total / len(vectors))


def naive_coherent_neighborhood(edges, features, nodes, direction, epsilon, p):
    """Direct transcription of the gated-neighborhood definition."""
    nodes = set(nodes)
    opposite = direction.opposite
    result = set()
    for u in naive_neighborhood(edges, nodes, direction):
        back = naive_neighbors(edges, u, opposite) & nodes
        assert back
        if naive_incoherence([features[v] for v in sorted(back)], p) <= epsilon:
            result.add(u)
    return result


def naive_co_neighbors(edges, v, pivots, members, direction):
    """Brute-force double loop over the candidate's pivots."""
    pivots = set(pivots)
    members = set(members)
    shared = naive_neighbors(edges, v, direction) & pivots
    pooled = set()
    for pv in shared:
        pooled |= naive_neighbors(edges, pv, direction.opposite)
    return pooled & members


def dense_ca_reference(matrix, n_dims):
    """Textbook correspondence analysis on a dense array.

    Returns row principal coordinates, column principal coordinates, and the
    full singular-value spectrum; no sign convention is applied.
    """
    X = np.asarray(matrix, dtype=np.float64)
    total = X.sum()
    P = X / total
    r = P.sum(axis=1)
    c = P.sum(axis=0)
    S = (P - np.outer(r, c)) / np.sqrt(np.outer(r, c))
    U, sigma, Vt = np.linalg.svd(S, full_matrices=False)
    rows = U[:, :n_dims] * sigma[:n_dims] / np.sqrt(r)[:, None]
    cols = Vt[:n_dims].T * sigma[:n_dims] / np.sqrt(c)[:, None]
    return rows, cols, sigma


def random_graph(rng, n_nodes, n_edges):
    """Random simple directed graph plus its edge set, for oracle checks."""
    pairs = set()
    while len(pairs) < n_edges:
        u, v = rng.integers(0, n_nodes, size=2)
        if u != v:
            pairs.add((int(u), int(v)))
    edges = sorted(pairs)
    return DirectedGraph.from_edges(edges, node_count=n_nodes), edges


class SetGraph:
    """Adjacency held in plain dict-of-set form; the enumeration baseline."""

    def __init__(self, edges, n_nodes):
        self.out = {v: set() for v in range(n_nodes)}
        self.inc = {v: set() for v in range(n_nodes)}
        for a, b in edges:
            self.out[a].add(b)
            self.inc[b].add(a)

    def neighbors(self, v, direction):
        return self.out[v] if direction is Direction.UP else self.inc[v]

    def neighborhood(self, nodes, direction):
        result = set()
        for v in nodes:
            result |= self.neighbors(v, direction)
        return result


def enum_coherent_neighborhood(sg, features, nodes, direction, epsilon, p):
    nodes = set(nodes)
    result = set()
    for u in sg.neighborhood(nodes, direction):
        back = sg.neighbors(u, direction.opposite) & nodes
        if naive_incoherence([features[v] for v in sorted(back)], p) <= epsilon:
            result.add(u)
    return result


def enum_co_neighbors(sg, v, pivots, members, direction):
    pooled = set()
    for pv in sg.neighbors(v, direction) & set(pivots):
        pooled |= sg.neighbors(pv, direction.opposite)
    return pooled & set(members)
