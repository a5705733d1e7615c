"""Propagation method B: projections through coherent pivot neighborhoods.

The structural-similarity route. Each step promotes the coherent neighbors
of the featured set to *pivots* (bridge nodes that are never themselves
featured), blacklists the incoherent ones, and then walks back through the
pivots: a candidate on the far side is accepted when the pivots it reaches
agree with each other, and its estimate is the mean feature of its
co-neighbors, the featured nodes reachable through shared pivots.

Pivots carry provisional features for the duration of a step: the mean of
their back-connections into the featured set, i.e. the method-A estimator
applied without persisting anything. The candidate coherence test runs on
those provisional features by default; ``candidate_test="co-neighbors"``
switches it to the incoherence of the candidate's co-neighbor set instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureStore, _group_stats, validate_norm_order
from .graph import (
    DirectedGraph,
    Direction,
    as_node_array,
    grouped_restricted_neighbors,
    node_mask,
)
from .method_a import (
    PropagationResult,
    PropagationState,
    _advance,
    init_state,
)

__all__ = [
    "PivotSet",
    "compute_pivots",
    "co_neighbors",
    "step_method_b",
    "run_method_b",
]

_EMPTY = np.empty(0, dtype=np.int64)
CANDIDATE_TESTS = ("pivot-features", "co-neighbors")


@dataclass(frozen=True)
class PivotSet:
    """Pivot nodes of one step with their provisional features.

    ``features[k]`` belongs to ``nodes[k]``. Provisional features live only
    inside the step; pivots never receive persistent store entries.
    """

    nodes: np.ndarray
    features: np.ndarray
    step: int

    def __len__(self) -> int:
        return int(self.nodes.size)


def compute_pivots(
    state: PropagationState,
    g: DirectedGraph,
    store: FeatureStore,
    p=2.0,
) -> tuple[PivotSet, np.ndarray]:
    """Coherent pivot candidates of the current step.

    Returns ``(pivots, newly_excluded)``: the neighbors of the featured set
    that pass the coherence gate and are not blacklisted, each with its
    provisional feature, plus the fresh incoherent neighbors to merge into
    the excluded set. An empty pivot set is a normal outcome.
    """
    p = validate_norm_order(p)
    V = state.featured
    cand = g.neighborhood(V, state.direction)
    if cand.size == 0:
        return PivotSet(_EMPTY, np.empty((0, store.dim)), state.step), _EMPTY

    featured_mask = node_mask(V, g.node_count)
    excluded_mask = node_mask(state.excluded, g.node_count)
    flat, bounds = grouped_restricted_neighbors(
        g, cand, featured_mask, state.direction.opposite
    )
    feats = store.features_of(V)
    inc, centers = _group_stats(feats[np.searchsorted(V, flat)], bounds, p)

    ok = inc <= state.epsilon
    keep = ok & ~excluded_mask[cand]
    rejected = cand[~ok & ~excluded_mask[cand] & ~featured_mask[cand]]
    return PivotSet(cand[keep], centers[keep], state.step), rejected


def co_neighbors(g: DirectedGraph, v: int, pivots, members, direction: Direction) -> np.ndarray:
    """Featured nodes reachable from ``v`` through shared pivots.

    The members of ``members`` lying in the opposite-direction neighborhood
    of the pivots that ``v`` connects to (in ``direction``). ``pivots`` may
    be a :class:`PivotSet` or any node iterable. Self-inclusion is possible
    when ``v`` itself belongs to ``members``.
    """
    pnodes = pivots.nodes if isinstance(pivots, PivotSet) else as_node_array(pivots, g.node_count)
    members = as_node_array(members, g.node_count)
    shared = np.intersect1d(g.neighbors(v, direction), pnodes, assume_unique=True)
    if shared.size == 0:
        return _EMPTY
    pooled = np.unique(
        np.concatenate([g.neighbors(int(pv), direction.opposite) for pv in shared])
    )
    return np.intersect1d(pooled, members, assume_unique=True)


def _pool(g: DirectedGraph, shared_pivots: np.ndarray, featured_mask: np.ndarray,
          direction: Direction) -> np.ndarray:
    pooled = np.unique(
        np.concatenate([g.neighbors(int(pv), direction.opposite) for pv in shared_pivots])
    )
    return pooled[featured_mask[pooled]]


def step_method_b(
    state: PropagationState,
    g: DirectedGraph,
    store: FeatureStore,
    p=2.0,
    candidate_test: str = "pivot-features",
):
    """One projection step; returns (added, excluded, new_state).

    The excluded delta comes from the pivot gate only: candidates that fail
    the candidate coherence test are simply skipped and may qualify at a
    later step. Every accepted candidate has a nonempty co-neighbor set by
    construction.
    """
    p = validate_norm_order(p)
    if candidate_test not in CANDIDATE_TESTS:
        raise ValueError(f"candidate_test must be one of {CANDIDATE_TESTS}")
    pivots, rejected = compute_pivots(state, g, store, p=p)
    if len(pivots) == 0:
        return _EMPTY, rejected, _advance(state, _EMPTY, rejected, pivots=0)

    n = g.node_count
    V = state.featured
    featured_mask = node_mask(V, n)
    blocked_mask = node_mask(state.excluded, n)
    blocked_mask[rejected] = True  # same-step pivot failures cannot be featured
    d = state.direction

    reach = g.neighborhood(pivots.nodes, d.opposite)
    fresh = reach[~featured_mask[reach] & ~blocked_mask[reach]]
    if fresh.size == 0:
        return _EMPTY, rejected, _advance(state, _EMPTY, rejected, pivots=len(pivots))

    pivot_mask = node_mask(pivots.nodes, n)
    # positions (into pivots.nodes) of each candidate's pivots
    shared: list[np.ndarray] = []
    for v in fresh.tolist():
        own = g.neighbors(v, d)
        sel = own[pivot_mask[own]]
        assert sel.size > 0, "candidate without pivots cannot be reachable"
        shared.append(sel)

    feats = store.features_of(V)
    positions = np.searchsorted(V, np.arange(n))  # id -> row in feats, valid on V only

    if candidate_test == "pivot-features":
        flat = np.concatenate(shared)
        bounds = np.zeros(len(shared) + 1, dtype=np.int64)
        np.cumsum([s.size for s in shared], out=bounds[1:])
        rows = np.searchsorted(pivots.nodes, flat)
        inc, _ = _group_stats(pivots.features[rows], bounds, p)
        ok = inc <= state.epsilon
        pools = {
            int(v): _pool(g, shared[i], featured_mask, d)
            for i, (v, keep) in enumerate(zip(fresh.tolist(), ok)) if keep
        }
    else:
        pools = {}
        ok = np.zeros(fresh.size, dtype=bool)
        for i, v in enumerate(fresh.tolist()):
            pool = _pool(g, shared[i], featured_mask, d)
            assert pool.size > 0, "co-neighbor set cannot be empty"
            pool_inc, _ = _group_stats(feats[positions[pool]], np.array([0, pool.size]), p)
            if pool_inc[0] <= state.epsilon:
                ok[i] = True
                pools[int(v)] = pool

    added = fresh[ok]
    for v in added.tolist():
        pool = pools[v]
        assert pool.size > 0, "co-neighbor set cannot be empty"
        store.set_estimated(v, feats[positions[pool]].mean(axis=0), state.step)
    return added, rejected, _advance(state, added, rejected, pivots=len(pivots))


def run_method_b(
    g: DirectedGraph,
    store: FeatureStore,
    seed,
    direction: Direction,
    epsilon,
    max_steps: int,
    p=2.0,
    candidate_test: str = "pivot-features",
) -> PropagationResult:
    """Iterate method B until a fixed point or the step budget runs out."""
    if int(max_steps) < 1:
        raise ValueError("max_steps must be >= 1")
    state = init_state(store, seed, direction, epsilon)
    for _ in range(int(max_steps)):
        added, rejected, state = step_method_b(
            state, g, store, p=p, candidate_test=candidate_test
        )
        if added.size == 0 and rejected.size == 0:
            break
    return PropagationResult(state=state, store=store)
