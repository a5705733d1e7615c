"""Propagation method A: directed sequences of coherent neighborhoods.

The homophily route. Starting from a featured seed set, each step looks at
the neighborhood of the featured set in the chosen direction, accepts the
neighbors whose back-connections into the featured set are coherent, and
estimates each accepted node as the plain mean of the features of its
back-connections. Incoherent neighbors are blacklisted permanently so a
node can never become coherent later through freshly propagated features.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .features import FeatureStore, _group_stats, validate_norm_order, _validate_epsilon
from .graph import (
    DirectedGraph,
    Direction,
    as_node_array,
    grouped_restricted_neighbors,
    node_mask,
)

__all__ = [
    "StepRecord",
    "PropagationState",
    "PropagationResult",
    "init_state",
    "step_method_a",
    "run_method_a",
]

_EMPTY = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class StepRecord:
    """Sizes logged for one propagation step."""

    step: int
    added: int
    excluded: int
    pivots: Optional[int] = None


@dataclass(frozen=True)
class PropagationState:
    """Featured and excluded node sets of a propagation run.

    Both sets only ever grow, by additions disjoint from everything seen
    before; they never intersect.
    """

    featured: np.ndarray
    excluded: np.ndarray
    step: int
    direction: Direction
    epsilon: float
    history: tuple[StepRecord, ...] = ()

    def check_invariants(self) -> None:
        f, x = self.featured, self.excluded
        assert f.size and np.all(np.diff(f) > 0), "featured set must be sorted unique and nonempty"
        assert x.size == 0 or np.all(np.diff(x) > 0), "excluded set must be sorted unique"
        assert np.intersect1d(f, x, assume_unique=True).size == 0, \
            "featured and excluded sets must be disjoint"


@dataclass(frozen=True)
class PropagationResult:
    """Final state of a run plus the store augmented with estimates."""

    state: PropagationState
    store: FeatureStore

    @property
    def history(self) -> tuple[StepRecord, ...]:
        return self.state.history


def init_state(store: FeatureStore, seed, direction: Direction, epsilon) -> PropagationState:
    """Start a run from a seed whose features are known in ``store``."""
    seed = as_node_array(seed)
    if seed.size == 0:
        raise ValueError("seed set is empty; propagation is undefined")
    if not isinstance(direction, Direction):
        raise TypeError("direction must be a Direction")
    epsilon = _validate_epsilon(epsilon)
    for v in seed.tolist():
        if v not in store:
            raise ValueError(f"seed node {v} has no features")
        if not store.is_known(v):
            raise ValueError(f"seed node {v} carries an estimated feature, not a known one")
    return PropagationState(
        featured=seed,
        excluded=_EMPTY,
        step=0,
        direction=direction,
        epsilon=epsilon,
    )


def _advance(
    state: PropagationState,
    added: np.ndarray,
    excluded: np.ndarray,
    pivots: Optional[int] = None,
) -> PropagationState:
    record = StepRecord(state.step, int(added.size), int(excluded.size), pivots)
    return replace(
        state,
        featured=np.union1d(state.featured, added),
        excluded=np.union1d(state.excluded, excluded),
        step=state.step + 1,
        history=state.history + (record,),
    )


def step_method_a(
    state: PropagationState,
    g: DirectedGraph,
    store: FeatureStore,
    p=2.0,
):
    """One propagation step; returns (added, excluded, new_state).

    Candidates are the neighbors of the featured set. A fresh candidate
    (not yet featured or excluded) is accepted when the incoherence of its
    back-connections into the featured set is within the threshold, and its
    estimate is the mean of those back-connections' stored features; all
    other fresh candidates are blacklisted. Estimates are committed to the
    store tagged with the current step, and a fixed point shows up as two
    empty deltas.
    """
    p = validate_norm_order(p)
    V = state.featured
    cand = g.neighborhood(V, state.direction)
    if cand.size == 0:
        return _EMPTY, _EMPTY, _advance(state, _EMPTY, _EMPTY)

    featured_mask = node_mask(V, g.node_count)
    excluded_mask = node_mask(state.excluded, g.node_count)
    flat, bounds = grouped_restricted_neighbors(
        g, cand, featured_mask, state.direction.opposite
    )
    feats = store.features_of(V)
    inc, centers = _group_stats(feats[np.searchsorted(V, flat)], bounds, p)

    fresh = ~featured_mask[cand] & ~excluded_mask[cand]
    ok = inc <= state.epsilon
    added = cand[fresh & ok]
    rejected = cand[fresh & ~ok]

    for v, vec in zip(added.tolist(), centers[fresh & ok]):
        store.set_estimated(v, vec, state.step)
    return added, rejected, _advance(state, added, rejected)


def run_method_a(
    g: DirectedGraph,
    store: FeatureStore,
    seed,
    direction: Direction,
    epsilon,
    max_steps: int,
    p=2.0,
) -> PropagationResult:
    """Iterate method A until a fixed point or the step budget runs out."""
    if int(max_steps) < 1:
        raise ValueError("max_steps must be >= 1")
    state = init_state(store, seed, direction, epsilon)
    for _ in range(int(max_steps)):
        added, rejected, state = step_method_a(state, g, store, p=p)
        if added.size == 0 and rejected.size == 0:
            break
    return PropagationResult(state=state, store=store)
