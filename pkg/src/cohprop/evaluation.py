"""Evaluation protocols: first-step sweeps, K-fold recovery, correlations.

The sweep protocol runs one method-A step from a seed per threshold and
reports the error over the fresh additions that carry ground truth. The
K-fold protocol holds out one fold of the seed at a time, runs one
method-B step from the rest, and reports the error and coverage of the
recovered fold members, aggregated over folds with median/min/max (mean is
recorded too). Reports serialize to a fixed CSV schema and to JSON.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .features import (
    FeatureStore,
    estimation_error,
    validate_norm_order,
)
from .graph import DirectedGraph, Direction, as_node_array
from .method_a import init_state, step_method_a
from .method_b import step_method_b

__all__ = [
    "CSV_COLUMNS",
    "ReportRow",
    "EvaluationReport",
    "spatial_uniform_sample",
    "sweep_method_a",
    "kfold_eval_method_b",
    "correlate_with_external",
]

CSV_COLUMNS = (
    "epsilon",
    "method",
    "direction",
    "fold",
    "stat",
    "error",
    "size_delta_v",
    "size_pivots",
    "coverage",
)

_STATS = ("mean", "median", "min", "max")
_STAT_FN = {"mean": np.mean, "median": np.median, "min": np.min, "max": np.max}


@dataclass(frozen=True)
class ReportRow:
    """One line of an evaluation report; ``fold=None`` marks aggregates."""

    epsilon: float
    method: str
    direction: str
    fold: Optional[int]
    stat: str
    error: Optional[float]
    size_delta_v: float
    size_pivots: Optional[float]
    coverage: Optional[float]


@dataclass
class EvaluationReport:
    rows: list[ReportRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def rows_where(self, **conditions) -> list[ReportRow]:
        out = []
        for row in self.rows:
            if all(getattr(row, key) == val for key, val in conditions.items()):
                out.append(row)
        return out

    @staticmethod
    def _cell(value) -> str:
        if value is None:
            return ""
        if isinstance(value, float):
            return repr(value)
        return str(value)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [
                        repr(float(row.epsilon)),
                        row.method,
                        row.direction,
                        "all" if row.fold is None else str(row.fold),
                        row.stat,
                        self._cell(row.error),
                        self._cell(row.size_delta_v),
                        self._cell(row.size_pivots),
                        self._cell(row.coverage),
                    ]
                )

    def to_json(self, path) -> None:
        payload = {"metadata": self.metadata, "rows": [asdict(r) for r in self.rows]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def spatial_uniform_sample(
    store: FeatureStore,
    nodes,
    n: int,
    grid_bins: int = 20,
    seed: int = 0,
) -> np.ndarray:
    """Sample ``n`` nodes spread uniformly over the feature-space grid.

    The bounding box of the candidates is cut into ``grid_bins`` cells per
    axis; nonempty cells are visited round-robin in a seeded random order,
    drawing one uniform node per visit, until ``n`` nodes are collected.
    Dense regions therefore cannot dominate the sample: cells are balanced
    up to exhaustion.
    """
    V = as_node_array(nodes)
    n = int(n)
    if n < 0 or n > V.size:
        raise ValueError(f"cannot sample {n} nodes from a set of {V.size}")
    if int(grid_bins) < 1:
        raise ValueError("grid_bins must be >= 1")
    if n == 0:
        return np.empty(0, dtype=np.int64)

    feats = store.features_of(V)
    lows = feats.min(axis=0)
    span = feats.max(axis=0) - lows
    span[span == 0] = 1.0  # degenerate axes collapse to one bin
    bins = int(grid_bins)
    idx = np.clip((feats - lows) / span * bins, 0, bins - 1).astype(np.int64)
    cell_ids = np.ravel_multi_index(idx.T, dims=(bins,) * store.dim)

    members: dict[int, list[int]] = {}
    for node, cell in zip(V.tolist(), cell_ids.tolist()):
        members.setdefault(cell, []).append(node)

    rng = np.random.default_rng(seed)
    order = [int(c) for c in rng.permutation(sorted(members))]
    queues = {cell: [int(v) for v in rng.permutation(members[cell])] for cell in sorted(members)}

    picked: list[int] = []
    while len(picked) < n:
        progressed = False
        for cell in order:
            queue = queues[cell]
            if queue:
                picked.append(queue.pop())
                progressed = True
                if len(picked) == n:
                    break
        assert progressed, "ran out of candidates before reaching n"
    return np.array(sorted(picked), dtype=np.int64)


def _error_stats(errors: np.ndarray | None) -> dict[str, Optional[float]]:
    if errors is None or errors.size == 0:
        return {stat: None for stat in _STATS}
    return {stat: float(_STAT_FN[stat](errors)) for stat in _STATS}


def sweep_method_a(
    g: DirectedGraph,
    truth: FeatureStore,
    seed_set,
    direction: Direction,
    epsilon_grid: Sequence[float],
    p=2.0,
) -> EvaluationReport:
    """One method-A step from the seed per threshold, error over additions.

    Errors are computed on the additions that carry ground truth; when none
    do (or nothing is added) the rows keep their sizes and an absent error
    rather than a fabricated value.
    """
    p = validate_norm_order(p)
    seed_arr = as_node_array(seed_set)
    report = EvaluationReport(
        metadata={
            "protocol": "sweep-a",
            "method": "a",
            "direction": direction.value,
            "p": p,
            "epsilon_grid": [float(e) for e in epsilon_grid],
            "seed_size": int(seed_arr.size),
        }
    )
    for eps in epsilon_grid:
        working = truth.subset(seed_arr)
        state = init_state(working, seed_arr, direction, eps)
        added, _, _ = step_method_a(state, g, working, p=p)
        scored = [v for v in added.tolist() if v in truth]
        errors = (
            np.array([estimation_error(working.get(v), truth.get(v), p) for v in scored])
            if scored
            else None
        )
        for stat, value in _error_stats(errors).items():
            report.rows.append(
                ReportRow(
                    epsilon=float(eps),
                    method="a",
                    direction=direction.value,
                    fold=None,
                    stat=stat,
                    error=value,
                    size_delta_v=float(added.size),
                    size_pivots=None,
                    coverage=None,
                )
            )
    return report


def kfold_eval_method_b(
    g: DirectedGraph,
    truth: FeatureStore,
    pool,
    k: int,
    direction: Direction,
    epsilon_grid: Sequence[float],
    seed: int,
    p=2.0,
    candidate_test: str = "pivot-features",
) -> EvaluationReport:
    """K-fold recovery of held-out pool members through one method-B step.

    The pool is split into K folds by a seeded shuffle. For each fold and
    threshold, the remaining pool members seed one method-B step; the
    recovered set is the intersection of the additions with the fold, and
    coverage is its share of the fold. Per-threshold aggregate rows carry
    the median/min/max (and mean) over folds.
    """
    p = validate_norm_order(p)
    pool_arr = as_node_array(pool)
    k = int(k)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > pool_arr.size:
        raise ValueError(f"k={k} folds over {pool_arr.size} nodes leaves empty folds")

    rng = np.random.default_rng(seed)
    folds = [np.sort(f) for f in np.array_split(rng.permutation(pool_arr), k)]
    report = EvaluationReport(
        metadata={
            "protocol": "kfold-b",
            "method": "b",
            "direction": direction.value,
            "p": p,
            "k": k,
            "seed": int(seed),
            "epsilon_grid": [float(e) for e in epsilon_grid],
            "pool_size": int(pool_arr.size),
            "candidate_test": candidate_test,
        }
    )

    per_eps: dict[float, dict[str, list]] = {}
    for fold_idx, fold in enumerate(folds):
        train = np.setdiff1d(pool_arr, fold, assume_unique=True)
        for eps in epsilon_grid:
            working = truth.subset(train)
            state = init_state(working, train, direction, eps)
            added, _, state = step_method_b(
                state, g, working, p=p, candidate_test=candidate_test
            )
            recovered = np.intersect1d(fold, added, assume_unique=True)
            pivots = state.history[-1].pivots
            coverage = recovered.size / fold.size
            err = (
                float(
                    np.mean(
                        [
                            estimation_error(working.get(v), truth.get(v), p)
                            for v in recovered.tolist()
                        ]
                    )
                )
                if recovered.size
                else None
            )
            report.rows.append(
                ReportRow(
                    epsilon=float(eps),
                    method="b",
                    direction=direction.value,
                    fold=fold_idx,
                    stat="mean",
                    error=err,
                    size_delta_v=float(added.size),
                    size_pivots=float(pivots),
                    coverage=float(coverage),
                )
            )
            bucket = per_eps.setdefault(
                float(eps), {"error": [], "coverage": [], "size": [], "pivots": []}
            )
            if err is not None:
                bucket["error"].append(err)
            bucket["coverage"].append(coverage)
            bucket["size"].append(float(added.size))
            bucket["pivots"].append(float(pivots))

    for eps in epsilon_grid:
        bucket = per_eps[float(eps)]
        errors = np.array(bucket["error"]) if bucket["error"] else None
        for stat in _STATS:
            fn = _STAT_FN[stat]
            report.rows.append(
                ReportRow(
                    epsilon=float(eps),
                    method="b",
                    direction=direction.value,
                    fold=None,
                    stat=stat,
                    error=None if errors is None else float(fn(errors)),
                    size_delta_v=float(fn(bucket["size"])),
                    size_pivots=float(fn(bucket["pivots"])),
                    coverage=float(fn(bucket["coverage"])),
                )
            )
    return report


def correlate_with_external(
    positions,
    groups: Mapping[int, str],
    scores: Mapping[str, Mapping[str, float]],
) -> dict:
    """Correlate node coordinates with per-group external scores.

    ``positions`` maps nodes to vectors (a FeatureStore works). For each
    criterion the result carries per-dimension Pearson correlations at the
    node level (each node against its group's score) and at the group
    level (group-mean coordinates against scores), plus the matched group
    list. Requires at least three matched groups per criterion; constant
    scores are rejected.
    """
    if isinstance(positions, FeatureStore):
        pos_map = {node: vec for node, vec in positions.items()}
    else:
        pos_map = {int(k): np.asarray(v, dtype=np.float64) for k, v in positions.items()}
    if not pos_map:
        raise ValueError("no positions given")
    dim = len(next(iter(pos_map.values())))

    placed = [(v, groups[v]) for v in sorted(pos_map) if v in groups]
    result: dict[str, dict] = {}
    for criterion, table in scores.items():
        rows = [(v, grp) for v, grp in placed if grp in table]
        matched = sorted({grp for _, grp in rows})
        if len(matched) < 3:
            raise ValueError(
                f"criterion {criterion!r}: needs >= 3 matched groups, got {len(matched)}"
            )
        score_vec = np.array([table[grp] for _, grp in rows], dtype=np.float64)
        if np.ptp(score_vec) == 0:
            raise ValueError(f"criterion {criterion!r}: scores are constant")
        coords = np.stack([pos_map[v] for v, _ in rows])

        node_level = [
            float(np.corrcoef(coords[:, d], score_vec)[0, 1]) for d in range(dim)
        ]
        group_means = np.stack(
            [coords[[grp == g for _, grp in rows]].mean(axis=0) for g in matched]
        )
        group_scores = np.array([table[g] for g in matched], dtype=np.float64)
        if np.ptp(group_scores) == 0:
            raise ValueError(f"criterion {criterion!r}: scores are constant")
        group_level = [
            float(np.corrcoef(group_means[:, d], group_scores)[0, 1]) for d in range(dim)
        ]
        result[criterion] = {
            "groups": matched,
            "node_level": node_level,
            "group_level": group_level,
        }
    return result
