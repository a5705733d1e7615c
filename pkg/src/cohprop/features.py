"""Per-node feature vectors and the coherence metric layer.

A :class:`FeatureStore` keeps one fixed-dimension vector per node, tagged
as seed (``known``) or propagated (``estimated`` with the step at which it
was written). Entries are write-once: propagation never overwrites a seed
feature and never re-estimates a node.

The metric layer provides the distance between an estimate and a reference
vector, set centroids, set incoherence (root mean squared p-norm distance
to the centroid), and coherence-gated neighborhoods.
"""
from __future__ import annotations

import csv
import math
from typing import Iterable, Iterator, Mapping

import numpy as np

from .graph import (
    DirectedGraph,
    Direction,
    as_node_array,
    grouped_restricted_neighbors,
    node_mask,
)

__all__ = [
    "KNOWN",
    "FeatureStore",
    "validate_norm_order",
    "estimation_error",
    "mean_error",
    "centroid",
    "incoherence",
    "coherent_neighborhood",
    "read_features_csv",
    "write_features_csv",
]

KNOWN = -1  # provenance step index reserved for seed features


def validate_norm_order(p) -> float:
    """Check a vector-norm order: any real p with 1 <= p < inf."""
    p = float(p)
    if math.isnan(p) or math.isinf(p) or p < 1.0:
        raise ValueError(f"norm order must satisfy 1 <= p < inf, got {p}")
    return p


class FeatureStore:
    """Write-once map from node id to an N-dimensional feature vector."""

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise ValueError("feature dimension must be >= 1")
        self._dim = int(dim)
        self._values: dict[int, np.ndarray] = {}
        self._steps: dict[int, int] = {}

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self) -> int:
        return len(self._values)

    def __contains__(self, node) -> bool:
        return int(node) in self._values

    def nodes(self) -> np.ndarray:
        return np.array(sorted(self._values), dtype=np.int64)

    def items(self) -> Iterator[tuple[int, np.ndarray]]:
        for node in sorted(self._values):
            yield node, self._values[node]

    def _coerce(self, vec) -> np.ndarray:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (self._dim,):
            raise ValueError(f"expected a vector of dimension {self._dim}, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("feature components must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        return arr

    def _insert(self, node: int, vec, step: int) -> None:
        node = int(node)
        if node in self._values:
            raise ValueError(f"features for node {node} already set; entries are write-once")
        self._values[node] = self._coerce(vec)
        self._steps[node] = step

    def set_known(self, node: int, vec) -> None:
        self._insert(node, vec, KNOWN)

    def set_estimated(self, node: int, vec, step: int) -> None:
        if step < 0:
            raise ValueError("estimation step must be >= 0")
        self._insert(node, vec, int(step))

    def get(self, node: int) -> np.ndarray:
        try:
            return self._values[int(node)]
        except KeyError:
            raise KeyError(f"no features for node {int(node)}") from None

    def provenance(self, node: int) -> int:
        """KNOWN (-1) for seed entries, else the propagation step index."""
        self.get(node)
        return self._steps[int(node)]

    def is_known(self, node: int) -> bool:
        return self.provenance(node) == KNOWN

    def provenance_label(self, node: int) -> str:
        step = self.provenance(node)
        return "known" if step == KNOWN else f"estimated:{step}"

    def features_of(self, nodes) -> np.ndarray:
        """Stack features for a node array into a (k, N) matrix."""
        nodes = as_node_array(nodes)
        out = np.empty((nodes.size, self._dim), dtype=np.float64)
        for i, v in enumerate(nodes.tolist()):
            out[i] = self.get(v)
        return out

    def subset(self, nodes) -> "FeatureStore":
        """Copy of the entries for ``nodes`` (all must be present)."""
        sub = FeatureStore(self._dim)
        for v in as_node_array(nodes).tolist():
            vec = self.get(v)
            sub._values[v] = vec
            sub._steps[v] = self._steps[v]
        return sub

    def copy(self) -> "FeatureStore":
        dup = FeatureStore(self._dim)
        dup._values = dict(self._values)
        dup._steps = dict(self._steps)
        return dup


# -- metrics ----------------------------------------------------------------


def estimation_error(est, truth, p=2.0) -> float:
    """p-norm distance between an estimated and a reference vector."""
    p = validate_norm_order(p)
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {est.shape} vs {truth.shape}")
    return float(np.linalg.norm(est - truth, ord=p))


def mean_error(nodes, estimates: FeatureStore, truth: FeatureStore, p=2.0) -> float:
    """Mean p-norm error over a node set (every node needs both entries)."""
    p = validate_norm_order(p)
    nodes = as_node_array(nodes)
    if nodes.size == 0:
        raise ValueError("mean error over an empty node set is undefined")
    est = estimates.features_of(nodes)
    ref = truth.features_of(nodes)
    return float(np.mean(np.linalg.norm(est - ref, ord=p, axis=1)))


def centroid(nodes, store: FeatureStore) -> np.ndarray:
    """Component-wise mean feature vector of a nonempty node set."""
    nodes = as_node_array(nodes)
    if nodes.size == 0:
        raise ValueError("centroid of an empty node set is undefined")
    return store.features_of(nodes).mean(axis=0)


def incoherence(nodes, store: FeatureStore, p=2.0) -> float:
    """Root mean squared p-norm distance of the set's features to its centroid."""
    p = validate_norm_order(p)
    nodes = as_node_array(nodes)
    if nodes.size == 0:
        raise ValueError("incoherence of an empty node set is undefined")
    feats = store.features_of(nodes)
    diffs = feats - feats.mean(axis=0)
    dists = np.linalg.norm(diffs, ord=p, axis=1)
    return float(np.sqrt(np.mean(dists**2)))


def _group_stats(member_values: np.ndarray, bounds: np.ndarray, p: float):
    """Incoherence and centroid of each contiguous row group.

    Group k occupies member_values[bounds[k]:bounds[k+1]]; every group must
    be nonempty.
    """
    counts = np.diff(bounds)
    if not (counts > 0).all():
        raise AssertionError("empty feature group")
    starts = bounds[:-1]
    sums = np.add.reduceat(member_values, starts, axis=0)
    centroids = sums / counts[:, None]
    diffs = member_values - np.repeat(centroids, counts, axis=0)
    if p == 2.0:
        sq = np.einsum("ij,ij->i", diffs, diffs)
    else:
        sq = np.sum(np.abs(diffs) ** p, axis=1) ** (2.0 / p)
    mean_sq = np.add.reduceat(sq, starts) / counts
    return np.sqrt(mean_sq), centroids


def _validate_epsilon(epsilon) -> float:
    epsilon = float(epsilon)
    if math.isnan(epsilon) or epsilon < 0.0:
        raise ValueError(f"coherence threshold must be >= 0, got {epsilon}")
    return epsilon


def _require_features(store: FeatureStore, nodes: np.ndarray) -> None:
    for v in nodes.tolist():
        if v not in store:
            raise KeyError(f"no features for node {v}")


def coherent_neighborhood(
    g: DirectedGraph,
    store: FeatureStore,
    nodes,
    direction: Direction,
    epsilon,
    p=2.0,
) -> np.ndarray:
    """Neighbors of a set whose back-connections into it are coherent.

    A neighbor u of the set V (in ``direction``) is kept when the
    incoherence of u's opposite-direction neighborhood restricted to V is
    at most ``epsilon``. That restriction is nonempty by construction. The
    result is a subset of ``g.neighborhood(V, direction)`` and grows
    monotonically with ``epsilon``.
    """
    p = validate_norm_order(p)
    epsilon = _validate_epsilon(epsilon)
    V = as_node_array(nodes, g.node_count)
    _require_features(store, V)
    cand = g.neighborhood(V, direction)
    if cand.size == 0:
        return cand
    allowed = node_mask(V, g.node_count)
    flat, bounds = grouped_restricted_neighbors(g, cand, allowed, direction.opposite)
    feats = store.features_of(V)
    inc, _ = _group_stats(feats[np.searchsorted(V, flat)], bounds, p)
    return cand[inc <= epsilon]


# -- CSV interchange ---------------------------------------------------------


def write_features_csv(
    path,
    store: FeatureStore,
    graph: DirectedGraph,
    include_provenance: bool = False,
) -> None:
    """Write ``node_label,f1,...,fN`` rows (plus optional provenance column)."""
    header = ["node_label"] + [f"f{i + 1}" for i in range(store.dim)]
    if include_provenance:
        header.append("provenance")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for node, vec in store.items():
            row = [graph.label_of(node)] + [repr(float(x)) for x in vec]
            if include_provenance:
                row.append(store.provenance_label(node))
            writer.writerow(row)


def write_labeled_features_csv(path, rows: Iterable[tuple[str, np.ndarray]], dim: int) -> None:
    """Write labeled coordinate rows without going through a graph."""
    header = ["node_label"] + [f"f{i + 1}" for i in range(dim)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for label, vec in rows:
            writer.writerow([label] + [repr(float(x)) for x in vec])


def _parse_provenance(text: str) -> int:
    if text == "known":
        return KNOWN
    if text.startswith("estimated:"):
        return int(text.split(":", 1)[1])
    raise ValueError(f"bad provenance value {text!r}")


def read_features_csv(path, graph: DirectedGraph) -> FeatureStore:
    """Load a features CSV, mapping labels to graph node ids.

    A trailing ``provenance`` column is honored when present; otherwise all
    rows load as known features.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty features file") from None
        if len(header) < 2:
            raise ValueError(f"{path}: header must be node_label,f1,...,fN")
        has_prov = header[-1].strip().lower() == "provenance"
        dim = len(header) - 1 - (1 if has_prov else 0)
        if dim < 1:
            raise ValueError(f"{path}: no feature columns in header")
        store = FeatureStore(dim)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            node = graph.id_of(row[0])
            try:
                vec = [float(x) for x in row[1:1 + dim]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric feature value") from None
            step = _parse_provenance(row[-1]) if has_prov else KNOWN
            if step == KNOWN:
                store.set_known(node, vec)
            else:
                store.set_estimated(node, vec, step)
    return store
