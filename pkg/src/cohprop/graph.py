"""Immutable directed graphs with dense integer ids and sorted adjacency.

Edges encode a follow relation: ``(u, v)`` means *u follows v*. Each graph
stores a forward and a reverse CSR index so that followee and follower
queries are both O(degree), with neighbor lists sorted by node id so that
set intersections run as linear merges. Graphs are read-only after
construction and safe for concurrent readers.
"""
from __future__ import annotations

import io
import logging
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "Direction",
    "DirectedGraph",
    "EdgeListParseError",
    "UnknownNodeError",
    "load_edge_list",
    "as_node_array",
    "node_mask",
]


class Direction(Enum):
    """Traversal direction relative to follow edges.

    ``UP`` moves with the edges, from a node to the accounts it follows;
    ``DOWN`` moves against them, to the node's followers. Content posted by
    an account travels down, to its followers.
    """

    UP = "up"
    DOWN = "down"

    @property
    def opposite(self) -> "Direction":
        return Direction.DOWN if self is Direction.UP else Direction.UP

    @classmethod
    def from_string(cls, value: str) -> "Direction":
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(
                f"direction must be 'up' or 'down', got {value!r}"
            ) from None


class EdgeListParseError(ValueError):
    """A malformed record in an edge-list stream."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownNodeError(KeyError):
    """A node id or label that is not part of the graph."""


def as_node_array(nodes, node_count: int | None = None) -> np.ndarray:
    """Normalize any iterable of node ids to a sorted unique int64 array."""
    if isinstance(nodes, np.ndarray):
        arr = np.unique(nodes.astype(np.int64, copy=False))
    else:
        arr = np.unique(np.fromiter(nodes, dtype=np.int64))
    if arr.size and node_count is not None:
        if arr[0] < 0 or arr[-1] >= node_count:
            bad = arr[0] if arr[0] < 0 else arr[-1]
            raise UnknownNodeError(f"node id {bad} outside 0..{node_count - 1}")
    return arr


def node_mask(nodes: np.ndarray, node_count: int) -> np.ndarray:
    """Boolean membership mask of length ``node_count``."""
    mask = np.zeros(node_count, dtype=bool)
    mask[nodes] = True
    return mask


def _csr(order: np.ndarray, keys: np.ndarray, values: np.ndarray, n: int):
    counts = np.bincount(keys, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = values[order]
    return indptr, indices


class DirectedGraph:
    """Directed graph over dense integer node ids 0..node_count-1.

    External string labels map bijectively to ids; ids are assigned in
    order of first appearance during ingestion.
    """

    def __init__(
        self,
        node_count: int,
        fwd_indptr: np.ndarray,
        fwd_indices: np.ndarray,
        rev_indptr: np.ndarray,
        rev_indices: np.ndarray,
        labels: Sequence[str] | None = None,
        self_loops_dropped: int = 0,
        duplicates_collapsed: int = 0,
    ):
        self._n = int(node_count)
        self._fwd_indptr = np.asarray(fwd_indptr, dtype=np.int64)
        self._fwd_indices = np.asarray(fwd_indices, dtype=np.int64)
        self._rev_indptr = np.asarray(rev_indptr, dtype=np.int64)
        self._rev_indices = np.asarray(rev_indices, dtype=np.int64)
        for arr in (self._fwd_indptr, self._fwd_indices, self._rev_indptr, self._rev_indices):
            arr.setflags(write=False)
        if labels is None:
            labels = [str(i) for i in range(self._n)]
        if len(labels) != self._n:
            raise ValueError("label list length must equal node count")
        self._labels = tuple(str(s) for s in labels)
        self._ids = {s: i for i, s in enumerate(self._labels)}
        if len(self._ids) != self._n:
            raise ValueError("labels must be unique")
        self.self_loops_dropped = int(self_loops_dropped)
        self.duplicates_collapsed = int(duplicates_collapsed)

    @classmethod
    def from_edges(
        cls,
        edges,
        node_count: int | None = None,
        labels: Sequence[str] | None = None,
    ) -> "DirectedGraph":
        """Build a graph from (source, target) id pairs.

        Self-loops are dropped and duplicate pairs collapsed; both are
        counted on the returned graph.
        """
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("edges must be an iterable of (source, target) pairs")
        if node_count is None:
            node_count = int(arr.max()) + 1 if arr.size else 0
        if arr.size and (arr.min() < 0 or arr.max() >= node_count):
            raise ValueError("edge endpoint outside 0..node_count-1")

        loops = arr[:, 0] == arr[:, 1]
        n_loops = int(loops.sum())
        arr = arr[~loops]
        before = arr.shape[0]
        arr = np.unique(arr, axis=0) if arr.size else arr
        n_dupes = before - arr.shape[0]
        if n_loops:
            logger.warning("dropped %d self-loop record(s)", n_loops)

        n = int(node_count)
        # np.unique already sorted rows by (u, v): forward lists come out sorted
        fwd_indptr, fwd_indices = _csr(np.arange(arr.shape[0]), arr[:, 0], arr[:, 1], n)
        rev_order = np.lexsort((arr[:, 0], arr[:, 1]))
        rev_indptr, rev_indices = _csr(rev_order, arr[rev_order, 1], arr[:, 0], n)
        return cls(
            n, fwd_indptr, fwd_indices, rev_indptr, rev_indices,
            labels=labels, self_loops_dropped=n_loops, duplicates_collapsed=n_dupes,
        )

    # -- basic queries ----------------------------------------------------

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def edge_count(self) -> int:
        return int(self._fwd_indices.size)

    def _check(self, v: int) -> int:
        v = int(v)
        if v < 0 or v >= self._n:
            raise UnknownNodeError(f"node id {v} outside 0..{self._n - 1}")
        return v

    def neighbors(self, v: int, direction: Direction) -> np.ndarray:
        """Sorted neighbor ids of ``v``: UP = followees, DOWN = followers."""
        v = self._check(v)
        if direction is Direction.UP:
            return self._fwd_indices[self._fwd_indptr[v]:self._fwd_indptr[v + 1]]
        return self._rev_indices[self._rev_indptr[v]:self._rev_indptr[v + 1]]

    def degree(self, v: int, direction: Direction) -> int:
        v = self._check(v)
        ptr = self._fwd_indptr if direction is Direction.UP else self._rev_indptr
        return int(ptr[v + 1] - ptr[v])

    def neighborhood(self, nodes, direction: Direction) -> np.ndarray:
        """Union of ``neighbors(v, direction)`` over a node set (may overlap it)."""
        nodes = as_node_array(nodes, self._n)
        if nodes.size == 0:
            return np.empty(0, dtype=np.int64)
        parts = [self.neighbors(int(v), direction) for v in nodes]
        return np.unique(np.concatenate(parts))

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u, Direction.UP)
        j = np.searchsorted(row, v)
        return bool(j < row.size and row[j] == v)

    # -- labels ------------------------------------------------------------

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    def label_of(self, v: int) -> str:
        return self._labels[self._check(v)]

    def id_of(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise UnknownNodeError(f"unknown node label {label!r}") from None

    def write_label_map(self, path) -> None:
        """Export the label mapping as CSV ``label,node_id``."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("label,node_id\n")
            for i, lab in enumerate(self._labels):
                fh.write(f"{lab},{i}\n")


def grouped_restricted_neighbors(
    g: DirectedGraph, nodes: np.ndarray, allowed: np.ndarray, direction: Direction
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated ``neighbors(v, direction)`` restricted to an allowed mask.

    Returns ``(flat, bounds)`` where group k for nodes[k] occupies
    ``flat[bounds[k]:bounds[k+1]]``.
    """
    parts = []
    sizes = np.empty(len(nodes), dtype=np.int64)
    for k, v in enumerate(nodes):
        nb = g.neighbors(int(v), direction)
        sel = nb[allowed[nb]]
        parts.append(sel)
        sizes[k] = sel.size
    flat = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    bounds = np.zeros(len(nodes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=bounds[1:])
    return flat, bounds


def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
        return
    if isinstance(source, bytes):
        yield from io.StringIO(source.decode("utf-8"))
        return
    # file-like: may yield bytes or text
    for line in source:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def load_edge_list(
    source: Union[str, Path, bytes, IO],
    sep: str = ",",
    comment: str = "#",
) -> DirectedGraph:
    """Parse a ``follower<SEP>followee`` edge list into a graph.

    One edge per line, UTF-8; lines starting with the comment prefix and
    blank lines are skipped. Duplicate records are collapsed and self-loops
    dropped with a counted warning. Raises :class:`EdgeListParseError` with
    the offending line number on malformed records and ``ValueError`` when
    the stream contains no records at all.
    """
    ids: dict[str, int] = {}
    pairs: list[tuple[int, int]] = []
    records = 0

    def intern(label: str) -> int:
        i = ids.get(label)
        if i is None:
            i = len(ids)
            ids[label] = i
        return i

    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith(comment):
            continue
        fields = [f.strip() for f in line.split(sep)]
        if len(fields) != 2:
            raise EdgeListParseError(
                f"expected 2 fields separated by {sep!r}, got {len(fields)}", lineno
            )
        if not fields[0] or not fields[1]:
            raise EdgeListParseError("empty node label", lineno)
        records += 1
        pairs.append((intern(fields[0]), intern(fields[1])))

    if records == 0:
        raise ValueError("edge-list stream contains no records")
    labels = [None] * len(ids)
    for lab, i in ids.items():
        labels[i] = lab
    return DirectedGraph.from_edges(pairs, node_count=len(ids), labels=labels)
