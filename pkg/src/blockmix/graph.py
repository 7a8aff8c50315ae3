"""Sparse network storage, edge-list I/O, and descriptive statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "EdgeListError",
    "Network",
    "load_edge_list",
    "load_weighted_edge_list",
    "load_labels",
    "to_edge_list_text",
    "density",
    "degrees",
    "discretize_weights",
]


class EdgeListError(ValueError):
    """An edge-list or label file could not be parsed."""


@dataclass
class Network:
    """A binary or count-valued graph without self-loops.

    Storage is sparse: ``entries`` maps ordered index pairs (i, j), i != j,
    to positive integer values, and absent pairs are implicit zeros.
    Undirected networks store both orientations of every edge.  Instances
    are immutable by convention once constructed and can be shared freely
    across concurrent estimator runs.
    """

    n_nodes: int
    directed: bool
    value_kind: str  # "binary" | "count"
    entries: dict[tuple[int, int], int]
    node_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("a network needs at least one node")
        if self.value_kind not in ("binary", "count"):
            raise ValueError(f"unknown value_kind {self.value_kind!r}")
        if self.node_labels is not None:
            self.node_labels = tuple(str(s) for s in self.node_labels)
            if len(self.node_labels) != self.n_nodes:
                raise ValueError("node_labels length must equal n_nodes")
        for (i, j), v in self.entries.items():
            if i == j:
                raise ValueError(f"self-loop stored on node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"node index out of range in pair ({i}, {j})")
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ValueError(f"stored value for ({i}, {j}) must be a positive integer, got {v!r}")
            if self.value_kind == "binary" and v != 1:
                raise ValueError(f"binary network holds value {v} at ({i}, {j})")
            if not self.directed and self.entries.get((j, i)) != v:
                raise ValueError(f"undirected network is asymmetric at ({i}, {j})")

    @classmethod
    def from_edges(
        cls,
        n_nodes: int,
        edges: Mapping[tuple[int, int], int] | Iterable[tuple[int, int]],
        directed: bool = False,
        value_kind: str = "binary",
        node_labels: Iterable[str] | None = None,
    ) -> "Network":
        """Build a network from edges given in one orientation.

        ``edges`` is either a pair -> value mapping or an iterable of pairs
        (value 1).  For undirected networks the mirrored orientation is
        added automatically.
        """
        if not isinstance(edges, Mapping):
            edges = {pair: 1 for pair in edges}
        entries: dict[tuple[int, int], int] = {}
        for (i, j), v in edges.items():
            v = int(v)
            if v == 0:
                continue
            entries[(i, j)] = v
            if not directed:
                entries[(j, i)] = v
        labels = tuple(node_labels) if node_labels is not None else None
        return cls(n_nodes, directed, value_kind, entries, labels)

    @property
    def n_edges(self) -> int:
        """Number of present edges (pairs with a positive value)."""
        return len(self.entries) if self.directed else len(self.entries) // 2

    @property
    def total_value(self) -> int:
        """Sum of edge values over distinct edges."""
        s = sum(self.entries.values())
        return s if self.directed else s // 2

    def value(self, i: int, j: int) -> int:
        return self.entries.get((i, j), 0)

    def labels(self) -> tuple[str, ...]:
        """External node identifiers; defaults to stringified indices."""
        if self.node_labels is not None:
            return self.node_labels
        return tuple(str(i) for i in range(self.n_nodes))

    def to_dense(self) -> np.ndarray:
        """Dense value matrix with zero diagonal; symmetric if undirected."""
        y = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int64)
        for (i, j), v in self.entries.items():
            y[i, j] = v
        return y

    def neighbor_lists(self) -> list[np.ndarray]:
        """Per-node arrays of adjacent node indices (out-neighbors merged
        with in-neighbors when directed)."""
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for (i, j) in self.entries:
            adj[i].add(j)
            adj[j].add(i)
        return [np.array(sorted(s), dtype=np.int64) for s in adj]


def _tokens(line: str) -> list[str]:
    return line.split("#", 1)[0].split()


def load_edge_list(source, directed: bool = False, value_kind: str = "binary") -> Network:
    """Parse edge-list text into a :class:`Network`.

    Each non-comment line is ``src dst [value]`` (whitespace-delimited,
    ``#`` starts a comment).  Node identifiers are arbitrary strings and
    are mapped to dense indices in first-appearance order.  A line with a
    single token declares an isolated node; the serializer emits these so
    that networks round-trip exactly.

    In count mode duplicate (src, dst) lines sum their values; in binary
    mode a duplicate edge is an error.  Undirected input treats ``a b``
    and ``b a`` as the same edge and stores both orientations.
    """
    if value_kind not in ("binary", "count"):
        raise ValueError(f"unknown value_kind {value_kind!r}")
    if isinstance(source, str):
        source = source.splitlines()
    index: dict[str, int] = {}
    order: list[str] = []

    def node_id(token: str) -> int:
        if token not in index:
            index[token] = len(order)
            order.append(token)
        return index[token]

    values: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(source, start=1):
        toks = _tokens(raw)
        if not toks:
            continue
        if len(toks) == 1:
            node_id(toks[0])
            continue
        if len(toks) > 3:
            raise EdgeListError(f"line {lineno}: expected 'src dst [value]', got {len(toks)} fields")
        if toks[0] == toks[1]:
            raise EdgeListError(f"line {lineno}: self-loop on node {toks[0]!r}")
        i, j = node_id(toks[0]), node_id(toks[1])
        if len(toks) == 3:
            try:
                v = int(toks[2])
            except ValueError:
                raise EdgeListError(f"line {lineno}: non-numeric value {toks[2]!r}") from None
            if v < 0:
                raise EdgeListError(f"line {lineno}: negative value {v}")
            if value_kind == "binary" and v != 1:
                raise EdgeListError(f"line {lineno}: binary edge list carries value {v}")
        else:
            v = 1
        key = (i, j) if directed or i < j else (j, i)
        if key in values:
            if value_kind == "binary":
                raise EdgeListError(f"line {lineno}: duplicate edge {toks[0]!r} {toks[1]!r}")
            values[key] += v
        elif v > 0:
            values[key] = v
    if not order:
        raise EdgeListError("no edges")
    return Network.from_edges(len(order), values, directed=directed, value_kind=value_kind, node_labels=order)


def load_weighted_edge_list(source, directed: bool = False):
    """Parse a real-valued edge list with weights in [0, 1].

    Returns ``(weights, node_labels)`` where ``weights`` maps index pairs
    to floats.  Use :func:`discretize_weights` to turn the result into a
    count network.
    """
    if isinstance(source, str):
        source = source.splitlines()
    index: dict[str, int] = {}
    order: list[str] = []

    def node_id(token: str) -> int:
        if token not in index:
            index[token] = len(order)
            order.append(token)
        return index[token]

    weights: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(source, start=1):
        toks = _tokens(raw)
        if not toks:
            continue
        if len(toks) == 1:
            node_id(toks[0])
            continue
        if len(toks) != 3:
            raise EdgeListError(f"line {lineno}: weighted edge list needs 'src dst weight'")
        if toks[0] == toks[1]:
            raise EdgeListError(f"line {lineno}: self-loop on node {toks[0]!r}")
        i, j = node_id(toks[0]), node_id(toks[1])
        try:
            w = float(toks[2])
        except ValueError:
            raise EdgeListError(f"line {lineno}: non-numeric weight {toks[2]!r}") from None
        if not 0.0 <= w <= 1.0:
            raise EdgeListError(f"line {lineno}: weight {w} outside [0, 1]")
        key = (i, j) if directed or i < j else (j, i)
        if key in weights:
            raise EdgeListError(f"line {lineno}: duplicate weighted edge {toks[0]!r} {toks[1]!r}")
        weights[key] = w
    if not order:
        raise EdgeListError("no edges")
    return weights, tuple(order)


def load_labels(source) -> dict[str, str]:
    """Parse a ground-truth label file with ``node_id group_label`` lines."""
    if isinstance(source, str):
        source = source.splitlines()
    labels: dict[str, str] = {}
    for lineno, raw in enumerate(source, start=1):
        toks = _tokens(raw)
        if not toks:
            continue
        if len(toks) != 2:
            raise EdgeListError(f"line {lineno}: expected 'node_id group_label'")
        if toks[0] in labels:
            raise EdgeListError(f"line {lineno}: duplicate node {toks[0]!r}")
        labels[toks[0]] = toks[1]
    return labels


def to_edge_list_text(net: Network) -> str:
    """Serialize a network to edge-list text that reloads identically.

    Every node is declared on its own line (preserving index order, and
    keeping isolated nodes), followed by one line per edge in sorted index
    order.  Count networks carry an explicit value field.
    """
    labels = net.labels()
    lines = [str(lab) for lab in labels]
    if net.directed:
        pairs = sorted(net.entries)
    else:
        pairs = sorted((i, j) for (i, j) in net.entries if i < j)
    for i, j in pairs:
        if net.value_kind == "count":
            lines.append(f"{labels[i]} {labels[j]} {net.entries[(i, j)]}")
        else:
            lines.append(f"{labels[i]} {labels[j]}")
    return "\n".join(lines) + "\n"


def density(net: Network) -> float:
    """Fraction of possible node pairs joined by an edge.

    Counts presence, not value: n(n-1)/2 possible pairs when undirected,
    n(n-1) when directed.
    """
    if net.n_nodes < 2:
        raise ValueError("density needs at least two nodes")
    n = net.n_nodes
    possible = n * (n - 1) if net.directed else n * (n - 1) // 2
    return net.n_edges / possible


def degrees(net: Network) -> np.ndarray:
    """Per-node total of incident edge values (in + out when directed)."""
    deg = np.zeros(net.n_nodes, dtype=np.int64)
    for (i, j), v in net.entries.items():
        deg[i] += v
        if net.directed:
            deg[j] += v
    return deg


def discretize_weights(
    weights: Mapping[tuple[int, int], float],
    n_bins: int,
    n_nodes: int | None = None,
    directed: bool = False,
    node_labels: Iterable[str] | None = None,
) -> Network:
    """Bin [0, 1] weights into counts: ``floor(w * n_bins)``, top bin closed.

    A weight of exactly 1 maps to ``n_bins``; weights that floor to zero
    leave the pair absent.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    values: dict[tuple[int, int], int] = {}
    max_idx = -1
    for (i, j), w in weights.items():
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"weight {w} for pair ({i}, {j}) outside [0, 1]")
        max_idx = max(max_idx, i, j)
        v = min(math.floor(w * n_bins), n_bins)
        if v > 0:
            values[(i, j)] = v
    if n_nodes is None:
        n_nodes = max_idx + 1
    return Network.from_edges(n_nodes, values, directed=directed, value_kind="count", node_labels=node_labels)
