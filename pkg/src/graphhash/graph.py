"""Edge-list graph store: loading, validation, splitting, neighborhoods.

Node ids are dense integers assigned through a vocabulary that maps the
original tokens (strings or integer literals alike) to 0..N-1 in first
appearance order. The vocabulary is persisted as a ``<path>.vocab`` sidecar
(one token per line, dense id = zero-based line index) so downstream codes
and rankings stay interpretable. When an edge list already has a sidecar,
the sidecar defines the node universe; this is how split files keep the
original N even when some nodes only appear on the other side of the split.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .fileio import atomic_open


def _sorted_unique_rows(edges: np.ndarray) -> np.ndarray:
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


class Graph:
    """Immutable directed or undirected graph over dense integer node ids.

    Self-loops and duplicate edges are dropped at construction and counted.
    For undirected graphs a pair and its reverse are the same edge; the
    stored edge list keeps one representative per edge in first-appearance
    order, while neighbor lists contain both directions.
    """

    __slots__ = (
        "num_nodes",
        "edges",
        "directed",
        "labels",
        "self_loops_dropped",
        "duplicates_dropped",
        "_out",
        "_in",
        "_all",
    )

    def __init__(
        self,
        num_nodes: int,
        edges: Sequence[tuple[int, int]] | np.ndarray,
        directed: bool,
        labels: Optional[Sequence[str]] = None,
    ):
        if num_nodes <= 0:
            raise DataError("graph must have at least one node")
        if labels is not None and len(labels) != num_nodes:
            raise DataError(f"vocabulary has {len(labels)} entries for {num_nodes} nodes")
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
            raise DataError("edge endpoint outside the node universe")

        loops = arr[:, 0] == arr[:, 1]
        self.self_loops_dropped = int(loops.sum())
        arr = arr[~loops]

        keys = arr[:, 0] * num_nodes + arr[:, 1]
        if not directed:
            lo = np.minimum(arr[:, 0], arr[:, 1])
            hi = np.maximum(arr[:, 0], arr[:, 1])
            keys = lo * num_nodes + hi
        _, first = np.unique(keys, return_index=True)
        first.sort()
        self.duplicates_dropped = int(arr.shape[0] - first.size)
        arr = arr[first]

        self.num_nodes = int(num_nodes)
        self.edges = arr
        self.edges.setflags(write=False)
        self.directed = bool(directed)
        self.labels = tuple(labels) if labels is not None else None

        out_lists: list[list[int]] = [[] for _ in range(num_nodes)]
        in_lists: list[list[int]] = [[] for _ in range(num_nodes)]
        for i, j in arr:
            out_lists[i].append(j)
            in_lists[j].append(i)
            if not directed:
                out_lists[j].append(i)
                in_lists[i].append(j)
        self._out = tuple(np.array(sorted(l), dtype=np.int64) for l in out_lists)
        self._in = tuple(np.array(sorted(l), dtype=np.int64) for l in in_lists)
        if directed:
            self._all = tuple(
                np.union1d(self._out[x], self._in[x]) for x in range(num_nodes)
            )
        else:
            self._all = self._out

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def out_neighbors(self, x: int) -> np.ndarray:
        return self._out[x]

    def in_neighbors(self, x: int) -> np.ndarray:
        return self._in[x]

    def neighbors(self, x: int) -> np.ndarray:
        """Unified neighborhood: in- and out-neighbors merged for directed graphs."""
        return self._all[x]

    def degree(self, x: int) -> int:
        return int(self._all[x].size)

    def degrees(self) -> np.ndarray:
        return np.array([a.size for a in self._all], dtype=np.int64)

    def has_edge(self, i: int, j: int) -> bool:
        idx = np.searchsorted(self._out[i], j)
        return idx < self._out[i].size and self._out[i][idx] == j

    def label(self, x: int) -> str:
        return self.labels[x] if self.labels is not None else str(x)


@dataclass(frozen=True)
class SplitGraph:
    """A training graph plus the edges held out from it for testing."""

    train: Graph
    test_edges: np.ndarray
    holdout_fraction: float
    seed: Optional[int] = None

    def __post_init__(self):
        arr = np.asarray(self.test_edges, dtype=np.int64).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "test_edges", arr)


def common_neighbors(g: Graph, x: int, y: int) -> np.ndarray:
    """Nodes adjacent to both x and y under the unified neighborhood."""
    for node in (x, y):
        if not 0 <= node < g.num_nodes:
            raise DataError(f"node {node} outside universe of size {g.num_nodes}")
    a, b = g.neighbors(x), g.neighbors(y)
    if b.size < a.size:
        a, b = b, a
    return np.intersect1d(a, b, assume_unique=True)


def split(g: Graph, fraction: float, seed: int) -> SplitGraph:
    """Hold out a uniformly random ``fraction`` of the edges for testing.

    The permutation is applied to the canonically sorted edge list, so the
    result depends only on the edge set and the seed, not on file order.
    The training graph keeps all N nodes; isolated nodes are allowed.
    """
    if not 0.0 < fraction < 1.0:
        raise DataError(f"holdout fraction must be in (0, 1), got {fraction}")
    num_test = int(np.floor(g.num_edges * fraction + 0.5))
    if num_test < 1:
        raise DataError(
            f"{g.num_edges} edges at fraction {fraction} leave no test edges"
        )
    ordered = _sorted_unique_rows(g.edges)
    perm = np.random.default_rng(seed).permutation(g.num_edges)
    test_edges = ordered[perm[:num_test]]
    train_edges = ordered[perm[num_test:]]
    train = Graph(g.num_nodes, train_edges, g.directed, labels=g.labels)
    return SplitGraph(train=train, test_edges=test_edges, holdout_fraction=fraction, seed=seed)


def _vocab_path(path: str | Path) -> Path:
    return Path(str(path) + ".vocab")


def write_vocab(path: str | Path, labels: Sequence[str]) -> None:
    with atomic_open(_vocab_path(path), "w") as out:
        for token in labels:
            out.write(token + "\n")


def read_vocab(path: str | Path) -> list[str]:
    return Path(_vocab_path(path)).read_text().splitlines()


def load_edge_list(path: str | Path, directed: bool) -> Graph:
    """Parse a ``src<TAB>dst`` edge list into a Graph.

    Lines starting with ``#`` are comments. If ``<path>.vocab`` exists it
    fixes the node universe (unknown tokens are an error); otherwise the
    vocabulary is built in first-appearance order and persisted there.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"edge list not found: {path}")

    vocab: dict[str, int] = {}
    labels: list[str] = []
    sidecar = _vocab_path(path)
    fixed_vocab = sidecar.exists()
    if fixed_vocab:
        labels = sidecar.read_text().splitlines()
        vocab = {token: idx for idx, token in enumerate(labels)}
        if len(vocab) != len(labels):
            raise DataError(f"duplicate token in vocabulary {sidecar}")

    def intern(token: str, lineno: int) -> int:
        if token in vocab:
            return vocab[token]
        if fixed_vocab:
            raise DataError(f"{path}:{lineno}: token {token!r} not in {sidecar}")
        vocab[token] = len(labels)
        labels.append(token)
        return vocab[token]

    pairs: list[tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataError(f"{path}:{lineno}: expected src<TAB>dst, got {line!r}")
            pairs.append((intern(parts[0], lineno), intern(parts[1], lineno)))

    if not pairs:
        raise DataError(f"{path}: no edges found")
    graph = Graph(len(labels), pairs, directed, labels=labels)
    if not fixed_vocab:
        write_vocab(path, labels)
    return graph


def write_edge_list(
    path: str | Path,
    edges: np.ndarray,
    labels: Optional[Sequence[str]],
    num_nodes: Optional[int] = None,
) -> None:
    """Write edges using original tokens, plus a vocabulary sidecar.

    Without labels, dense ids double as tokens; ``num_nodes`` then sizes the
    sidecar so isolated nodes stay part of the universe.
    """
    if labels is None:
        if num_nodes is None:
            raise DataError("write_edge_list needs labels or num_nodes")
        labels = [str(k) for k in range(num_nodes)]
    with atomic_open(path, "w") as out:
        for i, j in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
            out.write(f"{labels[i]}\t{labels[j]}\n")
    write_vocab(path, labels)
