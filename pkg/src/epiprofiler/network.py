"""Transport-network substrate: graph type, random generation, hop distances,
and the degree-weighted mobility law used by the simulator."""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import Sequence

import numpy as np

UNREACHABLE = -1  # hop-distance sentinel; never a large stand-in integer


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Network:
    """Undirected transport network over region nodes.

    The adjacency matrix must be square with entries in {0, 1}, symmetric and
    zero on the diagonal. Labels default to "n0".."n{N-1}". Instances are
    immutable and safe to share across workers.
    """

    adjacency: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        n = adj.shape[0]
        if n < 1:
            raise ValueError("network needs at least one node")
        bad = np.argwhere((adj != 0) & (adj != 1))
        if bad.size:
            i, j = bad[0]
            raise ValueError(f"adjacency[{i}][{j}] = {adj[i, j]!r} is not 0 or 1")
        adj = adj.astype(np.int64)
        diag = np.flatnonzero(np.diagonal(adj))
        if diag.size:
            i = diag[0]
            raise ValueError(f"adjacency[{i}][{i}] must be 0 (no self-loops)")
        asym = np.argwhere(adj != adj.T)
        if asym.size:
            i, j = asym[0]
            raise ValueError(
                f"adjacency must be symmetric: adjacency[{i}][{j}]={adj[i, j]} "
                f"but adjacency[{j}][{i}]={adj[j, i]}"
            )
        object.__setattr__(self, "adjacency", _readonly(adj))
        labels = self.labels
        if labels is None:
            labels = tuple(f"n{i}" for i in range(n))
        else:
            labels = tuple(str(x) for x in labels)
            if len(labels) != n:
                raise ValueError(f"expected {n} labels, got {len(labels)}")
            if len(set(labels)) != n:
                raise ValueError("node labels must be unique")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])


@dataclass(frozen=True)
class DistanceMatrix:
    """All-pairs hop counts; disconnected pairs hold UNREACHABLE."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.int64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        object.__setattr__(self, "d", _readonly(d))

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def reachable(self) -> np.ndarray:
        return self.d >= 0


@dataclass(frozen=True)
class MobilityMatrix:
    """Per-link travel rates (1/time); row sums equal the total mobility rate
    for every node with at least one neighbor, and are zero for isolated nodes."""

    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"mobility matrix must be square, got shape {g.shape}")
        object.__setattr__(self, "g", _readonly(g))

    @property
    def n(self) -> int:
        return self.g.shape[0]


def generate_erdos_renyi(n: int, mean_degree: float, seed) -> Network:
    """Draw a G(n, p) random network with p = mean_degree / (n - 1).

    Each unordered node pair is linked independently; the draw is
    deterministic for a fixed seed. Disconnected results are kept as-is.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError(f"node count must be an integer >= 2, got {n!r}")
    if not 0 < mean_degree < n:
        raise ValueError(f"mean_degree must lie in (0, {n}), got {mean_degree!r}")
    p = mean_degree / (n - 1)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    present = rng.random(iu.size) < p
    adj = np.zeros((n, n), dtype=np.int64)
    adj[iu[present], ju[present]] = 1
    adj |= adj.T
    return Network(adj)


def hop_distances(net: Network) -> DistanceMatrix:
    """Breadth-first all-pairs shortest hop counts."""
    n = net.n
    neighbor_lists = [net.neighbors(i).tolist() for i in range(n)]
    d = np.full((n, n), UNREACHABLE, dtype=np.int64)
    for s in range(n):
        row = d[s]
        row[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            du = row[u]
            for v in neighbor_lists[u]:
                if row[v] < 0:
                    row[v] = du + 1
                    queue.append(v)
    return DistanceMatrix(d)


def mobility_matrix(net: Network, gamma: float) -> MobilityMatrix:
    """Distribute the total per-node mobility rate over links.

    The rate from node i to neighbor j is proportional to sqrt(k_i * k_j)
    over the link weights in row i, scaled so each non-isolated row sums to
    gamma. Isolated nodes get an all-zero row.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    k = net.degrees().astype(float)
    w = net.adjacency * np.sqrt(np.outer(k, k))
    row_sums = w.sum(axis=1)
    scale = np.divide(gamma, row_sums, out=np.zeros_like(row_sums), where=row_sums > 0)
    return MobilityMatrix(w * scale[:, None])


def is_interchangeable(dist: DistanceMatrix, nodes: Sequence[int]) -> bool:
    """True when every permutation of the given nodes leaves the distance
    matrix unchanged, i.e. the nodes occupy interchangeable positions."""
    d = dist.d
    n = dist.n
    nodes = list(nodes)
    for perm in permutations(nodes):
        full = np.arange(n)
        full[nodes] = perm
        if not np.array_equal(d[np.ix_(full, full)], d):
            return False
    return True


def save_adjacency(net: Network, path) -> None:
    """Write the adjacency CSV: label row, then one row per node of
    label followed by the 0/1 entries."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(net.labels)
        for i, label in enumerate(net.labels):
            writer.writerow([label] + [str(int(x)) for x in net.adjacency[i]])


def load_adjacency(path) -> Network:
    """Load and validate an adjacency CSV written by :func:`save_adjacency`.

    Violations of the 0/1, symmetry, or zero-diagonal rules are hard errors
    naming the offending cell.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty adjacency file")
    labels = [c.strip() for c in rows[0]]
    n = len(labels)
    if len(rows) != n + 1:
        raise ValueError(f"{path}: expected {n} node rows after the label row, got {len(rows) - 1}")
    adj = np.zeros((n, n), dtype=np.int64)
    for i, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise ValueError(f"{path}: row for {labels[i]!r} has {len(row)} cells, expected {n + 1}")
        if row[0].strip() != labels[i]:
            raise ValueError(f"{path}: row {i + 2} is labelled {row[0]!r}, expected {labels[i]!r}")
        for j, cell in enumerate(row[1:]):
            text = cell.strip()
            if text not in ("0", "1"):
                raise ValueError(f"{path}: cell ({labels[i]}, {labels[j]}) = {cell!r} is not 0 or 1")
            adj[i, j] = int(text)
    try:
        return Network(adj, labels=labels)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
