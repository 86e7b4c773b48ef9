"""Undirected communication graphs: construction, validation, sampling, I/O.

Vertices are 0-indexed internally and 1-indexed in the text file format and
all human-facing output. Graphs are immutable after construction (the edge
and degree arrays are set read-only) and safe to share across threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Graph",
    "GraphDiagnostics",
    "make_graph",
    "make_complete",
    "make_grid2d",
    "make_watts_strogatz",
    "diagnose",
    "sample_edge",
    "laplacian",
    "adjacency",
    "read_graph_file",
    "write_graph_file",
]

logger = logging.getLogger("gosta_sim.graph")


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph.

    Attributes
    ----------
    n : int
        Number of vertices, labeled 0..n-1 internally.
    edges : np.ndarray, shape (m, 2), int64
        Unordered edges stored canonically as (i, j) with i < j, sorted
        lexicographically, no duplicates, no self-loops.
    degrees : np.ndarray, shape (n,), int64
        Number of incident edges per vertex.
    """

    n: int
    edges: np.ndarray
    degrees: np.ndarray

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"graph needs at least one vertex, got n={self.n}")
        e = self.edges
        if e.ndim != 2 or e.shape[1] != 2:
            raise ValueError("edges must be an (m, 2) array")
        if e.shape[0] > 0:
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range [0, n)")
            if (e[:, 0] == e[:, 1]).any():
                raise ValueError("self-loops are not allowed")
            if (e[:, 0] > e[:, 1]).any():
                raise ValueError("edges must be stored as (i, j) with i < j")
            keys = e[:, 0].astype(np.int64) * self.n + e[:, 1]
            if (np.diff(keys) <= 0).any():
                raise ValueError("edges must be sorted and free of duplicates")
        deg = np.bincount(e.ravel(), minlength=self.n)
        if not np.array_equal(deg, self.degrees):
            raise ValueError("degrees inconsistent with edge list")
        e.flags.writeable = False
        self.degrees.flags.writeable = False

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted array of vertices adjacent to v."""
        e = self.edges
        out = np.concatenate([e[e[:, 0] == v, 1], e[e[:, 1] == v, 0]])
        out.sort()
        return out


@dataclass(frozen=True)
class GraphDiagnostics:
    connected: bool
    bipartite: bool


def make_graph(n: int, edges) -> Graph:
    """Build a Graph from any iterable of vertex pairs, canonicalizing order."""
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                   dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    e = np.column_stack([lo, hi])
    if e.shape[0] > 0:
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
    deg = np.bincount(e.ravel(), minlength=n) if n > 0 else np.zeros(0, np.int64)
    return Graph(n=n, edges=e, degrees=deg.astype(np.int64))


def make_complete(n: int) -> Graph:
    """Complete graph on n >= 2 vertices: n(n-1)/2 edges, all degrees n-1."""
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got n={n}")
    i, j = np.triu_indices(n, k=1)
    e = np.column_stack([i, j]).astype(np.int64)
    deg = np.full(n, n - 1, dtype=np.int64)
    return Graph(n=n, edges=e, degrees=deg)


def make_grid2d(rows: int, cols: int) -> Graph:
    """2-D lattice without wraparound.

    Interior vertices have degree 4, border vertices 3, corners 2;
    the edge count is rows*(cols-1) + cols*(rows-1).
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError(f"grid needs rows*cols >= 2, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return make_graph(rows * cols, edges)


def _ws_base_ring(n: int, k: int) -> set[tuple[int, int]]:
    # Ring lattice with floor(k/2) neighbors per side. For odd k, one extra
    # ring edge is added from every second vertex at offset floor(k/2)+1,
    # raising the average degree from k-1 to k.
    half = k // 2
    edges: set[tuple[int, int]] = set()
    for v in range(n):
        for off in range(1, half + 1):
            u = (v + off) % n
            edges.add((min(v, u), max(v, u)))
    if k % 2 == 1:
        off = half + 1
        for v in range(0, n, 2):
            u = (v + off) % n
            if u != v:
                edges.add((min(v, u), max(v, u)))
    return edges


def make_watts_strogatz(n: int, k: int, p: float, rng: np.random.Generator,
                        max_retries: int = 100) -> Graph:
    """Small-world graph: ring lattice of mean degree k, each edge rewired
    independently with probability p.

    Rewiring keeps one endpoint fixed and redraws the other uniformly among
    non-adjacent vertices, so no self-loops or duplicate edges appear and the
    edge count is preserved. Disconnected outputs are rejected and regenerated
    up to ``max_retries`` times, then an error is raised.
    """
    if k < 2 or k >= n:
        raise ValueError(f"need n > k >= 2, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"rewiring probability must be in [0, 1], got {p}")
    for _ in range(max_retries):
        edge_set = _ws_base_ring(n, k)
        adjacency_sets: dict[int, set[int]] = {v: set() for v in range(n)}
        for a, b in edge_set:
            adjacency_sets[a].add(b)
            adjacency_sets[b].add(a)
        for a, b in sorted(edge_set):
            if rng.random() >= p:
                continue
            candidates = [w for w in range(n)
                          if w != a and w not in adjacency_sets[a]]
            if not candidates:
                continue
            w = candidates[int(rng.integers(0, len(candidates)))]
            edge_set.discard((a, b))
            adjacency_sets[a].discard(b)
            adjacency_sets[b].discard(a)
            edge_set.add((min(a, w), max(a, w)))
            adjacency_sets[a].add(w)
            adjacency_sets[w].add(a)
        g = make_graph(n, sorted(edge_set))
        if diagnose(g).connected:
            return g
    raise ValueError(
        f"failed to generate a connected Watts-Strogatz graph "
        f"(n={n}, k={k}, p={p}) in {max_retries} attempts"
    )


def _adjacency_lists(g: Graph) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(g.n)]
    for a, b in g.edges:
        adj[int(a)].append(int(b))
        adj[int(b)].append(int(a))
    return adj


def diagnose(g: Graph) -> GraphDiagnostics:
    """Connectivity and bipartiteness via a single BFS 2-coloring sweep."""
    adj = _adjacency_lists(g)
    color = np.full(g.n, -1, dtype=np.int8)
    bipartite = True
    components = 0
    for start in range(g.n):
        if color[start] >= 0:
            continue
        components += 1
        color[start] = 0
        queue = [start]
        while queue:
            v = queue.pop()
            for u in adj[v]:
                if color[u] < 0:
                    color[u] = 1 - color[v]
                    queue.append(u)
                elif color[u] == color[v]:
                    bipartite = False
    return GraphDiagnostics(connected=(components == 1), bipartite=bipartite)


def sample_edge(g: Graph, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one edge uniformly at random; each edge has probability 1/m."""
    m = g.num_edges
    if m == 0:
        raise ValueError("cannot sample an edge from a graph with no edges")
    idx = int(rng.integers(0, m))
    return int(g.edges[idx, 0]), int(g.edges[idx, 1])


def adjacency(g: Graph) -> np.ndarray:
    """Dense adjacency matrix as float64."""
    a = np.zeros((g.n, g.n))
    a[g.edges[:, 0], g.edges[:, 1]] = 1.0
    a[g.edges[:, 1], g.edges[:, 0]] = 1.0
    return a


def laplacian(g: Graph) -> np.ndarray:
    """Dense combinatorial Laplacian (degree matrix minus adjacency).

    Built from integer counts, so it is exactly symmetric and its rows sum
    to exactly zero in float64.
    """
    lap = -adjacency(g)
    lap[np.arange(g.n), np.arange(g.n)] = g.degrees.astype(np.float64)
    return lap


def warn_if_unsuitable(g: Graph, context: str) -> GraphDiagnostics:
    """Raise on disconnected graphs; log a warning on bipartite ones.

    Bipartite graphs (e.g. 2-D grids) are accepted because they are useful
    test topologies, but averaging-based protocols lack the strict spectral
    gap guarantee there, so the caller is warned rather than stopped.
    """
    diag = diagnose(g)
    if not diag.connected:
        raise ValueError(f"{context}: graph is disconnected; estimates cannot "
                         "converge to a global value")
    if diag.bipartite:
        logger.warning("%s: graph is bipartite; convergence guarantees are "
                       "weaker on bipartite topologies", context)
    return diag


def write_graph_file(g: Graph, path: str | Path) -> None:
    """Write the plain-text format: first line ``n m``, then one line ``i j``
    per edge with 1-indexed endpoints, LF line endings."""
    lines = [f"{g.n} {g.num_edges}"]
    lines.extend(f"{int(a) + 1} {int(b) + 1}" for a, b in g.edges)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_graph_file(path: str | Path) -> Graph:
    """Read the plain-text graph format written by :func:`write_graph_file`."""
    text = Path(path).read_text(encoding="ascii")
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: expected a header line 'n m'")
    n, m = int(tokens[0]), int(tokens[1])
    if len(tokens) != 2 + 2 * m:
        raise ValueError(f"{path}: expected {m} edge lines, found "
                         f"{(len(tokens) - 2) // 2}")
    pairs = np.array(tokens[2:], dtype=np.int64).reshape(m, 2)
    if m > 0 and (pairs.min() < 1 or pairs.max() > n):
        raise ValueError(f"{path}: edge endpoint outside [1, {n}]")
    return make_graph(n, pairs - 1)
