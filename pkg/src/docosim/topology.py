"""Graph topologies, gossip mixing matrices, and spectral block parameters.

Nodes are numbered 1..N in every external format (edge lists, CSV); dense
numpy arrays are used throughout since the networks of interest have at most
a few hundred nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "CommMatrix",
    "build_graph",
    "laplacian",
    "comm_matrix",
    "spectral_gap_report",
    "block_params",
    "save_edge_list",
    "load_edge_list",
    "save_comm_csv",
]

TOPOLOGY_KINDS = ("complete", "cycle", "grid", "custom")

ROW_SUM_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph on nodes 1..node_count.

    Edges are stored as a frozenset of (u, v) pairs with u < v; self-loops
    and duplicates are rejected on construction.
    """

    node_count: int
    edges: frozenset
    kind: str = "custom"

    def __post_init__(self):
        n = self.node_count
        if n < 1:
            raise ValueError(f"node_count must be >= 1, got {n}")
        norm = set()
        for e in self.edges:
            u, v = e
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (1 <= u <= n and 1 <= v <= n):
                raise ValueError(f"edge {e} out of range for {n} nodes")
            norm.add((min(u, v), max(u, v)))
        if len(norm) != len(self.edges):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", frozenset(norm))
        if not self._connected():
            raise ValueError("graph is not connected")

    def _connected(self) -> bool:
        n = self.node_count
        if n == 1:
            return True
        adj = {u: [] for u in range(1, n + 1)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {1}
        stack = [1]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == n

    def neighbors(self, u: int) -> list:
        """Sorted neighbor list of node u (1-based)."""
        out = [v for (a, v) in self.edges if a == u] + [a for (a, v) in self.edges if v == u]
        return sorted(out)

    @staticmethod
    def trivial() -> "Graph":
        """Single-node graph (used for centralized reductions)."""
        return Graph(1, frozenset(), "complete")


@dataclass(frozen=True)
class CommMatrix:
    """Doubly-stochastic gossip matrix with its spectral block parameters.

    ``matrix`` is I - c*Lap(G); ``sigma2`` its second-largest eigenvalue;
    ``theta`` the gossip acceleration coefficient; ``block_len`` the number
    of gossip rounds per decision block; ``contraction_base`` the per-step
    contraction factor of the accelerated gossip deviation.
    """

    graph: Graph
    matrix: np.ndarray
    mixing_c: float
    sigma2: float
    theta: float
    block_len: int
    contraction_base: float

    @property
    def node_count(self) -> int:
        return self.graph.node_count


def build_graph(kind: str, node_count: int) -> Graph:
    """Build one of the named topologies on node_count >= 2 nodes.

    complete: all pairs connected; cycle: node v joined to v-1 and v+1
    (wrapping); grid: non-wraparound 4-neighbor square lattice, requiring
    node_count to be a perfect square.
    """
    n = node_count
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if kind == "complete":
        edges = {(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)}
    elif kind == "cycle":
        edges = {(u, u + 1) for u in range(1, n)}
        edges.add((1, n))
    elif kind == "grid":
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError(f"grid needs a perfect-square node count, got {n}")
        edges = set()
        for r in range(side):
            for col in range(side):
                u = r * side + col + 1
                if col + 1 < side:
                    edges.add((u, u + 1))
                if r + 1 < side:
                    edges.add((u, u + side))
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    return Graph(n, frozenset(edges), kind)


def laplacian(g: Graph) -> np.ndarray:
    """Graph Laplacian: degrees on the diagonal, -1 on edges."""
    n = g.node_count
    lap = np.zeros((n, n))
    for u, v in g.edges:
        lap[u - 1, v - 1] = -1.0
        lap[v - 1, u - 1] = -1.0
        lap[u - 1, u - 1] += 1.0
        lap[v - 1, v - 1] += 1.0
    return lap


def _sorted_eigvals(sym: np.ndarray) -> np.ndarray:
    # eigh returns ascending eigenvalues for symmetric input
    return np.linalg.eigvalsh(sym)


def comm_matrix(g: Graph, c="auto") -> CommMatrix:
    """Mixing matrix I - c*Lap(G) with spectral block parameters attached.

    ``c="auto"`` picks c = 1/N. Any explicit c must lie in (0, 1/sigma1]
    where sigma1 is the largest Laplacian eigenvalue; larger values would
    break positive semi-definiteness.
    """
    n = g.node_count
    lap = laplacian(g)
    lap_eigs = _sorted_eigvals(lap)
    sigma1_lap = float(lap_eigs[-1])
    if c == "auto":
        c_val = 1.0 / n
    else:
        c_val = float(c)
    if not (c_val > 0.0):
        raise ValueError(f"c must be positive, got {c_val}")
    if sigma1_lap > 0 and c_val > 1.0 / sigma1_lap + 1e-15:
        raise ValueError(f"c={c_val} exceeds 1/sigma1(Lap) = {1.0 / sigma1_lap}")

    w = np.eye(n) - c_val * lap
    w_eigs = _sorted_eigvals(w)
    sigma2 = 0.0 if n == 1 else float(w_eigs[-2])
    if sigma2 >= 1.0 - 1e-13:
        raise ValueError("sigma2(W) is 1: graph is effectively disconnected")
    if float(w_eigs[0]) < -PSD_TOL:
        raise ValueError(f"W not positive semi-definite (min eig {w_eigs[0]})")
    _validate_w(w, g)
    sigma2 = max(sigma2, 0.0)

    params = block_params(sigma2, n)
    return CommMatrix(
        graph=g,
        matrix=w,
        mixing_c=c_val,
        sigma2=sigma2,
        theta=params["theta"],
        block_len=params["B"],
        contraction_base=params["b"],
    )


def _validate_w(w: np.ndarray, g: Graph):
    n = g.node_count
    if not np.allclose(w, w.T, atol=1e-12, rtol=0):
        raise ValueError("W is not symmetric")
    if np.any(w < -1e-15):
        raise ValueError("W has negative entries")
    rows = w.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
        raise ValueError("W rows do not sum to 1")
    mask = np.zeros((n, n), dtype=bool)
    for u, v in g.edges:
        mask[u - 1, v - 1] = True
        mask[v - 1, u - 1] = True
    np.fill_diagonal(mask, True)
    if np.any(w[~mask] != 0.0):
        raise ValueError("W has nonzero entries off the edge set")


def block_params(sigma2: float, node_count: int) -> dict:
    """Gossip acceleration coefficient, block length, and contraction base.

    theta = 1/(1 + sqrt(1 - sigma2^2));
    B = ceil(sqrt(2) * ln(N * sqrt(14 N)) / ((sqrt(2) - 1) * sqrt(1 - sigma2)));
    b = 1 - (1 - 1/sqrt(2)) * sqrt(1 - sigma2).
    The choice of B guarantees b^B <= 1/(N * sqrt(14 N)).
    """
    if not (0.0 <= sigma2 < 1.0):
        raise ValueError(f"sigma2 must be in [0, 1), got {sigma2}")
    n = node_count
    if n < 1:
        raise ValueError("node_count must be positive")
    theta = 1.0 / (1.0 + math.sqrt(1.0 - sigma2 * sigma2))
    b = 1.0 - (1.0 - 1.0 / math.sqrt(2.0)) * math.sqrt(1.0 - sigma2)
    big_b = math.ceil(
        math.sqrt(2.0) * math.log(n * math.sqrt(14.0 * n))
        / ((math.sqrt(2.0) - 1.0) * math.sqrt(1.0 - sigma2))
    )
    big_b = max(big_b, 1)
    return {"theta": theta, "B": big_b, "b": b}


def spectral_gap_report(cm: CommMatrix) -> dict:
    """sigma2, the spectral gap, and its inverse quartic root."""
    gap = 1.0 - cm.sigma2
    return {
        "sigma2": cm.sigma2,
        "gap": gap,
        "gap_quartic_inverse": gap ** -0.25,
    }


def save_edge_list(g: Graph, path):
    """Write `N` then one `u v` line per edge."""
    with open(path, "w") as fh:
        fh.write(f"{g.node_count}\n")
        for u, v in sorted(g.edges):
            fh.write(f"{u} {v}\n")


def load_edge_list(path, kind: str = "custom") -> Graph:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    n = int(lines[0])
    edges = set()
    for ln in lines[1:]:
        u, v = ln.split()
        edges.add((int(u), int(v)))
    return Graph(n, frozenset(edges), kind)


def save_comm_csv(cm: CommMatrix, path):
    """One CSV row of W per node, for inspection."""
    with open(path, "w") as fh:
        for row in cm.matrix:
            fh.write(",".join(repr(x) for x in row) + "\n")
