"""Graphs, Laplacians and bandwidth-reducing node reordering.

Node indices are 1-based everywhere in the public API so that edge lists
can be copied verbatim from tables; matrices are plain ``numpy`` arrays
indexed from 0 as usual.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import Disconnected, DuplicateEdge, IndexOutOfRange, SizeMismatch, ZeroDegreeNode

LAPLACIAN_VARIANTS = (
    "unnormalized-constant",
    "general-weighted",
    "normalized-symmetric",
    "normalized-random-walk",
)


@dataclass(frozen=True)
class Graph:
    """Weighted graph on nodes ``1..n``.

    ``edges`` holds ``(source, target, weight)`` triples. An edge ``(u, v, w)``
    is matrix entry ``[u, v] = w``; undirected edges are stored once with
    ``u < v`` (self-loops keep ``u == v``) and mirrored by :meth:`adjacency`.
    """

    n: int
    directed: bool
    edges: tuple[tuple[int, int, float], ...]

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Sorted neighbour lists of the undirected skeleton, self-loops dropped.

        ``neighbors[k - 1]`` lists the neighbours of node ``k``.
        """
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v, _ in self.edges:
            if u != v:
                nbrs[u - 1].add(v)
                nbrs[v - 1].add(u)
        return tuple(tuple(sorted(s)) for s in nbrs)

    @property
    def degrees(self) -> np.ndarray:
        """Neighbour counts in the undirected skeleton."""
        return np.array([len(nb) for nb in self.neighbors], dtype=int)

    def adjacency(self, self_loops: bool = True) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v, w in self.edges:
            if u == v and not self_loops:
                continue
            a[u - 1, v - 1] = w
            if not self.directed:
                a[v - 1, u - 1] = w
        return a

    def skeleton(self) -> np.ndarray:
        """Boolean adjacency of the undirected skeleton without self-loops."""
        s = np.zeros((self.n, self.n), dtype=bool)
        for k, nb in enumerate(self.neighbors):
            for j in nb:
                s[k, j - 1] = True
        return s

    def relabel(self, p: "Permutation") -> "Graph":
        """Return the graph with node ``p.order[i]`` renamed to ``i + 1``."""
        if p.n != self.n:
            raise SizeMismatch(f"permutation of size {p.n} for graph with {self.n} nodes")
        new = p.inverse_order
        edges = [(new[u - 1], new[v - 1], w) for u, v, w in self.edges]
        return build_graph(self.n, edges, directed=self.directed)


def build_graph(
    n: int, edges: Iterable[Sequence[float]], directed: bool = False
) -> Graph:
    """Validate and canonicalise an edge list.

    Edges may be ``(u, v)`` pairs (unit weight) or ``(u, v, w)`` triples.
    """
    if n < 1:
        raise ValueError(f"node count must be positive, got {n}")
    seen: set[tuple[int, int]] = set()
    out: list[tuple[int, int, float]] = []
    for e in edges:
        if len(e) == 2:
            u, v, w = e[0], e[1], 1.0
        elif len(e) == 3:
            u, v, w = e
        else:
            raise ValueError(f"edge must have 2 or 3 fields, got {e!r}")
        if int(u) != u or int(v) != v:
            raise IndexOutOfRange(f"non-integer node index in edge {e!r}")
        u, v, w = int(u), int(v), float(w)
        if not (1 <= u <= n and 1 <= v <= n):
            raise IndexOutOfRange(f"edge ({u}, {v}) outside 1..{n}")
        if not math.isfinite(w):
            raise ValueError(f"edge ({u}, {v}) has non-finite weight {w}")
        if not directed and u > v:
            u, v = v, u
        if (u, v) in seen:
            raise DuplicateEdge(f"edge ({u}, {v}) listed twice")
        seen.add((u, v))
        out.append((u, v, w))
    out.sort(key=lambda t: (t[0], t[1]))
    return Graph(n=n, directed=directed, edges=tuple(out))


def path_graph(n: int) -> Graph:
    return build_graph(n, [(k, k + 1) for k in range(1, n)])


def complete_graph(n: int) -> Graph:
    return build_graph(n, [(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)])


def star_graph(n: int, center: int) -> Graph:
    return build_graph(n, [(center, k) for k in range(1, n + 1) if k != center])


def _bfs_levels(neighbors: Sequence[Sequence[int]], root: int) -> list[list[int]]:
    """Level structure rooted at ``root`` (1-based), over reachable nodes."""
    seen = {root}
    levels = [[root]]
    while True:
        nxt = []
        for u in levels[-1]:
            for v in neighbors[u - 1]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if not nxt:
            return levels
        levels.append(sorted(nxt))


def is_connected(g: Graph) -> bool:
    """True iff every node is reachable from node 1 in the undirected skeleton."""
    reached = sum(len(level) for level in _bfs_levels(g.neighbors, 1))
    return reached == g.n


def is_strongly_connected(g: Graph) -> bool:
    """Strong connectivity of the directed edge structure (self-loops ignored)."""
    if not g.directed:
        return is_connected(g)
    fwd: list[list[int]] = [[] for _ in range(g.n)]
    bwd: list[list[int]] = [[] for _ in range(g.n)]
    for u, v, _ in g.edges:
        if u != v:
            fwd[u - 1].append(v)
            bwd[v - 1].append(u)
    return all(
        sum(len(level) for level in _bfs_levels(adj, 1)) == g.n for adj in (fwd, bwd)
    )


def random_connected_graph(n: int, p: float, seed: int, max_tries: int = 10_000) -> Graph:
    """Erdos-Renyi G(n, p), resampled with the same generator until connected."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"edge probability must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        mask = rng.random(iu.size) < p
        g = build_graph(n, [(int(i) + 1, int(j) + 1) for i, j in zip(iu[mask], ju[mask])])
        if is_connected(g):
            return g
    raise Disconnected(f"no connected G({n}, {p}) sample in {max_tries} tries")


def suite_edge_probability(n: int) -> float:
    """Edge probability used by the random test suites: twice the connectivity threshold."""
    return min(1.0, 2.0 * math.log(n) / n)


def random_graph_suite(count: int, seed: int, n_min: int = 3, n_max: int = 30) -> list[Graph]:
    """Seeded family of connected graphs with ``n_min <= n <= n_max`` nodes."""
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        graphs.append(
            random_connected_graph(n, suite_edge_probability(n), int(rng.integers(2**31)))
        )
    return graphs


def laplacian(g: Graph, variant: str = "unnormalized-constant") -> np.ndarray:
    """Laplacian matrix of an undirected graph; rows always sum to zero.

    ``unnormalized-constant`` uses unit weights (diagonal = neighbour count),
    ``general-weighted`` uses the edge weights, and the two normalized variants
    rescale the weighted Laplacian by its diagonal ``D``: ``D^-1/2 L D^-1/2``
    and ``D^-1 L``. Self-loops never enter a Laplacian.
    """
    if variant not in LAPLACIAN_VARIANTS:
        raise ValueError(f"unknown Laplacian variant {variant!r}; expected one of {LAPLACIAN_VARIANTS}")
    if g.directed:
        raise ValueError("Laplacians are built for undirected graphs only; pass a right Laplacian matrix directly")
    if variant == "unnormalized-constant":
        a = g.skeleton().astype(float)
    else:
        a = g.adjacency(self_loops=False)
    lap = np.diag(a.sum(axis=1)) - a
    if variant in ("unnormalized-constant", "general-weighted"):
        return lap
    d = np.diag(lap).copy()
    if np.any(d <= 0):
        bad = [int(k) + 1 for k in np.flatnonzero(d <= 0)]
        raise ZeroDegreeNode(f"nodes {bad} have zero degree")
    if variant == "normalized-symmetric":
        s = 1.0 / np.sqrt(d)
        return s[:, None] * lap * s[None, :]
    return lap / d[:, None]


# --- orderings -------------------------------------------------------------


@dataclass(frozen=True)
class Permutation:
    """Node ordering: ``order[i]`` is the old index placed at new position ``i + 1``."""

    order: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.order) != list(range(1, len(self.order) + 1)):
            raise ValueError(f"not a permutation of 1..{len(self.order)}: {self.order}")

    @property
    def n(self) -> int:
        return len(self.order)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @property
    def inverse_order(self) -> tuple[int, ...]:
        """``inverse_order[old - 1]`` is the new index of node ``old``."""
        inv = [0] * self.n
        for new, old in enumerate(self.order, start=1):
            inv[old - 1] = new
        return tuple(inv)

    def inverse(self) -> "Permutation":
        return Permutation(self.inverse_order)

    def matrix(self) -> np.ndarray:
        """Permutation matrix ``P`` with ``permute(m, p) == P @ m @ P.T``."""
        p = np.zeros((self.n, self.n))
        p[np.arange(self.n), np.array(self.order) - 1] = 1.0
        return p

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Reorder a node vector into the new numbering."""
        return np.asarray(x)[np.array(self.order) - 1]

    def restore(self, x: np.ndarray) -> np.ndarray:
        """Map a vector in the new numbering back to the original one."""
        out = np.empty_like(np.asarray(x))
        out[np.array(self.order) - 1] = x
        return out


def permute(m: np.ndarray, p: Permutation) -> np.ndarray:
    """Symmetric reordering ``P m P^T``: ``result[i, j] = m[order[i], order[j]]``."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SizeMismatch(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] != p.n:
        raise SizeMismatch(f"permutation of size {p.n} for a {m.shape[0]}x{m.shape[0]} matrix")
    idx = np.array(p.order) - 1
    return m[np.ix_(idx, idx)]


def bandwidth(m: np.ndarray) -> int:
    """Largest ``|i - j|`` over nonzero off-diagonal entries."""
    i, j = np.nonzero(np.asarray(m))
    return int(np.abs(i - j).max()) if i.size else 0


def profile(m: np.ndarray) -> int:
    """Envelope size: sum over rows of the distance to the leftmost nonzero."""
    nz = np.asarray(m) != 0
    total = 0
    for i in range(nz.shape[0]):
        cols = np.flatnonzero(nz[i, : i + 1])
        if cols.size:
            total += i - int(cols[0])
    return total


def _pseudo_peripheral(neighbors: Sequence[Sequence[int]], degrees: np.ndarray, start: int) -> int:
    """George-Liu search: hop to a min-degree node of the last level while eccentricity grows."""
    root = start
    levels = _bfs_levels(neighbors, root)
    while True:
        cand = min(levels[-1], key=lambda v: (degrees[v - 1], v))
        cand_levels = _bfs_levels(neighbors, cand)
        if len(cand_levels) <= len(levels):
            return root
        root, levels = cand, cand_levels


def reverse_cuthill_mckee(g: Graph) -> Permutation:
    """Plain RCM ordering of the undirected skeleton.

    The start node is pseudo-peripheral; neighbours are visited by increasing
    degree with ties broken by the lower original index. Every node except the
    last one ends up with at least one higher-numbered neighbour.
    """
    if not is_connected(g):
        raise Disconnected("RCM ordering requires a connected graph")
    nbrs = g.neighbors
    deg = g.degrees
    first = min(range(1, g.n + 1), key=lambda v: (deg[v - 1], v))
    root = _pseudo_peripheral(nbrs, deg, first)
    order = [root]
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in sorted((v for v in nbrs[u - 1] if v not in seen), key=lambda v: (deg[v - 1], v)):
            seen.add(v)
            order.append(v)
            queue.append(v)
    return Permutation(tuple(reversed(order)))


def rcm_order(g: Graph, keep_input_if_better: bool = True) -> Permutation:
    """Reverse Cuthill-McKee ordering with a no-regression guard.

    RCM is a heuristic and can lose to a lucky input numbering; with
    ``keep_input_if_better`` the identity is returned in that case so the
    bandwidth never grows. Exact-consensus factors need the pure RCM
    structure and call this with ``keep_input_if_better=False``.
    """
    p = reverse_cuthill_mckee(g)
    if keep_input_if_better:
        s = g.skeleton()
        if bandwidth(s) < bandwidth(permute(s, p)):
            return Permutation.identity(g.n)
    return p


def lower_support(m: np.ndarray) -> np.ndarray:
    """Boolean ``n x (n-1)`` lower-triangular support including the diagonal."""
    m = np.asarray(m)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise SizeMismatch(f"expected a square matrix, got shape {m.shape}")
    if n < 2:
        raise SizeMismatch("lower support needs at least two nodes")
    pat = np.tril(m != 0)[:, : n - 1]
    pat[np.arange(n - 1), np.arange(n - 1)] = True
    return pat
