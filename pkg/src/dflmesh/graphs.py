"""Undirected simple graphs and the topology generators used by the lab.

Nodes are integers 0..n-1.  A graph is stored as a frozen set of canonical
(i < j) edge pairs plus derived adjacency lists; dense adjacency/Laplacian
matrices are materialized on demand and only consumed by the spectral and
mixing code.

Generators cover the experiment families: ring, complete, Erdos-Renyi, and
the d-regular construction obtained as a union of d/2 independent random
rings (each ring spans every node in a random circular order).  Pairs that
end up adjacent in more than one ring are rewired through a seeded pool so
the target degree is restored without duplicate edges.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DisconnectedGraphError

__all__ = [
    "Graph",
    "make_ring",
    "make_complete",
    "make_erdos_renyi",
    "make_regular_expander",
    "make_ring_with_matching",
    "is_connected",
    "communication_cost",
    "repair_duplicate_pool",
]


def _canonical(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


class Graph:
    """Immutable undirected simple graph on nodes 0..n-1."""

    __slots__ = ("n", "edges", "_adj")

    def __init__(self, n: int, edges):
        if n < 1:
            raise ValueError(f"graph needs at least one node, got n={n}")
        seen: set[tuple[int, int]] = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            e = _canonical(int(i), int(j))
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
        self.n = int(n)
        self.edges = frozenset(seen)
        adj: list[list[int]] = [[] for _ in range(n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        self._adj = tuple(tuple(sorted(a)) for a in adj)

    # -- basic queries ----------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=np.int64)

    def has_edge(self, i: int, j: int) -> bool:
        return _canonical(i, j) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    # -- dense views -------------------------------------------------------

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a

    def laplacian_matrix(self) -> np.ndarray:
        """Combinatorial Laplacian D - A."""
        lap = -self.adjacency_matrix()
        lap[np.diag_indices(self.n)] = self.degrees().astype(np.float64)
        return lap

    # -- serialization -----------------------------------------------------

    def to_edge_list(self) -> str:
        """Text form: header 'n <edge count>' then one 'i j' line per edge."""
        lines = [f"{self.n} {self.num_edges}"]
        lines.extend(f"{i} {j}" for i, j in self.sorted_edges())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "Graph":
        rows = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
        if not rows:
            raise ValueError("empty edge-list text")
        head = rows[0].split()
        if len(head) != 2:
            raise ValueError(f"bad edge-list header: {rows[0]!r}")
        n, m = int(head[0]), int(head[1])
        if len(rows) - 1 != m:
            raise ValueError(f"header promises {m} edges, found {len(rows) - 1}")
        edges = []
        for ln in rows[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise ValueError(f"bad edge line: {ln!r}")
            edges.append((int(parts[0]), int(parts[1])))
        return cls(n, edges)

    def to_json_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.sorted_edges()]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Graph":
        return cls(int(obj["n"]), [tuple(e) for e in obj["edges"]])

    # -- equality ------------------------------------------------------------

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and self.edges == other.edges
        )

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"


# -- generators -------------------------------------------------------------


def make_ring(n: int) -> Graph:
    """Cycle 0-1-...-(n-1)-0; needs n >= 3 for a simple cycle."""
    if n < 3:
        raise ValueError(f"ring needs n >= 3, got {n}")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def make_complete(n: int) -> Graph:
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def make_erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Each of the n(n-1)/2 pairs is an edge with probability p.

    The sample may be disconnected; callers that need connectivity should
    check and resample (see ``is_connected``).
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"edge probability must be in (0, 1), got {p}")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, k=1)
    mask = rng.random(len(iu[0])) < p
    edges = [(int(i), int(j)) for i, j, keep in zip(iu[0], iu[1], mask) if keep]
    return Graph(n, edges)


def repair_duplicate_pool(
    pool: list[int],
    existing_edges: set[tuple[int, int]],
    rng: np.random.Generator,
) -> list[tuple[int, int]]:
    """Re-pair endpoints that lost an edge slot to a duplicate adjacency.

    ``pool`` holds one entry per lost slot (a node may appear repeatedly).
    Entries are paired uniformly at random; a pairing that would form a
    self-loop or duplicate an existing/new edge is skipped.  Entries with no
    legal partner are dropped and simply keep a degree deficit.
    """
    pool = list(pool)
    rng.shuffle(pool)
    taken = set(existing_edges)
    new_edges: list[tuple[int, int]] = []
    while len(pool) >= 2:
        a = pool.pop()
        partner_idx = -1
        for k in range(len(pool)):
            b = pool[k]
            if b != a and _canonical(a, b) not in taken:
                partner_idx = k
                break
        if partner_idx < 0:
            continue  # leftover keeps degree < target
        b = pool.pop(partner_idx)
        e = _canonical(a, b)
        taken.add(e)
        new_edges.append(e)
    return new_edges


def make_regular_expander(n: int, d: int, seed: int, max_attempts: int = 16) -> Graph:
    """d-regular graph built as the union of d/2 independent random rings.

    Each ring assigns every node a uniform coordinate in [0, 1), sorts the
    nodes circularly (ties broken by node index), and links circular
    neighbors.  Pairs adjacent in several rings keep one edge; the extra
    adjacency slots go through ``repair_duplicate_pool``.  Only even d is
    supported; for d = 3 see ``make_ring_with_matching``.
    """
    if d % 2 != 0:
        raise ValueError(f"degree must be even (rings contribute 2 each), got d={d}")
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    if d >= n:
        raise ValueError(f"need d < n, got d={d}, n={n}")
    n_rings = d // 2
    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        edge_count: dict[tuple[int, int], int] = {}
        for _ in range(n_rings):
            coords = rng.random(n)
            order = np.lexsort((np.arange(n), coords))
            for k in range(n):
                e = _canonical(int(order[k]), int(order[(k + 1) % n]))
                edge_count[e] = edge_count.get(e, 0) + 1
        edges = set(edge_count)
        pool: list[int] = []
        for (u, v), c in edge_count.items():
            for _ in range(c - 1):
                pool.extend((u, v))
        edges.update(repair_duplicate_pool(pool, edges, rng))
        g = Graph(n, edges)
        if is_connected(g):
            return g
    raise DisconnectedGraphError(
        f"no connected sample after {max_attempts} attempts (n={n}, d={d})"
    )


def make_ring_with_matching(n: int, seed: int, max_attempts: int = 16) -> Graph:
    """3-regular graph: ring plus a random perfect matching of the nodes.

    The matching avoids ring edges.  If no valid random matching appears
    within the attempt budget, the antipodal matching i <-> i + n/2 is used
    under a seeded relabeling, which is always valid for even n >= 4.
    """
    if n < 4 or n % 2 != 0:
        raise ValueError(f"need even n >= 4, got {n}")
    ring_edges = {(i, (i + 1) % n) for i in range(n)}
    ring_edges = {_canonical(i, j) for i, j in ring_edges}
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        perm = rng.permutation(n)
        pairs = [
            _canonical(int(perm[2 * k]), int(perm[2 * k + 1])) for k in range(n // 2)
        ]
        if all(p not in ring_edges for p in pairs):
            return Graph(n, ring_edges | set(pairs))
    relabel = rng.permutation(n)
    pairs = {
        _canonical(int(relabel[i]), int(relabel[(i + n // 2) % n]))
        for i in range(n // 2)
    }
    if any(p in ring_edges for p in pairs):  # relabeled pairs can collide only for n=4
        pairs = {_canonical(i, (i + n // 2) % n) for i in range(n // 2)}
    return Graph(n, ring_edges | pairs)


# -- global properties --------------------------------------------------------


def is_connected(g: Graph) -> bool:
    """Breadth-first reachability from node 0."""
    seen = np.zeros(g.n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in g.neighbors(u):
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return bool(seen.all())


def communication_cost(g: Graph, model_params: int, rounds: int) -> int:
    """Total scalars shipped: every edge carries the model both ways each round."""
    if model_params < 0 or rounds < 0:
        raise ValueError("model_params and rounds must be nonnegative")
    return 2 * g.num_edges * model_params * rounds
