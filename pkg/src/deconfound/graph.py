"""DAGs over observed nodes, random graph generation and confounder attachment."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np


class CycleError(ValueError):
    """Raised when a parent structure contains a directed cycle."""


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on ``p`` nodes stored as parent sets.

    ``parents[j]`` is a sorted tuple of the parents of node ``j``. ``order``
    is filled in with :func:`topological_order` when not supplied.
    """

    p: int
    parents: tuple[tuple[int, ...], ...]
    order: tuple[int, ...] = field(default=())

    def __post_init__(self):
        parents = tuple(tuple(sorted(int(i) for i in pa)) for pa in self.parents)
        if len(parents) != self.p:
            raise ValueError(f"expected {self.p} parent sets, got {len(parents)}")
        for j, pa in enumerate(parents):
            if len(set(pa)) != len(pa):
                raise ValueError(f"duplicate parent of node {j}")
            if any(i < 0 or i >= self.p or i == j for i in pa):
                raise ValueError(f"invalid parent index for node {j}: {pa}")
        object.__setattr__(self, "parents", parents)
        if self.order:
            order = tuple(int(i) for i in self.order)
            if sorted(order) != list(range(self.p)):
                raise ValueError("order is not a permutation of range(p)")
            rank = {v: r for r, v in enumerate(order)}
            for j, pa in enumerate(parents):
                if any(rank[i] >= rank[j] for i in pa):
                    raise CycleError(f"order inconsistent with parents of node {j}")
            object.__setattr__(self, "order", order)
        else:
            object.__setattr__(self, "order", _kahn(self.p, parents))

    @classmethod
    def empty(cls, p: int) -> "Dag":
        return cls(p, tuple(() for _ in range(p)))

    @classmethod
    def from_edges(cls, p: int, edges) -> "Dag":
        parents: list[list[int]] = [[] for _ in range(p)]
        for i, j in edges:
            parents[int(j)].append(int(i))
        return cls(p, tuple(tuple(pa) for pa in parents))

    @classmethod
    def from_adjacency(cls, adj) -> "Dag":
        adj = np.asarray(adj, dtype=bool)
        return cls.from_edges(adj.shape[0], zip(*np.nonzero(adj)))

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for j, pa in enumerate(self.parents) for i in pa]

    @property
    def n_edges(self) -> int:
        return sum(len(pa) for pa in self.parents)

    def adjacency(self) -> np.ndarray:
        """Boolean matrix ``A`` with ``A[i, j]`` true iff ``i -> j``."""
        A = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            A[i, j] = True
        return A

    def children(self, i: int) -> list[int]:
        return [j for j, pa in enumerate(self.parents) if i in pa]

    def degrees(self) -> np.ndarray:
        A = self.adjacency()
        return A.sum(axis=0) + A.sum(axis=1)

    def has_path(self, src: int, dst: int) -> bool:
        """True iff a directed path ``src -> ... -> dst`` exists."""
        if src == dst:
            return True
        A = self.adjacency()
        seen = {src}
        stack = [src]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(A[u]):
                v = int(v)
                if v == dst:
                    return True
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def to_json(self) -> str:
        return json.dumps(
            {"p": self.p, "parents": [list(pa) for pa in self.parents], "order": list(self.order)}
        )

    @classmethod
    def from_json(cls, text: str) -> "Dag":
        obj = json.loads(text)
        return cls(obj["p"], tuple(tuple(pa) for pa in obj["parents"]), tuple(obj.get("order", ())))

    def to_edgelist(self) -> str:
        return "".join(f"{i} {j}\n" for i, j in sorted(self.edges))

    @classmethod
    def from_edgelist(cls, text: str, p: int) -> "Dag":
        edges = [tuple(int(t) for t in line.split()) for line in text.splitlines() if line.strip()]
        return cls.from_edges(p, edges)


def _kahn(p: int, parents) -> tuple[int, ...]:
    # smallest ready index first
    indeg = [len(pa) for pa in parents]
    children: list[list[int]] = [[] for _ in range(p)]
    for j, pa in enumerate(parents):
        for i in pa:
            children[i].append(j)
    ready = [j for j in range(p) if indeg[j] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in children[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) != p:
        raise CycleError("graph contains a directed cycle")
    return tuple(order)


def topological_order(dag: Dag) -> list[int]:
    """Deterministic topological order, ties broken by smallest index."""
    return list(_kahn(dag.p, dag.parents))


def sample_erdos_renyi(p: int, expected_neighborhood: float, rng_seed: int) -> Dag:
    """Random DAG whose nodes have ``expected_neighborhood`` neighbours on average.

    Each pair ranked ``a < b`` in a uniformly random node ordering becomes an
    edge with probability ``expected_neighborhood / (p - 1)``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if expected_neighborhood <= 0:
        raise ValueError("expected_neighborhood must be positive")
    if p == 1:
        return Dag.empty(1)
    if expected_neighborhood >= p or expected_neighborhood > p - 1:
        raise ValueError(
            f"expected_neighborhood={expected_neighborhood} too large for p={p} "
            f"(edge probability would exceed 1)"
        )
    rng = np.random.default_rng(rng_seed)
    prob = expected_neighborhood / (p - 1)
    perm = rng.permutation(p)
    upper = np.triu(rng.random((p, p)) < prob, k=1)
    A = np.zeros((p, p), dtype=bool)
    A[np.ix_(perm, perm)] = upper
    return Dag.from_adjacency(A)


@dataclass(frozen=True)
class ConfounderAttachment:
    """``edges[k, j]`` is true iff latent ``h_k`` directly causes ``x_j``."""

    edges: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges, dtype=bool, ndmin=2)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def K(self) -> int:
        return self.edges.shape[0]

    @property
    def p(self) -> int:
        return self.edges.shape[1]

    def confounded_nodes(self) -> np.ndarray:
        """Indices of nodes with at least one confounder parent."""
        return np.flatnonzero(self.edges.any(axis=0))

    def confounders_of(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.edges[:, j])


def sample_confounder_attachment(p: int, K: int, attach_prob: float, rng_seed: int) -> ConfounderAttachment:
    if not 0.0 <= attach_prob <= 1.0:
        raise ValueError("attach_prob must lie in [0, 1]")
    if p < 1 or K < 0:
        raise ValueError("need p >= 1 and K >= 0")
    rng = np.random.default_rng(rng_seed)
    return ConfounderAttachment(rng.random((K, p)) < attach_prob)
