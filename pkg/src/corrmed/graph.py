"""Undirected neighbor graphs over mediators and union-find components."""

from __future__ import annotations

import numba
import numpy as np


class NeighborGraph:
    """Simple undirected graph on ``p`` nodes.

    Edges are stored once as ``(i, j)`` with ``i < j``; per-node neighbor
    lists are kept in CSR form (``indptr``, ``indices``) for the samplers.
    """

    def __init__(self, p, edges=()):
        self.p = int(p)
        if self.p < 1:
            raise ValueError("graph needs at least one node")
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= self.p:
                raise ValueError(f"edge endpoint outside [0, {self.p})")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
        self.edges = e
        self.edges.setflags(write=False)
        # contiguous endpoint arrays for the compiled kernels
        self.ei = np.ascontiguousarray(e[:, 0])
        self.ej = np.ascontiguousarray(e[:, 1])
        self.indptr, self.indices = _csr(self.p, self.edges)

    @property
    def n_edges(self):
        return self.edges.shape[0]

    def neighbors(self, j):
        return self.indices[self.indptr[j] : self.indptr[j + 1]]

    def degree(self):
        return np.diff(self.indptr)

    def edge_set(self):
        return {(int(i), int(j)) for i, j in self.edges}

    def adjacency(self):
        adj = np.zeros((self.p, self.p), dtype=bool)
        if self.n_edges:
            adj[self.edges[:, 0], self.edges[:, 1]] = True
            adj[self.edges[:, 1], self.edges[:, 0]] = True
        return adj

    def is_path(self):
        """True when the edges are exactly (0,1), (1,2), ..., (p-2, p-1)."""
        if self.n_edges != self.p - 1:
            return False
        return bool(np.all(self.edges[:, 0] == np.arange(self.p - 1)) and np.all(self.edges[:, 1] == self.edges[:, 0] + 1))

    @classmethod
    def path(cls, p):
        return cls(p, np.column_stack([np.arange(p - 1), np.arange(1, p)]))

    @classmethod
    def from_adjacency(cls, adj):
        adj = np.asarray(adj, dtype=bool)
        i, j = np.nonzero(np.triu(adj, 1))
        return cls(adj.shape[0], np.column_stack([i, j]))

    def __eq__(self, other):
        return isinstance(other, NeighborGraph) and self.p == other.p and np.array_equal(self.edges, other.edges)

    def __repr__(self):
        return f"NeighborGraph(p={self.p}, n_edges={self.n_edges})"

    def write(self, path):
        """Edge-list file: two 0-based integer columns, whitespace separated."""
        with open(path, "w") as fh:
            fh.write(f"# p={self.p}\n")
            for i, j in self.edges:
                fh.write(f"{i} {j}\n")

    @classmethod
    def read(cls, path, p=None):
        header_p = None
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    if line[1:].strip().startswith("p="):
                        header_p = int(line[1:].strip()[2:])
                    continue
                a, b = line.split()[:2]
                rows.append((int(a), int(b)))
        if p is None:
            p = header_p
        if p is None:
            p = 1 + max((max(r) for r in rows), default=0)
        return cls(p, rows)


def _csr(p, edges):
    deg = np.zeros(p, dtype=np.int64)
    if edges.size:
        np.add.at(deg, edges[:, 0], 1)
        np.add.at(deg, edges[:, 1], 1)
    indptr = np.zeros(p + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.empty(indptr[-1], dtype=np.int64)
    fill = indptr[:-1].copy()
    for i, j in edges:
        indices[fill[i]] = j
        fill[i] += 1
        indices[fill[j]] = i
        fill[j] += 1
    for v in range(p):
        indices[indptr[v] : indptr[v + 1]].sort()
    return indptr, indices


@numba.njit(cache=True)
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _uf_union(parent, rank, a, b):
    ra = _uf_find(parent, a)
    rb = _uf_find(parent, b)
    if ra == rb:
        return
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1


@numba.njit(cache=True)
def component_labels(p, ei, ej, active):
    """Connected components of the subgraph of edges with ``active`` set.

    Returns (label per node in 0..ncomp-1, ncomp); labels are numbered in
    order of each component's smallest node.
    """
    parent = np.arange(p)
    rank = np.zeros(p, dtype=np.int64)
    for e in range(ei.shape[0]):
        if active[e]:
            _uf_union(parent, rank, ei[e], ej[e])
    comp = np.empty(p, dtype=np.int64)
    root_label = np.full(p, -1, dtype=np.int64)
    ncomp = 0
    for v in range(p):
        r = _uf_find(parent, v)
        if root_label[r] < 0:
            root_label[r] = ncomp
            ncomp += 1
        comp[v] = root_label[r]
    return comp, ncomp


@numba.njit(cache=True)
def path_component_labels(p, active):
    """Linear-scan components for a path graph; ``active[e]`` bonds e, e+1."""
    comp = np.empty(p, dtype=np.int64)
    c = 0
    comp[0] = 0
    for v in range(1, p):
        if not active[v - 1]:
            c += 1
        comp[v] = c
    return comp, c + 1


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, size):
        self.parent = np.arange(size)
        self.rank = np.zeros(size, dtype=np.int64)

    def find(self, x):
        return int(_uf_find(self.parent, x))

    def union(self, a, b):
        _uf_union(self.parent, self.rank, a, b)

    def groups(self):
        out = {}
        for v in range(len(self.parent)):
            out.setdefault(self.find(v), []).append(v)
        return list(out.values())
