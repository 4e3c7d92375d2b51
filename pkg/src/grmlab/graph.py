"""Graph containers, validation, ego networks and GCN propagation matrices.

Graphs are small, undirected and stored as edge lists; adjacency matrices are
materialized densely. Self-loops never appear in ``edges``; they are added
only when building the normalized propagation matrix.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class GraphValidationError(ValueError):
    """Raised when a graph breaks one of its structural invariants."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(eq=False)
class Graph:
    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    edge_weights: np.ndarray | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(self.num_nodes, -1)
        if self.edge_weights is None:
            self.edge_weights = np.ones(len(self.edges))
        else:
            self.edge_weights = np.asarray(self.edge_weights, dtype=np.float64)
        self._cache = {}

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def feature_dim(self):
        return self.features.shape[1]

    def adjacency(self, weighted=True):
        """Dense symmetric adjacency matrix without self-loops."""
        key = ("adj", weighted)
        if key not in self._cache:
            a = np.zeros((self.num_nodes, self.num_nodes))
            if self.num_edges:
                w = self.edge_weights if weighted else np.ones(self.num_edges)
                u, v = self.edges[:, 0], self.edges[:, 1]
                a[u, v] = w
                a[v, u] = w
            self._cache[key] = a
        return self._cache[key]

    def neighbors(self):
        """Adjacency lists, sorted, ignoring weights."""
        if "nbrs" not in self._cache:
            nbrs = [[] for _ in range(self.num_nodes)]
            for u, v in self.edges:
                nbrs[u].append(int(v))
                nbrs[v].append(int(u))
            self._cache["nbrs"] = [sorted(x) for x in nbrs]
        return self._cache["nbrs"]

    def cached(self, key, build):
        """Memoize a topology-derived quantity on this (immutable) graph."""
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def same_as(self, other):
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.edge_weights, other.edge_weights)
        )


@dataclass(eq=False)
class DomainedExample:
    graph: Graph
    label: int
    domain_id: int
    center_node: int | None = None


@dataclass(eq=False)
class DomainedDataset:
    examples: list
    num_classes: int
    train_domains: list
    valid_domains: list
    test_domains: list
    task: str = "node"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("node", "graph"):
            raise ValueError(f"unknown task {self.task!r}")
        doms = [set(self.train_domains), set(self.valid_domains), set(self.test_domains)]
        if doms[0] & doms[1] or doms[0] & doms[2] or doms[1] & doms[2]:
            raise ValueError("train/valid/test domain lists overlap")
        known = doms[0] | doms[1] | doms[2]
        for ex in self.examples:
            if ex.domain_id not in known:
                raise ValueError(f"example domain {ex.domain_id} not in any split")
            if not 0 <= ex.label < self.num_classes:
                raise ValueError(f"label {ex.label} outside [0, {self.num_classes})")
            if self.task == "node":
                if ex.center_node is None or not 0 <= ex.center_node < ex.graph.num_nodes:
                    raise ValueError("node-level example needs a valid center_node")

    def split(self, which):
        domains = set(getattr(self, f"{which}_domains"))
        return [ex for ex in self.examples if ex.domain_id in domains]

    def by_domain(self, which):
        out = {}
        for d in getattr(self, f"{which}_domains"):
            out[d] = []
        for ex in self.split(which):
            out[ex.domain_id].append(ex)
        return out

    @property
    def feature_dim(self):
        return self.examples[0].graph.feature_dim


def validate(g):
    """Check every Graph invariant; raise GraphValidationError listing all violations."""
    problems = []
    n = g.num_nodes
    if g.features.ndim != 2 or g.features.shape[0] != n:
        problems.append(f"features have {g.features.shape[0]} rows, expected {n}")
    if len(g.edge_weights) != g.num_edges:
        problems.append(f"{len(g.edge_weights)} edge weights for {g.num_edges} edges")
    seen = set()
    for u, v in g.edges.tolist():
        if not (0 <= u < n and 0 <= v < n):
            problems.append(f"edge ({u},{v}) out of range for {n} nodes")
            continue
        if u == v:
            problems.append(f"self-loop ({u},{v})")
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            problems.append(f"duplicate edge ({u},{v})")
        seen.add(key)
    if problems:
        raise GraphValidationError(problems)
    return True


def normalize_dense(a):
    """Symmetric GCN normalization D^-1/2 (A + I) D^-1/2 of a zero-diagonal matrix."""
    m = a + np.eye(len(a))
    s = 1.0 / np.sqrt(m.sum(axis=1))
    return m * s[:, None] * s[None, :]


def normalize_dense_backward(a, grad_out):
    """Gradient of a scalar through ``normalize_dense`` w.r.t. the off-diagonal of ``a``.

    The diagonal of ``a`` is replaced by self-loops, so its gradient is zero.
    """
    m = a + np.eye(len(a))
    d = m.sum(axis=1)
    s = 1.0 / np.sqrt(d)
    g_m = grad_out * s[:, None] * s[None, :]
    # each s_i appears in row i and column i of the product
    g_s = (grad_out * m * s[None, :]).sum(axis=1) + (grad_out * m * s[:, None]).sum(axis=0)
    g_d = g_s * (-0.5) * d ** -1.5
    g_a = g_m + g_d[:, None]
    np.fill_diagonal(g_a, 0.0)
    return g_a


def normalized_adjacency(g):
    """Dense propagation matrix of ``g`` honouring edge weights; cached per graph."""
    return g.cached("norm_adj", lambda: normalize_dense(g.adjacency()))


def bfs_distances(g, source, max_hops=None):
    """Hop distances from ``source``; unreachable nodes are absent from the dict."""
    nbrs = g.neighbors()
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        if max_hops is not None and dist[u] >= max_hops:
            continue
        for w in nbrs[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def induced_subgraph(g, nodes):
    """Subgraph on ``nodes`` (in the given order) with all edges among them."""
    nodes = np.asarray(nodes, dtype=np.int64)
    pos = np.full(g.num_nodes, -1)
    pos[nodes] = np.arange(len(nodes))
    if g.num_edges:
        keep = (pos[g.edges[:, 0]] >= 0) & (pos[g.edges[:, 1]] >= 0)
        edges = pos[g.edges[keep]]
        weights = g.edge_weights[keep]
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
        weights = np.zeros(0)
    return Graph(len(nodes), edges, g.features[nodes], weights)


def ego_network(g, center, hops):
    """Induced subgraph on nodes within ``hops`` of ``center``.

    Returns the subgraph and an index map from new to original node ids; the
    center is always new index 0, the rest follow in BFS order.
    """
    if not 0 <= center < g.num_nodes or hops < 0:
        raise ValueError(f"bad ego network request: center {center}, hops {hops}")
    dist = bfs_distances(g, center, max_hops=hops)
    order = sorted(dist, key=lambda u: (dist[u], u))
    index_map = np.asarray(order, dtype=np.int64)
    return induced_subgraph(g, index_map), index_map
