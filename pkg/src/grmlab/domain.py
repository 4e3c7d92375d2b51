"""Influential-node selection and the per-node domain representation H.

For node i with one-hop neighbourhood N_i, a node u is influential when its mean
hop distance to N_i is at most ``L_star`` and its mean number of shortest paths
to N_i is at least ``P_star``. H_i is the mean of the shared encoder's outputs
on the subgraph induced by the influential nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .gcn import GcnStack, gcn_backward, gcn_forward
from .graph import normalize_dense


@dataclass
class PathStats:
    dist: np.ndarray  # float, inf when unreachable
    num_sp: np.ndarray  # float counts, 0 when unreachable


def path_stats(g):
    """All-pairs hop distances and shortest-path counts (edge weights ignored).

    Level-synchronous BFS from every source at once: the count for a node first
    reached at level k is the sum of counts of its neighbours at level k-1.
    """
    def build():
        n = g.num_nodes
        a = (g.adjacency(weighted=False) > 0).astype(np.float64)
        dist = np.full((n, n), np.inf)
        num_sp = np.zeros((n, n))
        np.fill_diagonal(dist, 0.0)
        np.fill_diagonal(num_sp, 1.0)
        frontier = np.eye(n)
        level = 0
        while frontier.any():
            level += 1
            reach = frontier @ a
            new = (reach > 0) & np.isinf(dist)
            dist[new] = level
            num_sp[new] = reach[new]
            frontier = np.where(new, reach, 0.0)
        return PathStats(dist, num_sp)

    return g.cached("path_stats", build)


def select_influential(stats, g, i, L_star=3.0, P_star=1.5):
    """Influential node set for node ``i`` as a sorted index array.

    Falls back to N_i when no node passes both thresholds, and to {i} for an
    isolated node.
    """
    nbrs = np.asarray(g.neighbors()[i], dtype=np.int64)
    if len(nbrs) == 0:
        return np.array([i], dtype=np.int64)
    k = len(nbrs)
    # compare sums against k * threshold so no division rounding enters
    dist_sum = stats.dist[:, nbrs].sum(axis=1)
    count_sum = stats.num_sp[:, nbrs].sum(axis=1)
    ok = (dist_sum <= L_star * k) & (count_sum >= P_star * k)
    ok[i] = False
    chosen = np.flatnonzero(ok)
    if len(chosen) == 0:
        return nbrs
    return chosen


@dataclass
class DomainSelection:
    selected: list  # per node: sorted index array
    L_star: float
    P_star: float

    def induced_edges(self, g, i):
        """Edges of ``g`` with both endpoints in the selection of node ``i``."""
        inside = np.zeros(g.num_nodes, dtype=bool)
        inside[self.selected[i]] = True
        if g.num_edges == 0:
            return g.edges
        keep = inside[g.edges[:, 0]] & inside[g.edges[:, 1]]
        return g.edges[keep]

    def coverage(self, n):
        """Mean fraction of the graph's nodes that each selection covers."""
        return float(np.mean([len(s) / n for s in self.selected]))


def domain_selection(g, L_star=3.0, P_star=1.5):
    """Selections for every node of ``g``; cached on the graph per threshold pair."""
    def build():
        stats = path_stats(g)
        sel = [select_influential(stats, g, i, L_star, P_star) for i in range(g.num_nodes)]
        return DomainSelection(sel, L_star, P_star)

    return g.cached(("selection", float(L_star), float(P_star)), build)


def graph_level_selection(g, L_star=3.0, P_star=1.5):
    """Graph-level tasks reuse the same rule inside the input graph itself."""
    return domain_selection(g, L_star, P_star)


@dataclass
class DomainContext:
    """Block-diagonal batch of the induced selection subgraphs for some nodes."""

    adj: sp.csr_matrix
    features: np.ndarray
    pool: sp.csr_matrix
    pool_adj: sp.csr_matrix = None  # pool @ adj, fused into the last (linear) layer
    adj_features: np.ndarray = None  # adj @ features, the first aggregation

    def __post_init__(self):
        if self.pool_adj is None:
            self.pool_adj = (self.pool @ self.adj).tocsr()
        if self.adj_features is None:
            self.adj_features = np.asarray(self.adj @ self.features)


def build_context(g, selection, nodes=None):
    """Stack the selection subgraphs of ``nodes`` (default: all) for one batched GCN pass."""
    nodes = range(g.num_nodes) if nodes is None else nodes
    a_full = g.adjacency()
    gather, a_rows, a_cols, a_vals, p_rows = [], [], [], [], []
    offset = 0
    for r, i in enumerate(nodes):
        sel = selection.selected[int(i)]
        block = normalize_dense(a_full[np.ix_(sel, sel)])
        bi, bj = np.nonzero(block)
        a_rows.append(bi + offset)
        a_cols.append(bj + offset)
        a_vals.append(block[bi, bj])
        gather.append(sel)
        p_rows.append(np.full(len(sel), r))
        offset += len(sel)
    adj = sp.csr_matrix(
        (np.concatenate(a_vals), (np.concatenate(a_rows), np.concatenate(a_cols))),
        shape=(offset, offset),
    )
    p_rows = np.concatenate(p_rows)
    sizes = np.array([len(s) for s in gather], dtype=np.float64)
    pool = sp.csr_matrix((1.0 / sizes[p_rows], (p_rows, np.arange(offset))),
                         shape=(len(gather), offset))
    return DomainContext(adj, g.features[np.concatenate(gather)], pool)


def _dropout(h, rate, train, rng):
    if not (train and rate > 0):
        return h, None
    keep = 1.0 - rate
    mask = (rng.random(h.shape) < keep) / keep
    return h * mask, mask


def context_forward(store, stack, ctx, train=False, rng=None):
    """H = pool @ GCN(ctx).

    The raw features are not dropped out here, so the first aggregation
    ``adj @ features`` is a constant of the context; the last layer is linear,
    so pooling folds into it. Only the middle layers touch ``adj`` per call.
    """
    names = stack.weights
    if len(names) == 1:
        out = np.asarray(ctx.pool_adj @ (ctx.features @ store[names[0]]))
        return out, None
    pre0 = ctx.adj_features @ store[names[0]]
    h = np.maximum(pre0, 0.0)
    body = GcnStack(names[1:-1], stack.dropout)
    body_cache = None
    if body.weights:
        h, body_cache = gcn_forward(store, body, ctx.adj, h, train, rng)
        h = np.maximum(h, 0.0)  # gcn_forward leaves its own last layer linear
    h, mask = _dropout(h, stack.dropout, train, rng)
    out = np.asarray(ctx.pool_adj @ (h @ store[names[-1]]))
    return out, (pre0, body, body_cache, h, mask)


def context_backward(store, stack, ctx, cache, grad_h):
    names = stack.weights
    g_hw = np.asarray(ctx.pool_adj.T @ grad_h)
    if cache is None:
        store.accumulate(names[0], ctx.features.T @ g_hw)
        return
    pre0, body, body_cache, h_in, mask = cache
    store.accumulate(names[-1], h_in.T @ g_hw)
    g = g_hw @ store[names[-1]].T
    if mask is not None:
        g = g * mask
    if body.weights:
        g, _ = gcn_backward(store, body, body_cache, g * (body_cache["layers"][-1][3] > 0))
    store.accumulate(names[0], ctx.adj_features.T @ (g * (pre0 > 0)))


def domain_representation(store, stack, g, selection, nodes=None):
    """Evaluation-mode H: row r is the mean encoder output over the selection of ``nodes[r]``."""
    h, _ = context_forward(store, stack, build_context(g, selection, nodes))
    return h


def dump_selection(selection, n, path):
    """JSON diagnostic with per-node selected sets and coverage ratios."""
    doc = {
        "L_star": selection.L_star,
        "P_star": selection.P_star,
        "num_nodes": n,
        "mean_coverage": selection.coverage(n),
        "nodes": [
            {"node": i, "selected": s.tolist(), "coverage": len(s) / n}
            for i, s in enumerate(selection.selected)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
