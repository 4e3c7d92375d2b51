"""Synthetic distribution-shift benchmarks.

``generate_mix_shift`` builds a node-level benchmark: one random graph per
domain, labels from a frozen random GCN, and node features that blend
label-derived features with label+domain-derived (spurious) ones through the
bias ratio. ``generate_sp_motif`` builds a graph-level benchmark where a motif
determines the label and the base graph is spuriously correlated with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DomainedDataset, DomainedExample, Graph, normalize_dense

MOTIFS = ("cycle", "house", "crane")
BASES = ("tree", "ladder", "wheel")
MAX_ATTEMPTS = 10


@dataclass(frozen=True)
class MixShiftConfig:
    num_domains: int = 10
    nodes_per_domain: int = 200
    num_classes: int = 10
    feature_dim: int = 16
    bias_ratio: float = 0.0
    seed: int = 0
    edge_prob: float = 0.01
    num_train: int = 1
    num_valid: int = 1

    def __post_init__(self):
        if not 0.0 <= self.bias_ratio <= 1.0:
            raise ValueError("bias_ratio must lie in [0, 1]")
        if self.num_train < 1 or self.num_valid < 0 or self.num_train + self.num_valid >= self.num_domains:
            raise ValueError("domain split needs >=1 train and >=1 test domain")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValueError("edge_prob must lie in [0, 1]")


@dataclass(frozen=True)
class MotifConfig:
    b: float = 0.9
    num_graphs: int = 1000  # training graphs
    num_valid: int | None = None  # default num_graphs // 4
    num_test: int | None = None  # default num_graphs // 2
    seed: int = 0
    base_size: tuple = (10, 15)
    test_base_size: tuple = (15, 20)
    noise: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")


class SynthesisError(RuntimeError):
    pass


def erdos_renyi(n, p, rng):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return np.stack([iu[keep], ju[keep]], axis=1)


def _random_gcn(rng, dims):
    """Frozen random GCN weights; output columns are unit-norm so no class dominates."""
    ws = [rng.standard_normal((a, b)) for a, b in zip(dims[:-1], dims[1:])]
    ws[-1] /= np.linalg.norm(ws[-1], axis=0, keepdims=True)
    return ws


def _apply_gcn(ws, adj, x):
    h = x
    for k, w in enumerate(ws):
        h = adj @ h @ w
        if k < len(ws) - 1:
            h = np.tanh(h)
    return h


def _one_hot(idx, k):
    out = np.zeros((len(idx), k))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def mix_shift_components(cfg):
    """Topology, labels and the two unmixed feature blocks for every domain.

    Depends on everything in ``cfg`` except ``bias_ratio``, so a bias sweep
    can reuse one structure and vary only the mixing weight.
    """
    c, d = cfg.num_classes, cfg.feature_dim
    for attempt in range(MAX_ATTEMPTS):
        root = np.random.default_rng([cfg.seed, attempt, 0])
        label_gnn = _random_gcn(root, [d, d, c])
        feat_gnn = _random_gcn(root, [c, d, d])
        spur_gnn = _random_gcn(root, [c + cfg.num_domains, d, d])
        domains = []
        for dom in range(cfg.num_domains):
            rng = np.random.default_rng([cfg.seed, attempt, 1, dom])
            n = cfg.nodes_per_domain
            edges = erdos_renyi(n, cfg.edge_prob, rng)
            g = Graph(n, edges, np.zeros((n, 1)))
            adj = normalize_dense(g.adjacency())
            x1 = rng.standard_normal((n, d))
            labels = np.argmax(_apply_gcn(label_gnn, adj, x1), axis=1)
            y = _one_hot(labels, c)
            invariant = _apply_gcn(feat_gnn, adj, y)
            dom_onehot = _one_hot(np.full(n, dom), cfg.num_domains)
            spurious = _apply_gcn(spur_gnn, adj, np.concatenate([y, dom_onehot], axis=1))
            domains.append((edges, labels, invariant, spurious))
        train_labels = np.concatenate([domains[k][1] for k in range(cfg.num_train)])
        if len(np.unique(train_labels)) == c:
            return domains
    raise SynthesisError(f"training domain missed a class after {MAX_ATTEMPTS} attempts")


def generate_mix_shift(cfg, components=None):
    """Node-level benchmark; every node of every domain graph is one example."""
    domains = mix_shift_components(cfg) if components is None else components
    r = cfg.bias_ratio
    examples = []
    for dom, (edges, labels, invariant, spurious) in enumerate(domains):
        feats = (1.0 - r) * invariant + r * spurious
        g = Graph(len(labels), edges, feats)
        examples.extend(
            DomainedExample(g, int(labels[v]), dom, v) for v in range(len(labels))
        )
    ids = list(range(cfg.num_domains))
    return DomainedDataset(
        examples, cfg.num_classes,
        ids[:cfg.num_train], ids[cfg.num_train:cfg.num_train + cfg.num_valid],
        ids[cfg.num_train + cfg.num_valid:], task="node",
    )


def _tree(n, rng):
    return [(int(rng.integers(0, k)), k) for k in range(1, n)]


def _ladder(n):
    rungs = max(2, n // 2)
    edges = [(2 * k, 2 * k + 1) for k in range(rungs)]
    for k in range(rungs - 1):
        edges += [(2 * k, 2 * k + 2), (2 * k + 1, 2 * k + 3)]
    return edges, 2 * rungs


def _wheel(n):
    edges = [(0, k) for k in range(1, n)]
    edges += [(k, k + 1) for k in range(1, n - 1)] + [(n - 1, 1)]
    return edges


def base_graph(kind, n, rng):
    if kind == "tree":
        return _tree(n, rng), n
    if kind == "ladder":
        return _ladder(n)
    if kind == "wheel":
        return _wheel(n), n
    raise ValueError(kind)


def motif_graph(kind):
    """Five-node motifs; the crane is a house with one roof edge removed."""
    square = [(0, 1), (1, 2), (2, 3), (3, 0)]
    if kind == "cycle":
        return [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)], 5
    if kind == "house":
        return square + [(0, 4), (1, 4)], 5
    if kind == "crane":
        return square + [(0, 4)], 5
    raise ValueError(kind)


ROLE_DIM = 6


def _role_features(n, edges, noise, rng):
    deg = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    role = np.clip(deg, 1, ROLE_DIM) - 1
    return _one_hot(role, ROLE_DIM) + noise * rng.standard_normal((n, ROLE_DIM))


def motif_example(motif, base, size, rng, noise):
    """Base graph with the motif attached through one bridging edge."""
    b_edges, nb = base_graph(BASES[base], size, rng)
    m_edges, nm = motif_graph(MOTIFS[motif])
    edges = list(b_edges) + [(u + nb, v + nb) for u, v in m_edges]
    edges.append((int(rng.integers(0, nb)), nb + int(rng.integers(0, nm))))
    n = nb + nm
    return Graph(n, edges, _role_features(n, edges, noise, rng))


def generate_sp_motif(cfg):
    """Graph-level benchmark; domains 0/1/2 are train/valid/test.

    Train and valid draw the base with P(S=C)=b; test bases are independent of
    the motif and larger. ``meta['bases']`` records S for every example.
    """
    rng = np.random.default_rng([cfg.seed, 2])
    n_valid = cfg.num_graphs // 4 if cfg.num_valid is None else cfg.num_valid
    n_test = cfg.num_graphs // 2 if cfg.num_test is None else cfg.num_test
    examples, bases = [], []
    for dom, count in ((0, cfg.num_graphs), (1, n_valid), (2, n_test)):
        for _ in range(count):
            motif = int(rng.integers(0, 3))
            if dom == 2:
                base = int(rng.integers(0, 3))
                lo, hi = cfg.test_base_size
            else:
                probs = np.full(3, (1.0 - cfg.b) / 2.0)
                probs[motif] = cfg.b
                base = int(rng.choice(3, p=probs))
                lo, hi = cfg.base_size
            size = int(rng.integers(lo, hi + 1))
            examples.append(DomainedExample(motif_example(motif, base, size, rng, cfg.noise),
                                            motif, dom))
            bases.append(base)
    return DomainedDataset(examples, 3, [0], [1], [2], task="graph", meta={"bases": bases})
