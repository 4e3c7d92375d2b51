"""Bias-free GCN stacks and the softmax graph classifier, with explicit backward passes.

A layer computes ``act(A_hat @ drop(H) @ W)``; ReLU sits between layers and the
last layer is linear. ``A_hat`` may be a dense array or a scipy sparse matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, normalize_dense, normalized_adjacency


@dataclass(frozen=True)
class GcnStack:
    weights: tuple  # parameter names, one per layer
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")


def add_gcn_stack(store, prefix, dims, dropout=0.0):
    """Register weights ``prefix.W0 ...`` chaining ``dims`` and return the stack."""
    names = []
    for k, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        name = f"{prefix}.W{k}"
        store.add(name, (d_in, d_out))
        names.append(name)
    return GcnStack(tuple(names), dropout)


def stack_dims(store, stack):
    dims = [store[stack.weights[0]].shape[0]]
    for name in stack.weights:
        w = store[name]
        if w.shape[0] != dims[-1]:
            raise ValueError(f"layer {name} expects input dim {w.shape[0]}, got {dims[-1]}")
        dims.append(w.shape[1])
    return dims


def gcn_forward(store, stack, adj, x, train=False, rng=None):
    """Run the stack; returns (output, cache for ``gcn_backward``)."""
    if x.shape[0] != adj.shape[0]:
        raise ValueError(f"{x.shape[0]} input rows for a {adj.shape[0]}-node graph")
    h = x
    layers = []
    last = len(stack.weights) - 1
    for k, name in enumerate(stack.weights):
        w = store[name]
        if h.shape[1] != w.shape[0]:
            raise ValueError(f"layer {name} expects input dim {w.shape[0]}, got {h.shape[1]}")
        mask = None
        if train and stack.dropout > 0:
            keep = 1.0 - stack.dropout
            mask = (rng.random(h.shape) < keep) / keep
            h_in = h * mask
        else:
            h_in = h
        hw = h_in @ w
        pre = adj @ hw
        out = pre if k == last else np.maximum(pre, 0.0)
        layers.append((h_in, hw, mask, pre))
        h = out
    return h, {"adj": adj, "layers": layers}


def gcn_backward(store, stack, cache, grad_out, need_adj=False):
    """Accumulate weight gradients; return (grad wrt input, grad wrt adj or None)."""
    adj = cache["adj"]
    g = grad_out
    g_adj = None
    last = len(stack.weights) - 1
    for k in range(last, -1, -1):
        name = stack.weights[k]
        h_in, hw, mask, pre = cache["layers"][k]
        if k != last:
            g = g * (pre > 0)
        if need_adj:
            contrib = g @ hw.T
            g_adj = contrib if g_adj is None else g_adj + contrib
        g_hw = adj.T @ g
        store.accumulate(name, h_in.T @ g_hw)
        g = g_hw @ store[name].T
        if mask is not None:
            g = g * mask
    return g, g_adj


@dataclass(frozen=True)
class Classifier:
    backbone: GcnStack
    head_w: str
    head_b: str
    readout: str = "center"

    def __post_init__(self):
        if self.readout not in ("center", "mean"):
            raise ValueError(f"unknown readout {self.readout!r}")


def add_classifier(store, prefix, d_in, hidden, num_classes, dropout=0.0, readout="center"):
    backbone = add_gcn_stack(store, prefix, [d_in, hidden, hidden], dropout)
    store.add(f"{prefix}.head_W", (hidden, num_classes))
    store.add(f"{prefix}.head_b", (num_classes,), kind="bias")
    return Classifier(backbone, f"{prefix}.head_W", f"{prefix}.head_b", readout)


def softmax(logits):
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def classifier_forward(store, clf, adj, x, center=None, train=False, rng=None):
    """Class probabilities for one graph; returns (probs, cache)."""
    if clf.readout == "center" and center is None:
        raise ValueError("center-node readout needs a center index")
    nodes, gcache = gcn_forward(store, clf.backbone, adj, x, train, rng)
    if clf.readout == "center":
        pooled = nodes[center]
    else:
        pooled = nodes.mean(axis=0)
    logits = pooled @ store[clf.head_w] + store[clf.head_b]
    probs = softmax(logits)
    cache = {"gcn": gcache, "pooled": pooled, "n": nodes.shape, "center": center}
    return probs, cache


def classifier_backward(store, clf, cache, grad_logits, need_adj=False):
    """Backprop d(loss)/d(logits); returns (grad wrt x, grad wrt adj or None)."""
    store.accumulate(clf.head_w, np.outer(cache["pooled"], grad_logits))
    store.accumulate(clf.head_b, grad_logits)
    g_pooled = store[clf.head_w] @ grad_logits
    g_nodes = np.zeros(cache["n"])
    if clf.readout == "center":
        g_nodes[cache["center"]] = g_pooled
    else:
        g_nodes[:] = g_pooled / cache["n"][0]
    return gcn_backward(store, clf.backbone, cache["gcn"], g_nodes, need_adj)


def classify(store, clf, graph, center=None):
    """Evaluation-mode class probabilities for a Graph or a GeneratedSubgraph."""
    if isinstance(graph, Graph):
        adj, x = normalized_adjacency(graph), graph.features
    else:
        adj, x = normalize_dense(graph.offdiag_weights()), graph.gen_features
    probs, _ = classifier_forward(store, clf, adj, x, center, train=False)
    return probs
