"""Supervision, regularization and invariance losses, and the weighted objective.

``total_loss`` runs one example forward through (domain context ->) generator
-> classifier, evaluates the three losses, and accumulates the analytic
gradient of the weighted total into the parameter store.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import context_backward, context_forward
from .gcn import classifier_backward, classifier_forward
from .generator import generator_backward, generator_forward
from .graph import normalize_dense, normalize_dense_backward

PROB_FLOOR = 1e-12
EDGE_CLAMP = 1e-7

MODES = ("full", "no_reg", "no_inv", "no_vgae", "erm")


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 0.5

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be nonnegative")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class LossBreakdown:
    L_s: float
    L_r: float
    L_d: float
    total: float
    alpha: float = 0.0  # weights actually applied (0 for an ablated term)
    beta: float = 0.0


def supervision_loss(probs, label):
    """Cross-entropy against a one-hot target, with the probability floored at 1e-12."""
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def _supervision_grad_logits(probs, label):
    if probs[label] <= PROB_FLOOR:
        return np.zeros_like(probs)
    g = probs.copy()
    g[label] -= 1.0
    return g


def gaussian_term(mu, log_sigma):
    """Per-node mean of sum_k (0.5 (sigma^2 + mu^2) - log sigma).

    Equals KL(N(mu, sigma^2) || N(0, 1)) plus 0.5 per latent dimension.
    """
    n = mu.shape[0]
    return float((0.5 * (np.exp(2 * log_sigma) + mu**2) - log_sigma).sum() / n)


def bernoulli_term(edge_weight, theta):
    """Per-pair mean of KL(Bernoulli(e_ij) || Bernoulli(theta)) over all n x n entries."""
    a = np.clip(edge_weight, EDGE_CLAMP, 1.0 - EDGE_CLAMP)
    kl = a * np.log(a / theta) + (1.0 - a) * np.log((1.0 - a) / (1.0 - theta))
    return float(kl.sum() / edge_weight.size)


def regularization_loss(latent, gen, theta):
    return gaussian_term(latent.mu, latent.log_sigma) + bernoulli_term(gen.edge_weight, theta)


def _regularization_grads(latent, gen, theta):
    n = latent.mu.shape[0]
    g_mu = latent.mu / n
    g_ls = (np.exp(2 * latent.log_sigma) - 1.0) / n
    e = gen.edge_weight
    a = np.clip(e, EDGE_CLAMP, 1.0 - EDGE_CLAMP)
    inside = (e > EDGE_CLAMP) & (e < 1.0 - EDGE_CLAMP)
    g_e = (np.log(a / theta) - np.log((1.0 - a) / (1.0 - theta))) * inside / e.size
    return g_mu, g_ls, g_e


def invariance_loss(latent, h):
    """Mean over nodes of the Euclidean distance between h_i and z_i."""
    return float(np.linalg.norm(h - latent.z, axis=1).mean())


def _invariance_grads(latent, h):
    diff = h - latent.z
    norms = np.linalg.norm(diff, axis=1)
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    g_h = diff * scale[:, None] / len(norms)
    return g_h, -g_h


@dataclass(frozen=True)
class GrmModel:
    classifier: object
    generator: object = None  # GeneratorParams; None for the ERM baseline

    def context_stack(self):
        gp = self.generator
        return gp.domain_encoder if gp.concat_domain else gp.encoder_mu


@dataclass
class PreparedExample:
    """Static per-example tensors; everything here depends on topology and data only."""

    adj: np.ndarray
    features: np.ndarray
    label: int
    center: int | None
    context: object = None  # DomainContext for the graph's nodes


def forward_classify(store, model, ex, rng=None, stochastic=False, train=False):
    """Class probabilities for a prepared example (generator applied unless ERM)."""
    if model.generator is None:
        probs, _ = classifier_forward(store, model.classifier, ex.adj, ex.features, ex.center,
                                      train, rng)
        return probs
    h = None
    if model.generator.concat_domain:
        h, _ = context_forward(store, model.context_stack(), ex.context, train, rng)
    gen, _, _ = generator_forward(store, model.generator, ex.adj, ex.features, rng, stochastic,
                                  train, h)
    probs, _ = classifier_forward(store, model.classifier, normalize_dense(gen.offdiag_weights()),
                                  gen.gen_features, ex.center, train, rng)
    return probs


def total_loss(ex, store, model, cfg, rng=None, mode="full", train=True):
    """Loss breakdown for one example; accumulates the gradient of ``total`` into ``store``.

    ``mode`` is one of ``full``, ``no_reg``, ``no_inv``, ``no_vgae`` or ``erm``.
    Ablated terms are still evaluated and reported but carry zero weight.
    """
    if mode not in MODES:
        raise ValueError(f"unknown loss mode {mode!r}")
    clf = model.classifier
    if mode == "erm":
        probs, ccache = classifier_forward(store, clf, ex.adj, ex.features, ex.center, train, rng)
        l_s = supervision_loss(probs, ex.label)
        classifier_backward(store, clf, ccache, _supervision_grad_logits(probs, ex.label))
        return LossBreakdown(l_s, 0.0, 0.0, l_s)

    gp = model.generator
    alpha = 0.0 if mode == "no_reg" else cfg.alpha
    beta = 0.0 if mode == "no_inv" else cfg.beta
    stack = model.context_stack()
    h, hcache = context_forward(store, stack, ex.context, train, rng)
    gen, latent, gcache = generator_forward(
        store, gp, ex.adj, ex.features, rng, mode != "no_vgae", train,
        h if gp.concat_domain else None,
    )
    offdiag = gen.offdiag_weights()
    probs, ccache = classifier_forward(store, clf, normalize_dense(offdiag), gen.gen_features,
                                       ex.center, train, rng)
    l_s = supervision_loss(probs, ex.label)
    l_r = regularization_loss(latent, gen, cfg.theta)
    l_d = invariance_loss(latent, h)
    total = l_s + alpha * l_r + beta * l_d

    g_xhat, g_adj = classifier_backward(store, clf, ccache,
                                        _supervision_grad_logits(probs, ex.label), need_adj=True)
    g_e = normalize_dense_backward(offdiag, g_adj)
    g_mu = g_ls = g_z = g_h = None
    if alpha:
        r_mu, r_ls, r_e = _regularization_grads(latent, gen, cfg.theta)
        g_mu, g_ls = alpha * r_mu, alpha * r_ls
        g_e = g_e + alpha * r_e
    if beta:
        d_h, d_z = _invariance_grads(latent, h)
        g_h, g_z = beta * d_h, beta * d_z
    g_ctx = generator_backward(store, gp, gen, latent, gcache, g_xhat, g_e, g_mu, g_ls, g_z)
    if g_ctx is not None:
        g_h = g_ctx if g_h is None else g_h + g_ctx
    if g_h is not None:
        context_backward(store, stack, ex.context, hcache, g_h)
    return LossBreakdown(l_s, l_r, l_d, total, alpha, beta)
