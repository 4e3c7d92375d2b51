"""VGAE-style generator producing a continuously weighted subgraph on the input's nodes.

Each node gets a Gaussian latent ``z_i = mu_i + exp(log_sigma_i) * eps_i``;
generated features are ``W_x z_i + b_x`` and generated edge weights are
``sigmoid(<f_e(z_i), f_e(z_j)>)`` with ``f_e(z) = W_e z + b_e``. Edge weights
stay continuous, nothing is thresholded or sampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gcn import GcnStack, add_gcn_stack, gcn_backward, gcn_forward
from .graph import normalized_adjacency

# logits beyond this saturate sigmoid to exactly 0/1 in double precision
EDGE_LOGIT_CLIP = 30.0


@dataclass
class LatentState:
    mu: np.ndarray
    log_sigma: np.ndarray
    z: np.ndarray
    noise: np.ndarray

    @property
    def sigma(self):
        return np.exp(self.log_sigma)


@dataclass
class GeneratedSubgraph:
    num_nodes: int
    gen_features: np.ndarray
    edge_weight: np.ndarray

    def offdiag_weights(self):
        """Edge weights with the (ignored) diagonal zeroed, for propagation."""
        w = self.edge_weight.copy()
        np.fill_diagonal(w, 0.0)
        return w


@dataclass(frozen=True)
class GeneratorParams:
    encoder_mu: GcnStack
    encoder_sigma: GcnStack
    w_x: str
    b_x: str
    w_e: str
    b_e: str
    domain_encoder: GcnStack | None = None

    @property
    def concat_domain(self):
        return self.domain_encoder is not None


def add_generator(store, d_x, hidden, d_z, d_e=None, dropout=0.0, encoder_input="features-only",
                  prefix="gen"):
    """Register generator weights. ``concat-domain`` feeds [X | H] to both encoders,
    with H from a separate context GCN."""
    d_e = d_z if d_e is None else d_e
    if encoder_input == "features-only":
        d_in, dom = d_x, None
    elif encoder_input == "concat-domain":
        d_in = d_x + d_z
        dom = add_gcn_stack(store, f"{prefix}.dom", [d_x, hidden, d_z], dropout)
    else:
        raise ValueError(f"unknown encoder_input {encoder_input!r}")
    mu = add_gcn_stack(store, f"{prefix}.mu", [d_in, hidden, d_z], dropout)
    sigma = add_gcn_stack(store, f"{prefix}.sigma", [d_in, hidden, d_z], dropout)
    store.add(f"{prefix}.W_x", (d_x, d_z))
    store.add(f"{prefix}.b_x", (d_x,), kind="bias")
    store.add(f"{prefix}.W_e", (d_e, d_z))
    store.add(f"{prefix}.b_e", (d_e,), kind="bias")
    return GeneratorParams(mu, sigma, f"{prefix}.W_x", f"{prefix}.b_x", f"{prefix}.W_e",
                           f"{prefix}.b_e", dom)


def sigmoid(x):
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def encode(store, gp, adj, x, rng=None, stochastic=True, train=False, context=None):
    """Latent Gaussian per node; returns (LatentState, cache).

    With ``stochastic=False`` the noise is zero and ``z == mu``. ``context``
    is the domain representation H, required for concat-domain input.
    """
    if gp.concat_domain:
        if context is None:
            raise ValueError("concat-domain encoder needs the domain representation")
        inp = np.concatenate([x, context], axis=1)
    else:
        inp = x
    mu, c_mu = gcn_forward(store, gp.encoder_mu, adj, inp, train, rng)
    log_sigma, c_sigma = gcn_forward(store, gp.encoder_sigma, adj, inp, train, rng)
    if stochastic:
        noise = rng.standard_normal(mu.shape)
    else:
        noise = np.zeros_like(mu)
    z = mu + np.exp(log_sigma) * noise
    return LatentState(mu, log_sigma, z, noise), {"mu": c_mu, "sigma": c_sigma, "d_x": x.shape[1]}


def decode_features(store, gp, latent):
    return latent.z @ store[gp.w_x].T + store[gp.b_x]


def edge_logits(store, gp, z):
    f = z @ store[gp.w_e].T + store[gp.b_e]
    s = f @ f.T
    # one value per unordered pair, mirrored, so the matrix is exactly symmetric
    s = np.triu(s) + np.triu(s, 1).T
    return f, s


def decode_edges(store, gp, latent):
    _, s = edge_logits(store, gp, latent.z)
    return sigmoid(np.clip(s, -EDGE_LOGIT_CLIP, EDGE_LOGIT_CLIP))


def generator_forward(store, gp, adj, x, rng=None, stochastic=True, train=False, context=None):
    latent, ecache = encode(store, gp, adj, x, rng, stochastic, train, context)
    x_hat = decode_features(store, gp, latent)
    f, s = edge_logits(store, gp, latent.z)
    e_hat = sigmoid(np.clip(s, -EDGE_LOGIT_CLIP, EDGE_LOGIT_CLIP))
    gen = GeneratedSubgraph(len(x), x_hat, e_hat)
    cache = {"enc": ecache, "f": f, "active": np.abs(s) < EDGE_LOGIT_CLIP}
    return gen, latent, cache


def generate(store, gp, g, rng=None, stochastic=True, context=None):
    """Evaluation-mode generation for a Graph; returns (GeneratedSubgraph, LatentState)."""
    if stochastic and rng is None:
        raise ValueError("stochastic generation needs an rng")
    gen, latent, _ = generator_forward(
        store, gp, normalized_adjacency(g), g.features, rng, stochastic, False, context
    )
    return gen, latent


def generator_backward(store, gp, gen, latent, cache, g_xhat=None, g_ehat=None,
                       g_mu=None, g_log_sigma=None, g_z=None):
    """Accumulate generator gradients from upstream gradients.

    Returns the gradient with respect to the context input H (concat-domain
    mode) or None.
    """
    z = latent.z
    gz = np.zeros_like(z) if g_z is None else g_z.copy()
    if g_xhat is not None:
        store.accumulate(gp.w_x, g_xhat.T @ z)
        store.accumulate(gp.b_x, g_xhat.sum(axis=0))
        gz += g_xhat @ store[gp.w_x]
    if g_ehat is not None:
        e = gen.edge_weight
        gamma = g_ehat * e * (1.0 - e) * cache["active"]
        f = cache["f"]
        g_f = (gamma + gamma.T) @ f
        store.accumulate(gp.w_e, g_f.T @ z)
        store.accumulate(gp.b_e, g_f.sum(axis=0))
        gz += g_f @ store[gp.w_e]
    gmu = gz if g_mu is None else gz + g_mu
    gls = gz * np.exp(latent.log_sigma) * latent.noise
    if g_log_sigma is not None:
        gls = gls + g_log_sigma
    ecache = cache["enc"]
    g_in_mu, _ = gcn_backward(store, gp.encoder_mu, ecache["mu"], gmu)
    g_in_sigma, _ = gcn_backward(store, gp.encoder_sigma, ecache["sigma"], gls)
    if gp.concat_domain:
        return (g_in_mu + g_in_sigma)[:, ecache["d_x"]:]
    return None
