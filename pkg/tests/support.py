"""Small models and per-term loss closures shared by the loss and acceptance tests."""

import numpy as np

from grmlab.experiment import ExperimentConfig, build_model, prepare_example
from grmlab.graph import DomainedExample
from grmlab.losses import LossConfig, total_loss
from grmlab.params import ParamStore, seeded_init, zero_grads
from oracles import random_graph

MODES = ("full", "no_reg", "no_inv", "no_vgae", "erm")
METHOD_OF = {"full": "GRM", "no_reg": "GRM\\R", "no_inv": "GRM\\I", "no_vgae": "GRM\\V",
             "erm": "ERM"}


def small_problem(seed, mode="full", encoder_input="features-only", task="node", n_max=30,
                  d_z=8, hidden=6, num_classes=3, dropout=0.3):
    """A random graph of at most ``n_max`` nodes, a model and one prepared example."""
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n_max=n_max, n_min=4, features=5)
    while g.num_edges < 3:
        g = random_graph(rng, n_max=n_max, n_min=4, features=5)
    cfg = ExperimentConfig(method=METHOD_OF[mode], hidden=hidden, d_z=d_z, dropout=dropout,
                           encoder_input=encoder_input)
    store = ParamStore()
    model = build_model(store, cfg, 5, num_classes, task)
    seeded_init(store, seed % 10_000)
    for name in store.names():
        if store.entries[name].kind == "bias":  # nonzero biases exercise their gradients
            store[name][...] = 0.1 * rng.standard_normal(store[name].shape)
    degree = np.bincount(g.edges.ravel(), minlength=g.num_nodes)
    center = int(np.argmax(degree)) if task == "node" else None
    ex = DomainedExample(g, int(rng.integers(0, num_classes)), 0, center)
    prep = prepare_example(ex, task, cfg, mode != "erm")
    return store, model, prep


def term_closure(prep, model, mode, term, theta=0.3, noise_seed=11):
    """loss_fn for fd_check evaluating one term (or ``total``) with frozen noise and dropout.

    A single term's analytic gradient is isolated as the difference between a
    unit-weighted run and a run with that term's weight set to zero.
    """
    weights = {"L_s": None, "L_r": (1.0, 0.0), "L_d": (0.0, 1.0), "total": (0.7, 1.3)}[term]

    def run(store, alpha, beta):
        return total_loss(prep, store, model, LossConfig(alpha, beta, theta),
                          np.random.default_rng(noise_seed), mode, train=True)

    def loss_fn(store):
        if term == "total":
            return run(store, *weights).total
        if term == "L_s":
            return run(store, 0.0, 0.0).L_s
        # gradient of the weighted run minus gradient of the supervision-only run
        saved = {n: store.grad(n).copy() for n in store.names()}
        zero_grads(store)
        base = run(store, 0.0, 0.0)
        g_base = {n: store.grad(n).copy() for n in store.names()}
        zero_grads(store)
        bd = run(store, *weights)
        for n in store.names():
            store.entries[n].grad[...] = saved[n] + store.grad(n) - g_base[n]
        assert base.L_s == bd.L_s
        return getattr(bd, term)

    return loss_fn
