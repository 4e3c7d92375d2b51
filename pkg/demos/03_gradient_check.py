"""Finite-difference check of every hand-derived gradient.

Sampling noise and dropout masks are frozen by reseeding inside the loss
function, so central differences see a deterministic function.
"""

import numpy as np

from grmlab.experiment import ExperimentConfig, build_model, prepare_example
from grmlab.graph import DomainedExample, Graph
from grmlab.losses import LossConfig, total_loss
from grmlab.params import ParamStore, fd_check, seeded_init

rng = np.random.default_rng(1)
n = 20
edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.2]
g = Graph(n, edges, rng.standard_normal((n, 5)))

for mode in ("full", "no_reg", "no_inv", "no_vgae", "erm"):
    cfg = ExperimentConfig(method={"full": "GRM", "no_reg": "GRM\\R", "no_inv": "GRM\\I",
                                   "no_vgae": "GRM\\V", "erm": "ERM"}[mode], hidden=8, d_z=8)
    store = ParamStore()
    model = build_model(store, cfg, 5, 3, "node")
    seeded_init(store, 0)
    prep = prepare_example(DomainedExample(g, 2, 0, 0), "node", cfg, mode != "erm")

    def loss(s):
        return total_loss(prep, s, model, LossConfig(0.5, 0.5, 0.3),
                          np.random.default_rng(7), mode).total

    err = fd_check(loss, store, probes=64)
    print(f"{mode:8s} {store.num_scalars():5d} parameters, max relative error {err:.2e}")
