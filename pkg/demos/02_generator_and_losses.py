"""One generated subgraph and the three losses on it.

The generator encodes each node to a Gaussian latent, decodes features with a
linear map and decodes continuous edge weights from latent inner products.
"""

import numpy as np

from grmlab.experiment import ExperimentConfig, build_model, prepare_example
from grmlab.generator import generate
from grmlab.graph import DomainedExample, Graph
from grmlab.losses import total_loss
from grmlab.params import ParamStore, seeded_init

rng = np.random.default_rng(0)
n = 8
edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.35]
g = Graph(n, edges, rng.standard_normal((n, 4)))

cfg = ExperimentConfig(hidden=16, d_z=8)
store = ParamStore()
model = build_model(store, cfg, d_x=4, num_classes=3, task="graph")
seeded_init(store, 0)

gen, latent = generate(store, model.generator, g, rng)
np.set_printoptions(precision=2, suppress=True)
print("generated edge weights (symmetric, inside (0, 1)):\n", gen.edge_weight)
print("latent mean of node 0:", latent.mu[0])
print("latent std of node 0: ", latent.sigma[0])

prep = prepare_example(DomainedExample(g, 1, 0), "graph", cfg, with_context=True)
for mode in ("full", "no_reg", "no_inv", "no_vgae", "erm"):
    bd = total_loss(prep, store, model, cfg.loss_config(), np.random.default_rng(1), mode)
    print(f"{mode:8s} L_s={bd.L_s:.4f} L_r={bd.L_r:.4f} L_d={bd.L_d:.4f} total={bd.total:.4f}")
