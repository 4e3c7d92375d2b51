"""Influential-node selection on a small graph.

For each node, the rule keeps the other nodes whose mean shortest-path
distance to the node's neighbours is at most L* and whose mean number of
shortest paths to them is at least P*.
"""

import numpy as np

from grmlab.domain import domain_selection, path_stats
from grmlab.graph import Graph

# a 6-cycle with one chord and a pendant node
edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3), (3, 6)]
g = Graph(7, edges, np.zeros((7, 1)))

stats = path_stats(g)
print("shortest-path distances:\n", stats.dist.astype(int))
print("shortest-path counts:\n", stats.num_sp)

for L, P in ((1.0, 1.0), (2.0, 1.5), (3.0, 1.5)):
    sel = domain_selection(g, L, P)
    print(f"\nL*={L}, P*={P}, mean coverage {sel.coverage(g.num_nodes):.2f}")
    for i, s in enumerate(sel.selected):
        print(f"  node {i}: {s.tolist()}")
