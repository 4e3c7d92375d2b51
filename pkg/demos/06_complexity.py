"""Wall time of one GRM forward and backward pass as the graph grows."""

from grmlab.experiment import complexity_smoke

rows = complexity_smoke([25, 50, 100, 200, 400], edge_prob=0.5)
prev = None
for n, m, t in rows:
    ratio = "" if prev is None else f"  x{t / prev:.2f}"
    print(f"n={n:4d} edges={m:6d} {t * 1000:8.2f} ms{ratio}")
    prev = t
