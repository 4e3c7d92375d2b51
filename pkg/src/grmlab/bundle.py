"""JSON dataset bundles.

Layout::

    {"num_classes": C, "task": "node-level" | "graph-level",
     "domains": {"train": [...], "valid": [...], "test": [...]},
     "examples": [{"nodes": n, "edges": [[u, v] | [u, v, w], ...],
                   "features": [[...], ...], "label": y, "domain_id": d,
                   "center_node": c}, ...]}

Unknown fields are rejected. Node-level examples repeat their domain graph;
identical graphs are shared again in memory when read.
"""

from __future__ import annotations

import json

import numpy as np

from .graph import DomainedDataset, DomainedExample, Graph, GraphValidationError, validate

TOP_FIELDS = {"num_classes", "task", "domains", "examples"}
DOMAIN_FIELDS = {"train", "valid", "test"}
EXAMPLE_FIELDS = {"nodes", "edges", "features", "label", "domain_id", "center_node"}
EXAMPLE_REQUIRED = EXAMPLE_FIELDS - {"center_node"}
TASKS = {"node-level": "node", "graph-level": "graph"}


class BundleError(ValueError):
    pass


def _graph_json(g):
    edges = []
    for (u, v), w in zip(g.edges.tolist(), g.edge_weights.tolist()):
        edges.append([u, v] if w == 1.0 else [u, v, w])
    return json.dumps(edges, separators=(",", ":")), json.dumps(g.features.tolist(), separators=(",", ":"))


def write_bundle(ds, path):
    """Serialize deterministically; float values round-trip exactly."""
    head = {
        "num_classes": ds.num_classes,
        "task": {v: k for k, v in TASKS.items()}[ds.task],
        "domains": {"train": list(ds.train_domains), "valid": list(ds.valid_domains),
                    "test": list(ds.test_domains)},
    }
    memo = {}
    with open(path, "w") as fh:
        fh.write(json.dumps(head, separators=(",", ":"))[:-1])
        fh.write(',"examples":[')
        for k, ex in enumerate(ds.examples):
            g = ex.graph
            if id(g) not in memo:
                memo[id(g)] = _graph_json(g)
            edges, feats = memo[id(g)]
            tail = {"label": ex.label, "domain_id": ex.domain_id}
            if ex.center_node is not None:
                tail["center_node"] = int(ex.center_node)
            fh.write("," if k else "")
            fh.write(f'\n{{"nodes":{g.num_nodes},"edges":{edges},"features":{feats},')
            fh.write(json.dumps(tail, separators=(",", ":"))[1:])
        fh.write("\n]}\n")


def _require(obj, fields, required, where):
    if not isinstance(obj, dict):
        raise BundleError(f"{where}: expected an object")
    extra = set(obj) - fields
    if extra:
        raise BundleError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        raise BundleError(f"{where}: missing field(s) {sorted(missing)}")


def _parse_graph(raw, where):
    n = raw["nodes"]
    if not isinstance(n, int) or n < 1:
        raise BundleError(f"{where}.nodes: expected a positive integer")
    edges, weights = [], []
    for j, e in enumerate(raw["edges"]):
        if not isinstance(e, list) or len(e) not in (2, 3):
            raise BundleError(f"{where}.edges[{j}]: expected [u, v] or [u, v, w]")
        edges.append(e[:2])
        weights.append(float(e[2]) if len(e) == 3 else 1.0)
    try:
        feats = np.asarray(raw["features"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise BundleError(f"{where}.features: {exc}") from None
    if feats.ndim != 2:
        raise BundleError(f"{where}.features: expected a rectangular array of arrays")
    try:
        g = Graph(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2), feats, np.asarray(weights))
        validate(g)
    except GraphValidationError as exc:
        raise BundleError(f"{where}: {exc}") from None
    return g


def read_bundle(path):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    _require(doc, TOP_FIELDS, TOP_FIELDS, "bundle")
    _require(doc["domains"], DOMAIN_FIELDS, DOMAIN_FIELDS, "domains")
    if doc["task"] not in TASKS:
        raise BundleError(f"task: expected one of {sorted(TASKS)}, got {doc['task']!r}")
    shared = {}
    examples = []
    for k, raw in enumerate(doc["examples"]):
        where = f"examples[{k}]"
        _require(raw, EXAMPLE_FIELDS, EXAMPLE_REQUIRED, where)
        g = _parse_graph(raw, where)
        key = (g.num_nodes, g.edges.tobytes(), g.edge_weights.tobytes(), g.features.tobytes())
        g = shared.setdefault(key, g)
        examples.append(DomainedExample(g, raw["label"], raw["domain_id"], raw.get("center_node")))
    try:
        return DomainedDataset(
            examples, doc["num_classes"], doc["domains"]["train"], doc["domains"]["valid"],
            doc["domains"]["test"], task=TASKS[doc["task"]],
        )
    except ValueError as exc:
        raise BundleError(f"bundle: {exc}") from None
