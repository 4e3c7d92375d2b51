"""Training, evaluation and the experiment drivers (bias sweep, ablation, timing)."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import accuracy_score, f1_score, roc_auc_score

from .bundle import read_bundle
from .domain import build_context, domain_selection, graph_level_selection
from .gcn import add_classifier
from .generator import add_generator
from .graph import Graph, ego_network, normalized_adjacency
from .losses import GrmModel, LossConfig, PreparedExample, forward_classify, total_loss
from .params import (AdamConfig, ParamStore, adam_step, load_checkpoint, save_checkpoint,
                     seeded_init, zero_grads)
from .synth import (MixShiftConfig, MotifConfig, generate_mix_shift, generate_sp_motif,
                    mix_shift_components)

log = logging.getLogger(__name__)

METHODS = {"GRM": "full", "GRM\\R": "no_reg", "GRM\\I": "no_inv", "GRM\\V": "no_vgae", "ERM": "erm"}
ALIASES = {
    "GRM-R": "GRM\\R", "GRM-I": "GRM\\I", "GRM-V": "GRM\\V",
    "GRM/R": "GRM\\R", "GRM/I": "GRM\\I", "GRM/V": "GRM\\V",
    "no_reg": "GRM\\R", "no_inv": "GRM\\I", "no_vgae": "GRM\\V", "full": "GRM", "erm": "ERM",
}
ABLATION_METHODS = ("GRM", "GRM\\R", "GRM\\I", "GRM\\V")
METRICS = ("accuracy", "roc_auc", "macro_f1")


def canonical_method(name):
    name = ALIASES.get(name, name)
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; expected one of {sorted(METHODS)}")
    return name


@dataclass
class ExperimentConfig:
    data: str | None = None
    synth: dict | None = None
    method: str = "GRM"
    alpha: float = 0.1
    beta: float = 0.1
    theta: float = 0.5
    hidden: int = 128
    d_z: int = 128
    d_e: int | None = None
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.001
    dropout: float = 0.3
    hops: int = 2
    L_star: float = 3.0
    P_star: float = 1.5
    epochs: int = 20
    batch_size: int = 1
    eval_repeats: int = 5
    seed: int = 0
    encoder_input: str = "features-only"
    metric: str = "accuracy"

    def __post_init__(self):
        self.method = canonical_method(self.method)
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_repeats < 1:
            raise ValueError("eval_repeats must be >= 1")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.encoder_input not in ("features-only", "concat-domain"):
            raise ValueError(f"unknown encoder_input {self.encoder_input!r}")
        self.adam()
        self.loss_config()

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config field(s) {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def adam(self):
        return AdamConfig(self.learning_rate, self.beta1, self.beta2, self.epsilon, self.weight_decay)

    def loss_config(self):
        return LossConfig(self.alpha, self.beta, self.theta)

    def dataset(self):
        """Load ``data`` or synthesize from ``synth`` ({"kind": "mix"|"motif", ...})."""
        if self.data is not None:
            return read_bundle(self.data)
        if self.synth is None:
            raise ValueError("config needs either 'data' or 'synth'")
        return synthesize(self.synth)


def synthesize(spec):
    spec = dict(spec)
    kind = spec.pop("kind", "mix")
    if kind == "mix":
        return generate_mix_shift(MixShiftConfig(**spec))
    if kind == "motif":
        for key in ("base_size", "test_base_size"):
            if key in spec:
                spec[key] = tuple(spec[key])
        return generate_sp_motif(MotifConfig(**spec))
    raise ValueError(f"unknown synth kind {kind!r}")


class TrainingError(RuntimeError):
    pass


def build_model(store, cfg, d_x, num_classes, task):
    readout = "center" if task == "node" else "mean"
    clf = add_classifier(store, "clf", d_x, cfg.hidden, num_classes, cfg.dropout, readout)
    gen = None
    if cfg.method != "ERM":
        gen = add_generator(store, d_x, cfg.hidden, cfg.d_z, cfg.d_e, cfg.dropout,
                            cfg.encoder_input)
    return GrmModel(clf, gen)


def prepare_example(ex, task, cfg, with_context):
    """Cached static tensors for one example.

    Node-level: the input is the ``hops``-hop ego network with the center at
    index 0; domain contexts come from the whole domain graph. Graph-level:
    the graph itself, with selections inside the graph.
    """
    g = ex.graph
    key = ("prep", task, ex.center_node, cfg.hops, cfg.L_star, cfg.P_star, with_context)

    def build():
        if task == "node":
            sub, index_map = ego_network(g, ex.center_node, cfg.hops)
            ctx = None
            if with_context:
                sel = domain_selection(g, cfg.L_star, cfg.P_star)
                ctx = build_context(g, sel, index_map)
            return PreparedExample(normalized_adjacency(sub), sub.features, ex.label, 0, ctx)
        ctx = None
        if with_context:
            ctx = build_context(g, graph_level_selection(g, cfg.L_star, cfg.P_star))
        return PreparedExample(normalized_adjacency(g), g.features, ex.label, None, ctx)

    return g.cached(key, build)


@dataclass
class TrainResult:
    store: ParamStore
    model: GrmModel
    log: list  # rows (step, L_s, L_r, L_d, total); batch means when batch_size > 1
    last_epoch: dict = field(default_factory=dict)


def repeat_seeds(seed, repeat):
    """Independent (init seed, run rng) for one training repeat."""
    ss = np.random.SeedSequence([seed, repeat])
    init_ss, run_ss = ss.spawn(2)
    return int(init_ss.generate_state(1)[0]), np.random.default_rng(run_ss)


def train(cfg, ds, repeat=0):
    """Adam training on the train domains; returns a TrainResult.

    One update per example by default; ``batch_size > 1`` averages the
    gradients of that many examples before each update.
    """
    if not ds.train_domains:
        raise TrainingError("dataset has no training domain")
    mode = METHODS[cfg.method]
    store = ParamStore()
    model = build_model(store, cfg, ds.feature_dim, ds.num_classes, ds.task)
    init_seed, rng = repeat_seeds(cfg.seed, repeat)
    seeded_init(store, init_seed)
    examples = [prepare_example(ex, ds.task, cfg, mode != "erm") for ex in ds.split("train")]
    adam, loss_cfg = cfg.adam(), cfg.loss_config()
    rows = []
    step = 0
    sums = None
    for epoch in range(cfg.epochs):
        sums = np.zeros(6)
        order = rng.permutation(len(examples))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            zero_grads(store)
            batch_sums = np.zeros(6)
            for k in batch:
                bd = total_loss(examples[k], store, model, loss_cfg, rng, mode, train=True)
                for term in ("L_s", "L_r", "L_d", "total"):
                    if not np.isfinite(getattr(bd, term)):
                        raise TrainingError(f"non-finite {term} at step {step + 1} (epoch {epoch})")
                batch_sums += (bd.L_s, bd.L_r, bd.L_d, bd.total, bd.alpha * bd.L_r, bd.beta * bd.L_d)
            sums += batch_sums
            rows.append((step + 1, *(batch_sums[:4] / len(batch)).tolist()))
            if len(batch) > 1:
                for p in store.entries.values():
                    p.grad /= len(batch)
            adam_step(store, adam)
            step += 1
        log.debug("epoch %d mean loss %.4f", epoch, sums[3] / len(examples))
    last = {}
    if sums is not None:
        names = ("L_s", "L_r", "L_d", "total", "alpha_L_r", "beta_L_d")
        last = dict(zip(names, (sums / len(examples)).tolist()))
    return TrainResult(store, model, rows, last)


def save_trained(res, cfg, ds, path):
    """Checkpoint with enough metadata to rebuild the model for evaluation."""
    meta = {"config": cfg.to_dict(), "d_x": ds.feature_dim, "num_classes": ds.num_classes,
            "task": ds.task}
    save_checkpoint(res.store, path, meta)


def load_trained(path):
    """Inverse of ``save_trained``; returns (store, model, cfg, meta)."""
    loaded, meta = load_checkpoint(path)
    try:
        cfg = ExperimentConfig.from_dict(meta["config"])
        store = ParamStore()
        model = build_model(store, cfg, meta["d_x"], meta["num_classes"], meta["task"])
    except KeyError as exc:
        raise ValueError(f"{path}: checkpoint metadata lacks {exc}") from None
    if store.names() != loaded.names():
        raise ValueError(f"{path}: checkpoint parameters do not match its config")
    for name in store.names():
        if store[name].shape != loaded[name].shape:
            raise ValueError(f"{path}: shape mismatch for {name}")
        store.entries[name] = loaded.entries[name]
    return store, model, cfg, meta


def write_training_log(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "L_s", "L_r", "L_d", "total"])
        for row in rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def predict(store, model, ds, examples, cfg):
    """Deterministic class probabilities: dropout off, z = mu."""
    with_ctx = model.generator is not None and model.generator.concat_domain
    return np.array([
        forward_classify(store, model, prepare_example(ex, ds.task, cfg, with_ctx))
        for ex in examples
    ])


def metric_value(kind, labels, probs, num_classes):
    if kind == "accuracy":
        return float(accuracy_score(labels, probs.argmax(axis=1)))
    if kind == "macro_f1":
        return float(f1_score(labels, probs.argmax(axis=1), average="macro", zero_division=0))
    if kind == "roc_auc":
        if num_classes != 2:
            raise ValueError("roc_auc is only defined here for binary tasks")
        return float(roc_auc_score(labels, probs[:, 1]))
    raise ValueError(f"unknown metric {kind!r}")


def evaluate(store, model, ds, cfg, which="test"):
    """Metric per domain of the chosen split, keyed by domain id."""
    out = {}
    for dom, examples in ds.by_domain(which).items():
        if not examples:
            continue
        probs = predict(store, model, ds, examples, cfg)
        labels = np.array([ex.label for ex in examples])
        out[dom] = metric_value(cfg.metric, labels, probs, ds.num_classes)
    return out


@dataclass
class MetricReport:
    metric: str
    per_seed: list  # one {domain: value} per training repeat

    @property
    def mins(self):
        return [min(d.values()) for d in self.per_seed]

    @property
    def avgs(self):
        return [float(np.mean(list(d.values()))) for d in self.per_seed]

    def summary(self):
        return {
            "min_mean": float(np.mean(self.mins)), "min_std": float(np.std(self.mins)),
            "avg_mean": float(np.mean(self.avgs)), "avg_std": float(np.std(self.avgs)),
        }


def run_experiment(cfg, ds):
    """Train ``eval_repeats`` independently seeded models and evaluate each."""
    per_seed = []
    for r in range(cfg.eval_repeats):
        res = train(cfg, ds, r)
        per_seed.append(evaluate(res.store, res.model, ds, cfg))
    return MetricReport(cfg.metric, per_seed)


def eval_report_csv(values):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["domain", "value"])
    for dom in sorted(values):
        w.writerow([dom, repr(values[dom])])
    w.writerow(["min", repr(min(values.values()))])
    w.writerow(["avg", repr(float(np.mean(list(values.values()))))])
    return buf.getvalue()


def rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


SWEEP_HEADER = ["ratio", "method", "seed", "min", "avg"]


def run_bias_sweep(base_cfg, ratios, methods=("GRM", "ERM")):
    """Train each method on the mix-shift benchmark at each bias ratio.

    Topology, labels and both feature blocks are generated once; only the
    mixing weight changes across ratios. Returns rows matching SWEEP_HEADER.
    """
    spec = dict(base_cfg.synth or {})
    if spec.pop("kind", "mix") != "mix":
        raise ValueError("bias sweep needs a mix-shift synth config")
    for r in ratios:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"bias ratio {r} outside [0, 1]")
    mix = MixShiftConfig(**spec)
    components = mix_shift_components(mix)
    rows = []
    for r in ratios:
        ds = generate_mix_shift(dataclasses.replace(mix, bias_ratio=float(r)), components)
        for m in methods:
            cfg = base_cfg.replace(method=m)
            for rep in range(cfg.eval_repeats):
                res = train(cfg, ds, rep)
                vals = evaluate(res.store, res.model, ds, cfg)
                rows.append((float(r), cfg.method, rep, min(vals.values()),
                             float(np.mean(list(vals.values())))))
                log.info("ratio %.2f %s seed %d avg %.4f", r, cfg.method, rep, rows[-1][4])
    return rows


ABLATION_HEADER = ["method", "seed", "min", "avg", "L_s", "L_r", "L_d", "alpha_L_r", "beta_L_d"]


def run_ablation(base_cfg, ds=None, methods=ABLATION_METHODS):
    """GRM and its three degenerate variants with shared seeds; rows match ABLATION_HEADER.

    The loss columns are means over the final training epoch.
    """
    ds = base_cfg.dataset() if ds is None else ds
    rows = []
    for rep in range(base_cfg.eval_repeats):
        for m in methods:
            cfg = base_cfg.replace(method=m)
            res = train(cfg, ds, rep)
            vals = evaluate(res.store, res.model, ds, cfg)
            last = res.last_epoch
            rows.append((cfg.method, rep, min(vals.values()), float(np.mean(list(vals.values()))),
                         last["L_s"], last["L_r"], last["L_d"], last["alpha_L_r"], last["beta_L_d"]))
            log.info("%s seed %d avg %.4f", cfg.method, rep, rows[-1][3])
    return rows


def complexity_smoke(sizes, edge_prob=0.5, hidden=32, d_z=16, feature_dim=16, repeats=5, seed=0):
    """Median wall time of one GRM forward+backward on dense random graphs.

    Static per-graph preprocessing (selections, context blocks) is built before
    timing, as it is cached during training. Returns rows (n, edges, seconds).
    """
    from .synth import erdos_renyi

    rng = np.random.default_rng(seed)
    cfg = ExperimentConfig(method="GRM", hidden=hidden, d_z=d_z, epochs=1, eval_repeats=1)
    rows = []
    for n in sizes:
        g = Graph(n, erdos_renyi(n, edge_prob, rng), rng.standard_normal((n, feature_dim)))
        store = ParamStore()
        model = build_model(store, cfg, feature_dim, 2, "graph")
        seeded_init(store, seed)
        ex = prepare_example(_Example(g), "graph", cfg, True)
        times = []
        for _ in range(repeats):
            zero_grads(store)
            t0 = time.perf_counter()
            total_loss(ex, store, model, cfg.loss_config(), rng, "full", train=True)
            times.append(time.perf_counter() - t0)
        rows.append((n, g.num_edges, float(np.median(times))))
    return rows


@dataclass
class _Example:
    graph: Graph
    label: int = 0
    center_node: int | None = None
