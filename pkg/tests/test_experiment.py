import csv
import json

import numpy as np
import pytest

from grmlab.experiment import (ABLATION_HEADER, ExperimentConfig, MetricReport, TrainingError,
                               canonical_method, complexity_smoke, eval_report_csv, evaluate,
                               load_trained, metric_value, predict, rows_to_csv, run_ablation,
                               run_bias_sweep, run_experiment, save_trained, train,
                               write_training_log)
from grmlab.graph import DomainedDataset, DomainedExample, Graph
from grmlab.synth import MixShiftConfig, generate_mix_shift

TINY_MIX = {"kind": "mix", "num_domains": 3, "nodes_per_domain": 30, "num_classes": 2,
            "feature_dim": 4, "edge_prob": 0.1}


def separable(n=40, seed=0):
    """Two classes split by the sign of the first feature; edges only within a class."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    x = rng.normal(0.0, 0.3, (n, 3))
    x[:, 0] += np.where(labels == 1, 1.5, -1.5)
    edges = [(u, v) for u in range(n) for v in range(u + 2, n, 2) if rng.random() < 0.1]
    g = Graph(n, edges, x)
    exs = [DomainedExample(g, int(labels[v]), 0, v) for v in range(n)]
    g2 = Graph(4, [], x[:4])
    exs += [DomainedExample(g2, int(labels[v]), d, v) for d in (1, 2) for v in range(4)]
    return DomainedDataset(exs, 2, [0], [1], [2], task="node")


def tiny_cfg(**kw):
    base = dict(synth=TINY_MIX, hidden=8, d_z=4, epochs=2, eval_repeats=2, batch_size=4)
    base.update(kw)
    return ExperimentConfig(**base)


def test_erm_fits_separable_data():
    ds = separable()
    cfg = ExperimentConfig(method="ERM", hidden=16, epochs=50, learning_rate=0.01, eval_repeats=1)
    res = train(cfg, ds)
    assert evaluate(res.store, res.model, ds, cfg, "train")[0] > 0.95


def test_grm_without_vgae_or_weights_tracks_supervision_only():
    ds = separable(20)
    logs = []
    for theta in (0.2, 0.8):
        cfg = ExperimentConfig(method="GRM\\V", alpha=0.0, beta=0.0, theta=theta, hidden=6, d_z=4,
                               epochs=3)
        res = train(cfg, ds)
        assert all(row[4] == row[1] for row in res.log)
        logs.append([(r[0], r[1], r[3], r[4]) for r in res.log])
    # theta only changes the reported L_r, never the trajectory
    assert logs[0] == logs[1]


def test_log_has_one_row_per_update():
    ds = separable(20)
    res = train(ExperimentConfig(hidden=6, d_z=4, epochs=2, batch_size=8), ds)
    # 20 training examples in batches of 8 -> 3 updates per epoch
    assert [row[0] for row in res.log] == list(range(1, 7))
    assert set(res.last_epoch) == {"L_s", "L_r", "L_d", "total", "alpha_L_r", "beta_L_d"}


def test_training_log_csv(tmp_path):
    res = train(ExperimentConfig(hidden=6, d_z=4, epochs=1), separable(10))
    write_training_log(res.log, tmp_path / "log.csv")
    rows = list(csv.reader(open(tmp_path / "log.csv")))
    assert rows[0] == ["step", "L_s", "L_r", "L_d", "total"]
    assert len(rows) == 11
    assert float(rows[1][4]) == res.log[0][4]


def test_same_seed_gives_identical_parameters():
    ds = separable(16)
    cfg = ExperimentConfig(hidden=6, d_z=4, epochs=2, seed=3)
    a, b = train(cfg, ds), train(cfg, ds)
    assert a.store.values_equal(b.store) and a.log == b.log
    c = train(cfg, ds, repeat=1)
    assert not a.store.values_equal(c.store)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises_training_error():
    ds = separable(8)
    ds.examples[0].graph.features[0, 0] = np.inf
    with pytest.raises(TrainingError, match="non-finite"):
        train(ExperimentConfig(method="ERM", hidden=4, epochs=1), ds)


def test_checkpoint_round_trip_predicts_identically(tmp_path):
    ds = separable(16)
    cfg = ExperimentConfig(hidden=6, d_z=4, epochs=1, encoder_input="concat-domain")
    res = train(cfg, ds)
    save_trained(res, cfg, ds, tmp_path / "m.npz")
    store, model, cfg2, meta = load_trained(tmp_path / "m.npz")
    assert cfg2 == cfg and meta["task"] == "node"
    exs = ds.split("test")
    assert np.array_equal(predict(store, model, ds, exs, cfg2), predict(res.store, res.model, ds, exs, cfg))


def test_perfect_predictor_scores_one():
    labels = np.array([0, 1, 1, 0])
    probs = np.eye(2)[labels]
    for kind in ("accuracy", "roc_auc", "macro_f1"):
        assert metric_value(kind, labels, probs, 2) == 1.0


def test_coin_flip_auc_is_one_half():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 2, 20000)
    p = rng.random(20000)
    auc = metric_value("roc_auc", labels, np.stack([1 - p, p], axis=1), 2)
    assert abs(auc - 0.5) < 0.02


def test_roc_auc_rejects_multiclass():
    with pytest.raises(ValueError):
        metric_value("roc_auc", np.array([0, 1, 2]), np.eye(3), 3)


def test_macro_f1_hand_value():
    # class 0: tp=1 fp=0 fn=1 -> f1 2/3; class 1: tp=2 fp=1 fn=0 -> f1 4/5
    labels = np.array([0, 0, 1, 1])
    probs = np.eye(2)[[0, 1, 1, 1]]
    assert metric_value("macro_f1", labels, probs, 2) == pytest.approx((2 / 3 + 4 / 5) / 2)


def test_metric_report_summary():
    rep = MetricReport("accuracy", [{2: 0.5, 3: 0.7}, {2: 0.9, 3: 0.3}])
    assert rep.mins == [0.5, 0.3] and rep.avgs == pytest.approx([0.6, 0.6])
    s = rep.summary()
    assert s["min_mean"] == pytest.approx(0.4) and s["avg_std"] == pytest.approx(0.0)
    assert all(m <= a for m, a in zip(rep.mins, rep.avgs))


def test_eval_report_csv_lists_domains_then_min_and_avg():
    text = eval_report_csv({3: 0.25, 2: 0.75})
    assert text.splitlines() == ["domain,value", "2,0.75", "3,0.25", "min,0.25", "avg,0.5"]


def test_rows_to_csv_keeps_full_float_precision():
    text = rows_to_csv(["a", "b"], [(1, 1 / 3)])
    assert float(text.splitlines()[1].split(",")[1]) == 1 / 3


def test_run_experiment_repeats_are_independent():
    cfg = tiny_cfg(eval_repeats=2)
    rep = run_experiment(cfg, cfg.dataset())
    assert len(rep.per_seed) == 2
    assert sorted(rep.per_seed[0]) == [2]
    again = run_experiment(cfg.replace(eval_repeats=1), cfg.dataset())
    assert again.per_seed[0] == rep.per_seed[0]


def test_bias_sweep_rows():
    rows = run_bias_sweep(tiny_cfg(), [0.0, 0.9], ["GRM", "ERM"])
    assert len(rows) == 2 * 2 * 2
    assert [(r[0], r[1], r[2]) for r in rows[:4]] == [(0.0, "GRM", 0), (0.0, "GRM", 1),
                                                      (0.0, "ERM", 0), (0.0, "ERM", 1)]
    assert all(0 <= r[3] <= r[4] <= 1 for r in rows)


def test_bias_sweep_rejects_bad_input():
    with pytest.raises(ValueError):
        run_bias_sweep(tiny_cfg(), [1.5])
    with pytest.raises(ValueError):
        run_bias_sweep(tiny_cfg(synth={"kind": "motif"}), [0.5])


def test_ablation_rows():
    rows = run_ablation(tiny_cfg(eval_repeats=1))
    assert [r[0] for r in rows] == ["GRM", "GRM\\R", "GRM\\I", "GRM\\V"]
    assert all(len(r) == len(ABLATION_HEADER) for r in rows)
    grm, no_reg, no_inv, _ = rows
    assert no_reg[7] == 0.0 and no_inv[8] == 0.0 and grm[7] > 0 and grm[8] > 0


def test_config_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"lr": 0.1})
    for kw in (dict(batch_size=0), dict(eval_repeats=0), dict(metric="mse"), dict(method="IRM"),
               dict(encoder_input="both"), dict(theta=1.0), dict(learning_rate=0.0)):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)
    with pytest.raises(ValueError):
        ExperimentConfig().dataset()


def test_config_round_trips_through_json(tmp_path):
    cfg = tiny_cfg(method="GRM-R")
    assert cfg.method == "GRM\\R"
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(tmp_path / "c.json") == cfg


@pytest.mark.parametrize("alias,name", [("GRM/V", "GRM\\V"), ("no_inv", "GRM\\I"), ("erm", "ERM"),
                                        ("GRM", "GRM")])
def test_method_aliases(alias, name):
    assert canonical_method(alias) == name


def test_graph_level_training_runs():
    cfg = ExperimentConfig(synth={"kind": "motif", "num_graphs": 12}, hidden=6, d_z=4, epochs=1,
                           eval_repeats=1)
    rep = run_experiment(cfg, cfg.dataset())
    assert set(rep.per_seed[0]) == {2}


def test_complexity_smoke_rows():
    rows = complexity_smoke([10, 20, 40], repeats=1)
    assert [r[0] for r in rows] == [10, 20, 40]
    assert all(r[2] > 0 for r in rows)


def test_mix_dataset_matches_direct_generation():
    cfg = tiny_cfg()
    spec = {k: v for k, v in TINY_MIX.items() if k != "kind"}
    ds = generate_mix_shift(MixShiftConfig(**spec))
    assert [e.label for e in cfg.dataset().examples] == [e.label for e in ds.examples]
