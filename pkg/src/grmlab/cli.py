"""Command-line entry point: ``grmlab {synth,train,eval,sweep,ablate,bench}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .bundle import read_bundle, write_bundle
from .experiment import (ABLATION_HEADER, SWEEP_HEADER, ExperimentConfig, complexity_smoke,
                         eval_report_csv, evaluate, load_trained, rows_to_csv, run_ablation,
                         run_bias_sweep, save_trained, train, write_training_log)
from .synth import MixShiftConfig, MotifConfig, generate_mix_shift, generate_sp_motif


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SystemExit(_fail(f"{self.prog}: {message}", 2))


def _fail(msg, code=1):
    print(f"error: {msg}".replace("\n", " "), file=sys.stderr)
    return code


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_synth(args):
    if args.kind == "mix":
        kw = {"bias_ratio": args.bias_ratio, "seed": args.seed}
        for key in ("num_domains", "nodes_per_domain", "num_classes", "feature_dim", "edge_prob"):
            if getattr(args, key) is not None:
                kw[key] = getattr(args, key)
        ds = generate_mix_shift(MixShiftConfig(**kw))
    else:
        kw = {"b": args.b, "seed": args.seed}
        if args.num_graphs is not None:
            kw["num_graphs"] = args.num_graphs
        ds = generate_sp_motif(MotifConfig(**kw))
    write_bundle(ds, args.out)


def cmd_train(args):
    cfg = ExperimentConfig.load(args.config)
    ds = cfg.dataset()
    res = train(cfg, ds, args.repeat)
    save_trained(res, cfg, ds, args.out)
    if args.log:
        write_training_log(res.log, args.log)


def cmd_eval(args):
    store, model, cfg, meta = load_trained(args.ckpt)
    ds = read_bundle(args.data)
    if ds.task != meta["task"] or ds.feature_dim != meta["d_x"] or ds.num_classes != meta["num_classes"]:
        raise ValueError("dataset does not match the checkpoint (task, feature dim or classes)")
    values = evaluate(store, model, ds, cfg, args.split)
    if not values:
        raise ValueError(f"dataset has no {args.split} examples")
    _write(args.report, eval_report_csv(values))


def cmd_sweep(args):
    cfg = ExperimentConfig.load(args.config)
    rows = run_bias_sweep(cfg, args.ratios, tuple(args.methods.split(",")))
    _write(args.report, rows_to_csv(SWEEP_HEADER, rows))


def cmd_ablate(args):
    cfg = ExperimentConfig.load(args.config)
    _write(args.report, rows_to_csv(ABLATION_HEADER, run_ablation(cfg)))


def cmd_bench(args):
    if args.sizes != sorted(args.sizes):
        raise ValueError("--sizes must be ascending")
    text = rows_to_csv(["n", "edges", "seconds"], complexity_smoke(args.sizes))
    if args.report:
        _write(args.report, text)
    else:
        sys.stdout.write(text)


def build_parser():
    p = _Parser(prog="grmlab", description="Generative risk minimization lab.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic benchmark bundle")
    s.add_argument("--kind", choices=("mix", "motif"), required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--bias-ratio", type=float, default=0.0)
    s.add_argument("--b", type=float, default=0.9)
    s.add_argument("--num-domains", type=int)
    s.add_argument("--nodes-per-domain", type=int)
    s.add_argument("--num-classes", type=int)
    s.add_argument("--feature-dim", type=int)
    s.add_argument("--edge-prob", type=float)
    s.add_argument("--num-graphs", type=int, help="motif training graphs")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train one model and write a checkpoint")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--log", help="training log CSV")
    s.add_argument("--repeat", type=int, default=0, help="repeat index for seeding")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint per domain")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--split", choices=("train", "valid", "test"), default="test")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="bias-ratio sweep on the mix-shift benchmark")
    s.add_argument("--config", required=True)
    s.add_argument("--ratios", type=_floats, default=[0.0, 0.1, 0.5, 0.9])
    s.add_argument("--methods", default="GRM,ERM")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("ablate", help="GRM against its three ablations")
    s.add_argument("--config", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("bench", help="forward+backward timing on dense random graphs")
    s.add_argument("--sizes", type=_ints, default=[50, 100, 200])
    s.add_argument("--report")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, RuntimeError, KeyError, TypeError, ArithmeticError) as exc:
        return _fail(str(exc) or type(exc).__name__)
    return 0


if __name__ == "__main__":
    sys.exit(main())
