"""Command-line entry point.

Subcommands: compare, preexp, ablate, trim, export, gradcheck, synth.
Options can come from a flat key=value config file (--config); explicit
flags win over the file, the file wins over built-in defaults.

Exit codes: 0 success, 2 configuration or usage, 3 dataset problems,
4 compute/graph/model failures, 5 I/O failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .autodiff import Tensor, grad_check
from .bench import (
    ExperimentConfig,
    export_run,
    resolve_dataset,
    run_ablation,
    run_compare,
    run_preexperiment,
    run_single,
)
from .dataio import save_graph
from .errors import ConfigError, DatasetError, GattrimError
from .graph import add_self_loops, edge_homophily, make_split
from .models import VARIANTS, TrainConfig, build_model, forward
from .seeding import derive_seed
from .synth import generate_synthetic
from .trimming import CLUSTER_MODES, run_trim_pipeline

EXIT_CONFIG, EXIT_DATASET, EXIT_COMPUTE, EXIT_IO = 2, 3, 4, 5

_DESK_REPS, _FULL_REPS = 20, 100
_DESK_HIDDEN, _FULL_HIDDEN = "16,32,64", "16,32,64,128"

_CONF_CASTS = {
    "dataset": str, "model": str, "cluster": str, "trim": str,
    "reps": int, "seed": int, "hidden": str, "out": str,
    "full_protocol": lambda v: v.lower() not in ("0", "false", "no"),
    "lr": float, "weight_decay": float, "max_epochs": int, "patience": int,
    "heads": int, "layers": int, "dropout": float,
    "finetune_max_epochs": lambda v: None if v.lower() == "none" else int(v),
    "keep_fraction": float, "treatment_seeds": str,
}


def read_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    opts = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _CONF_CASTS:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        try:
            opts[key] = _CONF_CASTS[key](value.strip())
        except ValueError as e:
            raise ConfigError(f"{path}:{line_no}: bad value for {key}: {e}") from e
    return opts


def _parse_int_list(text: str, what: str) -> tuple:
    try:
        items = tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError as e:
        raise ConfigError(f"bad {what} list {text!r}: {e}") from e
    if not items:
        raise ConfigError(f"empty {what} list")
    return items


def build_experiment_config(args, *, need_dataset=True) -> ExperimentConfig:
    conf = read_config_file(args.config) if args.config else {}

    def pick(name, default=None):
        value = getattr(args, name, None)
        if value is not None:
            return value
        if name in conf:
            return conf[name]
        return default

    dataset = pick("dataset")
    if need_dataset and dataset is None:
        raise ConfigError("no dataset given (use --dataset or a config file)")

    full = bool(pick("full_protocol", False))
    reps = pick("reps", _FULL_REPS if full else _DESK_REPS)
    hidden = _parse_int_list(pick("hidden", _FULL_HIDDEN if full else _DESK_HIDDEN),
                             "hidden")
    seed = pick("seed", 0)
    trim_flag = pick("trim", "low")
    trim_mode = {"low": "low_distraction", "high": "high_distraction"}.get(trim_flag)
    if trim_mode is None:
        raise ConfigError(f"unknown trim setting {trim_flag!r} (low or high)")

    train = TrainConfig(
        lr=pick("lr", 0.001), weight_decay=pick("weight_decay", 0.0001),
        max_epochs=pick("max_epochs", 600), patience=pick("patience", 50),
        hidden_dim=hidden[0], heads=pick("heads", 8),
        layers=pick("layers", 2), dropout=pick("dropout", 0.6), seed=seed,
        finetune_max_epochs=pick("finetune_max_epochs"))
    return ExperimentConfig(
        dataset=dataset or "", variant=pick("model", "gat"),
        cluster_mode=pick("cluster", "sup"), trim_mode=trim_mode,
        repetitions=reps, hidden_dims=hidden, train=train,
        out_dir=pick("out"), seed=seed)


def _require_out(cfg: ExperimentConfig, command: str) -> Path:
    if not cfg.out_dir:
        raise ConfigError(f"{command} needs an output directory (--out)")
    return Path(cfg.out_dir)


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def cmd_compare(args) -> int:
    cfg = build_experiment_config(args)
    report = run_compare(cfg)
    agg = report.aggregates
    print(f"base     {_pct(agg['base_mean'])} +- {_pct(agg['base_std'])}")
    print(f"trimmed  {_pct(agg['trimmed_mean'])} +- {_pct(agg['trimmed_std'])}")
    if report.diagnostics:
        d = report.diagnostics
        print(f"self-attention improved for {_pct(d['improved_fraction'])} of nodes")
        print(f"silhouette base {d['silhouette_base']:.4f} "
              f"trimmed {d['silhouette_trimmed']:.4f}")
    if cfg.out_dir:
        for path in export_run(cfg.out_dir, report=report):
            print(f"wrote {path}")
    return 0


def cmd_preexp(args) -> int:
    cfg = build_experiment_config(args)
    conf = read_config_file(args.config) if args.config else {}
    keep = args.keep_fraction if args.keep_fraction is not None \
        else conf.get("keep_fraction", 0.5)
    seeds_text = args.treatment_seeds if args.treatment_seeds is not None \
        else conf.get("treatment_seeds", "0,10,100")
    seeds = _parse_int_list(seeds_text, "treatment seed")
    report = run_preexperiment(cfg, keep_fraction=keep, treatment_seeds=seeds)
    for group in ("t0", "t1", "t2", "t3"):
        print(f"Y({group}) = {_pct(report.means[group])}")
    if cfg.out_dir:
        for path in export_run(cfg.out_dir, report=report):
            print(f"wrote {path}")
    return 0


def cmd_ablate(args) -> int:
    cfg = build_experiment_config(args)
    reports = run_ablation(cfg)
    for arm, report in reports.items():
        agg = report.aggregates
        print(f"{arm:17s} {_pct(agg['trimmed_mean'])} +- {_pct(agg['trimmed_std'])}")
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for arm, report in reports.items():
            path = out / f"report-{arm}.json"
            path.write_text(report.to_json() + "\n", encoding="utf-8")
            print(f"wrote {path}")
    return 0


def cmd_trim(args) -> int:
    cfg = build_experiment_config(args)
    out = _require_out(cfg, "trim")
    g = resolve_dataset(cfg.dataset)
    split = make_split(g, seed=derive_seed(cfg.seed, "split", 0))
    pipe = run_trim_pipeline(g, split, replace(cfg.train, seed=cfg.seed),
                             cfg.variant, cfg.cluster_mode, cfg.trim_mode)
    trimmed = pipe.trimmed.graph
    kept = trimmed.num_records - trimmed.num_self_loops
    print(f"trimmed graph: {trimmed.num_nodes} nodes, {kept} directed edges kept")
    for path in export_run(out, pipeline=pipe):
        print(f"wrote {path}")
    return 0


def cmd_export(args) -> int:
    cfg = build_experiment_config(args)
    out = _require_out(cfg, "export")
    report, pipe, embeddings = run_single(cfg)
    for path in export_run(out, report=report, pipeline=pipe,
                           embeddings=embeddings):
        print(f"wrote {path}")
    return 0


def _variant_worst_err(variant: str, seed: int) -> float:
    g = add_self_loops(generate_synthetic(20, 2, 6, 0.3, 3, 2.0, seed=seed))
    cfg = TrainConfig(hidden_dim=8, heads=2, layers=2, dropout=0.0, seed=seed)
    params = build_model(variant, g, cfg)
    train_idx = np.arange(10)

    slots = []
    for k, heads in enumerate(params.heads_per_layer):
        for t in range(heads):
            slots.append((params.W[k], t))
            slots.append((params.W2[k], t))
            if params.Wqk is not None:
                slots.append((params.Wqk[k], t))

    worst = 0.0
    for row, t in slots:
        original = row[t]

        def f(tape, probe):
            row[t] = probe
            try:
                logits, _ = forward(params, g, tape=tape)
                return tape.nll(tape.log_softmax(logits), g.labels, train_idx)
            finally:
                row[t] = original

        worst = max(worst, grad_check(f, Tensor(original.values.copy())))
    return worst


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    failed = False
    for variant in VARIANTS:
        err = _variant_worst_err(variant, seed)
        ok = err < args.tol
        failed = failed or not ok
        print(f"{variant:6s} worst relative error {err:.3e} "
              f"({'ok' if ok else f'exceeds {args.tol:g}'})")
    if failed:
        raise GattrimError("gradient check failed")
    return 0


def cmd_synth(args) -> int:
    conf = read_config_file(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else conf.get("seed", 0)
    out = args.out if args.out is not None else conf.get("out")
    if not out:
        raise ConfigError("synth needs an output directory (--out)")
    g = generate_synthetic(args.nodes, args.classes, args.features,
                           args.homophily, args.degree,
                           class_separation=args.separation, seed=seed)
    save_graph(g, out)
    print(f"wrote {out}: {g.num_nodes} nodes, {g.num_edges} edges, "
          f"homophily {edge_homophily(g):.4f}")
    return 0


_COMMANDS = {
    "compare": cmd_compare,
    "preexp": cmd_preexp,
    "ablate": cmd_ablate,
    "trim": cmd_trim,
    "export": cmd_export,
    "gradcheck": cmd_gradcheck,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--dataset", help="dataset directory or bundled name")
    shared.add_argument("--model", choices=VARIANTS)
    shared.add_argument("--cluster", choices=CLUSTER_MODES)
    shared.add_argument("--trim", choices=("low", "high"))
    shared.add_argument("--reps", type=int)
    shared.add_argument("--seed", type=int)
    shared.add_argument("--hidden", help="comma-separated sweep, e.g. 16,32,64")
    shared.add_argument("--out", help="output directory for artifacts")
    shared.add_argument("--full-protocol", action="store_true", default=None,
                        dest="full_protocol",
                        help="100 repetitions and the 16..128 sweep")
    shared.add_argument("--config", help="flat key=value options file")

    parser = argparse.ArgumentParser(
        prog="gattrim",
        description="Attention-guided causal graph trimming benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("compare", parents=[shared],
                   help="base model vs trim-and-retrain accuracy")
    pre = sub.add_parser("preexp", parents=[shared],
                         help="control vs treatment-group accuracies")
    pre.add_argument("--keep-fraction", type=float, dest="keep_fraction")
    pre.add_argument("--treatment-seeds", dest="treatment_seeds",
                     help="comma-separated, default 0,10,100")
    sub.add_parser("ablate", parents=[shared],
                   help="pipeline vs random-cluster vs high-distraction arms")
    sub.add_parser("trim", parents=[shared],
                   help="run the pipeline once and write the trimmed dataset")
    sub.add_parser("export", parents=[shared],
                   help="single run with the full artifact bundle")
    gc = sub.add_parser("gradcheck", parents=[shared],
                        help="finite-difference check of every variant")
    gc.add_argument("--tol", type=float, default=1e-4)
    sy = sub.add_parser("synth", parents=[shared],
                        help="generate a synthetic dataset directory")
    sy.add_argument("--nodes", type=int, default=600)
    sy.add_argument("--classes", type=int, default=5)
    sy.add_argument("--features", type=int, default=100)
    sy.add_argument("--homophily", type=float, default=0.15)
    sy.add_argument("--degree", type=float, default=5.0)
    sy.add_argument("--separation", type=float, default=2.0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"gattrim: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as e:
        print(f"gattrim: dataset error: {e}", file=sys.stderr)
        return EXIT_DATASET
    except OSError as e:
        print(f"gattrim: i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except GattrimError as e:
        print(f"gattrim: error: {e}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
