"""Experiment runner: comparisons, pre-experiments, ablations, exports.

Repetitions are fully isolated: each derives its own split seed and RNG
streams from the master seed, so they could run in any order (or in
parallel); the report is assembled in one pass after all of them finish.
Reported numbers are bit-reproducible for a fixed master seed; wall-clock
timings are the only non-deterministic fields and live in their own slot.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clustering import random_clusters, save_clusters
from .dataio import load_bundled, load_graph, save_graph
from .errors import ConfigError
from .graph import add_self_loops, make_split
from .metrics import self_attention_delta, silhouette
from .models import (
    VARIANTS,
    TrainConfig,
    build_model,
    evaluate,
    extract_attention,
    node_embeddings,
    train,
)
from .seeding import derive_seed
from .treatments import TREATMENTS, apply_treatment
from .trimming import (
    CLUSTER_MODES,
    TRIM_MODES,
    run_trim_pipeline,
    save_retained,
    save_te_table,
    trim_graph,
)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    variant: str = "gat"
    cluster_mode: str = "sup"
    trim_mode: str = "low_distraction"
    repetitions: int = 20
    hidden_dims: tuple = (16, 32, 64)
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if len(self.hidden_dims) == 0:
            raise ConfigError("hidden-dim sweep list is empty")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown model variant {self.variant!r}")
        if self.cluster_mode not in CLUSTER_MODES:
            raise ConfigError(f"unknown cluster mode {self.cluster_mode!r}")
        if self.trim_mode not in TRIM_MODES:
            raise ConfigError(f"unknown trim mode {self.trim_mode!r}")

    def public(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("dataset", "variant", "cluster_mode", "trim_mode",
              "repetitions", "seed")}
        d["hidden_dims"] = list(self.hidden_dims)
        d["train"] = {k: getattr(self.train, k) for k in
                      ("lr", "weight_decay", "max_epochs", "patience",
                       "heads", "layers", "dropout", "finetune_max_epochs")}
        return d


def resolve_dataset(spec: str):
    """A directory path loads as a dataset directory; anything else is
    looked up among the bundled names."""
    p = Path(spec)
    if p.is_dir():
        return load_graph(p)
    return load_bundled(spec)


@dataclass
class RunReport:
    kind: str
    config: dict
    rows: list
    aggregates: dict
    diagnostics: dict
    timings: dict

    def deterministic_view(self) -> dict:
        return {"kind": self.kind, "config": self.config, "rows": self.rows,
                "aggregates": self.aggregates, "diagnostics": self.diagnostics}

    def to_json(self) -> str:
        doc = dict(self.deterministic_view())
        doc["timings"] = self.timings
        return json.dumps(doc, sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "RunReport":
        doc = json.loads(text)
        return RunReport(kind=doc["kind"], config=doc["config"],
                         rows=doc["rows"], aggregates=doc["aggregates"],
                         diagnostics=doc["diagnostics"],
                         timings=doc.get("timings", {}))


def _mean_std(rows, key):
    vals = np.array([r[key] for r in rows], dtype=np.float64)
    return float(vals.mean()), float(vals.std())


def _train_fresh(variant, g, split, tc: TrainConfig, stage_seed: int):
    params = build_model(variant, g, tc,
                         seed=derive_seed(stage_seed, "init"))
    best, rec = train(params, g, split, tc,
                      rng=np.random.default_rng(derive_seed(stage_seed,
                                                            "dropout")))
    return best, rec


def run_compare(cfg: ExperimentConfig, g=None) -> RunReport:
    """Per repetition: fresh split, base model on the original graph, the
    trimming pipeline (reusing the base model as its pretrained state), a
    cold retrain on the trimmed graph. The hidden-dim sweep picks each
    side's dimension by validation accuracy (ties to the earlier dim);
    test accuracy is only read at the very end."""
    t_start = time.perf_counter()
    if g is None:
        g = resolve_dataset(cfg.dataset)
    gm = add_self_loops(g)
    rows, diagnostics = [], {}

    for r in range(cfg.repetitions):
        split_seed = derive_seed(cfg.seed, "split", r)
        split = make_split(g, seed=split_seed)
        base_pick, cat_pick = None, None
        for h in cfg.hidden_dims:
            tc = replace(cfg.train, hidden_dim=h,
                         seed=derive_seed(cfg.seed, "rep", r, "hidden", h))
            base_params, base_rec = _train_fresh(
                cfg.variant, gm, split, tc, derive_seed(tc.seed, "base"))
            if base_pick is None or base_rec.val_accuracy > base_pick[0]:
                base_pick = (base_rec.val_accuracy, h, base_params)

            pipe_cfg = replace(tc, seed=derive_seed(tc.seed, "cat"))
            pipe = run_trim_pipeline(g, split, pipe_cfg, cfg.variant,
                                     cfg.cluster_mode, cfg.trim_mode,
                                     pretrained=base_params)
            re_params, re_rec = _train_fresh(
                cfg.variant, pipe.trimmed.graph, split, tc,
                derive_seed(tc.seed, "retrain"))
            if cat_pick is None or re_rec.val_accuracy > cat_pick[0]:
                cat_pick = (re_rec.val_accuracy, h, re_params, pipe,
                            base_params)

        _, h_base, base_params = base_pick
        _, h_cat, re_params, pipe, cat_base_params = cat_pick
        rows.append({
            "split_seed": int(split_seed),
            "hidden_base": int(h_base),
            "hidden_trimmed": int(h_cat),
            "base_accuracy": float(evaluate(base_params, gm, split.test)),
            "trimmed_accuracy": float(evaluate(re_params, pipe.trimmed.graph,
                                               split.test)),
        })
        if r == 0:
            before = extract_attention(cat_base_params, gm, pipe.clustering,
                                       layer=cfg.train.attention_layer)
            after = extract_attention(re_params, pipe.trimmed.graph,
                                      pipe.clustering,
                                      layer=cfg.train.attention_layer)
            delta, frac = self_attention_delta(before, after)
            diagnostics = {
                "self_attention_delta": [float(v) for v in delta],
                "improved_fraction": frac,
                "silhouette_base": silhouette(
                    node_embeddings(base_params, gm), g.labels),
                "silhouette_trimmed": silhouette(
                    node_embeddings(re_params, pipe.trimmed.graph), g.labels),
            }

    base_mean, base_std = _mean_std(rows, "base_accuracy")
    cat_mean, cat_std = _mean_std(rows, "trimmed_accuracy")
    return RunReport(
        kind="compare", config=cfg.public(), rows=rows,
        aggregates={"base_mean": base_mean, "base_std": base_std,
                    "trimmed_mean": cat_mean, "trimmed_std": cat_std},
        diagnostics=diagnostics,
        timings={"total": time.perf_counter() - t_start})


@dataclass
class PreexperimentReport:
    config: dict
    groups: dict
    means: dict
    timings: dict

    def deterministic_view(self) -> dict:
        return {"config": self.config, "groups": self.groups,
                "means": self.means}

    def to_json(self) -> str:
        doc = dict(self.deterministic_view())
        doc["timings"] = self.timings
        return json.dumps(doc, sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "PreexperimentReport":
        doc = json.loads(text)
        return PreexperimentReport(config=doc["config"], groups=doc["groups"],
                                   means=doc["means"],
                                   timings=doc.get("timings", {}))


def run_preexperiment(cfg: ExperimentConfig, keep_fraction: float = 0.5,
                      treatment_seeds=(0, 10, 100),
                      g=None) -> PreexperimentReport:
    """Control-vs-treatment accuracy per group.

    Per repetition the split and all training streams are shared across
    groups, so graphs are the only varying factor. t0 is the untouched
    control; t1/t2/t3 average over the treatment seeds. No hidden sweep:
    the configured hidden_dim is used as-is."""
    t_start = time.perf_counter()
    if g is None:
        g = resolve_dataset(cfg.dataset)
    groups = {t: [] for t in ("t0",) + TREATMENTS}

    for r in range(cfg.repetitions):
        split = make_split(g, seed=derive_seed(cfg.seed, "preexp-split", r))
        tc = replace(cfg.train, seed=derive_seed(cfg.seed, "preexp", r))
        stage = derive_seed(tc.seed, "fit")

        gm = add_self_loops(g)
        params, _ = _train_fresh(cfg.variant, gm, split, tc, stage)
        groups["t0"].append(float(evaluate(params, gm, split.test)))

        for t in TREATMENTS:
            accs = []
            for ts in treatment_seeds:
                gt = add_self_loops(apply_treatment(g, t, keep_fraction,
                                                    seed=ts))
                params, _ = _train_fresh(cfg.variant, gt, split, tc, stage)
                accs.append(float(evaluate(params, gt, split.test)))
            groups[t].append(float(np.mean(accs)))

    means = {t: float(np.mean(v)) for t, v in groups.items()}
    return PreexperimentReport(
        config={**cfg.public(), "keep_fraction": keep_fraction,
                "treatment_seeds": list(treatment_seeds)},
        groups=groups, means=means,
        timings={"total": time.perf_counter() - t_start})


def run_ablation(cfg: ExperimentConfig, random_seeds=(0, 10, 100),
                 g=None) -> dict:
    """Three arms under one protocol: the configured pipeline, the random
    clustering replacement (one run per seed in random_seeds), and the
    high-distraction trim. All arms share each repetition's split and
    pretrained base model; the high arm reuses the configured arm's TE
    table outright, since its protocol only differs at the trim step."""
    t_start = time.perf_counter()
    if g is None:
        g = resolve_dataset(cfg.dataset)
    gm = add_self_loops(g)
    rows = {"cat": [], "random_cluster": [], "high_distraction": []}

    for r in range(cfg.repetitions):
        split_seed = derive_seed(cfg.seed, "split", r)
        split = make_split(g, seed=split_seed)
        picks = {k: None for k in
                 ("base", "cat", "random_cluster", "high_distraction")}

        def consider(arm, val, entry):
            if picks[arm] is None or val > picks[arm][0]:
                picks[arm] = (val, entry)

        for h in cfg.hidden_dims:
            tc = replace(cfg.train, hidden_dim=h,
                         seed=derive_seed(cfg.seed, "rep", r, "hidden", h))
            base_params, base_rec = _train_fresh(
                cfg.variant, gm, split, tc, derive_seed(tc.seed, "base"))
            consider("base", base_rec.val_accuracy, (h, base_params))

            pipe_cfg = replace(tc, seed=derive_seed(tc.seed, "cat"))
            pipe = run_trim_pipeline(g, split, pipe_cfg, cfg.variant,
                                     cfg.cluster_mode, "low_distraction",
                                     pretrained=base_params)
            re_params, re_rec = _train_fresh(
                cfg.variant, pipe.trimmed.graph, split, tc,
                derive_seed(tc.seed, "retrain"))
            consider("cat", re_rec.val_accuracy,
                     (h, re_params, pipe.trimmed.graph))

            high = trim_graph(gm, pipe.clustering, pipe.te,
                              "high_distraction")
            hi_params, hi_rec = _train_fresh(
                cfg.variant, high.graph, split, tc,
                derive_seed(tc.seed, "retrain-high"))
            consider("high_distraction", hi_rec.val_accuracy,
                     (h, hi_params, high.graph))

            for s in random_seeds:
                sc = random_clusters(g.num_nodes, g.num_classes, seed=s)
                rnd_cfg = replace(tc, seed=derive_seed(tc.seed, "random", s))
                rnd = run_trim_pipeline(g, split, rnd_cfg, cfg.variant,
                                        clustering=sc,
                                        trim_mode=cfg.trim_mode,
                                        pretrained=base_params)
                rr_params, rr_rec = _train_fresh(
                    cfg.variant, rnd.trimmed.graph, split, tc,
                    derive_seed(tc.seed, "retrain-random", s))
                key = f"random_cluster:{s}"
                picks.setdefault(key, None)
                if picks[key] is None or rr_rec.val_accuracy > picks[key][0]:
                    picks[key] = (rr_rec.val_accuracy,
                                  (h, rr_params, rnd.trimmed.graph))

        h_base, base_params = picks["base"][1]
        base_acc = float(evaluate(base_params, gm, split.test))
        for arm in ("cat", "high_distraction"):
            h_arm, arm_params, arm_graph = picks[arm][1]
            rows[arm].append({
                "split_seed": int(split_seed),
                "hidden_base": int(h_base), "hidden_trimmed": int(h_arm),
                "base_accuracy": base_acc,
                "trimmed_accuracy": float(evaluate(arm_params, arm_graph,
                                                   split.test)),
            })
        for s in random_seeds:
            h_arm, arm_params, arm_graph = picks[f"random_cluster:{s}"][1]
            rows["random_cluster"].append({
                "split_seed": int(split_seed), "cluster_seed": int(s),
                "hidden_base": int(h_base), "hidden_trimmed": int(h_arm),
                "base_accuracy": base_acc,
                "trimmed_accuracy": float(evaluate(arm_params, arm_graph,
                                                   split.test)),
            })

    total = time.perf_counter() - t_start
    reports = {}
    for arm, arm_rows in rows.items():
        base_mean, base_std = _mean_std(arm_rows, "base_accuracy")
        mean, std = _mean_std(arm_rows, "trimmed_accuracy")
        reports[arm] = RunReport(
            kind=f"ablation-{arm}", config=cfg.public(), rows=arm_rows,
            aggregates={"base_mean": base_mean, "base_std": base_std,
                        "trimmed_mean": mean, "trimmed_std": std},
            diagnostics={}, timings={"total": total})
    return reports


def run_single(cfg: ExperimentConfig, g=None):
    """One comparison repetition without a sweep (first hidden dim only);
    returns (report, pipeline report, trimmed-graph embeddings) so the whole
    artifact bundle can be exported."""
    t_start = time.perf_counter()
    if g is None:
        g = resolve_dataset(cfg.dataset)
    gm = add_self_loops(g)
    split_seed = derive_seed(cfg.seed, "split", 0)
    split = make_split(g, seed=split_seed)
    h = cfg.hidden_dims[0]
    tc = replace(cfg.train, hidden_dim=h,
                 seed=derive_seed(cfg.seed, "rep", 0, "hidden", h))

    base_params, _ = _train_fresh(cfg.variant, gm, split, tc,
                                  derive_seed(tc.seed, "base"))
    pipe = run_trim_pipeline(g, split, replace(tc, seed=derive_seed(tc.seed, "cat")),
                             cfg.variant, cfg.cluster_mode, cfg.trim_mode,
                             pretrained=base_params)
    re_params, _ = _train_fresh(cfg.variant, pipe.trimmed.graph, split, tc,
                                derive_seed(tc.seed, "retrain"))

    row = {
        "split_seed": int(split_seed),
        "hidden_base": int(h), "hidden_trimmed": int(h),
        "base_accuracy": float(evaluate(base_params, gm, split.test)),
        "trimmed_accuracy": float(evaluate(re_params, pipe.trimmed.graph,
                                           split.test)),
    }
    before = extract_attention(base_params, gm, pipe.clustering,
                               layer=cfg.train.attention_layer)
    after = extract_attention(re_params, pipe.trimmed.graph, pipe.clustering,
                              layer=cfg.train.attention_layer)
    delta, frac = self_attention_delta(before, after)
    embeddings = node_embeddings(re_params, pipe.trimmed.graph)
    report = RunReport(
        kind="single", config=cfg.public(), rows=[row],
        aggregates={"base_mean": row["base_accuracy"], "base_std": 0.0,
                    "trimmed_mean": row["trimmed_accuracy"],
                    "trimmed_std": 0.0},
        diagnostics={
            "self_attention_delta": [float(v) for v in delta],
            "improved_fraction": frac,
            "silhouette_base": silhouette(node_embeddings(base_params, gm),
                                          g.labels),
            "silhouette_trimmed": silhouette(embeddings, g.labels),
        },
        timings={"total": time.perf_counter() - t_start})
    return report, pipe, embeddings


def export_run(out_dir, *, report=None, pipeline=None,
               embeddings=None) -> list:
    """Write whatever artifacts the run produced; returns written paths.

    report -> report.json; pipeline -> te_table.tsv, retained_clusters.tsv,
    clusters.tsv and the trimmed graph as a dataset directory; embeddings
    (with node count rows) -> embeddings.tsv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if report is not None:
        path = out / "report.json"
        path.write_text(report.to_json() + "\n", encoding="utf-8")
        written.append(path)
    if pipeline is not None:
        path = out / "te_table.tsv"
        save_te_table(pipeline.te, path)
        written.append(path)
        path = out / "retained_clusters.tsv"
        save_retained(pipeline.trimmed, path)
        written.append(path)
        path = out / "clusters.tsv"
        save_clusters(pipeline.clustering, path)
        written.append(path)
        trimmed_dir = out / "trimmed"
        save_graph(pipeline.trimmed.graph, trimmed_dir)
        written.append(trimmed_dir)
    if embeddings is not None:
        path = out / "embeddings.tsv"
        lines = ["\t".join([str(i)] + [repr(float(v)) for v in row])
                 for i, row in enumerate(np.asarray(embeddings))]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    return written
