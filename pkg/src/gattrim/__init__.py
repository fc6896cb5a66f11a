"""Attention-guided graph trimming for node classification."""

from .autodiff import Tape, Tensor, grad_check
from .bench import (
    ExperimentConfig,
    RunReport,
    run_ablation,
    run_compare,
    run_preexperiment,
)
from .clustering import (
    SemanticClustering,
    adjusted_rand_index,
    kmeans_pp,
    mlp_pseudolabels,
    random_clusters,
    supervised_clusters,
)
from .dataio import load_bundled, load_graph, save_graph
from .graph import (
    Graph,
    Split,
    add_self_loops,
    edge_homophily,
    lnd_profile,
    make_graph,
    make_split,
)
from .metrics import self_attention_delta, silhouette
from .models import (
    ClusterAttention,
    ModelParams,
    TrainConfig,
    build_model,
    evaluate,
    extract_attention,
    forward,
    train,
)
from .optim import Adam, EarlyStopper
from .synth import generate_synthetic
from .treatments import apply_treatment
from .trimming import (
    TotalEffectTable,
    TrimmedGraph,
    intervene_cluster,
    run_trim_pipeline,
    total_effect,
    trim_graph,
)

__all__ = [
    "Adam", "ClusterAttention", "EarlyStopper", "ExperimentConfig", "Graph",
    "ModelParams", "RunReport", "SemanticClustering", "Split", "Tape",
    "Tensor", "TotalEffectTable", "TrainConfig", "TrimmedGraph",
    "add_self_loops", "adjusted_rand_index", "apply_treatment", "build_model",
    "edge_homophily", "evaluate", "extract_attention", "forward",
    "generate_synthetic", "grad_check", "intervene_cluster", "kmeans_pp",
    "lnd_profile", "load_bundled", "load_graph", "make_graph", "make_split",
    "mlp_pseudolabels", "random_clusters", "run_ablation", "run_compare",
    "run_preexperiment", "run_trim_pipeline", "save_graph",
    "self_attention_delta", "silhouette", "supervised_clusters",
    "total_effect", "train", "trim_graph",
]

__version__ = "0.1.0"
