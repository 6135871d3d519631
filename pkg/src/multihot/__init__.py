"""Compact graph embeddings: a small shared basis matrix plus per-node
multi-hot integer codes, learned either from a pre-trained embedding table or
end-to-end from graph topology."""

from .codebook import (
    Codebook,
    CompressorParams,
    SoftAssignment,
    code_space_size,
    compute_logits,
    decode_codebook,
    harden,
    kd_sample,
    reconstruct_from_codebook,
    sample_soft_assignment,
    tau_schedule,
)
from .compress import EmbeddingCompressor
from .end2end import GraphEmbedder, Triplet, loss_topology, sample_triplets
from .evaluate import (
    ClassificationResult,
    EvalReport,
    LayoutCost,
    MemoryModel,
    OneVsRestLogisticRegression,
    auc_score,
    basis_utilization,
    compression_ratios,
    cosine_similarity,
    f1_scores,
    kd_cost,
    multi_hot_cost,
    one_hot_cost,
    predict_topk,
    run_classification_eval,
    run_linkpred_eval,
)
from .graph import (
    EdgeSplit,
    Graph,
    generate_sbm,
    load_edge_list,
    load_labels,
    normalize_adjacency,
    random_walks,
    split_edges,
)
from .sgns import SkipGramEmbedding

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "CompressorParams",
    "SoftAssignment",
    "code_space_size",
    "compute_logits",
    "decode_codebook",
    "harden",
    "kd_sample",
    "reconstruct_from_codebook",
    "sample_soft_assignment",
    "tau_schedule",
    "EmbeddingCompressor",
    "GraphEmbedder",
    "Triplet",
    "loss_topology",
    "sample_triplets",
    "ClassificationResult",
    "EvalReport",
    "LayoutCost",
    "MemoryModel",
    "OneVsRestLogisticRegression",
    "auc_score",
    "basis_utilization",
    "compression_ratios",
    "cosine_similarity",
    "f1_scores",
    "kd_cost",
    "multi_hot_cost",
    "one_hot_cost",
    "predict_topk",
    "run_classification_eval",
    "run_linkpred_eval",
    "EdgeSplit",
    "Graph",
    "generate_sbm",
    "load_edge_list",
    "load_labels",
    "normalize_adjacency",
    "random_walks",
    "split_edges",
    "SkipGramEmbedding",
    "__version__",
]
