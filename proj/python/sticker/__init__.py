"""Python bindings for the sticker multi-tag recognition toolkit."""

from ._core import (
    DataError,
    LorError,
    LossError,
    MetricsError,
    TagsetError,
    elbow_search,
    generate_synthetic,
    main_loss,
    majority_tag,
    metrics_report,
    patch_similarity,
    patchify,
    penalty,
    renewed_attention,
    run_cli,
    sample_mask_rounds,
    select_threshold,
    select_topk,
    topc_select,
    total_loss,
)

__all__ = [
    "DataError",
    "LorError",
    "LossError",
    "MetricsError",
    "TagsetError",
    "elbow_search",
    "generate_synthetic",
    "main_loss",
    "majority_tag",
    "metrics_report",
    "patch_similarity",
    "patchify",
    "penalty",
    "renewed_attention",
    "run_cli",
    "sample_mask_rounds",
    "select_threshold",
    "select_topk",
    "topc_select",
    "total_loss",
]
