"""Semantically decomposed GANs.

Thin bindings over the C++ library: latent-space helpers, metrics, the glyph
dataset, training, evaluation, inversion and the inference service handlers.
Images are float32 numpy arrays shaped (3, R, R) or (N, 3, R, R) in [-1, 1].
"""

from ._core import (
    InferenceService,
    Model,
    calibrate_threshold,
    conformance_report,
    evaluate,
    lerp,
    make_glyphs,
    msssim,
    parameter_counts,
    roc_auc,
    sample_code,
    train,
    train_glyph_verifier,
    verification_metrics,
)

__all__ = [
    "InferenceService",
    "Model",
    "calibrate_threshold",
    "conformance_report",
    "evaluate",
    "lerp",
    "make_glyphs",
    "msssim",
    "parameter_counts",
    "roc_auc",
    "sample_code",
    "train",
    "train_glyph_verifier",
    "verification_metrics",
]
