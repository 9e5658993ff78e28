"""Description-similarity regularized zero-shot detection heads."""

from ._descreg import (
    AlignmentModel,
    ConfigError,
    Dataset,
    Detection,
    EmbeddingSource,
    FormatError,
    RegMode,
    RunConfig,
    Setting,
    StageError,
    config_keys,
    cosine_matrix,
    crop_plan,
    cluster_split,
    direct_similarity_reg,
    evaluate,
    harmonic_mean,
    infer,
    reproduce,
    self_excluding_softmax,
    simulate,
    train,
    train_synth_classifier,
    triplet_loss,
)

__all__ = [name for name in dir() if not name.startswith("_")]
