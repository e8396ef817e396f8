"""Linear semantic autoencoder for zero-shot learning.

Fit a single linear map between an enriched visual-semantic space and the
attribute space in closed form, then classify unseen classes by cosine
similarity to decoded class prototypes.
"""
from ._backend import NAME as KERNEL_BACKEND
from .data import (
    GzslSplit,
    SyntheticConfig,
    ZslDataset,
    denoise_attributes,
    enrich,
    generate_synthetic,
    load_dataset,
    sample_attributes_for,
    save_dataset,
    split_gzsl,
)
from .evaluation import (
    ClassifyMode,
    classify,
    lambda_sweep,
    run_gzsl,
    run_zsl,
    silhouette_score,
)
from .model import IpSaeModel, SpaceMode, decode, encode, fit, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ClassifyMode",
    "GzslSplit",
    "IpSaeModel",
    "SpaceMode",
    "SyntheticConfig",
    "ZslDataset",
    "classify",
    "decode",
    "denoise_attributes",
    "encode",
    "enrich",
    "fit",
    "generate_synthetic",
    "lambda_sweep",
    "load_dataset",
    "load_model",
    "run_gzsl",
    "run_zsl",
    "sample_attributes_for",
    "save_dataset",
    "save_model",
    "silhouette_score",
    "split_gzsl",
]
