"""Typing-error detection for noisy knowledge graphs.

The package covers the full paradigm spectrum: a noise-model classifier
trained semi-supervised with virtual adversarial smoothing, active
annotation rounds and per-pair dynamic learning rates; unsupervised
per-type outlier detection over learned embeddings; and the evaluation and
annotation machinery around both.
"""

__version__ = "0.1.0"

from .ingest import (
    CoarseDatasetConfig,
    DatasetSplit,
    EntityRecord,
    EntityStore,
    SynthConfig,
    SyntheticKG,
    TripleRecord,
    TypeAssertion,
    TypeHierarchy,
    build_coarse_dataset,
    build_entities,
    generate_synthetic_kg,
    parse_triples,
    type_level,
)
from .metrics import RateEstimate, average_precision, error_rate_ci, mean_average_precision, prf1
from .network import DescriptionSpec, EncoderConfig, FeatureEncoder, TypingModel, build_model
from .noise import apply_noise, apply_noise_np, project_noise_params
from .training import PriorBelief, TrainConfig, Trainer, Verdict, dynamic_lr
from .vat import VatConfig, adversarial_direction, multilabel_kl, vat_penalty

__all__ = [
    "CoarseDatasetConfig",
    "DatasetSplit",
    "DescriptionSpec",
    "EncoderConfig",
    "EntityRecord",
    "EntityStore",
    "FeatureEncoder",
    "PriorBelief",
    "RateEstimate",
    "SynthConfig",
    "SyntheticKG",
    "TrainConfig",
    "Trainer",
    "TripleRecord",
    "TypeAssertion",
    "TypeHierarchy",
    "TypingModel",
    "VatConfig",
    "Verdict",
    "adversarial_direction",
    "apply_noise",
    "apply_noise_np",
    "average_precision",
    "build_coarse_dataset",
    "build_entities",
    "build_model",
    "dynamic_lr",
    "error_rate_ci",
    "generate_synthetic_kg",
    "mean_average_precision",
    "multilabel_kl",
    "parse_triples",
    "prf1",
    "project_noise_params",
    "type_level",
    "vat_penalty",
]
