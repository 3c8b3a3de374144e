"""Learned, reference-free summary quality scoring.

One cross-encoder regressor per quality dimension (coherence, consistency,
fluency, relevance), fine-tuned on expert scores and grown with rounds of
pseudo-labeled data, plus lexical baselines and correlation tooling.
"""

from .corpus import AnnotatedExample, DatasetSplit, PseudoLabeledExample, UnlabeledExample, prepare_split
from .dimensions import InputMode, QualityDimension
from .encoding import TinyTestEncoder, build_input, encode, tokenize
from .regressor import OptimizerConfig, RegressionHead, ScorerModel, load_model, predict, predict_batch
from .stats import correlation_table, pearson, spearman
from .trainer import SelectionFunction, semi_supervised_train, supervised_round

__version__ = "0.1.0"

__all__ = [
    "AnnotatedExample",
    "DatasetSplit",
    "InputMode",
    "OptimizerConfig",
    "PseudoLabeledExample",
    "QualityDimension",
    "RegressionHead",
    "ScorerModel",
    "SelectionFunction",
    "TinyTestEncoder",
    "UnlabeledExample",
    "build_input",
    "correlation_table",
    "encode",
    "load_model",
    "pearson",
    "predict",
    "predict_batch",
    "prepare_split",
    "semi_supervised_train",
    "spearman",
    "supervised_round",
    "tokenize",
]
