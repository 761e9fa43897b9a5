"""Curriculum language modeling that anneals from hypernym-class prediction
to token prediction, with WordNet-driven class mapping, switchable softmax
supports, ablation baselines and stratified evaluation."""

from .classmap import (
    ClassMap,
    ClassMapParams,
    build_classmap,
    classmap_stats,
    count_frequencies,
)
from .curriculum import PacingSchedule, draw_step_kind, expected_hcp_steps, hcp_probability
from .model import (
    ForwardOutput,
    Mode,
    ModelConfig,
    SoftmaxSupport,
    forward,
    gradient_check,
    init_params,
    loss,
    masked_softmax,
)
from .train import LanguageModel, train
from .vocab import Batch, StepKind, VocabPartition, build_partition, substitute
from .wordnet import HypernymPath, Synset, WordNetDb, load_wordnet

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ClassMap",
    "ClassMapParams",
    "ForwardOutput",
    "HypernymPath",
    "LanguageModel",
    "Mode",
    "ModelConfig",
    "PacingSchedule",
    "SoftmaxSupport",
    "StepKind",
    "Synset",
    "VocabPartition",
    "WordNetDb",
    "build_classmap",
    "build_partition",
    "classmap_stats",
    "count_frequencies",
    "draw_step_kind",
    "expected_hcp_steps",
    "forward",
    "gradient_check",
    "hcp_probability",
    "init_params",
    "load_wordnet",
    "loss",
    "masked_softmax",
    "substitute",
    "train",
    "__version__",
]
