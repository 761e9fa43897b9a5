"""Run configuration: TOML loading, CLI overrides, canonical hashing.

Every artifact a pipeline stage writes embeds the hash of the config
sections that stage depends on; downstream stages recompute those hashes
from their own config and refuse mismatched inputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 path
    import tomli as tomllib

from .errors import ConfigError
from .model import ModelConfig

OBJECTIVES = ("baseline", "hcp", "multi_objective", "adaptive_softmax")


@dataclass
class CorpusConfig:
    train: str = ""
    valid: str = ""
    test: str = ""
    id: str = ""  # defaults to the train file's stem


@dataclass
class WordnetConfig:
    path: str = ""  # directory (WNDB) or file (fixture format)


@dataclass
class ClassmapConfig:
    depth: int = 6
    freq_threshold: float = math.inf  # "inf" in TOML


@dataclass
class VocabSettings:
    unk_threshold: int = 1


@dataclass
class PacingConfig:
    kind: str = "constant"
    a: float = 0.12
    b: float = 0.8


@dataclass
class OptimizerConfig:
    lr: float = 3e-4
    min_lr: float = 3e-5
    warmup_steps: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    grad_clip: float = 1.0


@dataclass
class TrainingConfig:
    steps: int = 2000
    batch_size: int = 16
    seed: int = 0
    objective: str = "hcp"
    eval_interval: int = 200
    checkpoint_interval: int = 0  # 0: only final


@dataclass
class MultiObjectiveConfig:
    weight: float = 0.2
    tap_layer: int = 0  # 0 means "last layer"
    mix_vocab: bool = False


@dataclass
class EvalConfig:
    strata: list = field(default_factory=lambda: [20, 50, 100, 300, 500])
    tie_epsilon: float = 1e-9


@dataclass
class OutputConfig:
    dir: str = "runs/run"


@dataclass
class RunConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    wordnet: WordnetConfig = field(default_factory=WordnetConfig)
    classmap: ClassmapConfig = field(default_factory=ClassmapConfig)
    vocab: VocabSettings = field(default_factory=VocabSettings)
    model: ModelConfig = field(default_factory=ModelConfig)
    pacing: PacingConfig = field(default_factory=PacingConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    multi_objective: MultiObjectiveConfig = field(default_factory=MultiObjectiveConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "RunConfig":
        from .curriculum import PacingSchedule  # raises ConfigError on bad values

        if self.training.objective not in OBJECTIVES:
            raise ConfigError(
                f"objective must be one of {OBJECTIVES}, got {self.training.objective!r}")
        PacingSchedule(kind=self.pacing.kind, a=self.pacing.a, b=self.pacing.b,
                       total_steps=self.training.steps, seed=self.training.seed)
        if self.classmap.depth < 1:
            raise ConfigError(f"classmap depth must be >= 1, got {self.classmap.depth}")
        if self.classmap.freq_threshold < 0:
            raise ConfigError("classmap freq_threshold must be >= 0")
        if self.vocab.unk_threshold < 0:
            raise ConfigError("vocab unk_threshold must be >= 0")
        if self.multi_objective.tap_layer < 0 or self.multi_objective.tap_layer > self.model.n_layers:
            raise ConfigError(
                f"tap_layer must be in [1, {self.model.n_layers}] (or 0 for last), "
                f"got {self.multi_objective.tap_layer}")
        if self.multi_objective.weight < 0:
            raise ConfigError("multi_objective weight must be >= 0")
        if self.training.steps < 1 or self.training.batch_size < 1:
            raise ConfigError("training steps and batch_size must be >= 1")
        if not self.corpus.id:
            self.corpus.id = Path(self.corpus.train).stem if self.corpus.train else "unknown"
        return self

    @property
    def tap_layer(self) -> int:
        return self.multi_objective.tap_layer or self.model.n_layers


_SECTION_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_SECTION_CLASSES = {
    "corpus": CorpusConfig, "wordnet": WordnetConfig, "classmap": ClassmapConfig,
    "vocab": VocabSettings, "model": ModelConfig, "pacing": PacingConfig,
    "optimizer": OptimizerConfig, "training": TrainingConfig,
    "multi_objective": MultiObjectiveConfig, "eval": EvalConfig, "output": OutputConfig,
}


def _coerce(value, target_type):
    if target_type is float:
        if isinstance(value, str):
            if value == "inf":
                return math.inf
            return float(value)
        return float(value)
    if target_type is int:
        if isinstance(value, bool):
            raise ConfigError(f"expected integer, got boolean {value}")
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"expected integer, got {value}")
        return int(value)
    if target_type is bool:
        if isinstance(value, str):
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ConfigError(f"expected boolean, got {value!r}")
        return bool(value)
    if target_type is str:
        return str(value)
    if target_type is list:
        if isinstance(value, str):
            return [int(x) for x in value.strip("[]").split(",") if x.strip()]
        return list(value)
    return value


def _build_section(cls, data: dict, section: str):
    kwargs = {}
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key [{section}] {key}")
        f = known[key]
        base = {"int": int, "float": float, "str": str, "bool": bool, "list": list}.get(
            str(f.type).split("[")[0], None)
        kwargs[key] = _coerce(value, base) if base else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError, ConfigError) as e:
        raise ConfigError(f"bad [{section}] config: {e}") from e


def config_from_dict(data: dict) -> RunConfig:
    sections = {}
    for name, value in data.items():
        cls = _SECTION_CLASSES.get(name)
        if cls is None:
            raise ConfigError(f"unknown config section [{name}]")
        if not isinstance(value, dict):
            raise ConfigError(f"config section [{name}] must be a table")
        sections[name] = _build_section(cls, value, name)
    return RunConfig(**sections).validate()


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply `section.key=value` strings on top of a raw config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key must be section.key, got {dotted!r}")
        section, key = parts
        data.setdefault(section, {})[key] = value
    return data


def load_config(path: str | os.PathLike, overrides: list[str] | None = None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from e
    if overrides:
        data = apply_overrides(data, overrides)
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# canonical form + hashing
# ---------------------------------------------------------------------------


def canonical_dict(cfg: RunConfig) -> dict:
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in sorted(x.items())}
        if isinstance(x, float) and math.isinf(x):
            return "inf"
        if isinstance(x, list):
            return [clean(v) for v in x]
        return x

    return clean(dataclasses.asdict(cfg))


# which sections each pipeline stage's identity depends on
STAGE_SECTIONS = {
    "classmap": ("corpus", "wordnet", "classmap"),
    "vocab": ("corpus", "wordnet", "classmap", "vocab"),
    "train": ("corpus", "wordnet", "classmap", "vocab", "model", "pacing",
              "optimizer", "training", "multi_objective"),
}


def config_hash(cfg: RunConfig, stage: str = "train") -> str:
    if stage not in STAGE_SECTIONS:
        raise ValueError(f"unknown stage {stage!r}")
    full = canonical_dict(cfg)
    subset = {k: full[k] for k in STAGE_SECTIONS[stage]}
    blob = json.dumps(subset, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
