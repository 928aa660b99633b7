"""Top-level assembly: one config file in, a trained engine out.

The config JSON has two sections. "pipeline" holds featurizer toggles, model
hyperparameters, and the fallback thresholds; "paths" points at the training
data, the optional embedding table and knowledge base, and the bundle output
directory. Relative paths are resolved against the config file's own
directory so a checked-in config works from any working directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .bundle import LoadedBundle, load_bundle, save_bundle
from .data import NluData, load_nlu_data, load_stories
from .diet import DietConfig, DietParams, LossBreakdown, diet_train
from .dialogue import TurnResult, handle_message, handle_message_detailed
from .domain import FALLBACK_INTENT, DomainSpec, load_domain
from .embeddings import EmbeddingTable, load_embedding_table
from .errors import ConfigError, MissingFile
from .featurizers import FeaturizerConfig, FeaturizerState, fit_featurizers
from .kb import (KB_FILES, KnowledgeBase, load_kb)
from .ted import TedConfig, TedParams, ted_train
from .tokenizer import tokenize
from .tracker import SessionStore

DEFAULT_FALLBACK_THRESHOLD = 0.3
DEFAULT_AMBIGUITY_THRESHOLD = 0.1


@dataclass
class EngineConfig:
    featurizer: FeaturizerConfig = field(default_factory=FeaturizerConfig)
    diet: DietConfig = field(default_factory=DietConfig)
    ted: TedConfig = field(default_factory=TedConfig)
    fallback_threshold: float = DEFAULT_FALLBACK_THRESHOLD
    ambiguity_threshold: float = DEFAULT_AMBIGUITY_THRESHOLD
    test_fraction: float = 0.2
    nlu_path: Path = Path("nlu.json")
    stories_path: Path = Path("stories.json")
    domain_path: Path = Path("domain.json")
    kb_dir: Optional[Path] = None
    embedding_table_path: Optional[Path] = None
    # the two dense tables the comparison harness swaps in
    table_a_path: Optional[Path] = None
    table_b_path: Optional[Path] = None
    bundle_dir: Path = Path("model")

    def __post_init__(self):
        if not 0.0 <= self.fallback_threshold <= 1.0:
            raise ConfigError("fallback_threshold must be in [0, 1]")
        if not 0.0 <= self.ambiguity_threshold <= 1.0:
            raise ConfigError("ambiguity_threshold must be in [0, 1]")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be strictly between 0 and 1")

    def validate_paths(self) -> None:
        """Fail on the first missing input before any training starts."""
        for path in (self.nlu_path, self.stories_path, self.domain_path):
            if not Path(path).is_file():
                raise MissingFile(str(path))
        for path in (self.embedding_table_path, self.table_a_path, self.table_b_path):
            if path is not None and not Path(path).is_file():
                raise MissingFile(str(path))
        if self.kb_dir is not None:
            for name in KB_FILES:
                if not (Path(self.kb_dir) / name).is_file():
                    raise MissingFile(str(Path(self.kb_dir) / name))


def _sub_config(raw: dict, key: str, ctor, label: str):
    section = raw.get(key, {})
    if not isinstance(section, dict):
        raise ConfigError(f"pipeline.{key} must be an object")
    try:
        return ctor(section)
    except TypeError as exc:
        raise ConfigError(f"{label}: {exc}") from None


def load_engine_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None

    pipeline = raw.get("pipeline", {})
    paths = raw.get("paths", {})
    base = path.parent

    def resolve(key: str, default: Optional[str]) -> Optional[Path]:
        value = paths.get(key, default)
        return None if value is None else (base / value)

    return EngineConfig(
        featurizer=_sub_config(pipeline, "featurizer",
                               lambda d: FeaturizerConfig(**d), "featurizer config"),
        diet=_sub_config(pipeline, "diet", lambda d: DietConfig(**d), "diet config"),
        ted=_sub_config(pipeline, "ted", lambda d: TedConfig(**d), "ted config"),
        fallback_threshold=float(pipeline.get("fallback_threshold",
                                              DEFAULT_FALLBACK_THRESHOLD)),
        ambiguity_threshold=float(pipeline.get("ambiguity_threshold",
                                               DEFAULT_AMBIGUITY_THRESHOLD)),
        test_fraction=float(pipeline.get("test_fraction", 0.2)),
        nlu_path=resolve("nlu", "nlu.json"),
        stories_path=resolve("stories", "stories.json"),
        domain_path=resolve("domain", "domain.json"),
        kb_dir=resolve("kb", None),
        embedding_table_path=resolve("embedding_table", None),
        table_a_path=resolve("table_a", None),
        table_b_path=resolve("table_b", None),
        bundle_dir=resolve("bundle_out", "model"),
    )


@dataclass
class TrainResult:
    bundle_dir: Path
    model_version: str
    diet_history: list[LossBreakdown]
    diet_params: DietParams
    ted_params: TedParams


def fit_pipeline(nlu: NluData, config: EngineConfig) -> FeaturizerState:
    token_lists = [tokenize(ex.text) for ex in nlu.examples]
    return fit_featurizers(token_lists, config.featurizer,
                           regex_patterns=nlu.regex_patterns)


def train_engine(config: EngineConfig) -> TrainResult:
    """Load and validate everything, fit both models, write the bundle."""
    config.validate_paths()
    nlu = load_nlu_data(config.nlu_path)
    stories = load_stories(config.stories_path)
    domain = load_domain(config.domain_path)
    table = (load_embedding_table(config.embedding_table_path)
             if config.embedding_table_path is not None else None)

    state = fit_pipeline(nlu, config)
    # the fallback label is produced by thresholding, never by the classifier
    intent_names = [i for i in domain.intents if i != FALLBACK_INTENT]
    diet_params, history = diet_train(
        nlu.examples, config.diet, state, table,
        intent_names=intent_names, entity_types=domain.entity_types)
    ted_params = ted_train(stories, domain, config.ted)

    version = save_bundle(
        config.bundle_dir, diet_params, ted_params, state, table, domain,
        nlu.synonyms, config.fallback_threshold, config.ambiguity_threshold)
    return TrainResult(Path(config.bundle_dir), version, history,
                       diet_params, ted_params)


@dataclass
class Engine:
    """Everything the dialogue loop needs, wired together."""
    diet_params: DietParams
    ted_params: TedParams
    featurizer_state: FeaturizerState
    embedding_table: Optional[EmbeddingTable]
    domain: DomainSpec
    kb: KnowledgeBase
    synonyms: dict
    store: SessionStore
    fallback_threshold: float
    ambiguity_threshold: float
    model_version: str

    def handle(self, session_id: str, message: str) -> list[str]:
        return handle_message(session_id, message, self)

    def handle_detailed(self, session_id: str, message: str) -> TurnResult:
        return handle_message_detailed(session_id, message, self)


def engine_from_bundle(loaded: LoadedBundle, kb: Optional[KnowledgeBase],
                       session_dir: Optional[Path] = None) -> Engine:
    if kb is None:
        kb = KnowledgeBase(plant_protection={}, nutrient={}, officers={})
    return Engine(
        diet_params=loaded.diet_params,
        ted_params=loaded.ted_params,
        featurizer_state=loaded.featurizer_state,
        embedding_table=loaded.embedding_table,
        domain=loaded.domain,
        kb=kb,
        synonyms=loaded.synonyms,
        store=SessionStore(session_dir),
        fallback_threshold=loaded.fallback_threshold,
        ambiguity_threshold=loaded.ambiguity_threshold,
        model_version=loaded.model_version,
    )


def load_engine(bundle_dir: str | Path, kb_dir: Optional[str | Path] = None,
                session_dir: Optional[str | Path] = None) -> Engine:
    """Bring a trained bundle back up for serving.

    Without a knowledge base directory every lookup misses, which the
    dialogue loop reports as a polite no-data reply rather than an error.
    """
    loaded = load_bundle(bundle_dir)
    kb = load_kb(kb_dir) if kb_dir is not None else None
    session_path = Path(session_dir) if session_dir is not None else None
    return engine_from_bundle(loaded, kb, session_path)
