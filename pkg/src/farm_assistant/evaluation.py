"""Holdout evaluation and the multi-configuration comparison harness.

Intent metrics are computed on post-fallback labels, so the fallback class
shows up in the confusion matrix like any other outcome. Entity metrics use
exact span-and-type matching (no partial credit); the entity confusion matrix
is token level with B/I collapsed to the bare type, which keeps it square.

Report files are byte-stable: fixed column order, fixed label order, floats
printed with six decimals.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import NluExample, token_span
from .diet import (FALLBACK_INTENT, DietConfig, DietParams, apply_fallback,
                   diet_predict, diet_train)
from .embeddings import EmbeddingTable
from .errors import (ConfigError, EmptyTestSet, EmptyTrainingSet,
                     TooFewExamples, UnknownIntent)
from .featurizers import FeaturizerConfig, FeaturizerState, fit_featurizers
from .tokenizer import tokenize

DEFAULT_TEST_FRACTION = 0.2


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class NluReport:
    per_intent: dict[str, ClassMetrics]
    per_entity: dict[str, ClassMetrics]
    intent_labels: tuple[str, ...]
    intent_confusion: np.ndarray        # rows gold, columns predicted
    entity_labels: tuple[str, ...]      # entity types plus trailing "O"
    entity_confusion: np.ndarray        # token-level counts
    intent_accuracy: float
    intent_macro_f1: float
    intent_micro_f1: float
    entity_macro_f1: float
    n_examples: int


def split_dataset(examples: Sequence[NluExample], test_fraction: float,
                  seed: int) -> tuple[list[NluExample], list[NluExample]]:
    """Stratified split; single-example intents go to train with a warning."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be strictly between 0 and 1")
    by_intent: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        by_intent.setdefault(ex.intent, []).append(i)

    rng = np.random.default_rng(seed)
    test_indices: set[int] = set()
    for intent in sorted(by_intent):
        indices = by_intent[intent]
        if len(indices) < 2:
            warnings.warn(TooFewExamples(intent))
            continue
        n_test = int(round(len(indices) * test_fraction))
        n_test = min(max(n_test, 1), len(indices) - 1)
        order = rng.permutation(len(indices))
        test_indices.update(indices[k] for k in order[:n_test])

    train = [ex for i, ex in enumerate(examples) if i not in test_indices]
    test = [ex for i, ex in enumerate(examples) if i in test_indices]
    return train, test


def _metrics_from_confusion(confusion: np.ndarray,
                            labels: Sequence[str]) -> dict[str, ClassMetrics]:
    out = {}
    for i, label in enumerate(labels):
        tp = float(confusion[i, i])
        fp = float(confusion[:, i].sum() - confusion[i, i])
        fn = float(confusion[i].sum() - confusion[i, i])
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out[label] = ClassMetrics(precision, recall, f1, int(confusion[i].sum()))
    return out


def _macro_f1(metrics: dict[str, ClassMetrics]) -> float:
    supported = [m.f1 for m in metrics.values() if m.support > 0]
    return float(np.mean(supported)) if supported else 0.0


def _span_metrics(gold: set, pred: set, types: Sequence[str]) -> dict[str, ClassMetrics]:
    out = {}
    for t in types:
        gold_t = {s for s in gold if s[3] == t}
        pred_t = {s for s in pred if s[3] == t}
        tp = len(gold_t & pred_t)
        precision = tp / len(pred_t) if pred_t else 0.0
        recall = tp / len(gold_t) if gold_t else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out[t] = ClassMetrics(precision, recall, f1, len(gold_t))
    return out


def evaluate_nlu(params: DietParams, state: FeaturizerState,
                 examples: Sequence[NluExample],
                 table: Optional[EmbeddingTable] = None,
                 fallback_threshold: float = 0.3,
                 ambiguity_threshold: float = 0.1) -> NluReport:
    if not examples:
        raise EmptyTestSet("no examples to evaluate")

    intent_labels = list(params.intent_names)
    if FALLBACK_INTENT not in intent_labels:
        intent_labels.append(FALLBACK_INTENT)
    intent_index = {name: i for i, name in enumerate(intent_labels)}
    entity_types = sorted({t[2:] for t in params.tag_names if t != "O"})
    entity_labels = entity_types + ["O"]
    entity_index = {name: i for i, name in enumerate(entity_labels)}

    intent_confusion = np.zeros((len(intent_labels), len(intent_labels)), dtype=np.int64)
    entity_confusion = np.zeros((len(entity_labels), len(entity_labels)), dtype=np.int64)
    gold_spans: set = set()
    pred_spans: set = set()
    correct = 0

    for ex_no, ex in enumerate(examples):
        if ex.intent not in intent_index:
            raise UnknownIntent(ex.intent)
        prediction = diet_predict(ex.text, params, state, table)
        final = apply_fallback(prediction, fallback_threshold, ambiguity_threshold)
        intent_confusion[intent_index[ex.intent], intent_index[final]] += 1
        correct += int(final == ex.intent)

        tokens = tokenize(ex.text)
        gold_tags = ["O"] * len(tokens)
        for ann in ex.entities:
            span = token_span(tokens, ann.start, ann.end)
            if span is None:
                continue
            gold_spans.add((ex_no, span[0], span[1], ann.entity))
            for k in range(span[0], span[1]):
                gold_tags[k] = ann.entity
        pred_tags = ["O"] * len(tokens)
        for ent in prediction.entities:
            pred_spans.add((ex_no, ent.start_token, ent.end_token, ent.entity))
            for k in range(ent.start_token, min(ent.end_token, len(tokens))):
                pred_tags[k] = ent.entity
        for g, p in zip(gold_tags, pred_tags):
            entity_confusion[entity_index[g], entity_index[p]] += 1

    per_intent = _metrics_from_confusion(intent_confusion, intent_labels)
    per_entity = _span_metrics(gold_spans, pred_spans, entity_types)
    total = int(intent_confusion.sum())
    micro = float(np.trace(intent_confusion)) / total

    return NluReport(
        per_intent=per_intent,
        per_entity=per_entity,
        intent_labels=tuple(intent_labels),
        intent_confusion=intent_confusion,
        entity_labels=tuple(entity_labels),
        entity_confusion=entity_confusion,
        intent_accuracy=correct / len(examples),
        intent_macro_f1=_macro_f1(per_intent),
        intent_micro_f1=micro,
        entity_macro_f1=_macro_f1(per_entity),
        n_examples=len(examples),
    )


@dataclass(frozen=True)
class Preset:
    """One comparison entry: a model configuration plus its dense table."""
    name: str
    diet: DietConfig
    table: Optional[EmbeddingTable] = None


def built_in_presets(table_a: EmbeddingTable, table_b: EmbeddingTable,
                     base: DietConfig = DietConfig()) -> list[Preset]:
    """Sparse-only baseline, two dense-augmented variants, and a larger
    dense variant with masked-token training switched on."""
    large = replace(base, num_transformer_layers=4, transformer_size=256,
                    use_masked_language_model=True)
    return [
        Preset("sparse", base, None),
        Preset("sparse-dense-a", base, table_a),
        Preset("sparse-dense-b", base, table_b),
        Preset("sparse-dense-b-large-mlm", large, table_b),
    ]


@dataclass
class ConfigResult:
    name: str
    report: Optional[NluReport]
    error: Optional[str] = None


@dataclass
class ComparisonReport:
    entries: list[ConfigResult]
    n_train: int
    n_test: int
    seed: int
    test_fraction: float
    sparse_macro_f1: Optional[float] = None
    best_dense_name: Optional[str] = None
    best_dense_macro_f1: Optional[float] = None
    dense_at_least_sparse: Optional[bool] = None

    def ranking(self) -> list[tuple[str, float]]:
        rows = [(e.name, e.report.intent_macro_f1)
                for e in self.entries if e.report is not None]
        return sorted(rows, key=lambda r: (-r[1], r[0]))


def compare_configs(presets: Sequence[Preset], examples: Sequence[NluExample],
                    regex_patterns: Sequence[tuple[str, str]] = (),
                    featurizer: FeaturizerConfig = FeaturizerConfig(),
                    test_fraction: float = DEFAULT_TEST_FRACTION,
                    seed: int = 0) -> ComparisonReport:
    """Train every preset on one shared split and evaluate on the same test
    set. A preset that fails to train is flagged but does not stop the rest."""
    if len(presets) < 2:
        raise ConfigError("need at least two configurations to compare")
    train, test = split_dataset(examples, test_fraction, seed)
    if not train:
        raise EmptyTrainingSet("split left no training examples")
    if not test:
        raise EmptyTestSet("split left no test examples")
    state = fit_featurizers([tokenize(ex.text) for ex in train], featurizer,
                            regex_patterns=regex_patterns)

    entries = []
    for preset in presets:
        try:
            params, _ = diet_train(train, preset.diet, state, preset.table)
            entries.append(ConfigResult(preset.name,
                                        evaluate_nlu(params, state, test, preset.table)))
        except Exception as exc:  # keep going; one bad preset is still a report
            entries.append(ConfigResult(preset.name, None, f"{type(exc).__name__}: {exc}"))

    report = ComparisonReport(entries=entries, n_train=len(train), n_test=len(test),
                              seed=seed, test_fraction=test_fraction)

    sparse = [e for p, e in zip(presets, entries) if p.table is None and e.report]
    dense = [e for p, e in zip(presets, entries) if p.table is not None and e.report]
    if sparse and dense:
        best = max(dense, key=lambda e: e.report.intent_macro_f1)
        report.sparse_macro_f1 = sparse[0].report.intent_macro_f1
        report.best_dense_name = best.name
        report.best_dense_macro_f1 = best.report.intent_macro_f1
        report.dense_at_least_sparse = \
            report.best_dense_macro_f1 >= report.sparse_macro_f1
    return report


def _f(x: float) -> str:
    return "%.6f" % x


def render_reports(report: ComparisonReport, out_dir) -> None:
    """Write metrics.csv, the two confusion CSVs, and summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lines = ["config,kind,label,precision,recall,f1,support"]
    for entry in report.entries:
        if entry.report is None:
            continue
        r = entry.report
        for label in r.intent_labels:
            m = r.per_intent[label]
            lines.append(f"{entry.name},intent,{label},{_f(m.precision)},"
                         f"{_f(m.recall)},{_f(m.f1)},{m.support}")
        for label in r.entity_labels[:-1]:
            m = r.per_entity[label]
            lines.append(f"{entry.name},entity,{label},{_f(m.precision)},"
                         f"{_f(m.recall)},{_f(m.f1)},{m.support}")
    (out / "metrics.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    def confusion_csv(name: str, labels_of, matrix_of):
        rows = []
        header_written = False
        for entry in report.entries:
            if entry.report is None:
                continue
            labels = labels_of(entry.report)
            if not header_written:
                rows.append("config,gold," + ",".join(labels))
                header_written = True
            matrix = matrix_of(entry.report)
            for i, label in enumerate(labels):
                counts = ",".join(str(int(c)) for c in matrix[i])
                rows.append(f"{entry.name},{label},{counts}")
        (out / name).write_text("\n".join(rows) + "\n", encoding="utf-8")

    confusion_csv("intent_confusion.csv",
                  lambda r: r.intent_labels, lambda r: r.intent_confusion)
    confusion_csv("entity_confusion.csv",
                  lambda r: r.entity_labels, lambda r: r.entity_confusion)

    text = [f"nlu comparison: {report.n_train} train / {report.n_test} test examples,"
            f" seed {report.seed}, test fraction {_f(report.test_fraction)}"]
    for entry in report.entries:
        if entry.report is None:
            text.append(f"{entry.name}: FAILED ({entry.error})")
        else:
            r = entry.report
            text.append(f"{entry.name}: intent macro F1 {_f(r.intent_macro_f1)}"
                        f" | intent accuracy {_f(r.intent_accuracy)}"
                        f" | entity macro F1 {_f(r.entity_macro_f1)}")
    text.append("ranking (intent macro F1): "
                + ", ".join(f"{n} {_f(v)}" for n, v in report.ranking()))
    if report.dense_at_least_sparse is not None:
        verdict = "holds" if report.dense_at_least_sparse else "does not hold"
        text.append(f"observation: best dense-augmented macro F1 {_f(report.best_dense_macro_f1)}"
                    f" ({report.best_dense_name}) vs sparse-only {_f(report.sparse_macro_f1)}"
                    f" -> dense >= sparse {verdict} (corpus-dependent)")
    (out / "summary.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
