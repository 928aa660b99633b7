"""Joint intent classification and entity extraction.

One model does both jobs: sparse (and optionally dense) token features are
projected into a shared space, run through a transformer with relative
position attention, and read out three ways. The sentence (CLS) row is
embedded and compared against learned intent-label embeddings by dot product;
token rows feed a CRF tagging head; when masked-token training is on, a
reconstruction head must recover each hidden token among the batch's
candidates. Total training loss is the sum of the three parts.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import transformer as tfm
from .autodiff import Adam, Tensor, glorot_uniform
from .crf import (batch_negative_log_likelihood, bio_tags_for, crf_viterbi,
                  bio_spans, spans_to_bio)
from .data import NluExample, token_span
from .embeddings import EmbeddingTable
from .errors import (ConfigError, EmptyMessage, EmptyTrainingSet,
                     EntityAlignmentError, MaskingDisabled, ShapeMismatch,
                     UnknownIntent)
from .featurizers import FeaturizerState, MessageFeatures, featurize_message
from .tokenizer import tokenize

BATCH_SIZE = 32
SIMILARITY_CLAMP = 20.0
FALLBACK_INTENT = "nlu_fallback"


@dataclass(frozen=True)
class DietConfig:
    epochs: int = 145
    num_transformer_layers: int = 2
    transformer_size: int = 128
    num_attention_heads: int = 4
    embedding_dim: int = 20
    use_masked_language_model: bool = False
    sparse_input_dropout_rate: float = 0.8
    mask_fraction: float = 0.15
    learning_rate: float = 0.001
    relative_attention_max_distance: int = 5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.sparse_input_dropout_rate < 1.0):
            raise ConfigError("sparse_input_dropout_rate must be in [0, 1)")
        if not (0.0 <= self.mask_fraction < 1.0):
            raise ConfigError("mask_fraction must be in [0, 1)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.transformer_size % self.num_attention_heads != 0:
            raise ConfigError("transformer_size must be divisible by num_attention_heads")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "num_transformer_layers": self.num_transformer_layers,
            "transformer_size": self.transformer_size,
            "num_attention_heads": self.num_attention_heads,
            "embedding_dim": self.embedding_dim,
            "use_masked_language_model": self.use_masked_language_model,
            "sparse_input_dropout_rate": self.sparse_input_dropout_rate,
            "mask_fraction": self.mask_fraction,
            "learning_rate": self.learning_rate,
            "relative_attention_max_distance": self.relative_attention_max_distance,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "DietConfig":
        return DietConfig(**d)


@dataclass
class LossBreakdown:
    intent_loss: float
    mask_loss: float
    entity_loss: float
    total: float

    def __post_init__(self):
        # the recorded total is definitionally the sum; reject drift
        if abs(self.total - (self.intent_loss + self.mask_loss + self.entity_loss)) > 1e-12:
            raise ValueError("total must equal intent + mask + entity")


@dataclass(frozen=True)
class EntityPrediction:
    entity: str
    value: str
    surface: str
    start: int        # character offsets into the message
    end: int
    start_token: int  # token span, end exclusive
    end_token: int


@dataclass(frozen=True)
class IntentPrediction:
    ranking: tuple[tuple[str, float], ...]
    entities: tuple[EntityPrediction, ...]

    @property
    def intent(self) -> str:
        return self.ranking[0][0]

    @property
    def confidence(self) -> float:
        return self.ranking[0][1]


@dataclass
class DietParams:
    config: DietConfig
    intent_names: tuple[str, ...]
    tag_names: tuple[str, ...]
    sparse_w: Tensor
    sparse_b: Tensor
    dense_w: Optional[Tensor]
    dense_b: Optional[Tensor]
    pre_w: Tensor
    pre_b: Tensor
    layers: list[tfm.LayerParams]
    intent_head: Tensor
    intent_label_embeddings: Tensor
    entity_head: Tensor
    crf_transitions: Tensor
    mask_head: Optional[Tensor]
    target_embedder: Optional[Tensor]
    mask_vector: Optional[Tensor]

    def tensors(self) -> list[tuple[str, Tensor]]:
        named: list[tuple[str, Tensor]] = [
            ("sparse_w", self.sparse_w), ("sparse_b", self.sparse_b)]
        if self.dense_w is not None:
            named += [("dense_w", self.dense_w), ("dense_b", self.dense_b)]
        named += [("pre_w", self.pre_w), ("pre_b", self.pre_b)]
        for i, layer in enumerate(self.layers):
            named.extend(layer.tensors(f"layer{i}"))
        named += [
            ("intent_head", self.intent_head),
            ("intent_label_embeddings", self.intent_label_embeddings),
            ("entity_head", self.entity_head),
            ("crf_transitions", self.crf_transitions),
        ]
        if self.mask_head is not None:
            named += [("mask_head", self.mask_head),
                      ("target_embedder", self.target_embedder),
                      ("mask_vector", self.mask_vector)]
        return named


def diet_params_from_arrays(config: DietConfig, intent_names: Sequence[str],
                            tag_names: Sequence[str],
                            arrays: dict[str, np.ndarray]) -> DietParams:
    """Rebuild trained parameters from named flat arrays (bundle loading)."""
    def t(name):
        return Tensor(arrays[name], requires_grad=True)

    has_dense = "dense_w" in arrays
    layers = [tfm.LayerParams.from_arrays(f"layer{i}", arrays)
              for i in range(config.num_transformer_layers)]
    has_mask = "mask_head" in arrays
    return DietParams(
        config=config,
        intent_names=tuple(intent_names),
        tag_names=tuple(tag_names),
        sparse_w=t("sparse_w"), sparse_b=t("sparse_b"),
        dense_w=t("dense_w") if has_dense else None,
        dense_b=t("dense_b") if has_dense else None,
        pre_w=t("pre_w"), pre_b=t("pre_b"),
        layers=layers,
        intent_head=t("intent_head"),
        intent_label_embeddings=t("intent_label_embeddings"),
        entity_head=t("entity_head"),
        crf_transitions=t("crf_transitions"),
        mask_head=t("mask_head") if has_mask else None,
        target_embedder=t("target_embedder") if has_mask else None,
        mask_vector=t("mask_vector") if has_mask else None,
    )


def init_diet_params(config: DietConfig, sparse_width: int, dense_dim: Optional[int],
                     intent_names: Sequence[str], entity_types: Sequence[str],
                     rng: np.random.Generator) -> DietParams:
    s = config.transformer_size
    e = config.embedding_dim
    tags = bio_tags_for(entity_types)

    def w(shape, fi, fo):
        return Tensor(glorot_uniform(rng, shape, fi, fo), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    dense_w = dense_b = None
    if dense_dim is not None:
        dense_w = w((dense_dim, s), dense_dim, s)
        dense_b = zeros(s)

    layers = [tfm.init_layer(rng, s, config.num_attention_heads,
                             config.relative_attention_max_distance)
              for _ in range(config.num_transformer_layers)]

    mask_head = target_embedder = mask_vector = None
    if config.use_masked_language_model:
        mask_head = w((s, e), s, e)
        target_embedder = w((s, e), s, e)
        mask_vector = w((s,), s, s)

    return DietParams(
        config=config,
        intent_names=tuple(intent_names),
        tag_names=tuple(tags),
        sparse_w=w((sparse_width, s), sparse_width, s),
        sparse_b=zeros(s),
        dense_w=dense_w,
        dense_b=dense_b,
        pre_w=w((s, s), s, s),
        pre_b=zeros(s),
        layers=layers,
        intent_head=w((s, e), s, e),
        intent_label_embeddings=w((len(intent_names), e), len(intent_names), e),
        entity_head=w((s, len(tags)), s, len(tags)),
        crf_transitions=zeros(len(tags), len(tags)),
        mask_head=mask_head,
        target_embedder=target_embedder,
        mask_vector=mask_vector,
    )


# -- batched forward ----------------------------------------------------------

@dataclass
class _Batch:
    sparse: np.ndarray             # (B, T, sparse_width), rows beyond length are zero
    dense: Optional[np.ndarray]    # (B, T, dense_dim)
    lengths: np.ndarray            # (B,) row counts including the CLS row
    intent_idx: np.ndarray         # (B,)
    tags: np.ndarray               # (B, T-1) gold tag ids, padded with 0
    dropout_keep: Optional[np.ndarray] = None  # (B, T, sparse_width) 0/1
    mask_rows: Optional[np.ndarray] = None     # (B, T) bool, True = token hidden


@dataclass
class _Encoded:
    out: Tensor            # (B, T, size) transformer output
    inputs: Tensor         # (B, T, size) post-projection inputs before masking
    cls: Tensor            # (B, size)
    emissions: Tensor      # (B, T, n_tags)


def _encode_batch(batch: _Batch, params: DietParams) -> _Encoded:
    cfg = params.config
    sparse = batch.sparse
    if sparse.shape[-1] != params.sparse_w.shape[0]:
        raise ShapeMismatch(
            f"sparse width {sparse.shape[-1]} != {params.sparse_w.shape[0]}")
    if batch.dropout_keep is not None and cfg.sparse_input_dropout_rate > 0:
        # inverted dropout keeps train/infer scales aligned
        sparse = sparse * batch.dropout_keep / (1.0 - cfg.sparse_input_dropout_rate)

    h = Tensor(sparse) @ params.sparse_w + params.sparse_b
    if batch.dense is not None:
        if params.dense_w is None:
            raise ShapeMismatch("dense features given but model has no dense path")
        if batch.dense.shape[-1] != params.dense_w.shape[0]:
            raise ShapeMismatch(
                f"dense dim {batch.dense.shape[-1]} != {params.dense_w.shape[0]}")
        h = h + Tensor(batch.dense) @ params.dense_w + params.dense_b
    elif params.dense_w is not None:
        raise ShapeMismatch("model expects dense features but none given")

    inputs = h
    if batch.mask_rows is not None and batch.mask_rows.any():
        hidden = params.mask_vector.reshape(1, 1, -1)
        h = ad.where(batch.mask_rows[:, :, None], hidden, h)

    z = ad.gelu(h @ params.pre_w + params.pre_b)
    out = tfm.encode(z, params.layers, cfg.num_attention_heads,
                     cfg.relative_attention_max_distance, lengths=batch.lengths)

    b = out.shape[0]
    cls = out[np.arange(b), batch.lengths - 1]
    emissions = out @ params.entity_head
    return _Encoded(out=out, inputs=inputs, cls=cls, emissions=emissions)


def _intent_loss_from_cls(cls: Tensor, params: DietParams, gold_idx: np.ndarray) -> Tensor:
    sims = (cls @ params.intent_head) @ params.intent_label_embeddings.swapaxes(0, 1)
    sims = sims.clip(-SIMILARITY_CLAMP, SIMILARITY_CLAMP)
    logp = ad.log_softmax(sims, axis=-1)
    picked = logp[np.arange(len(gold_idx)), gold_idx]
    return -picked.mean()


def _mask_loss_from_encoded(enc: _Encoded, params: DietParams,
                            mask_rows: np.ndarray) -> Tensor:
    bi, ti = np.nonzero(mask_rows)
    if len(bi) == 0:
        return Tensor(np.asarray(0.0))
    recon = enc.out[bi, ti] @ params.mask_head            # (M, emb)
    targets = enc.inputs[bi, ti] @ params.target_embedder  # (M, emb)
    sims = (recon @ targets.swapaxes(0, 1)).clip(-SIMILARITY_CLAMP, SIMILARITY_CLAMP)
    logp = ad.log_softmax(sims, axis=-1)
    m = len(bi)
    return -logp[np.arange(m), np.arange(m)].mean()


def _entity_loss_from_encoded(enc: _Encoded, params: DietParams,
                              batch: _Batch) -> Tensor:
    token_lengths = batch.lengths - 1  # CLS row is not tagged
    return batch_negative_log_likelihood(enc.emissions, params.crf_transitions,
                                         token_lengths, batch.tags)


# -- training -----------------------------------------------------------------

@dataclass
class _Prepared:
    sparse: np.ndarray   # (n_tokens + 1, width)
    dense: Optional[np.ndarray]
    intent_idx: int
    tags: np.ndarray     # (n_tokens,)


def _prepare_example(example: NluExample, state: FeaturizerState,
                     table: Optional[EmbeddingTable], intent_index: dict[str, int],
                     tag_index: dict[str, int], example_id: str) -> _Prepared:
    tokens = tokenize(example.text)
    if not tokens:
        raise EmptyMessage(f"training example {example_id} has no tokens")
    feats = featurize_message(example.text, tokens, state, table)
    spans = []
    for ann in example.entities:
        ts = token_span(list(tokens), ann.start, ann.end)
        if ts is None:
            raise EntityAlignmentError(example_id)
        spans.append((ann.entity, ts[0], ts[1]))
    bio = spans_to_bio(len(tokens), spans)
    if example.intent not in intent_index:
        raise UnknownIntent(example.intent)
    return _Prepared(
        sparse=feats.sparse.toarray(),
        dense=feats.dense,
        intent_idx=intent_index[example.intent],
        tags=np.array([tag_index[t] for t in bio], dtype=int),
    )


def _collate(prepared: Sequence[_Prepared], sparse_width: int,
             dense_dim: Optional[int]) -> _Batch:
    b = len(prepared)
    t = max(p.sparse.shape[0] for p in prepared)
    sparse = np.zeros((b, t, sparse_width))
    dense = np.zeros((b, t, dense_dim)) if dense_dim is not None else None
    lengths = np.zeros(b, dtype=int)
    intent_idx = np.zeros(b, dtype=int)
    tags = np.zeros((b, max(t - 1, 1)), dtype=int)
    for i, p in enumerate(prepared):
        n = p.sparse.shape[0]
        sparse[i, :n] = p.sparse
        if dense is not None:
            dense[i, :n] = p.dense
        lengths[i] = n
        intent_idx[i] = p.intent_idx
        tags[i, :n - 1] = p.tags
    return _Batch(sparse=sparse, dense=dense, lengths=lengths,
                  intent_idx=intent_idx, tags=tags)


def _training_noise(batch: _Batch, cfg: DietConfig, rng: np.random.Generator) -> None:
    """Draw dropout and token-hiding noise for one step, in place."""
    if cfg.sparse_input_dropout_rate > 0:
        batch.dropout_keep = (
            rng.random(batch.sparse.shape) >= cfg.sparse_input_dropout_rate
        ).astype(float)
    if cfg.use_masked_language_model:
        b, t = batch.sparse.shape[:2]
        token_ok = np.arange(t)[None, :] < (batch.lengths - 1)[:, None]
        picked = (rng.random((b, t)) < cfg.mask_fraction) & token_ok
        for i in range(b):
            if not picked[i].any():
                # at least one token must be hidden per message
                picked[i, rng.integers(0, batch.lengths[i] - 1)] = True
        batch.mask_rows = picked


def _batch_losses(batch: _Batch, params: DietParams) -> tuple[Tensor, Tensor, Tensor]:
    enc = _encode_batch(batch, params)
    intent = _intent_loss_from_cls(enc.cls, params, batch.intent_idx)
    if batch.mask_rows is not None:
        mask = _mask_loss_from_encoded(enc, params, batch.mask_rows)
    else:
        mask = Tensor(np.asarray(0.0))
    entity = _entity_loss_from_encoded(enc, params, batch)
    return intent, mask, entity


def diet_train(examples: Sequence[NluExample], config: DietConfig,
               state: FeaturizerState, table: Optional[EmbeddingTable] = None,
               intent_names: Optional[Sequence[str]] = None,
               entity_types: Optional[Sequence[str]] = None,
               ) -> tuple[DietParams, list[LossBreakdown]]:
    """Fit the joint model. Label lists default to those present in the data;
    pass explicit lists to reserve labels the data does not yet cover."""
    if not examples:
        raise EmptyTrainingSet("no training examples")
    if intent_names is None:
        intent_names = sorted({e.intent for e in examples})
    if entity_types is None:
        entity_types = sorted({a.entity for e in examples for a in e.entities})

    intent_index = {name: i for i, name in enumerate(intent_names)}
    tag_names = bio_tags_for(entity_types)
    tag_index = {t: i for i, t in enumerate(tag_names)}

    dense_dim = table.dim if table is not None else None
    prepared = [
        _prepare_example(e, state, table, intent_index, tag_index, example_id=str(i))
        for i, e in enumerate(examples)
    ]

    rng = np.random.default_rng(config.seed)
    params = init_diet_params(config, state.total_width, dense_dim,
                              intent_names, entity_types, rng)
    opt = Adam([t for _, t in params.tensors()], lr=config.learning_rate)

    history: list[LossBreakdown] = []
    n = len(prepared)
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        sums = np.zeros(3)
        for lo in range(0, n, BATCH_SIZE):
            chunk = [prepared[j] for j in order[lo:lo + BATCH_SIZE]]
            batch = _collate(chunk, state.total_width, dense_dim)
            _training_noise(batch, config, rng)
            intent, mask, entity = _batch_losses(batch, params)
            total = intent + mask + entity
            opt.zero_grad()
            total.backward()
            opt.step()
            sums += np.array([float(intent.data), float(mask.data),
                              float(entity.data)]) * len(chunk)
        means = sums / n
        history.append(LossBreakdown(
            intent_loss=means[0], mask_loss=means[1], entity_loss=means[2],
            total=means[0] + means[1] + means[2]))
    return params, history


# -- inference ----------------------------------------------------------------

def _features_to_batch(features: MessageFeatures, params: DietParams) -> _Batch:
    sparse = features.sparse.toarray()[None, :, :]
    dense = features.dense[None, :, :] if features.dense is not None else None
    n_rows = features.sparse.n_rows
    return _Batch(
        sparse=sparse, dense=dense, lengths=np.array([n_rows]),
        intent_idx=np.zeros(1, dtype=int),
        tags=np.zeros((1, max(n_rows - 1, 1)), dtype=int),
    )


def diet_forward(features: MessageFeatures, params: DietParams, mode: str = "infer",
                 rng: Optional[np.random.Generator] = None,
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-message forward pass. Returns (token_encodings, cls_encoding,
    entity_emissions) as plain arrays; train mode draws input dropout."""
    batch = _features_to_batch(features, params)
    if mode == "train" and params.config.sparse_input_dropout_rate > 0:
        rng = rng if rng is not None else np.random.default_rng(params.config.seed)
        batch.dropout_keep = (
            rng.random(batch.sparse.shape) >= params.config.sparse_input_dropout_rate
        ).astype(float)
    enc = _encode_batch(batch, params)
    n_tok = features.n_tokens
    token_out = enc.out.data[0, :n_tok]
    cls = enc.cls.data[0]
    emissions = enc.emissions.data[0, :n_tok]
    return token_out, cls, emissions


def intent_loss(cls_encoding: np.ndarray, params: DietParams, gold_intent: str) -> float:
    if gold_intent not in params.intent_names:
        raise UnknownIntent(gold_intent)
    gold = np.array([params.intent_names.index(gold_intent)])
    loss = _intent_loss_from_cls(Tensor(cls_encoding[None, :]), params, gold)
    return float(loss.data)


def mask_loss(features: MessageFeatures, params: DietParams,
              rng: np.random.Generator) -> float:
    """Single-message masked-token loss with candidates drawn from this
    message only; training uses the batched equivalent."""
    if not params.config.use_masked_language_model:
        raise MaskingDisabled("use_masked_language_model is false")
    if features.n_tokens < 1:
        raise EmptyMessage("need at least one token to mask")
    batch = _features_to_batch(features, params)
    cfg = params.config
    picked = rng.random((1, batch.sparse.shape[1])) < cfg.mask_fraction
    picked[0, features.n_tokens:] = False
    if not picked.any():
        picked[0, rng.integers(0, features.n_tokens)] = True
    batch.mask_rows = picked
    enc = _encode_batch(batch, params)
    return float(_mask_loss_from_encoded(enc, params, picked).data)


def diet_predict(text: str, params: DietParams, state: FeaturizerState,
                 table: Optional[EmbeddingTable] = None) -> IntentPrediction:
    tokens = tokenize(text)
    if not tokens:
        raise EmptyMessage("message contains no tokens")
    features = featurize_message(text, tokens, state, table)
    _, cls, emissions = diet_forward(features, params, mode="infer")

    sims = (cls @ params.intent_head.data) @ params.intent_label_embeddings.data.T
    sims = np.clip(sims, -SIMILARITY_CLAMP, SIMILARITY_CLAMP)
    probs = np.exp(sims - sims.max())
    probs = probs / probs.sum()
    order = np.argsort(-probs, kind="stable")
    ranking = tuple((params.intent_names[i], float(probs[i])) for i in order)

    labels, _ = crf_viterbi(emissions, params.crf_transitions.data, list(params.tag_names))
    entities = []
    for etype, start_tok, end_tok in bio_spans(labels):
        start = tokens[start_tok].start
        end = tokens[end_tok - 1].end
        surface = text[start:end]
        entities.append(EntityPrediction(
            entity=etype, value=surface, surface=surface,
            start=start, end=end, start_token=start_tok, end_token=end_tok))
    return IntentPrediction(ranking=ranking, entities=tuple(entities))


def apply_fallback(prediction: IntentPrediction, threshold: float,
                   ambiguity_threshold: float) -> str:
    ranking = prediction.ranking
    top_name, top_conf = ranking[0]
    if top_conf < threshold:
        return FALLBACK_INTENT
    if len(ranking) > 1 and (top_conf - ranking[1][1]) < ambiguity_threshold:
        return FALLBACK_INTENT
    return top_name


def map_synonyms(entities: Sequence[EntityPrediction],
                 synonym_table: dict[str, str]) -> tuple[EntityPrediction, ...]:
    """Canonicalize entity values after decoding; surfaces stay untouched."""
    mapped = []
    for ent in entities:
        canonical = synonym_table.get(ent.value.lower())
        if canonical is None:
            mapped.append(ent)
        else:
            mapped.append(EntityPrediction(
                entity=ent.entity, value=canonical, surface=ent.surface,
                start=ent.start, end=ent.end,
                start_token=ent.start_token, end_token=ent.end_token))
    return tuple(mapped)
