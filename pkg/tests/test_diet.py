import math

import numpy as np
import pytest

from farm_assistant import diet
from farm_assistant.autodiff import Tensor
from farm_assistant.data import EntityAnnotation, NluExample
from farm_assistant.diet import (DietConfig, EntityPrediction, IntentPrediction,
                                 LossBreakdown, apply_fallback, diet_forward,
                                 diet_predict, diet_train, init_diet_params,
                                 map_synonyms)
from farm_assistant.embeddings import EmbeddingTable
from farm_assistant.errors import (ConfigError, EmptyMessage, EmptyTrainingSet,
                                   MaskingDisabled, UnknownIntent)
from farm_assistant.featurizers import FeaturizerConfig, fit_featurizers, featurize_message
from farm_assistant.tokenizer import tokenize

from helpers import central_difference_grads, relative_error


TOY = [
    NluExample("hello there", "greet"),
    NluExample("hi bot", "greet"),
    NluExample("good morning", "greet"),
    NluExample("bye now", "goodbye"),
    NluExample("see you", "goodbye"),
    NluExample("goodbye friend", "goodbye"),
    NluExample("my paddy has blast", "ask_remedy",
               (EntityAnnotation(3, 8, "crop", "paddy"),
                EntityAnnotation(13, 18, "disease", "blast"))),
    NluExample("tomato shows wilt", "ask_remedy",
               (EntityAnnotation(0, 6, "crop", "tomato"),
                EntityAnnotation(13, 17, "disease", "wilt"))),
    NluExample("banana leaf spot", "ask_remedy",
               (EntityAnnotation(0, 6, "crop", "banana"),)),
]


def small_config(**over):
    base = dict(epochs=2, num_transformer_layers=1, transformer_size=8,
                num_attention_heads=2, embedding_dim=4,
                sparse_input_dropout_rate=0.5, mask_fraction=0.3,
                relative_attention_max_distance=3, seed=7)
    base.update(over)
    return DietConfig(**base)


@pytest.fixture(scope="module")
def toy_state():
    token_lists = [tokenize(e.text) for e in TOY]
    return fit_featurizers(token_lists, FeaturizerConfig(use_regex=False), [])


def test_config_validation():
    with pytest.raises(ConfigError):
        DietConfig(sparse_input_dropout_rate=1.0)
    with pytest.raises(ConfigError):
        DietConfig(mask_fraction=-0.1)
    with pytest.raises(ConfigError):
        DietConfig(epochs=0)
    with pytest.raises(ConfigError):
        DietConfig(transformer_size=10, num_attention_heads=4)
    d = DietConfig()
    assert d.epochs == 145 and d.sparse_input_dropout_rate == 0.8


def test_config_round_trip():
    c = small_config(use_masked_language_model=True)
    assert DietConfig.from_dict(c.to_dict()) == c


def test_loss_breakdown_sum_enforced():
    LossBreakdown(1.0, 0.5, 0.25, 1.75)
    with pytest.raises(ValueError):
        LossBreakdown(1.0, 0.5, 0.25, 2.0)


def make_params(config, state, intents=("a", "b", "c", "d"), entity_types=("crop",)):
    rng = np.random.default_rng(config.seed)
    return init_diet_params(config, state.total_width, None, intents, entity_types, rng)


def test_intent_loss_uniform_is_log_n(toy_state):
    params = make_params(small_config(), toy_state)
    params.intent_head.data[:] = 0.0  # all similarities collapse to zero
    cls = np.ones(8)
    loss = diet.intent_loss(cls, params, "a")
    assert abs(loss - math.log(4)) < 1e-12


def test_intent_loss_hand_value(toy_state):
    # two intents, similarities (1, 0), gold first: loss = ln(1 + e^{-1})
    config = small_config(embedding_dim=1)
    params = make_params(config, toy_state, intents=("x", "y"))
    params.intent_head.data[:] = 0.0
    params.intent_head.data[0, 0] = 1.0
    params.intent_label_embeddings.data[:] = [[1.0], [0.0]]
    cls = np.zeros(8)
    cls[0] = 1.0
    loss = diet.intent_loss(cls, params, "x")
    assert abs(loss - math.log(1 + math.exp(-1.0))) < 1e-12


def test_intent_loss_unknown_intent(toy_state):
    params = make_params(small_config(), toy_state)
    with pytest.raises(UnknownIntent):
        diet.intent_loss(np.ones(8), params, "nope")


def test_mask_loss_requires_flag(toy_state):
    params = make_params(small_config(), toy_state)
    feats = featurize_message("hi", tokenize("hi"), toy_state)
    with pytest.raises(MaskingDisabled):
        diet.mask_loss(feats, params, np.random.default_rng(0))


def test_mask_loss_single_candidate_is_zero(toy_state):
    config = small_config(use_masked_language_model=True)
    params = make_params(config, toy_state)
    feats = featurize_message("hello", tokenize("hello"), toy_state)
    loss = diet.mask_loss(feats, params, np.random.default_rng(0))
    assert loss == 0.0


def test_mask_loss_uniform_two_candidates(toy_state):
    # zeroed reconstruction head makes every candidate equally similar
    config = small_config(use_masked_language_model=True)
    params = make_params(config, toy_state)
    params.mask_head.data[:] = 0.0

    feats = featurize_message("hello there", tokenize("hello there"), toy_state)
    batch = diet._features_to_batch(feats, params)
    batch.mask_rows = np.array([[True, True, False]])
    enc = diet._encode_batch(batch, params)
    loss = diet._mask_loss_from_encoded(enc, params, batch.mask_rows)
    assert abs(float(loss.data) - math.log(2)) < 1e-12


def test_forward_deterministic_and_shapes(toy_state):
    params = make_params(small_config(), toy_state)
    feats = featurize_message("my paddy", tokenize("my paddy"), toy_state)
    a = diet_forward(feats, params, mode="infer")
    b = diet_forward(feats, params, mode="infer")
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    tok, cls, em = a
    assert tok.shape == (2, 8)
    assert cls.shape == (8,)
    assert em.shape == (2, 3)  # O, B-crop, I-crop


def test_forward_single_token_shapes(toy_state):
    params = make_params(small_config(), toy_state)
    feats = featurize_message("hi", tokenize("hi"), toy_state)
    tok, cls, em = diet_forward(feats, params)
    assert tok.shape[0] == 1 and em.shape[0] == 1


def test_forward_dropout_zero_equals_infer(toy_state):
    params = make_params(small_config(sparse_input_dropout_rate=0.0), toy_state)
    feats = featurize_message("hello there", tokenize("hello there"), toy_state)
    train_out = diet_forward(feats, params, mode="train",
                             rng=np.random.default_rng(3))
    infer_out = diet_forward(feats, params, mode="infer")
    for x, y in zip(train_out, infer_out):
        assert np.array_equal(x, y)


def test_forward_train_dropout_changes_output(toy_state):
    params = make_params(small_config(), toy_state)
    feats = featurize_message("hello there", tokenize("hello there"), toy_state)
    train_out = diet_forward(feats, params, mode="train",
                             rng=np.random.default_rng(3))
    infer_out = diet_forward(feats, params, mode="infer")
    assert not np.array_equal(train_out[1], infer_out[1])


def gradcheck_setup(with_dense):
    config = small_config(use_masked_language_model=True, seed=11)
    token_lists = [tokenize(e.text) for e in TOY]
    state = fit_featurizers(token_lists, FeaturizerConfig(use_regex=False), [])
    table = None
    dense_dim = None
    if with_dense:
        vecs = {}
        vec_rng = np.random.default_rng(5)
        for toks in token_lists:
            for t in toks:
                vecs.setdefault(t.lower, vec_rng.normal(size=3))
        table = EmbeddingTable(3, vecs)
        dense_dim = 3

    intents = sorted({e.intent for e in TOY})
    etypes = sorted({a.entity for e in TOY for a in e.entities})
    intent_index = {n: i for i, n in enumerate(intents)}
    from farm_assistant.crf import bio_tags_for
    tag_index = {t: i for i, t in enumerate(bio_tags_for(etypes))}

    prepared = [diet._prepare_example(e, state, table, intent_index, tag_index, str(i))
                for i, e in enumerate(TOY[:4])]
    batch = diet._collate(prepared, state.total_width, dense_dim)
    diet._training_noise(batch, config, np.random.default_rng(13))

    rng = np.random.default_rng(config.seed)
    params = init_diet_params(config, state.total_width, dense_dim, intents, etypes, rng)
    return batch, params


@pytest.mark.parametrize("with_dense", [False, True])
def test_gradcheck_total_loss(with_dense):
    # analytic gradients of the combined objective vs central differences,
    # with dropout and token hiding frozen for the duration of the check
    batch, params = gradcheck_setup(with_dense)

    def total():
        i, m, e = diet._batch_losses(batch, params)
        return i + m + e

    named = params.tensors()
    tensors = [t for _, t in named]
    for t in tensors:
        t.grad = None
    total().backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in tensors]
    numeric = central_difference_grads(lambda: float(total().data), tensors, h=1e-5)
    worst = {}
    for (name, _), a, n in zip(named, analytic, numeric):
        worst[name] = relative_error(a, n)
    bad = {k: v for k, v in worst.items() if v >= 1e-4}
    assert not bad, f"gradient mismatch: {bad}"


def test_train_history_and_determinism(toy_state):
    config = small_config(epochs=3)
    p1, h1 = diet_train(TOY, config, toy_state)
    p2, h2 = diet_train(TOY, config, toy_state)
    assert len(h1) == 3
    for a, b in zip(h1, h2):
        assert (a.intent_loss, a.mask_loss, a.entity_loss, a.total) == \
               (b.intent_loss, b.mask_loss, b.entity_loss, b.total)
    for (na, ta), (nb, tb) in zip(p1.tensors(), p2.tensors()):
        assert na == nb and np.array_equal(ta.data, tb.data)
    # masking disabled: the mask component must be identically zero
    assert all(h.mask_loss == 0.0 for h in h1)
    assert all(h.total == h.intent_loss + h.mask_loss + h.entity_loss for h in h1)


def test_train_on_empty_set(toy_state):
    with pytest.raises(EmptyTrainingSet):
        diet_train([], small_config(), toy_state)


def test_train_loss_decreases(toy_state):
    config = small_config(epochs=25, sparse_input_dropout_rate=0.2)
    _, history = diet_train(TOY, config, toy_state)
    assert history[-1].total < history[0].total


def test_predict_confidences_and_entities(toy_state):
    config = small_config(epochs=40, sparse_input_dropout_rate=0.2,
                          transformer_size=16, embedding_dim=8)
    params, _ = diet_train(TOY, config, toy_state)
    pred = diet_predict("my paddy has blast", params, toy_state)
    confs = [c for _, c in pred.ranking]
    assert abs(sum(confs) - 1.0) < 1e-6
    assert all(0.0 <= c <= 1.0 for c in confs)
    assert len(pred.ranking) == 3  # covers every trained intent
    assert pred.intent == "ask_remedy"


def test_predict_empty_message(toy_state):
    params = make_params(small_config(), toy_state)
    with pytest.raises(EmptyMessage):
        diet_predict("   ", params, toy_state)


def test_predict_handles_extreme_similarities(toy_state):
    params = make_params(small_config(), toy_state)
    params.intent_head.data[:] = 1e6  # clamp keeps softmax finite
    pred = diet_predict("hello", params, toy_state)
    confs = [c for _, c in pred.ranking]
    assert abs(sum(confs) - 1.0) < 1e-6
    assert all(np.isfinite(c) for c in confs)


def rank(*pairs):
    return IntentPrediction(ranking=tuple(pairs), entities=())


def test_apply_fallback_low_confidence():
    p = rank(("ask_pp", 0.28), ("greet", 0.20))
    assert apply_fallback(p, 0.3, 0.1) == "nlu_fallback"


def test_apply_fallback_ambiguous():
    p = rank(("ask_pp", 0.55), ("ask_nm", 0.50))
    assert apply_fallback(p, 0.3, 0.1) == "nlu_fallback"


def test_apply_fallback_clear_winner():
    p = rank(("greet", 0.90), ("bye", 0.05))
    assert apply_fallback(p, 0.3, 0.1) == "greet"


def test_apply_fallback_single_intent_skips_gap():
    p = rank(("greet", 0.95))
    assert apply_fallback(p, 0.3, 0.1) == "greet"


def test_apply_fallback_returns_argmax_or_fallback():
    rng = np.random.default_rng(0)
    for _ in range(50):
        raw = rng.random(3)
        conf = raw / raw.sum()
        order = np.argsort(-conf)
        p = rank(*[(f"i{j}", float(conf[j])) for j in order])
        out = apply_fallback(p, 0.3, 0.1)
        assert out in ("nlu_fallback", p.ranking[0][0])


def ent(value, surface=None):
    surface = surface if surface is not None else value
    return EntityPrediction(entity="crop", value=value, surface=surface,
                            start=0, end=len(surface), start_token=0, end_token=1)


def test_map_synonyms():
    table = {"tomatoes": "tomato"}
    out = map_synonyms([ent("tomatoes")], table)
    assert out[0].value == "tomato"
    assert out[0].surface == "tomatoes"


def test_map_synonyms_absent_unchanged():
    out = map_synonyms([ent("paddy")], {"tomatoes": "tomato"})
    assert out[0].value == "paddy"


def test_map_synonyms_case_insensitive():
    out = map_synonyms([ent("Tomatoes")], {"tomatoes": "tomato"})
    assert out[0].value == "tomato"
