import numpy as np
import pytest

from farm_assistant import tracker as tr
from farm_assistant import ted
from farm_assistant.data import ActionStep, Story, UserStep
from farm_assistant.domain import ACTION_LISTEN, DomainSpec
from farm_assistant.errors import (ConfigError, EmptyStories, ShapeMismatch,
                                   UnknownDomainReference)
from farm_assistant.ted import (TedConfig, feature_width, featurize_tracker,
                                init_ted_params, predict_next_action, ted_train,
                                unroll_stories)
from farm_assistant.tracker import DialogueTracker

from helpers import central_difference_grads, relative_error


def make_domain():
    return DomainSpec.from_dict({
        "intents": ["greet", "goodbye", "ask_remedy"],
        "entities": ["crop", "disease"],
        "slots": [{"name": "crop", "from_entity": "crop"},
                  {"name": "disease", "from_entity": "disease"}],
        "actions": ["utter_greet", "utter_goodbye", "action_query_plant_protection",
                    "utter_fallback"],
        "responses": {"utter_greet": ["Hello!"], "utter_goodbye": ["Bye!"],
                      "utter_fallback": ["Sorry?"]},
    })


STORIES = [
    Story("happy greet", (UserStep("greet"), ActionStep("utter_greet"))),
    Story("farewell", (UserStep("goodbye"), ActionStep("utter_goodbye"))),
    Story("remedy", (UserStep("greet"), ActionStep("utter_greet"),
                     UserStep("ask_remedy", {"crop": "paddy", "disease": "blast"}),
                     ActionStep("action_query_plant_protection"))),
]


def small_config(**over):
    base = dict(num_layers=1, transformer_size=16, num_heads=2, embedding_dim=8,
                max_history=8, epochs=60, learning_rate=0.01, seed=3)
    base.update(over)
    return TedConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        TedConfig(max_history=0)
    with pytest.raises(ConfigError):
        TedConfig(epochs=0)
    c = TedConfig()
    assert c.max_history == 8 and c.epochs == 100
    assert TedConfig.from_dict(c.to_dict()) == c


def test_feature_width_constant():
    domain = make_domain()
    # 3 intents + fallback, 2 entities, 2 slots, 4 actions + listen
    assert feature_width(domain) == 4 + 2 + 2 + 5


def test_featurize_fresh_greet_turn():
    domain = make_domain()
    t = DialogueTracker("s")
    t.apply(tr.user_message("hi", "greet", []))
    rows = featurize_tracker(t, domain, 8)
    assert len(rows) == 1
    row = rows[0]
    assert row.intent[domain.intents.index("greet")] == 1.0
    assert row.intent.sum() == 1.0
    assert row.entities.sum() == 0.0
    assert row.slots.sum() == 0.0
    assert row.action[domain.actions.index(ACTION_LISTEN)] == 1.0
    assert row.action.sum() == 1.0


def test_featurize_truncates_to_max_history():
    domain = make_domain()
    t = DialogueTracker("s")
    for _ in range(10):
        t.apply(tr.user_message("hi", "greet", []))
        t.apply(tr.action_executed("utter_greet"))
        t.apply(tr.action_executed(ACTION_LISTEN))
    rows = featurize_tracker(t, domain, 8)
    assert len(rows) == 8


def test_featurize_slot_persistence():
    domain = make_domain()
    t = DialogueTracker("s")
    t.apply(tr.user_message("hi", "greet", []))
    t.apply(tr.action_executed("utter_greet"))
    t.apply(tr.action_executed(ACTION_LISTEN))
    t.apply(tr.user_message("my paddy", "ask_remedy",
                            [{"entity": "crop", "value": "paddy"}]))
    t.apply(tr.slot_set("crop", "paddy"))
    t.apply(tr.action_executed("action_query_plant_protection"))
    t.apply(tr.action_executed(ACTION_LISTEN))
    t.apply(tr.user_message("thanks", "goodbye", []))

    rows = featurize_tracker(t, domain, 8)
    crop = domain.slot_names.index("crop")
    assert rows[0].slots[crop] == 0.0
    assert rows[1].slots[crop] == 1.0
    assert rows[2].slots[crop] == 1.0  # persists into later turns


def test_featurize_completed_turn_shows_own_action():
    domain = make_domain()
    t = DialogueTracker("s")
    t.apply(tr.user_message("hi", "greet", []))
    t.apply(tr.action_executed("utter_greet"))
    t.apply(tr.action_executed(ACTION_LISTEN))
    t.apply(tr.user_message("bye", "goodbye", []))
    rows = featurize_tracker(t, domain, 8)
    # completed turn 1 shows its substantive response, not the listen that
    # closed it; the fresh turn 2 has not acted yet
    assert rows[0].action[domain.actions.index("utter_greet")] == 1.0
    assert rows[1].action[domain.actions.index(ACTION_LISTEN)] == 1.0


def test_featurize_midturn_shows_latest_action():
    domain = make_domain()
    t = DialogueTracker("s")
    t.apply(tr.user_message("hi", "greet", []))
    t.apply(tr.action_executed("utter_greet"))
    rows = featurize_tracker(t, domain, 8)
    assert rows[0].action[domain.actions.index("utter_greet")] == 1.0


def test_unroll_appends_listen_pairs():
    domain = make_domain()
    pairs = unroll_stories([STORIES[0]], domain, 8)
    listen = domain.actions.index(ACTION_LISTEN)
    greet = domain.actions.index("utter_greet")
    assert [g for _, g in pairs] == [greet, listen]
    # the listen pair must see the executed greet in its features
    rows = pairs[1][0]
    assert rows[-1].action[greet] == 1.0


def test_unroll_rejects_unknown_references():
    domain = make_domain()
    with pytest.raises(UnknownDomainReference):
        unroll_stories([Story("bad", (UserStep("greet"), ActionStep("action_nope")))],
                       domain, 8)
    with pytest.raises(UnknownDomainReference):
        unroll_stories([Story("bad", (UserStep("martian"), ActionStep("utter_greet")))],
                       domain, 8)
    with pytest.raises(UnknownDomainReference):
        unroll_stories([Story("bad", (UserStep("greet", {"metal": "iron"}),
                                      ActionStep("utter_greet")))], domain, 8)
    with pytest.raises(UnknownDomainReference):
        unroll_stories([Story("bad", (ActionStep("utter_greet"),))], domain, 8)


def test_train_empty_stories():
    with pytest.raises(EmptyStories):
        ted_train([], make_domain(), small_config())


def test_train_deterministic():
    domain = make_domain()
    cfg = small_config(epochs=3)
    p1 = ted_train(STORIES, domain, cfg)
    p2 = ted_train(STORIES, domain, cfg)
    for (na, ta), (nb, tb) in zip(p1.tensors(), p2.tensors()):
        assert na == nb and np.array_equal(ta.data, tb.data)


@pytest.fixture(scope="module")
def trained():
    domain = make_domain()
    params = ted_train(STORIES, domain, small_config())
    return domain, params


def test_train_recovers_stories_exactly(trained):
    domain, params = trained
    pairs = unroll_stories(STORIES, domain, params.config.max_history)
    x, lengths, gold = ted._collate(pairs, feature_width(domain))
    sims = ted._similarities(x, lengths, params).data
    assert (sims.argmax(axis=1) == gold).all()


def test_predict_after_greet(trained):
    domain, params = trained
    t = DialogueTracker("s")
    t.apply(tr.user_message("hi", "greet", []))
    action, conf = predict_next_action(t, params, domain)
    assert action == "utter_greet"
    assert conf > 0.5


def test_predict_confidences_sum_to_one(trained):
    domain, params = trained
    t = DialogueTracker("s")
    t.apply(tr.user_message("hi", "greet", []))
    dist = ted.action_confidences(t, params, domain)
    assert abs(sum(dist.values()) - 1.0) < 1e-6
    assert set(dist) == set(domain.actions)


def test_untrained_equal_embeddings_tie_break():
    domain = make_domain()
    cfg = small_config()
    params = init_ted_params(cfg, feature_width(domain), domain.actions,
                             np.random.default_rng(0))
    params.action_embeddings.data[:] = 1.0  # identical rows, identical sims
    t = DialogueTracker("s")
    t.apply(tr.user_message("hi", "greet", []))
    action, conf = predict_next_action(t, params, domain)
    assert action == domain.actions[0]
    assert abs(conf - 1.0 / len(domain.actions)) < 1e-12


def test_prediction_causal_and_padding_independent(trained):
    domain, params = trained
    pairs = unroll_stories(STORIES, domain, params.config.max_history)
    rows = pairs[-1][0]
    x, lengths, _ = ted._collate([(rows, 0)], feature_width(domain))
    sims_tight = ted._similarities(x, lengths, params).data[0]

    # same rows followed by junk padding rows, same declared length
    x_padded = np.concatenate([x, np.ones((1, 3, x.shape[2]))], axis=1)
    sims_padded = ted._similarities(x_padded, lengths, params).data[0]
    assert np.allclose(sims_tight, sims_padded, atol=1e-12)


def test_width_mismatch_rejected(trained):
    domain, params = trained
    with pytest.raises(ShapeMismatch):
        ted._similarities(np.zeros((1, 1, 7)), np.array([1]), params)


def test_gradcheck_ted():
    domain = make_domain()
    cfg = TedConfig(num_layers=1, transformer_size=8, num_heads=2,
                    embedding_dim=4, max_history=4, epochs=1, seed=5)
    pairs = unroll_stories(STORIES, domain, cfg.max_history)
    x, lengths, gold = ted._collate(pairs, feature_width(domain))
    params = init_ted_params(cfg, feature_width(domain), domain.actions,
                             np.random.default_rng(cfg.seed))

    import farm_assistant.autodiff as ad

    def loss_t():
        sims = ted._similarities(x, lengths, params)
        logp = ad.log_softmax(sims, axis=-1)
        return -logp[np.arange(len(gold)), gold].mean()

    named = params.tensors()
    tensors = [t for _, t in named]
    for t in tensors:
        t.grad = None
    loss_t().backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in tensors]
    numeric = central_difference_grads(lambda: float(loss_t().data), tensors, h=1e-5)
    bad = {}
    for (name, _), a, n in zip(named, analytic, numeric):
        err = relative_error(a, n)
        if err >= 1e-4:
            bad[name] = err
    assert not bad, f"gradient mismatch: {bad}"
