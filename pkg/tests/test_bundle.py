import json
import struct

import numpy as np
import pytest

from farm_assistant.bundle import (FORMAT_VERSION, load_bundle, model_version_of,
                                   read_params, save_bundle, write_params)
from farm_assistant.diet import diet_predict
from farm_assistant.engine import (EngineConfig, load_engine, load_engine_config,
                                   train_engine)
from farm_assistant.errors import BundleVersionError, ConfigError, MissingFile

NLU_JSON = {
    "version": 1,
    "examples": [
        {"text": "hello there", "intent": "greet", "entities": []},
        {"text": "hi bot", "intent": "greet", "entities": []},
        {"text": "good morning", "intent": "greet", "entities": []},
        {"text": "hey assistant", "intent": "greet", "entities": []},
        {"text": "bye now", "intent": "goodbye", "entities": []},
        {"text": "see you", "intent": "goodbye", "entities": []},
        {"text": "goodbye friend", "intent": "goodbye", "entities": []},
        {"text": "bye bye", "intent": "goodbye", "entities": []},
        {"text": "my paddy has blast", "intent": "ask_remedy",
         "entities": [{"start": 3, "end": 8, "entity": "crop"},
                      {"start": 13, "end": 18, "entity": "disease"}]},
        {"text": "paddy crop got blast disease", "intent": "ask_remedy",
         "entities": [{"start": 0, "end": 5, "entity": "crop"},
                      {"start": 15, "end": 20, "entity": "disease"}]},
        {"text": "tomato shows wilt", "intent": "ask_remedy",
         "entities": [{"start": 0, "end": 6, "entity": "crop"},
                      {"start": 13, "end": 17, "entity": "disease"}]},
        {"text": "blast attacked my paddy", "intent": "ask_remedy",
         "entities": [{"start": 0, "end": 5, "entity": "disease"},
                      {"start": 18, "end": 23, "entity": "crop"}]},
    ],
    "synonyms": {"tomatoes": "tomato"},
    "regex_patterns": [{"name": "phone", "pattern": r"\\+?\\d[\\d-]{6,}"}],
}

STORIES_JSON = [
    {"name": "greet", "steps": [{"user": {"intent": "greet"}},
                                {"action": "utter_greet"}]},
    {"name": "farewell", "steps": [{"user": {"intent": "goodbye"}},
                                   {"action": "utter_goodbye"}]},
    {"name": "remedy", "steps": [
        {"user": {"intent": "ask_remedy",
                  "entities": {"crop": "paddy", "disease": "blast"}}},
        {"action": "action_query_plant_protection"}]},
    {"name": "greet then remedy", "steps": [
        {"user": {"intent": "greet"}},
        {"action": "utter_greet"},
        {"user": {"intent": "ask_remedy",
                  "entities": {"crop": "paddy", "disease": "blast"}}},
        {"action": "action_query_plant_protection"}]},
]

DOMAIN_JSON = {
    "intents": ["greet", "goodbye", "ask_remedy"],
    "entities": ["crop", "disease"],
    "slots": [{"name": "crop", "from_entity": "crop"},
              {"name": "disease", "from_entity": "disease"}],
    "actions": ["utter_greet", "utter_goodbye", "utter_fallback",
                "action_query_plant_protection"],
    "responses": {
        "utter_greet": ["Hello! I am the farm assistant."],
        "utter_goodbye": ["Goodbye, happy farming!"],
        "utter_fallback": ["Sorry, I did not understand that."],
    },
}

CONFIG_JSON = {
    "pipeline": {
        "featurizer": {"use_regex": False},
        "diet": {"epochs": 60, "num_transformer_layers": 1, "transformer_size": 16,
                 "num_attention_heads": 2, "embedding_dim": 8,
                 "sparse_input_dropout_rate": 0.2,
                 "relative_attention_max_distance": 3, "seed": 7},
        "ted": {"num_layers": 1, "transformer_size": 16, "num_heads": 2,
                "embedding_dim": 8, "max_history": 8, "epochs": 60,
                "learning_rate": 0.01, "seed": 3},
        "fallback_threshold": 0.3,
        "ambiguity_threshold": 0.1,
    },
    "paths": {
        "nlu": "nlu.json",
        "stories": "stories.json",
        "domain": "domain.json",
        "kb": "kb",
        "bundle_out": "model",
    },
}


def write_corpus(root):
    (root / "nlu.json").write_text(json.dumps(NLU_JSON))
    (root / "stories.json").write_text(json.dumps(STORIES_JSON))
    (root / "domain.json").write_text(json.dumps(DOMAIN_JSON))
    kb = root / "kb"
    kb.mkdir()
    (kb / "plant_protection.csv").write_text(
        "crop,disease,remedy\npaddy,blast,Spray tricyclazole at 0.6 g/l.\n")
    (kb / "nutrient.csv").write_text(
        "crop,nutrient,remedy\npaddy,zinc,Apply zinc sulphate 25 kg/ha.\n")
    (kb / "officers.csv").write_text(
        "role,city,phone,mail\nado,theni,+91-1234-567,ado@agri.example\n")
    (root / "config.json").write_text(json.dumps(CONFIG_JSON))


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(root)
    return root


@pytest.fixture(scope="module")
def trained(corpus_dir):
    config = load_engine_config(corpus_dir / "config.json")
    return config, train_engine(config)


# --- params.bin codec ---

def test_params_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    named = [("diet.a", rng.normal(size=(3, 4))),
             ("diet.b", rng.normal(size=(7,))),
             ("ted.c", rng.normal(size=(2, 2, 2)))]
    path = tmp_path / "params.bin"
    write_params(path, named)
    back = read_params(path)
    assert list(back) == ["diet.a", "diet.b", "ted.c"]
    for name, arr in named:
        assert back[name].shape == arr.shape
        assert np.array_equal(back[name], arr)


def test_params_scalar_shape(tmp_path):
    path = tmp_path / "params.bin"
    write_params(path, [("x", np.array(3.5))])
    assert read_params(path)["x"] == 3.5


def test_params_version_refusal(tmp_path):
    path = tmp_path / "params.bin"
    write_params(path, [("x", np.zeros(2))])
    raw = bytearray(path.read_bytes())
    (length,) = struct.unpack("<I", raw[:4])
    header = json.loads(raw[4:4 + length].decode())
    header["format_version"] = FORMAT_VERSION + 1
    blob = json.dumps(header, separators=(",", ":")).encode()
    path.write_bytes(struct.pack("<I", len(blob)) + blob + raw[4 + length:])
    with pytest.raises(BundleVersionError):
        read_params(path)


def test_truncated_params_rejected(tmp_path):
    path = tmp_path / "params.bin"
    path.write_bytes(b"\x01")
    with pytest.raises(BundleVersionError):
        read_params(path)


# --- full bundle round trip ---

def test_train_writes_bundle_files(trained):
    config, result = trained
    for name in ("config.json", "featurizer_state.json", "params.bin"):
        assert (config.bundle_dir / name).is_file()
    assert len(result.model_version) == 12
    assert result.model_version == model_version_of(config.bundle_dir / "params.bin")
    assert len(result.diet_history) == 60


def test_loaded_bundle_predicts_identically(trained):
    config, result = trained
    loaded = load_bundle(config.bundle_dir)

    for (name_a, t_a), (name_b, t_b) in zip(result.diet_params.tensors(),
                                            loaded.diet_params.tensors()):
        assert name_a == name_b and np.array_equal(t_a.data, t_b.data)
    for (name_a, t_a), (name_b, t_b) in zip(result.ted_params.tensors(),
                                            loaded.ted_params.tensors()):
        assert name_a == name_b and np.array_equal(t_a.data, t_b.data)

    fresh = diet_predict("my paddy has blast", loaded.diet_params,
                         loaded.featurizer_state, loaded.embedding_table)
    orig = diet_predict("my paddy has blast", result.diet_params,
                        loaded.featurizer_state)
    assert fresh.ranking == orig.ranking
    assert fresh.intent == "ask_remedy"
    assert loaded.synonyms == {"tomatoes": "tomato"}
    assert loaded.fallback_threshold == 0.3
    assert loaded.domain.intents[-1] == "nlu_fallback"


def test_retrain_same_seed_byte_identical(corpus_dir, trained, tmp_path):
    config, result = trained
    again = load_engine_config(corpus_dir / "config.json")
    again.bundle_dir = tmp_path / "model2"
    rerun = train_engine(again)
    assert rerun.model_version == result.model_version
    assert (again.bundle_dir / "params.bin").read_bytes() == \
           (config.bundle_dir / "params.bin").read_bytes()


def test_bundle_version_refusal_in_config(trained, tmp_path):
    config, _ = trained
    clone = tmp_path / "clone"
    clone.mkdir()
    for name in ("config.json", "featurizer_state.json", "params.bin"):
        (clone / name).write_bytes((config.bundle_dir / name).read_bytes())
    doc = json.loads((clone / "config.json").read_text())
    doc["format_version"] = 99
    (clone / "config.json").write_text(json.dumps(doc))
    with pytest.raises(BundleVersionError):
        load_bundle(clone)


def test_bundle_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_bundle(tmp_path)


# --- engine load and serve path ---

def test_load_engine_end_to_end(trained, tmp_path):
    config, _ = trained
    engine = load_engine(config.bundle_dir, kb_dir=config.kb_dir,
                         session_dir=tmp_path / "sessions")
    assert engine.handle("s1", "hello there") == ["Hello! I am the farm assistant."]
    assert engine.handle("s1", "my paddy has blast") == \
        ["Spray tricyclazole at 0.6 g/l."]
    assert engine.model_version == model_version_of(config.bundle_dir / "params.bin")


def test_load_engine_without_kb_gives_no_data(trained):
    config, _ = trained
    engine = load_engine(config.bundle_dir)
    replies = engine.handle("s1", "my paddy has blast")
    assert replies and replies[0].startswith("Sorry, I don't have data")


# --- engine config parsing ---

def test_config_paths_resolved_relative_to_file(corpus_dir):
    config = load_engine_config(corpus_dir / "config.json")
    assert config.nlu_path == corpus_dir / "nlu.json"
    assert config.kb_dir == corpus_dir / "kb"
    assert config.embedding_table_path is None
    config.validate_paths()


def test_config_missing_stories_file(tmp_path):
    write_corpus(tmp_path)
    (tmp_path / "stories.json").unlink()
    config = load_engine_config(tmp_path / "config.json")
    with pytest.raises(MissingFile) as err:
        config.validate_paths()
    assert "stories.json" in str(err.value)


def test_config_rejects_unknown_keys(tmp_path):
    doc = {"pipeline": {"diet": {"epoch": 3}}, "paths": {}}
    (tmp_path / "config.json").write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_engine_config(tmp_path / "config.json")


def test_config_rejects_bad_json(tmp_path):
    (tmp_path / "config.json").write_text("{nope")
    with pytest.raises(ConfigError):
        load_engine_config(tmp_path / "config.json")


def test_config_threshold_bounds():
    with pytest.raises(ConfigError):
        EngineConfig(fallback_threshold=1.5)
