import pytest
from fastapi.testclient import TestClient

from farm_assistant.data import ActionStep, EntityAnnotation, NluExample, Story, UserStep
from farm_assistant.diet import DietConfig, diet_train
from farm_assistant.domain import DomainSpec
from farm_assistant.engine import Engine
from farm_assistant.featurizers import FeaturizerConfig, fit_featurizers
from farm_assistant.kb import KnowledgeBase
from farm_assistant.server import create_app
from farm_assistant.ted import TedConfig, ted_train
from farm_assistant.tokenizer import tokenize
from farm_assistant.tracker import SessionStore

NLU = [
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
    NluExample("blast attacked my paddy", "ask_remedy",
               (EntityAnnotation(0, 5, "disease", "blast"),
                EntityAnnotation(18, 23, "crop", "paddy"))),
]

STORIES = [
    Story("greet", (UserStep("greet"), ActionStep("utter_greet"))),
    Story("farewell", (UserStep("goodbye"), ActionStep("utter_goodbye"))),
    Story("remedy", (UserStep("ask_remedy", {"crop": "paddy", "disease": "blast"}),
                     ActionStep("action_query_plant_protection"))),
]


def make_engine(session_dir=None):
    domain = DomainSpec.from_dict({
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
    })
    state = fit_featurizers([tokenize(e.text) for e in NLU],
                            FeaturizerConfig(use_regex=False), [])
    diet_params, _ = diet_train(
        NLU,
        DietConfig(epochs=60, num_transformer_layers=1, transformer_size=16,
                   num_attention_heads=2, embedding_dim=8,
                   sparse_input_dropout_rate=0.2,
                   relative_attention_max_distance=3, seed=7),
        state, intent_names=[i for i in domain.intents if i != "nlu_fallback"],
        entity_types=domain.entity_types)
    ted_params = ted_train(STORIES, domain,
                           TedConfig(num_layers=1, transformer_size=16, num_heads=2,
                                     embedding_dim=8, max_history=8, epochs=60,
                                     learning_rate=0.01, seed=3))
    kb = KnowledgeBase(
        plant_protection={("paddy", "blast"): "Spray tricyclazole at 0.6 g/l."},
        nutrient={}, officers={})
    return Engine(diet_params=diet_params, ted_params=ted_params,
                  featurizer_state=state, embedding_table=None, domain=domain,
                  kb=kb, synonyms={}, store=SessionStore(session_dir),
                  fallback_threshold=0.3, ambiguity_threshold=0.1,
                  model_version="abc123def456")


@pytest.fixture(scope="module")
def engine():
    return make_engine()


@pytest.fixture()
def client(engine):
    return TestClient(create_app(engine))


def test_health_reports_model_version(client):
    r = client.get("/api/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "model_version": "abc123def456"}


def test_health_before_load_is_503():
    r = TestClient(create_app(None)).get("/api/health")
    assert r.status_code == 503


def test_chat_plain_response_is_bare_array(client):
    r = client.post("/api/chat", json={"sender": "s1", "message": "hello there"})
    assert r.status_code == 200
    assert r.json() == [{"text": "Hello! I am the farm assistant."}]


def test_chat_kb_path(client):
    r = client.post("/api/chat", json={"sender": "s2", "message": "my paddy has blast"})
    assert r.json() == [{"text": "Spray tricyclazole at 0.6 g/l."}]


def test_chat_debug_envelope(client):
    r = client.post("/api/chat?debug=1",
                    json={"sender": "s3", "message": "hello there"})
    body = r.json()
    assert set(body) == {"responses", "debug"}
    debug = body["debug"]
    assert debug["intent"] == "greet"
    assert abs(sum(c for _, c in debug["ranking"]) - 1.0) < 1e-6
    assert debug["actions"][-1] == "action_listen"


def test_chat_malformed_json_is_400(client):
    r = client.post("/api/chat", content=b"{nope",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400


def test_chat_missing_message_is_400(client):
    assert client.post("/api/chat", json={"sender": "s1"}).status_code == 400
    assert client.post("/api/chat", json={"message": "hi"}).status_code == 400
    assert client.post("/api/chat",
                       json={"sender": 5, "message": "hi"}).status_code == 400
    assert client.post("/api/chat", json=["hi"]).status_code == 400


def test_chat_blank_message_is_422(client):
    r = client.post("/api/chat", json={"sender": "s1", "message": "   "})
    assert r.status_code == 422


def test_chat_unloaded_engine_is_503():
    app = create_app(None)
    r = TestClient(app).post("/api/chat", json={"sender": "s", "message": "hi"})
    assert r.status_code == 503


def test_internal_error_returns_opaque_id(engine):
    app = create_app(engine)

    class Exploding:
        model_version = "x"
        store = engine.store

        def handle_detailed(self, sender, message):
            raise RuntimeError("secret detail that must not leak")

    app.state.engine = Exploding()
    r = TestClient(app, raise_server_exceptions=False).post(
        "/api/chat", json={"sender": "s", "message": "hi"})
    assert r.status_code == 500
    body = r.json()
    assert body["error"] == "internal error"
    assert len(body["id"]) == 8
    assert "secret" not in r.text


def test_session_events_endpoint(engine):
    client = TestClient(create_app(engine))
    client.post("/api/chat", json={"sender": "evt", "message": "hello there"})
    r = client.get("/api/sessions/evt/events")
    assert r.status_code == 200
    body = r.json()
    assert body["session_id"] == "evt"
    types = [e["type"] for e in body["events"]]
    assert types[0] == "user_message"
    assert "action_executed" in types and "bot_uttered" in types


def test_session_events_unknown_session_is_empty(client):
    r = client.get("/api/sessions/never-seen/events")
    assert r.json()["events"] == []


def test_cors_header_present(client):
    r = client.get("/api/health", headers={"origin": "http://localhost:5173"})
    assert r.headers.get("access-control-allow-origin") == "*"
