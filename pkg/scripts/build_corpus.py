#!/usr/bin/env python3
"""Regenerate the bundled training corpus (data/nlu.json, stories.json,
domain.json) from the compact markup below.

Annotation markup: [surface](type) tags an entity span; [surface](type:value)
additionally maps the span to a canonical value. Spans are converted to
character offsets against the cleaned sentence, so they always line up with
whitespace token boundaries.

Run from the repository root: python3 scripts/build_corpus.py
"""
from __future__ import annotations

import json
import re
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

_MARK = re.compile(r"\[([^\]]+)\]\(([a-z_]+)(?::([^)]+))?\)")


def parse_markup(line: str) -> tuple[str, list[dict]]:
    """Strip [span](type) markup, returning plain text plus entity offsets."""
    text_parts: list[str] = []
    entities: list[dict] = []
    cursor = 0
    plain_len = 0
    for m in _MARK.finditer(line):
        before = line[cursor:m.start()]
        text_parts.append(before)
        plain_len += len(before)
        surface, etype, value = m.group(1), m.group(2), m.group(3)
        entities.append({
            "start": plain_len,
            "end": plain_len + len(surface),
            "entity": etype,
            "value": value if value is not None else surface,
        })
        text_parts.append(surface)
        plain_len += len(surface)
        cursor = m.end()
    text_parts.append(line[cursor:])
    return "".join(text_parts), entities


EXAMPLES = {
    "greet": [
        "hi",
        "hello",
        "hey there",
        "good morning",
        "good evening",
        "hi assistant",
        "hello farm assistant",
        "hey bot good morning",
        "greetings to you",
        "hi there friend",
        "hello and good day",
        "hey hello",
    ],
    "goodbye": [
        "bye",
        "goodbye",
        "see you later",
        "bye for now",
        "see you soon",
        "catch you later",
        "goodbye assistant",
        "bye bye take care",
        "i am leaving now bye",
        "good night see you",
        "talk to you later",
        "ok bye then",
    ],
    "thanks": [
        "thanks",
        "thank you",
        "thanks a lot",
        "thank you so much",
        "that was helpful thanks",
        "great thank you",
        "thanks for the help",
        "many thanks",
        "thank you very much",
        "super thanks",
        "that helps thanks",
        "nice thank you",
    ],
    "bot_challenge": [
        "are you a bot",
        "am i talking to a bot",
        "are you a robot",
        "are you human",
        "is this a real person",
        "who am i chatting with",
        "are you a machine",
        "bot or human",
        "are you real",
        "you are a bot right",
        "is a human reading this",
        "what are you exactly",
    ],
    "help": [
        "help",
        "what can you do",
        "how can you help me",
        "what do you know",
        "show me what you can do",
        "i need some guidance",
        "what services do you offer",
        "how does this work",
        "can you guide me",
        "what questions can i ask",
        "tell me your features",
        "help me get started",
    ],
    "ask_plant_protection": [
        "my [paddy](crop) has [leaf blast](disease)",
        "[blast](disease) disease in my [paddy](crop) field",
        "how to treat [brown spot](disease) on [paddy](crop)",
        "remedy for [bud rot](disease) in [coconut](crop)",
        "my [coconut](crop) trees show [bud rot](disease)",
        "[tomato](crop) plants have [leaf curl](disease)",
        "cure for [wilt](disease) in [tomato](crop)",
        "my [banana](crop) farm got [panama wilt](disease)",
        "[red rot](disease) attacking my [sugarcane](crop)",
        "treatment for [blast](disease) in [paddy](crop) crop",
        "what spray for [leaf curl](disease) on [tomatoes](crop:tomato)",
        "[sugarcane](crop) suffering from [red rot](disease)",
        "my [cotton](crop) has [boll worm](disease)",
        "how do i stop [brown spot](disease) in [paddy](crop)",
    ],
    "ask_nutrient": [
        "my [paddy](crop) lacks [zinc](nutrient)",
        "[zinc](nutrient) deficiency in [paddy](crop)",
        "[nitrogen](nutrient) deficiency in my [paddy](crop) field",
        "my [coconut](crop) needs [boron](nutrient)",
        "[boron](nutrient) shortage in [coconut](crop) trees",
        "[tomato](crop) plants lack [calcium](nutrient)",
        "how to fix [calcium](nutrient) deficiency in [tomato](crop)",
        "my [banana](crop) shows [potassium](nutrient) deficiency",
        "[potassium](nutrient) shortage in [banana](crop)",
        "[iron](nutrient) deficiency in [sugarcane](crop)",
        "my [sugarcane](crop) needs more [iron](nutrient)",
        "what fertilizer fixes [nitrogen](nutrient) deficiency in [paddy](crop)",
    ],
    "ask_officer_contact": [
        "contact of [agricultural officer](role) in [thanjavur](city)",
        "phone number of [agricultural officer](role) in [madurai](city)",
        "how do i reach the [assistant director](role) in [theni](city)",
        "i want to call the [agricultural officer](role) of [salem](city)",
        "give me the [horticulture officer](role) contact for [coimbatore](city)",
        "[agricultural officer](role) number for [thanjavur](city) please",
        "who is the [assistant director](role) in [theni](city)",
        "contact details of [horticulture officer](role) in [coimbatore](city)",
        "number of the [agricultural officer](role) in [salem](city)",
        "reach the [agricultural officer](role) at [madurai](city)",
        "i need the [agricultural officer](role) contact in [thanjavur](city)",
        "phone of [assistant director](role) for [theni](city)",
    ],
}

SYNONYMS = {
    "tomatoes": "tomato",
    "paddy rice": "paddy",
    "ag officer": "agricultural officer",
}

REGEX_PATTERNS = [
    {"name": "phone_number", "pattern": r"\+?\d[\d-]{6,}"},
]

PP = "action_query_plant_protection"
NUTRIENT = "action_query_nutrient"
OFFICER = "action_query_officer"

PP_ENTITIES = {"crop": "paddy", "disease": "leaf blast"}
NUTRIENT_ENTITIES = {"crop": "coconut", "nutrient": "boron"}
OFFICER_ENTITIES = {"role": "agricultural officer", "city": "thanjavur"}


def user(intent: str, entities: dict | None = None) -> dict:
    step: dict = {"user": {"intent": intent}}
    if entities:
        step["user"]["entities"] = entities
    return step


def action(name: str) -> dict:
    return {"action": name}


STORIES = [
    {"name": "greet", "steps": [user("greet"), action("utter_greet")]},
    {"name": "goodbye", "steps": [user("goodbye"), action("utter_goodbye")]},
    {"name": "thanks", "steps": [user("thanks"), action("utter_noworries")]},
    {"name": "bot challenge", "steps": [user("bot_challenge"), action("utter_iamabot")]},
    {"name": "help", "steps": [user("help"), action("utter_help")]},
    {"name": "plant protection", "steps": [
        user("ask_plant_protection", PP_ENTITIES), action(PP)]},
    {"name": "nutrient", "steps": [
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT)]},
    {"name": "officer contact", "steps": [
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER)]},
    {"name": "greet then plant protection", "steps": [
        user("greet"), action("utter_greet"),
        user("ask_plant_protection", PP_ENTITIES), action(PP)]},
    {"name": "greet then nutrient", "steps": [
        user("greet"), action("utter_greet"),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT)]},
    {"name": "greet then officer", "steps": [
        user("greet"), action("utter_greet"),
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER)]},
    {"name": "remedy then thanks then goodbye", "steps": [
        user("ask_plant_protection", PP_ENTITIES), action(PP),
        user("thanks"), action("utter_noworries"),
        user("goodbye"), action("utter_goodbye")]},
    {"name": "help then nutrient", "steps": [
        user("help"), action("utter_help"),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT)]},
    {"name": "challenge mid conversation", "steps": [
        user("greet"), action("utter_greet"),
        user("bot_challenge"), action("utter_iamabot"),
        user("ask_plant_protection", PP_ENTITIES), action(PP)]},
    # follow-up questions: every query action must be answerable again after
    # an answered query, same intent or a different one
    {"name": "plant protection follow-up", "steps": [
        user("ask_plant_protection", PP_ENTITIES), action(PP),
        user("ask_plant_protection", PP_ENTITIES), action(PP)]},
    {"name": "nutrient follow-up", "steps": [
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT)]},
    {"name": "officer follow-up", "steps": [
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER),
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER)]},
    {"name": "remedy then nutrient", "steps": [
        user("ask_plant_protection", PP_ENTITIES), action(PP),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT)]},
    {"name": "nutrient then officer", "steps": [
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT),
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER)]},
    {"name": "officer then plant protection", "steps": [
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER),
        user("ask_plant_protection", PP_ENTITIES), action(PP)]},
    # small talk stays answerable whatever happened before it
    {"name": "nutrient then thanks", "steps": [
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT),
        user("thanks"), action("utter_noworries")]},
    {"name": "officer then goodbye", "steps": [
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER),
        user("goodbye"), action("utter_goodbye")]},
    {"name": "challenge after remedy", "steps": [
        user("ask_plant_protection", PP_ENTITIES), action(PP),
        user("bot_challenge"), action("utter_iamabot"),
        user("ask_plant_protection", PP_ENTITIES), action(PP)]},
    {"name": "officer then help", "steps": [
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER),
        user("help"), action("utter_help"),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT)]},
    {"name": "long consult", "steps": [
        user("greet"), action("utter_greet"),
        user("ask_plant_protection", PP_ENTITIES), action(PP),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT),
        user("thanks"), action("utter_noworries"),
        user("goodbye"), action("utter_goodbye")]},
    {"name": "help late in a consult", "steps": [
        user("ask_plant_protection", PP_ENTITIES), action(PP),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT),
        user("ask_officer_contact", OFFICER_ENTITIES), action(OFFICER),
        user("help"), action("utter_help")]},
    {"name": "greet late in a consult", "steps": [
        user("ask_plant_protection", PP_ENTITIES), action(PP),
        user("ask_nutrient", NUTRIENT_ENTITIES), action(NUTRIENT),
        user("greet"), action("utter_greet")]},
]

DOMAIN = {
    "intents": ["greet", "goodbye", "thanks", "bot_challenge", "help",
                "ask_plant_protection", "ask_nutrient", "ask_officer_contact"],
    "entities": ["crop", "disease", "nutrient", "role", "city"],
    "slots": [
        {"name": "crop", "from_entity": "crop"},
        {"name": "disease", "from_entity": "disease"},
        {"name": "nutrient", "from_entity": "nutrient"},
        {"name": "role", "from_entity": "role"},
        {"name": "city", "from_entity": "city"},
    ],
    "actions": ["utter_greet", "utter_goodbye", "utter_noworries", "utter_iamabot",
                "utter_help", "utter_fallback", "utter_no_data",
                "utter_ask_crop", "utter_ask_disease", "utter_ask_nutrient",
                "utter_ask_role", "utter_ask_city",
                PP, NUTRIENT, OFFICER],
    "responses": {
        "utter_greet": ["Hello! I am Farmer's Assistant. I can help with crop "
                        "diseases, nutrient deficiencies, and officer contacts."],
        "utter_goodbye": ["Goodbye! Wishing you a healthy harvest."],
        "utter_noworries": ["Happy to help!"],
        "utter_iamabot": ["I am a bot, an automated farm advisory assistant."],
        "utter_help": ["You can ask me about crop diseases, nutrient "
                       "deficiencies, or agricultural officer contacts. For "
                       "example: my paddy has leaf blast."],
        "utter_fallback": ["Sorry, I didn't understand that. You can ask about "
                           "crop diseases, nutrient deficiencies, or officer "
                           "contacts."],
        "utter_no_data": ["Sorry, I don't have data for that yet. Please "
                          "contact your local agricultural officer."],
        "utter_ask_crop": ["Which crop are you asking about?"],
        "utter_ask_disease": ["Which disease are you seeing on your {crop}?",
                              "Which disease are you seeing?"],
        "utter_ask_nutrient": ["Which nutrient deficiency do you suspect?"],
        "utter_ask_role": ["Which officer role do you want to contact?"],
        "utter_ask_city": ["Which city or district?"],
    },
}


def build() -> None:
    examples = []
    for intent, lines in EXAMPLES.items():
        for line in lines:
            text, entities = parse_markup(line)
            examples.append({"text": text, "intent": intent, "entities": entities})
    nlu = {
        "version": 1,
        "examples": examples,
        "synonyms": SYNONYMS,
        "regex_patterns": REGEX_PATTERNS,
    }
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    (DATA_DIR / "nlu.json").write_text(json.dumps(nlu, indent=2) + "\n")
    (DATA_DIR / "stories.json").write_text(json.dumps(STORIES, indent=2) + "\n")
    (DATA_DIR / "domain.json").write_text(json.dumps(DOMAIN, indent=2) + "\n")
    print(f"wrote {len(examples)} examples, {len(STORIES)} stories, "
          f"{len(DOMAIN['intents'])} intents to {DATA_DIR}")


if __name__ == "__main__":
    build()
