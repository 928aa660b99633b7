"""The perceive-decide-act loop tying NLU, policy, tracker, and KB together.

One user message triggers: NLU with fallback and synonym mapping, a
user_message event, slot fills copied from entities, then repeated action
prediction and execution until the listen action (or a hard cap of 10
actions, after which the turn is cut off with the fallback reply).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from . import tracker as tr
from .diet import (FALLBACK_INTENT, EntityPrediction, apply_fallback,
                   diet_predict, map_synonyms)
from .domain import ACTION_LISTEN, DomainSpec
from .errors import EngineNotReady, UndeclaredAction
from .kb import (KnowledgeBase, query_nutrient, query_officer,
                 query_plant_protection)
from .ted import predict_next_action
from .tracker import DialogueTracker, Event

MAX_ACTIONS_PER_TURN = 10
FALLBACK_ACTION = "utter_fallback"
NO_DATA_ACTION = "utter_no_data"
NO_DATA_TEXT = "Sorry, I don't have data for that yet. Please contact your local agricultural officer."

_PLACEHOLDER = re.compile(r"\{([A-Za-z0-9_]+)\}")

# custom action name -> (query slots, KB lookup)
KB_ACTIONS = {
    "action_query_plant_protection": ("crop", "disease"),
    "action_query_nutrient": ("crop", "nutrient"),
    "action_query_officer": ("role", "city"),
}


@dataclass
class TurnResult:
    """Everything one message produced, for transcripts and debug traces."""
    responses: list[str] = field(default_factory=list)
    intent: str = ""
    ranking: tuple[tuple[str, float], ...] = ()
    entities: tuple[EntityPrediction, ...] = ()
    actions: list[str] = field(default_factory=list)


def _render(template: str, slots: dict[str, str]) -> Optional[str]:
    """Substitute {slot} placeholders; None when any referenced slot is unset."""
    needed = _PLACEHOLDER.findall(template)
    if any(slots.get(name) is None for name in needed):
        return None
    return template.format(**{name: slots[name] for name in needed})


def _missing_slots(template: str, slots: dict[str, str]) -> list[str]:
    return [n for n in _PLACEHOLDER.findall(template) if slots.get(n) is None]


def _clarification(slot_name: str, domain: DomainSpec,
                   slots: dict[str, str]) -> tuple[list[Event], list[str]]:
    ask = f"utter_ask_{slot_name}"
    if ask in domain.responses:
        for template in domain.responses[ask]:
            text = _render(template, slots)
            if text is not None:
                return [tr.action_executed(ask), tr.bot_uttered(text)], [text]
    text = f"Could you tell me the {slot_name}?"
    return [tr.bot_uttered(text)], [text]


def execute_action(action_name: str, tracker: DialogueTracker, domain: DomainSpec,
                   kb: KnowledgeBase) -> tuple[list[Event], list[str]]:
    """Run one action; returns the events it generated and any reply texts."""
    if action_name not in domain.actions:
        raise UndeclaredAction(action_name)
    slots = tracker.slots

    if action_name == ACTION_LISTEN:
        return [tr.action_executed(ACTION_LISTEN)], []

    if action_name in KB_ACTIONS:
        slot_names = KB_ACTIONS[action_name]
        for name in slot_names:
            if slots.get(name) is None:
                events, texts = _clarification(name, domain, slots)
                return [tr.action_executed(action_name)] + events, texts
        if action_name == "action_query_plant_protection":
            found = query_plant_protection(kb, slots["crop"], slots["disease"])
        elif action_name == "action_query_nutrient":
            found = query_nutrient(kb, slots["crop"], slots["nutrient"])
        else:
            contact = query_officer(kb, slots["role"], slots["city"])
            found = None
            if contact is not None:
                phone, mail = contact
                found = f"You can reach the {slots['role']} for {slots['city']} at {phone}"
                found += f" (mail: {mail})." if mail else "."
        if found is None:
            no_data = domain.responses.get(NO_DATA_ACTION, (NO_DATA_TEXT,))
            text = _render(no_data[0], slots) or NO_DATA_TEXT
            return [tr.action_executed(action_name), tr.bot_uttered(text)], [text]
        return [tr.action_executed(action_name), tr.bot_uttered(found)], [found]

    if action_name.startswith("utter_"):
        templates = domain.responses.get(action_name, ())
        for template in templates:
            text = _render(template, slots)
            if text is not None:
                return [tr.action_executed(action_name), tr.bot_uttered(text)], [text]
        # every template referenced a slot we don't have: ask for the first one
        missing = _missing_slots(templates[0], slots) if templates else []
        if missing:
            events, texts = _clarification(missing[0], domain, slots)
            return [tr.action_executed(action_name)] + events, texts
        return [tr.action_executed(action_name)], []

    # declared custom action with no behavior bound to it
    return [tr.action_executed(action_name)], []


def handle_message_detailed(session_id: str, text: str, engine) -> TurnResult:
    """Full pipeline for one message; engine must expose diet/ted params,
    featurizer state, domain, kb, synonyms, store, and fallback thresholds."""
    if engine is None or getattr(engine, "diet_params", None) is None \
            or getattr(engine, "ted_params", None) is None:
        raise EngineNotReady("models are not loaded")

    prediction = diet_predict(text, engine.diet_params, engine.featurizer_state,
                              engine.embedding_table)
    final_intent = apply_fallback(prediction, engine.fallback_threshold,
                                  engine.ambiguity_threshold)
    entities = map_synonyms(prediction.entities, engine.synonyms)

    result = TurnResult(intent=final_intent, ranking=prediction.ranking,
                        entities=entities)
    domain = engine.domain
    store = engine.store

    with store.lock(session_id):
        tracker = store.get(session_id)
        events = [tr.user_message(text, final_intent, [
            {"entity": e.entity, "value": e.value, "surface": e.surface,
             "start": e.start, "end": e.end} for e in entities])]
        for ent in entities:
            for slot_name in domain.slots_for_entity(ent.entity):
                events.append(tr.slot_set(slot_name, ent.value.lower()))
        store.append(session_id, events)

        if final_intent == FALLBACK_INTENT:
            # rule shortcut: out-of-scope turns answer with the fallback
            # utterance and stop, whatever the policy thinks
            for action in (FALLBACK_ACTION, ACTION_LISTEN):
                events, texts = execute_action(action, tracker, domain, engine.kb)
                store.append(session_id, events)
                result.actions.append(action)
                result.responses.extend(texts)
            return result

        for step in range(MAX_ACTIONS_PER_TURN):
            action, _conf = predict_next_action(tracker, engine.ted_params, domain)
            events, texts = execute_action(action, tracker, domain, engine.kb)
            store.append(session_id, events)
            result.actions.append(action)
            result.responses.extend(texts)
            if action == ACTION_LISTEN:
                break
        else:
            # runaway policy: cut the turn off with the fallback reply
            for action in (FALLBACK_ACTION, ACTION_LISTEN):
                events, texts = execute_action(action, tracker, domain, engine.kb)
                store.append(session_id, events)
                result.actions.append(action)
                result.responses.extend(texts)
    return result


def handle_message(session_id: str, text: str, engine) -> list[str]:
    return handle_message_detailed(session_id, text, engine).responses
