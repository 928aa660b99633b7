"""Domain definition: intents, entity types, slots, actions, response templates.

File format (domain.json):
  {"intents": [...], "entities": [...],
   "slots": [{"name", "from_entity"}],
   "actions": [...],
   "responses": {"utter_x": ["template with {slot}", ...]}}

The listen action and the fallback intent are appended automatically when the
file omits them, since the dialogue loop and the fallback classifier both
produce these names unconditionally.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, MissingFile

ACTION_LISTEN = "action_listen"
FALLBACK_INTENT = "nlu_fallback"


@dataclass(frozen=True)
class SlotSpec:
    name: str
    from_entity: str


@dataclass(frozen=True)
class DomainSpec:
    intents: tuple[str, ...]
    entity_types: tuple[str, ...]
    slots: tuple[SlotSpec, ...]
    actions: tuple[str, ...]
    responses: dict[str, tuple[str, ...]]

    def __post_init__(self):
        for group, names in (("intents", self.intents),
                             ("entities", self.entity_types),
                             ("slots", [s.name for s in self.slots]),
                             ("actions", self.actions)):
            if len(set(names)) != len(names):
                raise ConfigError(f"duplicate names in domain {group}")
        declared = set(self.entity_types)
        for slot in self.slots:
            if slot.from_entity not in declared:
                raise ConfigError(
                    f"slot {slot.name!r} reads entity {slot.from_entity!r}, not declared")
        actions = set(self.actions)
        for action in self.actions:
            if action.startswith("utter_") and not self.responses.get(action):
                raise ConfigError(f"utterance action {action!r} has no response template")
        for key in self.responses:
            if key not in actions:
                raise ConfigError(f"response defined for undeclared action {key!r}")

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    def slots_for_entity(self, entity_type: str) -> list[str]:
        return [s.name for s in self.slots if s.from_entity == entity_type]

    def to_dict(self) -> dict:
        return {
            "intents": list(self.intents),
            "entities": list(self.entity_types),
            "slots": [{"name": s.name, "from_entity": s.from_entity} for s in self.slots],
            "actions": list(self.actions),
            "responses": {k: list(v) for k, v in self.responses.items()},
        }

    @staticmethod
    def from_dict(raw: dict) -> "DomainSpec":
        intents = list(raw.get("intents", []))
        if FALLBACK_INTENT not in intents:
            intents.append(FALLBACK_INTENT)
        actions = list(raw.get("actions", []))
        if ACTION_LISTEN not in actions:
            actions.append(ACTION_LISTEN)
        return DomainSpec(
            intents=tuple(intents),
            entity_types=tuple(raw.get("entities", [])),
            slots=tuple(SlotSpec(s["name"], s["from_entity"]) for s in raw.get("slots", [])),
            actions=tuple(actions),
            responses={k: tuple(v) for k, v in raw.get("responses", {}).items()},
        )


def load_domain(path: str | Path) -> DomainSpec:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    return DomainSpec.from_dict(json.loads(path.read_text(encoding="utf-8")))
