"""Training-data loaders: annotated utterances, synonym/regex tables, stories.

File formats:
  nlu.json     {"version": 1, "examples": [{"text", "intent",
                "entities": [{"start", "end", "entity", "value"}]}],
                "synonyms": {"surface": "canonical"},
                "regex_patterns": [{"name", "pattern"}]}
  stories.json [{"name", "steps": [{"user": {"intent", "entities": {type: value}}}
                 | {"action": "action_name"}]}]

Entity character spans must land exactly on token boundaries; anything else is
rejected at load time so the taggers never see half-token gold labels.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EntityAlignmentError, MissingFile
from .tokenizer import Token, tokenize


@dataclass(frozen=True)
class EntityAnnotation:
    start: int
    end: int
    entity: str
    value: str


@dataclass(frozen=True)
class NluExample:
    text: str
    intent: str
    entities: tuple[EntityAnnotation, ...] = ()


@dataclass(frozen=True)
class NluData:
    examples: tuple[NluExample, ...]
    synonyms: dict[str, str] = field(default_factory=dict)
    regex_patterns: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class UserStep:
    intent: str
    entities: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ActionStep:
    action: str


@dataclass(frozen=True)
class Story:
    name: str
    steps: tuple[UserStep | ActionStep, ...]


def token_span(tokens: list[Token], start: int, end: int) -> tuple[int, int] | None:
    """Map a character span onto a contiguous token range, or None if the
    span does not line up with token boundaries."""
    first = last = None
    for i, tok in enumerate(tokens):
        if tok.start == start:
            first = i
        if tok.end == end:
            last = i
    if first is None or last is None or last < first:
        return None
    return first, last + 1


def validate_alignment(example: NluExample, example_id: str) -> None:
    tokens = tokenize(example.text)
    for ann in example.entities:
        if not (0 <= ann.start < ann.end <= len(example.text)):
            raise EntityAlignmentError(example_id)
        if token_span(tokens, ann.start, ann.end) is None:
            raise EntityAlignmentError(example_id)


def load_nlu_data(path: str | Path) -> NluData:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    raw = json.loads(path.read_text(encoding="utf-8"))

    examples = []
    for i, item in enumerate(raw.get("examples", [])):
        text = item["text"]
        entities = tuple(
            EntityAnnotation(
                start=int(e["start"]),
                end=int(e["end"]),
                entity=e["entity"],
                value=e.get("value", text[int(e["start"]):int(e["end"])]),
            )
            for e in item.get("entities", [])
        )
        ex = NluExample(text=text, intent=item["intent"], entities=entities)
        validate_alignment(ex, example_id=f"{path.name}#{i}")
        examples.append(ex)

    synonyms = {str(k).lower(): str(v) for k, v in raw.get("synonyms", {}).items()}
    patterns = tuple((p["name"], p["pattern"]) for p in raw.get("regex_patterns", []))
    return NluData(examples=tuple(examples), synonyms=synonyms, regex_patterns=patterns)


def load_stories(path: str | Path) -> list[Story]:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    raw = json.loads(path.read_text(encoding="utf-8"))

    stories = []
    for item in raw:
        steps: list[UserStep | ActionStep] = []
        for step in item["steps"]:
            if "user" in step:
                user = step["user"]
                steps.append(UserStep(intent=user["intent"],
                                      entities=dict(user.get("entities", {}))))
            else:
                steps.append(ActionStep(action=step["action"]))
        stories.append(Story(name=item["name"], steps=tuple(steps)))
    return stories
