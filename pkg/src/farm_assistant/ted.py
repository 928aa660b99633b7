"""Next-action selection: a causal transformer over turn summaries.

Each user turn becomes one binary feature row (intent, entities present,
slots filled, previous system action). A unidirectional transformer encodes
the row sequence; the last position's output is embedded and compared against
learned per-action embeddings by dot product. There is no classifier head:
training maximizes the gold action's similarity through a softmax over all
actions, and prediction takes the argmax.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import transformer as tfm
from .autodiff import Adam, Tensor, glorot_uniform
from .data import ActionStep, Story, UserStep
from .domain import ACTION_LISTEN, DomainSpec
from .errors import ConfigError, EmptyStories, ShapeMismatch, UnknownDomainReference
from .tracker import (ACTION_EXECUTED, SLOT_SET, USER_MESSAGE, DialogueTracker,
                      action_executed, slot_set, user_message)

BATCH_SIZE = 32


@dataclass(frozen=True)
class TedConfig:
    num_layers: int = 1
    transformer_size: int = 64
    num_heads: int = 4
    embedding_dim: int = 20
    max_history: int = 8
    epochs: int = 100
    learning_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.max_history < 1:
            raise ConfigError("max_history must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.transformer_size % self.num_heads != 0:
            raise ConfigError("transformer_size must be divisible by num_heads")

    def to_dict(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "transformer_size": self.transformer_size,
            "num_heads": self.num_heads,
            "embedding_dim": self.embedding_dim,
            "max_history": self.max_history,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "TedConfig":
        return TedConfig(**d)


@dataclass(frozen=True)
class TurnFeatures:
    intent: np.ndarray    # one-hot over domain intents
    entities: np.ndarray  # presence bits over entity types
    slots: np.ndarray     # filled bits over slots
    action: np.ndarray    # one-hot: what the system did in this turn

    def vector(self) -> np.ndarray:
        return np.concatenate([self.intent, self.entities, self.slots, self.action])


def feature_width(domain: DomainSpec) -> int:
    return (len(domain.intents) + len(domain.entity_types)
            + len(domain.slot_names) + len(domain.actions))


def featurize_tracker(tracker: DialogueTracker, domain: DomainSpec,
                      max_history: int) -> list[TurnFeatures]:
    """One row per user turn, newest last, truncated to max_history.

    A row's action slot is the last substantive (non-listen) action the
    system executed within that turn. The in-progress turn shows whatever
    already ran this turn, listen when nothing has, so the state before and
    after answering differ even when two identical requests arrive in a row.
    Names absent from the domain are skipped.
    """
    intent_ids = {n: i for i, n in enumerate(domain.intents)}
    entity_ids = {n: i for i, n in enumerate(domain.entity_types)}
    slot_ids = {n: i for i, n in enumerate(domain.slot_names)}
    action_ids = {n: i for i, n in enumerate(domain.actions)}

    # group events into user turns
    turns: list[dict] = []
    slots_filled: set[str] = set()
    for ev in tracker.events:
        if ev.type == USER_MESSAGE:
            turns.append({"intent": ev.payload["intent"],
                          "entities": {e.get("entity") for e in ev.payload["entities"]},
                          "slots": None, "actions": []})
        elif ev.type == SLOT_SET:
            slots_filled.add(ev.payload["name"])
        elif ev.type == ACTION_EXECUTED and turns:
            turns[-1]["actions"].append(ev.payload["name"])
        if turns:
            turns[-1]["slots"] = set(slots_filled)

    rows: list[TurnFeatures] = []
    for t, turn in enumerate(turns):
        intent = np.zeros(len(intent_ids))
        idx = intent_ids.get(turn["intent"])
        if idx is not None:
            intent[idx] = 1.0
        entities = np.zeros(len(entity_ids))
        for etype in turn["entities"]:
            j = entity_ids.get(etype)
            if j is not None:
                entities[j] = 1.0
        slot_bits = np.zeros(len(slot_ids))
        for name in turn["slots"] or ():
            j = slot_ids.get(name)
            if j is not None:
                slot_bits[j] = 1.0

        if t == len(turns) - 1:
            action_name = turn["actions"][-1] if turn["actions"] else ACTION_LISTEN
        else:
            done = [a for a in turn["actions"] if a != ACTION_LISTEN]
            action_name = done[-1] if done else ACTION_LISTEN
        action = np.zeros(len(action_ids))
        j = action_ids.get(action_name)
        if j is not None:
            action[j] = 1.0

        rows.append(TurnFeatures(intent=intent, entities=entities,
                                 slots=slot_bits, action=action))
    return rows[-max_history:]


@dataclass
class TedParams:
    config: TedConfig
    feature_width: int
    action_names: tuple[str, ...]
    proj_w: Tensor
    proj_b: Tensor
    layers: list[tfm.LayerParams]
    state_head: Tensor
    action_embeddings: Tensor

    def tensors(self) -> list[tuple[str, Tensor]]:
        named = [("proj_w", self.proj_w), ("proj_b", self.proj_b)]
        for i, layer in enumerate(self.layers):
            named.extend(layer.tensors(f"layer{i}"))
        named += [("state_head", self.state_head),
                  ("action_embeddings", self.action_embeddings)]
        return named


def ted_params_from_arrays(config: TedConfig, feature_width: int,
                           action_names: Sequence[str],
                           arrays: dict[str, np.ndarray]) -> TedParams:
    """Rebuild trained policy parameters from named flat arrays."""
    def t(name):
        return Tensor(arrays[name], requires_grad=True)

    layers = [tfm.LayerParams.from_arrays(f"layer{i}", arrays)
              for i in range(config.num_layers)]
    return TedParams(
        config=config,
        feature_width=feature_width,
        action_names=tuple(action_names),
        proj_w=t("proj_w"), proj_b=t("proj_b"),
        layers=layers,
        state_head=t("state_head"),
        action_embeddings=t("action_embeddings"),
    )


def init_ted_params(config: TedConfig, width: int, action_names: Sequence[str],
                    rng: np.random.Generator) -> TedParams:
    s = config.transformer_size
    e = config.embedding_dim
    n_actions = len(action_names)
    layers = [tfm.init_layer(rng, s, config.num_heads, config.max_history)
              for _ in range(config.num_layers)]
    return TedParams(
        config=config,
        feature_width=width,
        action_names=tuple(action_names),
        proj_w=Tensor(glorot_uniform(rng, (width, s), width, s), requires_grad=True),
        proj_b=Tensor(np.zeros(s), requires_grad=True),
        layers=layers,
        state_head=Tensor(glorot_uniform(rng, (s, e), s, e), requires_grad=True),
        action_embeddings=Tensor(glorot_uniform(rng, (n_actions, e), n_actions, e),
                                 requires_grad=True),
    )


def _similarities(rows: np.ndarray, lengths: np.ndarray, params: TedParams) -> Tensor:
    """(B, T, width) padded turn rows -> (B, n_actions) similarity logits."""
    if rows.shape[-1] != params.feature_width:
        raise ShapeMismatch(
            f"turn feature width {rows.shape[-1]} != trained {params.feature_width}")
    h = ad.gelu(Tensor(rows) @ params.proj_w + params.proj_b)
    out = tfm.encode(h, params.layers, params.config.num_heads,
                     params.config.max_history, lengths=lengths, causal=True)
    state = out[np.arange(rows.shape[0]), lengths - 1] @ params.state_head
    return state @ params.action_embeddings.swapaxes(0, 1)


def unroll_stories(stories: Sequence[Story], domain: DomainSpec,
                   max_history: int) -> list[tuple[list[TurnFeatures], int]]:
    """(turn rows, gold action index) pairs from every prediction point.

    After each turn's scripted actions an implicit listen step is appended,
    so the policy also learns when to stop acting.
    """
    intent_set = set(domain.intents)
    entity_set = set(domain.entity_types)
    action_ids = {n: i for i, n in enumerate(domain.actions)}

    pairs: list[tuple[list[TurnFeatures], int]] = []
    for story in stories:
        tracker = DialogueTracker(f"story:{story.name}")
        open_turn = False
        for step_no, step in enumerate(story.steps):
            if isinstance(step, UserStep):
                if open_turn:
                    # previous turn finished: teach the policy to listen
                    pairs.append((featurize_tracker(tracker, domain, max_history),
                                  action_ids[ACTION_LISTEN]))
                    tracker.apply(action_executed(ACTION_LISTEN))
                if step.intent not in intent_set:
                    raise UnknownDomainReference(story.name, f"step {step_no}: intent {step.intent!r}")
                entities = []
                for etype, value in step.entities.items():
                    if etype not in entity_set:
                        raise UnknownDomainReference(
                            story.name, f"step {step_no}: entity {etype!r}")
                    entities.append({"entity": etype, "value": value})
                tracker.apply(user_message(f"<{step.intent}>", step.intent, entities))
                for etype, value in step.entities.items():
                    for slot_name in domain.slots_for_entity(etype):
                        tracker.apply(slot_set(slot_name, value))
                open_turn = True
            else:
                assert isinstance(step, ActionStep)
                if step.action not in action_ids:
                    raise UnknownDomainReference(
                        story.name, f"step {step_no}: action {step.action!r}")
                if not open_turn:
                    raise UnknownDomainReference(
                        story.name, f"step {step_no}: action before any user step")
                pairs.append((featurize_tracker(tracker, domain, max_history),
                              action_ids[step.action]))
                tracker.apply(action_executed(step.action))
        if open_turn:
            pairs.append((featurize_tracker(tracker, domain, max_history),
                          action_ids[ACTION_LISTEN]))
    return pairs


def _collate(pairs: Sequence[tuple[list[TurnFeatures], int]],
             width: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    b = len(pairs)
    t = max(len(rows) for rows, _ in pairs)
    x = np.zeros((b, t, width))
    lengths = np.zeros(b, dtype=int)
    gold = np.zeros(b, dtype=int)
    for i, (rows, action_idx) in enumerate(pairs):
        for j, row in enumerate(rows):
            x[i, j] = row.vector()
        lengths[i] = len(rows)
        gold[i] = action_idx
    return x, lengths, gold


def ted_train(stories: Sequence[Story], domain: DomainSpec,
              config: TedConfig) -> TedParams:
    if not stories:
        raise EmptyStories("no stories to train on")
    pairs = unroll_stories(stories, domain, config.max_history)
    width = feature_width(domain)

    rng = np.random.default_rng(config.seed)
    params = init_ted_params(config, width, domain.actions, rng)
    opt = Adam([t for _, t in params.tensors()], lr=config.learning_rate)

    n = len(pairs)
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, BATCH_SIZE):
            chunk = [pairs[j] for j in order[lo:lo + BATCH_SIZE]]
            x, lengths, gold = _collate(chunk, width)
            sims = _similarities(x, lengths, params)
            logp = ad.log_softmax(sims, axis=-1)
            loss = -logp[np.arange(len(chunk)), gold].mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
    return params


def predict_next_action(tracker: DialogueTracker, params: TedParams,
                        domain: DomainSpec) -> tuple[str, float]:
    rows = featurize_tracker(tracker, domain, params.config.max_history)
    if not rows:
        x = np.zeros((1, 1, params.feature_width))
        lengths = np.array([1])
    else:
        x, lengths, _ = _collate([(rows, 0)], params.feature_width)
    sims = _similarities(x, lengths, params).data[0]
    probs = np.exp(sims - sims.max())
    probs = probs / probs.sum()
    best = int(np.argmax(probs))  # exact ties resolve to the lowest index
    return params.action_names[best], float(probs[best])


def action_confidences(tracker: DialogueTracker, params: TedParams,
                       domain: DomainSpec) -> dict[str, float]:
    """Full distribution, mostly for debug traces."""
    rows = featurize_tracker(tracker, domain, params.config.max_history)
    if not rows:
        x = np.zeros((1, 1, params.feature_width))
        lengths = np.array([1])
    else:
        x, lengths, _ = _collate([(rows, 0)], params.feature_width)
    sims = _similarities(x, lengths, params).data[0]
    probs = np.exp(sims - sims.max())
    probs = probs / probs.sum()
    return {name: float(p) for name, p in zip(params.action_names, probs)}
