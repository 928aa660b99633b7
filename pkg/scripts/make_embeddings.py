#!/usr/bin/env python3
"""Regenerate the two bundled word-embedding tables (data/embeddings_a.txt,
data/embeddings_b.txt) used by the dense feature path.

Vectors are synthetic but not arbitrary: words that play the same role in the
corpus (crop names, disease terms, greetings, ...) share a cluster centre, so
lookups give the classifier a generalization signal that character n-grams
alone cannot. Everything is seeded; reruns are byte-identical.

Run from the repository root: python3 scripts/make_embeddings.py
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

CLUSTERS = {
    "crop": ["paddy", "coconut", "tomato", "tomatoes", "banana", "sugarcane",
             "cotton", "crop", "crops", "plants", "trees", "field", "farm"],
    "disease": ["blast", "spot", "brown", "rot", "bud", "curl", "wilt",
                "panama", "red", "worm", "boll", "disease", "leaf"],
    "treatment": ["remedy", "cure", "treat", "treatment", "spray", "stop",
                  "suffering", "attacking", "has", "have", "got", "show"],
    "nutrient": ["zinc", "nitrogen", "boron", "calcium", "potassium", "iron",
                 "nutrient", "deficiency", "shortage", "lacks", "lack",
                 "needs", "fertilizer", "fixes"],
    "contact": ["contact", "phone", "number", "call", "reach", "details",
                "officer", "agricultural", "assistant", "director",
                "horticulture"],
    "place": ["thanjavur", "madurai", "theni", "salem", "coimbatore", "city"],
    "greeting": ["hi", "hello", "hey", "greetings", "morning", "evening",
                 "good", "day"],
    "farewell": ["bye", "goodbye", "later", "night", "leaving", "catch"],
    "gratitude": ["thanks", "thank", "helpful", "helps", "nice", "super",
                  "great"],
    "identity": ["bot", "robot", "human", "machine", "person", "real",
                 "chatting", "talking"],
    "assist": ["help", "guidance", "guide", "services", "features",
               "questions", "know", "ask"],
}


def corpus_vocabulary() -> list[str]:
    raw = json.loads((DATA_DIR / "nlu.json").read_text(encoding="utf-8"))
    words = {w.lower() for ex in raw["examples"] for w in ex["text"].split()}
    return sorted(words)


def write_table(path: Path, dim: int, seed: int, noise: float) -> None:
    rng = np.random.default_rng(seed)
    centres = {name: rng.normal(0.0, 1.0, dim) for name in sorted(CLUSTERS)}
    word_cluster = {w: name for name, ws in CLUSTERS.items() for w in ws}

    lines = []
    for word in corpus_vocabulary():
        centre = centres.get(word_cluster.get(word, ""), np.zeros(dim))
        # per-word offset drawn from a word-keyed stream so vocabulary order
        # changes never reshuffle existing vectors
        word_rng = np.random.default_rng([seed, *word.encode()])
        vec = centre + word_rng.normal(0.0, noise, dim)
        lines.append(word + " " + " ".join("%.5f" % v for v in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} vectors of dim {dim} to {path}")


if __name__ == "__main__":
    write_table(DATA_DIR / "embeddings_a.txt", dim=25, seed=11, noise=0.35)
    write_table(DATA_DIR / "embeddings_b.txt", dim=32, seed=23, noise=0.20)
