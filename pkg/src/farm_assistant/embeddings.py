"""Loadable word-embedding table for the dense feature path."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyFile, InconsistentDimension, MalformedLine
from .tokenizer import Token


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]

    def lookup(self, token_lower: str) -> np.ndarray:
        vec = self.vectors.get(token_lower)
        return vec if vec is not None else np.zeros(self.dim)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "vectors": {t: v.tolist() for t, v in self.vectors.items()}}

    @staticmethod
    def from_dict(d: dict) -> "EmbeddingTable":
        return EmbeddingTable(
            dim=int(d["dim"]),
            vectors={t: np.asarray(v, dtype=np.float64) for t, v in d["vectors"].items()},
        )


def load_embedding_table(path) -> EmbeddingTable:
    """Parse `token v1 v2 ... vd` lines (space separated, decimal reals).

    Whitespace-only lines are skipped; duplicate tokens keep the last line.
    """
    dim = None
    vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) < 2:
                raise MalformedLine(line_no, "expected a token followed by at least one value")
            token, values = parts[0], parts[1:]
            try:
                vec = np.array([float(v) for v in values])
            except ValueError as e:
                raise MalformedLine(line_no, str(e)) from e
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise InconsistentDimension(line_no, dim, len(vec))
            vectors[token] = vec
    if dim is None:
        raise EmptyFile(f"embedding table {path} has no entries")
    return EmbeddingTable(dim=dim, vectors=vectors)


def featurize_dense(tokens: Sequence[Token], table: EmbeddingTable) -> np.ndarray:
    """Per-token table vectors (zero for out-of-vocabulary); CLS row = mean pooling."""
    rows = np.zeros((len(tokens) + 1, table.dim))
    for i, tok in enumerate(tokens):
        rows[i] = table.lookup(tok.lower)
    if len(tokens):
        rows[-1] = rows[:-1].mean(axis=0)
    return rows
