"""Sparse featurizer chain: char n-gram counts, word counts, lexical window
features, regex flags. Every featurizer emits one row per token plus a final
sentence-summary (CLS) row.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyTrainingSet, InvalidPattern, RowCountMismatch
from .tokenizer import Token

AFFIX_BUCKETS = 64

_CASE_PREDICATES = ("starts_upper", "all_digits", "all_lower", "is_first", "is_last")
_WINDOW_SLOTS = ("prev", "cur", "next")
# per window slot: 5 binary predicates + hashed prefix-2 + hashed suffix-2
_SLOT_WIDTH = len(_CASE_PREDICATES) + 2 * AFFIX_BUCKETS
LEXICAL_WIDTH = len(_WINDOW_SLOTS) * _SLOT_WIDTH


def fnv1a_64(s: str) -> int:
    """FNV-1a 64-bit over UTF-8 bytes; the stable hash behind affix buckets."""
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


class SparseFeatures:
    """COO-style feature block: (row, column, value) with a fixed width.

    Row count is n_tokens + 1; the last row is the sentence (CLS) row.
    """

    def __init__(self, n_rows: int, width: int,
                 rows: Sequence[int] = (), cols: Sequence[int] = (), vals: Sequence[float] = ()):
        self.n_rows = int(n_rows)
        self.width = int(width)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        if not (len(self.rows) == len(self.cols) == len(self.vals)):
            raise ValueError("rows/cols/vals length mismatch")
        if len(self.cols) and (self.cols.max() >= self.width or self.cols.min() < 0):
            raise ValueError("column index out of range")
        if len(self.rows) and (self.rows.max() >= self.n_rows or self.rows.min() < 0):
            raise ValueError("row index out of range")
        if (self.vals < 0).any():
            raise ValueError("negative feature value")
        if len(self.rows) != len({(r, c) for r, c in zip(self.rows.tolist(), self.cols.tolist())}):
            raise ValueError("duplicate (row, column) entry")

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.width))
        out[self.rows, self.cols] = self.vals
        return out

    @staticmethod
    def from_dense(mat: np.ndarray) -> "SparseFeatures":
        rows, cols = np.nonzero(mat)
        return SparseFeatures(mat.shape[0], mat.shape[1], rows, cols, mat[rows, cols])


@dataclass
class FeaturizerConfig:
    use_count_vectors: bool = True
    count_char_ngrams: bool = True
    count_words: bool = True
    min_ngram: int = 1
    max_ngram: int = 4
    use_lexical: bool = True
    use_regex: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_dict(d: dict) -> "FeaturizerConfig":
        return FeaturizerConfig(**d)


@dataclass
class FeaturizerState:
    """Immutable after fitting; all column maps are dense in [0, width)."""
    char_ngram_vocabulary: dict[str, int]
    word_vocabulary: dict[str, int]
    regex_patterns: list[tuple[str, str]]
    lexical_feature_index: dict[str, int]
    ngram_range: tuple[int, int]
    config: FeaturizerConfig
    _compiled: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._compiled:
            self._compiled = [re.compile(p) for _, p in self.regex_patterns]

    @property
    def count_width(self) -> int:
        return len(self.char_ngram_vocabulary) + len(self.word_vocabulary)

    @property
    def regex_width(self) -> int:
        return len(self.regex_patterns)

    @property
    def total_width(self) -> int:
        width = 0
        if self.config.use_count_vectors:
            width += self.count_width
        if self.config.use_lexical:
            width += LEXICAL_WIDTH
        if self.config.use_regex:
            width += self.regex_width
        return width

    def to_dict(self) -> dict:
        return {
            "char_ngram_vocabulary": self.char_ngram_vocabulary,
            "word_vocabulary": self.word_vocabulary,
            "regex_patterns": [list(p) for p in self.regex_patterns],
            "lexical_feature_index": self.lexical_feature_index,
            "ngram_range": list(self.ngram_range),
            "config": self.config.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "FeaturizerState":
        return FeaturizerState(
            char_ngram_vocabulary=dict(d["char_ngram_vocabulary"]),
            word_vocabulary=dict(d["word_vocabulary"]),
            regex_patterns=[tuple(p) for p in d["regex_patterns"]],
            lexical_feature_index=dict(d["lexical_feature_index"]),
            ngram_range=tuple(d["ngram_range"]),
            config=FeaturizerConfig.from_dict(d["config"]),
        )


def char_wb_ngrams(token_lower: str, min_n: int, max_n: int) -> list[str]:
    """All substrings of the space-padded token with length in [min_n, max_n].

    Each token is wrapped in exactly one space per side, so n-grams see word
    boundaries but never cross them.
    """
    padded = f" {token_lower} "
    out = []
    for n in range(min_n, max_n + 1):
        for i in range(len(padded) - n + 1):
            out.append(padded[i:i + n])
    return out


def _lexical_layout() -> dict[str, int]:
    index: dict[str, int] = {}
    col = 0
    for slot in _WINDOW_SLOTS:
        for name in _CASE_PREDICATES:
            index[f"{slot}:{name}"] = col
            col += 1
        for b in range(AFFIX_BUCKETS):
            index[f"{slot}:prefix2:{b}"] = col
            col += 1
        for b in range(AFFIX_BUCKETS):
            index[f"{slot}:suffix2:{b}"] = col
            col += 1
    return index


def fit_featurizers(token_lists: Sequence[Sequence[Token]],
                    config: FeaturizerConfig,
                    regex_patterns: Sequence[tuple[str, str]] = ()) -> FeaturizerState:
    """Build vocabularies from tokenized training utterances.

    Column assignment is lexicographic, so two fits on the same data produce
    identical column maps.
    """
    if not token_lists:
        raise EmptyTrainingSet("no training utterances to fit featurizers on")

    char_vocab: dict[str, int] = {}
    word_vocab: dict[str, int] = {}
    if config.use_count_vectors:
        chars: set[str] = set()
        words: set[str] = set()
        for tokens in token_lists:
            for tok in tokens:
                if config.count_char_ngrams:
                    chars.update(char_wb_ngrams(tok.lower, config.min_ngram, config.max_ngram))
                if config.count_words:
                    words.add(tok.lower)
        char_vocab = {g: i for i, g in enumerate(sorted(chars))}
        word_vocab = {w: i for i, w in enumerate(sorted(words))}

    compiled = []
    patterns = []
    if config.use_regex:
        for name, pattern in regex_patterns:
            try:
                compiled.append(re.compile(pattern))
            except re.error as e:
                raise InvalidPattern(name, pattern, str(e)) from e
            patterns.append((name, pattern))

    return FeaturizerState(
        char_ngram_vocabulary=char_vocab,
        word_vocabulary=word_vocab,
        regex_patterns=patterns,
        lexical_feature_index=_lexical_layout() if config.use_lexical else {},
        ngram_range=(config.min_ngram, config.max_ngram),
        config=config,
        _compiled=compiled,
    )


def featurize_count_vectors(tokens: Sequence[Token], state: FeaturizerState) -> SparseFeatures:
    """Char n-gram counts plus word-identity counts; CLS row = sum of token rows."""
    n_char = len(state.char_ngram_vocabulary)
    width = state.count_width
    mat = np.zeros((len(tokens) + 1, width))
    min_n, max_n = state.ngram_range
    for i, tok in enumerate(tokens):
        if state.config.count_char_ngrams:
            for gram in char_wb_ngrams(tok.lower, min_n, max_n):
                col = state.char_ngram_vocabulary.get(gram)
                if col is not None:
                    mat[i, col] += 1.0
        if state.config.count_words:
            col = state.word_vocabulary.get(tok.lower)
            if col is not None:
                mat[i, n_char + col] += 1.0
    mat[-1] = mat[:-1].sum(axis=0)
    return SparseFeatures.from_dense(mat)


def featurize_lexical_syntactic(tokens: Sequence[Token]) -> SparseFeatures:
    """Binary window features over previous/current/next token; CLS row all zeros."""
    n = len(tokens)
    mat = np.zeros((n + 1, LEXICAL_WIDTH))

    def slot_features(tok: Token, pos: int) -> list[int]:
        cols = []
        text = tok.text
        if text[:1].isupper():
            cols.append(0)
        if text.isdigit():
            cols.append(1)
        if text.islower():
            cols.append(2)
        if pos == 0:
            cols.append(3)
        if pos == n - 1:
            cols.append(4)
        lower = tok.lower
        cols.append(len(_CASE_PREDICATES) + fnv1a_64("p2:" + lower[:2]) % AFFIX_BUCKETS)
        cols.append(len(_CASE_PREDICATES) + AFFIX_BUCKETS + fnv1a_64("s2:" + lower[-2:]) % AFFIX_BUCKETS)
        return cols

    for i in range(n):
        for slot_idx, j in ((0, i - 1), (1, i), (2, i + 1)):
            if 0 <= j < n:
                base = slot_idx * _SLOT_WIDTH
                for col in slot_features(tokens[j], j):
                    mat[i, base + col] = 1.0
    return SparseFeatures.from_dense(mat)


def featurize_regex(tokens: Sequence[Token], state: FeaturizerState, text: str) -> SparseFeatures:
    """One binary flag per pattern; a token is flagged when its span overlaps
    any match of the pattern in the original text. CLS row = OR of token rows."""
    width = state.regex_width
    mat = np.zeros((len(tokens) + 1, width))
    for p, regex in enumerate(state._compiled):
        for m in regex.finditer(text):
            for i, tok in enumerate(tokens):
                if tok.start < m.end() and m.start() < tok.end:
                    mat[i, p] = 1.0
    if len(tokens):
        mat[-1] = mat[:-1].max(axis=0)
    return SparseFeatures.from_dense(mat)


@dataclass
class MessageFeatures:
    """Concatenated sparse blocks plus the optional dense block for one message."""
    sparse: SparseFeatures
    dense: Optional[np.ndarray]
    n_tokens: int
    block_offsets: dict[str, int]

    @property
    def n_rows(self) -> int:
        return self.n_tokens + 1


def assemble_features(sparse_blocks: Sequence[tuple[str, SparseFeatures]],
                      dense: Optional[np.ndarray] = None) -> MessageFeatures:
    """Concatenate sparse blocks along the column axis; dense rides alongside."""
    if not sparse_blocks:
        raise ValueError("at least one sparse block required")
    n_rows = sparse_blocks[0][1].n_rows
    for name, block in sparse_blocks:
        if block.n_rows != n_rows:
            raise RowCountMismatch(f"block {name!r} has {block.n_rows} rows, expected {n_rows}")
    if dense is not None and dense.shape[0] != n_rows:
        raise RowCountMismatch(f"dense block has {dense.shape[0]} rows, expected {n_rows}")

    offsets: dict[str, int] = {}
    rows, cols, vals = [], [], []
    offset = 0
    for name, block in sparse_blocks:
        offsets[name] = offset
        rows.append(block.rows)
        cols.append(block.cols + offset)
        vals.append(block.vals)
        offset += block.width
    combined = SparseFeatures(
        n_rows, offset,
        np.concatenate(rows) if rows else (),
        np.concatenate(cols) if cols else (),
        np.concatenate(vals) if vals else (),
    )
    return MessageFeatures(sparse=combined, dense=dense, n_tokens=n_rows - 1, block_offsets=offsets)


def featurize_message(text: str, tokens: Sequence[Token], state: FeaturizerState,
                      table=None) -> MessageFeatures:
    """Run the configured featurizer chain on one tokenized message."""
    from .embeddings import featurize_dense

    blocks: list[tuple[str, SparseFeatures]] = []
    if state.config.use_count_vectors:
        blocks.append(("count_vectors", featurize_count_vectors(tokens, state)))
    if state.config.use_lexical:
        blocks.append(("lexical", featurize_lexical_syntactic(tokens)))
    if state.config.use_regex:
        blocks.append(("regex", featurize_regex(tokens, state, text)))
    dense = featurize_dense(tokens, table) if table is not None else None
    return assemble_features(blocks, dense)
