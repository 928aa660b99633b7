"""Linear-chain CRF: log-likelihood by the forward algorithm (in log space,
differentiable) and Viterbi decoding, plus BIO tag bookkeeping.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import EmptySequence


def sequence_log_likelihood(emissions: Tensor, transitions: Tensor,
                            gold_tags: Sequence[int]) -> Tensor:
    """log p(gold | emissions, transitions) for one sequence.

    score(path) = sum_t emissions[t, tag_t] + sum_t transitions[tag_{t-1}, tag_t];
    the partition function comes from the forward recursion.
    """
    n = emissions.shape[0]
    if n == 0:
        raise EmptySequence("CRF needs at least one token")
    gold = np.asarray(gold_tags, dtype=np.int64)
    if gold.shape[0] != n:
        raise ValueError(f"{gold.shape[0]} gold tags for {n} tokens")

    score = emissions[np.arange(n), gold].sum()
    if n > 1:
        score = score + transitions[gold[:-1], gold[1:]].sum()

    alpha = emissions[0]
    for t in range(1, n):
        # alpha[i] + transitions[i, j], reduced over i
        alpha = (alpha.reshape(-1, 1) + transitions).logsumexp(axis=0) + emissions[t]
    log_z = alpha.logsumexp(axis=0)
    return score - log_z


def crf_log_likelihood(emissions: np.ndarray, transitions: np.ndarray,
                       gold_tags: Sequence[int]) -> float:
    """Plain-number wrapper around :func:`sequence_log_likelihood`."""
    return sequence_log_likelihood(Tensor(emissions), Tensor(transitions), gold_tags).item()


def batch_negative_log_likelihood(emissions: Tensor, transitions: Tensor,
                                  lengths: np.ndarray, gold: np.ndarray) -> Tensor:
    """Mean -log p over a padded batch.

    emissions: (B, T, K); lengths: (B,) with every length >= 1; gold: (B, T)
    with arbitrary values beyond each sequence's length.
    """
    b, t_max, k = emissions.shape
    if t_max == 0:
        raise EmptySequence("CRF needs at least one token")

    valid = np.arange(t_max)[None, :] < lengths[:, None]  # (B, T)
    b_idx, t_idx = np.nonzero(valid)
    score = emissions[b_idx, t_idx, gold[b_idx, t_idx]].sum()
    pair = np.nonzero(valid[:, 1:] & valid[:, :-1])
    if pair[0].size:
        prev_tags = gold[pair[0], pair[1]]
        next_tags = gold[pair[0], pair[1] + 1]
        score = score + transitions[prev_tags, next_tags].sum()

    alpha = emissions[:, 0, :]  # (B, K)
    for t in range(1, t_max):
        # alpha[b, i] + transitions[i, j] -> (B, from, to), reduced over `from`
        stepped = (alpha.reshape(b, k, 1) + transitions).logsumexp(axis=1) + emissions[:, t, :]
        alpha = ad.where(valid[:, t:t + 1], stepped, alpha)
    log_z = alpha.logsumexp(axis=1).sum()
    return (log_z - score) * (1.0 / b)


def viterbi_decode(emissions: np.ndarray, transitions: np.ndarray) -> tuple[list[int], float]:
    """Maximum-score tag path; ties resolve to the lowest tag index at each
    backtrack step (argmax keeps the first maximum)."""
    emissions = np.asarray(emissions, dtype=np.float64)
    n, k = emissions.shape
    if n == 0:
        raise EmptySequence("cannot decode an empty sequence")
    score = emissions[0].copy()
    backptr = np.zeros((n, k), dtype=np.int64)
    for t in range(1, n):
        cand = score[:, None] + transitions  # (from, to)
        backptr[t] = np.argmax(cand, axis=0)
        score = cand[backptr[t], np.arange(k)] + emissions[t]
    best_last = int(np.argmax(score))
    path = [best_last]
    for t in range(n - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return path, float(score[best_last])


# --- BIO tag bookkeeping -----------------------------------------------------

def bio_tags_for(entity_types: Sequence[str]) -> list[str]:
    """Tag alphabet with O first (index 0), then B-/I- per type, types sorted."""
    tags = ["O"]
    for etype in sorted(entity_types):
        tags.append(f"B-{etype}")
        tags.append(f"I-{etype}")
    return tags


def repair_bio(labels: Sequence[str]) -> list[str]:
    """Turn orphan I-e (not preceded by B-e/I-e of the same type) into B-e."""
    repaired = []
    prev = "O"
    for label in labels:
        if label.startswith("I-"):
            etype = label[2:]
            if not (prev == f"B-{etype}" or prev == f"I-{etype}"):
                label = f"B-{etype}"
        repaired.append(label)
        prev = label
    return repaired


def crf_viterbi(emissions: np.ndarray, transitions: np.ndarray,
                tag_names: Sequence[str]) -> tuple[list[str], float]:
    """Decode, then repair invalid BIO transitions post hoc."""
    path, score = viterbi_decode(emissions, transitions)
    return repair_bio([tag_names[i] for i in path]), score


def bio_spans(labels: Sequence[str]) -> list[tuple[str, int, int]]:
    """(type, first_token, last_token_exclusive) spans from repaired BIO labels."""
    spans = []
    start = None
    current = None
    for i, label in enumerate(labels):
        if label.startswith("B-"):
            if current is not None:
                spans.append((current, start, i))
            current, start = label[2:], i
        elif label.startswith("I-") and current == label[2:]:
            continue
        else:
            if current is not None:
                spans.append((current, start, i))
            current, start = None, None
    if current is not None:
        spans.append((current, start, len(labels)))
    return spans


def spans_to_bio(n_tokens: int, spans: Sequence[tuple[str, int, int]]) -> list[str]:
    """Inverse of :func:`bio_spans` for aligned training annotations."""
    labels = ["O"] * n_tokens
    for etype, start, end in spans:
        labels[start] = f"B-{etype}"
        for i in range(start + 1, end):
            labels[i] = f"I-{etype}"
    return labels
