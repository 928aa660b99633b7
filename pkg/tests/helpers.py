"""Shared test oracles, kept independent of the code paths they check."""
from __future__ import annotations

import numpy as np


def central_difference_grads(f, tensors, h: float = 1e-5):
    """Numerically differentiate scalar-valued ``f()`` wrt each tensor.

    Perturbs tensor data in place, element by element, restoring it after.
    """
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = f()
            flat[i] = orig - h
            lo = f()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * h)
        grads.append(g)
    return grads


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise |a-b| / max(|a|,|b|), floored to stay meaningful near 0.

    The 1e-6 floor turns the comparison absolute for gradients smaller than
    the finite-difference noise floor (~1e-11 at h=1e-5, f64).
    """
    denom = np.maximum(np.abs(a), np.abs(b)) + 1e-6
    return float(np.max(np.abs(a - b) / denom))


def brute_force_crf(emissions: np.ndarray, transitions: np.ndarray):
    """Enumerate every tag path: returns (log partition, best path, best score).

    Ties on the best score keep the first path in lexicographic order, and
    the full list of co-optimal paths is returned for membership checks.
    """
    n, k = emissions.shape
    scores = []
    paths = []
    for flat in range(k ** n):
        path = []
        x = flat
        for _ in range(n):
            path.append(x % k)
            x //= k
        path = path[::-1]
        s = emissions[0, path[0]]
        for t in range(1, n):
            s += transitions[path[t - 1], path[t]] + emissions[t, path[t]]
        scores.append(s)
        paths.append(tuple(path))
    scores = np.array(scores)
    log_z = float(np.logaddexp.reduce(np.sort(scores)))
    best = float(scores.max())
    optimal = [p for p, s in zip(paths, scores) if s >= best - 1e-9]
    return log_z, sorted(optimal)[0], best, optimal
