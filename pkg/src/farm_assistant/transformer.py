"""Transformer encoder blocks on the autodiff engine.

Multi-head self-attention with learned relative-position biases added to the
attention logits (distances clipped at a maximum), post-layer-norm residual
blocks, gelu feed-forward. Used bidirectionally over message tokens and
causally over dialogue turns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, glorot_uniform

LN_EPS = 1e-5
NEG_INF = -1e9


@dataclass
class LayerParams:
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    rel_emb: Tensor  # (2 * max_distance + 1, n_heads) logit biases
    ln1_g: Tensor
    ln1_b: Tensor
    ff1_w: Tensor
    ff1_b: Tensor
    ff2_w: Tensor
    ff2_b: Tensor
    ln2_g: Tensor
    ln2_b: Tensor

    FIELD_ORDER = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "rel_emb",
                   "ln1_g", "ln1_b", "ff1_w", "ff1_b", "ff2_w", "ff2_b",
                   "ln2_g", "ln2_b")

    def tensors(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for name in self.FIELD_ORDER:
            yield f"{prefix}.{name}", getattr(self, name)

    @classmethod
    def from_arrays(cls, prefix: str, arrays: dict[str, np.ndarray]) -> "LayerParams":
        return cls(**{name: Tensor(arrays[f"{prefix}.{name}"], requires_grad=True)
                      for name in cls.FIELD_ORDER})


def init_layer(rng: np.random.Generator, size: int, n_heads: int, max_distance: int) -> LayerParams:
    def w(shape, fan_in, fan_out):
        return Tensor(glorot_uniform(rng, shape, fan_in, fan_out), requires_grad=True)

    def zeros(n):
        return Tensor(np.zeros(n), requires_grad=True)

    def ones(n):
        return Tensor(np.ones(n), requires_grad=True)

    n_rel = 2 * max_distance + 1
    return LayerParams(
        wq=w((size, size), size, size), bq=zeros(size),
        wk=w((size, size), size, size), bk=zeros(size),
        wv=w((size, size), size, size), bv=zeros(size),
        wo=w((size, size), size, size), bo=zeros(size),
        rel_emb=w((n_rel, n_heads), n_rel, n_heads),
        ln1_g=ones(size), ln1_b=zeros(size),
        ff1_w=w((size, size), size, size), ff1_b=zeros(size),
        ff2_w=w((size, size), size, size), ff2_b=zeros(size),
        ln2_g=ones(size), ln2_b=zeros(size),
    )


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered * ((var + LN_EPS) ** -0.5) * gain + bias


def relative_position_index(n: int, max_distance: int) -> np.ndarray:
    """(n, n) lookup into the relative-position table, distances clipped."""
    pos = np.arange(n)
    return np.clip(pos[None, :] - pos[:, None], -max_distance, max_distance) + max_distance


def attention_masks(lengths: Optional[np.ndarray], t: int, causal: bool) -> Optional[np.ndarray]:
    """Additive attention mask (B or 1, 1, T, T): 0 allowed, NEG_INF blocked."""
    mask = None
    if lengths is not None:
        key_ok = np.arange(t)[None, :] < lengths[:, None]  # (B, T)
        mask = np.where(key_ok, 0.0, NEG_INF)[:, None, None, :]
    if causal:
        future = np.where(np.arange(t)[None, :] <= np.arange(t)[:, None], 0.0, NEG_INF)
        future = future[None, None, :, :]
        mask = future if mask is None else mask + future
    return mask


def _attend(x: Tensor, layer: LayerParams, n_heads: int, rel_idx: np.ndarray,
            mask: Optional[np.ndarray]) -> Tensor:
    b, t, d = x.shape
    dh = d // n_heads

    def heads(y: Tensor) -> Tensor:
        return y.reshape(b, t, n_heads, dh).transpose((0, 2, 1, 3))

    q = heads(x @ layer.wq + layer.bq)
    k = heads(x @ layer.wk + layer.bk)
    v = heads(x @ layer.wv + layer.bv)

    logits = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))
    rel_bias = layer.rel_emb[rel_idx].transpose((2, 0, 1))  # (H, T, T)
    logits = logits + rel_bias
    if mask is not None:
        logits = logits + mask
    attn = ad.softmax(logits, axis=-1)
    ctx = (attn @ v).transpose((0, 2, 1, 3)).reshape(b, t, d)
    return ctx @ layer.wo + layer.bo


def encoder_layer(x: Tensor, layer: LayerParams, n_heads: int, rel_idx: np.ndarray,
                  mask: Optional[np.ndarray]) -> Tensor:
    h = layer_norm(x + _attend(x, layer, n_heads, rel_idx, mask), layer.ln1_g, layer.ln1_b)
    ff = ad.gelu(h @ layer.ff1_w + layer.ff1_b) @ layer.ff2_w + layer.ff2_b
    return layer_norm(h + ff, layer.ln2_g, layer.ln2_b)


def encode(x: Tensor, layers: list[LayerParams], n_heads: int, max_distance: int,
           lengths: Optional[np.ndarray] = None, causal: bool = False) -> Tensor:
    """Run the full stack on (B, T, size) input; padded rows are masked out of
    attention but still flow through the pointwise sublayers."""
    t = x.shape[1]
    rel_idx = relative_position_index(t, max_distance)
    mask = attention_masks(lengths, t, causal)
    for layer in layers:
        x = encoder_layer(x, layer, n_heads, rel_idx, mask)
    return x
