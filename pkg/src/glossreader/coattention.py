"""Dual multi-head co-attention over passage and option-definition encodings.

The two directions run as separate attention passes, each followed by an
add-and-normalize fusion. In stacked mode the second pass attends over the
first pass's output; in parallel mode both passes read the raw encodings.
Layers can be stacked: layer j consumes the previous layer's outputs in the
(passage-like, option-definition-like) roles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .config import ModelConfig


@dataclass
class MultiHeadParams:
    """Per-head Q/K/V projections plus the shared output projection.

    ``dropout_p`` rides along so forward passes need only (params, rng,
    training); self-attention callers set it to 0.0.
    """

    wq: list[Tensor]   # h tensors of shape (d_model, d_qk)
    wk: list[Tensor]   # h tensors of shape (d_model, d_qk)
    wv: list[Tensor]   # h tensors of shape (d_model, d_v)
    wo: Tensor         # (h * d_v, d_model)
    dropout_p: float = 0.0

    @property
    def n_heads(self) -> int:
        return len(self.wq)

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = {}
        for i in range(self.n_heads):
            out[f"{prefix}.wq{i}"] = self.wq[i]
            out[f"{prefix}.wk{i}"] = self.wk[i]
            out[f"{prefix}.wv{i}"] = self.wv[i]
        out[f"{prefix}.wo"] = self.wo
        return out


def init_multi_head(rng: np.random.Generator, d_model: int, n_heads: int,
                    d_qk: int, d_v: int, dropout_p: float = 0.0) -> MultiHeadParams:
    proj_std = 1.0 / math.sqrt(d_model)
    out_std = 1.0 / math.sqrt(n_heads * d_v)
    return MultiHeadParams(
        wq=[ag.randn(rng, (d_model, d_qk), proj_std, requires_grad=True)
            for _ in range(n_heads)],
        wk=[ag.randn(rng, (d_model, d_qk), proj_std, requires_grad=True)
            for _ in range(n_heads)],
        wv=[ag.randn(rng, (d_model, d_v), proj_std, requires_grad=True)
            for _ in range(n_heads)],
        wo=ag.randn(rng, (n_heads * d_v, d_model), out_std, requires_grad=True),
        dropout_p=dropout_p,
    )


def multi_head_attention(query_src: Tensor, kv_src: Tensor, kv_mask,
                         params: MultiHeadParams,
                         rng: np.random.Generator | None = None,
                         training: bool = False) -> Tensor:
    """Scaled dot-product attention of query rows over unmasked kv rows.

    Co-attention when the two sources differ, self-attention when they
    coincide. Dropout (params.dropout_p) applies to the attention
    probabilities and to the projected output, only while training.
    """
    kv_mask = np.asarray(kv_mask, dtype=bool)
    if kv_mask.shape != (kv_src.shape[0],):
        raise ValueError(f"kv_mask shape {kv_mask.shape} does not match "
                         f"{kv_src.shape[0]} kv rows")
    if not kv_mask.any():
        raise ValueError("attention over a fully masked kv sequence")
    l_q = query_src.shape[0]
    d_qk = params.wq[0].shape[1]
    mask_2d = np.broadcast_to(kv_mask, (l_q, kv_mask.shape[0]))

    heads = []
    for i in range(params.n_heads):
        q = ag.matmul(query_src, params.wq[i])
        k = ag.matmul(kv_src, params.wk[i])
        v = ag.matmul(kv_src, params.wv[i])
        scores = ag.scale(ag.matmul(q, ag.transpose(k)), 1.0 / math.sqrt(d_qk))
        probs = ag.softmax_rows(scores, mask_2d)
        probs = ag.dropout(probs, params.dropout_p, training, rng)
        heads.append(ag.matmul(probs, v))
    merged = heads[0] if len(heads) == 1 else ag.concat(heads, axis=1)
    out = ag.matmul(merged, params.wo)
    return ag.dropout(out, params.dropout_p, training, rng)


def fuse_add_normalize(residual: Tensor, mha: Tensor, gamma: Tensor,
                       beta: Tensor) -> Tensor:
    """Row-wise layer norm of (residual + attention output)."""
    return ag.layer_norm(ag.add(residual, mha), gamma, beta)


@dataclass
class CoAttentionLayerParams:
    """One dual-pass layer: two attention parameter sets plus two norm sites.

    When projections are shared, ``p_attn`` is the same object as
    ``od_attn``; the norm parameters always stay separate.
    """

    od_attn: MultiHeadParams   # query = option-definition side
    p_attn: MultiHeadParams    # query = passage side
    ln1_gamma: Tensor
    ln1_beta: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = self.od_attn.named(f"{prefix}.od_attn")
        if self.p_attn is not self.od_attn:
            out.update(self.p_attn.named(f"{prefix}.p_attn"))
        out[f"{prefix}.ln1_gamma"] = self.ln1_gamma
        out[f"{prefix}.ln1_beta"] = self.ln1_beta
        out[f"{prefix}.ln2_gamma"] = self.ln2_gamma
        out[f"{prefix}.ln2_beta"] = self.ln2_beta
        return out


def init_coattention_layer(rng: np.random.Generator,
                           cfg: ModelConfig) -> CoAttentionLayerParams:
    od_attn = init_multi_head(rng, cfg.d_model, cfg.coattn_heads, cfg.d_qk,
                              cfg.d_v, cfg.dropout_p)
    if cfg.shared_projections:
        p_attn = od_attn
    else:
        p_attn = init_multi_head(rng, cfg.d_model, cfg.coattn_heads, cfg.d_qk,
                                 cfg.d_v, cfg.dropout_p)
    d = cfg.d_model
    return CoAttentionLayerParams(
        od_attn=od_attn, p_attn=p_attn,
        ln1_gamma=ag.ones((d,), requires_grad=True),
        ln1_beta=ag.zeros((d,), requires_grad=True),
        ln2_gamma=ag.ones((d,), requires_grad=True),
        ln2_beta=ag.zeros((d,), requires_grad=True),
    )


def init_coattention_stack(rng: np.random.Generator,
                           cfg: ModelConfig) -> list[CoAttentionLayerParams]:
    return [init_coattention_layer(rng, cfg) for _ in range(cfg.k)]


@dataclass
class Representations:
    """Outputs of one dual pass, shaped like the inputs they attend from."""

    rep1: Tensor            # l_od x d_model (option-definition side)
    rep2: Tensor            # l_p x d_model (passage side)
    od_mask: np.ndarray
    p_mask: np.ndarray


def dual_pass_stacked(e_p: Tensor, e_od: Tensor, p_mask, od_mask,
                      layer: CoAttentionLayerParams,
                      rng: np.random.Generator | None = None,
                      training: bool = False) -> Representations:
    """First fuse the option-definition side over the passage, then run the
    passage queries over that fused output (with its mask)."""
    mha1 = multi_head_attention(e_od, e_p, p_mask, layer.od_attn, rng, training)
    rep1 = fuse_add_normalize(e_od, mha1, layer.ln1_gamma, layer.ln1_beta)
    mha2 = multi_head_attention(e_p, rep1, od_mask, layer.p_attn, rng, training)
    rep2 = fuse_add_normalize(e_p, mha2, layer.ln2_gamma, layer.ln2_beta)
    return Representations(rep1=rep1, rep2=rep2,
                           od_mask=np.asarray(od_mask, dtype=bool),
                           p_mask=np.asarray(p_mask, dtype=bool))


def dual_pass_parallel(e_p: Tensor, e_od: Tensor, p_mask, od_mask,
                       layer: CoAttentionLayerParams,
                       rng: np.random.Generator | None = None,
                       training: bool = False) -> Representations:
    """Both directions read the raw encodings; neither sees the other's output."""
    mha1 = multi_head_attention(e_od, e_p, p_mask, layer.od_attn, rng, training)
    rep1 = fuse_add_normalize(e_od, mha1, layer.ln1_gamma, layer.ln1_beta)
    mha2 = multi_head_attention(e_p, e_od, od_mask, layer.p_attn, rng, training)
    rep2 = fuse_add_normalize(e_p, mha2, layer.ln2_gamma, layer.ln2_beta)
    return Representations(rep1=rep1, rep2=rep2,
                           od_mask=np.asarray(od_mask, dtype=bool),
                           p_mask=np.asarray(p_mask, dtype=bool))


_DUAL_PASS = {"stacked": dual_pass_stacked, "parallel": dual_pass_parallel}


def stack_k(e_p: Tensor, e_od: Tensor, p_mask, od_mask,
            layers: list[CoAttentionLayerParams], mode: str,
            rng: np.random.Generator | None = None,
            training: bool = False) -> Representations:
    """Run k dual-pass layers; layer j>1 consumes the previous outputs in the
    (passage-like, option-definition-like) roles."""
    if len(layers) < 1:
        raise ValueError("stack_k needs at least one layer")
    if mode not in _DUAL_PASS:
        raise ValueError(f"unknown co-attention mode {mode!r}")
    dual_pass = _DUAL_PASS[mode]
    passage_like, od_like = e_p, e_od
    reps = None
    for layer in layers:
        reps = dual_pass(passage_like, od_like, p_mask, od_mask, layer,
                         rng, training)
        passage_like, od_like = reps.rep2, reps.rep1
    return reps
