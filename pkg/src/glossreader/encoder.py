"""Small transformer encoder producing contextual token embeddings.

A stand-in for a large pre-trained encoder at desk scale: learned token,
positional, and segment-type embeddings summed, then post-norm blocks of
multi-head self-attention and a position-wise feed-forward network. The
output sequence splits into passage and option-definition representations
for the co-attention stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .coattention import MultiHeadParams, init_multi_head, multi_head_attention
from .config import ModelConfig
from .data import CLS_ID, ModelInput, SEP_ID

EMBED_INIT_STD = 0.1


@dataclass
class EncoderBlockParams:
    """One block: self-attention, then a two-layer FFN, each with add & norm."""

    attn: MultiHeadParams
    ln1_gamma: Tensor
    ln1_beta: Tensor
    w1: Tensor           # (d_model, ffn_dim)
    b1: Tensor
    w2: Tensor           # (ffn_dim, d_model)
    b2: Tensor
    ln2_gamma: Tensor
    ln2_beta: Tensor

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = self.attn.named(f"{prefix}.attn")
        out.update({
            f"{prefix}.ln1_gamma": self.ln1_gamma,
            f"{prefix}.ln1_beta": self.ln1_beta,
            f"{prefix}.w1": self.w1,
            f"{prefix}.b1": self.b1,
            f"{prefix}.w2": self.w2,
            f"{prefix}.b2": self.b2,
            f"{prefix}.ln2_gamma": self.ln2_gamma,
            f"{prefix}.ln2_beta": self.ln2_beta,
        })
        return out


@dataclass
class EncoderParams:
    token_table: Tensor    # (vocab_size, d_model)
    pos_table: Tensor      # (max_seq_len, d_model)
    type_table: Tensor     # (2, d_model)
    blocks: list[EncoderBlockParams]

    def named(self, prefix: str = "encoder") -> dict[str, Tensor]:
        out = {
            f"{prefix}.token_table": self.token_table,
            f"{prefix}.pos_table": self.pos_table,
            f"{prefix}.type_table": self.type_table,
        }
        for j, block in enumerate(self.blocks):
            out.update(block.named(f"{prefix}.block{j}"))
        return out


def init_encoder_params(rng: np.random.Generator,
                        cfg: ModelConfig) -> EncoderParams:
    if cfg.vocab_size < 5:
        raise ValueError(f"vocab_size {cfg.vocab_size} is too small; build "
                         f"the vocabulary before initializing parameters")
    d, f = cfg.d_model, cfg.ffn_dim
    head_dim = cfg.d_model // cfg.n_heads_enc
    blocks = []
    for _ in range(cfg.n_blocks):
        blocks.append(EncoderBlockParams(
            attn=init_multi_head(rng, d, cfg.n_heads_enc, head_dim, head_dim,
                                 dropout_p=0.0),
            ln1_gamma=ag.ones((d,), requires_grad=True),
            ln1_beta=ag.zeros((d,), requires_grad=True),
            w1=ag.randn(rng, (d, f), 1.0 / math.sqrt(d), requires_grad=True),
            b1=ag.zeros((f,), requires_grad=True),
            w2=ag.randn(rng, (f, d), 1.0 / math.sqrt(f), requires_grad=True),
            b2=ag.zeros((d,), requires_grad=True),
            ln2_gamma=ag.ones((d,), requires_grad=True),
            ln2_beta=ag.zeros((d,), requires_grad=True),
        ))
    return EncoderParams(
        token_table=ag.randn(rng, (cfg.vocab_size, d), EMBED_INIT_STD,
                             requires_grad=True),
        pos_table=ag.randn(rng, (cfg.max_seq_len, d), EMBED_INIT_STD,
                           requires_grad=True),
        type_table=ag.randn(rng, (2, d), EMBED_INIT_STD, requires_grad=True),
        blocks=blocks,
    )


def embed(model_input: ModelInput, params: EncoderParams) -> Tensor:
    """Sum token, positional, and segment-type embedding rows per position."""
    n = len(model_input.token_ids)
    tok = ag.gather_rows(params.token_table, model_input.token_ids)
    pos = ag.gather_rows(params.pos_table, np.arange(n))
    typ = ag.gather_rows(params.type_table, model_input.token_type_ids)
    return ag.add(ag.add(tok, pos), typ)


def encode(x: Tensor, mask, params: EncoderParams) -> Tensor:
    """Apply the block stack; padded positions are masked out of attention."""
    for block in params.blocks:
        attn_out = multi_head_attention(x, x, mask, block.attn)
        x = ag.layer_norm(ag.add(x, attn_out), block.ln1_gamma, block.ln1_beta)
        hidden = ag.relu(ag.add_row(ag.matmul(x, block.w1), block.b1))
        ffn_out = ag.add_row(ag.matmul(hidden, block.w2), block.b2)
        x = ag.layer_norm(ag.add(x, ffn_out), block.ln2_gamma, block.ln2_beta)
    return x


@dataclass
class SplitEncoding:
    """Passage and option-definition rows gathered out of the full sequence.

    Rows hold only real content tokens, so the masks are all-True; they are
    kept because downstream attention and pooling take explicit masks.
    ``p_positions``/``od_positions`` record each row's original sequence
    position (disjoint by construction).
    """

    e_p: Tensor
    e_od: Tensor
    p_mask: np.ndarray
    od_mask: np.ndarray
    p_positions: np.ndarray
    od_positions: np.ndarray


def split_representations(h: Tensor, model_input: ModelInput,
                          include_separators: bool = False) -> SplitEncoding:
    """Split encoded rows into the two segments around the [SEP] markers.

    The leading [CLS], both [SEP]s (unless ``include_separators``), and all
    padding rows are excluded.
    """
    ids = model_input.token_ids
    mask = model_input.attention_mask
    content_ids = ids[mask]
    sep_positions = np.flatnonzero((ids == SEP_ID) & mask)
    if (len(content_ids) == 0 or content_ids[0] != CLS_ID
            or len(sep_positions) != 2):
        raise ValueError("malformed input layout: expected [CLS] passage "
                         "[SEP] option-definition [SEP]")
    s1, s2 = int(sep_positions[0]), int(sep_positions[1])
    if include_separators:
        p_positions = np.arange(1, s1 + 1)
        od_positions = np.arange(s1 + 1, s2 + 1)
    else:
        p_positions = np.arange(1, s1)
        od_positions = np.arange(s1 + 1, s2)
    if len(p_positions) == 0 or len(od_positions) == 0:
        raise ValueError("malformed input layout: empty passage or "
                         "option-definition segment")
    return SplitEncoding(
        e_p=ag.gather_rows(h, p_positions),
        e_od=ag.gather_rows(h, od_positions),
        p_mask=np.ones(len(p_positions), dtype=bool),
        od_mask=np.ones(len(od_positions), dtype=bool),
        p_positions=p_positions,
        od_positions=od_positions,
    )
