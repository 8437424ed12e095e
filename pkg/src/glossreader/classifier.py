"""Pooling head: merge the dual representations and score each option.

Each of an instance's five options runs the same encoder, co-attention
stack, and scoring head independently; the five scalar scores form the
logits for a softmax cross-entropy over options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .coattention import (CoAttentionLayerParams, Representations,
                          init_coattention_stack, stack_k)
from .config import ModelConfig
from .data import ModelInput
from .encoder import (EncoderParams, embed, encode, init_encoder_params,
                      split_representations)


@dataclass
class ClassifierParams:
    """Shared scoring vector over the merged (2 * d_model) representation."""

    w_score: Tensor   # (2 * d_model,)
    bias: Tensor      # scalar

    def named(self, prefix: str = "head") -> dict[str, Tensor]:
        return {f"{prefix}.w_score": self.w_score, f"{prefix}.bias": self.bias}


def init_classifier_params(rng: np.random.Generator,
                           cfg: ModelConfig) -> ClassifierParams:
    width = 2 * cfg.d_model
    return ClassifierParams(
        w_score=ag.randn(rng, (width,), 1.0 / math.sqrt(width),
                         requires_grad=True),
        bias=ag.zeros((), requires_grad=True),
    )


@dataclass
class ModelParams:
    """Every learnable tensor in the system, addressable by name."""

    encoder: EncoderParams
    coattn: list[CoAttentionLayerParams]
    head: ClassifierParams

    def named_parameters(self) -> dict[str, Tensor]:
        out = self.encoder.named("encoder")
        for j, layer in enumerate(self.coattn):
            out.update(layer.named(f"coattn{j}"))
        out.update(self.head.named("head"))
        return out


def init_model(rng: np.random.Generator, cfg: ModelConfig) -> ModelParams:
    return ModelParams(
        encoder=init_encoder_params(rng, cfg),
        coattn=init_coattention_stack(rng, cfg),
        head=init_classifier_params(rng, cfg),
    )


def pool_and_merge(reps: Representations) -> Tensor:
    """Masked mean of each representation, concatenated to one vector."""
    i1 = ag.mean_pool_masked(reps.rep1, reps.od_mask)
    i2 = ag.mean_pool_masked(reps.rep2, reps.p_mask)
    return ag.concat([i1, i2], axis=0)


def score_option(merged: Tensor, params: ClassifierParams) -> Tensor:
    """Scalar score: dot(merged, w_score) + bias."""
    return ag.add(ag.dot(merged, params.w_score), params.bias)


def option_forward(model_input: ModelInput, params: ModelParams,
                   cfg: ModelConfig, rng: np.random.Generator | None = None,
                   training: bool = False) -> Tensor:
    x = embed(model_input, params.encoder)
    h = encode(x, model_input.attention_mask, params.encoder)
    split = split_representations(h, model_input, cfg.include_separators)
    reps = stack_k(split.e_p, split.e_od, split.p_mask, split.od_mask,
                   params.coattn, cfg.mode, rng, training)
    return score_option(pool_and_merge(reps), params.head)


def instance_forward(inputs: list[ModelInput], params: ModelParams,
                     cfg: ModelConfig, rng: np.random.Generator | None = None,
                     training: bool = False) -> Tensor:
    """Score all five options independently; returns the length-5 logits."""
    if len(inputs) != 5:
        raise ValueError(f"expected exactly 5 option inputs, got {len(inputs)}")
    return ag.stack_scalars(
        [option_forward(mi, params, cfg, rng, training) for mi in inputs])


def predict_index(logits: np.ndarray) -> int:
    """Argmax with ties broken toward the lowest index."""
    return int(np.argmax(logits))


def instance_loss(inputs: list[ModelInput], label: int, params: ModelParams,
                  cfg: ModelConfig, rng: np.random.Generator | None = None,
                  training: bool = False) -> tuple[Tensor, Tensor]:
    """Cross-entropy of the gold option against the five logits."""
    logits = instance_forward(inputs, params, cfg, rng, training)
    return ag.cross_entropy_softmax(logits, label), logits
