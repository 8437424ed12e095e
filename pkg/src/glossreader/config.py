"""Model and training configuration with desk-scale and reference presets.

The desk preset is small enough for finite-difference checks and CPU
training; the full-scale preset records the reference hyperparameters for
documentation and is not meant for routine execution.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

MODES = ("stacked", "parallel")


class ConfigError(Exception):
    """Invalid configuration; the message lists every offending field."""


@dataclass
class ModelConfig:
    """Architecture settings shared by the encoder, co-attention, and head."""

    vocab_size: int = 0          # filled in after the vocabulary is built
    max_seq_len: int = 150
    d_model: int = 64
    n_blocks: int = 2
    n_heads_enc: int = 4
    ffn_dim: int = 256
    coattn_heads: int = 4
    d_qk: int = 16               # query/key width (dot-product compatible)
    d_v: int = 16
    k: int = 1                   # stacked co-attention layers
    mode: str = "stacked"
    dropout_p: float = 0.1
    shared_projections: bool = False   # one projection set for both passes
    include_separators: bool = False   # keep [SEP] rows in the split segments
    use_definitions: bool = True

    def validate(self) -> list[str]:
        problems = []
        if self.max_seq_len < 5:
            problems.append(f"max_seq_len must be at least 5, got {self.max_seq_len}")
        if self.d_model < 1:
            problems.append(f"d_model must be positive, got {self.d_model}")
        if self.n_blocks < 0:
            problems.append(f"n_blocks must be non-negative, got {self.n_blocks}")
        if self.n_heads_enc < 1 or self.d_model % max(self.n_heads_enc, 1):
            problems.append(
                f"n_heads_enc must be positive and divide d_model, got "
                f"{self.n_heads_enc} for d_model={self.d_model}")
        if self.ffn_dim < 1:
            problems.append(f"ffn_dim must be positive, got {self.ffn_dim}")
        if self.coattn_heads < 1:
            problems.append(f"coattn_heads must be positive, got {self.coattn_heads}")
        if self.d_qk < 1 or self.d_v < 1:
            problems.append(f"d_qk and d_v must be positive, got "
                            f"{self.d_qk} and {self.d_v}")
        if self.k < 1:
            problems.append(f"k must be at least 1, got {self.k}")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            problems.append(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        return problems

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainConfig:
    """Optimization settings; exactly one of epochs or max_steps is set."""

    batch_size: int = 8
    peak_lr: float = 1e-3
    warmup_fraction: float = 0.1
    grad_clip_norm: float = 10.0
    eval_every_steps: int = 50
    epochs: int | None = None
    max_steps: int | None = 500
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    vocab_min_freq: int = 1

    def validate(self) -> list[str]:
        problems = []
        if self.batch_size < 1:
            problems.append(f"batch_size must be at least 1, got {self.batch_size}")
        if self.peak_lr <= 0:
            problems.append(f"peak_lr must be positive, got {self.peak_lr}")
        if not 0.0 < self.warmup_fraction < 1.0:
            problems.append(
                f"warmup_fraction must be in (0, 1), got {self.warmup_fraction}")
        if self.grad_clip_norm <= 0:
            problems.append(
                f"grad_clip_norm must be positive, got {self.grad_clip_norm}")
        if self.eval_every_steps < 1:
            problems.append(
                f"eval_every_steps must be at least 1, got {self.eval_every_steps}")
        if (self.epochs is None) == (self.max_steps is None):
            problems.append("exactly one of epochs or max_steps must be set, "
                            f"got epochs={self.epochs} max_steps={self.max_steps}")
        if self.epochs is not None and self.epochs < 1:
            problems.append(f"epochs must be at least 1, got {self.epochs}")
        if self.max_steps is not None and self.max_steps < 1:
            problems.append(f"max_steps must be at least 1, got {self.max_steps}")
        if not self.seeds:
            problems.append("seeds must list at least one seed")
        if self.weight_decay < 0:
            problems.append(
                f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.vocab_min_freq < 1:
            problems.append(
                f"vocab_min_freq must be at least 1, got {self.vocab_min_freq}")
        return problems

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d


def validate_configs(model: ModelConfig, train: TrainConfig) -> None:
    """Raise ConfigError naming every offending field across both configs."""
    problems = model.validate() + train.validate()
    if problems:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))


def _from_dict(cls, d: dict):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = dict(d)
    if "seeds" in kwargs and kwargs["seeds"] is not None:
        kwargs["seeds"] = tuple(int(s) for s in kwargs["seeds"])
    return cls(**kwargs)


def model_config_from_dict(d: dict) -> ModelConfig:
    return _from_dict(ModelConfig, d)


def train_config_from_dict(d: dict) -> TrainConfig:
    return _from_dict(TrainConfig, d)


def desk_preset() -> tuple[ModelConfig, TrainConfig]:
    """Small configuration used by the acceptance and overfit suites."""
    model = ModelConfig(max_seq_len=32, d_model=64, n_blocks=2, n_heads_enc=4,
                        ffn_dim=256, coattn_heads=4, d_qk=16, d_v=16, k=1,
                        mode="stacked", dropout_p=0.1)
    train = TrainConfig(batch_size=8, peak_lr=1e-3, warmup_fraction=0.1,
                        grad_clip_norm=10.0, eval_every_steps=50,
                        epochs=None, max_steps=500)
    return model, train


def full_scale_preset() -> tuple[ModelConfig, TrainConfig]:
    """Reference-scale settings, recorded for documentation.

    Co-attention uses 64 heads of width 64 at hidden size 4096 over length-150
    inputs; training runs 3 epochs at batch size 2, peak learning rate 5e-6
    with 10% linear warmup, gradient norm clipped to 10, dropout 0.1,
    evaluating every 200 steps over 5 seeds. The toy encoder depth stays small
    because the original pre-trained encoder is out of scope here.
    """
    model = ModelConfig(max_seq_len=150, d_model=4096, n_blocks=2,
                        n_heads_enc=4, ffn_dim=16384, coattn_heads=64,
                        d_qk=64, d_v=64, k=1, mode="stacked", dropout_p=0.1)
    train = TrainConfig(batch_size=2, peak_lr=5e-6, warmup_fraction=0.1,
                        grad_clip_norm=10.0, eval_every_steps=200,
                        epochs=3, max_steps=None, seeds=(1, 2, 3, 4, 5))
    return model, train
