"""Training loop, schedule, optimizer, evaluation, and ensembling.

A run is deterministic given its seed: shuffling, parameter init, and
dropout all draw from one seeded generator, so two runs with the same
config and seed produce bit-identical loss trajectories and metrics.
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autograd as ag
from .autograd import Tape, Tensor
from .classifier import (ModelParams, init_model, instance_forward,
                         instance_loss, predict_index)
from .config import (ModelConfig, TrainConfig, model_config_from_dict,
                     train_config_from_dict, validate_configs)
from .data import Instance, Vocabulary, build_inputs

CHECKPOINT_FORMAT_VERSION = 1


class TrainingError(Exception):
    """Aborted optimization; the message carries the step and cause."""


class SeedRunError(TrainingError):
    """One seed of a multi-seed run failed; completed records are attached."""

    def __init__(self, message: str, partial_records: list["RunRecord"]):
        super().__init__(message)
        self.partial_records = partial_records


# ---------------------------------------------------------------------------
# schedule and gradient utilities


def lr_at(step: float, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup to the peak, then linear decay to zero at total_steps."""
    if step < 0:
        raise ValueError(f"negative step {step}")
    if step > total_steps:
        warnings.warn(f"lr_at called with step {step} past total_steps "
                      f"{total_steps}; clamping to 0", stacklevel=2)
        return 0.0
    warmup = cfg.warmup_fraction * total_steps
    if step <= warmup:
        return cfg.peak_lr * (step / warmup)
    return cfg.peak_lr * (total_steps - step) / (total_steps - warmup)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm.

    Returns the pre-clip global norm.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


def _decays(name: str) -> bool:
    """Weight decay skips layer-norm affine parameters and biases."""
    leaf = name.rsplit(".", 1)[-1]
    if leaf in ("bias", "b1", "b2"):
        return False
    return not (leaf.endswith("gamma") or leaf.endswith("beta"))


class AdamW:
    """Decoupled weight decay Adam over a named parameter dict."""

    def __init__(self, named_params: dict[str, Tensor],
                 betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.01):
        self.params = dict(named_params)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self, lr: float) -> None:
        for name, p in self.params.items():
            g = p.grad
            if g is not None and not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in {name}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and _decays(name):
                update = update + self.weight_decay * p.data
            p.data -= lr * update


# ---------------------------------------------------------------------------
# evaluation


def predict(params: ModelParams, cfg: ModelConfig, instances: list[Instance],
            vocab: Vocabulary) -> list[int]:
    """Deterministic per-instance argmax predictions (dropout disabled)."""
    out = []
    for inst in instances:
        inputs = build_inputs(inst, vocab, cfg.max_seq_len,
                              use_definitions=cfg.use_definitions)
        logits = instance_forward(inputs, params, cfg, training=False)
        out.append(predict_index(logits.data))
    return out


def evaluate(params: ModelParams, cfg: ModelConfig,
             instances: list[Instance], vocab: Vocabulary) -> float:
    """Accuracy of argmax predictions over a fully labeled dataset."""
    if not instances:
        raise ValueError("evaluate needs a non-empty dataset")
    unlabeled = [inst.id for inst in instances if inst.label is None]
    if unlabeled:
        raise ValueError(f"evaluate needs labels; missing on {unlabeled[:5]}")
    preds = predict(params, cfg, instances, vocab)
    hits = sum(1 for p, inst in zip(preds, instances) if p == inst.label)
    return hits / len(instances)


# ---------------------------------------------------------------------------
# the training loop


@dataclass
class EvalPoint:
    step: int
    train_loss: float
    dev_accuracy: float
    lr: float


@dataclass
class RunRecord:
    """Everything one seeded run produced."""

    seed: int
    history: list[EvalPoint] = field(default_factory=list)
    best_dev_accuracy: float = 0.0
    best_step: int = 0
    best_state: dict[str, np.ndarray] = field(default_factory=dict)
    checkpoint_path: str | None = None

    def as_rows(self) -> list[dict]:
        return [{"step": pt.step, "train_loss": pt.train_loss,
                 "dev_accuracy": pt.dev_accuracy, "lr": pt.lr,
                 "seed": self.seed} for pt in self.history]


def _snapshot(named: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in named.items()}


def train(model_cfg: ModelConfig, train_cfg: TrainConfig,
          train_instances: list[Instance], dev_instances: list[Instance],
          seed: int, vocab: Vocabulary | None = None
          ) -> tuple[RunRecord, ModelParams, ModelConfig, Vocabulary]:
    """One seeded optimization run.

    Returns the run record, the final (not best) parameters, the model
    config with its vocabulary size filled in, and the vocabulary. The best
    dev-accuracy parameter snapshot is in ``record.best_state``.
    """
    validate_configs(model_cfg, train_cfg)
    if not train_instances or not dev_instances:
        raise ValueError("train and dev sets must be non-empty")
    if any(inst.label is None for inst in train_instances):
        raise ValueError("every training instance needs a label")

    if vocab is None:
        vocab = Vocabulary.build(train_instances,
                                 min_freq=train_cfg.vocab_min_freq,
                                 use_definitions=model_cfg.use_definitions)
    cfg = dataclasses.replace(model_cfg, vocab_size=len(vocab))

    rng = np.random.default_rng(seed)
    params = init_model(rng, cfg)
    named = params.named_parameters()
    optimizer = AdamW(named, betas=(train_cfg.beta1, train_cfg.beta2),
                      eps=train_cfg.adam_eps,
                      weight_decay=train_cfg.weight_decay)

    inputs_cache = [build_inputs(inst, vocab, cfg.max_seq_len,
                                 use_definitions=cfg.use_definitions)
                    for inst in train_instances]
    labels = [inst.label for inst in train_instances]

    n = len(train_instances)
    steps_per_epoch = math.ceil(n / train_cfg.batch_size)
    if train_cfg.max_steps is not None:
        total_steps = train_cfg.max_steps
    else:
        total_steps = train_cfg.epochs * steps_per_epoch

    record = RunRecord(seed=seed)
    window_losses: list[float] = []
    step = 0
    done = False

    def evaluate_now(current_lr: float) -> None:
        dev_acc = evaluate(params, cfg, dev_instances, vocab)
        window = float(np.mean(window_losses)) if window_losses else math.nan
        record.history.append(EvalPoint(step=step, train_loss=window,
                                        dev_accuracy=dev_acc, lr=current_lr))
        window_losses.clear()
        if not record.best_state or dev_acc > record.best_dev_accuracy:
            record.best_dev_accuracy = dev_acc
            record.best_step = step
            record.best_state = _snapshot(named)

    while not done:
        order = rng.permutation(n)
        for start in range(0, n, train_cfg.batch_size):
            batch = order[start:start + train_cfg.batch_size]
            step += 1
            lr = lr_at(step, total_steps, train_cfg)
            ag.zero_grads(named.values())
            with Tape() as tape:
                losses = [instance_loss(inputs_cache[i], labels[i], params,
                                        cfg, rng=rng, training=True)[0]
                          for i in batch]
                loss = ag.scale(ag.sum_all(ag.stack_scalars(losses)),
                                1.0 / len(batch))
                value = float(loss.data)
                if not math.isfinite(value):
                    raise TrainingError(f"non-finite loss {value} at step {step}")
                tape.backward(loss)
            grads = {name: t.grad for name, t in named.items()
                     if t.grad is not None}
            clip_global_norm(grads, train_cfg.grad_clip_norm)
            optimizer.step(lr)
            window_losses.append(value)
            if step % train_cfg.eval_every_steps == 0:
                evaluate_now(lr)
            if step >= total_steps:
                done = True
                break

    if not record.history or record.history[-1].step != step:
        evaluate_now(lr_at(step, total_steps, train_cfg))
    return record, params, cfg, vocab


# ---------------------------------------------------------------------------
# multi-seed aggregation and ensembling


@dataclass
class SeedAggregate:
    records: list[RunRecord]
    mean_best_accuracy: float
    std_best_accuracy: float


def run_seeds(model_cfg: ModelConfig, train_cfg: TrainConfig,
              train_instances: list[Instance], dev_instances: list[Instance],
              vocab: Vocabulary | None = None) -> SeedAggregate:
    """Independent runs over train_cfg.seeds with mean/stddev of best accuracy.

    A failing seed raises SeedRunError carrying the completed records.
    """
    records: list[RunRecord] = []
    for seed in train_cfg.seeds:
        try:
            record, _, _, _ = train(model_cfg, train_cfg, train_instances,
                                    dev_instances, seed=seed, vocab=vocab)
        except TrainingError as exc:
            raise SeedRunError(f"seed {seed} failed: {exc}", records) from exc
        records.append(record)
    best = np.array([r.best_dev_accuracy for r in records])
    return SeedAggregate(records=records,
                         mean_best_accuracy=float(best.mean()),
                         std_best_accuracy=float(best.std()))


def majority_vote(predictions: list[list[int]]) -> list[int]:
    """Per-instance most frequent prediction across models.

    Ties go to the earliest-listed model whose prediction is among the tied
    indices.
    """
    if not predictions:
        raise ValueError("majority_vote needs at least one model")
    length = len(predictions[0])
    if any(len(p) != length for p in predictions):
        raise ValueError("majority_vote needs equal-length prediction lists")
    out = []
    for i in range(length):
        votes = [p[i] for p in predictions]
        counts: dict[int, int] = {}
        for v in votes:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        tied = {v for v, c in counts.items() if c == top}
        out.append(next(v for v in votes if v in tied))
    return out


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, state: dict[str, np.ndarray],
                    model_cfg: ModelConfig, train_cfg: TrainConfig,
                    vocab: Vocabulary) -> None:
    """Single-file container: named fp64 arrays plus a JSON metadata blob."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": model_cfg.to_dict(),
        "train_config": train_cfg.to_dict(),
        "vocabulary": vocab.to_dict(),
    }
    arrays = {}
    for name, arr in state.items():
        if name.startswith("_"):
            raise ValueError(f"parameter name {name!r} collides with metadata")
        # asarray keeps 0-d shapes; ascontiguousarray would force 1-d
        arrays[name] = np.asarray(arr, dtype=np.float64, order="C")
    arrays["_meta"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with path.open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path
                    ) -> tuple[dict[str, np.ndarray], dict]:
    """Read back a checkpoint's named arrays and its metadata dict."""
    path = Path(path)
    with np.load(path) as archive:
        if "_meta" not in archive:
            raise ValueError(f"{path} is not a checkpoint (missing metadata)")
        meta = json.loads(bytes(archive["_meta"]).decode("utf-8"))
        version = meta.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format version {version}")
        state = {name: archive[name] for name in archive.files
                 if name != "_meta"}
    for name, arr in state.items():
        if arr.dtype != np.float64:
            raise ValueError(f"checkpoint array {name} has dtype {arr.dtype}, "
                             f"expected float64")
    return state, meta


def restore_model(path: str | Path
                  ) -> tuple[ModelParams, ModelConfig, TrainConfig, Vocabulary]:
    """Rebuild a model object from a checkpoint file."""
    state, meta = load_checkpoint(path)
    model_cfg = model_config_from_dict(meta["model_config"])
    train_cfg = train_config_from_dict(meta["train_config"])
    vocab = Vocabulary.from_dict(meta["vocabulary"])
    params = init_model(np.random.default_rng(0), model_cfg)
    named = params.named_parameters()
    missing = sorted(set(named) - set(state))
    extra = sorted(set(state) - set(named))
    if missing or extra:
        raise ValueError(f"checkpoint does not match the configured model; "
                         f"missing {missing[:4]}, unexpected {extra[:4]}")
    for name, t in named.items():
        if state[name].shape != t.data.shape:
            raise ValueError(f"checkpoint array {name} has shape "
                             f"{state[name].shape}, expected {t.data.shape}")
        t.data = state[name].copy()
    return params, model_cfg, train_cfg, vocab


# ---------------------------------------------------------------------------
# metrics output


def config_echo(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    return json.dumps({"model": model_cfg.to_dict(),
                       "train": train_cfg.to_dict()}, sort_keys=True)


def write_metrics_csv(path: str | Path, records: list[RunRecord],
                      model_cfg: ModelConfig, train_cfg: TrainConfig) -> None:
    """Eval-point rows for all seeds, prefixed with one config-echo comment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# config = {config_echo(model_cfg, train_cfg)}",
             "step,train_loss,dev_accuracy,lr,seed"]
    for record in records:
        for row in record.as_rows():
            lines.append(f"{row['step']},{row['train_loss']!r},"
                         f"{row['dev_accuracy']!r},{row['lr']!r},{row['seed']}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
