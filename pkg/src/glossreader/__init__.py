"""Multiple-choice reading comprehension with gloss-enriched dual co-attention."""

__version__ = "0.1.0"

from .classifier import init_model, instance_forward, instance_loss, predict_index
from .config import ModelConfig, TrainConfig, desk_preset, full_scale_preset
from .data import Instance, Vocabulary, build_inputs, load_jsonl
from .training import (evaluate, majority_vote, predict, restore_model,
                       run_seeds, save_checkpoint, train)
from .wordnet import GlossLookup, PosTag, enrich_instance, infer_pos

__all__ = [
    "ModelConfig", "TrainConfig", "desk_preset", "full_scale_preset",
    "Instance", "Vocabulary", "build_inputs", "load_jsonl",
    "init_model", "instance_forward", "instance_loss", "predict_index",
    "train", "evaluate", "predict", "run_seeds", "majority_vote",
    "save_checkpoint", "restore_model",
    "GlossLookup", "PosTag", "enrich_instance", "infer_pos",
]
