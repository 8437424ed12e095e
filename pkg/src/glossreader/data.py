"""Dataset loading, tokenization, and fixed-length model input assembly.

Instances are one multiple-choice item each: a passage, a question holding a
single ``@placeholder``, five candidate answers, and an optional gold label.
Files are JSONL with keys ``article``, ``question``, ``option_0``..``option_4``
and optionally ``label``; enriched files add ``definitions`` and ``pos_tags``
lists (one entry per candidate).
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PLACEHOLDER = "@placeholder"

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3

# letter runs, digit runs, or single punctuation characters
_TOKEN_RE = re.compile(r"[^\W\d_]+|\d+|[^\w\s]|_", re.UNICODE)


class DatasetError(Exception):
    """Malformed dataset content; carries file/line context in the message."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split into letter runs, digit runs, and punctuation chars."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Instance:
    """One reading-comprehension item with exactly five candidate answers."""

    id: str
    passage: str
    question: str
    candidates: list[str]
    label: int | None = None
    definitions: list[str] | None = None
    pos_tags: list[str] | None = None

    def __post_init__(self):
        if len(self.candidates) != 5:
            raise DatasetError(
                f"instance {self.id}: expected 5 candidates, got {len(self.candidates)}")
        if self.question.count(PLACEHOLDER) != 1:
            raise DatasetError(
                f"instance {self.id}: question must contain exactly one "
                f"{PLACEHOLDER}, found {self.question.count(PLACEHOLDER)}")
        if self.label is not None and not 0 <= self.label < 5:
            raise DatasetError(
                f"instance {self.id}: label {self.label} outside [0, 5)")
        if self.definitions is not None and len(self.definitions) != 5:
            raise DatasetError(
                f"instance {self.id}: definitions list must have 5 entries")


def load_jsonl(path: str | Path) -> list[Instance]:
    """Read one JSON object per line into Instances; blank tail lines ignored."""
    path = Path(path)
    instances: list[Instance] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if isinstance(obj, dict) and "_meta" in obj:
                # annotation record (config echo), not an instance
                continue
            try:
                candidates = [obj[f"option_{i}"] for i in range(5)]
                passage = obj["article"]
                question = obj["question"]
            except KeyError as exc:
                raise DatasetError(f"{path}:{lineno}: missing key {exc}") from exc
            label = obj.get("label")
            if label is not None:
                label = int(label)
                if not 0 <= label < 5:
                    raise DatasetError(
                        f"{path}:{lineno}: label {label} outside [0, 5)")
            try:
                instances.append(Instance(
                    id=str(obj.get("id", lineno - 1)),
                    passage=passage,
                    question=question,
                    candidates=[str(c) for c in candidates],
                    label=label,
                    definitions=obj.get("definitions"),
                    pos_tags=obj.get("pos_tags"),
                ))
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return instances


def substitute_placeholder(question: str, candidate: str) -> str:
    """Replace the single ``@placeholder`` occurrence with the candidate."""
    n = question.count(PLACEHOLDER)
    if n != 1:
        raise DatasetError(
            f"expected exactly one {PLACEHOLDER}, found {n}: {question!r}")
    return question.replace(PLACEHOLDER, candidate)


class Vocabulary:
    """Token-to-id map with fixed special tokens and frequency-ordered ids.

    Ids are assigned by descending corpus frequency (ties broken
    lexicographically) so the mapping is stable across runs on the same
    corpus and settings.
    """

    def __init__(self, tokens_in_order: list[str], min_frequency: int = 1):
        self.min_frequency = min_frequency
        self.id_to_token = [PAD, UNK, CLS, SEP] + list(tokens_in_order)
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DatasetError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: list[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(tok, UNK_ID) for tok in tokens]

    @classmethod
    def build(cls, instances: list[Instance], min_freq: int = 1,
              use_definitions: bool = True) -> "Vocabulary":
        """Count tokens over passages, substituted options, and definitions."""
        if not instances:
            raise DatasetError("cannot build a vocabulary from an empty corpus")
        counts: Counter[str] = Counter()
        for inst in instances:
            counts.update(tokenize(inst.passage))
            for cand in inst.candidates:
                counts.update(tokenize(substitute_placeholder(inst.question, cand)))
            if use_definitions and inst.definitions:
                for definition in inst.definitions:
                    counts.update(tokenize(definition))
        kept = [(tok, c) for tok, c in counts.items() if c >= min_freq]
        kept.sort(key=lambda item: (-item[1], item[0]))
        return cls([tok for tok, _ in kept], min_frequency=min_freq)

    def to_dict(self) -> dict:
        return {"min_frequency": self.min_frequency,
                "tokens": self.id_to_token[4:]}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(list(d["tokens"]), min_frequency=int(d["min_frequency"]))


@dataclass
class ModelInput:
    """One fixed-length encoded sequence: [CLS] passage [SEP] option+def [SEP].

    ``token_type_ids`` are 0 through the first [SEP] inclusive and 1 after;
    ``attention_mask`` is True exactly on non-[PAD] positions.
    """

    token_ids: np.ndarray
    token_type_ids: np.ndarray
    attention_mask: np.ndarray

    def __len__(self) -> int:
        return len(self.token_ids)


def assemble_input(passage_tokens: list[str], option_tokens: list[str],
                   definition_tokens: list[str], vocab: Vocabulary,
                   max_seq_len: int) -> ModelInput:
    """Lay out [CLS] P... [SEP] O... D... [SEP] [PAD]... at exactly max_seq_len.

    The content budget (max_seq_len minus the three specials) is split into
    fixed halves: the option-definition segment may use at most floor(half)
    positions (definitions trimmed before option words) and the passage at
    most the rest, truncated from the end. Fixed allocations keep the passage
    segment identical across an instance's five options regardless of how
    long each option's definition is.
    """
    if max_seq_len < 5:
        raise DatasetError(
            f"max_seq_len {max_seq_len} cannot hold [CLS] + passage + [SEP] "
            f"+ option + [SEP]")
    if not option_tokens:
        raise DatasetError("option segment is empty")
    if not passage_tokens:
        raise DatasetError("passage is empty")
    content = max_seq_len - 3
    od_cap = content // 2
    p_cap = content - od_cap

    option = list(option_tokens)
    definition = list(definition_tokens)
    if len(option) + len(definition) > od_cap:
        definition = definition[:max(0, od_cap - len(option))]
        option = option[:od_cap]
    passage = list(passage_tokens)[:p_cap]

    tokens = [CLS] + passage + [SEP] + option + definition + [SEP]
    first_sep = len(passage) + 1
    n_pad = max_seq_len - len(tokens)
    ids = vocab.encode(tokens) + [PAD_ID] * n_pad
    types = np.ones(max_seq_len, dtype=np.int64)
    types[:first_sep + 1] = 0
    mask = np.zeros(max_seq_len, dtype=bool)
    mask[:len(tokens)] = True
    return ModelInput(token_ids=np.array(ids, dtype=np.int64),
                      token_type_ids=types, attention_mask=mask)


def option_text(instance: Instance, index: int) -> str:
    return substitute_placeholder(instance.question, instance.candidates[index])


def build_inputs(instance: Instance, vocab: Vocabulary, max_seq_len: int,
                 use_definitions: bool = True) -> list[ModelInput]:
    """Assemble the five per-option inputs for one instance."""
    passage_tokens = tokenize(instance.passage)
    inputs = []
    for i in range(5):
        opt_tokens = tokenize(option_text(instance, i))
        if use_definitions and instance.definitions:
            def_tokens = tokenize(instance.definitions[i])
        else:
            def_tokens = []
        inputs.append(assemble_input(passage_tokens, opt_tokens, def_tokens,
                                     vocab, max_seq_len))
    return inputs


@dataclass
class SplitStats:
    """Headline statistics for one dataset split."""

    count: int
    avg_passage_len: float
    avg_question_len: float
    vocab_size: int
    answer_vocab_size: int

    def as_row(self) -> dict:
        return {
            "count": self.count,
            "avg_passage_len": round(self.avg_passage_len, 2),
            "avg_question_len": round(self.avg_question_len, 2),
            "vocab_size": self.vocab_size,
            "answer_vocab_size": self.answer_vocab_size,
        }


def dataset_stats(instances: list[Instance]) -> SplitStats:
    """Token counts use this module's tokenizer, so only instance counts are
    comparable with statistics computed under other tokenizations."""
    if not instances:
        raise DatasetError("dataset_stats needs a non-empty instance list")
    vocab: set[str] = set()
    answers: set[str] = set()
    passage_total = 0
    question_total = 0
    for inst in instances:
        p_tokens = tokenize(inst.passage)
        q_tokens = tokenize(inst.question)
        passage_total += len(p_tokens)
        question_total += len(q_tokens)
        vocab.update(p_tokens)
        vocab.update(q_tokens)
        for cand in inst.candidates:
            vocab.update(tokenize(cand))
            answers.add(cand.strip().lower())
    n = len(instances)
    return SplitStats(count=n,
                      avg_passage_len=passage_total / n,
                      avg_question_len=question_total / n,
                      vocab_size=len(vocab),
                      answer_vocab_size=len(answers))
