"""WordNet 3.x flat-file parsing and POS-guided definition extraction.

Reads the canonical ``dict`` layout: ``index.{noun,verb,adj,adv}``,
``data.{noun,verb,adj,adv}`` and the ``{pos}.exc`` morphology exception
files. Adjective satellites (ss_type ``s``) are folded into the adjective
tag, matching user-facing lookup behavior. Parsed structures are immutable
after loading and safe to share across readers.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

from .data import tokenize


class WordNetFormatError(Exception):
    """Raised for malformed distribution files; message carries path:line."""


class PosTag(enum.Enum):
    NOUN = "n"
    VERB = "v"
    ADJECTIVE = "a"
    ADVERB = "r"

    @property
    def file_suffix(self) -> str:
        return {"n": "noun", "v": "verb", "a": "adj", "r": "adv"}[self.value]

    @classmethod
    def from_key(cls, key: str) -> "PosTag":
        if key == "s":  # adjective satellite
            return cls.ADJECTIVE
        try:
            return cls(key)
        except ValueError:
            raise WordNetFormatError(f"unknown part-of-speech key {key!r}") from None


# fixed tie-break order: noun > verb > adjective > adverb
POS_PRIORITY = (PosTag.NOUN, PosTag.VERB, PosTag.ADJECTIVE, PosTag.ADVERB)

_DETACHMENT_RULES: dict[PosTag, list[tuple[str, str]]] = {
    PosTag.NOUN: [("s", ""), ("ses", "s"), ("xes", "x"), ("zes", "z"),
                  ("ches", "ch"), ("shes", "sh"), ("ies", "y")],
    PosTag.VERB: [("s", ""), ("ies", "y"), ("es", "e"), ("es", ""),
                  ("ed", "e"), ("ed", ""), ("ing", "e"), ("ing", "")],
    PosTag.ADJECTIVE: [("er", ""), ("er", "e"), ("est", ""), ("est", "e")],
    PosTag.ADVERB: [],
}

_QUOTED_RE = re.compile(r'"([^"]*)"')


@dataclass
class IndexEntry:
    """One index.{pos} line: a lemma and its synset offsets in sense order."""

    lemma: str
    pos: PosTag
    synset_offsets: list[int]


@dataclass
class SynsetEntry:
    """One data.{pos} line: member lemmas plus definition and example texts."""

    offset: int
    pos: PosTag
    words: list[str]
    gloss: str
    examples: list[str] = field(default_factory=list)


def _is_header(line: str) -> bool:
    return line.startswith("  ")


def parse_index_file(path: str | Path) -> list[IndexEntry]:
    """Parse an index.{pos} file, skipping the two-space license header."""
    path = Path(path)
    entries: list[IndexEntry] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if _is_header(raw) or not raw.strip():
                continue
            fields = raw.split()
            # lemma pos synset_cnt p_cnt [ptr...] sense_cnt tagsense_cnt offsets...
            if len(fields) < 6:
                raise WordNetFormatError(
                    f"{path}:{lineno}: too few fields in index line")
            try:
                lemma = fields[0]
                pos = PosTag.from_key(fields[1])
                synset_cnt = int(fields[2])
                p_cnt = int(fields[3])
                rest = fields[4 + p_cnt:]
                offsets = [int(off) for off in rest[2:]]
            except (ValueError, IndexError, WordNetFormatError) as exc:
                raise WordNetFormatError(
                    f"{path}:{lineno}: malformed index line: {exc}") from None
            if len(offsets) != synset_cnt:
                raise WordNetFormatError(
                    f"{path}:{lineno}: declared {synset_cnt} synsets but "
                    f"listed {len(offsets)} offsets")
            entries.append(IndexEntry(lemma=lemma, pos=pos,
                                      synset_offsets=offsets))
    return entries


def split_gloss(gloss_text: str) -> tuple[str, list[str]]:
    """Split raw gloss text into the definition and its quoted examples.

    The definition is everything before the first '; "' boundary; example
    sentences are the quoted segments after it.
    """
    boundary = gloss_text.find('; "')
    if boundary < 0:
        return gloss_text.strip(), []
    definition = gloss_text[:boundary].strip()
    examples = [m.group(1).strip() for m in _QUOTED_RE.finditer(gloss_text[boundary:])]
    return definition, examples


def parse_data_file(path: str | Path) -> dict[int, SynsetEntry]:
    """Parse a data.{pos} file into an offset-keyed synset map."""
    path = Path(path)
    synsets: dict[int, SynsetEntry] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if _is_header(raw) or not raw.strip():
                continue
            if "|" not in raw:
                raise WordNetFormatError(
                    f"{path}:{lineno}: data line has no '|' gloss separator")
            head, _, gloss_text = raw.partition("|")
            fields = head.split()
            # offset lex_filenum ss_type w_cnt (word lex_id)x w_cnt ...
            try:
                offset = int(fields[0])
                pos = PosTag.from_key(fields[2])
                w_cnt = int(fields[3], 16)
                words = [fields[4 + 2 * i] for i in range(w_cnt)]
            except (ValueError, IndexError, WordNetFormatError) as exc:
                raise WordNetFormatError(
                    f"{path}:{lineno}: malformed data line: {exc}") from None
            if offset in synsets:
                raise WordNetFormatError(
                    f"{path}:{lineno}: duplicate synset offset {offset}")
            gloss, examples = split_gloss(gloss_text.strip())
            if not gloss:
                raise WordNetFormatError(
                    f"{path}:{lineno}: empty gloss for offset {offset}")
            synsets[offset] = SynsetEntry(offset=offset, pos=pos, words=words,
                                          gloss=gloss, examples=examples)
    return synsets


def parse_exception_file(path: str | Path) -> dict[str, list[str]]:
    """Parse a {pos}.exc file: inflected form followed by its base forms."""
    path = Path(path)
    exceptions: dict[str, list[str]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            fields = raw.split()
            if not fields:
                continue
            if len(fields) < 2:
                raise WordNetFormatError(
                    f"{path}:{lineno}: exception line needs a base form")
            exceptions.setdefault(fields[0], []).extend(fields[1:])
    return exceptions


def morphy(word: str, pos: PosTag, exceptions: dict[str, list[str]],
           index: dict[str, IndexEntry]) -> list[str]:
    """Map an inflected form to indexed base lemmas.

    Tries, in order: the word itself, the exception list for this POS, then
    the POS's suffix-detachment rules. Only forms present in the index
    survive; an empty result means no lemma was found.
    """
    candidates: list[str] = []
    if word in index:
        candidates.append(word)
    for base in exceptions.get(word, []):
        if base in index and base not in candidates:
            candidates.append(base)
    for suffix, replacement in _DETACHMENT_RULES[pos]:
        if word.endswith(suffix) and len(word) > len(suffix):
            base = word[:len(word) - len(suffix)] + replacement
            if base in index and base not in candidates:
                candidates.append(base)
    return candidates


class GlossLookup:
    """POS-keyed gloss lookup over parsed index/data/exception files.

    Sense order follows the index files, so two loads of the same
    distribution produce identical lookup results.
    """

    def __init__(self,
                 index: dict[PosTag, dict[str, IndexEntry]],
                 synsets: dict[PosTag, dict[int, SynsetEntry]],
                 exceptions: dict[PosTag, dict[str, list[str]]]):
        self.index = index
        self.synsets = synsets
        self.exceptions = exceptions

    @classmethod
    def load(cls, root: str | Path) -> "GlossLookup":
        """Load a WordNet root (the directory holding index.noun etc.).

        A ``dict`` subdirectory is probed automatically so both a dict dir
        and its parent installation dir work. Missing exception files are
        tolerated (empty morphology exceptions); index/data files are not.
        """
        root = Path(root)
        if not (root / "index.noun").exists() and (root / "dict" / "index.noun").exists():
            root = root / "dict"
        index: dict[PosTag, dict[str, IndexEntry]] = {}
        synsets: dict[PosTag, dict[int, SynsetEntry]] = {}
        exceptions: dict[PosTag, dict[str, list[str]]] = {}
        for pos in PosTag:
            suffix = pos.file_suffix
            index_path = root / f"index.{suffix}"
            data_path = root / f"data.{suffix}"
            if not index_path.exists() or not data_path.exists():
                raise FileNotFoundError(
                    f"WordNet root {root} is missing index.{suffix} or data.{suffix}")
            index[pos] = {e.lemma: e for e in parse_index_file(index_path)}
            synsets[pos] = parse_data_file(data_path)
            exc_path = root / f"{suffix}.exc"
            exceptions[pos] = parse_exception_file(exc_path) if exc_path.exists() else {}
        return cls(index, synsets, exceptions)

    def normalize(self, word: str, pos: PosTag) -> list[str]:
        """Morphy-normalize a surface form for one POS."""
        key = word.strip().lower().replace(" ", "_")
        return morphy(key, pos, self.exceptions[pos], self.index[pos])

    def glosses(self, lemma: str, pos: PosTag) -> list[str]:
        """Definitions for an exact index lemma, in sense order."""
        entry = self.index[pos].get(lemma)
        if entry is None:
            return []
        out = []
        for offset in entry.synset_offsets:
            synset = self.synsets[pos].get(offset)
            if synset is None:
                raise WordNetFormatError(
                    f"index lemma {lemma!r} points at missing offset {offset}")
            out.append(synset.gloss)
        return out

    def glosses_for_form(self, word: str, pos: PosTag) -> list[str]:
        """Definitions for a possibly inflected form, morphy-normalized.

        Glosses are collected over the normalized lemmas in morphy order,
        deduplicated by synset.
        """
        seen: set[int] = set()
        out: list[str] = []
        for lemma in self.normalize(word, pos):
            entry = self.index[pos][lemma]
            for offset in entry.synset_offsets:
                if offset in seen:
                    continue
                seen.add(offset)
                out.append(self.synsets[pos][offset].gloss)
        return out

    def sense_count(self, word: str, pos: PosTag) -> int:
        return len(self.glosses_for_form(word, pos))


_DETERMINERS = {"the", "a", "an", "his", "her", "its", "their", "this", "these"}
_VERB_CUES = {"to", "will", "would", "can", "could", "may", "might",
              "has", "have", "had", "is", "are", "was", "were"}


def infer_pos(candidate: str, option_tokens: list[str], position: int,
              lookup: GlossLookup) -> PosTag:
    """Choose a part-of-speech tag for a candidate from its option context.

    Rule cascade: a determiner or possessive just before the candidate (one
    intervening modifier allowed, as in "the sudden collapse") forces noun; a
    preceding "to" or auxiliary forces verb; an "-ly" form with adverb senses
    is an adverb; otherwise the tag with the most senses wins, ties broken
    noun > verb > adjective > adverb. Always returns a tag.
    """
    if option_tokens[position] != candidate:
        raise ValueError(
            f"option_tokens[{position}] is {option_tokens[position]!r}, "
            f"expected {candidate!r}")
    prev = option_tokens[position - 1] if position > 0 else None
    prev2 = option_tokens[position - 2] if position > 1 else None
    if prev in _DETERMINERS:
        return PosTag.NOUN
    if prev2 in _DETERMINERS and prev not in _VERB_CUES:
        return PosTag.NOUN
    if prev in _VERB_CUES:
        return PosTag.VERB
    if candidate.endswith("ly") and lookup.sense_count(candidate, PosTag.ADVERB) > 0:
        return PosTag.ADVERB
    best = PosTag.NOUN
    best_count = -1
    for pos in POS_PRIORITY:
        count = lookup.sense_count(candidate, pos)
        if count > best_count:
            best, best_count = pos, count
    return best


def build_definition_text(candidate: str, pos: PosTag, lookup: GlossLookup,
                          max_glosses: int = 3, budget: int = 75) -> str:
    """Join the first senses' glosses with "; ", bounded to ``budget`` tokens.

    Returns the empty string when the candidate has no senses under ``pos``.
    """
    if max_glosses < 1:
        raise ValueError("max_glosses must be at least 1")
    glosses = lookup.glosses_for_form(candidate, pos)[:max_glosses]
    if not glosses:
        return ""
    text = "; ".join(glosses)
    tokens = tokenize(text)
    if len(tokens) > budget:
        text = " ".join(tokens[:budget])
    return text


def enrich_candidate(question: str, candidate: str, lookup: GlossLookup,
                     max_glosses: int = 3, budget: int = 75
                     ) -> tuple[str, str]:
    """Definition text and POS name for one candidate in its question context.

    A candidate whose text yields no word token gets an empty definition and
    the default noun tag.
    """
    from .data import PLACEHOLDER, substitute_placeholder

    cand_tokens = tokenize(candidate)
    if not cand_tokens:
        return "", PosTag.NOUN.name.lower()
    head = cand_tokens[0]
    option_tokens = tokenize(substitute_placeholder(question, candidate))
    prefix_tokens = tokenize(question[:question.index(PLACEHOLDER)])
    position = len(prefix_tokens)
    if position >= len(option_tokens) or option_tokens[position] != head:
        position = option_tokens.index(head)
    pos = infer_pos(head, option_tokens, position, lookup)
    definition = build_definition_text(head, pos, lookup, max_glosses, budget)
    return definition, pos.name.lower()


def enrich_instance(question: str, candidates: list[str], lookup: GlossLookup,
                    max_glosses: int = 3, budget: int = 75
                    ) -> tuple[list[str], list[str]]:
    """Per-candidate definitions and POS names, aligned with the candidates."""
    pairs = [enrich_candidate(question, cand, lookup, max_glosses, budget)
             for cand in candidates]
    return [p[0] for p in pairs], [p[1] for p in pairs]
