"""Shared fixtures: a mini WordNet distribution in authentic 3.0 file format,
synthetic datasets, and the acceptance-criteria reporting hook."""

import json
import random
from pathlib import Path

import numpy as np
import pytest

# ---------------------------------------------------------------------------
# mini WordNet distribution
#
# Rendered in the real flat-file grammar: license headers indented by two
# spaces, data-line offsets equal to the byte position of the line inside the
# file, w_cnt in hex, pointer blocks present but unresolved.

_HEADER = (
    "  1 This database fixture follows the WordNet 3.0 flat-file grammar.\n"
    "  2 Header lines are indented with two spaces and must be skipped.\n"
)

# per pos: list of (key, lexfile, ss_type, [(word, lex_id)...], ptr_block, gloss)
_SYNSETS = {
    "noun": [
        ("bank.shore", "17", "n", [("bank", 0)], "002 @ 00000011 n 0000 ~ 00000022 n 0000",
         'sloping land (especially the slope beside a body of water); '
         '"they pulled the canoe up on the bank"; '
         '"he sat on the bank of the river and watched the currents"'),
        ("bank.inst", "14", "n", [("depository_financial_institution", 0), ("bank", 1)],
         "001 @ 00000033 n 0000",
         'a financial institution that accepts deposits and channels the '
         'money into lending activities; "he cashed a check at the bank"'),
        ("bank.ridge", "17", "n", [("bank", 2)], "000",
         "a long ridge or pile of earth or similar material"),
        ("collapse.n", "26", "n", [("collapse", 0), ("prostration", 0)], "000",
         'an abrupt failure of function or health; "the market collapse left '
         'investors with nothing"'),
        ("child.n", "18", "n", [("child", 0), ("kid", 0)], "000",
         'a young person of either sex; "she writes books for children"'),
        ("run.n", "00", "n", [("run", 0)], "000",
         "a score in baseball made by a runner touching all four bases safely"),
        ("good.n", "07", "n", [("good", 0)], "000",
         "benefit or advantage"),
    ],
    "verb": [
        ("run.v1", "38", "v", [("run", 0)], "001 @ 00000044 v 0000",
         'move fast by using one\'s feet, with one foot off the ground at any '
         'given time; "do not run, walk"'),
        ("run.v2", "41", "v", [("run", 1), ("operate", 0)], "000",
         'direct or control a project or a business; "she runs the whole company"'),
        ("collapse.v", "29", "v", [("collapse", 0), ("fall_in", 0)], "000",
         'break down, literally or metaphorically; "the bridge collapsed"'),
        ("bank.v", "40", "v", [("bank", 0)], "000",
         "do business with a financial institution"),
    ],
    "adj": [
        ("quick.a", "00", "a", [("quick", 0), ("speedy", 0)], "000",
         'accomplished rapidly and without delay; "a quick response"'),
        ("abstract.a", "00", "a", [("abstract", 0)], "000",
         "existing only in the mind; separated from embodiment"),
        ("good.a", "00", "a", [("good", 0)], "000",
         'having desirable or positive qualities; "a good report card"'),
        ("swift.s", "00", "s", [("swift", 0)], "000",
         "moving very fast"),
    ],
    "adv": [
        ("quickly.r", "02", "r", [("quickly", 0), ("rapidly", 0)], "000",
         'with rapid movements; "he works quickly"'),
        ("well.r", "02", "r", [("well", 0)], "000",
         "in a good or proper or satisfactory manner"),
    ],
}

# lemma -> (ptr_symbols, tagsense_cnt, [synset keys in sense order])
_INDEX = {
    "noun": {
        "bank": (["@", "~", "#p"], 2, ["bank.shore", "bank.inst", "bank.ridge"]),
        "collapse": (["@"], 1, ["collapse.n"]),
        "child": (["@", "~"], 1, ["child.n"]),
        "run": (["@"], 1, ["run.n"]),
        "good": (["@"], 0, ["good.n"]),
        "depository_financial_institution": (["@"], 0, ["bank.inst"]),
        "prostration": (["@"], 0, ["collapse.n"]),
        "kid": (["@"], 0, ["child.n"]),
    },
    "verb": {
        "run": (["@", "*"], 2, ["run.v1", "run.v2"]),
        "collapse": (["@"], 1, ["collapse.v"]),
        "bank": (["@"], 0, ["bank.v"]),
        "operate": (["@"], 0, ["run.v2"]),
        "fall_in": (["@"], 0, ["collapse.v"]),
    },
    "adj": {
        "quick": (["&"], 1, ["quick.a"]),
        "speedy": (["&"], 0, ["quick.a"]),
        "abstract": (["&"], 1, ["abstract.a"]),
        "good": (["&"], 1, ["good.a"]),
        "swift": (["&"], 0, ["swift.s"]),
    },
    "adv": {
        "quickly": ([], 1, ["quickly.r"]),
        "rapidly": ([], 0, ["quickly.r"]),
        "well": ([], 1, ["well.r"]),
    },
}

_EXCEPTIONS = {
    "noun": ["children child"],
    "verb": ["ran run", "running run"],
    "adj": ["better good"],
    "adv": ["best well"],
}

_POS_KEY = {"noun": "n", "verb": "v", "adj": "a", "adv": "r"}


def write_wordnet_fixture(root: Path) -> Path:
    """Render the mini distribution; returns the directory holding the files."""
    root.mkdir(parents=True, exist_ok=True)
    for suffix, synsets in _SYNSETS.items():
        # first render data lines with placeholder offsets, then patch in the
        # real byte positions (fixed 8-digit width keeps lengths stable)
        rendered = []
        for key, lexfile, ss_type, words, ptrs, gloss in synsets:
            w_cnt = format(len(words), "02x")
            word_part = " ".join(f"{w} {lex_id:x}" for w, lex_id in words)
            rendered.append(
                f"00000000 {lexfile} {ss_type} {w_cnt} {word_part} {ptrs} | {gloss}\n")
        offsets = {}
        pos = len(_HEADER.encode("utf-8"))
        for (key, *_), line in zip(synsets, rendered):
            offsets[key] = pos
            pos += len(line.encode("utf-8"))
        data_lines = [
            f"{offsets[key]:08d}" + line[8:]
            for (key, *_), line in zip(synsets, rendered)
        ]
        (root / f"data.{suffix}").write_text(_HEADER + "".join(data_lines),
                                             encoding="utf-8")

        index_lines = []
        for lemma in sorted(_INDEX[suffix]):
            syms, tagsense, keys = _INDEX[suffix][lemma]
            cnt = len(keys)
            sym_part = (" " + " ".join(syms)) if syms else ""
            off_part = " ".join(f"{offsets[k]:08d}" for k in keys)
            index_lines.append(
                f"{lemma} {_POS_KEY[suffix]} {cnt} {len(syms)}{sym_part} "
                f"{cnt} {tagsense} {off_part}\n")
        (root / f"index.{suffix}").write_text(_HEADER + "".join(index_lines),
                                              encoding="utf-8")
        (root / f"{suffix}.exc").write_text(
            "".join(line + "\n" for line in _EXCEPTIONS[suffix]), encoding="utf-8")
    return root


def gloss_by_byte_seek(data_path: Path, offset: int) -> str:
    """Independent oracle: read the synset line by raw byte offset and return
    the definition part of its gloss (text before the first '; "')."""
    with data_path.open("rb") as fh:
        fh.seek(offset)
        line = fh.readline().decode("utf-8")
    gloss = line.split("|", 1)[1].strip()
    cut = gloss.find('; "')
    return gloss[:cut].strip() if cut >= 0 else gloss


@pytest.fixture(scope="session")
def wordnet_dir(tmp_path_factory) -> Path:
    return write_wordnet_fixture(tmp_path_factory.mktemp("wn") / "dict")


@pytest.fixture(scope="session")
def gloss_lookup(wordnet_dir):
    from glossreader.wordnet import GlossLookup

    return GlossLookup.load(wordnet_dir)


# ---------------------------------------------------------------------------
# synthetic datasets

_SYLLABLES = ["ba", "ko", "mi", "ra", "tu", "ve", "zo", "li", "na", "pe"]


def _word_pool(count: int, seed: int) -> list[str]:
    rng = random.Random(seed)
    pool: list[str] = []
    seen = set()
    while len(pool) < count:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        if word not in seen:
            seen.add(word)
            pool.append(word)
    return pool


def make_copy_task(n_instances: int, seed: int = 0) -> list[dict]:
    """Membership task: the gold candidate's word occurs in the passage and
    the four distractors never do. Solvable purely by passage-option matching."""
    rng = random.Random(seed)
    candidates_pool = _word_pool(25, seed=seed * 2 + 1)
    filler_pool = _word_pool(30, seed=seed * 2 + 100)
    filler_pool = [w for w in filler_pool if w not in set(candidates_pool)]
    rows = []
    for i in range(n_instances):
        options = rng.sample(candidates_pool, 5)
        label = rng.randrange(5)
        fillers = rng.choices(filler_pool, k=rng.randint(9, 12))
        gold_pos = rng.randrange(len(fillers) + 1)
        passage_words = fillers[:gold_pos] + [options[label]] + fillers[gold_pos:]
        row = {
            "id": f"copy-{i}",
            "article": " ".join(passage_words) + ".",
            "question": "the word @placeholder appears above .",
            "label": label,
        }
        for j, opt in enumerate(options):
            row[f"option_{j}"] = opt
        rows.append(row)
    return rows


def instances_from_rows(rows: list[dict]):
    from glossreader.data import Instance

    return [Instance(id=str(row["id"]), passage=row["article"],
                     question=row["question"],
                     candidates=[row[f"option_{i}"] for i in range(5)],
                     label=row.get("label"))
            for row in rows]


def make_copy_instances(n_instances: int, seed: int = 0):
    """make_copy_task rows converted to data-layer instances."""
    return instances_from_rows(make_copy_task(n_instances, seed))


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


@pytest.fixture()
def copy_task_files(tmp_path):
    rows = make_copy_task(64, seed=7)
    train = write_jsonl(tmp_path / "train.jsonl", rows)
    dev = write_jsonl(tmp_path / "dev.jsonl", make_copy_task(16, seed=8))
    return train, dev


def desk_model_config(**overrides):
    from glossreader.config import ModelConfig

    base = dict(d_model=32, n_blocks=1, n_heads_enc=2, ffn_dim=64,
                coattn_heads=2, d_qk=8, d_v=8, k=1, mode="stacked",
                max_seq_len=24, vocab_size=0)
    base.update(overrides)
    return ModelConfig(**base)


# ---------------------------------------------------------------------------
# acceptance reporting: one pass/fail line per criterion at session end

_ACCEPTANCE_RESULTS: list[tuple[str, str, bool]] = []


def record_criterion(number: int, description: str, passed: bool) -> None:
    _ACCEPTANCE_RESULTS.append((f"criterion {number}", description, passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, description, passed in sorted(_ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {description}")
