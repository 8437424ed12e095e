"""Command-line entry point wiring data prep, enrichment, training,
evaluation, prediction, ensembling, and the gradient verification suite.

Exit codes: 0 success, 1 usage or configuration error, 2 data or parse
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .classifier import init_model, instance_loss
from .config import (ConfigError, ModelConfig, TrainConfig, validate_configs)
from .data import (DatasetError, Instance, Vocabulary, build_inputs,
                   dataset_stats, load_jsonl)
from .gradcheck import DEFAULT_TOL, check_gradients
from .plots import save_split_stats, save_training_curves
from .training import (TrainingError, evaluate, majority_vote, predict,
                       restore_model, save_checkpoint, train,
                       write_metrics_csv)
from .wordnet import GlossLookup, WordNetFormatError, enrich_instance

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this project reserves 2 for data
    errors, so usage problems are re-raised and mapped to exit 1."""

    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration assembly: dataclass defaults <- INI file <- flags

_CONFIG_SECTIONS = ("data", "wordnet", "model", "train", "output")


def _coerce_like(key: str, raw: str, current):
    raw = raw.strip()
    if key in ("epochs", "max_steps"):
        return None if raw.lower() in ("", "none") else int(raw)
    if key == "seeds":
        return tuple(int(part) for part in raw.split(",") if part.strip())
    if isinstance(current, bool):
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot read {raw!r} as a boolean for {key}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def _apply_section(cfg, section: configparser.SectionProxy, label: str):
    values = dataclasses.asdict(cfg)
    unknown = [key for key in section if key not in values]
    if unknown:
        raise ConfigError(f"unknown keys in [{label}]: {', '.join(sorted(unknown))}")
    updates = {key: _coerce_like(key, section[key], values[key])
               for key in section}
    return dataclasses.replace(cfg, **updates)


def load_cli_config(args) -> tuple[ModelConfig, TrainConfig, dict]:
    """Merge dataclass defaults, the INI file, and flag overrides.

    Returns the model config, the train config, and the extras dict
    (data paths, wordnet options, output options).
    """
    model_cfg = ModelConfig()
    train_cfg = TrainConfig()
    extras = {"wordnet_dir": None, "max_glosses": 3, "gloss_budget": 75,
              "out_dir": None}

    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        unknown_sections = [s for s in parser.sections()
                            if s not in _CONFIG_SECTIONS]
        if unknown_sections:
            raise ConfigError(
                f"unknown config sections: {', '.join(sorted(unknown_sections))}")
        if parser.has_section("model"):
            model_cfg = _apply_section(model_cfg, parser["model"], "model")
        if parser.has_section("train"):
            train_cfg = _apply_section(train_cfg, parser["train"], "train")
        if parser.has_section("data"):
            for key in parser["data"]:
                if key == "max_seq_len":
                    model_cfg = dataclasses.replace(
                        model_cfg, max_seq_len=int(parser["data"][key]))
                elif key == "min_freq":
                    train_cfg = dataclasses.replace(
                        train_cfg, vocab_min_freq=int(parser["data"][key]))
                else:
                    raise ConfigError(f"unknown keys in [data]: {key}")
        if parser.has_section("wordnet"):
            for key in parser["wordnet"]:
                if key == "dir":
                    extras["wordnet_dir"] = parser["wordnet"][key]
                elif key == "max_glosses":
                    extras["max_glosses"] = int(parser["wordnet"][key])
                elif key == "gloss_budget":
                    extras["gloss_budget"] = int(parser["wordnet"][key])
                elif key == "use_definitions":
                    model_cfg = dataclasses.replace(
                        model_cfg, use_definitions=_coerce_like(key,
                        parser["wordnet"][key], True))
                else:
                    raise ConfigError(f"unknown keys in [wordnet]: {key}")
        if parser.has_section("output"):
            for key in parser["output"]:
                if key == "dir":
                    extras["out_dir"] = parser["output"][key]
                else:
                    raise ConfigError(f"unknown keys in [output]: {key}")

    # flags override file values
    if getattr(args, "mode", None):
        model_cfg = dataclasses.replace(model_cfg, mode=args.mode)
    if getattr(args, "max_seq_len", None) is not None:
        model_cfg = dataclasses.replace(model_cfg, max_seq_len=args.max_seq_len)
    if getattr(args, "no_definitions", False):
        model_cfg = dataclasses.replace(model_cfg, use_definitions=False)
    if getattr(args, "seeds", None):
        try:
            seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
        except ValueError as exc:
            raise UsageError(f"--seeds expects integers: {exc}") from exc
        if not seeds:
            raise UsageError("--seeds expects at least one integer")
        train_cfg = dataclasses.replace(train_cfg, seeds=seeds)
    if getattr(args, "seed", None) is not None:
        train_cfg = dataclasses.replace(train_cfg, seeds=(args.seed,))
    if getattr(args, "wordnet_dir", None):
        extras["wordnet_dir"] = args.wordnet_dir
    if getattr(args, "out", None):
        extras["out_dir"] = args.out

    validate_configs(model_cfg, train_cfg)
    return model_cfg, train_cfg, extras


def _resolve_data_path(args, value: str) -> Path:
    path = Path(value)
    data_dir = getattr(args, "data_dir", None)
    if data_dir and not path.is_absolute():
        path = Path(data_dir) / path
    if not path.exists():
        raise DatasetError(f"data file not found: {path}")
    return path


def resolve_wordnet_dir(extras: dict) -> Path:
    """The --wordnet-dir flag, then WORDNET_DIR, then WNHOME; accepts either
    the database directory itself or its parent containing dict/."""
    raw = (extras.get("wordnet_dir") or os.environ.get("WORDNET_DIR")
           or os.environ.get("WNHOME"))
    if not raw:
        raise UsageError("no WordNet location: pass --wordnet-dir or set "
                         "the WORDNET_DIR environment variable")
    root = Path(raw)
    if (root / "index.noun").exists():
        return root
    if (root / "dict" / "index.noun").exists():
        return root / "dict"
    raise WordNetFormatError(f"no index.noun under {root} or {root / 'dict'}")


def _config_meta(command: str, model_cfg: ModelConfig,
                 train_cfg: TrainConfig, **extra) -> dict:
    meta = {"command": command, "model_config": model_cfg.to_dict(),
            "train_config": train_cfg.to_dict()}
    meta.update(extra)
    return meta


def _echo_line(meta: dict) -> str:
    return json.dumps({"_meta": meta}, sort_keys=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_stats(args) -> int:
    model_cfg, train_cfg, extras = load_cli_config(args)
    columns = ["split", "count", "avg_passage_len", "avg_question_len",
               "vocab_size", "answer_vocab_size"]
    rows: dict[str, dict] = {}
    for value in args.files:
        path = _resolve_data_path(args, value)
        stats = dataset_stats(load_jsonl(path)).as_row()
        rows[path.stem] = stats
    lines = [",".join(columns)]
    for name, row in rows.items():
        lines.append(",".join([name] + [str(row[c]) for c in columns[1:]]))
    table = "\n".join(lines)
    print(table)
    if extras["out_dir"]:
        out = Path(extras["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        meta = _config_meta("stats", model_cfg, train_cfg,
                            files=[str(f) for f in args.files])
        csv_path = out / "stats.csv"
        csv_path.write_text(f"# config = {json.dumps(meta, sort_keys=True)}\n"
                            + table + "\n", encoding="utf-8")
        fig_path = save_split_stats(rows, out / "stats.png")
        print(f"wrote {csv_path} and {fig_path}")
    return EXIT_OK


def cmd_enrich(args) -> int:
    model_cfg, train_cfg, extras = load_cli_config(args)
    wn_dir = resolve_wordnet_dir(extras)
    lookup = GlossLookup.load(wn_dir)
    instances = load_jsonl(_resolve_data_path(args, args.data))
    out_path = Path(args.out) if args.out else None
    meta = _config_meta("enrich", model_cfg, train_cfg,
                        wordnet_dir=str(wn_dir),
                        max_glosses=extras["max_glosses"],
                        gloss_budget=extras["gloss_budget"])
    lines = [_echo_line(meta)]
    for inst in instances:
        definitions, pos_tags = enrich_instance(
            inst.question, list(inst.candidates), lookup,
            max_glosses=extras["max_glosses"], budget=extras["gloss_budget"])
        row = {"id": inst.id, "article": inst.passage,
               "question": inst.question, "label": inst.label,
               "definitions": definitions, "pos_tags": pos_tags}
        if inst.label is None:
            del row["label"]
        for i, cand in enumerate(inst.candidates):
            row[f"option_{i}"] = cand
        lines.append(json.dumps(row, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if out_path:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        print(f"wrote {out_path} ({len(instances)} instances)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    model_cfg, train_cfg, extras = load_cli_config(args)
    train_set = load_jsonl(_resolve_data_path(args, args.train))
    dev_set = load_jsonl(_resolve_data_path(args, args.dev))
    out = Path(extras["out_dir"] or "runs")
    out.mkdir(parents=True, exist_ok=True)

    vocab = Vocabulary.build(train_set, min_freq=train_cfg.vocab_min_freq,
                             use_definitions=model_cfg.use_definitions)
    records = []
    final_cfg = None
    for seed in train_cfg.seeds:
        record, params, cfg, _ = train(model_cfg, train_cfg, train_set,
                                       dev_set, seed=seed, vocab=vocab)
        final_cfg = cfg
        ckpt = out / f"model_seed{seed}.npz"
        save_checkpoint(ckpt, record.best_state, cfg, train_cfg, vocab)
        record.checkpoint_path = str(ckpt)
        records.append(record)
        print(f"seed {seed}: best dev accuracy {record.best_dev_accuracy!r} "
              f"at step {record.best_step}; checkpoint {ckpt}")

    write_metrics_csv(out / "metrics.csv", records, final_cfg, train_cfg)
    save_training_curves(records, out / "curves.png")
    best = np.array([r.best_dev_accuracy for r in records])
    print(f"mean best dev accuracy {best.mean():.4f} "
          f"(std {best.std():.4f}) over {len(records)} seed(s)")
    print(f"wrote {out / 'metrics.csv'} and {out / 'curves.png'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    params, model_cfg, _, vocab = restore_model(args.checkpoint)
    instances = load_jsonl(_resolve_data_path(args, args.data))
    accuracy = evaluate(params, model_cfg, instances, vocab)
    print(f"accuracy {accuracy!r}")
    return EXIT_OK


def cmd_predict(args) -> int:
    params, model_cfg, train_cfg, vocab = restore_model(args.checkpoint)
    instances = load_jsonl(_resolve_data_path(args, args.data))
    preds = predict(params, model_cfg, instances, vocab)
    meta = _config_meta("predict", model_cfg, train_cfg,
                        checkpoint=str(args.checkpoint))
    lines = [_echo_line(meta)]
    lines += [json.dumps({"id": inst.id, "prediction": pred}, sort_keys=True)
              for inst, pred in zip(instances, preds)]
    text = "\n".join(lines) + "\n"
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        print(f"wrote {out_path} ({len(preds)} predictions)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _read_predictions(path: Path) -> list[tuple[str, int]]:
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "_meta" in obj:
                continue
            try:
                rows.append((str(obj["id"]), int(obj["prediction"])))
            except KeyError as exc:
                raise DatasetError(f"{path}:{lineno}: missing key {exc}") from exc
    if not rows:
        raise DatasetError(f"{path}: no predictions found")
    return rows


def cmd_ensemble(args) -> int:
    model_cfg, train_cfg, extras = load_cli_config(args)
    per_model = []
    ids = None
    for value in args.predictions:
        path = _resolve_data_path(args, value)
        rows = _read_predictions(path)
        these_ids = [r[0] for r in rows]
        if ids is None:
            ids = these_ids
        elif these_ids != ids:
            raise DatasetError(f"{path}: instance ids disagree with "
                               f"{args.predictions[0]}")
        per_model.append([r[1] for r in rows])
    voted = majority_vote(per_model)
    meta = _config_meta("ensemble", model_cfg, train_cfg,
                        inputs=[str(p) for p in args.predictions])
    lines = [_echo_line(meta)]
    lines += [json.dumps({"id": i, "prediction": p}, sort_keys=True)
              for i, p in zip(ids, voted)]
    text = "\n".join(lines) + "\n"
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        print(f"wrote {out_path} ({len(voted)} predictions)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _gradcheck_instance() -> Instance:
    words = ["ridge", "hollow", "basket", "ember", "willow",
             "cinder", "marsh", "pebble", "thistle", "grove"]
    return Instance(
        id="gradcheck-0",
        passage=" ".join(words) + " .",
        question="the @placeholder sits here .",
        candidates=words[:5],
        label=2,
        definitions=["a long narrow elevation", "a small sheltered valley",
                     "a woven container", "a glowing fragment",
                     "a tree of wet ground"],
    )


def cmd_gradcheck(args) -> int:
    model_cfg, train_cfg, extras = load_cli_config(args)
    inst = _gradcheck_instance()
    vocab = Vocabulary.build([inst], use_definitions=model_cfg.use_definitions)
    cfg = dataclasses.replace(model_cfg, vocab_size=len(vocab),
                              max_seq_len=min(model_cfg.max_seq_len, 32))
    inputs = build_inputs(inst, vocab, cfg.max_seq_len,
                          use_definitions=cfg.use_definitions)
    seed = train_cfg.seeds[0] if train_cfg.seeds else 0
    rng = np.random.default_rng(seed)
    params = init_model(rng, cfg)
    named = params.named_parameters()

    def loss_fn():
        return instance_loss(inputs, inst.label, params, cfg,
                             rng=None, training=False)[0]

    report = check_gradients(loss_fn, named, coords_per_tensor=4,
                             rng=np.random.default_rng(seed + 1))
    print(f"gradcheck ({cfg.mode} mode, d_model={cfg.d_model}): "
          f"{report.summary()}")
    if not report.passed(DEFAULT_TOL):
        print(f"FAIL: max relative error {report.max_rel_error:.3e} "
              f"exceeds {DEFAULT_TOL:.0e}", file=sys.stderr)
        return EXIT_NUMERICAL
    print("PASS")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> _Parser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="INI configuration file")
    shared.add_argument("--data-dir", help="base directory for relative data paths")
    shared.add_argument("--wordnet-dir", help="WordNet database directory")
    shared.add_argument("--mode", choices=("stacked", "parallel"),
                        help="co-attention wiring")
    shared.add_argument("--no-definitions", action="store_true",
                        help="drop definition text from the option segment")
    shared.add_argument("--seed", type=int, help="single training seed")
    shared.add_argument("--seeds", help="comma-separated training seeds")
    shared.add_argument("--max-seq-len", type=int, default=None,
                        help="sequence length budget (default 150)")
    shared.add_argument("--out", help="output directory or file")

    parser = _Parser(prog="glossreader",
                     description="Gloss-enriched multiple-choice reading "
                                 "comprehension at desk scale.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[shared],
                       help="per-split dataset statistics")
    p.add_argument("files", nargs="+", help="JSONL data files")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("enrich", parents=[shared],
                       help="attach per-candidate definitions and POS tags")
    p.add_argument("data", help="JSONL data file")
    p.set_defaults(func=cmd_enrich)

    p = sub.add_parser("train", parents=[shared],
                       help="train one model per seed")
    p.add_argument("--train", required=True, dest="train",
                   help="training JSONL file")
    p.add_argument("--dev", required=True, help="development JSONL file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[shared],
                       help="accuracy of a checkpoint on a labeled file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[shared],
                       help="write per-instance predicted option indices")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ensemble", parents=[shared],
                       help="majority-vote over prediction files")
    p.add_argument("predictions", nargs="+", help="prediction JSONL files")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("gradcheck", parents=[shared],
                       help="finite-difference gradient verification")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, WordNetFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
