"""Command-line surface: train / eval / tag / synth / stats.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Flag values override config-file values; every command logs its fully
resolved configuration and the root seed at startup. Set RELGRID_LOG_LEVEL
(DEBUG/INFO/WARNING/...) to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .corpus import (
    AnnotatedSentence,
    CorpusError,
    RelationVocab,
    Sentence,
    Span,
    Triple,
    corpus_stats,
    load_native,
    load_public,
    save_native,
)
from .encoder import Vocab
from .evaluation import MATCH_MODES, breakdown, export_relation_embeddings
from .synthetic import GenerationError, SynthConfig, default_mix, generate_corpus
from .tagging import encode, render_relation_grid, roundtrip_check
from .trainer import (
    NumericError,
    TrainConfig,
    load_checkpoint,
    predict,
    train,
    write_loss_log,
)

logger = logging.getLogger("relgrid")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

GRID_HELP = (
    "The tag grid is printed per relation as a fixed-width table: rows are "
    "head tokens, columns are tail tokens, each cell shows HB-TB, HB-TE, "
    "HE-TE, or '-' for untagged."
)


class CliParser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--seed", type=int, help="root seed (default 0)")


def build_parser() -> CliParser:
    parser = CliParser(prog="relgrid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a checkpoint")
    p_train.add_argument("--data", help="training corpus path")
    p_train.add_argument("--format", choices=("native", "public"), default=None)
    p_train.add_argument("--relations", help="relation names, one per line")
    p_train.add_argument("--vocab", help="token vocab JSON to reuse")
    p_train.add_argument("--match", choices=MATCH_MODES, help="span resolution for public data maps to whole-span (exact) or last-token (partial)")
    p_train.add_argument("--out", "--checkpoint", dest="out", help="checkpoint output path")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--dropout", type=float)
    p_train.add_argument("--max-len", type=int)
    p_train.add_argument("--emb-dim", type=int)
    p_train.add_argument("--min-count", type=int)
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint against a corpus")
    p_eval.add_argument("--data", help="evaluation corpus path")
    p_eval.add_argument("--format", choices=("native", "public"), default=None)
    p_eval.add_argument("--checkpoint", help="checkpoint path")
    p_eval.add_argument("--relations", help="relation names to cross-check")
    p_eval.add_argument("--vocab", help="token vocab JSON to cross-check")
    p_eval.add_argument("--match", choices=MATCH_MODES, help="report only this mode")
    p_eval.add_argument("--out", help="write the key=value report here")
    p_eval.add_argument(
        "--export-relations",
        help="also dump the relation/tag representation columns to this TSV",
    )
    _add_common(p_eval)

    p_tag = sub.add_parser(
        "tag",
        help="encode one sentence to tag grids, decode back, report roundtrip",
        epilog=GRID_HELP,
    )
    p_tag.add_argument(
        "--sentence",
        help="native-format JSON record; reads standard input when omitted",
    )
    p_tag.add_argument("--relations", help="relation names, one per line")
    _add_common(p_tag)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--out", help="output corpus path")
    p_synth.add_argument("--count", type=int, help="number of sentences")
    p_synth.add_argument(
        "--mix",
        help="pattern proportions, e.g. normal=0.25,epo=0.25,seo=0.25,hto=0.25",
    )
    p_synth.add_argument("--num-relations", type=int)
    p_synth.add_argument("--min-len", type=int)
    p_synth.add_argument("--max-len", type=int)
    _add_common(p_synth)

    p_stats = sub.add_parser("stats", help="print corpus pattern/bucket statistics")
    p_stats.add_argument("--data", help="corpus path")
    p_stats.add_argument("--format", choices=("native", "public"), default=None)
    p_stats.add_argument("--relations", help="relation names (public format)")
    p_stats.add_argument("--match", choices=MATCH_MODES, help="span resolution for public data")
    _add_common(p_stats)

    return parser


class RunConfig:
    """Flag values layered over an optional JSON config file."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file: dict = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.exists():
                raise CorpusError(f"no such config file: {path}")
            self.file = json.loads(path.read_text(encoding="utf-8"))
        self.resolved: dict = {}

    def get(self, key: str, default=None):
        flag = getattr(self.args, key.replace("-", "_"), None)
        value = flag if flag is not None else self.file.get(key, default)
        self.resolved[key] = value
        return value

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            raise CorpusError(f"missing required option --{key}")
        return value

    def log(self, command: str) -> None:
        logger.info("command=%s resolved config: %s", command, json.dumps(self.resolved, sort_keys=True))


def _read_relations(path: str) -> RelationVocab:
    p = Path(path)
    if not p.exists():
        raise CorpusError(f"no such relations file: {p}")
    names = [line.strip() for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]
    return RelationVocab(names=tuple(names))


def _span_mode(match_mode: str | None) -> str:
    # partial-match datasets annotate only the last word of each entity
    return "last-token" if match_mode == "partial" else "whole-span"


def _load_corpus(cfg: RunConfig, max_seq_len: int | None):
    """Shared --data/--format/--relations handling for several commands."""
    data = cfg.require("data")
    fmt = cfg.get("format", "native")
    relations_path = cfg.get("relations")
    if fmt == "public":
        if relations_path is None:
            raise CorpusError("public format requires --relations")
        vocab = _read_relations(relations_path)
        corpus, warnings = load_public(
            data, vocab, match_mode=_span_mode(cfg.get("match")), max_seq_len=max_seq_len
        )
    else:
        vocab = _read_relations(relations_path) if relations_path else None
        corpus, vocab, warnings = load_native(data, vocab, max_seq_len=max_seq_len)
    for w in warnings:
        logger.warning("%s", w)
    return corpus, vocab


def cmd_train(args: argparse.Namespace) -> int:
    cfg = RunConfig(args)
    config = TrainConfig(
        epochs=cfg.get("epochs", 10),
        batch_size=cfg.get("batch-size", 8),
        learning_rate=cfg.get("lr", 1e-5),
        dropout_rate=cfg.get("dropout", 0.1),
        max_seq_len=cfg.get("max-len", 100),
        emb_dim=cfg.get("emb-dim", 64),
        min_count=cfg.get("min-count", 1),
        seed=cfg.get("seed", 0),
    )
    out = cfg.get("out", "checkpoint.npz")
    cfg.log("train")
    logger.info("root seed %d", config.seed)

    corpus, relations = _load_corpus(cfg, config.max_seq_len)
    vocab = None
    vocab_path = cfg.get("vocab")
    if vocab_path:
        vocab = Vocab.from_json(json.loads(Path(vocab_path).read_text(encoding="utf-8")))

    model, log = train(corpus, relations, config, vocab=vocab, checkpoint_path=out)
    write_loss_log(f"{out}.log", log)
    print(f"trained {len(log)} epochs on {len(corpus)} sentences")
    print(f"final loss {log[-1].mean_loss:.6f}")
    print(f"checkpoint: {out}")
    print(f"loss log  : {out}.log")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = RunConfig(args)
    checkpoint = cfg.require("checkpoint")
    cfg.log("eval")
    model = load_checkpoint(checkpoint)

    relations_path = cfg.get("relations")
    if relations_path:
        given = _read_relations(relations_path)
        if given.names != model.relations.names:
            raise CorpusError("relations file does not match checkpoint relations")
    vocab_path = cfg.get("vocab")
    if vocab_path:
        given_vocab = Vocab.from_json(json.loads(Path(vocab_path).read_text(encoding="utf-8")))
        if given_vocab.token_to_index != model.vocab.token_to_index:
            raise CorpusError("vocab file does not match checkpoint vocab")

    # reuse the checkpoint relations when loading
    data = cfg.require("data")
    fmt = cfg.get("format", "native")
    if fmt == "public":
        corpus, warnings = load_public(
            data,
            model.relations,
            match_mode=_span_mode(cfg.get("match")),
            max_seq_len=model.config.max_seq_len,
        )
    else:
        corpus, _, warnings = load_native(
            data, model.relations, max_seq_len=model.config.max_seq_len
        )
    for w in warnings:
        logger.warning("%s", w)

    started = time.perf_counter()
    predictions = [predict(s.sentence, model) for s in corpus]
    elapsed = time.perf_counter() - started

    modes = [cfg.get("match")] if cfg.get("match") else list(MATCH_MODES)
    reports = [breakdown(corpus, predictions, mode) for mode in modes]
    for report in reports:
        print(report.to_text())
    print(
        f"inference wall-clock: {elapsed:.3f}s total, "
        f"{1000.0 * elapsed / max(len(corpus), 1):.2f}ms per sentence"
    )
    kv = "\n".join(report.to_kv() for report in reports)
    out = cfg.get("out")
    if out:
        Path(out).write_text(kv + "\n", encoding="utf-8")
    else:
        print(kv)
    export_path = cfg.get("export-relations")
    if export_path:
        export_relation_embeddings(model.params, model.relations, export_path)
        print(f"relation representations: {export_path}")
    return EXIT_OK


def _parse_tag_record(raw: str, relations: RelationVocab | None):
    try:
        record = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"invalid sentence JSON: {exc}") from exc
    tokens = tuple(str(t) for t in record.get("tokens", []))
    if not tokens:
        raise CorpusError("sentence record has no tokens")
    rel_names: list[str] = list(relations.names) if relations else []
    triples = []
    for raw_triple in record.get("triples", []):
        name = str(raw_triple["relation"])
        if name not in rel_names:
            if relations is not None:
                raise CorpusError(f"unknown relation {name!r}")
            rel_names.append(name)
        triples.append(
            Triple(
                Span(*(int(v) for v in raw_triple["head"])),
                rel_names.index(name),
                Span(*(int(v) for v in raw_triple["tail"])),
            )
        )
    vocab = relations or RelationVocab(names=tuple(rel_names) or ("none",))
    sentence = AnnotatedSentence(
        sentence=Sentence(tokens=tokens, id=str(record.get("id", "stdin"))),
        triples=frozenset(triples),
    )
    return sentence, vocab


def cmd_tag(args: argparse.Namespace) -> int:
    cfg = RunConfig(args)
    raw = cfg.get("sentence")
    cfg.log("tag")
    if raw is None:
        raw = sys.stdin.read()
    relations = _read_relations(cfg.get("relations")) if cfg.get("relations") else None
    sentence, vocab = _parse_tag_record(raw, relations)

    matrix, collisions = encode(sentence, len(vocab))
    for k in matrix.relations_present():
        print(f"relation: {vocab.names[k]}")
        print(render_relation_grid(matrix, k, sentence.sentence.tokens))
        print()
    for c in collisions:
        print(f"collision at {c.cell}: kept {c.kept.name}, dropped {c.dropped.name}")

    result = roundtrip_check(sentence, len(vocab))
    decoded = sorted(result.spurious | (sentence.triples - result.missing))
    print("decoded triples:")
    for t in decoded:
        print(
            f"  ({t.head.begin}..{t.head.end}, {vocab.names[t.relation]}, "
            f"{t.tail.begin}..{t.tail.end})"
        )
    if result.exact and not sentence.triples:
        print("roundtrip: exact (empty)")
    elif result.exact:
        print("roundtrip: exact")
    else:
        print(f"roundtrip: {result}")
        for t in sorted(result.missing):
            print(f"  missing : ({t.head.begin}..{t.head.end}, {vocab.names[t.relation]}, {t.tail.begin}..{t.tail.end})")
        for t in sorted(result.spurious):
            print(f"  spurious: ({t.head.begin}..{t.head.end}, {vocab.names[t.relation]}, {t.tail.begin}..{t.tail.end})")
    return EXIT_OK


def _parse_mix(raw: str) -> dict[str, float]:
    mix = {}
    for part in raw.split(","):
        if not part.strip():
            continue
        try:
            name, value = part.split("=")
            mix[name.strip()] = float(value)
        except ValueError as exc:
            raise CorpusError(f"bad mix entry {part!r}") from exc
    return mix


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = RunConfig(args)
    out = cfg.require("out")
    mix_raw = cfg.get("mix")
    config = SynthConfig(
        sentences=cfg.get("count", 100),
        num_relations=cfg.get("num-relations", 4),
        mix=_parse_mix(mix_raw) if isinstance(mix_raw, str) else (mix_raw or default_mix()),
        min_len=cfg.get("min-len", 6),
        max_len=cfg.get("max-len", 14),
        seed=cfg.get("seed", 0),
    )
    cfg.log("synth")
    logger.info("root seed %d", config.seed)

    corpus, relations, counts = generate_corpus(config)
    save_native(corpus, relations, out)
    print(f"wrote {len(corpus)} sentences to {out}")
    print("intended pattern counts: " + json.dumps(counts, sort_keys=True))
    print(corpus_stats(corpus).to_text())
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = RunConfig(args)
    cfg.log("stats")
    corpus, _ = _load_corpus(cfg, max_seq_len=None)
    if not corpus:
        raise CorpusError("empty corpus")
    print(corpus_stats(corpus).to_text())
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "tag": cmd_tag,
    "synth": cmd_synth,
    "stats": cmd_stats,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("RELGRID_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NumericError as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (CorpusError, GenerationError, FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
