"""Command-line entry points: train, eval, chat, serve.

Each command takes --config <json file> plus optional section.key=value
overrides. Failures print one `error: ...` line to stderr and exit nonzero;
tracebacks are for bugs, not for bad paths or bad configs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import AppConfig, apply_overrides, load_config
from .dva_model import DVAModel, load_checkpoint, save_checkpoint
from .eval_bench import (
    GenerationSetup,
    benchmark_throughput,
    build_report,
    profile_inference,
    stage_chart_svg,
    throughput_chart_svg,
)
from .inference_engine import (
    GenerationConfig,
    generate_batch,
    generate_single,
    session_segments,
)
from .phrase_sampler import build_corpus_index
from .retriever import build_index, load_index, save_index
from .text_base import (
    CorpusError,
    load_corpus,
    load_vocab,
    save_vocab,
    train_static_vocab,
)
from .trainer import Trainer, TrainingError

BENCH_BATCH_SIZES = [1, 2, 4, 8]


def _require_path(value: str | None, what: str) -> Path:
    if value is None:
        raise ValueError(f"config has no {what} path")
    path = Path(value)
    if not path.exists():
        raise ValueError(f"{what} file not found: {path}")
    return path


def _load_model(config: AppConfig) -> DVAModel:
    vocab = load_vocab(_require_path(config.paths.vocab, "vocab"))
    return load_checkpoint(_require_path(config.paths.checkpoint, "checkpoint"), vocab)


def _retrieval(config: AppConfig, model: DVAModel):
    """(index, corpus) when an index path is configured, else (None, None)."""
    if config.paths.index is None:
        return None, None
    index = load_index(_require_path(config.paths.index, "index"))
    corpus = load_corpus(_require_path(config.paths.corpus, "corpus"))
    return index, corpus


def _corpus_index_if_needed(config: AppConfig, corpus, vocab):
    if config.sampler.strategy == "fmm" and corpus is not None:
        return build_corpus_index(corpus, vocab)
    return None


def cmd_train(config: AppConfig) -> int:
    corpus = load_corpus(_require_path(config.paths.corpus, "corpus"))
    if config.paths.vocab is None:
        raise ValueError("config has no vocab path")
    vocab_path = Path(config.paths.vocab)
    if vocab_path.exists():
        vocab = load_vocab(vocab_path)
    else:
        vocab = train_static_vocab(corpus, config.vocab_target)
        save_vocab(vocab, vocab_path)
    if config.paths.checkpoint is None:
        raise ValueError("config has no checkpoint path")

    train_config = replace(config.train, sampler=config.sampler)
    model = DVAModel(config.model_config(vocab.size), vocab, seed=train_config.seed)
    corpus_index = _corpus_index_if_needed(config, corpus, vocab)
    log_path = Path(str(config.paths.checkpoint) + ".losses.jsonl")
    with open(log_path, "w", encoding="utf-8") as log_stream:
        trainer = Trainer(model, train_config, index=corpus_index,
                          log_stream=log_stream)
        losses = trainer.run(list(corpus.texts))
    save_checkpoint(model, config.paths.checkpoint)
    if config.paths.index is not None:
        save_index(build_index(corpus, model), config.paths.index)
    print(json.dumps({
        "steps": len(losses),
        "final_loss": losses[-1] if losses else None,
        "checkpoint": str(config.paths.checkpoint),
        "loss_log": str(log_path),
    }))
    return 0


def _eval_prefixes(texts: list[str], model: DVAModel,
                   generation: GenerationConfig) -> list[str]:
    """First half of each text, truncated so prefix + budget fits the window."""
    prefixes = []
    room = model.config.max_seq_len - generation.max_new_ids - 1
    for text in texts:
        words = text.split()
        take = max(1, min(len(words) // 2, room))
        prefixes.append(" ".join(words[:take]))
    return prefixes


def cmd_eval(config: AppConfig, benchmark: bool = False) -> int:
    model = _load_model(config)
    texts = list(load_corpus(_require_path(config.paths.test, "test")).texts)
    index, corpus = _retrieval(config, model)
    corpus_index = _corpus_index_if_needed(config, corpus, model.vocab)
    prefixes = _eval_prefixes(texts, model, config.generation)

    session = generate_batch(prefixes, model, config.generation, config.sampler,
                             index=index, corpus=corpus, corpus_index=corpus_index)
    report = build_report(model, texts, session, references=texts)
    print(report.to_table())

    if benchmark:
        setup = GenerationSetup(model, config.sampler, index=index,
                                corpus=corpus, corpus_index=corpus_index)
        forced = replace(config.generation,
                         min_new_ids=config.generation.max_new_ids)
        rows = profile_inference(setup, prefixes, BENCH_BATCH_SIZES, forced)
        print()
        print(f"{'batch':>6}  {'ids/s':>10}  {'bytes/s':>10}  "
              f"{'retrieval':>9}  {'sampling':>8}  {'generation':>10}")
        for row in rows:
            f = row.stage_fractions
            print(f"{row.batch_size:>6}  {row.ids_per_second:>10.1f}  "
                  f"{row.bytes_per_second:>10.1f}  {f['retrieval']:>9.3f}  "
                  f"{f['sampling']:>8.3f}  {f['generation']:>10.3f}")
        out_dir = Path(config.paths.checkpoint).parent if config.paths.checkpoint else Path(".")
        bars = throughput_chart_svg({"model": rows})
        stages = stage_chart_svg(rows)
        (out_dir / "throughput.svg").write_text(bars, encoding="utf-8")
        (out_dir / "stages.svg").write_text(stages, encoding="utf-8")
        print(f"charts: {out_dir / 'throughput.svg'}, {out_dir / 'stages.svg'}")

    print(report.to_json())
    return 0


def _render_chat(session, vocab) -> str:
    """Phrase segments in [brackets], tokens bare."""
    parts = []
    for seg in session_segments(session, 0, vocab):
        parts.append(f"[{seg.surface}]" if seg.kind == "phrase" else seg.surface)
    return " ".join(parts)


def cmd_chat(config: AppConfig, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    model = _load_model(config)
    index, corpus = _retrieval(config, model)
    corpus_index = _corpus_index_if_needed(config, corpus, model.vocab)
    phrases: list[str] = []

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            return 0
        if line.startswith("/phrases"):
            phrases = [p.strip() for p in line[len("/phrases"):].split(";") if p.strip()]
            print(f"phrases: {phrases if phrases else 'cleared'}", file=stdout)
            continue
        try:
            session = generate_single(
                line, model, config.generation, config.sampler,
                explicit_phrases=phrases or None,
                index=index, corpus=corpus, corpus_index=corpus_index,
            )
        except (ValueError, CorpusError) as err:
            print(f"error: {err}", file=stdout)
            continue
        print(_render_chat(session, model.vocab), file=stdout)
    return 0


def cmd_serve(config: AppConfig) -> int:
    import uvicorn

    from .service import ServiceContext, create_app

    model = _load_model(config)
    index, corpus = _retrieval(config, model)
    ctx = ServiceContext(
        model=model, sampler=config.sampler, generation=config.generation,
        index=index, corpus=corpus,
        corpus_index=_corpus_index_if_needed(config, corpus, model.vocab),
        session_capacity=config.server.session_capacity,
    )
    uvicorn.run(create_app(ctx), host=config.server.host,
                port=config.server.port, log_level="warning")
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvagen",
        description="dynamic-vocabulary generation: train, eval, chat, serve",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "train a model and write a checkpoint"),
        ("eval", "score a checkpoint on a test file"),
        ("chat", "interactive generation on stdin/stdout"),
        ("serve", "run the HTTP API"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="json config file")
        p.add_argument("overrides", nargs="*", metavar="section.key=value",
                       help="override config file values")
        if name == "eval":
            p.add_argument("--benchmark", action="store_true",
                           help="add throughput and stage-profiling tables")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = apply_overrides(load_config(args.config), args.overrides)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "eval":
            return cmd_eval(config, benchmark=args.benchmark)
        if args.command == "chat":
            return cmd_chat(config)
        return cmd_serve(config)
    except (ValueError, CorpusError, TrainingError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
