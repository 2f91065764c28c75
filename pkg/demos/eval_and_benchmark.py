"""Score generations and measure batch scaling.

First half: a metrics report over one generation session (repetition,
diversity, perplexity on held-out text, compression, ROUGE-L against
references). Second half: forced-length throughput across batch sizes for
a phrase-augmented pipeline next to a token-only baseline, rendered as
SVG charts.
"""

import tempfile
from pathlib import Path

from dvagen import (
    DocumentSet,
    DVAModel,
    GenerationConfig,
    GenerationSetup,
    ModelConfig,
    SamplerConfig,
    benchmark_throughput,
    build_corpus_index,
    build_index,
    build_report,
    generate_batch,
    profile_inference,
    train_static_vocab,
)
from dvagen.eval_bench import stage_chart_svg, throughput_chart_svg

TRAIN = [
    "the cat sat on the mat",
    "the dog slept by the door",
    "a bird sang in the tree at dawn",
    "the cat and the dog ran to the tree",
    "rain fell on the roof all night",
    "the bird flew over the mat and the door",
]
HELD_OUT = ["the dog sat by the tree", "a cat slept on the roof"]

corpus = DocumentSet.from_texts(TRAIN)
vocab = train_static_vocab(corpus, target_size=64)
model = DVAModel(
    ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1, n_heads=2,
                pe_layers=1, pe_heads=2, max_seq_len=96, pe_max_seq_len=8),
    vocab, seed=11,
)
index = build_index(corpus, model)
corpus_index = build_corpus_index(corpus, vocab)
sampler = SamplerConfig(strategy="nword", n=2, max_phrases=8)

# --- metrics over one session --------------------------------------------
prefixes = ["the cat", "the dog"]
session = generate_batch(
    prefixes, model,
    GenerationConfig(strategy="sample", temperature=0.9, seed=7,
                     min_new_ids=4, max_new_ids=12, k_docs=3, candidate_cap=8),
    sampler, index=index, corpus=corpus, corpus_index=corpus_index,
)
report = build_report(model, HELD_OUT, session, references=TRAIN[:2])
print(report.to_table())
print()
print("MAUVE stays n/a on purpose:", report.mauve_note)
print()

# --- throughput and stage profile -----------------------------------------
dva = GenerationSetup(model=model, sampler=sampler, index=index,
                      corpus=corpus, corpus_index=corpus_index)
baseline = GenerationSetup(model=model)  # no retrieval: token-only

forced = GenerationConfig(strategy="greedy", min_new_ids=16, max_new_ids=16,
                          k_docs=3, candidate_cap=8)
rows = benchmark_throughput({"dva": dva, "token-only": baseline},
                            prefixes, [1, 2, 4], forced, repeats=3)
print(f"{'batch':>5}  {'dva ids/s':>10}  {'baseline ids/s':>14}")
for a, b in zip(rows["dva"], rows["token-only"]):
    print(f"{a.batch_size:>5}  {a.ids_per_second:>10.1f}  {b.ids_per_second:>14.1f}")

profile = profile_inference(dva, prefixes, [1, 2, 4], forced, repeats=3)
print(f"\n{'batch':>5}  {'retrieval':>9}  {'sampling':>8}  {'generation':>10}")
for row in profile:
    f = row.stage_fractions
    print(f"{row.batch_size:>5}  {f['retrieval']:>9.3f}  {f['sampling']:>8.3f}"
          f"  {f['generation']:>10.3f}")

workdir = Path(tempfile.mkdtemp())
(workdir / "throughput.svg").write_text(throughput_chart_svg(rows))
(workdir / "stages.svg").write_text(stage_chart_svg(profile))
print("\ncharts:", workdir / "throughput.svg", workdir / "stages.svg")
