"""
The command-line pipeline, scripted
===================================

train -> eval -> chat without a terminal: the same entry points the
`dvagen` executable dispatches to, driven from Python against a throwaway
workspace. Everything an operator would do with three shell commands.
"""

import io
import json
import tempfile
from pathlib import Path

from dvagen.cli import cmd_chat, main
from dvagen.config import load_config

workdir = Path(tempfile.mkdtemp())
(workdir / "corpus.txt").write_text("\n".join([
    "the cat sat on the mat",
    "the dog slept by the door",
    "a bird sang in the tree at dawn",
    "the cat and the dog ran to the tree",
    "rain fell on the roof all night",
    "the bird flew over the mat and the door",
    "a dog and a bird sat by the roof",
    "the rain fell and the cat slept",
]))
(workdir / "test.txt").write_text("\n".join([
    "the dog sat by the tree",
    "a cat slept on the roof",
]))

config_path = workdir / "config.json"
config_path.write_text(json.dumps({
    "paths": {
        "corpus": str(workdir / "corpus.txt"),
        "test": str(workdir / "test.txt"),
        "vocab": str(workdir / "vocab.txt"),
        "checkpoint": str(workdir / "model.ckpt"),
        "index": str(workdir / "docs.index"),
    },
    "model": {"vocab_size": 64, "d_model": 16, "n_layers": 1, "n_heads": 2,
              "pe_layers": 1, "pe_heads": 2, "max_seq_len": 48,
              "pe_max_seq_len": 8},
    "train": {"steps": 15, "batch_size": 4, "mode": "frozen_backbone",
              "seed": 3},
    "sampler": {"strategy": "nword", "n": 2, "max_phrases": 8},
    "generation": {"strategy": "greedy", "min_new_ids": 2, "max_new_ids": 6,
                   "k_docs": 3, "candidate_cap": 8},
}, indent=2))

print(">> dvagen train --config config.json")
code = main(["train", "--config", str(config_path)])
assert code == 0
print("artifacts:", sorted(p.name for p in workdir.iterdir() if p.suffix != ".json"))

# overrides take section.key=value form, same grammar as the shell
print("\n>> dvagen eval --config config.json generation.seed=9")
code = main(["eval", "--config", str(config_path), "generation.seed=9"])
assert code == 0

# chat reads lines from stdin; /phrases pins candidates, /quit leaves
print("\n>> dvagen chat --config config.json  (scripted)")
script = io.StringIO(
    "/phrases on the mat ; by the door\n"
    "the cat\n"
    "/quit\n"
)
transcript = io.StringIO()
code = cmd_chat(load_config(config_path), stdin=script, stdout=transcript)
assert code == 0
print(transcript.getvalue().rstrip())
