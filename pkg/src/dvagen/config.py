"""One json configuration file with named sections, mirroring the component
configs. Unknown sections or keys are errors, not warnings: silently ignored
settings are how training runs drift.

The ``model`` section is kept as validated keyword arguments rather than a
built ModelConfig, because the real vocabulary size is only known once the
vocabulary file exists; ``vocab_size`` in the file acts as the build target
when a vocabulary is trained from scratch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .dva_model import ModelConfig
from .inference_engine import GenerationConfig
from .phrase_sampler import SamplerConfig
from .trainer import TrainConfig

DEFAULT_VOCAB_TARGET = 256


@dataclass(frozen=True)
class PathsConfig:
    corpus: str | None = None
    vocab: str | None = None
    checkpoint: str | None = None
    index: str | None = None
    test: str | None = None


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8417
    session_capacity: int = 256

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise ValueError(f"port {self.port} outside (0, 65536)")
        if self.session_capacity < 1:
            raise ValueError("session_capacity must be >= 1")


@dataclass(frozen=True)
class AppConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    server: ServerConfig = field(default_factory=ServerConfig)

    def model_config(self, vocab_size: int) -> ModelConfig:
        """The backbone configuration for an actual vocabulary size; the
        file's vocab_size is a build target, not a constraint here."""
        args = {k: v for k, v in self.model.items() if k != "vocab_size"}
        return ModelConfig(vocab_size=vocab_size, **args)

    @property
    def vocab_target(self) -> int:
        return int(self.model.get("vocab_size", DEFAULT_VOCAB_TARGET))


_MODEL_KEYS = {f.name for f in fields(ModelConfig)}

_SECTIONS = {
    "paths": (PathsConfig, ()),
    "train": (TrainConfig, ("sampler",)),  # sampler comes from its own section
    "sampler": (SamplerConfig, ()),
    "generation": (GenerationConfig, ()),
    "server": (ServerConfig, ()),
}


def _build_section(where: str, name: str, data: dict, cls, skip=()):
    allowed = {f.name for f in fields(cls)} - set(skip)
    for key in data:
        if key not in allowed:
            raise ValueError(f"{where}: unknown key {key!r} in section {name!r}")
    return cls(**data)


def parse_config(data: dict, where: str = "config") -> AppConfig:
    if not isinstance(data, dict):
        raise ValueError(f"{where}: top level must be a json object")
    known = set(_SECTIONS) | {"model"}
    for section in data:
        if section not in known:
            raise ValueError(f"{where}: unknown section {section!r}")
    model = dict(data.get("model", {}))
    for key in model:
        if key not in _MODEL_KEYS:
            raise ValueError(f"{where}: unknown key {key!r} in section 'model'")
    parts = {
        name: _build_section(where, name, dict(data.get(name, {})), cls, skip)
        for name, (cls, skip) in _SECTIONS.items()
    }
    return AppConfig(model=model, **parts)


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    if not path.exists():
        raise ValueError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: not valid json: {err}") from None
    return parse_config(data, where=str(path))


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare strings may be written unquoted on the command line


def apply_overrides(config: AppConfig, overrides: list[str]) -> AppConfig:
    """Apply ``section.key=value`` command-line overrides on top of the file."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValueError(f"override {item!r} is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        value = _parse_value(raw)
        if section == "model":
            if key not in _MODEL_KEYS:
                raise ValueError(f"override: unknown key {key!r} in section 'model'")
            config = replace(config, model={**config.model, key: value})
            continue
        if section not in _SECTIONS:
            raise ValueError(f"override: unknown section {section!r}")
        cls, skip = _SECTIONS[section]
        if key in skip or key not in {f.name for f in fields(cls)}:
            raise ValueError(f"override: unknown key {key!r} in section {section!r}")
        config = replace(config, **{section: replace(getattr(config, section),
                                                     **{key: value})})
    return config
