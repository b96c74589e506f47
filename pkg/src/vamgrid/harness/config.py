"""Run configuration: nested dataclasses, JSON files, dotted-key overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..agent import ConfigError, ModelConfig
from ..env.generate import EnvConfig
from ..env.language import load_vocabulary


@dataclass
class DataConfig:
    train: int = 200
    valid_seen: int = 50
    valid_unseen: int = 50
    test_seen: int = 50
    test_unseen: int = 50
    data_seed: int = 0

    def count(self, split: str) -> int:
        return getattr(self, split)


@dataclass
class OptimConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    eps: float = 1e-8
    schedule: str = "cosine"  # or "constant"


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=lambda: ModelConfig(vocab_size=len(load_vocabulary())))
    optim: OptimConfig = field(default_factory=OptimConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    failure_budget: int = 10
    step_limit_mult: int = 2
    step_limit_add: int = 20
    gap_seeds: int = 5
    subgoal_eval: bool = True

    def validate(self) -> "RunConfig":
        for name in ("train", "valid_seen", "valid_unseen", "test_seen", "test_unseen"):
            if self.data.count(name) <= 0:
                raise ConfigError(f"data.{name} must be positive")
        for name in ("epochs", "batch_size", "failure_budget", "step_limit_mult", "gap_seeds"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.step_limit_add < 0:
            raise ConfigError("step_limit_add must be nonnegative")
        if self.optim.lr <= 0:
            raise ConfigError("optim.lr must be positive")
        if self.optim.schedule not in ("constant", "cosine"):
            raise ConfigError("optim.schedule must be 'constant' or 'cosine'")
        if self.model.vocab_size != len(load_vocabulary()):
            raise ConfigError("model.vocab_size must equal the vocabulary size")
        self.model.validate()
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _build(cls, values: dict, path: str = ""):
    """Instantiate a (nested) dataclass from a dict, rejecting unknown keys."""
    known = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in values.items():
        where = f"{path}{key}"
        if key not in known:
            raise ConfigError(f"unknown config key {where!r}")
        current = getattr(defaults, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            kwargs[key] = _build(type(current), {**dataclasses.asdict(current), **value}, where + ".")
        else:
            kwargs[key] = _coerce(value, current, where)
    return dataclasses.replace(defaults, **kwargs)


def _coerce(value, current, where):
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"config key {where!r} expects true/false, got {value!r}")
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {where!r} expects an integer, got {value!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {where!r} expects a number, got {value!r}")
        return float(value)
    if isinstance(current, tuple):
        return tuple(value)
    return value


def parse_override(item: str) -> tuple[list[str], object]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    doc = json.loads(json.dumps(doc))
    for item in overrides:
        keys, value = parse_override(item)
        node = doc
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a non-object")
        node[keys[-1]] = value
    return doc


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    doc: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file {path} not found")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    doc = apply_overrides(doc, overrides or [])
    return _build(RunConfig, doc).validate()


def config_from_dict(doc: dict) -> RunConfig:
    return _build(RunConfig, doc).validate()
