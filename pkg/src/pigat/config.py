"""Training configuration and its plain-text file format.

Config files are `key = value` lines, one per key, with `#` comments.
The keys are exactly the TrainConfig field names; anything else is a
data error. Resolved configs are echoed back in the same format with
every default materialized.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .confidence import VARIANTS
from .errors import DataError

ATTENTION_KINDS = ("ffn-1", "ffn-2", "ffn-3", "dot", "scaled-dot")
GRAPH_MODES = ("dynamic", "static")
POOLING_KINDS = ("attention", "average")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    decay_rate: float = 1.0
    decay_every: int = 1
    l2: float = 0.0
    dropout: float = 0.0
    batch_size: int = 256
    epochs: int = 10
    seed: int = 0
    confidence: str = "ce"
    attention: str = "ffn-3"
    graph_mode: str = "dynamic"
    pooling: str = "attention"
    max_neighbors: int = 10
    user_embed_width: int = 16
    item_embed_width: int = 16
    hidden_width: int = 64
    # All four attention heads query with the user profile when set; the
    # default pairs each neighbor sequence with the opposite-side profile.
    user_query_only: bool = False
    # Add confidence vectors to the pooled values too, not only to the
    # attention inputs.
    confidence_in_pooling: bool = True
    # Negative interactions still create edges; drop them from neighbor
    # windows by turning this off.
    include_negative_neighbors: bool = True

    def validate(self) -> "TrainConfig":
        if self.learning_rate <= 0:
            raise DataError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 < self.decay_rate <= 1:
            raise DataError(f"decay_rate must be in (0, 1], got {self.decay_rate}")
        if self.decay_every < 1:
            raise DataError(f"decay_every must be >= 1, got {self.decay_every}")
        if self.l2 < 0:
            raise DataError(f"l2 must be non-negative, got {self.l2}")
        if not 0 <= self.dropout < 1:
            raise DataError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.batch_size < 1 or self.epochs < 1:
            raise DataError("batch_size and epochs must be at least 1")
        if self.max_neighbors < 1:
            raise DataError(f"max_neighbors must be >= 1, got {self.max_neighbors}")
        if min(self.user_embed_width, self.item_embed_width, self.hidden_width) < 1:
            raise DataError("embedding and hidden widths must be positive")
        for value, allowed, what in (
            (self.confidence, VARIANTS, "confidence"),
            (self.attention, ATTENTION_KINDS, "attention"),
            (self.graph_mode, GRAPH_MODES, "graph_mode"),
            (self.pooling, POOLING_KINDS, "pooling"),
        ):
            if value not in allowed:
                raise DataError(f"{what} must be one of {allowed}, got {value!r}")
        return self


def _coerce(name: str, kind: type, text: str) -> object:
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise DataError(f"config key {name} expects {kind.__name__}, got {text!r}") from None


def config_from_pairs(pairs: dict[str, str]) -> TrainConfig:
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    types = {"float": float, "int": int, "str": str, "bool": bool}
    kwargs = {}
    for key, raw in pairs.items():
        if key not in fields:
            raise DataError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, types[fields[key]], raw)
    return TrainConfig(**kwargs).validate()


def parse_kv_lines(path: str) -> dict[str, str]:
    """Read `key = value` lines, ignoring blanks and # comments."""
    pairs: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in pairs:
                raise DataError(f"{path}:{lineno}: duplicate key {key!r}")
            pairs[key] = value.strip()
    return pairs


def read_config(path: str) -> TrainConfig:
    return config_from_pairs(parse_kv_lines(path))


def format_config(cfg: TrainConfig) -> str:
    lines = []
    for f in dataclasses.fields(TrainConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: TrainConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(d: dict) -> TrainConfig:
    names = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(d) - names
    if unknown:
        raise DataError(f"unknown config keys {sorted(unknown)}")
    return TrainConfig(**d).validate()
