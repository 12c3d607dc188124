"""Training configuration and the flat ``key = value`` file format.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Unknown keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError, SchemaError
from .model import VARIANTS

# searchable values used by grid mode
LR_GRID = (1e-3, 5e-3, 1e-2, 5e-2, 0.1)
WEIGHT_DECAY_GRID = (0.0, 5e-5, 1e-4, 5e-4, 1e-3)
DROPOUT_GRID = tuple(round(0.1 * i, 1) for i in range(10))
K_GRID = (1, 2)
T_GRID = (0.3, 0.4, 0.5, 0.6, 0.7)
SELF_LOOP_GRID = (True, False)

NC_LABEL_SOURCES = ("pseudo_all", "truth_train_pseudo_rest")


@dataclass
class TrainConfig:
    lr: float = 0.01
    weight_decay: float = 5e-4
    dropout_low: float = 0.5
    dropout_high: float = 0.5
    dropout_raw: float = 0.0
    hidden: int = 64
    k: int = 1
    T: float = 0.5
    add_self_loop: bool = True
    max_epochs: int = 500
    patience: int = 100
    seed: int = 0
    variant: str = "full"
    reduction: str = "mean"
    nc_label_source: str = "pseudo_all"
    mask_output: bool = True

    def validate(self) -> TrainConfig:
        if not 0.0 < self.T < 1.0:
            raise ConfigError(f"T={self.T} is invalid: threshold must lie in the open interval (0, 1)")
        if self.k not in (1, 2):
            raise ConfigError(f"k={self.k} is invalid: hop count must be 1 or 2")
        for name in ("dropout_low", "dropout_high", "dropout_raw"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name}={v} is invalid: dropout must lie in [0, 1)")
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigError("lr and weight_decay must be non-negative")
        if self.hidden < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigError("hidden, max_epochs and patience must be positive")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant={self.variant!r} is invalid: expected one of {VARIANTS}")
        if self.reduction not in ("mean", "sum"):
            raise ConfigError(f"reduction={self.reduction!r} is invalid: expected mean or sum")
        if self.nc_label_source not in NC_LABEL_SOURCES:
            raise ConfigError(f"nc_label_source={self.nc_label_source!r} is invalid: "
                              f"expected one of {NC_LABEL_SOURCES}")
        return self

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def _coerce(raw: str, typ, key: str):
    if typ is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") from None


def parse_flat(text: str, target: type, source: str = "<config>"):
    """Parse ``key = value`` lines into the dataclass ``target`` (defaults fill gaps)."""
    hints = typing.get_type_hints(target)
    values = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"{source} line {ln}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in hints:
            raise SchemaError(f"{source} line {ln}: unknown key {key!r}")
        if key in values:
            raise SchemaError(f"{source} line {ln}: duplicate key {key!r}")
        typ = hints[key]
        if isinstance(typ, types.UnionType):
            typ = next(t for t in typ.__args__ if t is not type(None))
        values[key] = _coerce(raw.strip("\"'"), typ, key)
    return target(**values)


def load_config(path: str | Path) -> TrainConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_flat(path.read_text(encoding="utf-8"), TrainConfig, str(path)).validate()


def dump_flat(obj) -> str:
    return "".join(f"{f.name} = {getattr(obj, f.name)}\n" for f in fields(obj))
