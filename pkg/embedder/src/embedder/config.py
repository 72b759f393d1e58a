"""Embedder configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

DEFAULT_ENCODER = "bert-base-multilingual-uncased"


class ConfigError(Exception):
    pass


@dataclass
class EmbedderConfig:
    encoder: str = DEFAULT_ENCODER          # model name or checkpoint path
    layers: tuple[int, ...] = (-4, -3, -2, -1)  # hidden-state indices to concatenate
    masking_probability: float = 0.15
    epochs: int = 3
    batch_size: int = 8
    learning_rate: float = 5e-5
    aggregation: str = "mean"               # "mean" (default) or "max"
    seed: int = 13
    store_path: str = "embeddings.cemb"

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("layer list must be non-empty")
        if not 0.0 < self.masking_probability < 1.0:
            raise ConfigError(
                f"masking probability must be in (0, 1), got {self.masking_probability}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.aggregation not in ("mean", "max"):
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")


def load_config(path) -> EmbedderConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    section = raw.get("embedder", raw)
    kwargs = {}
    for key in ("encoder", "masking_probability", "epochs", "batch_size",
                "learning_rate", "aggregation", "seed", "store_path"):
        if key in section:
            kwargs[key] = section[key]
    if "layers" in section:
        kwargs["layers"] = tuple(int(x) for x in section["layers"])
    try:
        return EmbedderConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
