"""Experiment configuration: a small JSON-backed dataclass.

JSON is the canonical format; TOML files are accepted when a toml parser is
importable. The seed is mandatory — runs never default to wall-clock
randomness, so any report can be regenerated from its config.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional


@dataclass
class ExperimentConfig:
    seed: int
    model: Dict[str, Any] = field(default_factory=lambda: {"kind": "tree", "rank": 2})
    schottky: Dict[str, Any] = field(
        default_factory=lambda: {"target_size": 310, "Kprime": None}
    )
    run: Dict[str, Any] = field(default_factory=dict)
    outputs: str = "out"

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("seed is mandatory")
        self.seed = int(self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        if "seed" not in d:
            raise ValueError("config missing mandatory 'seed'")
        known = {k: d[k] for k in ("seed", "model", "schottky", "run", "outputs") if k in d}
        extra = set(d) - set(known)
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**known)


def load_config(path: str) -> ExperimentConfig:
    p = Path(path)
    text = p.read_text()
    if p.suffix in (".toml", ".tml"):
        try:
            import tomllib  # py311+
        except ImportError:
            try:
                import tomli as tomllib
            except ImportError as exc:
                raise ValueError("toml config given but no toml parser available") from exc
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, path: str) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def config_hash(config: ExperimentConfig) -> str:
    import hashlib

    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
