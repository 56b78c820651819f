"""One JSON run configuration shared by every CLI command.

Precedence is flags > config file > defaults: the CLI loads the file (if
given), applies flag overrides with `with_overrides`, and writes the fully
resolved document next to the command's outputs so any run can be repeated
from its artifacts alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .explain import LimeConfig
from .net import ModelConfig
from .schema import FeatureSchema, default_schema
from .synth import SynthConfig


@dataclass(frozen=True)
class RunConfig:
    data_dir: str = "data"
    out_dir: str = "out"
    step_days: int = 30
    sequence_length: int = 6
    horizon_days: int = 180
    window_days: int = 365
    folds: int = 10
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    lime: LimeConfig = field(default_factory=LimeConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        if self.step_days < 1 or self.sequence_length < 1:
            raise ValueError("step_days and sequence_length must be >= 1")
        if self.horizon_days < 0 or self.window_days < 1:
            raise ValueError("horizon_days must be >= 0, window_days >= 1")
        if self.folds < 1:
            raise ValueError("folds must be >= 1")

    def schema(self) -> FeatureSchema:
        """The bundled schema with this run's time-grid knobs applied."""
        base = default_schema()
        if (base.sequence_length, base.step_days) == (self.sequence_length, self.step_days):
            return base
        d = base.to_dict()
        d["sequence_length"] = self.sequence_length
        d["step_days"] = self.step_days
        return FeatureSchema.from_dict(d)

    def with_overrides(self, **kw) -> "RunConfig":
        """Replace top-level fields; `seed` also cascades into the model."""
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        if "seed" in kw:
            cfg = replace(cfg, model=replace(cfg.model, seed=kw["seed"]),
                          lime=replace(cfg.lime, seed=kw["seed"]))
        return cfg

    def to_dict(self) -> dict:
        return {
            "data_dir": self.data_dir,
            "out_dir": self.out_dir,
            "step_days": self.step_days,
            "sequence_length": self.sequence_length,
            "horizon_days": self.horizon_days,
            "window_days": self.window_days,
            "folds": self.folds,
            "seed": self.seed,
            "model": self.model.to_dict(),
            "lime": self.lime.to_dict(),
            "synth": self.synth.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        kw = dict(d)
        if "model" in kw:
            kw["model"] = ModelConfig.from_dict(kw["model"])
        if "lime" in kw:
            kw["lime"] = LimeConfig.from_dict(kw["lime"])
        if "synth" in kw:
            kw["synth"] = SynthConfig.from_dict(kw["synth"])
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kw)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
