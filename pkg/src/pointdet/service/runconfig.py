"""Run configuration: one JSON file with model/generator/training/evaluation/service sections.

Unknown keys are rejected; every omitted field materializes its default so
the effective configuration printed at startup is complete.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..data import GeneratorConfig
from ..model import ModelConfig
from ..train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class EvalSection:
    setting: int = 1
    score_threshold: float = 0.2
    jitter: float = 0.0
    seed: int = 0


@dataclass
class ServiceSection:
    host: str = "127.0.0.1"
    port: int = 8787
    image_dir: str = ""
    checkpoint: str = ""
    max_upload_bytes: int = 8 * 1024 * 1024


@dataclass
class GeneratorSection(GeneratorConfig):
    n_scenes: int = 100
    prefix: str = "scene"


@dataclass
class RunConfig:
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    training: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvalSection = field(default_factory=EvalSection)
    service: ServiceSection = field(default_factory=ServiceSection)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "model": asdict(self.model),
            "generator": asdict(self.generator),
            "training": asdict(self.training),
            "evaluation": asdict(self.evaluation),
            "service": asdict(self.service),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _build_section(cls, data: dict, where: str):
    fields = set(cls.__dataclass_fields__)
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown keys in '{where}' section: {sorted(unknown)}")
    return cls(**data)


def parse_run_config(data: dict) -> RunConfig:
    sections = {"seed", "model", "generator", "training", "evaluation", "service"}
    unknown = set(data) - sections
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    return RunConfig(
        seed=int(data.get("seed", 0)),
        model=_build_section(ModelConfig, data.get("model", {}), "model"),
        generator=_build_section(GeneratorSection, data.get("generator", {}), "generator"),
        training=_build_section(TrainConfig, data.get("training", {}), "training"),
        evaluation=_build_section(EvalSection, data.get("evaluation", {}), "evaluation"),
        service=_build_section(ServiceSection, data.get("service", {}), "service"),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config root must be an object")
    cfg = parse_run_config(data)
    # the generator section may carry tuples encoded as lists
    g = cfg.generator
    g.count_range = tuple(g.count_range)
    g.size_range = tuple(g.size_range)
    g.image_size = tuple(g.image_size)
    return cfg
