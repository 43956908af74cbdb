"""Configuration for the staged search and its file format."""

import json
import os
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError
from .targets import CATEGORIES

SEARCHABLE_TARGETS = tuple(c for c in CATEGORIES if c != "other")

ENV_OUTPUT_DIR = "HERALDKIT_OUTPUT_DIR"
ENV_THREADS = "HERALDKIT_THREADS"


@dataclass
class SearchConfig:
    """Desk-scale defaults; every knob can be overridden from JSON."""

    target: str = "cat"
    seed: int = 0
    seed_pool: int = 10000
    stage2_population: int = 500
    stage3_population: int = 200
    generations: int = 10
    elite: int = 10
    crossover_fraction: float = 0.3
    tournament_size: int = 8
    mutation_power: float = 10.0
    stage1_truncation: int = 30
    stage2_truncation: int = 80
    stage3_truncations: tuple = (20, 40, 60, 80, 100)
    convergence_rtol: float = 1e-3
    herald_floor: float = 1e-8
    polish_sweeps: int = 20
    threads: int = 1

    def __post_init__(self):
        self.stage3_truncations = tuple(int(t) for t in self.stage3_truncations)
        self.validate()

    def validate(self):
        if self.target not in SEARCHABLE_TARGETS:
            raise ConfigError(
                f"target must be one of {SEARCHABLE_TARGETS}, got {self.target!r}"
            )
        if self.elite < 0 or self.elite >= min(self.stage2_population, self.stage3_population):
            raise ConfigError("elite must be smaller than every stage population")
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ConfigError("crossover_fraction must be in [0, 1]")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be positive")
        if self.mutation_power <= 0:
            raise ConfigError("mutation_power must be positive")
        if min(self.seed_pool, self.stage2_population, self.stage3_population) < 1:
            raise ConfigError("populations must be positive")
        if self.stage2_population > self.seed_pool:
            raise ConfigError("stage2_population cannot exceed seed_pool")
        if self.stage3_population > self.stage2_population:
            raise ConfigError("stage3_population cannot exceed stage2_population")
        if list(self.stage3_truncations) != sorted(set(self.stage3_truncations)):
            raise ConfigError("stage3_truncations must be strictly increasing")
        if self.generations < 1:
            raise ConfigError("generations must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage3_truncations"] = list(self.stage3_truncations)
        return d

    @staticmethod
    def from_dict(d: dict) -> "SearchConfig":
        known = {f.name for f in fields(SearchConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return SearchConfig(**d)

    @staticmethod
    def from_file(path) -> "SearchConfig":
        try:
            with open(path) as f:
                doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"config root must be an object in {path}")
        return SearchConfig.from_dict(doc)


def env_output_dir(default="heraldkit-out") -> str:
    return os.environ.get(ENV_OUTPUT_DIR, default)


def env_threads(default=1) -> int:
    raw = os.environ.get(ENV_THREADS)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{ENV_THREADS} must be an integer, got {raw!r}") from e
    if value < 1:
        raise ConfigError(f"{ENV_THREADS} must be positive")
    return value
