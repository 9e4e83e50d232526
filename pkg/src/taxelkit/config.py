"""Run configuration: a JSON document with fixed sections and strict keys.

Unknown keys are rejected so typos fail loudly; every field has a default.
Commands echo the effective config beside their outputs.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def _build(cls, data: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class GeometrySection:
    wall_thickness_mm: float = 2.5
    width_mm: float = 12.0
    cavity_height_mm: float = 1.5875
    magnet_height_mm: float = 6.0
    chip_offset_mm: float = 1.5


@dataclass(frozen=True)
class DipoleSection:
    moment_am2: float = 0.01
    direction: tuple = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class StiffnessSection:
    kx_n_per_mm: float = 1.5
    ky_n_per_mm: float = 1.5
    kz_n_per_mm: float = 5.0


@dataclass(frozen=True)
class SynthSection:
    n_users: int = 4
    n_blocks: int = 3
    reps_per_block: int = 3


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 60
    batch_size: int = 32


@dataclass(frozen=True)
class PathsSection:
    out_dir: str = "out"
    dataset: str = "dataset.tgk"
    checkpoint: str = "model.tgkm"


# full-scale study protocol: 11 users x 9 blocks x 3 reps
FULL_SCALE_SYNTH = SynthSection(n_users=11, n_blocks=9, reps_per_block=3)


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    dipole: DipoleSection = field(default_factory=DipoleSection)
    stiffness: StiffnessSection = field(default_factory=StiffnessSection)
    synth: SynthSection = field(default_factory=SynthSection)
    train: TrainSection = field(default_factory=TrainSection)
    paths: PathsSection = field(default_factory=PathsSection)
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        sections = {
            "geometry": GeometrySection,
            "dipole": DipoleSection,
            "stiffness": StiffnessSection,
            "synth": SynthSection,
            "train": TrainSection,
            "paths": PathsSection,
        }
        unknown = set(data) - set(sections) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        kwargs = {}
        for name, section_cls in sections.items():
            raw = data.get(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"section '{name}' must be an object")
            if name == "dipole" and "direction" in raw:
                raw = dict(raw, direction=tuple(raw["direction"]))
            kwargs[name] = _build(section_cls, raw, name)
        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("seed must be an integer")
        return cls(seed=seed, **kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dipole"]["direction"] = list(d["dipole"]["direction"])
        return d

    def echo(self, out_dir: Path) -> None:
        (out_dir / "config_echo.json").write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))
