"""TOML pipeline configuration with schema validation and resolved snapshots.

Every command accepts --config pointing at a TOML file whose sections map
onto the module configs. Unknown sections or keys are errors. A
``resolved-config.json`` snapshot is written next to every output so results
are traceable to exact parameters.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .classify import RfParams, SvmParams, TrainConfig
from .errors import ConfigError, IoFailure
from .features import CorrAngleConfig, HogConfig
from .pipeline import CV_GROUPED5, CV_LOPO, PreprocessConfig, SliceConfig
from .synth import SynthConfig


@dataclass(frozen=True)
class CvConfig:
    mode: str = CV_GROUPED5
    k: int = 5

    def __post_init__(self):
        if self.mode not in (CV_GROUPED5, CV_LOPO):
            raise ValueError(f"cv mode must be {CV_GROUPED5!r} or {CV_LOPO!r}")
        if self.k < 2:
            raise ValueError("cv k must be >= 2")

    def as_dict(self) -> dict:
        return {"mode": self.mode, "k": self.k}


@dataclass
class PipelineConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    slices: SliceConfig = field(default_factory=SliceConfig)
    hog: HogConfig = field(default_factory=HogConfig)
    corrangle: CorrAngleConfig = field(default_factory=CorrAngleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    cv: CvConfig = field(default_factory=CvConfig)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Override every seeded component with one explicit seed."""
        return dataclasses.replace(
            self,
            synth=dataclasses.replace(self.synth, seed=seed),
            train=dataclasses.replace(self.train, seed=seed),
        )

    def as_dict(self) -> dict:
        return {
            "synth": self.synth.as_dict(),
            "preprocess": self.preprocess.as_dict(),
            "slices": self.slices.as_dict(),
            "hog": self.hog.as_dict(),
            "corrangle": self.corrangle.as_dict(),
            "train": self.train.as_dict(),
            "cv": self.cv.as_dict(),
        }


def _build(cls, section: str, data: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {sorted(unknown)}")
    coerced = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if isinstance(value, list):
            value = tuple(value)
        coerced[f.name] = value
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def load_config(path=None) -> PipelineConfig:
    """Parse and validate a TOML config; None returns all defaults."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    known = {"synth", "preprocess", "slices", "hog", "corrangle", "train", "cv"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    train_data = dict(data.get("train", {}))
    rf = _build(RfParams, "train.rf", train_data.pop("rf", {}))
    svm = _build(SvmParams, "train.svm", train_data.pop("svm", {}))
    extra = set(train_data) - {"seed"}
    if extra:
        raise ConfigError(f"[train] has unknown keys: {sorted(extra)}")
    train = TrainConfig(seed=int(train_data.get("seed", 0)), rf=rf, svm=svm)

    return PipelineConfig(
        synth=_build(SynthConfig, "synth", data.get("synth", {})),
        preprocess=_build(PreprocessConfig, "preprocess", data.get("preprocess", {})),
        slices=_build(SliceConfig, "slices", data.get("slices", {})),
        hog=_build(HogConfig, "hog", data.get("hog", {})),
        corrangle=_build(CorrAngleConfig, "corrangle", data.get("corrangle", {})),
        train=train,
        cv=_build(CvConfig, "cv", data.get("cv", {})),
    )


def resolved_json(cfg: PipelineConfig, command: str, extras: dict | None = None) -> str:
    doc = {"command": command, "config": cfg.as_dict()}
    if extras:
        doc["args"] = extras
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def config_fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
