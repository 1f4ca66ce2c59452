"""Experiment configuration: nested dataclasses loaded from / dumped to YAML."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .detector import SENSITIVITY
from .exceptions import ConfigError
from .features import BANK_SEED
from .reduce import DEFAULT_ENCODER
from .stream import StreamConfig
from .volumes import CANONICAL_DISEASES, DEFAULT_SHAPE, NOVEL_DISEASE, DiseaseConfig


@dataclass
class CohortSection:
    cases_per_disease: int = 200
    volume_shape: tuple[int, int, int] = DEFAULT_SHAPE


@dataclass
class FeatureSection:
    bank_seed: int = BANK_SEED
    symmetric: bool = True


@dataclass
class AutoencoderSection:
    # full-size: encoder 4096-2048-1024-512, learning_rate 1.0
    encoder_widths: tuple[int, ...] = DEFAULT_ENCODER
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 16
    n_train_per_disease: int = 200
    compression: str = "cbrt"


@dataclass
class StreamSection:
    horizon_days: float = 100.0
    onset_day: float = 50.0
    n_known_per_disease: int = 200
    n_novel: int = 200

    def stream_config(self, R: float, seed=0) -> StreamConfig:
        return StreamConfig(
            horizon_days=self.horizon_days,
            onset_day=self.onset_day,
            R=R,
            n_known_per_disease=self.n_known_per_disease,
            n_novel=self.n_novel,
            seed=seed,
        )


@dataclass
class DetectorSection:
    w_s: tuple[int, ...] = (30, 50, 90)
    s: float = SENSITIVITY
    R: tuple[float, ...] = (1.1, 1.15, 1.2, 1.25, 1.3)
    n_replicates: int = 100
    n_calibration_streams: int = 50
    two_sided_kde: bool = False
    baseline: str = "sliding"


@dataclass
class AblationSection:
    n_per_disease: int = 40
    n_components: int = 32


@dataclass
class ExperimentConfig:
    master_seed: int = 0
    out_dir: str = "runs/default"
    threads: int | None = None
    novel_disease: str = NOVEL_DISEASE
    diseases: list[DiseaseConfig] = field(default_factory=lambda: list(CANONICAL_DISEASES))
    cohort: CohortSection = field(default_factory=CohortSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    autoencoder: AutoencoderSection = field(default_factory=AutoencoderSection)
    stream: StreamSection = field(default_factory=StreamSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    ablation: AblationSection = field(default_factory=AblationSection)

    def validate(self) -> ExperimentConfig:
        ids = [d.id for d in self.diseases]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate disease ids: {ids}")
        if self.novel_disease not in ids:
            raise ConfigError(f"novel_disease {self.novel_disease!r} not among diseases {ids}")
        if len(ids) < 2:
            raise ConfigError("need at least one known and one novel disease")
        c = self.cohort
        if len(c.volume_shape) != 3 or min(c.volume_shape) < 8:
            raise ConfigError(f"volume_shape must be three dims >= 8, got {c.volume_shape}")
        if c.cases_per_disease < max(self.stream.n_known_per_disease, self.stream.n_novel):
            raise ConfigError("cohort.cases_per_disease is smaller than the stream case counts")
        ae = self.autoencoder
        if not ae.encoder_widths or min(ae.encoder_widths) <= 0:
            raise ConfigError("autoencoder.encoder_widths must be positive")
        if ae.compression not in ("cbrt", "none"):
            raise ConfigError(f"autoencoder.compression must be 'cbrt' or 'none', got {ae.compression!r}")
        if ae.learning_rate <= 0 or ae.epochs < 0 or ae.batch_size < 1 or ae.n_train_per_disease < 1:
            raise ConfigError("invalid autoencoder training parameters")
        det = self.detector
        if not det.R:
            raise ConfigError("detector.R must list at least one reproduction number")
        if not det.w_s:
            raise ConfigError("detector.w_s must list at least one window size")
        if any(r <= 1 for r in det.R):
            raise ConfigError(f"every R must be > 1, got {det.R}")
        if any(w < 2 for w in det.w_s):
            raise ConfigError(f"every w_s must be >= 2, got {det.w_s}")
        if det.n_replicates < 1 or det.n_calibration_streams < 10 or det.s <= 0:
            raise ConfigError("need n_replicates >= 1, n_calibration_streams >= 10 and s > 0")
        if det.baseline not in ("sliding", "fixed"):
            raise ConfigError(f"detector.baseline must be 'sliding' or 'fixed', got {det.baseline!r}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.stream.stream_config(det.R[0])  # range checks on onset/horizon
        return self

    @property
    def known_diseases(self) -> list[str]:
        return [d.id for d in self.diseases if d.id != self.novel_disease]

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "diseases":
                out[f.name] = [d.to_dict() for d in value]
            elif dataclasses.is_dataclass(value):
                out[f.name] = {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(value).items()}
            else:
                out[f.name] = value
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, raw: dict | None) -> ExperimentConfig:
        raw = dict(raw or {})
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, value in raw.items():
            default = getattr(cls(), name)
            if name == "diseases":
                if not isinstance(value, list):
                    raise ConfigError("diseases must be a list")
                kwargs[name] = [DiseaseConfig.from_dict(d) for d in value]
            elif dataclasses.is_dataclass(default):
                kwargs[name] = _section(type(default), value, name)
            else:
                kwargs[name] = value
        try:
            return cls(**kwargs).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if raw is not None and not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(raw)


def _section(section_cls, value, name):
    if value is None:
        return section_cls()
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    names = {f.name: f for f in dataclasses.fields(section_cls)}
    unknown = set(value) - set(names)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    converted = {}
    for k, v in value.items():
        default = getattr(section_cls(), k)
        converted[k] = tuple(v) if isinstance(default, tuple) and isinstance(v, list) else v
    return section_cls(**converted)
