"""Synthetic volumetric anomaly maps for five lesion configurations.

Each disease differs only in how fragmented its lesions are and where in the
lung mask they sit. Lesions are drawn by blurring seeded white noise and
keeping the strongest voxels inside the allowed region, so the same mechanism
produces both compact blobs (wide blur) and scattered specks (narrow blur).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy import ndimage

from .exceptions import ConfigError, ShapeError

DEFAULT_SHAPE = (32, 32, 32)
MIN_DIM = 8

# Semi-axis of the mask ellipsoid relative to half the box extent.
_MASK_RADIUS = 0.9
_BLUR_SIGMA = {"low": 4.0, "high": 0.7}
_MAX_LOW_COMPONENTS = 5
_CONNECTIVITY = np.ones((3, 3, 3), dtype=bool)


class Fragmentation(str, enum.Enum):
    LOW = "low"
    HIGH = "high"


class Location(str, enum.Enum):
    RANDOM = "random"
    FRONT = "front"
    BACK = "back"


def _coerce(enum_cls, value):
    if isinstance(value, enum_cls):
        return value
    return enum_cls(str(value).lower())


@dataclass(frozen=True)
class DiseaseConfig:
    """Parameters of one simulated disease pattern."""

    id: str
    fragmentation: Fragmentation
    location: Location
    lesion_fraction: float = 0.08
    intensity_range: tuple[float, float] = (0.3, 1.0)

    def __post_init__(self):
        try:
            object.__setattr__(self, "fragmentation", _coerce(Fragmentation, self.fragmentation))
            object.__setattr__(self, "location", _coerce(Location, self.location))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        object.__setattr__(self, "intensity_range", tuple(float(v) for v in self.intensity_range))
        if not 0.0 < self.lesion_fraction < 1.0:
            raise ConfigError(f"lesion_fraction must be in (0, 1), got {self.lesion_fraction}")
        lo, hi = self.intensity_range
        if len(self.intensity_range) != 2 or not 0.0 <= lo <= hi:
            raise ConfigError(f"intensity_range must be (min, max) with 0 <= min <= max, got {self.intensity_range}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "fragmentation": self.fragmentation.value,
            "location": self.location.value,
            "lesion_fraction": self.lesion_fraction,
            "intensity_range": list(self.intensity_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> DiseaseConfig:
        unknown = set(d) - {"id", "fragmentation", "location", "lesion_fraction", "intensity_range"}
        if unknown:
            raise ConfigError(f"unknown disease config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid disease config {d!r}: {exc}") from exc


CANONICAL_DISEASES: tuple[DiseaseConfig, ...] = (
    DiseaseConfig("D1", Fragmentation.LOW, Location.RANDOM),
    DiseaseConfig("D2", Fragmentation.LOW, Location.FRONT),
    DiseaseConfig("D3", Fragmentation.HIGH, Location.FRONT),
    DiseaseConfig("D4", Fragmentation.HIGH, Location.BACK),
    DiseaseConfig("D5", Fragmentation.LOW, Location.BACK),
)
NOVEL_DISEASE = "D5"


def load_disease_configs(path) -> list[DiseaseConfig]:
    """Read a list of disease configs from a YAML/JSON file."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if isinstance(raw, dict):
        raw = raw.get("diseases", raw)
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: expected a list of disease configs")
    return [DiseaseConfig.from_dict(item) for item in raw]


@dataclass
class AnomalyVolume:
    data: np.ndarray
    mask: np.ndarray
    config_id: str = ""
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.data.shape != self.mask.shape:
            raise ShapeError(f"data shape {self.data.shape} != mask shape {self.mask.shape}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def _check_shape(shape) -> tuple[int, int, int]:
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3:
        raise ShapeError(f"expected 3 dimensions, got {shape}")
    if min(shape) < MIN_DIM:
        raise ShapeError(f"every dimension must be >= {MIN_DIM}, got {shape}")
    return shape


def make_mask(shape=DEFAULT_SHAPE) -> np.ndarray:
    """Centered ellipsoidal lung-region mask (about 38% of the box)."""
    shape = _check_shape(shape)
    axes = [(np.arange(n) + 0.5 - n / 2) / (_MASK_RADIUS * n / 2) for n in shape]
    zz, yy, xx = np.meshgrid(*axes, indexing="ij")
    return zz**2 + yy**2 + xx**2 <= 1.0


def location_region(mask: np.ndarray, location: Location) -> np.ndarray:
    """Part of ``mask`` where lesions of the given location may appear.

    Front/back split at the midpoint of the mask bounding box along axis 0.
    """
    location = Location(location)
    if location is Location.RANDOM:
        return mask.copy()
    occupied = np.flatnonzero(mask.any(axis=(1, 2)))
    mid = (occupied[0] + occupied[-1] + 1) / 2.0
    depth = np.arange(mask.shape[0])[:, None, None]
    half = depth < mid if location is Location.FRONT else depth >= mid
    return mask & half


def _keep_largest(lesion: np.ndarray, n_keep: int) -> np.ndarray:
    labels, n = ndimage.label(lesion, structure=_CONNECTIVITY)
    if n <= n_keep:
        return lesion
    sizes = np.bincount(labels.ravel())[1:]
    # stable sort so equal-size ties resolve by label order
    keep = np.argsort(-sizes, kind="stable")[:n_keep] + 1
    return np.isin(labels, keep)


def synthesize_volume(config: DiseaseConfig, seed: int, shape=DEFAULT_SHAPE) -> AnomalyVolume:
    """Draw one anomaly volume for ``config``; fully determined by ``(config, seed, shape)``."""
    mask = make_mask(shape)
    region = location_region(mask, config.location)
    rng = np.random.default_rng(seed)

    noise = rng.standard_normal(mask.shape)
    field_ = ndimage.gaussian_filter(noise, _BLUR_SIGMA[config.fragmentation.value], mode="reflect")

    n_lesion = int(round(config.lesion_fraction * mask.sum()))
    n_lesion = min(max(n_lesion, 1), int(region.sum()))
    idx = np.flatnonzero(region)
    top = idx[np.argpartition(field_.ravel()[idx], -n_lesion)[-n_lesion:]]
    lesion = np.zeros(mask.size, dtype=bool)
    lesion[top] = True
    lesion = lesion.reshape(mask.shape)
    if config.fragmentation is Fragmentation.LOW:
        lesion = _keep_largest(lesion, _MAX_LOW_COMPONENTS)

    lo, hi = config.intensity_range
    data = np.zeros(mask.shape, dtype=np.float64)
    data[lesion] = rng.uniform(lo, hi, size=int(lesion.sum()))
    return AnomalyVolume(data=data, mask=mask, config_id=config.id, seed=seed)


def count_components(volume: AnomalyVolume | np.ndarray) -> int:
    """Number of 26-connected nonzero components."""
    data = volume.data if isinstance(volume, AnomalyVolume) else np.asarray(volume)
    return int(ndimage.label(data > 0, structure=_CONNECTIVITY)[1])


def write_volume(volume: AnomalyVolume, path) -> Path:
    """Write raw little-endian float32 data plus a ``.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    volume.data.astype("<f4").tofile(path)
    sidecar = {"shape": list(volume.shape), "config_id": volume.config_id, "seed": volume.seed, "dtype": "<f4"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def read_volume(path) -> AnomalyVolume:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    shape = tuple(sidecar["shape"])
    data = np.fromfile(path, dtype="<f4").astype(np.float64).reshape(shape)
    return AnomalyVolume(data=data, mask=make_mask(shape), config_id=sidecar["config_id"], seed=sidecar["seed"])
