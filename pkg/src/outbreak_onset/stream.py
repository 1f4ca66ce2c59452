"""Replicate case streams: uniform arrivals for known diseases, truncated
exponential arrivals after onset for the novel one."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ConfigError, PathologicalConfigError, PoolExhaustedError

MIN_ACCEPTANCE = 0.01


@dataclass(frozen=True)
class StreamConfig:
    horizon_days: float = 100.0
    onset_day: float = 50.0
    R: float = 1.3
    n_known_per_disease: int = 200
    n_novel: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.onset_day < self.horizon_days:
            raise ConfigError(f"need 0 < onset_day < horizon_days, got {self.onset_day}, {self.horizon_days}")
        if not self.R > 1:
            raise ConfigError(f"R must be > 1, got {self.R}")
        if self.n_known_per_disease < 0 or self.n_novel < 0:
            raise ConfigError("case counts must be non-negative")

    def to_dict(self):
        return asdict(self)


@dataclass
class EmbeddingPool:
    """Embeddings of one disease with their case ids."""

    label: str
    vectors: np.ndarray
    case_ids: list[str]

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if len(self.case_ids) != len(self.vectors):
            raise ValueError("case_ids and vectors differ in length")

    def __len__(self):
        return len(self.case_ids)


@dataclass
class CaseStream:
    """Time-ordered cases; arrays share the row order."""

    case_ids: np.ndarray
    timestamps: np.ndarray
    labels: np.ndarray
    vectors: np.ndarray
    onset_day: float
    horizon_days: float
    novel_label: str | None = None

    def __len__(self):
        return len(self.timestamps)

    @property
    def is_novel(self) -> np.ndarray:
        return self.labels == self.novel_label


def gamma_from_R(R: float) -> float:
    """Exponential scale ``1 / ln(R)``."""
    R = float(R)
    if not R > 1.0 or not math.isfinite(R):
        raise ValueError(f"R must be > 1, got {R}")
    return 1.0 / math.log(R)


def sample_known_timestamps(n: int, horizon: float, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.uniform(0.0, horizon, size=int(n))


def truncated_exponential_cdf(x, scale: float, width: float):
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, width)
    return -np.expm1(-x / scale) / -math.expm1(-width / scale)


def truncated_exponential_mean(scale: float, width: float) -> float:
    e = math.exp(-width / scale)
    return scale - width * e / (1.0 - e)


def sample_novel_timestamps(n: int, onset: float, horizon: float, R: float, seed) -> np.ndarray:
    """``onset + x`` with ``x ~ Exp(scale=1/ln R)``, redrawing anything past ``horizon``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = int(n)
    scale = gamma_from_R(R)
    width = horizon - onset
    accept = -math.expm1(-width / scale)
    if accept < MIN_ACCEPTANCE:
        raise PathologicalConfigError(
            f"only {accept:.2%} of draws fall inside [{onset}, {horizon}] for R={R}"
        )
    out = np.empty(0)
    while out.size < n:
        need = n - out.size
        draws = onset + rng.exponential(scale, size=max(need, int(need / accept * 1.1) + 8))
        out = np.concatenate([out, draws[draws <= horizon]])
    return out[:n]


def replicate_seed(master: int, *keys: int) -> np.random.SeedSequence:
    """Seed for replicate ``keys`` of run ``master``: ``SeedSequence([master, *keys])``.

    Independent of execution order, so parallel runs reproduce serial ones.
    """
    return np.random.SeedSequence([int(master), *[int(k) for k in keys]])


def build_stream(config: StreamConfig, pools: dict[str, EmbeddingPool], novel_label: str = "D5", seed=None) -> CaseStream:
    """Merge known pools (uniform arrivals) and the novel pool (post-onset) into one sorted stream.

    Known diseases are every pool except ``novel_label``. Ties in timestamp
    are broken by case id.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    ids, ts, labels, vecs = [], [], [], []
    for label in sorted(pools):
        pool = pools[label]
        if label == novel_label:
            n = config.n_novel
            if n == 0:
                continue
        else:
            n = config.n_known_per_disease
        if len(pool) < n:
            raise PoolExhaustedError(f"pool {label} has {len(pool)} cases, {n} requested")
        pick = np.sort(rng.choice(len(pool), size=n, replace=False)) if n < len(pool) else np.arange(n)
        if label == novel_label:
            t = sample_novel_timestamps(n, config.onset_day, config.horizon_days, config.R, rng)
        else:
            t = sample_known_timestamps(n, config.horizon_days, rng)
        ids.extend(pool.case_ids[i] for i in pick)
        ts.append(t)
        labels.extend([label] * n)
        vecs.append(pool.vectors[pick])
    if not ids:
        raise PoolExhaustedError("stream would be empty")
    ids = np.asarray(ids)
    ts = np.concatenate(ts)
    order = np.lexsort((ids, ts))
    return CaseStream(
        case_ids=ids[order],
        timestamps=ts[order],
        labels=np.asarray(labels)[order],
        vectors=np.concatenate(vecs)[order],
        onset_day=config.onset_day,
        horizon_days=config.horizon_days,
        novel_label=novel_label,
    )
