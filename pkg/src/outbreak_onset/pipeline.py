"""End-to-end orchestration: cohorts -> descriptors -> embeddings -> streams -> detection.

Seeding: every random draw derives from ``SeedSequence([master_seed, key, ...])``
where ``key`` names the purpose (cohort, calibration, sweep) and the trailing
entries index the item. Results therefore do not depend on how work is split
across threads. Sweep replicate ``r`` uses the same seed for every R, so the
known-disease arrivals and the underlying exponential draws are shared across
R values (common random numbers).
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .detector import SCORES, CalibrationStats, calibrate, embedding_floor, report_from_scores, triggers, window_scores
from .features import FilterBank, default_bank, describe
from .reduce import SGDAutoencoder
from .stream import EmbeddingPool, build_stream, replicate_seed
from .volumes import synthesize_volume

logger = logging.getLogger(__name__)

POOL_COHORT = 0
TRAIN_COHORT = 1
ABLATION_COHORT = 2
CALIBRATION_KEY = 10
SWEEP_KEY = 11
HOLDOUT_KEY = 12


def volume_seed(master: int, cohort: int, disease_index: int, i: int) -> int:
    return int(np.random.SeedSequence([master, cohort, disease_index, i]).generate_state(1, np.uint64)[0])


def parallel_map(fn, items, threads=None):
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def bank_for(cfg: ExperimentConfig) -> FilterBank:
    return default_bank(cfg.features.bank_seed, cfg.features.symmetric)


def simulate_volumes(cfg: ExperimentConfig, n_per_disease: int, cohort: int, diseases=None, threads=None):
    """``{label: [AnomalyVolume, ...]}`` for the requested cohort."""
    diseases = diseases or cfg.diseases
    index = {d.id: k for k, d in enumerate(cfg.diseases)}
    jobs = [(d, i) for d in diseases for i in range(n_per_disease)]
    shape = tuple(cfg.cohort.volume_shape)

    def one(job):
        d, i = job
        return synthesize_volume(d, volume_seed(cfg.master_seed, cohort, index[d.id], i), shape)

    vols = parallel_map(one, jobs, threads)
    out = {d.id: [] for d in diseases}
    for (d, _), v in zip(jobs, vols):
        out[d.id].append(v)
    return out


def simulate_descriptors(cfg: ExperimentConfig, n_per_disease: int, cohort: int, diseases=None, threads=None, prefix=""):
    """``{label: (case_ids, descriptors)}``; volumes are generated and discarded on the fly."""
    diseases = diseases or cfg.diseases
    index = {d.id: k for k, d in enumerate(cfg.diseases)}
    bank = bank_for(cfg)
    shape = tuple(cfg.cohort.volume_shape)
    jobs = [(d, i) for d in diseases for i in range(n_per_disease)]

    def one(job):
        d, i = job
        vol = synthesize_volume(d, volume_seed(cfg.master_seed, cohort, index[d.id], i), shape)
        return describe(vol, bank)

    descs = parallel_map(one, jobs, threads)
    out = {}
    for d in diseases:
        ids = [f"{prefix}{d.id}-{i:04d}" for i in range(n_per_disease)]
        rows = [x for (dd, _), x in zip(jobs, descs) if dd.id == d.id]
        out[d.id] = (ids, np.asarray(rows))
    return out


def train_reducer(cfg: ExperimentConfig, threads=None, train_descriptors=None) -> SGDAutoencoder:
    """Fit the autoencoder on a fresh cohort of known diseases only."""
    if train_descriptors is None:
        known = [d for d in cfg.diseases if d.id != cfg.novel_disease]
        train_descriptors = simulate_descriptors(
            cfg, cfg.autoencoder.n_train_per_disease, TRAIN_COHORT, known, threads, prefix="train-"
        )
    X = np.vstack([x for _, x in (train_descriptors[k] for k in sorted(train_descriptors))])
    ae = cfg.autoencoder
    model = SGDAutoencoder(
        encoder_widths=tuple(ae.encoder_widths),
        learning_rate=ae.learning_rate,
        epochs=ae.epochs,
        batch_size=ae.batch_size,
        random_state=cfg.master_seed,
        compression=ae.compression,
    )
    return model.fit(X)


def embed_pools(model, descriptors) -> dict[str, EmbeddingPool]:
    return {label: EmbeddingPool(label, model.transform(X), list(ids)) for label, (ids, X) in descriptors.items()}


def calibration_streams(cfg: ExperimentConfig, pools, n=None, key=CALIBRATION_KEY):
    """Novel-free streams; ``key=HOLDOUT_KEY`` gives an independent set for checking thresholds."""
    n = cfg.detector.n_calibration_streams if n is None else n
    sc = dataclasses.replace(cfg.stream.stream_config(cfg.detector.R[0]), n_novel=0)
    known_pools = {k: v for k, v in pools.items() if k != cfg.novel_disease}
    return [
        build_stream(sc, known_pools, novel_label=cfg.novel_disease, seed=replicate_seed(cfg.master_seed, key, i))
        for i in range(n)
    ]


@dataclass
class Calibration:
    scale_floor: float
    stats: dict  # {w_s: {score: CalibrationStats}}

    def to_dict(self):
        return {
            "scale_floor": self.scale_floor,
            "stats": {str(w): {k: v.to_dict() for k, v in d.items()} for w, d in self.stats.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            scale_floor=d["scale_floor"],
            stats={int(w): {k: CalibrationStats.from_dict(v) for k, v in s.items()} for w, s in d["stats"].items()},
        )


def calibrate_all(cfg: ExperimentConfig, pools, threads=None) -> Calibration:
    streams = calibration_streams(cfg, pools)
    floor = embedding_floor(np.vstack([st.vectors for st in streams]))
    jobs = [(w, score) for w in cfg.detector.w_s for score in SCORES]

    def one(job):
        w, score = job
        return calibrate(streams, w, score, cfg.detector.s, floor, cfg.detector.baseline)

    stats = {}
    for (w, score), cal in zip(jobs, parallel_map(one, jobs, threads)):
        stats.setdefault(int(w), {})[score] = cal
    return Calibration(scale_floor=floor, stats=stats)


def false_trigger_rates(cfg: ExperimentConfig, pools, calibration: Calibration, n_streams=100, threads=None) -> dict:
    """Per-step trigger rate on held-out novel-free streams, keyed by ``(score, w_s)``."""
    streams = calibration_streams(cfg, pools, n_streams, key=HOLDOUT_KEY)
    jobs = [(w, st) for w in cfg.detector.w_s for st in streams]

    def one(job):
        w, st = job
        ws = window_scores(st.vectors, st.timestamps, w, calibration.scale_floor, cfg.detector.baseline)
        return {score: triggers(ws, calibration.stats[int(w)][score], cfg.detector.two_sided_kde) for score in SCORES}

    hits, steps = {}, {}
    for (w, _), masks in zip(jobs, parallel_map(one, jobs, threads)):
        for score, mask in masks.items():
            key = (score, int(w))
            hits[key] = hits.get(key, 0) + int(mask.sum())
            steps[key] = steps.get(key, 0) + mask.size
    return {k: hits[k] / steps[k] for k in hits}


def run_replicate(cfg: ExperimentConfig, pools, calibration: Calibration, R: float, replicate: int):
    """All reports for one stream: ``{(score, w_s): DetectionReport}``."""
    sc = cfg.stream.stream_config(R)
    stream = build_stream(sc, pools, novel_label=cfg.novel_disease, seed=replicate_seed(cfg.master_seed, SWEEP_KEY, replicate))
    out = {}
    for w in cfg.detector.w_s:
        scores = window_scores(stream.vectors, stream.timestamps, w, calibration.scale_floor, cfg.detector.baseline)
        for score in SCORES:
            cal = calibration.stats[int(w)][score]
            out[(score, int(w))] = report_from_scores(scores, cal, stream.onset_day, cfg.detector.two_sided_kde)
    return out


def summarize(reports) -> dict:
    """Aggregate replicate reports of one (score, w_s, R) cell."""
    lat = [r.latency_days for r in reports if r.detected]
    return {
        "mean_latency": float(np.mean(lat)) if lat else float("nan"),
        "detection_rate": len(lat) / len(reports),
        "fp_per_100_days": float(np.mean([r.fp_per_100_days for r in reports])),
        "n_replicates": len(reports),
        "n_detected": len(lat),
        "fp_step_rate": float(
            np.sum([r.fp_steps for r in reports]) / max(np.sum([len(r.score_trace) for r in reports]), 1)
        ),
    }


RESULT_FIELDS = ["score", "w_s", "R", "mean_latency", "detection_rate", "fp_per_100_days", "n_replicates", "n_detected"]


def sweep(cfg: ExperimentConfig, pools, calibration: Calibration, threads=None, keep_reports=False):
    """Table of mean latency, detection rate and FP/100 days per (score, w_s, R)."""
    det = cfg.detector
    jobs = [(R, r) for R in det.R for r in range(det.n_replicates)]
    results = parallel_map(lambda job: run_replicate(cfg, pools, calibration, *job), jobs, threads)
    cells = {}
    for (R, r), reps in zip(jobs, results):
        for key, rep in reps.items():
            cells.setdefault((*key, R), []).append(rep)
    rows = []
    for score in SCORES:
        for w in det.w_s:
            for R in det.R:
                rows.append({"score": score, "w_s": int(w), "R": float(R), **summarize(cells[(score, int(w), R)])})
    if keep_reports:
        return rows, cells
    return rows
