"""Sliding-window onset detection.

Two windows of ``w_s`` consecutive cases slide over the stream one case at a
time: the baseline window immediately precedes the detection window. Two
scores are tracked per step:

* ``ped`` - deviation between the mean pairwise Euclidean distances of the
  two windows (an emerging tight cluster shrinks the detection window's
  spread);
* ``kde`` - mean log-likelihood of the detection window under a Gaussian
  KDE fitted to the baseline window.

Thresholds come from baseline-only calibration streams.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DegenerateBaselineError, InsufficientDataError, ShapeError

SENSITIVITY = 2.576
SCORES = ("ped", "kde")
MIN_CALIBRATION_STREAMS = 10
BANDWIDTH_FLOOR = 1e-3
DENSITY_FLOOR = 1e-300

_LOG_2PI = math.log(2.0 * math.pi)


def _as_window(X, min_size=2, name="window"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2D, got shape {X.shape}")
    if len(X) < min_size:
        raise InsufficientDataError(f"{name} needs at least {min_size} cases, got {len(X)}")
    return X


def pairwise_distances(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.clip(d2, 0.0, None))


def mean_pairwise_distance(window) -> float:
    """Mean Euclidean distance over all unordered pairs."""
    X = _as_window(window)
    n = len(X)
    D = pairwise_distances(X)
    return float(D[np.triu_indices(n, 1)].mean())


def d_dev(baseline, detection) -> float:
    """Absolute difference of the windows' mean pairwise distances."""
    return abs(mean_pairwise_distance(detection) - mean_pairwise_distance(baseline))


def scott_bandwidth(baseline, floor=0.0) -> np.ndarray:
    """Per-dimension Scott bandwidth ``n**(-1/(d+4)) * std``, floored."""
    X = _as_window(baseline, name="baseline")
    n, d = X.shape
    return np.maximum(n ** (-1.0 / (d + 4)) * X.std(axis=0, ddof=1), floor)


def kde_log_density(points, baseline, bandwidth) -> np.ndarray:
    """Log of a diagonal-bandwidth Gaussian mixture centred at ``baseline``, at each of ``points``."""
    B = _as_window(baseline, min_size=1, name="baseline")
    P = _as_window(points, min_size=1, name="points")
    h = np.broadcast_to(np.asarray(bandwidth, dtype=np.float64), (B.shape[1],))
    if np.any(h <= 0):
        raise DegenerateBaselineError("kernel bandwidth is zero; set a positive floor")
    z = (P[:, None, :] - B[None, :, :]) / h
    log_k = -0.5 * np.einsum("ijk,ijk->ij", z, z) - np.log(h).sum() - 0.5 * B.shape[1] * _LOG_2PI
    log_p = logsumexp(log_k, axis=1) - math.log(len(B))
    return np.maximum(log_p, math.log(DENSITY_FLOOR))


def kde_score(baseline, detection, bandwidth="scott", floor=None) -> float:
    """Mean log-likelihood of ``detection`` under a Gaussian KDE of ``baseline``.

    ``bandwidth`` is ``"scott"`` or explicit per-dimension (or scalar) widths.
    With Scott's rule the widths are floored at ``floor``; by default
    ``1e-3`` times the overall spread of both windows.
    """
    if isinstance(bandwidth, str):
        if bandwidth != "scott":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        B = _as_window(baseline, name="baseline")
        if floor is None:
            both = np.vstack([B, _as_window(detection, min_size=1, name="detection")])
            floor = BANDWIDTH_FLOOR * float(both.std(axis=0).mean())
        h = scott_bandwidth(B, floor)
        if np.any(h <= 0):
            raise DegenerateBaselineError("baseline window is constant and no positive floor is available")
    else:
        B = _as_window(baseline, min_size=1, name="baseline")
        h = bandwidth
    return float(kde_log_density(detection, B, h).mean())


@dataclass(frozen=True)
class WindowScores:
    """Per-step window statistics of one stream for one window size.

    Step ``j`` compares baseline ``[j, j + w)`` with detection ``[j + w, j + 2w)``.
    ``day`` is the timestamp of the detection window's newest case.
    """

    w_s: int
    day: np.ndarray
    d_base: np.ndarray
    d_det: np.ndarray
    kde: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        """Signed ``d_d - d_b``."""
        return self.d_det - self.d_base

    @property
    def ped(self) -> np.ndarray:
        return np.abs(self.deviation)


def _window_pair_sums(D: np.ndarray, w: int) -> np.ndarray:
    """Sum of the upper triangle of ``D[i:i+w, i:i+w]`` for every start ``i``."""
    n = len(D)
    S = np.zeros((n + 1, n + 1))
    S[1:, 1:] = D.cumsum(0).cumsum(1)
    i = np.arange(n - w + 1)
    block = S[i + w, i + w] - S[i, i + w] - S[i + w, i] + S[i, i]
    return 0.5 * block


def window_scores(vectors, timestamps, w_s: int, scale_floor: float, baseline="sliding", chunk=64) -> WindowScores:
    """Score every window pair of a stream.

    ``baseline="fixed"`` pins the baseline to the first ``w_s`` cases instead
    of sliding it along with the detection window.
    """
    X = np.asarray(vectors, dtype=np.float64)
    t = np.asarray(timestamps, dtype=np.float64)
    n = len(X)
    w = int(w_s)
    if w < 2:
        raise ValueError(f"w_s must be >= 2, got {w_s}")
    if n < 2 * w:
        raise InsufficientDataError(f"stream of {n} cases is shorter than 2*w_s = {2 * w}")
    n_steps = n - 2 * w + 1
    npairs = w * (w - 1) / 2
    mean_d = _window_pair_sums(pairwise_distances(X), w) / npairs
    det_start = np.arange(n_steps) + w
    base_start = np.arange(n_steps) if baseline == "sliding" else np.zeros(n_steps, dtype=int)
    if baseline not in ("sliding", "fixed"):
        raise ValueError(f"unknown baseline mode {baseline!r}")

    d = X.shape[1]
    bw_factor = w ** (-1.0 / (d + 4))
    log_floor = math.log(DENSITY_FLOOR)
    kde = np.empty(n_steps)
    for lo in range(0, n_steps, chunk):
        hi = min(lo + chunk, n_steps)
        B = np.stack([X[s:s + w] for s in base_start[lo:hi]])  # (c, w, d)
        P = np.stack([X[s:s + w] for s in det_start[lo:hi]])
        h = np.maximum(bw_factor * B.std(axis=1, ddof=1), scale_floor)  # (c, d)
        Bs = B / h[:, None, :]
        Ps = P / h[:, None, :]
        sq_b = np.einsum("cjd,cjd->cj", Bs, Bs)
        sq_p = np.einsum("cid,cid->ci", Ps, Ps)
        d2 = sq_p[:, :, None] + sq_b[:, None, :] - 2.0 * np.einsum("cid,cjd->cij", Ps, Bs)
        log_k = -0.5 * np.clip(d2, 0.0, None)
        norm = -np.log(h).sum(axis=1) - 0.5 * d * _LOG_2PI - math.log(w)
        log_p = logsumexp(log_k, axis=2) + norm[:, None]
        kde[lo:hi] = np.maximum(log_p, log_floor).mean(axis=1)

    return WindowScores(
        w_s=w,
        day=t[det_start + w - 1],
        d_base=mean_d[base_start],
        d_det=mean_d[det_start],
        kde=kde,
    )


@dataclass(frozen=True)
class CalibrationStats:
    score: str
    w_s: int
    mu: float
    sigma: float
    s: float = SENSITIVITY
    n_calibration_streams: int = 0
    scale_floor: float | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise InsufficientDataError(f"calibration sigma must be > 0, got {self.sigma}")

    def to_dict(self):
        return {
            "score": self.score,
            "w_s": self.w_s,
            "mu": self.mu,
            "sigma": self.sigma,
            "s": self.s,
            "n_calibration_streams": self.n_calibration_streams,
            "scale_floor": self.scale_floor,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def with_s(self, s: float) -> CalibrationStats:
        return dataclasses.replace(self, s=float(s))


def _calibration_values(scores: WindowScores, score: str) -> np.ndarray:
    # ped is calibrated on the signed deviation so that |d_d - d_b| > s*sigma
    # is a two-sided s-sigma interval of the baseline fluctuation
    if score == "ped":
        return scores.deviation
    if score == "kde":
        return scores.kde
    raise ValueError(f"unknown score {score!r}; choose from {SCORES}")


def calibrate(streams, w_s: int, score: str, s: float = SENSITIVITY, scale_floor=None, baseline="sliding") -> CalibrationStats:
    """Mean and standard deviation of a window score pooled over baseline-only streams."""
    streams = list(streams)
    if len(streams) < MIN_CALIBRATION_STREAMS:
        raise InsufficientDataError(
            f"need at least {MIN_CALIBRATION_STREAMS} baseline-only streams, got {len(streams)}"
        )
    for st in streams:
        if np.any(st.is_novel):
            raise ValueError("calibration streams must not contain the novel disease")
    if scale_floor is None:
        scale_floor = embedding_floor(np.vstack([st.vectors for st in streams]))
    values = np.concatenate(
        [_calibration_values(window_scores(st.vectors, st.timestamps, w_s, scale_floor, baseline), score) for st in streams]
    )
    return CalibrationStats(
        score=score, w_s=int(w_s), mu=float(values.mean()), sigma=float(values.std(ddof=1)),
        s=s, n_calibration_streams=len(streams), scale_floor=float(scale_floor),
    )


def embedding_floor(vectors) -> float:
    """Bandwidth floor: ``1e-3`` times the mean per-dimension spread of the embeddings."""
    spread = float(np.asarray(vectors, dtype=np.float64).std(axis=0).mean())
    return BANDWIDTH_FLOOR * spread if spread > 0 else BANDWIDTH_FLOOR


def triggers(scores: WindowScores, calib: CalibrationStats, two_sided_kde=False) -> np.ndarray:
    """Boolean trigger mask per step."""
    if calib.score == "ped":
        return scores.ped > calib.s * calib.sigma
    if two_sided_kde:
        return np.abs(scores.kde - calib.mu) > calib.s * calib.sigma
    return scores.kde < calib.mu - calib.s * calib.sigma


def count_episodes(mask: np.ndarray) -> int:
    """Runs of consecutive ``True`` values."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.size:
        return 0
    return int(mask[0] + np.count_nonzero(mask[1:] & ~mask[:-1]))


@dataclass
class DetectionReport:
    score: str
    w_s: int
    detected: bool
    detection_day: float | None
    latency_days: float | None
    fp_count: int
    fp_steps: int
    fp_per_100_days: float
    pre_onset_days: float
    score_trace: np.ndarray = field(repr=False, default=None)  # columns: day, d_dev, s_kde


def report_from_scores(scores: WindowScores, calib: CalibrationStats, onset_day: float, two_sided_kde=False) -> DetectionReport:
    trig = triggers(scores, calib, two_sided_kde)
    post = scores.day >= onset_day
    pre_trig = trig & ~post
    hits = np.flatnonzero(trig & post)
    detected = hits.size > 0
    day = float(scores.day[hits[0]]) if detected else None
    pre_days = max(float(onset_day - scores.day[0]), 0.0)
    episodes = count_episodes(pre_trig[~post])
    return DetectionReport(
        score=calib.score,
        w_s=scores.w_s,
        detected=detected,
        detection_day=day,
        latency_days=day - onset_day if detected else None,
        fp_count=episodes,
        fp_steps=int(pre_trig.sum()),
        fp_per_100_days=100.0 * episodes / pre_days if pre_days > 0 else 0.0,
        pre_onset_days=pre_days,
        score_trace=np.column_stack([scores.day, scores.ped, scores.kde]),
    )


def detect(stream, calibration_ped: CalibrationStats, calibration_kde: CalibrationStats, w_s: int,
           s: float | None = None, scale_floor=None, two_sided_kde=False, baseline="sliding") -> dict[str, DetectionReport]:
    """Run both scores over ``stream``; returns ``{"ped": report, "kde": report}``.

    Pre-onset triggers are counted as false positives and do not stop the
    run; the first trigger at or after onset is the detection.
    """
    if len(stream) < 2 * w_s:
        raise InsufficientDataError(f"stream of {len(stream)} cases is shorter than 2*w_s = {2 * w_s}")
    if scale_floor is None:
        scale_floor = calibration_kde.scale_floor or embedding_floor(stream.vectors)
    scores = window_scores(stream.vectors, stream.timestamps, w_s, scale_floor, baseline)
    out = {}
    for calib in (calibration_ped, calibration_kde):
        if s is not None:
            calib = calib.with_s(s)
        out[calib.score] = report_from_scores(scores, calib, stream.onset_day, two_sided_kde)
    return out


class OnsetDetector(BaseEstimator):
    """Calibrate on baseline-only streams, then detect onset in new streams.

    Parameters
    ----------
    w_s : int, default=30
        Window size in cases.
    s : float, default=2.576
        Threshold multiplier on the calibrated standard deviation.
    two_sided_kde : bool, default=False
        Trigger on high as well as low KDE likelihood.
    baseline : {"sliding", "fixed"}, default="sliding"
    """

    def __init__(self, w_s=30, s=SENSITIVITY, two_sided_kde=False, baseline="sliding"):
        self.w_s = w_s
        self.s = s
        self.two_sided_kde = two_sided_kde
        self.baseline = baseline

    def fit(self, streams, y=None):
        streams = list(streams)
        self.scale_floor_ = embedding_floor(np.vstack([st.vectors for st in streams]))
        self.calibration_ = {
            score: calibrate(streams, self.w_s, score, self.s, self.scale_floor_, self.baseline) for score in SCORES
        }
        return self

    def score_stream(self, stream) -> WindowScores:
        check_is_fitted(self, "calibration_")
        return window_scores(stream.vectors, stream.timestamps, self.w_s, self.scale_floor_, self.baseline)

    def predict(self, stream) -> dict[str, DetectionReport]:
        check_is_fitted(self, "calibration_")
        scores = self.score_stream(stream)
        return {
            name: report_from_scores(scores, calib, stream.onset_day, self.two_sided_kde)
            for name, calib in self.calibration_.items()
        }
