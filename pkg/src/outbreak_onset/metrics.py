"""Embedding quality: silhouette, descriptor ablation and 2D projections."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .detector import pairwise_distances
from .exceptions import DegenerateClassError
from .features import VARIANTS, default_bank, extract_features, fuse, gram_matrix
from .reduce import pca_reduce


@dataclass
class LabeledEmbeddingSet:
    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.vectors.ndim != 2 or len(self.vectors) != len(self.labels):
            raise ValueError("vectors must be (n, d) with one label per row")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("vectors contain NaN or Inf")
        classes, counts = np.unique(self.labels, return_counts=True)
        if len(classes) < 2:
            raise DegenerateClassError(f"need at least 2 classes, got {len(classes)}")
        if counts.min() < 2:
            raise DegenerateClassError(f"class {classes[counts.argmin()]!r} has fewer than 2 members")


def silhouette(vectors, labels=None) -> float:
    """Mean silhouette coefficient under Euclidean distance."""
    data = vectors if isinstance(vectors, LabeledEmbeddingSet) else LabeledEmbeddingSet(vectors, labels)
    D = pairwise_distances(data.vectors)
    if not np.any(D > 0):
        raise DegenerateClassError("all embeddings coincide; silhouette is undefined")
    classes, inv, counts = np.unique(data.labels, return_inverse=True, return_counts=True)
    onehot = np.eye(len(classes))[inv]  # (n, k)
    sums = D @ onehot  # distance from each sample to every class
    own = counts[inv]
    a = sums[np.arange(len(inv)), inv] / (own - 1)
    mean_other = sums / counts
    mean_other[np.arange(len(inv)), inv] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.divide(b - a, denom, out=np.zeros_like(a), where=denom > 0)
    return float(s.mean())


def variant_descriptors(F: np.ndarray) -> dict[str, np.ndarray]:
    M = gram_matrix(F)
    return {"raw": F.ravel(), "gram": M.ravel(), "fused": fuse(M, F)}


def ablation(volumes_by_disease, n_components=32, bank=None, return_embeddings=False):
    """Silhouette of raw-feature, Gram-only and fused descriptors.

    Every variant is reduced to ``n_components`` principal components first
    so the comparison is not driven by the ambient dimension.
    """
    bank = bank or default_bank()
    per_variant = {v: [] for v in VARIANTS}
    labels = []
    for label in sorted(volumes_by_disease):
        for vol in volumes_by_disease[label]:
            for name, desc in variant_descriptors(extract_features(vol, bank)).items():
                per_variant[name].append(desc)
            labels.append(label)
    labels = np.asarray(labels)
    scores, embeddings = {}, {}
    for name in VARIANTS:
        X = np.asarray(per_variant[name])
        if not np.any(X.std(axis=0) > 0):
            raise DegenerateClassError(f"all {name} descriptors are identical; silhouette is undefined")
        Z = pca_reduce(X, n_components)[0]
        scores[name] = silhouette(Z, labels)
        embeddings[name] = Z
    if return_embeddings:
        return scores, embeddings, labels
    return scores


def project_2d(vectors) -> np.ndarray:
    """Centered projection onto the top two principal axes."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or len(X) < 3:
        raise ValueError(f"need an (n >= 3, d) array, got shape {X.shape}")
    Z = pca_reduce(X, 2)[0]
    return Z - Z.mean(axis=0)


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def write_svg_scatter(path, coords, labels, title="", size=480) -> Path:
    """Minimal standalone SVG scatter plot, one color per label."""
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels)
    pad = 40
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    xy = pad + (coords - lo) / span * (size - 2 * pad)
    classes = sorted(set(labels.tolist()))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{size / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for k, cls in enumerate(classes):
        color = _PALETTE[k % len(_PALETTE)]
        for x, y in xy[labels == cls]:
            parts.append(f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="3" fill="{color}" fill-opacity="0.7"/>')
        parts.append(f'<text x="{size - 70}" y="{40 + 16 * k}" font-size="12" fill="{color}">{escape(str(cls))}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path
