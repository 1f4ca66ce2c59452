"""Gram-matrix style descriptors of anomaly volumes.

A fixed, seeded 3D convolutional filter bank turns a volume into a stack of
feature maps ``F`` (maps x voxels). The Gram matrix ``M = F F^T`` aggregates
which patterns co-occur regardless of where they occur, and the fused
descriptor ``M F`` mixes that global summary back into the spatial maps.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ShapeError
from .volumes import AnomalyVolume

BANK_SEED = 5_170_031
DEFAULT_FILTERS = (8, 16, 16, 32, 32)
DEFAULT_POOLED = (True, True, True, False, False)
KERNEL_SIZE = 3

VARIANTS = ("fused", "gram", "raw")


@dataclass(frozen=True)
class ConvLayer:
    weights: np.ndarray  # (n_out, n_in, k, k, k)
    pool: bool
    stride: int = 1

    @property
    def n_filters(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class FilterBank:
    """Immutable stack of bias-free 3x3x3 conv layers with ReLU and optional 2x average pooling."""

    layers: tuple[ConvLayer, ...]
    seed: int = BANK_SEED
    symmetric: bool = True

    @classmethod
    def build(cls, filters=DEFAULT_FILTERS, pooled=DEFAULT_POOLED, seed=BANK_SEED, symmetric=True) -> FilterBank:
        """Draw unit-variance kernels from ``seed``.

        With ``symmetric`` each kernel is averaged with its mirror images along
        every spatial axis, so features of a mirrored volume are the mirrored
        features and the Gram matrix cannot tell mirrored layouts apart.
        """
        if len(filters) != len(pooled):
            raise ValueError("filters and pooled must have equal length")
        rng = np.random.default_rng(seed)
        layers = []
        n_in = 1
        for n_out, pool in zip(filters, pooled):
            w = rng.standard_normal((n_out, n_in, KERNEL_SIZE, KERNEL_SIZE, KERNEL_SIZE))
            if symmetric:
                for axis in (2, 3, 4):
                    w = 0.5 * (w + np.flip(w, axis=axis))
            w.setflags(write=False)
            layers.append(ConvLayer(weights=w, pool=bool(pool)))
            n_in = n_out
        return cls(layers=tuple(layers), seed=seed, symmetric=symmetric)

    @property
    def n_maps(self) -> int:
        return self.layers[-1].n_filters

    @property
    def downsampling(self) -> int:
        return 2 ** sum(layer.pool for layer in self.layers)


@functools.lru_cache(maxsize=8)
def default_bank(seed: int = BANK_SEED, symmetric: bool = True) -> FilterBank:
    return FilterBank.build(seed=seed, symmetric=symmetric)


def conv3d(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Zero-padded 'same' 3D convolution (cross-correlation).

    ``x`` is (n_in, D, H, W), ``weights`` is (n_out, n_in, k, k, k).
    """
    k = weights.shape[-1]
    p = k // 2
    padded = np.pad(x, ((0, 0), (p, p), (p, p), (p, p)))
    windows = sliding_window_view(padded, (k, k, k), axis=(1, 2, 3))
    # windows: (n_in, D, H, W, k, k, k)
    out = np.tensordot(windows, weights, axes=([0, 4, 5, 6], [1, 2, 3, 4]))
    return np.moveaxis(out, -1, 0)


def avg_pool2(x: np.ndarray) -> np.ndarray:
    c, d, h, w = x.shape
    return x.reshape(c, d // 2, 2, h // 2, 2, w // 2, 2).mean(axis=(2, 4, 6))


def _as_array(volume) -> np.ndarray:
    data = volume.data if isinstance(volume, AnomalyVolume) else np.asarray(volume, dtype=np.float64)
    if data.ndim != 3:
        raise ShapeError(f"expected a 3D volume, got shape {data.shape}")
    return data


def _pad_to_multiple(data: np.ndarray, m: int) -> np.ndarray:
    target = [-(-n // m) * m for n in data.shape]
    if any(t > 2 * n for t, n in zip(target, data.shape)):
        raise ShapeError(f"padding {data.shape} to a multiple of {m} would exceed twice the input size")
    return np.pad(data, [(0, t - n) for t, n in zip(target, data.shape)])


def extract_features(volume, bank: FilterBank | None = None) -> np.ndarray:
    """Last-layer feature maps as an ``(n_maps, n_voxels)`` matrix."""
    bank = bank or default_bank()
    x = _pad_to_multiple(_as_array(volume), bank.downsampling)[None]
    for layer in bank.layers:
        x = np.maximum(conv3d(x, layer.weights), 0.0)
        if layer.pool:
            x = avg_pool2(x)
    return x.reshape(x.shape[0], -1)


def gram_matrix(F: np.ndarray) -> np.ndarray:
    """Unnormalized Gram matrix ``F @ F.T``, symmetrized exactly."""
    F = np.asarray(F, dtype=np.float64)
    M = F @ F.T
    return np.triu(M) + np.triu(M, 1).T


def fuse(M: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Row-major flattening of ``M @ F``."""
    M = np.asarray(M, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if M.ndim != 2 or F.ndim != 2 or M.shape != (F.shape[0], F.shape[0]):
        raise ShapeError(f"cannot fuse gram {M.shape} with features {F.shape}")
    return (M @ F).ravel()


def describe(volume, bank: FilterBank | None = None, variant: str = "fused") -> np.ndarray:
    """Flat descriptor of one volume.

    ``variant`` selects the fused ``M F`` descriptor (default), the Gram
    matrix alone, or the raw feature maps; the latter two exist for ablation.
    """
    F = extract_features(volume, bank)
    if variant == "raw":
        return F.ravel()
    M = gram_matrix(F)
    if variant == "gram":
        return M.ravel()
    if variant == "fused":
        return fuse(M, F)
    raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")


class GramFeatureExtractor(TransformerMixin, BaseEstimator):
    """Transformer mapping a stack of volumes ``(n, D, H, W)`` to descriptors.

    Parameters
    ----------
    variant : {"fused", "gram", "raw"}, default="fused"
        Which descriptor to emit.
    bank_seed : int, default=BANK_SEED
        Seed of the fixed filter weights.
    symmetric : bool, default=True
        Mirror-symmetrize the kernels along all three axes.
    """

    def __init__(self, variant="fused", bank_seed=BANK_SEED, symmetric=True):
        self.variant = variant
        self.bank_seed = bank_seed
        self.symmetric = symmetric

    def fit(self, X=None, y=None):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        self.bank_ = default_bank(self.bank_seed, self.symmetric)
        return self

    def transform(self, X):
        check_is_fitted(self, "bank_")
        vols = X if isinstance(X, (list, tuple)) else np.asarray(X, dtype=np.float64)
        if not isinstance(vols, (list, tuple)) and vols.ndim == 3:
            vols = vols[None]
        return np.stack([describe(v, self.bank_, self.variant) for v in vols])
