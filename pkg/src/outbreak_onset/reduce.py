"""Dimensionality reduction of descriptors: an SGD-trained autoencoder and a PCA oracle."""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DivergenceError, InsufficientDataError, ShapeError

logger = logging.getLogger(__name__)

# Full-size widths used on 131072-dim descriptors were
# encoder 4096-2048-1024-512, decoder 1024-2048-4096-131072 (lr 1, 100 epochs).
DEFAULT_ENCODER = (512, 128, 32)

_MAGIC = b"OOAE"


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class MinMaxScaler01:
    """Per-dimension min-max scaling into [0, 1]; constant columns map to 0.5."""

    def fit(self, X):
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        # shift constant columns so they land mid-range of the sigmoid output
        self.min_ = np.where(span > 0, lo, lo - 0.5)
        self.scale_ = np.where(span > 0, span, 1.0)
        return self

    def transform(self, X):
        return (X - self.min_) / self.scale_


class MLP:
    """Dense ReLU network with an optional sigmoid output, trained by backprop."""

    def __init__(self, widths, sigmoid_output=True, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.widths = tuple(int(w) for w in widths)
        self.sigmoid_output = sigmoid_output
        self.weights = []
        self.biases = []
        for n_in, n_out in zip(self.widths[:-1], self.widths[1:]):
            self.weights.append(rng.standard_normal((n_in, n_out)) * np.sqrt(2.0 / n_in))
            self.biases.append(np.zeros(n_out))

    @property
    def params(self):
        return self.weights + self.biases

    def forward(self, X, upto=None):
        """Return the list of activations, input first."""
        acts = [X]
        n = len(self.weights) if upto is None else upto
        last = len(self.weights) - 1
        for i in range(n):
            z = acts[-1] @ self.weights[i] + self.biases[i]
            if i == last and self.sigmoid_output:
                acts.append(_sigmoid(z))
            else:
                acts.append(np.maximum(z, 0.0))
        return acts

    def loss_and_grads(self, X, Y):
        """MSE (mean over all entries) and its gradients w.r.t. weights and biases."""
        acts = self.forward(X)
        out = acts[-1]
        diff = out - Y
        loss = float(np.mean(diff**2))
        delta = 2.0 * diff / diff.size
        last = len(self.weights) - 1
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for i in range(last, -1, -1):
            if i == last and self.sigmoid_output:
                delta = delta * out * (1.0 - out)
            else:
                delta = delta * (acts[i + 1] > 0)
            gW[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i:
                delta = delta @ self.weights[i].T
        return loss, gW, gb


_COMPRESSIONS = {"none": lambda X: X, "cbrt": np.cbrt}


class SGDAutoencoder(TransformerMixin, BaseEstimator):
    """Fully connected autoencoder trained with plain mini-batch SGD on MSE.

    Inputs are optionally compressed elementwise, then min-max scaled per
    dimension to match the sigmoid output. ``transform`` returns the
    bottleneck activations.

    Parameters
    ----------
    encoder_widths : tuple of int
        Hidden widths of the encoder; the last one is the embedding size.
    learning_rate : float, default=0.1
    epochs : int, default=100
    batch_size : int, default=16
    random_state : int, default=0
        Seeds weight init and per-epoch shuffling.
    compression : {"cbrt", "none"}, default="cbrt"
        Elementwise map applied before scaling. Fused descriptors are cubic
        in the anomaly amplitude; the cube root makes them linear again.
    """

    def __init__(self, encoder_widths=DEFAULT_ENCODER, learning_rate=0.1, epochs=100, batch_size=16, random_state=0,
                 compression="cbrt"):
        self.encoder_widths = encoder_widths
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state
        self.compression = compression

    @property
    def n_components(self):
        return int(self.encoder_widths[-1])

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        n, d = X.shape
        enc = tuple(int(w) for w in self.encoder_widths)
        if not enc or min(enc) <= 0:
            raise ValueError(f"encoder widths must be positive, got {self.encoder_widths}")
        widths = (d, *enc, *enc[-2::-1], d)
        if self.compression not in _COMPRESSIONS:
            raise ValueError(f"unknown compression {self.compression!r}; choose from {sorted(_COMPRESSIONS)}")
        rng = np.random.default_rng(self.random_state)
        X = _COMPRESSIONS[self.compression](X)
        self.scaler_ = MinMaxScaler01().fit(X)
        Xs = self.scaler_.transform(X)
        self.net_ = MLP(widths, sigmoid_output=True, rng=rng)
        self.n_features_in_ = d

        # overflow shows up as a non-finite loss below, so silence the warnings
        with np.errstate(over="ignore", invalid="ignore"):
            self._train(Xs, rng)
        logger.info("autoencoder mse %.5g -> %.5g", self.loss_curve_[0], self.loss_curve_[-1])
        return self

    def _train(self, Xs, rng):
        n = len(Xs)
        self.loss_curve_ = [self._mse(Xs)]
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = Xs[order[start:start + self.batch_size]]
                loss, gW, gb = self.net_.loss_and_grads(batch, batch)
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"loss became {loss} in epoch {epoch}; lower learning_rate (now {self.learning_rate})"
                    )
                for p, g in zip(self.net_.params, gW + gb):
                    p -= self.learning_rate * g
            epoch_loss = self._mse(Xs)
            if not np.isfinite(epoch_loss):
                raise DivergenceError(
                    f"loss became {epoch_loss} after epoch {epoch}; lower learning_rate (now {self.learning_rate})"
                )
            self.loss_curve_.append(epoch_loss)
        if self.epochs and self.loss_curve_[-1] > self.loss_curve_[0]:
            raise DivergenceError(
                f"loss rose from {self.loss_curve_[0]:.4g} to {self.loss_curve_[-1]:.4g}; "
                f"lower learning_rate (now {self.learning_rate})"
            )

    def _mse(self, Xs):
        return float(np.mean((self.net_.forward(Xs)[-1] - Xs) ** 2))

    def _scaled(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.scaler_.transform(_COMPRESSIONS[self.compression](X))

    def transform(self, X):
        n_enc = len(self.encoder_widths)
        return self.net_.forward(self._scaled(X), upto=n_enc)[-1]

    def reconstruct(self, X):
        """Reconstruction in the scaled [0, 1] input space."""
        return self.net_.forward(self._scaled(X))[-1]

    def reconstruction_mse(self, X):
        return self._mse(self._scaled(X))

    def save(self, path) -> Path:
        """Flat little-endian float64 blob behind a JSON header."""
        check_is_fitted(self, "net_")
        path = Path(path)
        header = {
            "widths": list(self.net_.widths),
            "encoder_widths": [int(w) for w in self.encoder_widths],
            "seed": self.random_state,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "compression": self.compression,
            "final_mse": self.loss_curve_[-1],
        }
        blob = json.dumps(header, sort_keys=True).encode()
        arrays = [self.scaler_.min_, self.scaler_.scale_, *self.net_.weights, *self.net_.biases]
        with open(path, "wb") as fh:
            fh.write(_MAGIC + struct.pack("<Q", len(blob)) + blob)
            for a in arrays:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return path

    @classmethod
    def load(cls, path) -> SGDAutoencoder:
        raw = Path(path).read_bytes()
        if raw[:4] != _MAGIC:
            raise ValueError(f"{path}: not an autoencoder weight file")
        (hlen,) = struct.unpack("<Q", raw[4:12])
        header = json.loads(raw[12:12 + hlen])
        flat = np.frombuffer(raw[12 + hlen:], dtype="<f8")
        widths = header["widths"]
        model = cls(
            encoder_widths=tuple(header["encoder_widths"]),
            learning_rate=header["learning_rate"],
            epochs=header["epochs"],
            batch_size=header["batch_size"],
            random_state=header["seed"],
            compression=header.get("compression", "none"),
        )
        d = widths[0]
        pos = 0

        def take(shape):
            nonlocal pos
            size = int(np.prod(shape))
            out = flat[pos:pos + size].reshape(shape).copy()
            pos += size
            return out

        model.scaler_ = MinMaxScaler01()
        model.scaler_.min_ = take((d,))
        model.scaler_.scale_ = take((d,))
        model.net_ = MLP(widths)
        model.net_.weights = [take((a, b)) for a, b in zip(widths[:-1], widths[1:])]
        model.net_.biases = [take((b,)) for b in widths[1:]]
        model.n_features_in_ = d
        model.loss_curve_ = [header["final_mse"]]
        return model


def pca_reduce(X, n_components):
    """Project ``X`` onto its top principal components via covariance eigendecomposition.

    Returns ``(embedding, components, mean, eigenvalues)``. ``components`` has
    shape ``(n_components, d)``; when the data has fewer dimensions than
    requested the extra components (and embedding columns) are zero.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < n_components + 1:
        raise InsufficientDataError(f"need at least {n_components + 1} rows, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    if d <= n:
        cov = Xc.T @ Xc / n
        evals, evecs = np.linalg.eigh(cov)
        evals, evecs = evals[::-1], evecs[:, ::-1]
    else:
        # dual form for wide data: eigenvectors of the n x n Gram matrix
        K = Xc @ Xc.T / n
        evals, U = np.linalg.eigh(K)
        evals, U = evals[::-1], U[:, ::-1]
        pos = evals > evals[0] * 1e-12 if evals[0] > 0 else np.zeros_like(evals, dtype=bool)
        evecs = np.zeros((d, n))
        evecs[:, pos] = Xc.T @ U[:, pos] / np.sqrt(n * evals[pos])
    evals = np.clip(evals, 0.0, None)
    k = min(n_components, evecs.shape[1])
    comps = np.zeros((n_components, d))
    comps[:k] = evecs[:, :k].T
    # deterministic sign: largest-magnitude loading positive
    for row in comps[:k]:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1
    eig = np.zeros(max(n_components, len(evals)))
    eig[: len(evals)] = evals
    return Xc @ comps.T, comps, mean, eig


class PCAReducer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`pca_reduce`."""

    def __init__(self, n_components=32):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        _, self.components_, self.mean_, eig = pca_reduce(X, self.n_components)
        self.explained_variance_ = eig[: self.n_components]
        self.discarded_variance_ = float(eig[self.n_components:].sum())
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        check_is_fitted(self, "components_")
        return np.asarray(Z) @ self.components_ + self.mean_
