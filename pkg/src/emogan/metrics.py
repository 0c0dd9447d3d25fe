"""Evaluation metrics: cross-classifier UWAs and the Frechet distance.

metric 1 trains the margin classifier on real data and tests on synthetic
(realism); metric 2 swaps the roles (diversity/coverage). Both report
unweighted accuracy (mean per-class recall; chance is 0.25 for four
balanced classes). The Frechet distance compares Gaussians fitted to an
evaluator network's third-hidden-layer activations of two sample sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ContractViolationError, DegenerateDataError, NumericalDomainError
from .priors import one_hot_of

NUM_CLASSES = 4
REG_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)

EVALUATOR_HIDDEN = 64
EVALUATOR_TAP_LAYER = 3  # ReLU output of the third hidden layer

FID_MIN_SAMPLES = 65
PSD_EIG_FLOOR = -1e-8
PSD_EIG_CLAMP = 1e-10


# ---------------------------------------------------------------------------
# one-vs-rest linear margin classifier (hinge + L2 via projected SGD)

@dataclass
class MarginClassifier:
    """Per-class linear scorers; prediction is the score argmax."""

    weights: np.ndarray  # (num_classes, d)
    biases: np.ndarray   # (num_classes,)
    regularization: float
    classes: np.ndarray
    selection_trace: dict

    def scores(self, features):
        return np.asarray(features, dtype=np.float64) @ self.weights.T + self.biases

    def predict(self, features):
        # np.argmax ties break to the lowest class index
        return self.classes[np.argmax(self.scores(features), axis=1)]


def _fit_binary(x_aug, y_signed, reg, seed, steps, batch):
    """Pegasos: projected subgradient descent with the 1/(reg*t) schedule."""
    rng = np.random.default_rng(seed)
    n, d = x_aug.shape
    w = np.zeros(d)
    radius = 1.0 / np.sqrt(reg)
    for t in range(1, steps + 1):
        idx = rng.integers(0, n, size=min(batch, n))
        xb, yb = x_aug[idx], y_signed[idx]
        margin = yb * (xb @ w)
        viol = margin < 1.0
        eta = 1.0 / (reg * t)
        grad = reg * w
        if viol.any():
            grad = grad - (yb[viol, None] * xb[viol]).sum(axis=0) / len(idx)
        w = w - eta * grad
        norm = np.linalg.norm(w)
        if norm > radius:
            w = w * (radius / norm)
    return w


def _fit_multiclass(features, labels, reg, seed, steps, batch):
    x_aug = np.hstack([features, np.ones((len(features), 1))])
    weights = np.zeros((NUM_CLASSES, x_aug.shape[1]))
    for k in range(NUM_CLASSES):
        y_signed = np.where(labels == k, 1.0, -1.0)
        weights[k] = _fit_binary(x_aug, y_signed, reg, seed + k, steps, batch)
    return weights[:, :-1], weights[:, -1]


def _stratified_holdout(labels, fraction, rng):
    train_idx, val_idx = [], []
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        idx = idx[rng.permutation(len(idx))]
        cut = max(1, int(round(fraction * len(idx))))
        if cut == len(idx) and len(idx) > 1:
            cut -= 1
        train_idx.append(idx[:cut])
        val_idx.append(idx[cut:])
    return np.concatenate(train_idx), np.concatenate(val_idx)


def svm_train(features, labels, reg_grid=REG_GRID, seed=0, steps=1500, batch=256):
    """Train the one-vs-rest hinge classifier with internal model selection.

    The regularization weight is chosen on a stratified 80/20 holdout by
    UWA (ties to the smaller weight), then the winner is refit on all data.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    present = np.unique(labels)
    if len(present) < 2:
        raise DegenerateDataError(
            f"margin classifier needs >= 2 classes, got {len(present)}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))
    tr_idx, va_idx = _stratified_holdout(labels, 0.8, rng)
    trace = {}
    best_reg, best_uwa = None, -1.0
    for reg in reg_grid:
        w, b = _fit_multiclass(features[tr_idx], labels[tr_idx], reg, seed, steps, batch)
        clf = MarginClassifier(w, b, reg, np.arange(NUM_CLASSES), {})
        val_uwa = uwa(clf.predict(features[va_idx]), labels[va_idx]) if len(va_idx) else 0.0
        trace[reg] = val_uwa
        if val_uwa > best_uwa:
            best_reg, best_uwa = reg, val_uwa
    w, b = _fit_multiclass(features, labels, best_reg, seed, steps, batch)
    return MarginClassifier(w, b, best_reg, np.arange(NUM_CLASSES), trace)


def uwa(predictions, labels):
    """Unweighted accuracy: mean of per-class recalls over classes present."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DegenerateDataError("cannot average recalls of an empty set")
    if len(predictions) != len(labels):
        raise ContractViolationError("predictions and labels must align")
    recalls = []
    for k in np.unique(labels):
        mask = labels == k
        recalls.append(float(np.mean(predictions[mask] == k)))
    return float(np.mean(recalls))


def metric1(real_features, real_labels, synth_features, synth_labels, seed=0):
    """UWA on synthetic data of a classifier trained on real data."""
    if len(real_features) == 0 or len(synth_features) == 0:
        raise DegenerateDataError("both sets must be nonempty")
    clf = svm_train(real_features, real_labels, seed=seed)
    return uwa(clf.predict(synth_features), synth_labels)


def metric2(synth_features, synth_labels, real_features, real_labels, seed=0):
    """UWA on real data of a classifier trained on synthetic data."""
    if len(real_features) == 0 or len(synth_features) == 0:
        raise DegenerateDataError("both sets must be nonempty")
    if len(np.unique(synth_labels)) < 2:
        raise DegenerateDataError(
            "synthetic training set collapsed to a single class"
        )
    clf = svm_train(synth_features, synth_labels, seed=seed)
    return uwa(clf.predict(real_features), real_labels)


# ---------------------------------------------------------------------------
# evaluator network and activation statistics

@dataclass
class MetricsReport:
    """Per-fold metric rows plus their per-model means; chance is 0.25."""

    rows: list
    chance_level: float = 0.25

    def models(self):
        seen = []
        for row in self.rows:
            if row["model"] not in seen:
                seen.append(row["model"])
        return seen

    def mean(self, model, key):
        values = [row[key] for row in self.rows if row["model"] == model and key in row]
        if not values:
            raise KeyError(f"no {key!r} values for model {model!r}")
        return float(np.mean(values))


@dataclass
class EvaluatorNet:
    """input -> 64 -> 64 -> 64 -> 64 -> 4 softmax; tap at hidden layer 3."""

    net: nn.Mlp
    epochs_trained: int

    def tap(self, features):
        x = nn.as_matrix(features)
        for layer in self.net.layers[:EVALUATOR_TAP_LAYER]:
            x = nn.Mlp([layer]).forward(x)
        return x


def evaluator_train(features, labels, epochs=30, seed=0, learning_rate=0.01,
                    momentum=0.9, batch_size=64):
    """Softmax cross-entropy training; weights are frozen after return."""
    features = nn.as_matrix(features)
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise DegenerateDataError("evaluator needs a multi-class corpus")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 23]))
    dims = [features.shape[1]] + [EVALUATOR_HIDDEN] * 4 + [NUM_CLASSES]
    net = nn.Mlp.from_dims(dims, ["relu"] * 4 + ["softmax"], rng)
    cfg = nn.SgdConfig(learning_rate, momentum)
    one_hot = one_hot_of(labels, NUM_CLASSES)
    n = len(features)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            out, cache = net.forward(features[idx], want_cache=True)
            _, dout = nn.loss_categorical(out, one_hot[idx])
            grads, _ = net.backward(dout, cache)
            nn.sgd_step(net, grads, cfg)
    return EvaluatorNet(net=net, epochs_trained=epochs)


def activations(evaluator, features):
    """Third-hidden-layer tap vectors (ReLU outputs, hence non-negative)."""
    return evaluator.tap(features)


@dataclass
class GaussianStats:
    """Sample mean and unbiased covariance of a set of tap vectors."""

    mean: np.ndarray
    covariance: np.ndarray

    @classmethod
    def from_samples(cls, samples):
        samples = nn.as_matrix(samples)
        if samples.shape[0] < 2:
            raise DegenerateDataError("need >= 2 samples for a covariance")
        mean = samples.mean(axis=0)
        cov = np.cov(samples, rowvar=False, ddof=1)
        cov = np.atleast_2d(cov)
        cov = 0.5 * (cov + cov.T)
        return cls(mean=mean, covariance=cov)

    def dump(self, path):
        np.savez(path, mean=self.mean, covariance=self.covariance)


def _psd_sqrt(matrix, context):
    lam, vec = np.linalg.eigh(matrix)
    if lam.min() < PSD_EIG_FLOOR:
        raise NumericalDomainError(
            f"{context}: eigenvalue {lam.min():.3e} below the PSD floor"
        )
    lam = np.where(lam < PSD_EIG_CLAMP, 0.0, lam)
    return (vec * np.sqrt(lam)) @ vec.T


def fid(stats_x, stats_g):
    """Frechet distance between two Gaussians.

    The cross term is computed in the symmetric form
    trace((Sx^1/2 Sg Sx^1/2)^1/2), which equals trace((Sx Sg)^1/2) and
    never leaves the symmetric eigenproblem domain.
    """
    mu_x, mu_g = stats_x.mean, stats_g.mean
    sx, sg = stats_x.covariance, stats_g.covariance
    if mu_x.shape != mu_g.shape or sx.shape != sg.shape:
        raise ContractViolationError("statistics dimensions must match")
    diff = mu_x - mu_g
    lam_g = np.linalg.eigvalsh(sg)
    if lam_g.min() < PSD_EIG_FLOOR:
        raise NumericalDomainError(
            f"second covariance: eigenvalue {lam_g.min():.3e} below the PSD floor"
        )
    root_x = _psd_sqrt(sx, "first covariance")
    inner = root_x @ sg @ root_x
    inner = 0.5 * (inner + inner.T)
    lam, _ = np.linalg.eigh(inner)
    if lam.min() < PSD_EIG_FLOOR * max(1.0, abs(lam).max()):
        raise NumericalDomainError("cross-covariance product left the PSD domain")
    lam = np.where(lam < PSD_EIG_CLAMP, 0.0, lam)
    value = float(diff @ diff + np.trace(sx) + np.trace(sg) - 2.0 * np.sqrt(lam).sum())
    if value < -1e-6:
        raise NumericalDomainError(f"distance {value:.3e} below the numerical floor")
    return max(value, 0.0)


def fid_pipeline(evaluator, real_features, synth_features):
    """activations -> GaussianStats -> fid; labels play no role."""
    if len(real_features) < FID_MIN_SAMPLES or len(synth_features) < FID_MIN_SAMPLES:
        raise DegenerateDataError(
            f"need >= {FID_MIN_SAMPLES} samples on both sides for stable covariances"
        )
    stats_real = GaussianStats.from_samples(activations(evaluator, real_features))
    stats_synth = GaussianStats.from_samples(activations(evaluator, synth_features))
    return fid(stats_real, stats_synth)
