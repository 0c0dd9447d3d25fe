"""Corpus ingestion, synthetic desk-scale corpora, splits, balancing,
standardization.

Feature CSV schema: UTF-8, comma-separated, '.' decimal, one header row.
Feature columns are every column that is not the label column or the
optional session column; labels are the strings angry/sad/neutral/happy,
mapped to 0..3 in that fixed order everywhere in the package.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, DegenerateDataError, ParseError

LABEL_NAMES = ("angry", "sad", "neutral", "happy")
LABEL_TO_ID = {name: i for i, name in enumerate(LABEL_NAMES)}
NUM_CLASSES = 4


@dataclass
class Corpus:
    """Labeled feature vectors with optional per-sample session tags."""

    features: np.ndarray          # (n, d) float64
    labels: np.ndarray            # (n,) int in 0..3
    sessions: np.ndarray | None = None  # (n,) str
    name: str = "corpus"

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ContractViolationError("features (n, d) and labels (n,) required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise ContractViolationError("labels must lie in 0..3")
        if self.sessions is not None:
            self.sessions = np.asarray(self.sessions, dtype=object)
            if self.sessions.shape != self.labels.shape:
                raise ContractViolationError("sessions must align with samples")

    def __len__(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]

    def class_histogram(self):
        return np.bincount(self.labels, minlength=NUM_CLASSES)

    def subset(self, indices, name=None):
        idx = np.asarray(indices)
        return Corpus(
            features=self.features[idx],
            labels=self.labels[idx],
            sessions=None if self.sessions is None else self.sessions[idx],
            name=name or self.name,
        )


def load_csv(path, label_column="label", session_column=None):
    """Read a feature CSV into a Corpus; parse errors carry the file row."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required")
        if label_column not in header:
            raise ParseError(f"{path}: no {label_column!r} column in header")
        label_idx = header.index(label_column)
        session_idx = None
        if session_column is not None:
            if session_column not in header:
                raise ParseError(f"{path}: no {session_column!r} column in header")
            session_idx = header.index(session_column)
        feat_idx = [i for i in range(len(header)) if i not in (label_idx, session_idx)]
        rows, labels, sessions = [], [], []
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}",
                    row=rownum,
                )
            raw = row[label_idx].strip()
            if raw not in LABEL_TO_ID:
                raise ParseError(
                    f"{path}: row {rownum}: unknown label {raw!r} "
                    f"(expected one of {', '.join(LABEL_NAMES)})",
                    row=rownum,
                )
            labels.append(LABEL_TO_ID[raw])
            try:
                rows.append([float(row[i]) for i in feat_idx])
            except ValueError as exc:
                raise ParseError(f"{path}: row {rownum}: non-numeric cell ({exc})", row=rownum)
            if session_idx is not None:
                sessions.append(row[session_idx].strip())
        if not rows:
            raise ParseError(f"{path}: no data rows")
        return Corpus(
            features=np.array(rows, dtype=np.float64),
            labels=np.array(labels),
            sessions=np.array(sessions, dtype=object) if session_idx is not None else None,
            name=str(path),
        )


def save_csv(corpus, path):
    """Write a Corpus back in the load format (round-trip identity)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        header = [f"f{i}" for i in range(corpus.feature_dim)] + ["label"]
        if corpus.sessions is not None:
            header.append("session")
        writer.writerow(header)
        for i in range(len(corpus)):
            row = [repr(float(v)) for v in corpus.features[i]]
            row.append(LABEL_NAMES[corpus.labels[i]])
            if corpus.sessions is not None:
                row.append(corpus.sessions[i])
            writer.writerow(row)


def make_toy_corpus(feature_dim=64, per_class=500, class_mean_separation=6.0,
                    noise_stddev=1.0, seed=0, name="toy", direction_seed=None,
                    mean_shift=0.0):
    """Desk-scale 4-class Gaussian corpus with 5 round-robin pseudo-sessions.

    Class means sit on random orthonormal directions scaled by the
    separation, so classes are mutually distant whenever separation
    dominates the noise. Pass the same `direction_seed` with a nonzero
    `mean_shift` to derive a second corpus with identical class geometry
    but a global covariate shift (a cross-corpus stand-in).
    """
    if feature_dim < 4:
        raise ContractViolationError("feature_dim must be >= 4")
    dir_rng = np.random.default_rng(seed if direction_seed is None else direction_seed)
    q, _ = np.linalg.qr(dir_rng.standard_normal((feature_dim, NUM_CLASSES)))
    means = class_mean_separation * q.T  # (4, d), orthonormal directions
    shift = dir_rng.standard_normal(feature_dim)
    means = means + mean_shift * shift / np.linalg.norm(shift)
    rng = np.random.default_rng(seed)
    n = per_class * NUM_CLASSES
    labels = np.repeat(np.arange(NUM_CLASSES), per_class)
    features = means[labels] + noise_stddev * rng.standard_normal((n, feature_dim))
    sessions = np.array([f"s{i % 5 + 1}" for i in range(n)], dtype=object)
    return Corpus(features=features, labels=labels, sessions=sessions, name=name)


@dataclass
class SplitPlan:
    """How to fold a corpus: by session, by ratio, or explicitly."""

    mode: str = "leave-one-session-out"
    ratio: float = 0.8
    seed: int = 0
    explicit: list | None = None  # list of (train_idx, val_idx)


def split(corpus, plan):
    """Returns a list of (train, validation) Corpus pairs.

    Leave-one-session-out yields one fold per distinct session; folds
    partition the corpus.
    """
    if plan.mode == "leave-one-session-out":
        if corpus.sessions is None:
            raise ContractViolationError("leave-one-session-out requires session ids")
        session_names = sorted(set(corpus.sessions))
        folds = []
        for s in session_names:
            val_mask = corpus.sessions == s
            val_idx = np.flatnonzero(val_mask)
            train_idx = np.flatnonzero(~val_mask)
            folds.append(
                (corpus.subset(train_idx, f"{corpus.name}/train-not-{s}"),
                 corpus.subset(val_idx, f"{corpus.name}/val-{s}"))
            )
        return folds
    if plan.mode == "ratio":
        rng = np.random.default_rng(plan.seed)
        order = rng.permutation(len(corpus))
        cut = int(round(plan.ratio * len(corpus)))
        return [(corpus.subset(order[:cut], f"{corpus.name}/train"),
                 corpus.subset(order[cut:], f"{corpus.name}/val"))]
    if plan.mode == "explicit":
        if not plan.explicit:
            raise ContractViolationError("explicit mode needs fold index lists")
        return [(corpus.subset(tr), corpus.subset(va)) for tr, va in plan.explicit]
    raise ContractViolationError(f"unknown split mode {plan.mode!r}")


def balance(corpus, seed=0):
    """Downsample every class to the minority-class count (seeded)."""
    hist = corpus.class_histogram()
    if (hist == 0).any():
        missing = LABEL_NAMES[int(np.argmin(hist))]
        raise DegenerateDataError(f"cannot balance: class {missing!r} is empty")
    target = int(hist.min())
    rng = np.random.default_rng(seed)
    keep = []
    for k in range(NUM_CLASSES):
        idx = np.flatnonzero(corpus.labels == k)
        keep.append(rng.choice(idx, size=target, replace=False))
    keep = np.sort(np.concatenate(keep))
    return corpus.subset(keep, f"{corpus.name}/balanced")


class Standardizer:
    """Per-feature z-scoring fitted on a training split only."""

    STD_FLOOR = 1e-8

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.maximum(np.asarray(std, dtype=np.float64), self.STD_FLOOR)

    @classmethod
    def fit(cls, features):
        features = np.asarray(features, dtype=np.float64)
        return cls(features.mean(axis=0), features.std(axis=0))

    def transform(self, features):
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, features):
        return np.asarray(features, dtype=np.float64) * self.std + self.mean

    def transform_corpus(self, corpus):
        return Corpus(
            features=self.transform(corpus.features),
            labels=corpus.labels.copy(),
            sessions=None if corpus.sessions is None else corpus.sessions.copy(),
            name=corpus.name,
        )
