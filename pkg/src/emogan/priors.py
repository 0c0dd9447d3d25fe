"""Sampleable latent distributions and the one-hot label source.

All sampling goes through ``numpy.random.default_rng`` (PCG64), so a fixed
seed replays bit-identically. Mixture sampling draws the component id
first, then the component's Gaussian, so every sample carries an exact
ground-truth component label.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError


def _as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


@dataclass
class MixturePrior:
    """Finite 2-D Gaussian mixture; the M1/M2 latent distribution."""

    means: np.ndarray       # (k, 2)
    covariances: np.ndarray  # (k, 2, 2), symmetric PSD
    weights: np.ndarray     # (k,), sums to 1
    _chols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        k = self.means.shape[0]
        if self.covariances.shape != (k, self.dim, self.dim) or self.weights.shape != (k,):
            raise ContractViolationError("mixture component shapes do not agree")
        if abs(self.weights.sum() - 1.0) > 1e-9 or (self.weights < 0).any():
            raise ContractViolationError("mixture weights must sum to 1")
        for c in self.covariances:
            if not np.allclose(c, c.T, atol=1e-12):
                raise ContractViolationError("covariances must be symmetric")
        # Cholesky also certifies positive (semi)definiteness
        try:
            self._chols = np.linalg.cholesky(self.covariances + 1e-12 * np.eye(self.dim))
        except np.linalg.LinAlgError as exc:
            raise ContractViolationError("covariances must be PSD") from exc

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def num_components(self):
        return self.means.shape[0]

    def sample(self, n, seed):
        """n draws; returns (samples (n, dim), component ids (n,))."""
        if n < 1:
            raise ContractViolationError("need n >= 1")
        rng = _as_rng(seed)
        comp = rng.choice(self.num_components, size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dim))
        samples = self.means[comp] + np.einsum("nij,nj->ni", self._chols[comp], eps)
        return samples, comp

    def sample_component(self, component, n, seed):
        """n draws from one fixed component."""
        if not 0 <= component < self.num_components:
            raise ContractViolationError(f"unknown component {component}")
        rng = _as_rng(seed)
        eps = rng.standard_normal((n, self.dim))
        return self.means[component] + eps @ self._chols[component].T

    def config(self):
        return {
            "kind": "mixture",
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass
class NormalPrior:
    """Isotropic standard normal of a given dimension; the M3 latent."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ContractViolationError("dim must be >= 1")

    def sample(self, n, seed):
        if n < 1:
            raise ContractViolationError("need n >= 1")
        rng = _as_rng(seed)
        return rng.standard_normal((n, self.dim))

    def config(self):
        return {"kind": "normal", "dim": self.dim}


@dataclass
class LabelSource:
    """Uniform categorical label emitter (one-hot rows)."""

    num_classes: int = 4

    def one_hot(self, n, seed):
        """Returns (one-hot matrix (n, k), class ids (n,))."""
        if n < 1:
            raise ContractViolationError("need n >= 1")
        rng = _as_rng(seed)
        ids = rng.integers(0, self.num_classes, size=n)
        return np.eye(self.num_classes)[ids], ids


def orthogonal_mixture(separation=3.0, stddev=0.5):
    """Four equal-weight isotropic Gaussians on the +-x / +-y axes.

    Adjacent means are orthogonal as 2-D vectors; this is the densest
    orthogonal placement possible in the plane.
    """
    if separation <= 0 or stddev <= 0:
        raise ContractViolationError("separation and stddev must be positive")
    means = separation * np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    cov = np.tile(stddev**2 * np.eye(2), (4, 1, 1))
    return MixturePrior(means=means, covariances=cov, weights=np.full(4, 0.25))


def one_hot_of(ids, num_classes=4):
    """One-hot rows for given integer class ids."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= num_classes):
        raise ContractViolationError("class id out of range")
    return np.eye(num_classes)[ids]


def prior_from_config(cfg):
    if cfg["kind"] == "mixture":
        return MixturePrior(
            means=np.array(cfg["means"]),
            covariances=np.array(cfg["covariances"]),
            weights=np.array(cfg["weights"]),
        )
    if cfg["kind"] == "normal":
        return NormalPrior(dim=int(cfg["dim"]))
    raise ContractViolationError(f"unknown prior kind {cfg['kind']!r}")
