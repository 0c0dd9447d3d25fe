"""Fully connected networks: forward/backward, losses, SGD with momentum.

Matrices are 2-D C-contiguous float64 numpy arrays (row = sample). An
:class:`Mlp` is an ordered stack of affine layers with per-layer activation
and zero-initialized momentum buffers; the hot per-layer kernels are
dispatched through :mod:`emogan.kernels`.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractViolationError, DivergenceError, ShapeError

ACTIVATIONS = ("linear", "relu", "sigmoid", "softmax")

BCE_EPS = 1e-7

CHECKPOINT_MAGIC = b"EMLP"
CHECKPOINT_VERSION = 1


def as_matrix(x):
    """Validate/coerce to a C-contiguous float64 2-D array."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


class Layer:
    """One affine layer: weight (in, out), bias (out,), activation tag."""

    __slots__ = ("weight", "bias", "activation", "vel_w", "vel_b")

    def __init__(self, weight, bias, activation):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.weight = np.ascontiguousarray(weight, dtype=np.float64)
        self.bias = np.ascontiguousarray(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(
                f"layer shapes do not match: weight {self.weight.shape}, bias {self.bias.shape}"
            )
        self.activation = activation
        self.vel_w = np.zeros_like(self.weight)
        self.vel_b = np.zeros_like(self.bias)

    @property
    def in_dim(self):
        return self.weight.shape[0]

    @property
    def out_dim(self):
        return self.weight.shape[1]


@dataclass
class SgdConfig:
    """Plain SGD with classical momentum."""

    learning_rate: float
    momentum: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


class ForwardCache:
    """Per-layer inputs and outputs captured by a forward pass.

    Tied to the producing network and its parameter version; backward
    refuses a cache that is stale or from a different network.
    """

    __slots__ = ("net", "version", "inputs", "outputs")

    def __init__(self, net, version, inputs, outputs):
        self.net = net
        self.version = version
        self.inputs = inputs
        self.outputs = outputs


class Mlp:
    """Ordered stack of affine layers with chained dimensions."""

    def __init__(self, layers):
        layers = list(layers)
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}"
                )
        self.layers = layers
        self._version = 0

    @classmethod
    def from_dims(cls, dims, activations, rng):
        """Glorot-uniform weights, zero biases, from a seeded generator."""
        if len(activations) != len(dims) - 1:
            raise ShapeError("need one activation per layer")
        layers = []
        for fan_in, fan_out, act in zip(dims, dims[1:], activations):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            layers.append(Layer(w, np.zeros(fan_out), act))
        return cls(layers)

    @property
    def dims(self):
        if not self.layers:
            return ()
        return tuple([self.layers[0].in_dim] + [l.out_dim for l in self.layers])

    @property
    def num_params(self):
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def forward(self, batch, want_cache=False):
        """Run the batch through every layer.

        Returns the output matrix, or ``(output, cache)`` when
        ``want_cache`` is set; the cache is what :meth:`backward` consumes.
        """
        x = as_matrix(batch)
        if self.layers and x.shape[1] != self.layers[0].in_dim:
            raise ShapeError(
                f"batch width {x.shape[1]} does not match layer 0 input dim "
                f"{self.layers[0].in_dim}"
            )
        inputs, outputs = [], []
        for i, layer in enumerate(self.layers):
            if x.shape[1] != layer.in_dim:
                raise ShapeError(f"layer {i} expects width {layer.in_dim}, got {x.shape[1]}")
            inputs.append(x)
            x = kernels.affine_forward(
                x, layer.weight, layer.bias, ACTIVATIONS.index(layer.activation)
            )
            outputs.append(x)
        if want_cache:
            return x, ForwardCache(self, self._version, inputs, outputs)
        return x

    def backward(self, upstream_gradient, cache):
        """Backpropagate; returns (per-layer [(dW, db), ...], input gradient)."""
        if cache.net is not self:
            raise ContractViolationError("cache was produced by a different network")
        if cache.version != self._version:
            raise ContractViolationError("stale cache: parameters changed since forward")
        if len(cache.inputs) != len(self.layers):
            raise ContractViolationError("cache does not cover every layer")
        dx = as_matrix(upstream_gradient)
        if self.layers and dx.shape != cache.outputs[-1].shape:
            raise ShapeError(
                f"upstream gradient shape {dx.shape} does not match output "
                f"shape {cache.outputs[-1].shape}"
            )
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            dx, dw, db = kernels.affine_backward(
                np.ascontiguousarray(dx),
                cache.inputs[i],
                layer.weight,
                cache.outputs[i],
                ACTIVATIONS.index(layer.activation),
            )
            grads[i] = (dw, db)
        return grads, dx


def sgd_step(net, grads, config):
    """One in-place momentum step: v <- m*v - lr*g; p <- p + v."""
    if len(grads) != len(net.layers):
        raise ShapeError("need one (dW, db) pair per layer")
    for i, (layer, (dw, db)) in enumerate(zip(net.layers, grads)):
        if dw.shape != layer.weight.shape or db.shape != layer.bias.shape:
            raise ShapeError(f"gradient shapes do not match parameters at layer {i}")
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            raise DivergenceError(f"non-finite gradient at layer {i}", layer=i)
    for layer, (dw, db) in zip(net.layers, grads):
        kernels.sgd_update(
            layer.weight.ravel(), layer.vel_w.ravel(), np.ascontiguousarray(dw).ravel(),
            config.learning_rate, config.momentum,
        )
        kernels.sgd_update(
            layer.bias, layer.vel_b, np.ascontiguousarray(db),
            config.learning_rate, config.momentum,
        )
    net._version += 1


def accumulate_grads(a, b):
    """Elementwise sum of two per-layer gradient lists."""
    return [(dwa + dwb, dba + dbb) for (dwa, dba), (dwb, dbb) in zip(a, b)]


def params_checksum(net):
    """Order-sensitive checksum over all parameters (bit-level)."""
    crc = 0
    for layer in net.layers:
        crc = zlib.crc32(layer.weight.tobytes(), crc)
        crc = zlib.crc32(layer.bias.tobytes(), crc)
    return crc


def momentum_checksum(net):
    crc = 0
    for layer in net.layers:
        crc = zlib.crc32(layer.vel_w.tobytes(), crc)
        crc = zlib.crc32(layer.vel_b.tobytes(), crc)
    return crc


# ---------------------------------------------------------------------------
# losses: each returns (scalar, gradient w.r.t. the prediction argument)

def loss_mse(prediction, target):
    """Mean over the batch of the squared L2 reconstruction distance."""
    p = as_matrix(prediction)
    t = as_matrix(target)
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} vs target {t.shape}")
    diff = p - t
    n = p.shape[0]
    value = float(np.sum(diff * diff)) / n
    return value, (2.0 / n) * diff


def loss_bce(probability, label):
    """Mean binary cross-entropy on sigmoid outputs.

    `probability` is one column per row (shape (n,) or (n, 1)); `label` is
    0/1 per row. Probabilities are clamped to [1e-7, 1 - 1e-7] before the
    log, and the gradient is zero where the clamp is active.
    """
    p = np.asarray(probability, dtype=np.float64)
    orig_shape = p.shape
    p = p.reshape(p.shape[0], -1)
    if p.shape[1] != 1:
        raise ShapeError(f"expected one probability per row, got shape {orig_shape}")
    y = np.asarray(label, dtype=np.float64).reshape(-1)
    if y.shape[0] != p.shape[0]:
        raise ShapeError(f"{p.shape[0]} probabilities vs {y.shape[0]} labels")
    n = p.shape[0]
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    yc = y.reshape(-1, 1)
    value = float(-np.sum(yc * np.log(pc) + (1.0 - yc) * np.log(1.0 - pc))) / n
    grad = (pc - yc) / (pc * (1.0 - pc) * n)
    grad[(p < BCE_EPS) | (p > 1.0 - BCE_EPS)] = 0.0
    return value, grad.reshape(orig_shape)


def loss_categorical(softmax_output, one_hot):
    """Mean negative log-likelihood of the true class under softmax rows."""
    q = as_matrix(softmax_output)
    y = as_matrix(one_hot)
    if q.shape != y.shape:
        raise ShapeError(f"softmax {q.shape} vs one-hot {y.shape}")
    row_sums = q.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise ContractViolationError("softmax rows must sum to 1 within 1e-6")
    is_one = np.abs(y - 1.0) < 1e-12
    if np.any((y != 0.0) & ~is_one) or np.any(is_one.sum(axis=1) != 1):
        raise ContractViolationError("labels must be valid one-hot rows")
    n = q.shape[0]
    qc = np.clip(q, BCE_EPS, None)
    value = float(-np.sum(y * np.log(qc))) / n
    # gradient of the clamped loss: zero where the clamp is active
    grad = np.where(is_one & (q >= BCE_EPS), -1.0 / (qc * n), 0.0)
    return value, grad


# ---------------------------------------------------------------------------
# finite-difference harness

@dataclass
class GradCheckReport:
    passed: bool
    worst_rel_error: float
    worst_layer: int | None
    worst_param: str | None
    worst_index: int | None
    tolerance: float
    num_params: int

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        loc = (
            f"layer {self.worst_layer} {self.worst_param}[{self.worst_index}]"
            if self.worst_layer is not None
            else "n/a"
        )
        return (
            f"gradient check {status}: worst rel error {self.worst_rel_error:.3e} "
            f"at {loc} over {self.num_params} params (tol {self.tolerance:g})"
        )


def gradient_check(net, batch, loss_fn, tolerance=1e-4, step=1e-5, analytic=None):
    """Compare analytic parameter gradients against central differences.

    `loss_fn(output) -> (scalar, grad)` closes over any targets. Pass
    `analytic` to check an externally supplied gradient list instead of the
    network's own backward (used to exercise fault detection).
    """
    if net.num_params >= 10_000:
        raise ContractViolationError(
            f"gradient_check is for small nets (<1e4 params), got {net.num_params}"
        )
    batch = as_matrix(batch)
    if analytic is None:
        out, cache = net.forward(batch, want_cache=True)
        _, dout = loss_fn(out)
        analytic, _ = net.backward(dout, cache)

    def loss_at():
        value, _ = loss_fn(net.forward(batch))
        return value

    worst = 0.0
    worst_loc = (None, None, None)
    for i, layer in enumerate(net.layers):
        for name, param, grad in (
            ("weight", layer.weight, analytic[i][0]),
            ("bias", layer.bias, analytic[i][1]),
        ):
            flat = param.ravel()
            gflat = np.asarray(grad).ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                up = loss_at()
                flat[j] = orig - step
                down = loss_at()
                flat[j] = orig
                fd = (up - down) / (2.0 * step)
                rel = abs(gflat[j] - fd) / max(abs(gflat[j]), abs(fd), 1e-8)
                if rel > worst:
                    worst = rel
                    worst_loc = (i, name, j)
    return GradCheckReport(
        passed=worst < tolerance,
        worst_rel_error=worst,
        worst_layer=worst_loc[0],
        worst_param=worst_loc[1],
        worst_index=worst_loc[2],
        tolerance=tolerance,
        num_params=net.num_params,
    )


# ---------------------------------------------------------------------------
# checkpoint container: magic, version byte, JSON header, raw float64 params

def save_mlp(net, path_or_file, seed=None, config=None):
    """Write a self-describing checkpoint (dims, activations, params, seed)."""
    header = {
        "dims": list(net.dims),
        "activations": [l.activation for l in net.layers],
        "seed": seed,
        "config": config,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "wb") if own else path_or_file
    try:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<B", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for layer in net.layers:
            f.write(np.ascontiguousarray(layer.weight).astype("<f8").tobytes())
            f.write(np.ascontiguousarray(layer.bias).astype("<f8").tobytes())
    finally:
        if own:
            f.close()


def load_mlp(path_or_file):
    """Read a checkpoint written by :func:`save_mlp`; returns (Mlp, header)."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "rb") if own else path_or_file
    try:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ContractViolationError(f"bad checkpoint magic {magic!r}")
        (version,) = struct.unpack("<B", f.read(1))
        if version != CHECKPOINT_VERSION:
            raise ContractViolationError(f"unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        dims = header["dims"]
        layers = []
        for fan_in, fan_out, act in zip(dims, dims[1:], header["activations"]):
            w = np.frombuffer(f.read(8 * fan_in * fan_out), dtype="<f8")
            w = w.reshape(fan_in, fan_out).copy()
            b = np.frombuffer(f.read(8 * fan_out), dtype="<f8").copy()
            layers.append(Layer(w, b, act))
        return Mlp(layers), header
    finally:
        if own:
            f.close()


def dumps_mlp(net, seed=None, config=None):
    buf = io.BytesIO()
    save_mlp(net, buf, seed=seed, config=config)
    return buf.getvalue()


def loads_mlp(data):
    return load_mlp(io.BytesIO(data))
