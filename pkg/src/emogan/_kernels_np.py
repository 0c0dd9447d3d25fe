"""Pure-numpy dense-layer kernels.

Fallback implementation of the kernel API in :mod:`emogan.kernels`.
All matrices are C-contiguous float64; activation codes are the indices
of :data:`emogan.nn.ACTIVATIONS` (0 linear, 1 relu, 2 sigmoid, 3 softmax).
"""

import numpy as np


def affine_forward(x, w, b, act):
    """act(x @ w + b) for a full batch."""
    pre = x @ w
    pre += b
    if act == 0:
        return pre
    if act == 1:
        return np.maximum(pre, 0.0, out=pre)
    if act == 2:
        np.negative(pre, out=pre)
        np.exp(pre, out=pre)
        pre += 1.0
        np.reciprocal(pre, out=pre)
        return pre
    if act == 3:
        pre -= pre.max(axis=1, keepdims=True)
        np.exp(pre, out=pre)
        pre /= pre.sum(axis=1, keepdims=True)
        return pre
    raise ValueError(f"unknown activation code {act}")


def affine_backward(dout, x, w, out, act):
    """Gradients of act(x @ w + b): returns (dx, dw, db).

    `out` is the forward result; relu/sigmoid/softmax derivatives are
    evaluated from it, so no pre-activation values need caching.
    """
    if act == 0:
        dpre = dout
    elif act == 1:
        dpre = dout * (out > 0.0)
    elif act == 2:
        dpre = dout * out * (1.0 - out)
    elif act == 3:
        dot = np.sum(dout * out, axis=1, keepdims=True)
        dpre = out * (dout - dot)
    else:
        raise ValueError(f"unknown activation code {act}")
    dw = x.T @ dpre
    db = dpre.sum(axis=0)
    dx = dpre @ w.T
    return dx, dw, db


def sgd_update(param, vel, grad, lr, momentum):
    """In-place classical-momentum step on flat float64 views."""
    vel *= momentum
    vel -= lr * grad
    param += vel
