"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Arrays are C-contiguous float64; rows are samples.
"""

import numpy as np

LINEAR, RELU, TANH = 0, 1, 2


def dense_forward(x, W, b, act):
    h = x @ W
    h += b
    if act == RELU:
        np.maximum(h, 0.0, out=h)
    elif act == TANH:
        np.tanh(h, out=h)
    return h


def dense_backward(x, W, h, gh, act, need_gx=True):
    """Return ``(gx, gW, gb)`` for ``h = act(x @ W + b)`` given ``dL/dh``."""
    if act == RELU:
        gz = gh * (h > 0.0)
    elif act == TANH:
        gz = gh * (1.0 - h * h)
    else:
        gz = gh
    gW = x.T @ gz
    gb = gz.sum(axis=0)
    gx = gz @ W.T if need_gx else None
    return gx, gW, gb


def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    p -= (lr / bc1) * m / (np.sqrt(v) / np.sqrt(bc2) + eps)


def polyak_update(target, online, tau):
    target[...] = tau * online + (1.0 - tau) * target
