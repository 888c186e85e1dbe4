"""
Differentiable operations over Tensor

Activations are 2-D (rows x features); a changeset is one query row and its
edits are n key/value rows.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ovid.errors import EmptyKeySet, InvalidRate, ShapeMismatch
from ovid.neural.tensor import Parameter, Tensor, unbroadcast

LAYER_NORM_EPS = 1e-5
BCE_CLAMP = 1e-12


def add(a: Tensor, b: Tensor) -> Tensor:
    def _backward(g):
        a.grad += unbroadcast(g, a.shape)
        b.grad += unbroadcast(g, b.shape)

    return Tensor(a.value + b.value, (a, b), _backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def _backward(g):
        a.grad += unbroadcast(g * b.value, a.shape)
        b.grad += unbroadcast(g * a.value, b.shape)

    return Tensor(a.value * b.value, (a, b), _backward)


def scale(a: Tensor, c: float) -> Tensor:
    def _backward(g):
        a.grad += g * c

    return Tensor(a.value * c, (a,), _backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"Cannot multiply {a.shape} by {b.shape}")

    def _backward(g):
        a.grad += g @ b.value.T
        b.grad += a.value.T @ g

    return Tensor(a.value @ b.value, (a, b), _backward)


def transpose(a: Tensor) -> Tensor:
    def _backward(g):
        a.grad += g.T

    return Tensor(a.value.T, (a,), _backward)


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0

    def _backward(g):
        a.grad += g * mask

    return Tensor(np.where(mask, a.value, 0.0), (a,), _backward, op="relu")


def sigmoid(a: Tensor) -> Tensor:
    y = np.exp(-np.logaddexp(0.0, -a.value))

    def _backward(g):
        a.grad += g * y * (1.0 - y)

    return Tensor(y, (a,), _backward)


def softmax(a: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, max-subtracted"""
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def _backward(g):
        a.grad += y * (g - (g * y).sum(axis=-1, keepdims=True))

    return Tensor(y, (a,), _backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Per-row normalization over the feature axis with learnable gain and bias"""
    n = x.shape[-1]
    mean = x.value.mean(axis=-1, keepdims=True)
    centered = x.value - mean
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * inv_std

    def _backward(g):
        gain.grad += unbroadcast(g * x_hat, gain.shape)
        bias.grad += unbroadcast(g, bias.shape)
        d_hat = g * gain.value
        x.grad += (inv_std / n) * (
            n * d_hat
            - d_hat.sum(axis=-1, keepdims=True)
            - x_hat * (d_hat * x_hat).sum(axis=-1, keepdims=True)
        )

    return Tensor(gain.value * x_hat + bias.value, (x, gain, bias), _backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def _backward(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            t.grad += piece

    return Tensor(np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors), _backward)


def dropout(x: Tensor, rate: float, train: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout; identity in eval mode"""
    if not 0.0 <= rate < 1.0:
        raise InvalidRate(f"Dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise InvalidRate("Train-mode dropout needs a seeded generator")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(mask))


def fc(x: Tensor, w: Tensor, b: Tensor, activation: Optional[str] = "relu") -> Tensor:
    """act(x W + b) with activation in {"relu", None}"""
    if x.shape[-1] != w.shape[0] or b.shape[-1] != w.shape[1]:
        raise ShapeMismatch(f"FC input {x.shape} does not fit weights {w.shape} and bias {b.shape}")
    y = add(matmul(x, w), b)
    return relu(y) if activation == "relu" else y


def attention(q: Tensor, k: Tensor, v: Tensor, return_weights: bool = False):
    """softmax(Q K^T / sqrt(d_k)) V for one query row over n key/value rows"""
    if k.shape[0] == 0:
        raise EmptyKeySet("Attention over an empty key set")
    if q.shape[-1] != k.shape[-1] or k.shape[0] != v.shape[0]:
        raise ShapeMismatch(f"Attention shapes Q{q.shape} K{k.shape} V{v.shape} disagree")
    scores = scale(matmul(q, transpose(k)), 1.0 / math.sqrt(k.shape[-1]))
    weights = softmax(scores)
    out = matmul(weights, v)
    return (out, weights) if return_weights else out


def multi_head(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: Sequence[Tuple[Tensor, Tensor, Tensor]],
    w_o: Tensor,
) -> Tensor:
    """[head_1, ..., head_h] W_o with head_i = attention(Q W_i^Q, K W_i^K, V W_i^V)"""
    outputs = [attention(matmul(q, wq), matmul(k, wk), matmul(v, wv)) for wq, wk, wv in heads]
    joined = concat(outputs, axis=-1)
    if joined.shape[-1] != w_o.shape[0]:
        raise ShapeMismatch(f"Concatenated heads {joined.shape} do not fit W_o {w_o.shape}")
    return matmul(joined, w_o)


def total(a: Tensor) -> Tensor:
    def _backward(g):
        a.grad += g * np.ones_like(a.value)

    return Tensor(a.value.sum(), (a,), _backward)


def bce_loss(y_pred: Tensor, y_true) -> Tensor:
    """Mean binary cross-entropy with predictions clamped away from 0 and 1"""
    y = np.asarray(y_true, dtype=np.float64).reshape(y_pred.shape)
    p = np.clip(y_pred.value, BCE_CLAMP, 1.0 - BCE_CLAMP)
    inside = (y_pred.value > BCE_CLAMP) & (y_pred.value < 1.0 - BCE_CLAMP)
    count = max(1, y.size)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum() / count

    def _backward(g):
        y_pred.grad += g * inside * ((p - y) / (p * (1.0 - p))) / count

    return Tensor(loss, (y_pred,), _backward)


def l2_penalty(params: Sequence[Parameter], weight: float) -> Tensor:
    """weight * sum of squared entries over weight matrices only"""
    matrices = [p for p in params if p.kind == "weight"]

    def _backward(g):
        for p in matrices:
            p.grad += g * 2.0 * weight * p.value

    value = weight * sum(float((p.value**2).sum()) for p in matrices)
    return Tensor(value, tuple(matrices), _backward)
