"""Small fully-connected feature extractor.

Hidden layers are affine maps followed by PReLU with one learnable slope per
layer; the final layer is affine so features are unbounded.  An optional
softmax head turns features into class probabilities for pretraining.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OutOfRange, StaleCache
from .numeric import softmax_rows

INIT_SLOPE = 0.25


@dataclass
class MlpParams:
    weights: list      # [(d0, d1), (d1, d2), ...]
    biases: list       # [(d1,), (d2,), ...]
    slopes: np.ndarray  # one PReLU slope per hidden layer (len = n_layers - 1)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        self.slopes = np.asarray(self.slopes, dtype=float)
        if len(self.weights) != len(self.biases) or len(self.weights) < 1:
            raise DimensionMismatch("need one bias per weight matrix")
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != b.shape[0]:
                raise DimensionMismatch(f"weight {w.shape} incompatible with bias {b.shape}")
        for wa, wb in zip(self.weights, self.weights[1:]):
            if wa.shape[1] != wb.shape[0]:
                raise DimensionMismatch(f"layers {wa.shape} -> {wb.shape} do not chain")
        if self.slopes.shape != (len(self.weights) - 1,):
            raise DimensionMismatch("need one PReLU slope per hidden layer")

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"b{i}"] = b
        out["slopes"] = self.slopes
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases], self.slopes.copy()
        )


@dataclass
class SoftmaxHead:
    weight: np.ndarray  # (H, K)
    bias: np.ndarray    # (K,)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.shape[1] != self.bias.shape[0]:
            raise DimensionMismatch("head weight and bias disagree on class count")

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {"head_W": self.weight, "head_b": self.bias}

    def copy(self) -> "SoftmaxHead":
        return SoftmaxHead(self.weight.copy(), self.bias.copy())


def mlp_init(layer_sizes, seed: int) -> MlpParams:
    """Scaled-normal weights (variance 2/fan_in), zero biases, slope 0.25."""
    if len(layer_sizes) < 2:
        raise OutOfRange("need at least input and output sizes")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(layer_sizes, layer_sizes[1:]):
        weights.append(rng.standard_normal((d_in, d_out)) * np.sqrt(2.0 / d_in))
        biases.append(np.zeros(d_out))
    return MlpParams(weights, biases, np.full(len(layer_sizes) - 2, INIT_SLOPE))


def head_init(n_features: int, n_classes: int, seed: int) -> SoftmaxHead:
    rng = np.random.default_rng(seed)
    return SoftmaxHead(rng.standard_normal((n_features, n_classes)) * np.sqrt(1.0 / n_features),
                       np.zeros(n_classes))


def _as_batch(params: MlpParams, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.sizes[0]:
        raise DimensionMismatch(f"expected inputs of dimension {params.sizes[0]}, got shape {x.shape}")
    return x, single


def mlp_forward_batch(params: MlpParams, X) -> tuple[np.ndarray, dict]:
    X, _ = _as_batch(params, X)
    activations = [X]
    preacts = []
    h = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        preacts.append(z)
        if i < last:
            h = np.where(z > 0, z, params.slopes[i] * z)
        else:
            h = z
        activations.append(h)
    cache = {"params": params, "activations": activations, "preacts": preacts}
    return h, cache


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, dict]:
    x_b, single = _as_batch(params, x)
    feats, cache = mlp_forward_batch(params, x_b)
    return (feats[0] if single else feats), cache


def mlp_backward_batch(params: MlpParams, cache: dict, upstream) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Standard backpropagation; returns parameter grads and d(loss)/d(input)."""
    if cache.get("params") is not params:
        raise StaleCache("cache was produced by different parameters")
    upstream = np.asarray(upstream, dtype=float)
    activations, preacts = cache["activations"], cache["preacts"]
    if upstream.shape != activations[-1].shape:
        raise DimensionMismatch(f"upstream shape {upstream.shape} vs output {activations[-1].shape}")

    grads: dict[str, np.ndarray] = {"slopes": np.zeros_like(params.slopes)}
    last = len(params.weights) - 1
    delta = upstream
    for i in range(last, -1, -1):
        if i < last:
            z = preacts[i]
            neg = z <= 0
            grads["slopes"][i] = np.sum(delta * np.where(neg, z, 0.0))
            delta = delta * np.where(neg, params.slopes[i], 1.0)
        grads[f"W{i}"] = activations[i].T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        delta = delta @ params.weights[i].T
    return grads, delta


def mlp_backward(params: MlpParams, cache: dict, upstream) -> tuple[dict[str, np.ndarray], np.ndarray]:
    upstream = np.asarray(upstream, dtype=float)
    single = upstream.ndim == 1
    grads, dx = mlp_backward_batch(params, cache, upstream[None, :] if single else upstream)
    return grads, (dx[0] if single else dx)


def softmax_head_forward(head: SoftmaxHead, features) -> np.ndarray:
    """Class probabilities; accepts a single feature vector or a batch."""
    features = np.asarray(features, dtype=float)
    single = features.ndim == 1
    logits = (features[None, :] if single else features) @ head.weight + head.bias
    probs = softmax_rows(logits)
    return probs[0] if single else probs


def softmax_head_ce_backward(head: SoftmaxHead, features, probs, onehot):
    """Gradients of the summed cross-entropy through the softmax head.

    Returns (head grads, d(loss)/d(features)).
    """
    features = np.asarray(features, dtype=float)
    d_logits = probs - onehot
    grads = {"head_W": features.T @ d_logits, "head_b": d_logits.sum(axis=0)}
    return grads, d_logits @ head.weight.T


def mlp_to_dict(params: MlpParams) -> dict:
    out = {"kind": "mlp", "sizes": params.sizes, "slopes": params.slopes.tolist()}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        out[f"W{i}"] = w.ravel().tolist()
        out[f"b{i}"] = b.tolist()
    return out


def mlp_from_dict(data: dict) -> MlpParams:
    if data.get("kind") != "mlp":
        raise OutOfRange(f"not an MLP checkpoint: kind={data.get('kind')!r}")
    sizes = data["sizes"]
    weights, biases = [], []
    for i, (d_in, d_out) in enumerate(zip(sizes, sizes[1:])):
        weights.append(np.asarray(data[f"W{i}"], dtype=float).reshape(d_in, d_out))
        biases.append(np.asarray(data[f"b{i}"], dtype=float))
    return MlpParams(weights, biases, np.asarray(data["slopes"], dtype=float))
