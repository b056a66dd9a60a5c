"""Gaussian prototype layer whose signed activations act as evidence weights.

Binary frame only.  Prototype i activates as s_i = exp(-gamma_i d_i^2) and
contributes w_i = s_i v_i: positive w_i is weight of evidence for the first
class, negative for the second.  Pooling all prototypes gives the totals
w+ = sum of positive parts and w- = sum of negative parts, whose combined
mass function is

    m({w1})    = (1 - exp(-w+)) exp(-w-) / (1 - kappa)
    m({w2})    = (1 - exp(-w-)) exp(-w+) / (1 - kappa)
    m(frame)   = exp(-w+ - w-) / (1 - kappa)
    kappa      = (1 - exp(-w+)) (1 - exp(-w-))

The normalized plausibility of the first class collapses to a logistic unit:
p1 = sigmoid(sum_i v_i s_i).  Masses are evaluated in a factored form that
stays exact when w+ + w- is large (the naive ratio is 0/0 there).

Gradients use the subgradient 0 at the kinks w_i = 0 and are taken in
log-gamma space so the scale parameters stay positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, OutOfRange, StaleCache
from .kmeans import kmeans
from .numeric import sigmoid

INIT_GAMMA = 0.01


@dataclass
class RbfParams:
    """Trainable state: prototypes, log scales, signed output weights."""

    proto: np.ndarray      # (I, H)
    log_gamma: np.ndarray  # (I,)
    v: np.ndarray          # (I,)

    def __post_init__(self):
        self.proto = np.asarray(self.proto, dtype=float)
        self.log_gamma = np.asarray(self.log_gamma, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        i, h = self.proto.shape
        if i < 1 or h < 1:
            raise OutOfRange(f"need I >= 1 and H >= 1, got I={i}, H={h}")
        if self.log_gamma.shape != (i,) or self.v.shape != (i,):
            raise DimensionMismatch("parameter arrays disagree on the number of prototypes")

    @property
    def n_prototypes(self) -> int:
        return self.proto.shape[0]

    @property
    def n_features(self) -> int:
        return self.proto.shape[1]

    @property
    def gamma(self) -> np.ndarray:
        return np.exp(self.log_gamma)

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        return {"proto": self.proto, "log_gamma": self.log_gamma, "v": self.v}

    def copy(self) -> "RbfParams":
        return RbfParams(self.proto.copy(), self.log_gamma.copy(), self.v.copy())


def rbf_from_constrained(proto, gamma, v) -> RbfParams:
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise OutOfRange("gamma must be positive")
    return RbfParams(np.asarray(proto, dtype=float), np.log(gamma), np.asarray(v, dtype=float))


@dataclass
class RbfOutput:
    mass: np.ndarray   # (3,): m({w1}), m({w2}), m(frame)
    wplus: float
    wminus: float
    kappa: float
    p1: float
    cache: dict = field(repr=False, default_factory=dict)


def _as_batch(params: RbfParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.n_features:
        raise DimensionMismatch(f"expected inputs of dimension {params.n_features}, got shape {x.shape}")
    return x, single


def _masses_from_totals(wp: np.ndarray, wm: np.ndarray) -> np.ndarray:
    """Exact combined masses, factored so large totals do not underflow to 0/0."""
    support1 = -np.expm1(-wp)  # 1 - exp(-w+)
    support2 = -np.expm1(-wm)
    c = np.minimum(wp, wm)
    ep = np.exp(-(wp - c))     # one of ep, em is exactly 1
    em = np.exp(-(wm - c))
    denom = ep + em - np.exp(-(wp + wm - c))
    mass = np.stack([support1 * em, support2 * ep, np.exp(-(wp + wm - c))], axis=-1)
    return mass / denom[..., None]


def rbf_forward_batch(params: RbfParams, X) -> tuple[np.ndarray, dict]:
    """Evaluate a batch (N, H) -> masses (N, 3) plus the backward cache."""
    X, _ = _as_batch(params, X)
    gamma, v = params.gamma, params.v

    diff = X[:, None, :] - params.proto[None, :, :]
    d2 = np.einsum("nih,nih->ni", diff, diff)
    s = np.exp(-gamma[None, :] * d2)
    w = s * v[None, :]

    wp = np.maximum(w, 0.0).sum(axis=1)
    wm = np.maximum(-w, 0.0).sum(axis=1)
    mass = _masses_from_totals(wp, wm)
    p1 = sigmoid(wp - wm)

    cache = {
        "params": params,
        "diff": diff,
        "d2": d2,
        "s": s,
        "w": w,
        "wp": wp,
        "wm": wm,
        "p1": p1,
        "mass": mass,
    }
    return mass, cache


def rbf_forward(params: RbfParams, x) -> RbfOutput:
    """Single-input forward pass."""
    x_b, single = _as_batch(params, x)
    if not single:
        raise DimensionMismatch("rbf_forward takes one vector; use rbf_forward_batch for batches")
    mass, cache = rbf_forward_batch(params, x_b)
    c = cache
    kappa = float(-np.expm1(-c["wp"][0]) * -np.expm1(-c["wm"][0]))
    return RbfOutput(
        mass=mass[0],
        wplus=float(c["wp"][0]),
        wminus=float(c["wm"][0]),
        kappa=kappa,
        p1=float(c["p1"][0]),
        cache=cache,
    )


def _totals_grad(cache: dict, up_mass: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d(loss)/d(w+), d(loss)/d(w-) given d(loss)/d(mass)."""
    wp, wm = cache["wp"], cache["wm"]
    support1 = -np.expm1(-wp)
    support2 = -np.expm1(-wm)
    c = np.minimum(wp, wm)
    ep = np.exp(-(wp - c))
    em = np.exp(-(wm - c))
    denom = ep + em - np.exp(-(wp + wm - c))
    # exp(-w+) exp(-w-) / (1-kappa)^2, factored like the forward pass
    g = np.exp(-np.abs(wp - wm)) / denom**2
    a = np.exp(-wp)  # may underflow; only appears as a bounded factor
    b = np.exp(-wm)
    d_wp = g * (up_mass[:, 0] - up_mass[:, 1] * support2 - up_mass[:, 2] * b)
    d_wm = g * (-up_mass[:, 0] * support1 + up_mass[:, 1] - up_mass[:, 2] * a)
    return d_wp, d_wm


def rbf_backward_batch(params: RbfParams, cache: dict, upstream) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Backpropagate through a batch.

    `upstream` of shape (N, 3) is read as d(loss)/d(mass); shape (N,) as
    d(loss)/d(p1).  Returns parameter gradients summed over the batch and
    the input gradient of shape (N, H).
    """
    if cache.get("params") is not params:
        raise StaleCache("cache was produced by different parameters")
    upstream = np.asarray(upstream, dtype=float)
    s, w, d2, diff = cache["s"], cache["w"], cache["d2"], cache["diff"]
    n = s.shape[0]

    if upstream.shape == (n, 3):
        d_wp, d_wm = _totals_grad(cache, upstream)
        d_w = d_wp[:, None] * (w > 0) - d_wm[:, None] * (w < 0)
    elif upstream.shape == (n,):
        p1 = cache["p1"]
        d_z = upstream * p1 * (1.0 - p1)
        d_w = np.repeat(d_z[:, None], s.shape[1], axis=1)
    else:
        raise DimensionMismatch(
            f"upstream must have shape ({n}, 3) for masses or ({n},) for p1, got {upstream.shape}"
        )

    d_v = (d_w * s).sum(axis=0)
    d_s = d_w * params.v[None, :]
    d_log_gamma = (-d_s * s * d2 * params.gamma[None, :]).sum(axis=0)
    d_d2 = -d_s * s * params.gamma[None, :]

    d_x = 2.0 * np.einsum("ni,nih->nh", d_d2, diff)
    d_proto = -2.0 * np.einsum("ni,nih->ih", d_d2, diff)

    grads = {"proto": d_proto, "log_gamma": d_log_gamma, "v": d_v}
    return grads, d_x


def rbf_backward(params: RbfParams, out: RbfOutput, upstream) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Single-input backward; upstream is a 3-vector (mass space) or scalar (p1 space)."""
    upstream = np.asarray(upstream, dtype=float)
    if upstream.ndim == 0:
        upstream = upstream[None]
    else:
        upstream = upstream[None, :]
    grads, d_x = rbf_backward_batch(params, out.cache, upstream)
    return grads, d_x[0]


def rbf_init_random(n_prototypes: int, n_features: int, seed: int) -> RbfParams:
    """Prototypes ~ N(0, I); gamma = 0.01; weights ~ standard normal."""
    rng = np.random.default_rng(seed)
    return rbf_from_constrained(
        rng.standard_normal((n_prototypes, n_features)),
        np.full(n_prototypes, INIT_GAMMA),
        rng.standard_normal(n_prototypes),
    )


def rbf_init_kmeans(features, labels, n_prototypes: int, seed: int = 0) -> RbfParams:
    """Prototypes from k-means; v_i = +1 when the cluster majority is class 0, else -1."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    result = kmeans(features, n_prototypes, seed=seed)
    v = np.ones(n_prototypes)
    for i in range(n_prototypes):
        members = labels[result.assignments == i]
        if members.size and np.mean(members == 0) < 0.5:
            v[i] = -1.0
    return rbf_from_constrained(result.centroids, np.full(n_prototypes, INIT_GAMMA), v)


def rbf_to_dict(params: RbfParams) -> dict:
    return {
        "kind": "rbf",
        "I": params.n_prototypes,
        "H": params.n_features,
        "proto": params.proto.ravel().tolist(),
        "gamma": params.gamma.tolist(),
        "v": params.v.tolist(),
    }


def rbf_from_dict(data: dict) -> RbfParams:
    if data.get("kind") != "rbf":
        raise OutOfRange(f"not an RBF checkpoint: kind={data.get('kind')!r}")
    i, h = data["I"], data["H"]
    return rbf_from_constrained(
        np.asarray(data["proto"], dtype=float).reshape(i, h),
        np.asarray(data["gamma"], dtype=float),
        np.asarray(data["v"], dtype=float),
    )
