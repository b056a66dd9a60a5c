"""Losses, optimizers, the training loop, and the staged initialization protocol.

Loss pairings follow the layer families: the prototype-membership layer is
trained with a regularized sum-of-squares loss on its probability outputs
(penalty on the reliabilities), the weight-of-evidence layer with regularized
cross-entropy on its logistic output (penalty on the squared output weights),
and either layer trains against a soft overlap (Dice) loss for segmentation.

Training is full-batch gradient descent: datasets here are small enough that
determinism is worth more than minibatch noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .enn import enn_init_kmeans
from .errors import AllZeroDenominator, NonFiniteLoss, OutOfRange, ShapeMismatch
from .kmeans import kmeans
from .mlp import (
    head_init,
    mlp_backward_batch,
    mlp_forward_batch,
    mlp_init,
    softmax_head_ce_backward,
    softmax_head_forward,
)
from .model import EvidentialModel
from .numeric import log_rows
from .rbf import rbf_init_kmeans

P_CLAMP = 1e-12


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------

def loss_sse(probs, onehot, alphas, lam: float):
    """Summed squared error on probability outputs plus lam * sum(alpha).

    Returns (value, d/d(probs), d/d(alphas)).
    """
    probs = np.asarray(probs, dtype=float)
    onehot = np.asarray(onehot, dtype=float)
    if probs.shape != onehot.shape:
        raise ShapeMismatch(f"{probs.shape} vs {onehot.shape}")
    diff = probs - onehot
    value = float(np.sum(diff**2)) + lam * float(np.sum(alphas))
    return value, 2.0 * diff, np.full(np.asarray(alphas).shape, lam)


def loss_ce(p1, targets, v, lam: float):
    """Summed binary cross-entropy on the first-class probability plus
    lam * sum(v^2).  Probabilities are clamped to [1e-12, 1 - 1e-12].

    Returns (value, d/d(p1), d/d(v)).
    """
    p1 = np.asarray(p1, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if p1.shape != targets.shape:
        raise ShapeMismatch(f"{p1.shape} vs {targets.shape}")
    p = np.clip(p1, P_CLAMP, 1.0 - P_CLAMP)
    v = np.asarray(v, dtype=float)
    value = float(-np.sum(targets * np.log(p) + (1.0 - targets) * np.log1p(-p)))
    value += lam * float(np.sum(v**2))
    d_p1 = (p - targets) / (p * (1.0 - p))
    return value, d_p1, 2.0 * lam * v


def loss_dice(soft_pred, truth, lam: float = 0.0, regularizer: float = 0.0):
    """Soft overlap loss 1 - 2*sum(S*G)/(sum(S)+sum(G)) plus lam * regularizer.

    Returns (value, d/d(soft_pred)).
    """
    s = np.asarray(soft_pred, dtype=float)
    g = np.asarray(truth, dtype=float)
    if s.shape != g.shape:
        raise ShapeMismatch(f"{s.shape} vs {g.shape}")
    denom = float(np.sum(s) + np.sum(g))
    if denom == 0.0:
        raise AllZeroDenominator("prediction and ground truth are both empty")
    overlap = float(np.sum(s * g))
    value = 1.0 - 2.0 * overlap / denom + lam * regularizer
    d_s = 2.0 * overlap / denom**2 - 2.0 * g / denom
    return value, d_s


# --------------------------------------------------------------------------
# optimizers
# --------------------------------------------------------------------------

class Sgd:
    def __init__(self, arrays: dict, lr: float):
        self.arrays = arrays
        self.lr = lr

    def step(self, grads: dict) -> None:
        for name, arr in self.arrays.items():
            arr -= self.lr * grads[name]


class Adam:
    def __init__(self, arrays: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.arrays = arrays
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name, arr in self.arrays.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g**2
            arr -= self.lr * (self.m[name] / b1c) / (np.sqrt(self.v[name] / b2c) + self.eps)


def make_optimizer(arrays: dict, config: "TrainConfig"):
    if config.optimizer == "sgd":
        return Sgd(arrays, config.learning_rate)
    if config.optimizer == "adam":
        return Adam(arrays, config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    raise OutOfRange(f"unknown optimizer {config.optimizer!r}")


# --------------------------------------------------------------------------
# configuration and history
# --------------------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    lam: float = 0.0
    loss_kind: str = "sse"       # sse | cross-entropy | dice
    seed: int = 0
    optimizer: str = "adam"      # adam | sgd
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    plateau_patience: int = 10
    plateau_factor: float = 0.1
    min_lr: float = 1e-6

    def __post_init__(self):
        if self.epochs < 0:
            raise OutOfRange("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise OutOfRange("learning_rate must be positive")
        if self.lam < 0:
            raise OutOfRange("lam must be >= 0")
        if self.loss_kind not in ("sse", "cross-entropy", "dice"):
            raise OutOfRange(f"unknown loss {self.loss_kind!r}")

    def replace(self, **kw) -> "TrainConfig":
        data = self.__dict__ | kw
        return TrainConfig(**data)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_error: float
    val_error: float
    mean_ignorance: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def csv_rows(self):
        yield "epoch,loss,train_err,val_err,mean_ignorance"
        for r in self.records:
            yield f"{r.epoch},{r.loss!r},{r.train_error!r},{r.val_error!r},{r.mean_ignorance!r}"

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss if self.records else math.nan


def _unpack(data) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(data, "points"):
        return np.asarray(data.points, dtype=float), np.asarray(data.labels)
    x, y = data
    return np.asarray(x, dtype=float), np.asarray(y)


# --------------------------------------------------------------------------
# loss glue: model masses -> objective value and parameter gradients
# --------------------------------------------------------------------------

def _pignistic_from_masses(masses: np.ndarray) -> np.ndarray:
    k = masses.shape[1] - 1
    return masses[:, :k] + masses[:, k:] / k


def model_loss_and_grads(model: EvidentialModel, X, y, config: TrainConfig):
    """Full-batch objective and gradients for every trainable array."""
    masses, caches = model.forward_with_cache(X)
    k = model.n_classes
    lam = config.lam

    if config.loss_kind == "sse":
        if model.kind != "enn":
            raise OutOfRange("the sum-of-squares loss trains the membership layer only")
        onehot = np.eye(k)[np.asarray(y, dtype=int)]
        probs = _pignistic_from_masses(masses)
        value, d_p, d_alpha = loss_sse(probs, onehot, model.layer.alpha, lam)
        upstream = np.concatenate([d_p, d_p.sum(axis=1, keepdims=True) / k], axis=1)
        grads = model.backward(caches, upstream)
        alpha = model.layer.alpha
        grads["layer.alpha_raw"] = grads["layer.alpha_raw"] + d_alpha * alpha * (1.0 - alpha)
        return value, grads, masses

    if config.loss_kind == "cross-entropy":
        if model.kind != "rbf":
            raise OutOfRange("the cross-entropy loss trains the weight-of-evidence layer only")
        _, layer_cache = caches
        p1 = layer_cache["p1"]
        targets = (np.asarray(y) == 0).astype(float)  # first class means label 0
        value, d_p1, d_v = loss_ce(p1, targets, model.layer.v, lam)
        grads = model.backward(caches, d_p1)
        grads["layer.v"] = grads["layer.v"] + d_v
        return value, grads, masses

    if config.loss_kind == "dice":
        if k != 2:
            raise OutOfRange("the overlap loss is defined for binary frames")
        # soft foreground probability: mass on class 1 plus half the frame mass
        soft = masses[:, 1] + masses[:, 2] / 2.0
        truth = np.asarray(y, dtype=float)
        reg_value, reg_grads = _regularizer(model)
        value, d_s = loss_dice(soft, truth, lam, reg_value)
        upstream = np.column_stack([np.zeros_like(d_s), d_s, d_s / 2.0])
        grads = model.backward(caches, upstream)
        for name, g in reg_grads.items():
            grads[name] = grads[name] + lam * g
        return value, grads, masses

    raise OutOfRange(f"unknown loss {config.loss_kind!r}")


def _regularizer(model: EvidentialModel) -> tuple[float, dict[str, np.ndarray]]:
    """Prototype-shrinking penalty: sum of reliabilities, or sum of squared weights."""
    if model.kind == "enn":
        alpha = model.layer.alpha
        return float(np.sum(alpha)), {"layer.alpha_raw": alpha * (1.0 - alpha)}
    v = model.layer.v
    return float(np.sum(v**2)), {"layer.v": 2.0 * v}


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------

def train(model: EvidentialModel, train_data, config: TrainConfig, val_data=None):
    """Full-batch training with a reduce-on-plateau schedule.

    Returns (trained model, history).  When a validation set is given, the
    returned model carries the parameters that scored the best validation
    objective; otherwise the final parameters.
    """
    x_train, y_train = _unpack(train_data)
    x_val, y_val = _unpack(val_data) if val_data is not None else (None, None)

    arrays = model.trainable_arrays()
    optimizer = make_optimizer(arrays, config)
    history = TrainHistory()

    best_val = math.inf
    best_arrays = None
    plateau_best = math.inf
    bad_epochs = 0

    for epoch in range(1, config.epochs + 1):
        value, grads, masses = model_loss_and_grads(model, x_train, y_train, config)
        if not math.isfinite(value):
            raise NonFiniteLoss(f"objective became {value} at epoch {epoch}")

        preds = np.argmax(masses[:, :-1], axis=1)
        train_err = float(np.mean(preds != np.asarray(y_train, dtype=int)))
        ignorance = float(np.mean(masses[:, -1]))

        if value < plateau_best - 1e-15:
            plateau_best = value
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.plateau_patience:
                optimizer.lr = max(optimizer.lr * config.plateau_factor, config.min_lr)
                bad_epochs = 0

        optimizer.step(grads)

        val_err = math.nan
        if x_val is not None:
            val_value, val_err = _evaluate(model, x_val, y_val, config)
            if val_value < best_val:
                best_val = val_value
                best_arrays = {k: v.copy() for k, v in arrays.items()}

        history.records.append(EpochRecord(epoch, value, train_err, val_err, ignorance))

    if best_arrays is not None:
        for name, arr in arrays.items():
            arr[...] = best_arrays[name]
    return model, history


def _evaluate(model: EvidentialModel, X, y, config: TrainConfig) -> tuple[float, float]:
    """Objective value and error rate without touching gradients."""
    masses = model.masses(X)
    k = model.n_classes
    lam = config.lam
    if config.loss_kind == "sse":
        onehot = np.eye(k)[np.asarray(y, dtype=int)]
        value, _, _ = loss_sse(_pignistic_from_masses(masses), onehot, model.layer.alpha, lam)
    elif config.loss_kind == "cross-entropy":
        pl1 = masses[:, 0] + masses[:, 2]
        pl2 = masses[:, 1] + masses[:, 2]
        p1 = pl1 / (pl1 + pl2)
        value, _, _ = loss_ce(p1, (np.asarray(y) == 0).astype(float), model.layer.v, lam)
    else:
        soft = masses[:, 1] + masses[:, 2] / 2.0
        reg_value, _ = _regularizer(model)
        value, _ = loss_dice(soft, np.asarray(y, dtype=float), lam, reg_value)
    preds = np.argmax(masses[:, :-1], axis=1)
    err = float(np.mean(preds != np.asarray(y, dtype=int)))
    return value, err


# --------------------------------------------------------------------------
# feature-net pretraining and the staged initialization protocol
# --------------------------------------------------------------------------

def pretrain_feature_net(net, head, train_data, config: TrainConfig, val_data=None):
    """Train the feature network with a softmax head by summed cross-entropy."""
    x_train, y_train = _unpack(train_data)
    n_classes = head.bias.shape[0]
    onehot = np.eye(n_classes)[np.asarray(y_train, dtype=int)]

    arrays = net.trainable_arrays() | head.trainable_arrays()
    optimizer = make_optimizer(arrays, config)
    history = TrainHistory()

    for epoch in range(1, config.epochs + 1):
        feats, cache = mlp_forward_batch(net, x_train)
        probs = softmax_head_forward(head, feats)
        value = float(-np.sum(onehot * log_rows(probs, floor=P_CLAMP)))
        if not math.isfinite(value):
            raise NonFiniteLoss(f"pretraining objective became {value} at epoch {epoch}")
        head_grads, d_feats = softmax_head_ce_backward(head, feats, probs, onehot)
        net_grads, _ = mlp_backward_batch(net, cache, d_feats)
        optimizer.step(net_grads | head_grads)

        err = float(np.mean(np.argmax(probs, axis=1) != y_train))
        history.records.append(EpochRecord(epoch, value, err, math.nan, math.nan))
    return history


@dataclass
class StagedInitResult:
    model: EvidentialModel
    pretrain_history: TrainHistory
    layer_history: TrainHistory
    finetune_history: TrainHistory
    prototypes_init: np.ndarray
    net_after_pretrain: object
    net_before_finetune: object


def four_stage_init(train_data, arch: dict, config: TrainConfig, val_data=None) -> StagedInitResult:
    """Chained initialization: pretrain features, cluster them, train the
    evidential layer on frozen features (learning rate 1e-2), then fine-tune
    the whole model end to end (learning rate 1e-4)."""
    x_train, y_train = _unpack(train_data)
    kind = arch["kind"]
    n_proto = arch["n_prototypes"]
    n_feat = arch["n_features"]
    hidden = arch.get("hidden", [16])
    n_classes = int(np.max(y_train)) + 1 if kind == "enn" else 2

    net = mlp_init([x_train.shape[1], *hidden, n_feat], seed=config.seed)
    head = head_init(n_feat, n_classes, seed=config.seed + 1)
    pre_hist = pretrain_feature_net(net, head, (x_train, y_train), config, val_data)
    net_after_pretrain = net.copy()

    feats, _ = mlp_forward_batch(net, x_train)
    if kind == "enn":
        layer = enn_init_kmeans(feats, y_train, n_proto, n_classes, seed=config.seed)
    else:
        layer = rbf_init_kmeans(feats, y_train, n_proto, seed=config.seed)
    prototypes_init = layer.proto.copy()

    layer_model = EvidentialModel(kind, layer, None)
    val_feats = None
    if val_data is not None:
        x_val, y_val = _unpack(val_data)
        val_feats = (mlp_forward_batch(net, x_val)[0], y_val)
    _, layer_hist = train(layer_model, (feats, y_train), config.replace(learning_rate=1e-2), val_feats)
    net_before_finetune = net.copy()

    full = EvidentialModel(kind, layer_model.layer, net)
    _, fine_hist = train(full, (x_train, y_train), config.replace(learning_rate=1e-4), val_data)

    return StagedInitResult(
        model=full,
        pretrain_history=pre_hist,
        layer_history=layer_hist,
        finetune_history=fine_hist,
        prototypes_init=prototypes_init,
        net_after_pretrain=net_after_pretrain,
        net_before_finetune=net_before_finetune,
    )


# --------------------------------------------------------------------------
# gradient checking
# --------------------------------------------------------------------------

def grad_check(model: EvidentialModel, X, y, config: TrainConfig, eps: float = 1e-6) -> float:
    """Worst relative error between analytic and central-difference gradients.

    The comparison is a norm ratio per parameter array; arrays whose analytic
    and numeric gradients are both below the finite-difference noise floor
    count as exact.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, analytic, _ = model_loss_and_grads(model, X, y, config)

    worst = 0.0
    for name, arr in model.trainable_arrays().items():
        flat = arr.ravel()
        numeric = np.zeros_like(flat)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = model_loss_and_grads(model, X, y, config)[0]
            flat[idx] = orig - eps
            down = model_loss_and_grads(model, X, y, config)[0]
            flat[idx] = orig
            numeric[idx] = (up - down) / (2.0 * eps)
        a = np.asarray(analytic[name]).ravel()
        denom = max(np.linalg.norm(a) + np.linalg.norm(numeric), 1e-5)
        worst = max(worst, float(np.linalg.norm(a - numeric) / denom))
    return worst


__all__ = [
    "Adam",
    "EpochRecord",
    "Sgd",
    "StagedInitResult",
    "TrainConfig",
    "TrainHistory",
    "four_stage_init",
    "grad_check",
    "kmeans",
    "loss_ce",
    "loss_dice",
    "loss_sse",
    "model_loss_and_grads",
    "pretrain_feature_net",
    "train",
]
