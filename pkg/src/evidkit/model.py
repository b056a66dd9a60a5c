"""Composite classifier: optional feature network feeding an evidential layer.

Parameter arrays are exposed as one flat dict with `layer.` / `mlp.`
prefixes so the optimizer and checkpoint code treat every model shape
uniformly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import enn, mlp, rbf
from .errors import OutOfRange


@dataclass
class EvidentialModel:
    kind: str                      # "enn" | "rbf"
    layer: object                  # EnnParams | RbfParams
    feature_net: mlp.MlpParams | None = None

    def __post_init__(self):
        if self.kind not in ("enn", "rbf"):
            raise OutOfRange(f"unknown layer kind {self.kind!r}")

    @property
    def n_features(self) -> int:
        if self.feature_net is not None:
            return self.feature_net.sizes[0]
        return self.layer.n_features

    @property
    def n_classes(self) -> int:
        return self.layer.n_classes if self.kind == "enn" else 2

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        out = {f"layer.{k}": v for k, v in self.layer.trainable_arrays().items()}
        if self.feature_net is not None:
            out.update({f"mlp.{k}": v for k, v in self.feature_net.trainable_arrays().items()})
        return out

    def copy(self) -> "EvidentialModel":
        return EvidentialModel(
            self.kind,
            self.layer.copy(),
            self.feature_net.copy() if self.feature_net is not None else None,
        )

    def features(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.feature_net is None:
            return X
        feats, _ = mlp.mlp_forward_batch(self.feature_net, X)
        return feats

    def masses(self, X) -> np.ndarray:
        """(N, K+1) output masses; evaluation only, no caches kept."""
        feats = self.features(X)
        if self.kind == "enn":
            out, _ = enn.enn_forward_batch(self.layer, feats)
        else:
            out, _ = rbf.rbf_forward_batch(self.layer, feats)
        return out

    def predict(self, X) -> np.ndarray:
        """Class indexes by maximal singleton mass (ties to the lowest index).

        With singleton-plus-frame focal sets this argmax coincides with the
        maximum-belief, maximum-plausibility, optimism-weighted, and
        probability-transform decision rules.
        """
        m = self.masses(X)
        return np.argmax(m[:, :-1], axis=1)

    def forward_with_cache(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        mlp_cache = None
        feats = X
        if self.feature_net is not None:
            feats, mlp_cache = mlp.mlp_forward_batch(self.feature_net, X)
        if self.kind == "enn":
            masses, layer_cache = enn.enn_forward_batch(self.layer, feats)
        else:
            masses, layer_cache = rbf.rbf_forward_batch(self.layer, feats)
        return masses, (mlp_cache, layer_cache)

    def backward(self, caches, upstream) -> dict[str, np.ndarray]:
        """Backpropagate an upstream gradient (mass-space, or p1-space for the
        weight-of-evidence layer) into the flat parameter-gradient dict."""
        mlp_cache, layer_cache = caches
        if self.kind == "enn":
            layer_grads, d_feats = enn.enn_backward_batch(self.layer, layer_cache, upstream)
        else:
            layer_grads, d_feats = rbf.rbf_backward_batch(self.layer, layer_cache, upstream)
        grads = {f"layer.{k}": v for k, v in layer_grads.items()}
        if self.feature_net is not None:
            mlp_grads, _ = mlp.mlp_backward_batch(self.feature_net, mlp_cache, d_feats)
            grads.update({f"mlp.{k}": v for k, v in mlp_grads.items()})
        return grads

    def to_dict(self) -> dict:
        layer = enn.enn_to_dict(self.layer) if self.kind == "enn" else rbf.rbf_to_dict(self.layer)
        return {
            "model": self.kind,
            "layer": layer,
            "feature_net": mlp.mlp_to_dict(self.feature_net) if self.feature_net else None,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @staticmethod
    def from_dict(data: dict) -> "EvidentialModel":
        kind = data["model"]
        layer = enn.enn_from_dict(data["layer"]) if kind == "enn" else rbf.rbf_from_dict(data["layer"])
        net = mlp.mlp_from_dict(data["feature_net"]) if data.get("feature_net") else None
        return EvidentialModel(kind, layer, net)

    @staticmethod
    def load(path) -> "EvidentialModel":
        return EvidentialModel.from_dict(json.loads(Path(path).read_text()))
