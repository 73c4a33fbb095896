"""Scikit-learn style wrappers so the pipeline composes with that ecosystem.

``FrozenFeatureExtractor`` is a stateless transformer over image batches;
``SoftmaxHeadClassifier`` fits the dense head on feature matrices with
the same momentum-SGD loop the full protocol uses.  Chaining the two in
an sklearn ``Pipeline`` reproduces inference end to end.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .arch import ArchitectureSpec, load_arch
from .data import AugmentationConfig
from .network import forward_features, head_logits
from .ops import DenseParams, softmax
from .tensor import Tensor, argmax_axis, check_tensor
from .training import TrainConfig, fit_head, select_best_epoch
from .weights import ModelWeights, load_weights, require_bound


class FrozenFeatureExtractor(BaseEstimator, TransformerMixin):
    """Backbone feature extraction as a transformer.

    Parameters may be an in-memory spec/weights pair or file paths; fit
    only resolves and validates them (nothing is learned).
    """

    def __init__(self, arch=None, weights=None):
        self.arch = arch
        self.weights = weights

    def fit(self, X=None, y=None):
        spec = self.arch if isinstance(self.arch, ArchitectureSpec) else load_arch(self.arch)
        weights = self.weights if isinstance(self.weights, ModelWeights) else load_weights(self.weights)
        require_bound(spec, weights, require_all=False)
        self.spec_ = spec
        self.weights_ = weights
        return self

    def transform(self, X) -> Tensor:
        if not hasattr(self, "spec_"):
            raise NotFittedError("FrozenFeatureExtractor: call fit before transform")
        return forward_features(self.spec_, self.weights_, check_tensor(X, rank=4, name="X"))


class SoftmaxHeadClassifier(BaseEstimator, ClassifierMixin):
    """Dense softmax head trained with momentum SGD on feature matrices.

    ``fit`` accepts an optional ``eval_set=(X, y)``; per-epoch precision
    is measured there (or on the training set when absent) and the best
    epoch's parameters are kept, mirroring the full training protocol.
    """

    def __init__(self, epochs=35, batch_size=16, lr=0.01, momentum=0.9, seed=0, head_init="glorot"):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.seed = seed
        self.head_init = head_init

    def fit(self, X, y, eval_set=None):
        X = check_tensor(X, rank=2, name="X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            momentum=self.momentum,
            augment=False,
            augmentation=AugmentationConfig(),
            seed=self.seed,
            head_init=self.head_init,
        )
        from .seeding import derived_rng

        head = [
            DenseParams.init(
                X.shape[1],
                len(self.classes_),
                rng=derived_rng(self.seed, "head-init", 0),
                scheme=self.head_init,
            )
        ]
        if eval_set is not None:
            eval_x = check_tensor(eval_set[0], rank=2, name="eval X")
            eval_y = [int(np.searchsorted(self.classes_, v)) for v in np.asarray(eval_set[1])]
        else:
            eval_x, eval_y = X, [int(v) for v in encoded]
        snapshots, metrics = fit_head(
            head, lambda epoch: X, [int(v) for v in encoded], eval_x, eval_y, cfg,
            clean_train_features=X,
        )
        best = select_best_epoch(metrics)
        self.head_ = snapshots[best - 1]
        self.metrics_ = metrics
        self.best_epoch_ = best
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted_input(self, X) -> Tensor:
        if not hasattr(self, "head_"):
            raise NotFittedError("SoftmaxHeadClassifier: call fit before predicting")
        X = check_tensor(X, rank=2, name="X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def decision_function(self, X) -> Tensor:
        return head_logits(self._check_fitted_input(X), self.head_)

    def predict_proba(self, X) -> Tensor:
        return softmax(self.decision_function(X))

    def predict(self, X):
        idx = argmax_axis(self.predict_proba(X))
        return self.classes_[idx]
