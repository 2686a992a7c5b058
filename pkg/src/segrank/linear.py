"""Multi-label logistic regression trained by full-batch gradient descent.

Targets arrive as an (n x C) matrix with NaN marking unlabelled pairs; the
objective is the mean binary cross entropy over the labelled entries plus
an L2 penalty on the weights (never the biases). Weights start at zero and
updates are full-batch, so training is deterministic and, because the
objective is convex, needs no symmetry breaking.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted


def masked_bce_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Objective value and its gradients w.r.t. weights and bias.

    Loss is computed from logits (log1p(exp(...))) rather than clamped
    probabilities, so the analytic gradient matches finite differences to
    machine precision.
    """
    mask = ~np.isnan(Y)
    n_labelled = int(mask.sum())
    if n_labelled == 0:
        raise ValueError("no labelled pairs to train on")
    logits = X @ weights.T + bias
    y = np.where(mask, Y, 0.0)
    # softplus(z) - y*z == -[y log p + (1-y) log(1-p)] for p = sigmoid(z)
    softplus = np.logaddexp(0.0, logits)
    per_entry = np.where(mask, softplus - y * logits, 0.0)
    loss = per_entry.sum() / n_labelled + 0.5 * l2 * float((weights**2).sum())
    residual = np.where(mask, expit(logits) - y, 0.0)
    grad_w = residual.T @ X / n_labelled + l2 * weights
    grad_b = residual.sum(axis=0) / n_labelled
    return float(loss), grad_w, grad_b


class MaskedLogisticRegression(BaseEstimator):
    """Per-class sigmoid heads over a shared input space.

    Parameters
    ----------
    epochs : number of full-batch gradient steps.
    learning_rate : step size.
    l2 : ridge penalty on the weight matrix.

    Attributes (after fit)
    ----------------------
    weights_ : (C x d) weight matrix, one row per class.
    bias_ : (C,) bias vector.
    loss_history_ : objective before each step plus the final value
        (length ``epochs + 1``).
    """

    def __init__(self, epochs: int = 200, learning_rate: float = 0.5, l2: float = 0.0):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2 = l2

    def fit(self, X, Y):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        X = check_array(X, dtype=np.float64)
        Y = check_array(Y, dtype=np.float64, ensure_all_finite=False, ensure_2d=True)
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        labelled = ~np.isnan(Y)
        values = Y[labelled]
        if values.size == 0:
            raise ValueError("no labelled pairs to train on")
        if not np.all((values == 0.0) | (values == 1.0)):
            raise ValueError("labels must be 0, 1, or NaN for unlabelled")

        n_classes = Y.shape[1]
        weights = np.zeros((n_classes, X.shape[1]))
        bias = np.zeros(n_classes)
        history = []
        # divergence surfaces as a non-finite loss, which we detect and
        # report; the intermediate overflow warnings are just noise
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(self.epochs):
                loss, grad_w, grad_b = masked_bce_and_gradient(weights, bias, X, Y, self.l2)
                if not np.isfinite(loss):
                    raise ValueError(
                        "training loss became non-finite; lower the learning rate"
                    )
                history.append(loss)
                weights -= self.learning_rate * grad_w
                bias -= self.learning_rate * grad_b
            final_loss, _, _ = masked_bce_and_gradient(weights, bias, X, Y, self.l2)
        if not np.isfinite(final_loss):
            raise ValueError("training loss became non-finite; lower the learning rate")
        history.append(final_loss)

        self.weights_ = weights
        self.bias_ = bias
        self.loss_history_ = history
        self.n_features_in_ = X.shape[1]
        self.n_classes_ = n_classes
        return self

    def predict_proba(self, X) -> np.ndarray:
        """Per-class probabilities, shape (n, C)."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, model expects {self.n_features_in_}"
            )
        return expit(X @ self.weights_.T + self.bias_)
