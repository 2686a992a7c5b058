"""Gradient-boosted regression trees for binary targets, written from scratch.

Each round fits one tree to the first/second derivatives of the logistic
loss (g = p - y, h = p(1-p)) using exact greedy split search: every distinct
threshold of every numeric feature is scored with the second-order gain

    gain = 1/2 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda)]

and leaves take the Newton step -G/(H+lambda). Categorical features are
split by sorting categories on their G/H ratio and scanning prefix
partitions, so category identity (not magnitude) drives grouping. Training
is deterministic: candidate splits are scanned feature index ascending,
thresholds ascending, and only a strictly larger gain replaces the incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted


@dataclass(frozen=True)
class GbmHyper:
    """Boosting hyperparameters.

    ``seed`` is carried for config plumbing; the exact-greedy trainer has no
    stochastic steps, so it does not alter results.
    """

    rounds: int = 200
    max_depth: int = 5
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be nonnegative")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be nonnegative")


@dataclass
class TreeNode:
    """Internal split or leaf. Numeric splits send ``x < threshold`` left;
    categorical splits send ``x in categories`` left (unseen values right)."""

    feature: int = -1
    threshold: float = math.nan
    categories: frozenset[int] | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.value}
        node: dict = {"feature": self.feature}
        if self.categories is not None:
            node["categories"] = sorted(self.categories)
        else:
            node["threshold"] = self.threshold
        node["left"] = self.left.to_dict()
        node["right"] = self.right.to_dict()
        return node

    @classmethod
    def from_dict(cls, data: dict) -> "TreeNode":
        if "leaf" in data:
            return cls(value=float(data["leaf"]))
        return cls(
            feature=int(data["feature"]),
            threshold=float(data.get("threshold", math.nan)),
            categories=(
                frozenset(int(c) for c in data["categories"]) if "categories" in data else None
            ),
            left=cls.from_dict(data["left"]),
            right=cls.from_dict(data["right"]),
        )


def leaf_value(grad_sum: float, hess_sum: float, reg_lambda: float) -> float:
    """Regularized Newton step for a leaf, in logit units."""
    return -grad_sum / (hess_sum + reg_lambda)


def split_gain(gl: float, hl: float, gr: float, hr: float, reg_lambda: float) -> float:
    """Loss reduction of a binary partition under the second-order objective."""
    parent = (gl + gr) ** 2 / (hl + hr + reg_lambda)
    return 0.5 * (gl**2 / (hl + reg_lambda) + gr**2 / (hr + reg_lambda) - parent)


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float = math.nan
    categories: frozenset[int] | None = None
    left_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    right_rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


def _best_numeric_split(
    x: np.ndarray, g: np.ndarray, h: np.ndarray, reg_lambda: float, min_child_weight: float
) -> tuple[float, float] | None:
    """Highest-gain threshold for one numeric feature, lowest threshold on ties."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if xs[0] == xs[-1]:
        return None
    gl = np.cumsum(g[order])[:-1]
    hl = np.cumsum(h[order])[:-1]
    g_total, h_total = gl[-1] + g[order[-1]], hl[-1] + h[order[-1]]
    valid = xs[:-1] < xs[1:]
    if min_child_weight > 0:
        valid &= (hl >= min_child_weight) & (h_total - hl >= min_child_weight)
    if not valid.any():
        return None
    parent = g_total**2 / (h_total + reg_lambda)
    gains = 0.5 * (
        gl**2 / (hl + reg_lambda)
        + (g_total - gl) ** 2 / (h_total - hl + reg_lambda)
        - parent
    )
    gains[~valid] = -np.inf
    best = int(np.argmax(gains))  # first max -> lowest threshold
    threshold = 0.5 * (xs[best] + xs[best + 1])
    if not threshold > xs[best]:  # midpoint rounded down; keep the cut between values
        threshold = xs[best + 1]
    return float(gains[best]), float(threshold)


def _best_categorical_split(
    x: np.ndarray, g: np.ndarray, h: np.ndarray, reg_lambda: float, min_child_weight: float
) -> tuple[float, frozenset[int]] | None:
    """Highest-gain category partition via prefix cuts of the G/H ordering."""
    cats, inverse = np.unique(x.astype(np.int64), return_inverse=True)
    if len(cats) < 2:
        return None
    gk = np.bincount(inverse, weights=g)
    hk = np.bincount(inverse, weights=h)
    keys = gk / (hk + reg_lambda + 1e-300)
    order = np.lexsort((cats, hk, gk, keys))
    gl = np.cumsum(gk[order])[:-1]
    hl = np.cumsum(hk[order])[:-1]
    g_total, h_total = gk.sum(), hk.sum()
    valid = np.ones(len(cats) - 1, dtype=bool)
    if min_child_weight > 0:
        valid &= (hl >= min_child_weight) & (h_total - hl >= min_child_weight)
    if not valid.any():
        return None
    parent = g_total**2 / (h_total + reg_lambda)
    gains = 0.5 * (
        gl**2 / (hl + reg_lambda)
        + (g_total - gl) ** 2 / (h_total - hl + reg_lambda)
        - parent
    )
    gains[~valid] = -np.inf
    best = int(np.argmax(gains))  # first max -> smallest left group
    left = frozenset(int(c) for c in cats[order[: best + 1]])
    return float(gains[best]), left


def build_tree(
    X: np.ndarray,
    gradients: np.ndarray,
    hessians: np.ndarray,
    max_depth: int,
    reg_lambda: float,
    min_child_weight: float = 0.0,
    categorical_features: frozenset[int] = frozenset(),
) -> TreeNode:
    """Fit one regression tree to (gradient, hessian) targets by exact greedy
    search. Nodes become leaves when no split has positive gain."""
    X = np.asarray(X, dtype=np.float64)
    gradients = np.asarray(gradients, dtype=np.float64)
    hessians = np.asarray(hessians, dtype=np.float64)

    def grow(rows: np.ndarray, depth: int) -> TreeNode:
        g = gradients[rows]
        h = hessians[rows]
        leaf = TreeNode(value=leaf_value(float(g.sum()), float(h.sum()), reg_lambda))
        if depth >= max_depth or len(rows) < 2:
            return leaf
        best: _Split | None = None
        for feature in range(X.shape[1]):
            x = X[rows, feature]
            if feature in categorical_features:
                found = _best_categorical_split(x, g, h, reg_lambda, min_child_weight)
                if found is None:
                    continue
                gain, cats = found
                if best is None or gain > best.gain:
                    mask = np.isin(x.astype(np.int64), sorted(cats))
                    best = _Split(gain, feature, categories=cats,
                                  left_rows=rows[mask], right_rows=rows[~mask])
            else:
                found = _best_numeric_split(x, g, h, reg_lambda, min_child_weight)
                if found is None:
                    continue
                gain, threshold = found
                if best is None or gain > best.gain:
                    mask = x < threshold
                    best = _Split(gain, feature, threshold=threshold,
                                  left_rows=rows[mask], right_rows=rows[~mask])
        if best is None or best.gain <= 0.0:
            return leaf
        return TreeNode(
            feature=best.feature,
            threshold=best.threshold,
            categories=best.categories,
            left=grow(best.left_rows, depth + 1),
            right=grow(best.right_rows, depth + 1),
        )

    return grow(np.arange(X.shape[0], dtype=np.int64), 0)


def predict_tree(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    """Leaf value reached by each row."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0])
    stack = [(tree, np.arange(X.shape[0], dtype=np.int64))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if node.is_leaf:
            out[rows] = node.value
            continue
        x = X[rows, node.feature]
        if node.categories is not None:
            mask = np.isin(x.astype(np.int64), sorted(node.categories))
        else:
            mask = x < node.threshold
        stack.append((node.left, rows[mask]))
        stack.append((node.right, rows[~mask]))
    return out


@dataclass
class GbmModel:
    """Additive tree ensemble with a logistic link."""

    trees: list[TreeNode]
    learning_rate: float
    base_logit: float
    feature_count: int
    categorical_features: frozenset[int] = frozenset()
    train_losses: list[float] | None = None  # BCE per round, not serialized

    def predict_logit(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ValueError(
                f"expected (n x {self.feature_count}) inputs, got {X.shape}"
            )
        logits = np.full(X.shape[0], self.base_logit)
        for tree in self.trees:
            logits += self.learning_rate * predict_tree(tree, X)
        return logits

    def predict_proba_positive(self, X: np.ndarray) -> np.ndarray:
        return expit(self.predict_logit(X))

    def to_dict(self) -> dict:
        return {
            "kind": "gbm",
            "learning_rate": self.learning_rate,
            "base_logit": self.base_logit,
            "feature_count": self.feature_count,
            "categorical_features": sorted(self.categorical_features),
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GbmModel":
        return cls(
            trees=[TreeNode.from_dict(t) for t in data["trees"]],
            learning_rate=float(data["learning_rate"]),
            base_logit=float(data["base_logit"]),
            feature_count=int(data["feature_count"]),
            categorical_features=frozenset(int(c) for c in data["categorical_features"]),
        )


def logistic_loss_from_logits(logits: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross entropy, computed stably from logits."""
    per_row = np.logaddexp(0.0, logits) - y * logits
    return float(per_row.mean())


class NewtonBoostingClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier API over the boosted ensemble.

    ``categorical_features`` lists column indices treated as unordered
    category ids; everything else splits on thresholds.
    """

    def __init__(
        self,
        rounds: int = 200,
        max_depth: int = 5,
        learning_rate: float = 0.1,
        reg_lambda: float = 1.0,
        min_child_weight: float = 1.0,
        categorical_features: tuple[int, ...] = (),
        seed: int = 0,
    ):
        self.rounds = rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.categorical_features = categorical_features
        self.seed = seed

    def fit(self, X, y):
        hyper = GbmHyper(
            rounds=self.rounds,
            max_depth=self.max_depth,
            learning_rate=self.learning_rate,
            reg_lambda=self.reg_lambda,
            min_child_weight=self.min_child_weight,
            seed=self.seed,
        )
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y disagree on row count")
        if X.shape[0] < 2:
            raise ValueError("need at least 2 rows")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("labels must be binary")
        if y.min() == y.max():
            raise ValueError("degenerate labels: both classes must be present")
        categorical = frozenset(self.categorical_features)
        if categorical and (min(categorical) < 0 or max(categorical) >= X.shape[1]):
            raise ValueError("categorical feature index out of range")

        p_mean = float(y.mean())
        base_logit = math.log(p_mean / (1.0 - p_mean))
        logits = np.full(X.shape[0], base_logit)
        trees: list[TreeNode] = []
        losses = [logistic_loss_from_logits(logits, y)]
        for _ in range(hyper.rounds):
            p = expit(logits)
            g = p - y
            h = p * (1.0 - p)
            tree = build_tree(
                X, g, h,
                max_depth=hyper.max_depth,
                reg_lambda=hyper.reg_lambda,
                min_child_weight=hyper.min_child_weight,
                categorical_features=categorical,
            )
            trees.append(tree)
            logits += hyper.learning_rate * predict_tree(tree, X)
            losses.append(logistic_loss_from_logits(logits, y))

        self.model_ = GbmModel(
            trees=trees,
            learning_rate=hyper.learning_rate,
            base_logit=base_logit,
            feature_count=X.shape[1],
            categorical_features=categorical,
        )
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.train_losses_ = losses
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return self.model_.predict_logit(X)

    def predict_proba(self, X) -> np.ndarray:
        positive = expit(self.decision_function(X))
        return np.column_stack([1.0 - positive, positive])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(np.int64)
