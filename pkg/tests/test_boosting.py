import json
import math

import numpy as np
import pytest
from scipy.special import expit

from segrank.boosting import (
    GbmHyper,
    GbmModel,
    NewtonBoostingClassifier,
    TreeNode,
    build_tree,
    leaf_value,
    logistic_loss_from_logits,
    predict_tree,
    split_gain,
)


def brute_force_best_gain(X, g, h, reg_lambda, min_child_weight=0.0):
    """Exhaustive scan over every (feature, threshold) partition."""
    n, p = X.shape
    total_g, total_h = g.sum(), h.sum()
    best = -math.inf
    for f in range(p):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            t = 0.5 * (lo + hi)
            if not t > lo:
                t = hi
            mask = X[:, f] < t
            gl, hl = g[mask].sum(), h[mask].sum()
            gr, hr = total_g - gl, total_h - hl
            if hl < min_child_weight or hr < min_child_weight:
                continue
            best = max(best, split_gain(gl, hl, gr, hr, reg_lambda))
    return best


def root_split_gain(tree, X, g, h, reg_lambda):
    """Gain of the root split actually chosen, recomputed from scratch."""
    assert not tree.is_leaf
    x = X[:, tree.feature]
    if tree.categories is not None:
        mask = np.isin(x.astype(np.int64), sorted(tree.categories))
    else:
        mask = x < tree.threshold
    return split_gain(
        g[mask].sum(), h[mask].sum(), g[~mask].sum(), h[~mask].sum(), reg_lambda
    )


class TestHandValues:
    def test_prior_only_model(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(10, 3))
        y = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
        est = NewtonBoostingClassifier(rounds=0).fit(X, y)
        proba = est.predict_proba(X)[:, 1]
        assert np.allclose(proba, 0.3)

    def test_one_row_newton_step(self):
        # from p = 0.5 and y = 1: g = -0.5, h = 0.25, leaf = 0.5 / 1.25 = 0.4
        X = np.array([[0.0]])
        tree = build_tree(X, np.array([-0.5]), np.array([0.25]), max_depth=1, reg_lambda=1.0)
        assert tree.is_leaf
        assert tree.value == pytest.approx(0.4, abs=1e-12)
        assert expit(tree.value) == pytest.approx(0.598688, abs=1e-6)

    def test_leaf_value_formula(self):
        assert leaf_value(-0.5, 0.25, 1.0) == pytest.approx(0.4)
        assert leaf_value(2.0, 3.0, 0.0) == pytest.approx(-2.0 / 3.0)

    def test_two_rows_perfect_split(self):
        X = np.array([[0.0, 5.0], [1.0, 5.0]])
        y = np.array([0, 1])
        p = np.full(2, 0.5)
        g, h = p - y, p * (1 - p)
        tree = build_tree(X, g, h, max_depth=1, reg_lambda=1.0)
        assert not tree.is_leaf
        assert tree.feature == 0  # the only informative feature
        chosen = root_split_gain(tree, X, g, h, 1.0)
        assert chosen == pytest.approx(brute_force_best_gain(X, g, h, 1.0), abs=1e-12)


class TestExactGreedy:
    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(42)
        reg_lambda = 1.0
        for trial in range(50):
            n = int(rng.integers(2, 65))
            p = int(rng.integers(1, 9))
            X = rng.normal(size=(n, p))
            if trial % 3 == 0:  # inject ties so equal values are handled
                X = np.round(X * 2) / 2
            probs = rng.uniform(0.05, 0.95, size=n)
            y = (rng.random(n) < probs).astype(float)
            g = probs - y
            h = probs * (1 - probs)
            tree = build_tree(X, g, h, max_depth=1, reg_lambda=reg_lambda)
            brute = brute_force_best_gain(X, g, h, reg_lambda)
            if tree.is_leaf:
                assert brute <= 1e-12 or brute == -math.inf
            else:
                chosen = root_split_gain(tree, X, g, h, reg_lambda)
                assert chosen == pytest.approx(brute, abs=1e-12)

    def test_min_child_weight_respected(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 3))
        probs = rng.uniform(0.2, 0.8, size=20)
        y = (rng.random(20) < probs).astype(float)
        g, h = probs - y, probs * (1 - probs)
        mcw = 1.0
        tree = build_tree(X, g, h, max_depth=3, reg_lambda=1.0, min_child_weight=mcw)

        def check(node, rows):
            if node.is_leaf:
                return
            x = X[rows, node.feature]
            mask = x < node.threshold
            assert h[rows][mask].sum() >= mcw - 1e-12
            assert h[rows][~mask].sum() >= mcw - 1e-12
            check(node.left, rows[mask])
            check(node.right, rows[~mask])

        check(tree, np.arange(20))

    def test_huge_min_child_weight_forces_leaf(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(10, 2))
        y = (rng.random(10) < 0.5).astype(float)
        est = NewtonBoostingClassifier(rounds=3, min_child_weight=100.0).fit(X, y)
        assert all(tree.is_leaf for tree in est.model_.trees)


class TestTrainingBehaviour:
    def make_problem(self, n=80, p=5, seed=3):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, p))
        logits = X[:, 0] * 2.0 - X[:, 1]
        y = (rng.random(n) < expit(logits)).astype(float)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        return X, y

    @pytest.mark.parametrize("eta", [0.1, 1.0])
    def test_loss_non_increasing(self, eta):
        X, y = self.make_problem()
        est = NewtonBoostingClassifier(rounds=20, learning_rate=eta).fit(X, y)
        losses = est.train_losses_
        assert len(losses) == 21
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

    def test_gradient_matches_finite_differences_of_loss(self):
        rng = np.random.default_rng(4)
        n = 20
        logits = rng.normal(size=n)
        y = (rng.random(n) < 0.5).astype(float)
        g = expit(logits) - y  # booster's first derivative of the summed loss
        step = 1e-6
        worst = 0.0
        for i in range(n):
            hi = logits.copy(); hi[i] += step
            lo = logits.copy(); lo[i] -= step
            fd = (logistic_loss_from_logits(hi, y) - logistic_loss_from_logits(lo, y)) * n / (2 * step)
            worst = max(worst, abs(fd - g[i]) / max(abs(fd), abs(g[i]), 1e-8))
        assert worst < 1e-4

    def test_deterministic_fit_and_serialization(self):
        X, y = self.make_problem()
        est1 = NewtonBoostingClassifier(rounds=15).fit(X, y)
        est2 = NewtonBoostingClassifier(rounds=15).fit(X, y)
        blob1 = json.dumps(est1.model_.to_dict(), sort_keys=True)
        blob2 = json.dumps(est2.model_.to_dict(), sort_keys=True)
        assert blob1 == blob2

    def test_serialization_round_trip_preserves_predictions(self):
        X, y = self.make_problem()
        est = NewtonBoostingClassifier(rounds=10).fit(X, y)
        again = GbmModel.from_dict(est.model_.to_dict())
        assert np.array_equal(
            again.predict_proba_positive(X), est.model_.predict_proba_positive(X)
        )
        assert json.dumps(again.to_dict(), sort_keys=True) == json.dumps(
            est.model_.to_dict(), sort_keys=True
        )

    def test_degenerate_labels_rejected(self):
        X = np.zeros((4, 2))
        with pytest.raises(ValueError, match="degenerate"):
            NewtonBoostingClassifier(rounds=1).fit(X, np.ones(4))

    def test_non_binary_labels_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            NewtonBoostingClassifier().fit(np.zeros((2, 1)), np.array([0.0, 0.5]))

    def test_too_few_rows_rejected(self):
        with pytest.raises(ValueError, match="2 rows"):
            NewtonBoostingClassifier().fit(np.zeros((1, 1)), np.array([1.0]))

    def test_categorical_index_out_of_range(self):
        with pytest.raises(ValueError, match="categorical"):
            NewtonBoostingClassifier(categorical_features=(5,)).fit(
                np.zeros((4, 2)), np.array([0.0, 1.0, 0.0, 1.0])
            )

    def test_predict_proba_shape_and_threshold(self):
        X, y = self.make_problem()
        est = NewtonBoostingClassifier(rounds=5).fit(X, y)
        proba = est.predict_proba(X)
        assert proba.shape == (len(y), 2)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert np.array_equal(est.predict(X), (proba[:, 1] >= 0.5).astype(int))

    def test_feature_count_checked_at_predict(self):
        X, y = self.make_problem()
        est = NewtonBoostingClassifier(rounds=2).fit(X, y)
        with pytest.raises(ValueError):
            est.model_.predict_logit(np.zeros((2, X.shape[1] + 1)))


class TestCategoricalHandling:
    def make_problem(self, seed=0, n=120, n_cats=6):
        rng = np.random.default_rng(seed)
        cats = rng.integers(0, n_cats, size=n)
        x1 = rng.normal(size=n)
        # classes {1, 4} behave differently: outcome depends on category identity
        logits = np.where(np.isin(cats, [1, 4]), 2.0, -2.0) + 0.5 * x1
        y = (rng.random(n) < expit(logits)).astype(float)
        X = np.column_stack([cats.astype(float), x1])
        return X, y

    def test_category_identity_learned(self):
        X, y = self.make_problem()
        est = NewtonBoostingClassifier(
            rounds=30, categorical_features=(0,), min_child_weight=0.0
        ).fit(X, y)
        used_categorical = any(
            node.categories is not None
            for tree in est.model_.trees
            for node in _walk(tree)
            if not node.is_leaf
        )
        assert used_categorical

    def test_bijective_relabeling_invariance(self):
        X, y = self.make_problem()
        rng = np.random.default_rng(9)
        perm = rng.permutation(10)  # non-monotone bijection on category ids
        X_renamed = X.copy()
        X_renamed[:, 0] = perm[X[:, 0].astype(int)]
        base = NewtonBoostingClassifier(rounds=25, categorical_features=(0,)).fit(X, y)
        renamed = NewtonBoostingClassifier(rounds=25, categorical_features=(0,)).fit(X_renamed, y)
        p1 = base.model_.predict_proba_positive(X)
        p2 = renamed.model_.predict_proba_positive(X_renamed)
        assert np.allclose(p1, p2, atol=1e-12)

    def test_monotone_relabeling_invariance(self):
        X, y = self.make_problem(seed=3)
        X_renamed = X.copy()
        X_renamed[:, 0] = X[:, 0] * 7 + 3
        base = NewtonBoostingClassifier(rounds=25, categorical_features=(0,)).fit(X, y)
        renamed = NewtonBoostingClassifier(rounds=25, categorical_features=(0,)).fit(X_renamed, y)
        assert np.allclose(
            base.model_.predict_proba_positive(X),
            renamed.model_.predict_proba_positive(X_renamed),
            atol=1e-12,
        )

    def test_unseen_category_routes_right(self):
        node = TreeNode(
            feature=0,
            categories=frozenset({0, 1}),
            left=TreeNode(value=1.0),
            right=TreeNode(value=-1.0),
        )
        out = predict_tree(node, np.array([[0.0], [1.0], [9.0]]))
        assert out.tolist() == [1.0, 1.0, -1.0]


class TestUnusedFeatureInvariance:
    def test_constant_column_never_used(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(60, 3))
        X[:, 2] = 7.0  # constant: no valid threshold exists
        y = (rng.random(60) < expit(X[:, 0])).astype(float)
        est = NewtonBoostingClassifier(rounds=10).fit(X, y)
        X_changed = X.copy()
        X_changed[:, 2] = rng.normal(size=60)
        assert np.array_equal(
            est.model_.predict_proba_positive(X),
            est.model_.predict_proba_positive(X_changed),
        )


class TestHyperValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(rounds=-1),
            dict(max_depth=0),
            dict(learning_rate=0.0),
            dict(reg_lambda=-0.5),
            dict(min_child_weight=-1.0),
        ],
    )
    def test_invalid_hyper(self, kwargs):
        with pytest.raises(ValueError):
            GbmHyper(**kwargs)


def _walk(node):
    yield node
    if not node.is_leaf:
        yield from _walk(node.left)
        yield from _walk(node.right)
