#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
梯度提升树测试
"""

import json
import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.boosting import (GbmModel, Hyperparams, Objective, RegressionTree, base_score_for, fit,
                               fit_arrays, grad_hess, predict)
from src.core.errors import InvalidInputError, SchemaMismatchError
from src.core.relevance import build_relevance
from src.core.sera_metric import SeraWeights, sera_weights
from src.utils.synthetic import make_skewed_regression


class PlainSquaredError:
    """只实现接口的自定义目标函数，与内置 MSE 等价"""

    name = "custom_mse"

    def grad_hess(self, y, y_hat):
        return y_hat - y, np.ones_like(y)

    def base_score(self, y):
        return float(np.mean(y))

    def loss(self, y, y_hat):
        return float(0.5 * np.sum((y_hat - y) ** 2))


def explicit_weights(values):
    values = np.asarray(values, dtype=float)
    return SeraWeights(weights=values, relevances=np.zeros(values.size),
                       n_counts=np.zeros(values.size, dtype=np.int64), steps=1)


def small_params(**kwargs):
    defaults = {"nrounds": 20, "max_depth": 3, "eta": 0.3}
    defaults.update(kwargs)
    return Hyperparams(**defaults)


def test_grad_hess_examples():
    g, h = grad_hess(Objective.mse(), [1.0, 2.0], [1.5, 1.0])
    np.testing.assert_allclose(g, [0.5, -1.0])
    np.testing.assert_allclose(h, [1.0, 1.0])

    g, h = grad_hess(Objective.sera(explicit_weights([0.002, 0.5])), [1.0, 2.0], [1.5, 1.0])
    np.testing.assert_allclose(g, [0.001, -0.5])
    np.testing.assert_allclose(h, [0.002, 0.5])


def test_grad_hess_rejects_misaligned_weights():
    with pytest.raises(InvalidInputError):
        grad_hess(Objective.sera(explicit_weights([1.0])), [1.0, 2.0], [1.0, 2.0])


def test_base_score_examples():
    assert base_score_for(Objective.mse(), [1.0, 2.0, 6.0]) == pytest.approx(3.0)
    assert base_score_for(Objective.sera(explicit_weights([1.0, 3.0])), [0.0, 10.0]) == pytest.approx(7.5)


def test_hyperparams_validation_and_serialization():
    with pytest.raises(InvalidInputError):
        Hyperparams(nrounds=0)
    with pytest.raises(InvalidInputError):
        Hyperparams(eta=0.0)
    with pytest.raises(InvalidInputError):
        Hyperparams.from_dict({"nrounds": 10, "subsample": 0.5})
    params = Hyperparams.from_dict({"nrounds": 10, "max_depth": 2, "eta": 0.01, "lambda": 2.0})
    assert params.reg_lambda == 2.0
    assert Hyperparams.from_dict(params.to_dict()) == params


def test_constant_target_predicts_constant():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    y = np.full(50, 4.0)
    model = fit_arrays(X, y, Objective.mse(), small_params())
    np.testing.assert_allclose(predict(model, X), 4.0, rtol=0, atol=1e-12)
    assert all(tree.n_nodes == 1 for tree in model.trees)


def test_zero_trees_predicts_base_score():
    model = GbmModel(base_score=3.5, eta=0.1, feature_names=["a", "b"], objective_kind="mse")
    np.testing.assert_allclose(predict(model, np.zeros((4, 2))), 3.5)


def test_routing_threshold_goes_left_on_equality():
    tree = RegressionTree(
        feature=np.array([0, -1, -1]),
        threshold=np.array([0.5, 0.0, 0.0]),
        left=np.array([1, -1, -1]),
        right=np.array([2, -1, -1]),
        value=np.array([0.0, -1.0, 2.0]),
    )
    model = GbmModel(base_score=10.0, eta=0.5, feature_names=["a"], objective_kind="mse", trees=[tree])
    np.testing.assert_allclose(predict(model, [[0.4], [0.5], [0.6]]), [9.5, 9.5, 11.0])


def test_predict_schema_mismatch():
    data = make_skewed_regression(n=60, seed=1)
    model = fit(data, Objective.mse(), small_params(nrounds=3))
    with pytest.raises(SchemaMismatchError):
        predict(model, data.features[:, :3])
    with pytest.raises(InvalidInputError):
        predict(model, np.full((1, 5), np.nan))


def test_fit_rejects_too_few_rows():
    with pytest.raises(InvalidInputError):
        fit_arrays([[1.0]], [1.0], Objective.mse(), small_params())


def test_sera_with_unit_relevance_and_no_regularization_matches_mse():
    data = make_skewed_regression(n=500, seed=3)
    params = Hyperparams(nrounds=30, max_depth=3, eta=0.1, reg_lambda=0.0)
    weights = sera_weights(np.ones(data.n_rows))
    mse_model = fit(data, Objective.mse(), params)
    sera_model = fit(data, Objective.sera(weights), params)
    np.testing.assert_allclose(predict(sera_model, data.features), predict(mse_model, data.features),
                               rtol=0, atol=1e-9)


def test_training_loss_is_non_increasing():
    data = make_skewed_regression(n=300, seed=4)
    phi = build_relevance(data.target)
    for objective in (Objective.mse(), Objective.sera(sera_weights(phi(data.target)))):
        model = fit(data, objective, Hyperparams(nrounds=40, max_depth=3, eta=0.1))
        losses = np.array(model.train_loss)
        assert np.all(np.diff(losses) <= 1e-9 * losses[:-1])


def test_predict_reproduces_training_predictions():
    data = make_skewed_regression(n=200, seed=5)
    objective = Objective.mse()
    model = fit(data, objective, small_params())
    final_loss = objective.loss(data.target, predict(model, data.features))
    assert final_loss == pytest.approx(model.train_loss[-1], rel=1e-12)


def test_training_is_deterministic():
    data = make_skewed_regression(n=150, seed=6)
    first = fit(data, Objective.mse(), small_params(), seed=1).to_dict()
    second = fit(data, Objective.mse(), small_params(), seed=1).to_dict()
    assert first == second


def test_split_tie_breaks_by_feature_then_threshold():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    X = np.column_stack([x, x])
    y = np.array([1.0, -1.0, 1.0, -1.0])
    model = fit_arrays(X, y, Objective.mse(), Hyperparams(nrounds=1, max_depth=1, eta=1.0))
    root = model.trees[0]
    # 阈值 0.5 与 2.5 增益相同，两列完全相同
    assert root.feature[0] == 0
    assert root.threshold[0] == 0.5


def test_tree_depth_and_leaf_values():
    data = make_skewed_regression(n=400, seed=7)
    params = Hyperparams(nrounds=1, max_depth=2, eta=1.0, reg_lambda=1.5)
    model = fit(data, Objective.mse(), params)
    tree = model.trees[0]
    assert tree.depth() <= 2

    g = model.base_score - data.target
    leaves = tree.apply(data.features)
    for leaf in np.unique(leaves):
        members = leaves == leaf
        expected = -np.sum(g[members]) / (np.sum(members) + params.reg_lambda)
        assert tree.value[leaf] == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_deeper_trees_respect_max_depth():
    data = make_skewed_regression(n=300, seed=8)
    for depth in (1, 3, 5):
        model = fit(data, Objective.mse(), Hyperparams(nrounds=3, max_depth=depth, eta=0.1))
        assert all(tree.depth() <= depth for tree in model.trees)


def test_custom_objective_matches_builtin_mse():
    data = make_skewed_regression(n=250, seed=9)
    params = small_params()
    builtin = fit(data, Objective.mse(), params)
    custom = fit(data, PlainSquaredError(), params)
    np.testing.assert_allclose(predict(custom, data.features), predict(builtin, data.features),
                               rtol=0, atol=1e-12)
    assert custom.objective_kind == "custom_mse"


def test_model_json_round_trip():
    data = make_skewed_regression(n=120, seed=10)
    model = fit(data, Objective.mse(), small_params(nrounds=5))
    restored = GbmModel.from_dict(json.loads(json.dumps(model.to_dict())))
    np.testing.assert_array_equal(predict(restored, data.features), predict(model, data.features))
    assert restored.params == model.params
    assert restored.feature_names == model.feature_names


def test_from_dict_rejects_foreign_document():
    with pytest.raises(InvalidInputError):
        GbmModel.from_dict({"format": "other"})
