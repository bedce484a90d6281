#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
目标函数效果方向测试（较慢，用 pytest -m "not slow" 跳过）

在对数正态合成数据上，SERA 优化的模型应在样本外 SERA 上更好，MSE 优化的模型应在 MSE 上更好。
"""

import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.boosting import Hyperparams, Objective, fit, predict
from src.core.evaluation import holdout_split
from src.core.relevance import build_relevance
from src.core.sera_metric import sera_trapezoid, sera_weights
from src.utils.synthetic import make_skewed_regression

SEEDS = range(10)
PARAMS = Hyperparams(nrounds=100, max_depth=3, eta=0.1)


def holdout_scores(seed):
    data = make_skewed_regression(n=2000, seed=seed)
    train, test = holdout_split(data, 0.8, seed=seed)
    phi = build_relevance(train.target)
    models = {
        "mse": fit(train, Objective.mse(), PARAMS, seed=seed),
        "sera": fit(train, Objective.sera(sera_weights(phi(train.target))), PARAMS, seed=seed),
    }
    scores = {}
    for name, model in models.items():
        y_hat = predict(model, test.features)
        scores[name] = {
            "sera": sera_trapezoid(test.target, y_hat, phi(test.target)),
            "mse": float(np.mean((y_hat - test.target) ** 2)),
        }
    return scores


@pytest.mark.slow
def test_each_objective_wins_on_its_own_metric():
    results = [holdout_scores(seed) for seed in SEEDS]
    sera_wins = sum(r["sera"]["sera"] < r["mse"]["sera"] for r in results)
    mse_wins = sum(r["mse"]["mse"] < r["sera"]["mse"] for r in results)
    assert sera_wins >= 7
    assert mse_wins >= 7
