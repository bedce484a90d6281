#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
配置文件示例

请复制此文件为 config.py 并按需修改
"""

# 实验默认配置
EXPERIMENT_DEFAULTS = {
    "folds": 10,             # 分层交叉验证折数
    "train_fraction": 0.8,   # 训练集比例，其余作为样本外测试
    "steps": 1000,           # SERA 积分网格步数 T（步长 0.001）
    "rope": 0.01,            # 贝叶斯符号检验的 ROPE 半径
    "bayes_samples": 50000,  # 蒙特卡洛抽样次数
    "grid": {
        "nrounds": [250, 500],
        "max_depth": [3, 5, 7],
        "eta": [0.001, 0.01, 0.1],
    },
}

# 结果输出目录
OUTPUT_DIR = "data/results"
