#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
贝叶斯符号检验模块

先按折计算两个工作流的归一化得分差（先验 z），再用带实际等价区间（ROPE）的
贝叶斯符号检验比较多个数据集上的结果。
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Sequence

import numpy as np

from src.core.errors import DegenerateScoreError, InvalidInputError
from src.utils.validation import aligned_vectors, as_finite_vector

# 配置日志
logger = logging.getLogger(__name__)

DEFAULT_ROPE = 0.01
DEFAULT_SAMPLES = 50000
# ROPE 中心伪观测的先验强度
PRIOR_STRENGTH = 0.5
MIN_SAMPLES = 10000
_CHUNK = 10000


@dataclass(frozen=True)
class BayesPosterior:
    """后验概率：left 表示 SERA 优化的工作流实际更好（z < -rope）"""

    p_left: float
    p_rope: float
    p_right: float
    rope_radius: float
    n_samples: int

    @property
    def verdict(self) -> str:
        regions = {"sera_better": self.p_left, "equivalent": self.p_rope, "mse_better": self.p_right}
        return max(regions, key=regions.get)

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data["verdict"] = self.verdict
        return data


def compute_prior(fold_scores_S: Sequence[float], fold_scores_M: Sequence[float]) -> float:
    """
    计算单个数据集的先验 z

    z = mean_k (L_k(W^S) - L_k(W^M)) / L_k(W^M)，z < 0 表示 SERA 优化的工作流损失更低。

    Args:
        fold_scores_S: SERA 优化工作流的逐折得分
        fold_scores_M: MSE 优化工作流的逐折得分

    Returns:
        z
    """
    s, m = aligned_vectors((fold_scores_S, "fold_scores_S"), (fold_scores_M, "fold_scores_M"))
    if s.size == 0:
        raise InvalidInputError("逐折得分不能为空")
    if np.any(m == 0):
        raise DegenerateScoreError("基准工作流存在得分为 0 的折，无法归一化")
    return float(np.mean((s - m) / m))


def bayes_sign_test(z, rope_radius: float = DEFAULT_ROPE, n_samples: int = DEFAULT_SAMPLES,
                    seed: int = 0) -> BayesPosterior:
    """
    带 ROPE 的贝叶斯符号检验

    在 z 之外加入一个位于 0 的伪观测（先验强度 0.5），从 Dirichlet(0.5, 1, ..., 1) 中抽取权重，
    把每次抽样中落在左侧 / ROPE / 右侧的权重质量累加，后验取三者的蒙特卡洛均值。

    Args:
        z: 每个数据集的先验
        rope_radius: ROPE 半径
        n_samples: 蒙特卡洛抽样次数
        seed: 随机种子

    Returns:
        BayesPosterior
    """
    z = as_finite_vector(z, "z")
    if z.size == 0:
        raise InvalidInputError("z 不能为空")
    if n_samples < MIN_SAMPLES:
        raise InvalidInputError(f"n_samples 至少为 {MIN_SAMPLES}，实际为 {n_samples}")
    if rope_radius < 0:
        raise InvalidInputError("ROPE 半径不能为负")

    points = np.concatenate([[0.0], z])
    alpha = np.concatenate([[PRIOR_STRENGTH], np.ones(z.size)])
    regions = np.stack([points < -rope_radius,
                        np.abs(points) <= rope_radius,
                        points > rope_radius], axis=1).astype(np.float64)

    rng = np.random.default_rng(seed)
    totals = np.zeros(3)
    remaining = n_samples
    while remaining > 0:
        size = min(_CHUNK, remaining)
        weights = rng.dirichlet(alpha, size=size)
        totals += (weights @ regions).sum(axis=0)
        remaining -= size

    probs = totals / totals.sum()
    posterior = BayesPosterior(float(probs[0]), float(probs[1]), float(probs[2]), float(rope_radius), int(n_samples))
    logger.info(f"贝叶斯符号检验: left={posterior.p_left:.4f}, rope={posterior.p_rope:.4f}, "
                f"right={posterior.p_right:.4f} ({z.size} 个数据集)")
    return posterior
