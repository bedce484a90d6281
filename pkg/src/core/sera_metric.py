#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
SERA 指标模块

计算 SER_t、SERA（梯形求积形式与解析形式）、SERA 对预测值的一阶/二阶导数，
以及提供给提升树目标函数使用的逐样本权重。

所有函数都是纯函数，可在多线程中并发调用。
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.integrate import trapezoid

from src.core.errors import InvalidInputError
from src.utils.validation import aligned_vectors, as_relevance_vector

# 配置日志
logger = logging.getLogger(__name__)

# 默认网格：步长 0.001
DEFAULT_STEPS = 1000

# 直接求积时每批处理的样本数，限制 (T+1)×N 指示矩阵的内存
_DIRECT_CHUNK = 2048


@dataclass(frozen=True)
class RelevanceGrid:
    """相关性阈值网格 t_k = k/T, k = 0..T"""

    steps: int = DEFAULT_STEPS

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidInputError(f"网格步数 T 必须是正整数，实际为 {self.steps}")

    @property
    def cutoffs(self) -> np.ndarray:
        return np.arange(self.steps + 1, dtype=np.float64) / self.steps

    @property
    def step(self) -> float:
        return 1.0 / self.steps


@dataclass(frozen=True)
class SeraWeights:
    """
    逐样本 SERA 权重

    w_j = (1/T)·(1 + 2·n_j + 1(φ(y_j) ≥ 1))，只依赖目标值，与预测无关。
    """

    weights: np.ndarray
    relevances: np.ndarray
    n_counts: np.ndarray
    steps: int

    def __len__(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class SeraCurve:
    """SER_t 随阈值 t 变化的曲线"""

    thresholds: np.ndarray
    ser: np.ndarray

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.thresholds.tolist(), self.ser.tolist()))


def _residuals(y, y_hat, relevances) -> Tuple[np.ndarray, np.ndarray]:
    y_arr, y_hat_arr, phi = aligned_vectors((y, "y"), (y_hat, "y_hat"), (relevances, "relevances"))
    phi = as_relevance_vector(phi)
    return y_hat_arr - y_arr, phi


def _ser_at(sq_err: np.ndarray, phi: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """
    一次性计算多个阈值处的 SER_t

    按相关性排序后用后缀和查表，φ(y_i) ≥ t 的样本即排序后 searchsorted(left) 之后的部分。
    """
    order = np.argsort(phi, kind="mergesort")
    sorted_phi = phi[order]
    suffix = np.concatenate([np.cumsum(sq_err[order][::-1])[::-1], [0.0]])
    first = np.searchsorted(sorted_phi, thresholds, side="left")
    return suffix[first]


def ser_t(y, y_hat, relevances, t: float) -> float:
    """
    计算 SER_t：相关性不低于 t 的样本的平方误差之和

    Args:
        y: 真实值
        y_hat: 预测值
        relevances: 每个样本的 φ(y)
        t: 相关性阈值，[0, 1]

    Returns:
        平方误差和
    """
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"阈值 t 必须在 [0, 1] 内，实际为 {t}")
    r, phi = _residuals(y, y_hat, relevances)
    return float(np.sum(r[phi >= t] ** 2))


def sera_curve(y, y_hat, relevances, grid: RelevanceGrid = RelevanceGrid()) -> SeraCurve:
    """在网格 t_0..t_T 上计算 SER_t 曲线（随 t 单调不增）"""
    r, phi = _residuals(y, y_hat, relevances)
    thresholds = grid.cutoffs
    return SeraCurve(thresholds, _ser_at(r ** 2, phi, thresholds))


def sera_trapezoid(y, y_hat, relevances, grid: RelevanceGrid = RelevanceGrid()) -> float:
    """
    用梯形法则在均匀网格上积分 SER_t 得到 SERA

    (1/T)·(½·SER_{t_0} + Σ_{k=1}^{T-1} SER_{t_k} + ½·SER_{t_T})
    """
    curve = sera_curve(y, y_hat, relevances, grid)
    return float(trapezoid(curve.ser, dx=grid.step))


def area_under_curve(curve: SeraCurve) -> float:
    """由已保存的 SER_t 曲线重新积分出 SERA"""
    return float(trapezoid(curve.ser, x=curve.thresholds))


def sera_analytic(y, y_hat, relevances) -> float:
    """
    SERA 的精确值 Σ φ(y_i)·(ŷ_i − y_i)²

    ∫₀¹ 1(φ(y_i) ≥ t) dt = φ(y_i)，只作为测试对照，不用于训练。
    """
    r, phi = _residuals(y, y_hat, relevances)
    return float(np.sum(phi * r ** 2))


def restricted_sera(y, y_hat, relevances, thresholds) -> Tuple[np.ndarray, np.ndarray]:
    """
    只统计 φ(y_i) ≥ φ' 的样本时的 SERA（解析形式），对每个阈值 φ' 各算一次

    Returns:
        (每个阈值下的 SERA, 每个阈值下的样本数)
    """
    r, phi = _residuals(y, y_hat, relevances)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    sera = _ser_at(phi * r ** 2, phi, thresholds)
    counts = phi.size - np.searchsorted(np.sort(phi), thresholds, side="left")
    return sera, counts


def sera_weights(relevances, grid: RelevanceGrid = RelevanceGrid()) -> SeraWeights:
    """
    计算逐样本权重

    n_j 为内部阈值 k/T (k = 1..T-1) 中满足 φ(y_j) ≥ k/T 的个数，比较使用精确的 ≥。

    Args:
        relevances: φ(y_j)，必须在 [0, 1] 内
        grid: 阈值网格

    Returns:
        SeraWeights
    """
    phi = as_relevance_vector(relevances)
    interior = grid.cutoffs[1:-1]
    n_counts = np.searchsorted(interior, phi, side="right").astype(np.int64)
    top = (phi >= 1.0).astype(np.float64)
    weights = (1.0 + 2.0 * n_counts + top) / grid.steps
    return SeraWeights(weights=weights, relevances=phi, n_counts=n_counts, steps=grid.steps)


def _check_weights(weights: SeraWeights, n: int) -> None:
    if len(weights) != n:
        raise InvalidInputError(f"SERA 权重长度 {len(weights)} 与样本数 {n} 不一致")


def sera_gradient(y, y_hat, weights: SeraWeights) -> np.ndarray:
    """一阶导数的闭式近似 g_j = w_j·(ŷ_j − y_j)"""
    y_arr, y_hat_arr = aligned_vectors((y, "y"), (y_hat, "y_hat"))
    _check_weights(weights, y_arr.size)
    return weights.weights * (y_hat_arr - y_arr)


def sera_hessian(weights: SeraWeights) -> np.ndarray:
    """二阶导数 h_j = w_j，与预测值无关"""
    return weights.weights.copy()


def _direct_integral(phi: np.ndarray, grid: RelevanceGrid) -> np.ndarray:
    """对每个样本直接做 ∫₀¹ 1(φ_j ≥ t) dt 的梯形求积"""
    cutoffs = grid.cutoffs[:, None]
    out = np.empty(phi.size, dtype=np.float64)
    for start in range(0, phi.size, _DIRECT_CHUNK):
        block = phi[None, start:start + _DIRECT_CHUNK]
        indicator = (block >= cutoffs).astype(np.float64)
        out[start:start + _DIRECT_CHUNK] = trapezoid(indicator, dx=grid.step, axis=0)
    return out


def sera_gradient_direct(y, y_hat, relevances, grid: RelevanceGrid = RelevanceGrid()) -> np.ndarray:
    """
    直接用梯形法则求一阶导数 2∫₀¹(ŷ_j − y_j)·1(φ_j ≥ t) dt

    逐阈值展开指示函数，复杂度 O(T·N)，用于与闭式近似比较误差和耗时。
    """
    r, phi = _residuals(y, y_hat, relevances)
    return 2.0 * _direct_integral(phi, grid) * r


def sera_hessian_direct(relevances, grid: RelevanceGrid = RelevanceGrid()) -> np.ndarray:
    """直接用梯形法则求二阶导数 2∫₀¹ 1(φ_j ≥ t) dt"""
    phi = as_relevance_vector(relevances)
    return 2.0 * _direct_integral(phi, grid)
