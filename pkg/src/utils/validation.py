#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
输入校验工具

把列表/数组统一转换为 float64 一维数组，并在不合法时抛出 InvalidInputError。
"""

from typing import Sequence, Tuple

import numpy as np

from src.core.errors import InvalidInputError


def as_finite_vector(values, name: str = "values", min_size: int = 0) -> np.ndarray:
    """
    转换为一维 float64 数组并检查有限性

    Args:
        values: 任意可转换为数组的序列
        name: 用于错误信息的参数名
        min_size: 最少元素个数

    Returns:
        一维 float64 数组
    """
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"{name} 无法转换为数值数组: {e}") from e
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} 必须是一维数组，实际维度为 {arr.ndim}")
    if arr.size < min_size:
        raise InvalidInputError(f"{name} 至少需要 {min_size} 个值，实际只有 {arr.size} 个")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} 包含非有限值 (NaN 或 inf)")
    return arr


def aligned_vectors(*pairs: Tuple[object, str]) -> Sequence[np.ndarray]:
    """
    转换多个向量并要求长度一致

    Args:
        pairs: (values, name) 元组

    Returns:
        转换后的数组列表，顺序与输入相同
    """
    arrays = [as_finite_vector(values, name) for values, name in pairs]
    lengths = {arr.size for arr in arrays}
    if len(lengths) > 1:
        detail = ", ".join(f"{name}={arr.size}" for arr, (_, name) in zip(arrays, pairs))
        raise InvalidInputError(f"向量长度不一致: {detail}")
    return arrays


def as_relevance_vector(values, name: str = "relevances") -> np.ndarray:
    """相关性向量必须落在 [0, 1] 内"""
    arr = as_finite_vector(values, name)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise InvalidInputError(f"{name} 必须在 [0, 1] 区间内")
    return arr
