#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
异常定义模块

项目内所有可预期的计算错误都继承自 SeraError，命令行入口据此决定退出码。
"""

from typing import Optional


class SeraError(Exception):
    """所有项目异常的基类"""


class InvalidInputError(SeraError, ValueError):
    """输入数据不合法（长度不一致、非有限值、取值越界等）"""


class SchemaMismatchError(InvalidInputError):
    """预测时特征列数与训练时不一致"""


class DataFormatError(InvalidInputError):
    """CSV/JSON 文件格式错误，可携带出错的行号"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"第 {line} 行: {message}"
        super().__init__(message)


class DegenerateDistributionError(SeraError):
    """目标变量分布退化（例如四分位距为 0），无法构造相关性函数"""


class DegenerateScoreError(SeraError):
    """基准得分为 0，无法计算归一化差值"""


class StageError(SeraError):
    """
    实验流程中某个阶段失败

    Args:
        stage: 阶段名称，如 grid_search、refit
        cause: 原始异常
    """

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"阶段 [{stage}] 失败: {cause}")
