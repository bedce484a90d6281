#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
实验配置模块

默认值来自 config/config.py 中的 EXPERIMENT_DEFAULTS（不存在时使用内置默认值），
也可以通过 JSON 文件覆盖。
"""

import json
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

from sklearn.model_selection import ParameterGrid

from src.core.bayes_sign_test import DEFAULT_ROPE, DEFAULT_SAMPLES
from src.core.boosting import Hyperparams, ObjectiveKind
from src.core.errors import DataFormatError, InvalidInputError
from src.core.relevance import ExtremeType

# 配置日志
logger = logging.getLogger(__name__)

# 导入配置
try:
    from config.config import EXPERIMENT_DEFAULTS
except ImportError:
    EXPERIMENT_DEFAULTS = {}  # 使用内置默认值

# 超参数网格（nrounds × max_depth × eta，共 18 组）
DEFAULT_GRID_SPEC = {
    "nrounds": [250, 500],
    "max_depth": [3, 5, 7],
    "eta": [1e-3, 1e-2, 1e-1],
}

THREADS_ENV = "SERA_THREADS"


def threads_from_env() -> int:
    """读取 SERA_THREADS，未设置或为 0 表示顺序执行"""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 0
    try:
        value = int(raw)
    except ValueError:
        raise InvalidInputError(f"环境变量 {THREADS_ENV} 必须是整数，实际为 {raw!r}")
    if value < 0:
        raise InvalidInputError(f"环境变量 {THREADS_ENV} 不能为负")
    return value


def parse_grid(spec: Any) -> List[Hyperparams]:
    """
    解析超参数网格

    Args:
        spec: 超参数字典列表，或 {"nrounds": [...], "max_depth": [...], "eta": [...]} 形式的笛卡尔积

    Returns:
        Hyperparams 列表
    """
    if isinstance(spec, dict):
        spec = {k: v if isinstance(v, list) else [v] for k, v in spec.items()}
        spec = list(ParameterGrid(spec))
    if not isinstance(spec, list):
        raise InvalidInputError("grid 必须是列表或参数字典")
    grid = [p if isinstance(p, Hyperparams) else Hyperparams.from_dict(p) for p in spec]
    if not grid:
        raise InvalidInputError("超参数网格不能为空")
    return grid


def default_grid() -> List[Hyperparams]:
    return parse_grid(EXPERIMENT_DEFAULTS.get("grid", DEFAULT_GRID_SPEC))


@dataclass
class ExperimentConfig:
    """一次完整实验的配置"""

    target_column: str = ""
    grid: List[Hyperparams] = field(default_factory=default_grid)
    folds: int = EXPERIMENT_DEFAULTS.get("folds", 10)
    train_fraction: float = EXPERIMENT_DEFAULTS.get("train_fraction", 0.8)
    steps: int = EXPERIMENT_DEFAULTS.get("steps", 1000)
    rope: float = EXPERIMENT_DEFAULTS.get("rope", DEFAULT_ROPE)
    seed: int = 0
    extreme_type_override: Optional[ExtremeType] = None
    objectives: Tuple[str, ...] = ("mse", "sera")
    model_tag: str = "gbrt"
    bayes_samples: int = EXPERIMENT_DEFAULTS.get("bayes_samples", DEFAULT_SAMPLES)
    on_missing: str = "error"
    threads: int = field(default_factory=threads_from_env)

    def __post_init__(self):
        self.grid = parse_grid(self.grid)
        self.extreme_type_override = ExtremeType.parse(self.extreme_type_override)
        self.objectives = tuple(ObjectiveKind.parse(o).value for o in self.objectives)
        if not self.objectives:
            raise InvalidInputError("至少需要一个目标函数")
        if self.folds < 2:
            raise InvalidInputError("折数至少为 2")
        if not 0.0 < self.train_fraction < 1.0:
            raise InvalidInputError("train_fraction 必须在 (0, 1) 内")
        if self.steps < 1:
            raise InvalidInputError("steps 必须为正整数")
        if self.rope < 0:
            raise InvalidInputError("rope 不能为负")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        data = dict(data)
        # 兼容 T 的写法
        if "T" in data:
            data["steps"] = data.pop("T")
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"未知的配置项: {sorted(unknown)}")
        if "objectives" in data:
            data["objectives"] = tuple(data["objectives"])
        return cls(**data)

    @classmethod
    def from_json(cls, path: str, **overrides) -> "ExperimentConfig":
        """从 JSON 文件读取配置，overrides 中非 None 的值覆盖文件内容"""
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise DataFormatError(f"配置文件不存在: {path}")
        except json.JSONDecodeError as e:
            raise DataFormatError(f"配置文件不是合法的 JSON: {e.msg}", line=e.lineno)
        if not isinstance(data, dict):
            raise DataFormatError("配置文件顶层必须是对象")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target_column": self.target_column,
            "grid": [p.to_dict() for p in self.grid],
            "folds": self.folds,
            "train_fraction": self.train_fraction,
            "steps": self.steps,
            "rope": self.rope,
            "seed": self.seed,
            "extreme_type_override": self.extreme_type_override.value if self.extreme_type_override else None,
            "objectives": list(self.objectives),
            "model_tag": self.model_tag,
            "bayes_samples": self.bayes_samples,
            "on_missing": self.on_missing,
        }
