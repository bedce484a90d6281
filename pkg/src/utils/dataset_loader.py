#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
数据集加载模块

读取带表头的 CSV 文件，把非数值列做 one-hot 编码（列名为 `列名=取值`），
并按参数处理缺失单元格。
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.errors import DataFormatError, InvalidInputError

# 配置日志
logger = logging.getLogger(__name__)

MISSING_POLICIES = ("error", "drop_rows")


@dataclass
class Dataset:
    """
    编码后的数据集

    features 为行优先的 float64 矩阵，row_ids 记录每一行在原始文件中的数据行号（从 0 开始）。
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: List[str]
    target_name: str = "y"
    nominal_map: Dict[str, List[str]] = field(default_factory=dict)
    n_nominal: int = 0
    n_numeric: int = 0
    row_ids: Optional[np.ndarray] = None
    dropped_rows: int = 0
    name: str = "dataset"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.features.ndim != 2:
            raise InvalidInputError("特征矩阵必须是二维的")
        if self.target.size != self.features.shape[0]:
            raise InvalidInputError(f"目标长度 {self.target.size} 与行数 {self.features.shape[0]} 不一致")
        if len(self.feature_names) != self.features.shape[1]:
            raise InvalidInputError("特征名数量与列数不一致")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise InvalidInputError("编码后的列名必须唯一")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.target))):
            raise InvalidInputError("数据集包含非有限值")
        if self.row_ids is None:
            self.row_ids = np.arange(self.n_rows)
        if not self.n_nominal and not self.n_numeric:
            self.n_numeric = self.features.shape[1]

    @property
    def n_rows(self) -> int:
        return int(self.target.size)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """按行号取子集，保留列信息"""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            target=self.target[idx],
            feature_names=list(self.feature_names),
            target_name=self.target_name,
            nominal_map=dict(self.nominal_map),
            n_nominal=self.n_nominal,
            n_numeric=self.n_numeric,
            row_ids=self.row_ids[idx],
            name=self.name,
        )


def _looks_numeric(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def load_csv(path: str, target_column: str, on_missing: str = "error") -> Dataset:
    """
    读取 CSV 数据集

    Args:
        path: 文件路径
        target_column: 目标列名
        on_missing: 缺失单元格的处理方式，error 报错或 drop_rows 删除整行

    Returns:
        Dataset
    """
    if on_missing not in MISSING_POLICIES:
        raise InvalidInputError(f"on_missing 只能是 {MISSING_POLICIES}，实际为 {on_missing}")
    if not os.path.exists(path):
        raise DataFormatError(f"文件不存在: {path}")

    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataFormatError("文件为空", line=1)
    except pd.errors.ParserError as e:
        raise DataFormatError(f"CSV 解析失败: {e}")

    header = [str(c).strip() for c in raw.columns]
    if header and all(_looks_numeric(c) for c in header):
        raise DataFormatError("缺少表头（第一行全部是数值）", line=1)
    raw.columns = header
    if target_column not in raw.columns:
        raise DataFormatError(f"找不到目标列: {target_column}", line=1)

    raw = raw.fillna("").apply(lambda col: col.str.strip())
    missing = raw.eq("")
    incomplete = missing.any(axis=1).to_numpy()
    if incomplete.any():
        if on_missing == "error":
            # 表头是第 1 行，数据从第 2 行开始
            first = int(np.argmax(incomplete)) + 2
            raise DataFormatError("存在空单元格（可使用 --on-missing drop_rows 删除）", line=first)
        logger.warning(f"删除 {int(incomplete.sum())} 行含缺失值的数据")
    row_ids = np.flatnonzero(~incomplete)
    data = raw.loc[~incomplete].reset_index(drop=True)

    target = pd.to_numeric(data[target_column], errors="coerce")
    if target.isna().any():
        bad = int(np.argmax(target.isna().to_numpy()))
        raise DataFormatError(f"目标列 {target_column} 无法解析为数值: {data[target_column].iloc[bad]!r}",
                              line=int(row_ids[bad]) + 2)

    numeric_cols, nominal_cols = [], []
    for col in data.columns:
        if col == target_column:
            continue
        if pd.to_numeric(data[col], errors="coerce").notna().all():
            numeric_cols.append(col)
        else:
            nominal_cols.append(col)

    parts = []
    feature_names: List[str] = []
    nominal_map: Dict[str, List[str]] = {}
    for col in data.columns:
        if col in numeric_cols:
            parts.append(pd.to_numeric(data[col]).astype(np.float64).to_frame(col))
            feature_names.append(col)
        elif col in nominal_cols:
            dummies = pd.get_dummies(data[col], prefix=col, prefix_sep="=", dtype=np.float64)
            parts.append(dummies)
            nominal_map[col] = list(dummies.columns)
            feature_names.extend(dummies.columns)

    if len(set(feature_names)) != len(feature_names):
        raise DataFormatError("one-hot 编码后的列名与已有列重名")

    features = pd.concat(parts, axis=1).to_numpy(dtype=np.float64) if parts else np.empty((len(data), 0))
    target_values = target.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(target_values)):
        raise DataFormatError(f"目标列 {target_column} 包含非有限值")

    dataset = Dataset(
        features=features,
        target=target_values,
        feature_names=feature_names,
        target_name=target_column,
        nominal_map=nominal_map,
        n_nominal=len(nominal_cols),
        n_numeric=len(numeric_cols),
        row_ids=row_ids,
        dropped_rows=int(incomplete.sum()),
        name=os.path.splitext(os.path.basename(path))[0],
    )
    logger.info(f"加载数据集 {dataset.name}: {dataset.n_rows} 行, {len(numeric_cols)} 个数值列, "
                f"{len(nominal_cols)} 个名义列 → {len(feature_names)} 个特征")
    return dataset
