#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
结果存储模块

把实验记录保存为 JSON，把 SERA 曲线、相关性曲线和预测结果保存为 CSV。
所有文件先写临时文件再重命名，保证一次写成。浮点数在 CSV 中保留 17 位有效数字。
"""

import csv
import io
import json
import logging
import os
import tempfile
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from src.core.boosting import GbmModel
from src.core.errors import DataFormatError
from src.core.sera_metric import SeraCurve

# 配置日志
logger = logging.getLogger(__name__)

# 获取项目根目录
ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), '../..'))

# 导入配置
try:
    from config.config import OUTPUT_DIR
except ImportError:
    OUTPUT_DIR = os.path.join(ROOT_DIR, "data", "results")  # 默认输出目录


def format_float(value: float) -> str:
    """17 位有效数字，保证 binary64 往返不丢精度"""
    return format(float(value), ".17g")


def format_filename(name: str) -> str:
    """把模型名/数据集名转换为安全的文件名"""
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in name).strip("._")
    return safe or "result"


def atomic_write_text(path: str, text: str) -> str:
    """
    原子写入文本文件

    Args:
        path: 目标路径
        text: 文件内容

    Returns:
        写入的路径
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except Exception as e:
        logger.error(f"写入文件时出错: {str(e)}")
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return path


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write_text(path, buffer.getvalue())


def _read_csv(path: str, header: Sequence[str]) -> List[List[str]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            found = next(reader, None)
            if found != list(header):
                raise DataFormatError(f"表头应为 {','.join(header)}，实际为 {found}", line=1)
            return [row for row in reader if row]
    except FileNotFoundError:
        raise DataFormatError(f"文件不存在: {path}")


def save_json(data: Dict[str, Any], path: str) -> str:
    """保存 JSON（Python 的 float repr 可精确往返）"""
    text = json.dumps(data, ensure_ascii=False, indent=2, allow_nan=False)
    atomic_write_text(path, text + "\n")
    logger.info(f"结果已保存为JSON: {path}")
    return path


def load_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataFormatError(f"文件不存在: {path}")
    except json.JSONDecodeError as e:
        raise DataFormatError(f"不是合法的 JSON: {e.msg}", line=e.lineno)


def save_curve_csv(curve: SeraCurve, path: str) -> str:
    """保存 SERA 曲线，表头 t,ser"""
    return _write_csv(path, ["t", "ser"], zip(curve.thresholds.tolist(), curve.ser.tolist()))


def load_curve_csv(path: str) -> SeraCurve:
    rows = np.array(_read_csv(path, ["t", "ser"]), dtype=np.float64).reshape(-1, 2)
    return SeraCurve(rows[:, 0], rows[:, 1])


def save_relevance_csv(y_grid: Sequence[float], phi_values: Sequence[float], path: str) -> str:
    """保存相关性曲线，表头 y,phi"""
    return _write_csv(path, ["y", "phi"], zip(np.asarray(y_grid, dtype=float).tolist(),
                                              np.asarray(phi_values, dtype=float).tolist()))


def save_predictions_csv(row_id: Sequence[int], y: Sequence[float], yhat: Sequence[float], path: str) -> str:
    """保存预测结果，表头 row_id,y,yhat"""
    rows = zip(np.asarray(row_id, dtype=np.int64).tolist(),
               np.asarray(y, dtype=float).tolist(),
               np.asarray(yhat, dtype=float).tolist())
    return _write_csv(path, ["row_id", "y", "yhat"], rows)


def load_predictions_csv(path: str) -> Dict[str, np.ndarray]:
    rows = _read_csv(path, ["row_id", "y", "yhat"])
    return {
        "row_id": np.array([int(r[0]) for r in rows], dtype=np.int64),
        "y": np.array([float(r[1]) for r in rows]),
        "yhat": np.array([float(r[2]) for r in rows]),
    }


def save_model(model: GbmModel, path: str) -> str:
    """保存模型为 JSON"""
    return save_json(model.to_dict(), path)


def load_model(path: str) -> GbmModel:
    return GbmModel.from_dict(load_json(path))


def record_to_dict(record, curve_files: Dict[str, str], prediction_files: Dict[str, str]) -> Dict[str, Any]:
    """
    把 ExperimentRecord 转换为 JSON 字典

    Args:
        record: ExperimentRecord
        curve_files: 模型名 → 曲线 CSV 路径
        prediction_files: 模型名 → 预测 CSV 路径

    Returns:
        可直接序列化的字典
    """
    return {
        "dataset": record.dataset,
        "profile": record.profile.to_dict(),
        "relevance": record.relevance.to_dict(),
        "best": {name: result.to_dict() for name, result in record.best.items()},
        "grid_results": {name: [r.to_dict() for r in results] for name, results in record.all_results.items()},
        "oos": record.oos,
        "curves": curve_files,
        "predictions": prediction_files,
        "turning_point": record.turning_point.to_dict() if record.turning_point else None,
        "ranks": record.ranks,
        "config": record.config.to_dict() if record.config else None,
    }


def save_experiment(record, out_dir: str = None) -> str:
    """
    保存实验记录及其曲线、预测文件

    Args:
        record: ExperimentRecord
        out_dir: 输出目录，默认为配置中的 OUTPUT_DIR

    Returns:
        记录 JSON 的路径
    """
    out_dir = out_dir or OUTPUT_DIR
    os.makedirs(out_dir, exist_ok=True)
    prefix = format_filename(record.dataset)

    curve_files: Dict[str, str] = {}
    prediction_files: Dict[str, str] = {}
    try:
        for model_name, curve in record.curves.items():
            path = os.path.join(out_dir, f"{prefix}_curve_{format_filename(model_name)}.csv")
            save_curve_csv(curve, path)
            curve_files[model_name] = path
        for model_name, preds in record.predictions.items():
            path = os.path.join(out_dir, f"{prefix}_predictions_{format_filename(model_name)}.csv")
            save_predictions_csv(preds["row_id"], preds["y"], preds["yhat"], path)
            prediction_files[model_name] = path
    except OSError as e:
        logger.error(f"保存实验文件时出错: {str(e)}")
        raise

    return save_json(record_to_dict(record, curve_files, prediction_files),
                     os.path.join(out_dir, f"{prefix}_record.json"))
