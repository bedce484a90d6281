#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
相关性函数模块

根据目标变量的调整箱线图（adjusted boxplot）自动构造相关性函数 φ: Y → [0, 1]，
并判断数据集的极值类型（低端 / 高端 / 两端）。
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from statsmodels.stats.stattools import medcouple as _sm_medcouple

from src.core.errors import DegenerateDistributionError, InvalidInputError
from src.utils.validation import as_finite_vector

# 配置日志
logger = logging.getLogger(__name__)

# 箱线图须长系数
DEFAULT_WHISKER_COEF = 1.5

# 超过该样本量时 medcouple 改为逐块计算
MEDCOUPLE_DENSE_LIMIT = 2000
MEDCOUPLE_BLOCK_ELEMENTS = 1 << 20


class ExtremeType(str, Enum):
    """极值类型"""

    LOW = "low"
    HIGH = "high"
    BOTH = "both"

    @classmethod
    def parse(cls, value: Optional[str]) -> Optional["ExtremeType"]:
        """从命令行/配置字符串解析，None 原样返回"""
        if value is None or isinstance(value, ExtremeType):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidInputError(f"未知的极值类型: {value} (可选 low/high/both)")


@dataclass(frozen=True)
class BoxplotStats:
    """调整箱线图的统计量"""

    q1: float
    median: float
    q3: float
    iqr: float
    medcouple: float
    lower_fence: float
    upper_fence: float
    n_low_outliers: int = 0
    n_high_outliers: int = 0


@dataclass(frozen=True)
class ControlPoint:
    y: float
    relevance: float
    slope: float = 0.0


@dataclass(frozen=True)
class RelevanceFunction:
    """
    分段三次 Hermite 相关性函数

    控制点之间使用三次 Hermite 插值，控制点范围之外取最近控制点的相关性（常数外推），
    结果截断到 [0, 1]。构造后不可变，可在多线程中共享。
    """

    control_points: Tuple[ControlPoint, ...]
    extreme_type: ExtremeType = ExtremeType.BOTH
    _spline: CubicHermiteSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = tuple(self.control_points)
        if len(points) < 2:
            raise InvalidInputError("相关性函数至少需要 2 个控制点")
        ys = np.array([p.y for p in points], dtype=np.float64)
        phis = np.array([p.relevance for p in points], dtype=np.float64)
        slopes = np.array([p.slope for p in points], dtype=np.float64)
        if not (np.all(np.isfinite(ys)) and np.all(np.isfinite(phis)) and np.all(np.isfinite(slopes))):
            raise InvalidInputError("控制点包含非有限值")
        if np.any(np.diff(ys) <= 0):
            raise InvalidInputError("控制点的 y 必须严格递增")
        if phis.min() < 0.0 or phis.max() > 1.0:
            raise InvalidInputError("控制点的相关性必须在 [0, 1] 内")
        object.__setattr__(self, "control_points", points)
        object.__setattr__(self, "_spline", CubicHermiteSpline(ys, phis, slopes, extrapolate=False))

    @classmethod
    def from_control_points(cls, points: Iterable[Sequence[float]],
                            extreme_type: ExtremeType = ExtremeType.BOTH) -> "RelevanceFunction":
        """
        由用户给定的控制点列表构造

        Args:
            points: [(y, phi), ...] 或 [(y, phi, slope), ...]
            extreme_type: 记录用的极值类型

        Returns:
            RelevanceFunction
        """
        control_points = []
        for p in points:
            if len(p) not in (2, 3):
                raise InvalidInputError(f"控制点格式应为 (y, phi[, slope])，实际为 {p}")
            control_points.append(ControlPoint(float(p[0]), float(p[1]), float(p[2]) if len(p) == 3 else 0.0))
        return cls(tuple(control_points), ExtremeType.parse(extreme_type))

    @property
    def knots(self) -> np.ndarray:
        return np.array([p.y for p in self.control_points])

    @property
    def relevances(self) -> np.ndarray:
        return np.array([p.relevance for p in self.control_points])

    def __call__(self, y) -> np.ndarray:
        """对数组批量求值，要求全部为有限值"""
        arr = as_finite_vector(y, "y")
        knots = self.knots
        clipped = np.clip(arr, knots[0], knots[-1])
        result = np.clip(self._spline(clipped), 0.0, 1.0)
        # 落在控制点上（含两端外推）的值直接取控制点的相关性
        pos = np.minimum(np.searchsorted(knots, clipped), knots.size - 1)
        on_knot = knots[pos] == clipped
        result[on_knot] = self.relevances[pos[on_knot]]
        return result

    def to_dict(self) -> dict:
        return {
            "extreme_type": self.extreme_type.value,
            "control_points": [[p.y, p.relevance, p.slope] for p in self.control_points],
        }


def _kernel_halves(arr: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    """按中位数中心化后拆成上下两半（均升序），并返回中位数处的并列个数"""
    y = np.sort(arr)
    n = y.size
    mf = (y[n // 2 - 1] + y[n // 2]) / 2 if n % 2 == 0 else y[(n - 1) // 2]
    z = y - mf
    lower = z[z <= 0.0]
    upper = z[z >= 0.0]
    return upper, lower, int(np.sum(lower == 0.0))


def _kernel_rows(upper: np.ndarray, lower: np.ndarray, n_ties: int, start: int, stop: int) -> np.ndarray:
    """
    计算核矩阵的第 [start, stop) 行

    h(u, l) = (u + l) / (u - l)；u = l = 0 的并列块使用符号核，
    第 a 个上半并列点与第 b 个下半并列点取 sign(a + b - n_ties + 1)。
    """
    u = upper[start:stop, None]
    standardization = u - lower
    standardization[(u == 0.0) & (lower == 0.0)] = np.inf
    h = (u + lower) / standardization
    if n_ties and start < n_ties:
        rows = np.arange(start, min(stop, n_ties))
        cols = np.arange(n_ties)
        h[rows - start, lower.size - n_ties:] = np.sign(rows[:, None] + cols[None, :] - n_ties + 1)
    # 数学上核值在 [-1, 1] 内
    return np.clip(h, -1.0, 1.0)


def _kth_kernel(upper: np.ndarray, lower: np.ndarray, n_ties: int, k: int,
                block_rows: int, bins: int = 1024) -> float:
    """
    逐块扫描核矩阵，用直方图不断缩小区间，求第 k 小（从 0 开始）的核值

    工作内存只与块大小有关。当前区间为 [lo, hi)，最右侧的区间为 [lo, hi]；
    区间内的核值全部相同或不超过一个块时直接返回。
    """
    lo, hi, closed = -1.0, 1.0, True
    offset = 0
    limit = block_rows * lower.size
    while True:
        edges = np.linspace(lo, hi, bins + 1)
        counts = np.zeros(bins, dtype=np.int64)
        inside: List[np.ndarray] = []
        n_inside = 0
        vmin, vmax = math.inf, -math.inf
        for start in range(0, upper.size, block_rows):
            h = _kernel_rows(upper, lower, n_ties, start, start + block_rows).ravel()
            values = h[(h >= lo) & ((h < hi) | (closed & (h == hi)))]
            if values.size == 0:
                continue
            vmin, vmax = min(vmin, float(values.min())), max(vmax, float(values.max()))
            idx = np.minimum(np.searchsorted(edges, values, side="right") - 1, bins - 1)
            counts += np.bincount(idx, minlength=bins)
            n_inside += values.size
            if n_inside <= limit:
                inside.append(values)
        rank = k - offset
        if vmin == vmax:
            return vmin
        if n_inside <= limit:
            return float(np.partition(np.concatenate(inside), rank)[rank])
        cumulative = np.cumsum(counts)
        b = int(np.searchsorted(cumulative, rank, side="right"))
        offset += int(cumulative[b - 1]) if b else 0
        closed = closed and b == bins - 1
        lo, hi = float(edges[b]), float(edges[b + 1])


def _medcouple_blocked(arr: np.ndarray, block_elements: int = MEDCOUPLE_BLOCK_ELEMENTS) -> float:
    """按行分块计算的 medcouple，内存占用为 O(block_elements + n)"""
    upper, lower, n_ties = _kernel_halves(arr)
    block_rows = max(1, block_elements // lower.size)
    total = upper.size * lower.size
    ranks = sorted({(total - 1) // 2, total // 2})
    return float(np.mean([_kth_kernel(upper, lower, n_ties, k, block_rows) for k in ranks]))


def medcouple(sample, dense_limit: int = MEDCOUPLE_DENSE_LIMIT) -> float:
    """
    计算 medcouple 稳健偏度统计量

    核函数中位数，中位数处的并列点使用符号核。样本不超过 dense_limit 时直接用
    statsmodels 构造完整核矩阵，更大的样本改为逐块扫描，避免 O(n²) 内存。

    Args:
        sample: 至少 3 个有限值
        dense_limit: 使用完整核矩阵的最大样本量

    Returns:
        [-1, 1] 之间的偏度
    """
    arr = as_finite_vector(sample, "sample", min_size=3)
    if arr.size <= dense_limit:
        mc = float(_sm_medcouple(arr))
    else:
        logger.debug(f"样本量 {arr.size} 超过 {dense_limit}，逐块计算 medcouple")
        mc = _medcouple_blocked(arr)
    # 浮点误差可能略微越界
    return min(1.0, max(-1.0, mc))


def adjusted_boxplot(sample, coef: float = DEFAULT_WHISKER_COEF) -> BoxplotStats:
    """
    计算调整箱线图统计量

    四分位数采用顺序统计量之间的线性插值（type 7），须长按 medcouple 做指数缩放。

    Args:
        sample: 目标变量样本
        coef: 须长系数，默认 1.5

    Returns:
        BoxplotStats
    """
    if coef <= 0:
        raise InvalidInputError("须长系数必须大于 0")
    arr = as_finite_vector(sample, "sample", min_size=3)
    q1, median, q3 = (float(v) for v in np.quantile(arr, [0.25, 0.5, 0.75], method="linear"))
    iqr = q3 - q1
    mc = medcouple(arr)

    if mc >= 0:
        lower_fence = q1 - coef * math.exp(-4.0 * mc) * iqr
        upper_fence = q3 + coef * math.exp(3.0 * mc) * iqr
    else:
        lower_fence = q1 - coef * math.exp(-3.0 * mc) * iqr
        upper_fence = q3 + coef * math.exp(4.0 * mc) * iqr

    return BoxplotStats(
        q1=q1,
        median=median,
        q3=q3,
        iqr=iqr,
        medcouple=mc,
        lower_fence=lower_fence,
        upper_fence=upper_fence,
        n_low_outliers=int(np.sum(arr < lower_fence)),
        n_high_outliers=int(np.sum(arr > upper_fence)),
    )


def infer_extreme_type(sample, stats: BoxplotStats) -> ExtremeType:
    """
    根据须外的离群点判断极值类型

    恰好落在须上的点不算离群点。两侧都没有离群点时默认为 BOTH。
    """
    arr = as_finite_vector(sample, "sample")
    has_low = bool(np.any(arr < stats.lower_fence))
    has_high = bool(np.any(arr > stats.upper_fence))
    if has_low and not has_high:
        return ExtremeType.LOW
    if has_high and not has_low:
        return ExtremeType.HIGH
    return ExtremeType.BOTH


def build_relevance(sample, type_override: Optional[ExtremeType] = None,
                    coef: float = DEFAULT_WHISKER_COEF) -> RelevanceFunction:
    """
    自动构造相关性函数

    控制点取自调整箱线图：中位数处相关性为 0，须处相关性为 1，斜率均为 0。

    Args:
        sample: 目标变量样本
        type_override: 指定极值类型，None 表示自动推断
        coef: 须长系数

    Returns:
        RelevanceFunction
    """
    stats = adjusted_boxplot(sample, coef=coef)
    if stats.iqr <= 0:
        raise DegenerateDistributionError(
            f"目标变量四分位距为 0 (q1 = q3 = {stats.q1})，无法构造相关性函数")

    extreme_type = ExtremeType.parse(type_override) or infer_extreme_type(sample, stats)

    points: List[ControlPoint] = []
    if extreme_type in (ExtremeType.LOW, ExtremeType.BOTH):
        points.append(ControlPoint(stats.lower_fence, 1.0))
    points.append(ControlPoint(stats.median, 0.0))
    if extreme_type in (ExtremeType.HIGH, ExtremeType.BOTH):
        points.append(ControlPoint(stats.upper_fence, 1.0))

    logger.debug(f"相关性控制点 ({extreme_type.value}): {[(p.y, p.relevance) for p in points]}")
    return RelevanceFunction(tuple(points), extreme_type)


def evaluate_relevance(phi: RelevanceFunction, y: float) -> float:
    """对单个目标值求相关性"""
    if not math.isfinite(y):
        raise InvalidInputError(f"y 必须是有限值，实际为 {y}")
    return float(phi([y])[0])


def relevance_grid(phi: RelevanceFunction, y, points: int = 200, margin: float = 0.1) -> Tuple[np.ndarray, np.ndarray]:
    """
    在 [min(y) - margin·range, max(y) + margin·range] 上等距采样相关性曲线

    Returns:
        (网格 y, 对应 φ)
    """
    if points < 2:
        raise InvalidInputError("采样点数至少为 2")
    arr = as_finite_vector(y, "y", min_size=1)
    lo, hi = float(arr.min()), float(arr.max())
    span = hi - lo
    grid = np.linspace(lo - margin * span, hi + margin * span, points)
    return grid, phi(grid)
