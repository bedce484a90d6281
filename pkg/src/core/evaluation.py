#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
实验评估模块

实现完整的评估流程：数据集概况、80/20 划分、分层 k 折交叉验证网格搜索、
样本外 MSE/SERA 评分、SERA 曲线、转折点以及模型排名。
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import rankdata
from sklearn.metrics import mean_squared_error
from tqdm import tqdm

from src.core.boosting import GbmModel, Hyperparams, Objective, ObjectiveKind, fit, predict
from src.core.errors import InvalidInputError, SeraError, StageError
from src.core.experiment_config import ExperimentConfig
from src.core.relevance import ExtremeType, RelevanceFunction, build_relevance
from src.core.sera_metric import (RelevanceGrid, SeraCurve, restricted_sera, sera_curve, sera_gradient,
                                  sera_gradient_direct, sera_hessian, sera_hessian_direct, sera_trapezoid,
                                  sera_weights)
from src.utils.dataset_loader import Dataset
from src.utils.validation import aligned_vectors

# 配置日志
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetProfile:
    """数据集概况（行数、名义/数值列数、稀有样本数、不平衡率、极值类型）"""

    n_rows: int
    n_nominal: int
    n_numeric: int
    n_rare: int
    imbalance_ratio: float
    extreme_type: ExtremeType

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["extreme_type"] = self.extreme_type.value
        # 与表格列名保持一致的别名
        data["ir"] = self.imbalance_ratio
        return data


@dataclass(frozen=True)
class Workflow:
    model_tag: str
    objective_kind: ObjectiveKind
    params: Hyperparams

    def to_dict(self) -> Dict[str, Any]:
        return {"model": self.model_tag, "objective": self.objective_kind.value, "params": self.params.to_dict()}


@dataclass
class CvResult:
    workflow: Workflow
    fold_scores_sera: List[float]
    fold_scores_mse: List[float]
    mean_sera: float = field(init=False)
    mean_mse: float = field(init=False)

    def __post_init__(self):
        self.mean_sera = float(np.mean(self.fold_scores_sera))
        self.mean_mse = float(np.mean(self.fold_scores_mse))

    def to_dict(self) -> Dict[str, Any]:
        data = self.workflow.to_dict()
        data["cv_scores"] = {"sera": list(self.fold_scores_sera), "mse": list(self.fold_scores_mse)}
        data["mean_sera"] = self.mean_sera
        data["mean_mse"] = self.mean_mse
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CvResult":
        workflow = Workflow(data["model"], ObjectiveKind.parse(data["objective"]), Hyperparams.from_dict(data["params"]))
        return cls(workflow, [float(v) for v in data["cv_scores"]["sera"]],
                   [float(v) for v in data["cv_scores"]["mse"]])


@dataclass(frozen=True)
class TurningPoint:
    """
    转折点

    phi_t 为 None 表示 SERA 优化模型在任何阈值下都没有严格更低的受限 SERA；
    holds_on_suffix 记录更大阈值处是否也一直成立。
    """

    phi_t: Optional[float]
    holds_on_suffix: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"phi_t": self.phi_t, "holds_on_suffix": self.holds_on_suffix}


@dataclass
class ExperimentRecord:
    """一次实验的全部结果"""

    dataset: str
    profile: DatasetProfile
    relevance: RelevanceFunction
    best: Dict[str, CvResult]
    all_results: Dict[str, List[CvResult]]
    oos: Dict[str, Dict[str, float]]
    curves: Dict[str, SeraCurve]
    predictions: Dict[str, Dict[str, np.ndarray]]
    turning_point: Optional[TurningPoint]
    ranks: Dict[str, Dict[str, float]] = field(default_factory=dict)
    config: Optional[ExperimentConfig] = None


def profile(dataset: Dataset, phi: RelevanceFunction) -> DatasetProfile:
    """
    计算数据集概况

    稀有样本为 φ(y) = 1 的样本，不平衡率 IR = n_rare / n_rows × 100。
    """
    relevances = phi(dataset.target)
    n_rare = int(np.sum(relevances >= 1.0))
    n_rows = dataset.n_rows
    return DatasetProfile(
        n_rows=n_rows,
        n_nominal=dataset.n_nominal,
        n_numeric=dataset.n_numeric,
        n_rare=n_rare,
        imbalance_ratio=100.0 * n_rare / n_rows if n_rows else 0.0,
        extreme_type=phi.extreme_type,
    )


def holdout_split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """
    随机划分训练集与测试集

    训练集大小为 ⌈train_fraction·n⌉，其余为测试集。
    """
    n = dataset.n_rows
    if n < 5:
        raise InvalidInputError(f"划分至少需要 5 行，实际为 {n}")
    if not 0.0 < train_fraction < 1.0:
        raise InvalidInputError("train_fraction 必须在 (0, 1) 内")
    n_train = min(n - 1, math.ceil(round(train_fraction * n, 9)))
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(order[:n_train])), dataset.subset(np.sort(order[n_train:]))


def stratified_kfold(train: Dataset, k: int, phi: RelevanceFunction, seed: int = 0) -> List[np.ndarray]:
    """
    按相关性分层的 k 折划分

    先随机打乱，再按 φ(y) 稳定排序（相同 φ 的行保持随机顺序），最后轮流发牌到各折。

    Returns:
        k 个互不相交的验证集行号数组
    """
    n = train.n_rows
    if k < 2:
        raise InvalidInputError("折数至少为 2")
    if n < k:
        raise InvalidInputError(f"行数 {n} 少于折数 {k}")
    shuffled = np.random.default_rng(seed).permutation(n)
    relevances = phi(train.target)
    order = shuffled[np.argsort(relevances[shuffled], kind="mergesort")]
    return [np.sort(order[i::k]) for i in range(k)]


def _cell_seed(seed: int, workflow_index: int, fold_index: int) -> int:
    """每个 (工作流, 折) 单元的独立种子，与执行顺序无关"""
    return int(np.random.SeedSequence([seed, workflow_index, fold_index]).generate_state(1)[0])


def _make_objective(kind: ObjectiveKind, phi: RelevanceFunction, y: np.ndarray, grid: RelevanceGrid) -> Objective:
    if kind is ObjectiveKind.MSE:
        return Objective.mse()
    return Objective.sera(sera_weights(phi(y), grid))


def _score(y: np.ndarray, y_hat: np.ndarray, phi: RelevanceFunction, grid: RelevanceGrid) -> Tuple[float, float]:
    return sera_trapezoid(y, y_hat, phi(y), grid), float(mean_squared_error(y, y_hat))


def _run_cell(train: Dataset, valid_idx: np.ndarray, kind: ObjectiveKind, params: Hyperparams,
              phi: RelevanceFunction, grid: RelevanceGrid, seed: int) -> Tuple[float, float]:
    mask = np.ones(train.n_rows, dtype=bool)
    mask[valid_idx] = False
    fit_part = train.subset(np.flatnonzero(mask))
    valid_part = train.subset(valid_idx)
    model = fit(fit_part, _make_objective(kind, phi, fit_part.target, grid), params, seed=seed)
    return _score(valid_part.target, predict(model, valid_part.features), phi, grid)


def grid_search(train: Dataset, model_tag: str, objective_kind, grid: Sequence[Hyperparams],
                phi: RelevanceFunction, seed: int = 0, folds: int = 10, steps: int = 1000,
                threads: int = 0, verbose: bool = False) -> Tuple[CvResult, List[CvResult]]:
    """
    交叉验证网格搜索

    所有工作流共用同一组分层折，按平均 SERA 选出最佳工作流；平局时依次取 nrounds 小、
    max_depth 小、eta 小者，仍相同则取网格中靠前者。

    Args:
        train: 训练集
        model_tag: 模型标识
        objective_kind: mse 或 sera
        grid: 超参数网格
        phi: 训练集上构造的相关性函数
        seed: 随机种子
        folds: 折数
        steps: SERA 网格步数 T
        threads: 并行任务数，0 表示顺序执行
        verbose: 是否显示进度条

    Returns:
        (最佳结果, 全部结果)
    """
    grid = list(grid)
    if not grid:
        raise InvalidInputError("超参数网格不能为空")
    kind = ObjectiveKind.parse(objective_kind)
    rel_grid = RelevanceGrid(steps)
    fold_idx = stratified_kfold(train, folds, phi, seed)
    cells = [(wi, fi) for wi in range(len(grid)) for fi in range(len(fold_idx))]

    logger.info(f"网格搜索 {model_tag}/{kind.value}: {len(grid)} 个工作流 × {len(fold_idx)} 折")
    tasks = (delayed(_run_cell)(train, fold_idx[fi], kind, grid[wi], phi, rel_grid, _cell_seed(seed, wi, fi))
             for wi, fi in cells)
    if threads and threads > 0:
        scores = Parallel(n_jobs=threads)(tasks)
    else:
        scores = [fn(*args, **kwargs) for fn, args, kwargs in
                  tqdm(tasks, total=len(cells), desc=f"网格搜索 {kind.value}", ncols=100, disable=not verbose)]

    results = []
    for wi, params in enumerate(grid):
        cell_scores = scores[wi * len(fold_idx):(wi + 1) * len(fold_idx)]
        results.append(CvResult(Workflow(model_tag, kind, params),
                                [s[0] for s in cell_scores], [s[1] for s in cell_scores]))

    best_index = min(range(len(results)),
                     key=lambda i: (results[i].mean_sera, results[i].workflow.params.sort_key(), i))
    best = results[best_index]
    logger.info(f"最佳工作流 {kind.value}: {best.workflow.params.to_dict()}, 平均 SERA={best.mean_sera:.6g}")
    return best, results


def rank_models(scores_per_model: Dict[str, float], lower_is_better: bool = True) -> Dict[str, float]:
    """
    模型排名，得分最优者排名为 1，完全相同的得分取平均排名
    """
    names = list(scores_per_model)
    values = np.array([scores_per_model[name] for name in names], dtype=np.float64)
    ranks = rankdata(values if lower_is_better else -values, method="average")
    return {name: float(rank) for name, rank in zip(names, ranks)}


def rank_summary(records: Sequence[Dict[str, Any]], metric: str = "sera") -> Dict[str, Any]:
    """
    多个数据集上的排名分布

    Args:
        records: 实验记录（JSON 字典），使用其中的 oos 得分
        metric: sera 或 mse

    Returns:
        {"per_dataset": {数据集: {模型: 排名}}, "median_rank": {模型: 中位排名}}
    """
    per_dataset: Dict[str, Dict[str, float]] = {}
    collected: Dict[str, List[float]] = {}
    for record in records:
        scores = {model: values[metric] for model, values in record["oos"].items()}
        if len(scores) < 2:
            continue
        ranks = rank_models(scores)
        per_dataset[record["dataset"]] = ranks
        for model, rank in ranks.items():
            collected.setdefault(model, []).append(rank)
    return {
        "per_dataset": per_dataset,
        "median_rank": {model: float(np.median(values)) for model, values in collected.items()},
    }


def turning_point(y, yhat_S, yhat_M, relevances, grid: RelevanceGrid = RelevanceGrid()) -> TurningPoint:
    """
    计算转折点

    按 t_0..t_T 升序扫描，在每个阈值 φ' 上比较两个模型只统计 φ(y) ≥ φ' 样本时的 SERA，
    返回 SERA 优化模型严格更低的第一个阈值；受限样本为空时停止扫描。
    """
    y, yhat_S, yhat_M, relevances = aligned_vectors((y, "y"), (yhat_S, "yhat_S"), (yhat_M, "yhat_M"),
                                                    (relevances, "relevances"))
    cutoffs = grid.cutoffs
    sera_S, counts = restricted_sera(y, yhat_S, relevances, cutoffs)
    sera_M, _ = restricted_sera(y, yhat_M, relevances, cutoffs)

    nonempty = counts > 0
    better = (sera_S < sera_M) & nonempty
    if not np.any(better):
        return TurningPoint(None, None)
    first = int(np.argmax(better))
    suffix = nonempty.copy()
    suffix[:first] = False
    holds = bool(np.all(better[suffix]))
    return TurningPoint(float(cutoffs[first]), holds)


def derivative_check(dataset: Dataset, seed: int = 0, steps: int = 1000,
                     params: Optional[Hyperparams] = None, fd_samples: int = 200,
                     fd_step: float = 1e-5) -> Dict[str, Any]:
    """
    导数近似误差与耗时对比

    在数据集上训练一个 SERA 优化模型，用它的预测比较闭式导数、直接梯形求积导数与
    sera_trapezoid 的中心差分，并分别计时。

    Returns:
        误差与耗时字典
    """
    params = params or Hyperparams(nrounds=100, max_depth=3, eta=0.1)
    grid = RelevanceGrid(steps)
    phi = build_relevance(dataset.target)
    relevances = phi(dataset.target)
    y = dataset.target

    model = fit(dataset, Objective.sera(sera_weights(relevances, grid)), params, seed=seed)
    y_hat = predict(model, dataset.features)

    start = time.perf_counter()
    w = sera_weights(relevances, grid)
    g_closed = sera_gradient(y, y_hat, w)
    h_closed = sera_hessian(w)
    closed_seconds = time.perf_counter() - start

    start = time.perf_counter()
    g_direct = sera_gradient_direct(y, y_hat, relevances, grid)
    h_direct = sera_hessian_direct(relevances, grid)
    direct_seconds = time.perf_counter() - start

    # 中心差分只在随机抽取的部分样本上做，每个样本需要两次完整的 SERA 计算
    rng = np.random.default_rng(seed)
    picked = rng.choice(y.size, size=min(fd_samples, y.size), replace=False)
    fd_grad = np.empty(picked.size)
    fd_hess = np.empty(picked.size)
    base = sera_trapezoid(y, y_hat, relevances, grid)
    for i, j in enumerate(picked):
        plus = y_hat.copy()
        minus = y_hat.copy()
        plus[j] += fd_step
        minus[j] -= fd_step
        f_plus = sera_trapezoid(y, plus, relevances, grid)
        f_minus = sera_trapezoid(y, minus, relevances, grid)
        fd_grad[i] = (f_plus - f_minus) / (2.0 * fd_step)
        fd_hess[i] = (f_plus - 2.0 * base + f_minus) / fd_step ** 2

    return {
        "dataset": dataset.name,
        "n_rows": int(y.size),
        "steps": steps,
        "gradient": {
            "closed_vs_direct_max_abs": float(np.max(np.abs(g_closed - g_direct))),
            "closed_vs_direct_mean_abs": float(np.mean(np.abs(g_closed - g_direct))),
            "closed_vs_fd_max_abs": float(np.max(np.abs(g_closed[picked] - fd_grad))),
        },
        "hessian": {
            "closed_vs_direct_max_abs": float(np.max(np.abs(h_closed - h_direct))),
            "closed_vs_direct_mean_abs": float(np.mean(np.abs(h_closed - h_direct))),
            "closed_vs_fd_max_abs": float(np.max(np.abs(h_closed[picked] - fd_hess))),
        },
        "timing_seconds": {
            "closed_form": round(closed_seconds, 3),
            "direct_trapezoid": round(direct_seconds, 3),
        },
    }


def _stage(name: str, func, *args, **kwargs):
    """执行一个阶段，失败时标注阶段名"""
    try:
        return func(*args, **kwargs)
    except StageError:
        raise
    except (SeraError, ValueError) as e:
        raise StageError(name, e) from e


def run_experiment(dataset: Dataset, config: ExperimentConfig, verbose: bool = False) -> ExperimentRecord:
    """
    运行完整实验

    概况 → 80/20 划分 → 每个目标函数的网格搜索 → 用最佳参数在整个训练集上重新训练 →
    样本外 MSE/SERA → SERA 曲线 → 转折点（需要同时有 MSE 与 SERA 两类模型）。

    Args:
        dataset: 数据集
        config: 实验配置
        verbose: 是否显示进度

    Returns:
        ExperimentRecord
    """
    grid = RelevanceGrid(config.steps)
    override = config.extreme_type_override

    full_phi = _stage("profile", build_relevance, dataset.target, override)
    data_profile = _stage("profile", profile, dataset, full_phi)
    logger.info(f"数据集 {dataset.name}: {data_profile.n_rows} 行, 稀有样本 {data_profile.n_rare}, "
                f"IR={data_profile.imbalance_ratio:.2f}%, 类型 {data_profile.extreme_type.value}")

    train, test = _stage("holdout", holdout_split, dataset, config.train_fraction, config.seed)
    # 相关性函数只在训练部分上构造，测试评分沿用同一个函数
    phi = _stage("holdout", build_relevance, train.target, override)

    best: Dict[str, CvResult] = {}
    all_results: Dict[str, List[CvResult]] = {}
    for objective_name in config.objectives:
        best[objective_name], all_results[objective_name] = _stage(
            "grid_search", grid_search, train, config.model_tag, objective_name, config.grid, phi,
            seed=config.seed, folds=config.folds, steps=config.steps, threads=config.threads, verbose=verbose)

    test_relevances = phi(test.target)
    oos: Dict[str, Dict[str, float]] = {}
    curves: Dict[str, SeraCurve] = {}
    predictions: Dict[str, Dict[str, np.ndarray]] = {}
    for objective_name, result in best.items():
        model_name = f"{config.model_tag}_{objective_name}"
        kind = ObjectiveKind.parse(objective_name)
        objective = _stage("refit", _make_objective, kind, phi, train.target, grid)
        model: GbmModel = _stage("refit", fit, train, objective, result.workflow.params, config.seed)
        y_hat = _stage("scoring", predict, model, test.features)
        sera_value, mse_value = _stage("scoring", _score, test.target, y_hat, phi, grid)
        oos[model_name] = {"sera": sera_value, "mse": mse_value}
        curves[model_name] = _stage("curves", sera_curve, test.target, y_hat, test_relevances, grid)
        predictions[model_name] = {"row_id": test.row_ids, "y": test.target, "yhat": y_hat}

    point = None
    sera_name = f"{config.model_tag}_{ObjectiveKind.SERA.value}"
    mse_name = f"{config.model_tag}_{ObjectiveKind.MSE.value}"
    if sera_name in predictions and mse_name in predictions:
        point = _stage("turning_point", turning_point, test.target, predictions[sera_name]["yhat"],
                       predictions[mse_name]["yhat"], test_relevances, grid)

    ranks = {}
    if len(oos) >= 2:
        ranks = {metric: rank_models({m: v[metric] for m, v in oos.items()}) for metric in ("sera", "mse")}

    return ExperimentRecord(
        dataset=dataset.name,
        profile=data_profile,
        relevance=phi,
        best=best,
        all_results=all_results,
        oos=oos,
        curves=curves,
        predictions=predictions,
        turning_point=point,
        ranks=ranks,
        config=config,
    )
