#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
梯度提升树模块

从零实现的二阶（牛顿）梯度提升回归树。目标函数只需提供一阶/二阶导数，
建树过程与目标函数无关，因此 MSE 与 SERA 共用同一套代码路径。
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.core.errors import InvalidInputError, SchemaMismatchError
from src.core.sera_metric import SeraWeights
from src.utils.validation import aligned_vectors, as_finite_vector

# 配置日志
logger = logging.getLogger(__name__)

_LEAF = -1


@dataclass(frozen=True)
class Hyperparams:
    """
    提升树超参数

    网格搜索只调 nrounds / max_depth / eta，其余保持默认。
    """

    nrounds: int = 250
    max_depth: int = 3
    eta: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1e-6

    def __post_init__(self):
        if int(self.nrounds) != self.nrounds or self.nrounds < 1:
            raise InvalidInputError(f"nrounds 必须是正整数，实际为 {self.nrounds}")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise InvalidInputError(f"max_depth 必须是正整数，实际为 {self.max_depth}")
        if not 0.0 < self.eta <= 1.0:
            raise InvalidInputError(f"eta 必须在 (0, 1] 内，实际为 {self.eta}")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise InvalidInputError("lambda、gamma、min_child_weight 不能为负")

    def sort_key(self) -> Tuple[int, int, float]:
        """网格搜索平局时的优先顺序：轮数少、深度小、学习率小者优先"""
        return (self.nrounds, self.max_depth, self.eta)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nrounds": int(self.nrounds),
            "max_depth": int(self.max_depth),
            "eta": float(self.eta),
            "lambda": float(self.reg_lambda),
            "gamma": float(self.gamma),
            "min_child_weight": float(self.min_child_weight),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Hyperparams":
        data = dict(data)
        if "lambda" in data:
            data["reg_lambda"] = data.pop("lambda")
        unknown = set(data) - {"nrounds", "max_depth", "eta", "reg_lambda", "gamma", "min_child_weight"}
        if unknown:
            raise InvalidInputError(f"未知的超参数: {sorted(unknown)}")
        return cls(
            nrounds=int(data.get("nrounds", cls.nrounds)),
            max_depth=int(data.get("max_depth", cls.max_depth)),
            eta=float(data.get("eta", cls.eta)),
            reg_lambda=float(data.get("reg_lambda", cls.reg_lambda)),
            gamma=float(data.get("gamma", cls.gamma)),
            min_child_weight=float(data.get("min_child_weight", cls.min_child_weight)),
        )


class ObjectiveKind(str, Enum):
    MSE = "mse"
    SERA = "sera"

    @classmethod
    def parse(cls, value) -> "ObjectiveKind":
        if isinstance(value, ObjectiveKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidInputError(f"未知的目标函数: {value} (可选 mse/sera)")


@dataclass(frozen=True)
class Objective:
    """
    二阶目标函数

    MSE 对应损失 ½Σr²；SERA 对应 ½Σw·r²（即梯形形式的 SERA），权重须与训练集对齐。
    任何提供 name / grad_hess / base_score / loss 的对象都可以传给 fit。
    """

    kind: ObjectiveKind
    weights: Optional[SeraWeights] = None

    @classmethod
    def mse(cls) -> "Objective":
        return cls(ObjectiveKind.MSE)

    @classmethod
    def sera(cls, weights: SeraWeights) -> "Objective":
        if weights is None:
            raise InvalidInputError("SERA 目标函数需要 SeraWeights")
        return cls(ObjectiveKind.SERA, weights)

    @property
    def name(self) -> str:
        return self.kind.value

    def _instance_weights(self, n: int) -> np.ndarray:
        if self.kind is ObjectiveKind.MSE:
            return np.ones(n)
        if len(self.weights) != n:
            raise InvalidInputError(f"SERA 权重长度 {len(self.weights)} 与样本数 {n} 不对齐")
        return self.weights.weights

    def grad_hess(self, y: np.ndarray, y_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        w = self._instance_weights(y.size)
        return w * (y_hat - y), w.copy()

    def base_score(self, y: np.ndarray) -> float:
        w = self._instance_weights(y.size)
        return float(np.sum(w * y) / np.sum(w))

    def loss(self, y: np.ndarray, y_hat: np.ndarray) -> float:
        w = self._instance_weights(y.size)
        return float(0.5 * np.sum(w * (y_hat - y) ** 2))


def grad_hess(objective, y, y_hat) -> Tuple[np.ndarray, np.ndarray]:
    """
    计算目标函数的梯度与 Hessian

    Args:
        objective: 目标函数
        y: 真实值
        y_hat: 当前预测

    Returns:
        (gradients, hessians)
    """
    y_arr, y_hat_arr = aligned_vectors((y, "y"), (y_hat, "y_hat"))
    return objective.grad_hess(y_arr, y_hat_arr)


def base_score_for(objective, y) -> float:
    """初始常数预测：MSE 取均值，SERA 取加权均值 Σw·y / Σw"""
    y_arr = as_finite_vector(y, "y")
    if y_arr.size == 0:
        raise InvalidInputError("y 不能为空")
    return objective.base_score(y_arr)


@dataclass
class RegressionTree:
    """
    扁平数组表示的二叉回归树

    feature[i] == -1 表示叶子节点；内部节点按 x[feature] <= threshold 走左子树。
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != _LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """返回每一行落入的叶子编号"""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != _LEAF
        while np.any(active):
            idx = rows[active]
            current = node[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            node[idx] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != _LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> Dict[str, Any]:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] == _LEAF:
                nodes.append({"leaf": float(self.value[i])})
            else:
                nodes.append({
                    "feature": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "left": int(self.left[i]),
                    "right": int(self.right[i]),
                })
        return {"nodes": nodes}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RegressionTree":
        nodes = data["nodes"]
        n = len(nodes)
        feature = np.full(n, _LEAF, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, _LEAF, dtype=np.int64)
        right = np.full(n, _LEAF, dtype=np.int64)
        value = np.zeros(n)
        for i, node in enumerate(nodes):
            if "leaf" in node:
                value[i] = float(node["leaf"])
            else:
                feature[i] = int(node["feature"])
                threshold[i] = float(node["threshold"])
                left[i] = int(node["left"])
                right[i] = int(node["right"])
        return cls(feature, threshold, left, right, value)


class _TreeBuilder:
    """
    精确贪心建树

    每个特征的排序索引在整次训练中只计算一次，节点内按成员掩码过滤以保持有序。
    """

    def __init__(self, X: np.ndarray, sorted_idx: List[np.ndarray], params: Hyperparams):
        self.X = X
        self.sorted_idx = sorted_idx
        self.params = params
        self.feature: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []

    def _leaf_value(self, G: float, H: float) -> float:
        denom = H + self.params.reg_lambda
        if denom <= 0:
            return 0.0
        return -G / denom

    def _score(self, G, H):
        denom = H + self.params.reg_lambda
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0, G * G / np.where(denom > 0, denom, 1.0), 0.0)

    def _new_node(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _best_split(self, mask: np.ndarray, g: np.ndarray, h: np.ndarray,
                    G: float, H: float) -> Optional[Tuple[int, float, float]]:
        params = self.params
        parent = float(self._score(G, H))
        best = None
        for f, order in enumerate(self.sorted_idx):
            idx = order[mask[order]]
            values = self.X[idx, f]
            # 只在相邻且取值不同的位置切分
            distinct = values[1:] > values[:-1]
            if not np.any(distinct):
                continue
            G_left = np.cumsum(g[idx])[:-1]
            H_left = np.cumsum(h[idx])[:-1]
            G_right = G - G_left
            H_right = H - H_left
            valid = distinct & (H_left >= params.min_child_weight) & (H_right >= params.min_child_weight)
            if not np.any(valid):
                continue
            gain = 0.5 * (self._score(G_left, H_left) + self._score(G_right, H_right) - parent) - params.gamma
            gain = np.where(valid, gain, -np.inf)
            pos = int(np.argmax(gain))
            if best is None or gain[pos] > best[2]:
                thr = 0.5 * (values[pos] + values[pos + 1])
                best = (f, float(thr), float(gain[pos]))
        if best is None or best[2] <= 0:
            return None
        return best

    def _grow(self, node: int, mask: np.ndarray, depth: int, g: np.ndarray, h: np.ndarray) -> None:
        G = float(np.sum(g[mask]))
        H = float(np.sum(h[mask]))
        count = int(np.count_nonzero(mask))
        self.value[node] = self._leaf_value(G, H)

        if depth >= self.params.max_depth or count < 2 or H <= 0:
            return
        split = self._best_split(mask, g, h, G, H)
        if split is None:
            return

        f, thr, gain = split
        go_left = self.X[:, f] <= thr
        left = self._new_node()
        right = self._new_node()
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = left
        self.right[node] = right
        self._grow(left, mask & go_left, depth + 1, g, h)
        self._grow(right, mask & ~go_left, depth + 1, g, h)

    def build(self, g: np.ndarray, h: np.ndarray) -> RegressionTree:
        root = self._new_node()
        self._grow(root, np.ones(self.X.shape[0], dtype=bool), 0, g, h)
        tree = RegressionTree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64),
        )
        # 内部节点的值只用于调试，预测时只读叶子
        tree.value[tree.feature != _LEAF] = 0.0
        return tree


@dataclass
class GbmModel:
    """加法模型：prediction = base_score + eta·Σ tree(x)"""

    base_score: float
    eta: float
    feature_names: List[str]
    objective_kind: str
    trees: List[RegressionTree] = field(default_factory=list)
    params: Optional[Hyperparams] = None
    seed: int = 0
    train_loss: List[float] = field(default_factory=list)

    def predict(self, features) -> np.ndarray:
        return predict(self, features)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": "sera-gbm",
            "version": 1,
            "base_score": float(self.base_score),
            "eta": float(self.eta),
            "objective": self.objective_kind,
            "feature_names": list(self.feature_names),
            "params": self.params.to_dict() if self.params else None,
            "seed": int(self.seed),
            "train_loss": [float(v) for v in self.train_loss],
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GbmModel":
        if data.get("format") != "sera-gbm":
            raise InvalidInputError("不是合法的模型文件")
        return cls(
            base_score=float(data["base_score"]),
            eta=float(data["eta"]),
            feature_names=list(data["feature_names"]),
            objective_kind=str(data["objective"]),
            trees=[RegressionTree.from_dict(t) for t in data["trees"]],
            params=Hyperparams.from_dict(data["params"]) if data.get("params") else None,
            seed=int(data.get("seed", 0)),
            train_loss=[float(v) for v in data.get("train_loss", [])],
        )


def _as_matrix(features, n_columns: Optional[int] = None) -> np.ndarray:
    try:
        X = np.asarray(features, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"特征矩阵无法转换为数值: {e}") from e
    if X.ndim != 2:
        raise InvalidInputError(f"特征矩阵必须是二维的，实际维度为 {X.ndim}")
    if n_columns is not None and X.shape[1] != n_columns:
        raise SchemaMismatchError(f"特征列数 {X.shape[1]} 与训练时的 {n_columns} 不一致")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("特征矩阵包含缺失值或非有限值")
    return X


def fit_arrays(X, y, objective, params: Hyperparams, seed: int = 0,
               feature_names: Optional[Sequence[str]] = None, verbose: bool = False) -> GbmModel:
    """
    在数组上训练提升树

    Args:
        X: 特征矩阵 (n_rows, n_features)
        y: 目标值
        objective: 目标函数
        params: 超参数
        seed: 随机种子（不做行/列采样，训练完全确定，种子只记录在模型中）
        feature_names: 特征名
        verbose: 是否显示进度条

    Returns:
        GbmModel
    """
    X = _as_matrix(X)
    y = as_finite_vector(y, "y")
    if X.shape[0] < 2:
        raise InvalidInputError(f"训练数据至少需要 2 行，实际为 {X.shape[0]}")
    if y.size != X.shape[0]:
        raise InvalidInputError(f"目标长度 {y.size} 与特征行数 {X.shape[0]} 不一致")
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(X.shape[1])]

    base = objective.base_score(y)
    y_hat = np.full(y.size, base)
    sorted_idx = [np.argsort(X[:, f], kind="mergesort") for f in range(X.shape[1])]
    model = GbmModel(base_score=base, eta=params.eta, feature_names=list(feature_names),
                     objective_kind=objective.name, params=params, seed=seed)

    logger.debug(f"开始训练 ({objective.name}): {X.shape[0]} 行, {X.shape[1]} 列, {params.to_dict()}")
    for _ in tqdm(range(params.nrounds), desc=f"训练 {objective.name}", ncols=100, disable=not verbose):
        g, h = objective.grad_hess(y, y_hat)
        tree = _TreeBuilder(X, sorted_idx, params).build(g, h)
        model.trees.append(tree)
        y_hat = y_hat + params.eta * tree.predict(X)
        model.train_loss.append(objective.loss(y, y_hat))

    return model


def fit(train, objective, params: Hyperparams, seed: int = 0, verbose: bool = False) -> GbmModel:
    """在 Dataset 上训练提升树"""
    return fit_arrays(train.features, train.target, objective, params, seed=seed,
                      feature_names=train.feature_names, verbose=verbose)


def predict(model: GbmModel, features) -> np.ndarray:
    """按 base_score + eta·Σ 树输出 预测"""
    X = _as_matrix(features, n_columns=len(model.feature_names))
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        out = out + model.eta * tree.predict(X)
    return out
