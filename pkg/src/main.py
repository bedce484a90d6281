#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
SERA 不平衡回归工具命令行入口

子命令覆盖数据集概况、相关性曲线、网格搜索、完整实验、贝叶斯符号检验比较和导数近似检查。
标准输出只写 JSON，状态信息和日志写到标准错误。
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from datetime import datetime
from typing import List, Optional

import colorama
from colorama import Fore, Style

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

# 导入自定义模块
from src.core.bayes_sign_test import DEFAULT_ROPE, DEFAULT_SAMPLES, bayes_sign_test, compute_prior
from src.core.errors import SeraError
from src.core.evaluation import (derivative_check, grid_search, holdout_split, profile, rank_summary,
                                 run_experiment)
from src.core.experiment_config import EXPERIMENT_DEFAULTS, ExperimentConfig
from src.core.relevance import ExtremeType, adjusted_boxplot, build_relevance, relevance_grid
from src.storage.result_storage import (load_json, save_experiment, save_relevance_csv, atomic_write_text,
                                        format_float)
from src.utils.dataset_loader import MISSING_POLICIES, load_csv
from src.utils.synthetic import make_skewed_regression

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1


def print_status(message, status="进行中", color=Fore.BLUE, verbose=True):
    """
    打印带颜色的状态信息（写到标准错误，避免污染 JSON 输出）

    Args:
        message: 要显示的消息
        status: 状态文本
        color: 颜色代码
        verbose: 是否显示
    """
    if verbose:
        timestamp = datetime.now().strftime("%H:%M:%S")
        status_text = f"{color}[{status}]{Style.RESET_ALL}"
        print(f"[{timestamp}] {status_text} {message}", file=sys.stderr)


def emit_json(data) -> None:
    print(json.dumps(data, ensure_ascii=False, indent=2, allow_nan=False))


def setup_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    """配置日志：默认 INFO，--verbose 为 DEBUG，可选写入文件"""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="CSV 数据文件")
    parser.add_argument("--target", required=True, help="目标列名")
    parser.add_argument("--on-missing", choices=MISSING_POLICIES, default="error",
                        help="缺失单元格处理方式 (默认: error)")


def _add_type_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--type", choices=[t.value for t in ExtremeType], default=None,
                        help="指定极值类型，不指定则自动推断")


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    解析命令行参数

    Returns:
        解析后的参数
    """
    parser = argparse.ArgumentParser(prog="sera-boost", description="基于 SERA 的不平衡回归提升树工具")
    parser.add_argument("--verbose", "-v", action="store_true", help="显示详细的进度信息")
    parser.add_argument("--log-file", default=None, help="日志文件路径 (例如 logs/sera_boost.log)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="数据集概况")
    _add_data_arguments(p)
    _add_type_argument(p)

    p = sub.add_parser("relevance", help="导出相关性曲线 y,phi")
    _add_data_arguments(p)
    _add_type_argument(p)
    p.add_argument("--points", type=int, default=200, help="采样点数 (默认: 200)")
    p.add_argument("--out", required=True, help="输出 CSV")

    p = sub.add_parser("tune", help="交叉验证网格搜索")
    _add_data_arguments(p)
    _add_type_argument(p)
    p.add_argument("--objective", choices=["mse", "sera"], required=True)
    p.add_argument("--grid", default=None, help="超参数网格 JSON")
    p.add_argument("--folds", type=int, default=None, help="折数 (默认: 10)")
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("experiment", help="完整实验：网格搜索、样本外评分、SERA 曲线、转折点")
    _add_data_arguments(p)
    _add_type_argument(p)
    p.add_argument("--config", default=None, help="实验配置 JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="输出目录")

    p = sub.add_parser("compare", help="多个实验记录上的贝叶斯符号检验")
    p.add_argument("--records", nargs="+", required=True, help="实验记录 JSON")
    p.add_argument("--metric", choices=["sera", "mse"], default="sera")
    p.add_argument("--rope", type=float, default=EXPERIMENT_DEFAULTS.get("rope", DEFAULT_ROPE), help="ROPE 半径")
    p.add_argument("--samples", type=int, default=EXPERIMENT_DEFAULTS.get("bayes_samples", DEFAULT_SAMPLES),
                   help="蒙特卡洛抽样次数")
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("deriv-check", help="导数近似误差与耗时对比")
    _add_data_arguments(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--steps", type=int, default=1000, help="SERA 网格步数 T (默认: 1000)")

    p = sub.add_parser("synth", help="生成对数正态目标的合成数据集")
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--noise-features", type=int, default=0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="输出 CSV")

    return parser.parse_args(argv)


def cmd_profile(args) -> int:
    dataset = load_csv(args.data, args.target, args.on_missing)
    phi = build_relevance(dataset.target, ExtremeType.parse(args.type))
    emit_json(profile(dataset, phi).to_dict())
    return EXIT_OK


def cmd_relevance(args) -> int:
    dataset = load_csv(args.data, args.target, args.on_missing)
    stats = adjusted_boxplot(dataset.target)
    phi = build_relevance(dataset.target, ExtremeType.parse(args.type))
    y_grid, phi_values = relevance_grid(phi, dataset.target, points=args.points)
    save_relevance_csv(y_grid, phi_values, args.out)
    print_status(f"相关性曲线已保存: {args.out}", "完成", Fore.GREEN, args.verbose)
    emit_json({"boxplot": asdict(stats), "relevance": phi.to_dict(), "out": args.out})
    return EXIT_OK


def cmd_tune(args) -> int:
    dataset = load_csv(args.data, args.target, args.on_missing)
    overrides = {"target_column": args.target, "seed": args.seed, "folds": args.folds,
                 "extreme_type_override": args.type}
    if args.grid:
        grid_data = load_json(args.grid)
        overrides["grid"] = grid_data.get("grid", grid_data) if isinstance(grid_data, dict) else grid_data
    config = ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    train, _ = holdout_split(dataset, config.train_fraction, config.seed)
    phi = build_relevance(train.target, config.extreme_type_override)
    best, results = grid_search(train, config.model_tag, args.objective, config.grid, phi, seed=config.seed,
                                folds=config.folds, steps=config.steps, threads=config.threads,
                                verbose=args.verbose)
    emit_json({"best": best.to_dict(), "all": [r.to_dict() for r in results]})
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {"target_column": args.target, "seed": args.seed, "extreme_type_override": args.type,
                 "on_missing": args.on_missing}
    if args.config:
        config = ExperimentConfig.from_json(args.config, **overrides)
    else:
        config = ExperimentConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    dataset = load_csv(args.data, config.target_column, config.on_missing)

    print_status(f"开始实验: {dataset.name} ({dataset.n_rows} 行, {len(config.grid)} 个工作流)",
                 "开始", Fore.BLUE, args.verbose)
    start_time = time.time()
    record = run_experiment(dataset, config, verbose=args.verbose)
    path = save_experiment(record, args.out)
    print_status(f"实验完成，耗时 {time.time() - start_time:.2f}秒，记录: {path}", "完成", Fore.GREEN, args.verbose)
    emit_json(load_json(path))
    return EXIT_OK


def cmd_compare(args) -> int:
    records = [load_json(path) for path in args.records]
    z = {}
    for path, record in zip(args.records, records):
        best = record.get("best", {})
        if "sera" not in best or "mse" not in best:
            raise SeraError(f"记录 {path} 缺少 mse 或 sera 的最佳工作流")
        z[record["dataset"]] = compute_prior(best["sera"]["cv_scores"][args.metric],
                                             best["mse"]["cv_scores"][args.metric])
    posterior = bayes_sign_test(list(z.values()), rope_radius=args.rope, n_samples=args.samples, seed=args.seed)
    emit_json({
        "metric": args.metric,
        "z": z,
        "posterior": posterior.to_dict(),
        "ranks": rank_summary(records, args.metric),
    })
    return EXIT_OK


def cmd_deriv_check(args) -> int:
    dataset = load_csv(args.data, args.target, args.on_missing)
    emit_json(derivative_check(dataset, seed=args.seed, steps=args.steps))
    return EXIT_OK


def cmd_synth(args) -> int:
    dataset = make_skewed_regression(n=args.rows, n_noise=args.noise_features, seed=args.seed)
    lines = [",".join(dataset.feature_names + [dataset.target_name])]
    for row, y in zip(dataset.features, dataset.target):
        lines.append(",".join(format_float(v) for v in list(row) + [y]))
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    emit_json({"out": args.out, "rows": dataset.n_rows, "columns": dataset.feature_names + [dataset.target_name]})
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "relevance": cmd_relevance,
    "tune": cmd_tune,
    "experiment": cmd_experiment,
    "compare": cmd_compare,
    "deriv-check": cmd_deriv_check,
    "synth": cmd_synth,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    主程序入口

    Returns:
        退出码：0 成功，1 计算失败；参数错误由 argparse 以 2 退出
    """
    colorama.init()
    args = parse_arguments(argv)
    setup_logging(args.verbose, args.log_file)

    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("\n程序被用户中断", file=sys.stderr)
        return EXIT_FAILURE
    except SeraError as e:
        print(f"错误: {e}", file=sys.stderr)
        logger.debug("详细错误信息", exc_info=True)
        return EXIT_FAILURE
    except Exception as e:
        print(f"\n程序执行过程中出错: {str(e)}", file=sys.stderr)
        logger.error(f"程序执行过程中出错: {str(e)}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
