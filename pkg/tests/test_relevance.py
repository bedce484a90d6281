#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
相关性函数测试

覆盖 medcouple、调整箱线图、极值类型推断以及相关性函数的取值性质。
"""

import os
import sys

import numpy as np
import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core.errors import DegenerateDistributionError, InvalidInputError
from src.core.relevance import (ExtremeType, RelevanceFunction, _medcouple_blocked, adjusted_boxplot,
                                build_relevance, evaluate_relevance, infer_extreme_type, medcouple, relevance_grid)


def brute_force_medcouple(sample):
    """独立的 O(n²) 核函数中位数，中位数处并列点使用符号核"""
    x = np.sort(np.asarray(sample, dtype=float))
    m = np.median(x)
    lower = x[x <= m][::-1]
    upper = x[x >= m]
    ties = int(np.sum(x == m))
    values = []
    for i, xi in enumerate(lower):
        for j, xj in enumerate(upper):
            if xi == m and xj == m:
                # lower 逆序后并列点位于开头：第 i 个与第 j 个并列点
                k = ties - 1 - i
                values.append(float(np.sign(ties - 1 - k - j)))
            else:
                values.append(((xj - m) - (m - xi)) / (xj - xi))
    return float(np.median(values))


def fixture_samples():
    rng = np.random.default_rng(7)
    return {
        "normal": rng.normal(10.0, 2.0, 400),
        "lognormal": rng.lognormal(0.0, 0.8, 400),
        "neg_lognormal": -rng.lognormal(0.0, 0.8, 400),
        "uniform": rng.uniform(-5.0, 5.0, 400),
        "bimodal": np.concatenate([rng.normal(0.0, 1.0, 300), rng.normal(8.0, 1.0, 100)]),
    }


def test_medcouple_symmetric_sample_is_zero():
    assert medcouple([1, 2, 3, 4, 5]) == 0.0


def test_medcouple_matches_brute_force():
    sample = [0, 1, 2, 3, 4, 5, 100]
    assert medcouple(sample) == pytest.approx(brute_force_medcouple(sample), abs=1e-12)

    skewed = np.random.default_rng(3).lognormal(0.0, 1.0, 61)
    expected = brute_force_medcouple(skewed)
    assert 0.0 < expected <= 1.0
    assert medcouple(skewed) == pytest.approx(expected, abs=1e-12)


def test_medcouple_antisymmetry():
    sample = np.random.default_rng(11).lognormal(0.0, 0.7, 101)
    assert medcouple(-sample) == pytest.approx(-medcouple(sample), abs=1e-12)


def test_blocked_medcouple_matches_dense_kernel():
    rng = np.random.default_rng(13)
    samples = {
        "lognormal_odd": rng.lognormal(0.0, 1.0, 301),
        "lognormal_even": rng.lognormal(0.0, 1.0, 300),
        "left_skew": -rng.lognormal(0.0, 0.6, 257),
        # 大量与中位数并列的整数值
        "ties": rng.integers(0, 8, 240).astype(float),
        "normal": rng.normal(size=199),
    }
    for name, sample in samples.items():
        dense = medcouple(sample)
        # 块很小，迫使逐块路径多轮缩小区间
        assert _medcouple_blocked(sample, block_elements=64) == pytest.approx(dense, abs=1e-14), name
        assert medcouple(sample, dense_limit=10) == pytest.approx(dense, abs=1e-14), name


@pytest.mark.parametrize("bad", [[1.0, 2.0], [1.0, float("nan"), 3.0], [1.0, 2.0, float("inf")]])
def test_medcouple_rejects_invalid_input(bad):
    with pytest.raises(InvalidInputError):
        medcouple(bad)


def test_adjusted_boxplot_symmetric_matches_tukey():
    stats = adjusted_boxplot([1, 2, 3, 4, 5])
    assert stats.medcouple == 0.0
    assert stats.lower_fence == pytest.approx(stats.q1 - 1.5 * stats.iqr)
    assert stats.upper_fence == pytest.approx(stats.q3 + 1.5 * stats.iqr)


def test_adjusted_boxplot_type7_quartiles():
    stats = adjusted_boxplot(np.arange(1, 101))
    assert stats.q1 == pytest.approx(25.75)
    assert stats.median == pytest.approx(50.5)
    assert stats.q3 == pytest.approx(75.25)
    assert stats.iqr == pytest.approx(49.5)


def test_adjusted_boxplot_right_skew_widens_upper_fence():
    stats = adjusted_boxplot(np.random.default_rng(5).lognormal(0.0, 1.0, 500))
    assert stats.medcouple > 0
    assert stats.upper_fence - stats.q3 > stats.q1 - stats.lower_fence


def test_boxplot_invariants_on_fixtures():
    for name, sample in fixture_samples().items():
        stats = adjusted_boxplot(sample)
        assert stats.q1 <= stats.median <= stats.q3, name
        assert stats.iqr == pytest.approx(stats.q3 - stats.q1)
        assert stats.lower_fence <= stats.q1 and stats.upper_fence >= stats.q3, name
        assert -1.0 <= stats.medcouple <= 1.0


def test_infer_extreme_type():
    base = list(range(1, 21))
    both = [-100] + base + [100]
    high = base + [100]
    low = [-100] + base

    assert infer_extreme_type(both, adjusted_boxplot(both)) is ExtremeType.BOTH
    assert infer_extreme_type(high, adjusted_boxplot(high)) is ExtremeType.HIGH
    assert infer_extreme_type(low, adjusted_boxplot(low)) is ExtremeType.LOW
    # 没有离群点时默认两端
    assert infer_extreme_type(base, adjusted_boxplot(base)) is ExtremeType.BOTH


def test_point_on_fence_is_not_outlier():
    sample = [1, 2, 3, 4, 5]
    stats = adjusted_boxplot(sample)
    assert infer_extreme_type(sample + [stats.upper_fence], stats) is ExtremeType.BOTH


def test_extreme_type_affine_invariance():
    sample = np.array(list(range(1, 21)) + [100.0])
    expected = infer_extreme_type(sample, adjusted_boxplot(sample))
    for a, b in [(2.0, 0.0), (0.5, -3.0), (10.0, 7.0)]:
        moved = a * sample + b
        assert infer_extreme_type(moved, adjusted_boxplot(moved)) is expected


def test_build_relevance_control_points():
    sample = [-100] + list(range(1, 21)) + [100]
    stats = adjusted_boxplot(sample)
    phi = build_relevance(sample)
    assert phi.extreme_type is ExtremeType.BOTH
    assert [(p.y, p.relevance, p.slope) for p in phi.control_points] == [
        (stats.lower_fence, 1.0, 0.0), (stats.median, 0.0, 0.0), (stats.upper_fence, 1.0, 0.0)]

    high = build_relevance(sample, ExtremeType.HIGH)
    assert [p.relevance for p in high.control_points] == [0.0, 1.0]
    low = build_relevance(sample, "low")
    assert [p.relevance for p in low.control_points] == [1.0, 0.0]


def test_build_relevance_degenerate_sample():
    with pytest.raises(DegenerateDistributionError):
        build_relevance([5, 5, 5, 5, 6])


def test_relevance_values_at_knots_and_outside():
    sample = [-100] + list(range(1, 21)) + [100]
    stats = adjusted_boxplot(sample)
    phi = build_relevance(sample)
    assert evaluate_relevance(phi, stats.median) == 0.0
    assert evaluate_relevance(phi, stats.lower_fence) == 1.0
    assert evaluate_relevance(phi, stats.upper_fence) == 1.0
    assert evaluate_relevance(phi, stats.lower_fence - 50.0) == 1.0
    assert evaluate_relevance(phi, stats.upper_fence + 10.0) == 1.0


def test_relevance_segment_midpoint_is_half():
    phi = RelevanceFunction.from_control_points([(0.0, 0.0), (2.0, 1.0)])
    assert evaluate_relevance(phi, 1.0) == pytest.approx(0.5, abs=1e-12)
    # 零斜率三次 Hermite: h(s) = 3s² - 2s³
    assert evaluate_relevance(phi, 0.5) == pytest.approx(3 * 0.25 ** 2 - 2 * 0.25 ** 3, abs=1e-12)


def test_high_type_is_increasing_between_median_and_fence():
    sample = list(range(1, 21)) + [100]
    phi = build_relevance(sample)
    assert phi.extreme_type is ExtremeType.HIGH
    stats = adjusted_boxplot(sample)
    mid = 0.5 * (stats.median + stats.upper_fence)
    value = evaluate_relevance(phi, mid)
    assert 0.0 < value < 1.0
    assert evaluate_relevance(phi, mid - 1.0) < value < evaluate_relevance(phi, mid + 1.0)
    # 中位数以下没有控制点，常数外推为 0
    assert evaluate_relevance(phi, stats.median - 5.0) == 0.0


def test_evaluate_relevance_rejects_non_finite():
    phi = build_relevance([1, 2, 3, 4, 5])
    with pytest.raises(InvalidInputError):
        evaluate_relevance(phi, float("nan"))


def test_relevance_range_and_side_monotonicity_on_fixtures():
    for name, sample in fixture_samples().items():
        phi = build_relevance(sample, ExtremeType.BOTH)
        stats = adjusted_boxplot(sample)
        grid, values = relevance_grid(phi, sample, points=2001, margin=0.5)
        assert np.all((values >= 0.0) & (values <= 1.0)), name
        assert evaluate_relevance(phi, stats.median) == 0.0
        assert evaluate_relevance(phi, stats.lower_fence) == 1.0
        assert evaluate_relevance(phi, stats.upper_fence) == 1.0
        left = values[grid <= stats.median]
        right = values[grid >= stats.median]
        assert np.all(np.diff(left) <= 1e-15), name
        assert np.all(np.diff(right) >= -1e-15), name


def test_explicit_control_points_are_validated():
    with pytest.raises(InvalidInputError):
        RelevanceFunction.from_control_points([(1.0, 0.0), (1.0, 1.0)])
    with pytest.raises(InvalidInputError):
        RelevanceFunction.from_control_points([(0.0, 0.0), (1.0, 1.5)])
    with pytest.raises(InvalidInputError):
        RelevanceFunction.from_control_points([(0.0, 0.0)])


def test_explicit_slopes_are_clamped_to_unit_band():
    phi = RelevanceFunction.from_control_points([(0.0, 0.0, 5.0), (1.0, 1.0, 5.0)])
    values = phi(np.linspace(-1.0, 2.0, 301))
    assert values.min() >= 0.0 and values.max() <= 1.0


def test_relevance_is_exact_at_and_beyond_fences():
    for seed in range(200):
        sample = np.random.default_rng(seed).lognormal(0.0, 1.0, 300)
        stats = adjusted_boxplot(sample)
        phi = build_relevance(sample)
        assert phi([stats.median])[0] == 0.0, seed
        if phi.extreme_type in (ExtremeType.HIGH, ExtremeType.BOTH):
            values = phi([stats.upper_fence, stats.upper_fence + 10.0])
            assert np.all(values == 1.0), seed
        if phi.extreme_type in (ExtremeType.LOW, ExtremeType.BOTH):
            values = phi([stats.lower_fence, stats.lower_fence - 10.0])
            assert np.all(values == 1.0), seed
