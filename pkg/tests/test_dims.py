import math

import numpy as np
import pytest

from levicore import sets2d
from levicore.core import CoreParams, compute_core
from levicore.dims import (
    APPLIES,
    FINE_INTERIOR_NOTE,
    INCONCLUSIVE,
    INCONCLUSIVE_VERDICT,
    MEASURE_ZERO,
    POSITIVE,
    ProductCloud,
    auto_deltas,
    box_count,
    circle_parameter,
    content_flag,
    corollary_report,
    dyadic_deltas,
    line_points,
    set_factors,
    set_times_circle,
)
from levicore.errors import PreconditionError

THIRDS_SQUARE_DIM = 2 * math.log(2) / math.log(3)  # self-similarity: 4 copies at ratio 1/3


def thirds_line(depth=14):
    return sets2d.fat_cantor_line(sets2d.geometric_schedule("1/3", depth=depth), depth)


def circle_cloud(n):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(t), np.sin(t)])


def test_segment_dimension():
    x = np.linspace(0, 1, 100001)
    rep = box_count(np.column_stack([x, 0.3 * x]), dyadic_deltas(2, 12))
    assert abs(rep.dimension - 1) <= 0.1


def test_thirds_square_dimension():
    line = line_points(thirds_line())
    rep = box_count(ProductCloud([line, line]), dyadic_deltas(4, 17))
    assert abs(rep.dimension - THIRDS_SQUARE_DIM) <= 0.1


def test_fat_square_dimension():
    rep = box_count(ProductCloud(set_factors(sets2d.cantor_square("1/4"))), dyadic_deltas(4, 17))
    assert 1.85 <= rep.dimension <= 2.0


def test_product_counts_factor():
    a = line_points(thirds_line(6))
    b = circle_cloud(1000)
    prod = ProductCloud([a, b])
    full = np.column_stack([np.repeat(a, len(b)), np.tile(b, (len(a), 1))])
    for dl in (0.25, 0.05, 0.01):
        assert box_count(prod, [dl * 2**-k for k in range(4)], check_range=False).counts[0] == \
            box_count(full, [dl * 2**-k for k in range(4)], check_range=False).counts[0]


def test_finite_set_measure_zero():
    pts = sets2d.FiniteSet(tuple(np.random.default_rng(0).uniform(0, 1, 20) + 0j)).sample(5000)
    pts = np.column_stack([pts.real, np.linspace(0, 1, 20)[np.arange(5000) % 20]])
    rep = box_count(pts, dyadic_deltas(2, 12), content_dims=(2,))
    assert content_flag(rep, 2) == MEASURE_ZERO


def test_torus_content():
    c = circle_cloud(2**14)
    rep = box_count(ProductCloud([c, 0.5 * c]), dyadic_deltas(1, 9))
    assert abs(rep.dimension - 2) < 0.15
    assert content_flag(rep, 2) == POSITIVE
    assert content_flag(rep, 3) == MEASURE_ZERO


def test_counts_monotone():
    line = line_points(thirds_line())
    for cloud in (ProductCloud([line, line]), circle_cloud(20000)):
        deltas = dyadic_deltas(2, 10)
        counts = box_count(cloud, deltas, check_range=False).counts
        assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_rigid_motion_invariance(rng):
    line = line_points(thirds_line(7))
    sq = np.column_stack([np.repeat(line, len(line)), np.tile(line, len(line))])
    deltas = dyadic_deltas(3, 10)
    base = box_count(sq, deltas).dimension
    for _ in range(5):
        a = rng.uniform(0, 2 * np.pi)
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        moved = sq @ rot.T + rng.uniform(-3, 3, 2)
        assert abs(box_count(moved, deltas).dimension - base) <= 0.05


@pytest.mark.parametrize("ratio", ["1/3", "1/4"])
def test_product_law(ratio):
    K = sets2d.cantor_square(ratio)
    deltas = dyadic_deltas(4, 17)
    a = box_count(ProductCloud(set_factors(K)), deltas).dimension
    ac = box_count(set_times_circle(K, deltas), deltas).dimension
    assert ac >= a + 0.85


def test_degenerate_range_rejected():
    x = np.linspace(0, 1, 2000)
    with pytest.raises(PreconditionError):
        box_count(x, dyadic_deltas(2, 14))
    with pytest.raises(PreconditionError):
        box_count(x[:500], dyadic_deltas(2, 6))
    with pytest.raises(PreconditionError):
        box_count(x, [0.1, 0.05])


def test_circle_parameter_spacing():
    t = circle_parameter(2.0**-17)
    assert np.diff(t).max() <= 2.0**-19


def test_auto_deltas_in_range():
    x = np.linspace(0, 1, 5001)
    d = auto_deltas(x)
    assert d and min(d) >= 4 * 2e-4 and max(d) <= 0.25


def test_report_is_heuristic():
    rep = box_count(circle_cloud(20000), dyadic_deltas(2, 8), content_dims=(1,))
    out = rep.to_dict()
    assert out["heuristic"] is True
    assert len(out["content"]["1"]) == len(out["deltas"])
    assert content_flag(rep, 1) in (POSITIVE, INCONCLUSIVE)


def test_corollary_ball(ball, ball_analysis):
    chain = compute_core(ball, CoreParams(64, 4), ball_analysis)
    rep = corollary_report(chain)
    assert rep["verdict"] == APPLIES and rep["core_size"] == 0


def test_corollary_circle(circle_chain):
    rep = corollary_report(circle_chain)
    assert rep["verdict"] == APPLIES and rep["reason"] == "empty core"


def test_corollary_fat(fat_chain):
    rep = corollary_report(fat_chain)
    assert rep["verdict"] == INCONCLUSIVE_VERDICT
    assert rep["content_flag_d2"] != MEASURE_ZERO
    assert rep["dimension_report"] is not None
    assert FINE_INTERIOR_NOTE in rep["notes"]
    assert rep["heuristic"] is True
