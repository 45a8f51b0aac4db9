import math

import numpy as np
import pytest

from escape_stats import (
    CloseReturnBoxes,
    CloseReturnLog,
    _log_det_along,
    check_close_return_laws,
    clopper_pearson,
    controlled_points,
    fixed_point_preimages,
    grid_escape,
    leaf_intersection_proportion,
    projectivized_bounds,
    segment_stopping_times,
    transitivity_witness,
)
from henon_family import FamilyParams
from logger import DepthExhausted, RegionUnavailable
from manifolds import Curve

CHEBYSHEV = FamilyParams(2.0, 0.0)
OPEN = FamilyParams(2.5, 0.0)


class Interval:
    """The strip |x| <= 1 standing in for R0"""

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        with np.errstate(invalid='ignore'):
            return np.isfinite(pts[:, 0]) & (np.abs(pts[:, 0]) <= 1.0 + 1e-12)


def horizontal(x0, x1, n=17):
    xs = np.linspace(x0, x1, n)
    return Curve(np.stack([xs, np.zeros_like(xs)], axis=-1))


def test_grid_escape_records_first_exit():
    fixed = (-1.0 + math.sqrt(11.0)) / 5.0
    seeds = [[fixed, 0.0], [0.95, 0.0], [0.0, 0.0], [1.5, 0.0]]
    result = grid_escape(OPEN, 0, 10, region=Interval(), points=seeds)
    assert result.seeds == 4
    assert result.escape_times.tolist() == [-1, 1, 2, 0]
    assert result.survival[:3].tolist() == [0.75, 0.5, 0.25]
    assert np.all(np.diff(result.survival) <= 0.0)
    assert result.escape_fraction == pytest.approx(0.75)


def test_segment_that_leaves_at_once():
    partition = segment_stopping_times(OPEN, horizontal(0.92, 0.98, 11), depth=5)
    assert [(e.kind, e.S) for e in partition.elements] == [('escaped', 1)]
    assert partition.remaining_mass == 0.0
    assert partition.tail().tolist() == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    assert partition.images_verified(OPEN, 0.05)


def test_segment_reaching_the_annulus_stops_at_once():
    segment = horizontal(0.04, 0.2)
    partition = segment_stopping_times(CHEBYSHEV, segment, depth=3)
    free = [e for e in partition.elements if e.kind == 'free' and e.S == 0]
    assert len(free) == 1
    assert free[0].s_interval[0] == pytest.approx(0.01, abs=1e-9)
    assert free[0].s_interval[1] == pytest.approx(segment.length)
    assert partition.remaining_mass <= 0.5


def test_stopping_times_report_unfinished_partitions():
    with pytest.raises(DepthExhausted) as info:
        segment_stopping_times(CHEBYSHEV, horizontal(-0.3, 0.3, 31), depth=3, max_elements=1)
    assert info.value.partition is not None


def test_fixed_point_preimages():
    assert fixed_point_preimages(2.0, 0).tolist() == [0.5]
    assert np.allclose(fixed_point_preimages(2.0, 1), [-0.5, 0.5])
    assert np.allclose(fixed_point_preimages(2.0, 2), [-math.sqrt(0.75), -0.5, 0.5, math.sqrt(0.75)])


def test_invariant_interval_keeps_every_point():
    report = leaf_intersection_proportion(CHEBYSHEV, horizontal(-0.9, 0.9), 20, samples=500)
    assert report.proportion == 1.0
    assert report.crosses_stable is None
    assert report.preimages > 0


def test_open_family_loses_most_points():
    report = leaf_intersection_proportion(OPEN, horizontal(-0.9, 0.9), 60, samples=500)
    assert report.proportion < 0.5


def test_controlled_points():
    seeds = [[0.5, 0.0], [math.sqrt(0.5), 0.0], [0.0, 0.0]]
    report = controlled_points(CHEBYSHEV, seeds, horizon=10, Xi=[[0.0, 0.0]], region=Interval())
    assert report.certified.tolist() == [True, False, True]
    assert report.depth.tolist() == [10, 0, 10]
    assert report.growth_holds[0]


def test_close_return_laws():
    assert check_close_return_laws(CloseReturnLog(np.zeros(2), 2, times=[8, 32]))['holds']
    laws = check_close_return_laws(CloseReturnLog(np.zeros(2), 2, times=[8, 20]))
    assert not laws['spacing'] and not laws['holds']
    assert CloseReturnLog(np.zeros(2), 1).controlled
    assert not CloseReturnLog(np.zeros(2), 1, truncated=True).controlled


def test_close_return_boxes_need_regions():
    with pytest.raises(RegionUnavailable):
        CloseReturnBoxes([], 0.05)


@pytest.mark.parametrize("successes, trials, expected", [
    (0, 10, (0.0, 1.0 - 0.025 ** 0.1)),
    (10, 10, (0.025 ** 0.1, 1.0)),
])
def test_clopper_pearson_at_the_edges(successes, trials, expected):
    assert clopper_pearson(successes, trials) == pytest.approx(expected, rel=1e-6)


def test_projectivized_derivative_bounds():
    report = projectivized_bounds(FamilyParams(1.4, 0.3), samples=200)
    assert report['samples'] > 0
    assert report['holds']


def test_transitivity_needs_a_dissipative_map():
    report = transitivity_witness(CHEBYSHEV)
    assert not report.applicable
    assert report.count == 0


def test_area_distortion_along_orbits():
    assert _log_det_along(FamilyParams(1.4, 0.3), [0.1, 0.1], 3) == pytest.approx(3.0 * math.log(0.3))
    assert _log_det_along(FamilyParams(2.0, 0.0), [0.3, 0.0], 3) == -math.inf
