import math

import numpy as np
import pytest

from critical_structure import (
    CriticalApprox,
    build_chi,
    build_critical_regions,
    check_good_behavior,
    check_nice,
    count_tangencies,
    critical_partition,
    element_metrics,
    find_critical_approx,
    find_critical_point,
    free_returns,
    refine_critical_approx,
    tangential_position,
)
from henon_family import Constants, FamilyParams
from logger import ComponentResolutionLost, HypothesisViolated, NoSignChange, NoTangency
from manifolds import Curve, build_R0

CHEBYSHEV = FamilyParams(2.0, 0.0)


def horizontal(x0, x1, y=0.0, n=101):
    xs = np.linspace(x0, x1, n)
    return Curve(np.stack([xs, np.full_like(xs, y)], axis=-1))


@pytest.fixture(scope='module')
def critical_point():
    return find_critical_point(CHEBYSHEV, horizontal(-0.5, 0.5))


@pytest.fixture(scope='module')
def dissipative():
    params = FamilyParams(1.99, 1e-4, 'reversing')
    return params, build_R0(params)


def test_critical_approx_of_the_quadratic_map():
    approx = find_critical_approx(CHEBYSHEV, horizontal(-0.5, 0.5), 3)
    assert approx.point == pytest.approx([0.0, 0.0], abs=1e-12)
    assert approx.expanding
    assert count_tangencies(CHEBYSHEV, horizontal(-0.5, 0.5), 3) == 1


def test_no_sign_change_away_from_the_fold():
    with pytest.raises(NoSignChange):
        find_critical_approx(CHEBYSHEV, horizontal(0.1, 0.2), 2)
    with pytest.raises(NoTangency):
        find_critical_point(CHEBYSHEV, horizontal(0.1, 0.2))


def test_critical_point_converges(critical_point):
    assert critical_point.converged
    assert critical_point.point == pytest.approx([0.0, 0.0], abs=1e-12)
    assert critical_point.tangency_count == 1
    assert np.allclose(critical_point.wi.log_norms()[:5], np.arange(5) * math.log(4.0))


def test_good_behaviour_at_the_chebyshev_parameter(critical_point):
    behaviour = check_good_behavior(critical_point)
    assert behaviour.g1 and behaviour.g2 and behaviour.g3
    assert behaviour.chi_monotone
    assert not behaviour.truncated
    assert behaviour.horizon == 20 * critical_point.order


def test_nice_conditions_are_vacuous_for_short_orders(critical_point):
    report = check_nice(CHEBYSHEV, critical_point)
    assert report['C1']
    assert report['vacuous'] and report['theta_n'] == 0


def test_free_return_of_the_superstable_orbit():
    params = FamilyParams(1.0, 0.0)
    approx = CriticalApprox(params, np.zeros(2), 1, horizontal(-0.5, 0.5), 0.5, 0.0)
    returns = free_returns(approx, 0.05, 20, 8.0)
    assert len(returns) == 1
    assert returns[0][0] == 2


def test_recovery_function_chains_through_returns():
    chi = build_chi(2, 10, [(5, 3)], 0.6, 0.05)
    assert chi.tolist() == [2, 3, 4, 5, 5, 7, 8, 9, 10]


def test_refine_onto_a_nearby_curve(critical_point):
    approx = critical_point.approx
    moved = refine_critical_approx(CHEBYSHEV, horizontal(-0.5, 0.5, y=1e-12), approx)
    assert moved.point == pytest.approx([0.0, 1e-12], abs=1e-9)
    with pytest.raises(HypothesisViolated):
        refine_critical_approx(CHEBYSHEV, horizontal(-0.5, 0.5, y=1e-3), approx)


def test_tangential_position(critical_point):
    assert tangential_position([0.1, 0.0], [1.0, 0.0], critical_point, 1e-4)
    assert not tangential_position([0.1, 0.0], [1.0, 1.0], critical_point, 1e-4)


def test_critical_partition_of_the_quadratic_map(critical_point):
    constants = Constants(M=2)
    segment = horizontal(-0.5, 0.5)
    elements = critical_partition(CHEBYSHEV, segment, critical_point, constants)
    assert elements
    starts = [e.s_interval[0] for e in elements]
    assert starts == sorted(starts)
    assert {e.side for e in elements if e.k == 2} == {-1, 1}
    assert all(e.period == e.k for e in elements)
    assert all(0.0 <= e.s_interval[0] < e.s_interval[1] <= segment.length + 1e-12 for e in elements)
    metrics = element_metrics(CHEBYSHEV, elements[0])
    assert metrics['image_length'] > 0.0


def test_level_zero_critical_region(dissipative):
    params, region = dissipative
    regions = build_critical_regions(params, 0, region)
    assert len(regions) == 1
    component = regions[0].components[0]
    assert 0.0 < component.gap < 0.05
    assert regions[0].contains([[0.0, 0.0]])[0]


def test_critical_regions_stop_when_unresolved(dissipative):
    params, region = dissipative
    with pytest.raises(ComponentResolutionLost) as info:
        build_critical_regions(params, 3, region, tol=1e-3, grid=2001)
    assert info.value.regions
    assert info.value.regions[0].level == 0


def test_single_order_critical_point_is_unconverged():
    point = find_critical_point(CHEBYSHEV, horizontal(-0.5, 0.5), max_order=1)
    assert not point.converged
    assert point.gaps == []
    assert abs(point.point[0]) < 1e-8
