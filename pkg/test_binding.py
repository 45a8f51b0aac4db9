import dataclasses
import math

import numpy as np
import pytest

from binding import (
    NO_BINDING,
    BindingRecord,
    Itinerary,
    binding_ladder,
    bound_budget_check,
    bound_period,
    bound_period_from_offset,
    check_G_condition,
    compute_Dk,
    decompose_orbit,
    deep_return_flags,
    deep_returns,
    dk_ratio_bounds,
    fold_period,
    g_condition_from_distances,
    ladder_orders,
    log_dk_table,
    recovery_report,
    theta_nu,
)
from cocycle import HyperbolicTimes
from critical_structure import as_approx, find_critical_point
from henon_family import Constants, FamilyParams
from logger import ControlLost, CriticalPosition, LadderExhausted, PreconditionError
from manifolds import Curve

CHEBYSHEV = FamilyParams(2.0, 0.0)
SHORT = Constants(M=2)


@pytest.fixture(scope='module')
def zeta():
    xs = np.linspace(-0.5, 0.5, 101)
    return find_critical_point(CHEBYSHEV, Curve(np.stack([xs, np.zeros_like(xs)], axis=-1)))


@pytest.fixture(scope='module')
def itinerary(zeta):
    return decompose_orbit(CHEBYSHEV, [1e-3, 0.0], 9, Xi=[zeta], constants=SHORT)


def test_Dk_at_the_chebyshev_parameter(zeta):
    assert compute_Dk(zeta, 5, 0.01) == pytest.approx(3.362e-3, rel=1e-3)
    log_D = log_dk_table(zeta, 0.01, 10)
    k = np.arange(1, 11)
    assert np.allclose(log_D[1:], -0.03 * k - (k - 1) * math.log(4.0))


def test_Dk_ratio_bounds_on_slow_growth():
    flat = log_dk_table(np.zeros(12), 0.01, 10)
    assert np.all(dk_ratio_bounds(flat, 0.01))
    fast = log_dk_table(np.arange(12) * math.log(4.0), 0.01, 10)
    bounds = dk_ratio_bounds(fast, 0.01)
    assert not bounds[0]
    assert np.all(np.diff(fast[1:]) <= -0.03 + 1e-12)


def test_bound_period_from_offset(zeta):
    log_D = log_dk_table(zeta, 0.01, 39)
    assert bound_period_from_offset(2e-6, log_D, None, 2, 2) == (9, 9)
    assert bound_period_from_offset(0.5, log_D, None, 2, 2) is NO_BINDING
    with pytest.raises(CriticalPosition):
        bound_period_from_offset(0.0, log_D, None, 2, 2)


def test_offset_on_a_strip_boundary_counts_as_outside(zeta):
    log_D = log_dk_table(zeta, 0.01, 39)
    edge = 0.5 * math.exp(log_D[9])
    assert bound_period_from_offset(edge, log_D, None, 2, 2) == (8, 8)


def test_fold_period(zeta):
    assert fold_period(zeta, 4.0 ** -10, 10, 0.19) == 2
    assert fold_period(zeta, 1e-300, 3, 0.2) == 3


def test_theta_nu_on_free_orbit(zeta):
    kappa0 = Constants().kappa0
    assert theta_nu(zeta, None, 5, kappa0) == pytest.approx(kappa0 / 21.25)
    assert theta_nu(zeta, None, 1, kappa0) == math.inf


def test_decomposition_of_a_single_return(itinerary):
    assert len(itinerary.records) == 1
    record = itinerary.records[0]
    assert (record.time, record.k, record.p) == (0, 9, 9)
    assert record.position == 'admissible'
    assert record.distance == pytest.approx(1e-3)
    assert itinerary.states[1:9] == ['bound'] * 8
    assert itinerary.states[0] == 'free' and itinerary.states[9] == 'free'
    assert itinerary.deep == [True]
    assert itinerary.to_dict()['events'][0]['k'] == 9


def test_recovery_report_covers_completed_bindings(itinerary):
    report = recovery_report(CHEBYSHEV, itinerary, SHORT)
    assert len(report['bindings']) == 1
    row = report['bindings'][0]
    assert (row['time'], row['p'], row['q']) == (0, 9, 1)
    assert row['shadowing']
    assert row['expiry_growth'] and row['expiry_recovery']
    assert row['p_window'] == (3.0 * math.log(1e3) / math.log(SHORT.C0) <= 9)
    assert row['q_constant'] == math.inf
    assert report['free_growth'] == [] and report['critical'] == []
    assert report['summary']['q_constant'] is None
    assert report['summary']['critical_contraction']


def test_free_return_without_binding_points():
    with pytest.raises(ControlLost):
        decompose_orbit(CHEBYSHEV, [1e-3, 0.0], 3, Xi=[], constants=SHORT)


def return_after(m, x_m):
    """Start of an orbit of 1 - 2x^2 that lands on x_m after m steps"""
    t = (math.pi / 2.0 - math.asin(-x_m)) / 2.0 ** m
    return [-math.cos(t), 0.0]


def test_binding_ladder(zeta):
    choice = binding_ladder(CHEBYSHEV, return_after(4, -1e-3), [1.0, 0.0], 4, [zeta], SHORT)
    assert choice.zeta is zeta
    assert (choice.level, choice.mu, choice.position, choice.k) == (2, 2, 'admissible', 9)
    assert choice.required_order == ladder_orders(HyperbolicTimes([0, 2], 4, True), SHORT.theta)[1]
    assert not choice.exact_order


def test_ladder_levels_follow_hyperbolic_times():
    assert ladder_orders(HyperbolicTimes([0, 2], 4, True), 0.5) == [8, 4]
    assert ladder_orders(HyperbolicTimes([10, 40, 46], 48, False), 0.25) == [152, 32, 8]


def test_binding_ladder_without_tangential_position(zeta):
    offset = dataclasses.replace(as_approx(zeta), point=np.array([0.0, 0.5]))
    with pytest.raises(LadderExhausted):
        binding_ladder(CHEBYSHEV, return_after(4, -1e-3), [1.0, 0.0], 4, [offset], SHORT)


def test_binding_ladder_needs_hyperbolic_times(zeta):
    with pytest.raises(PreconditionError):
        binding_ladder(CHEBYSHEV, [1e-3, 0.0], [1.0, 0.0], 0, [zeta], SHORT)


def test_return_in_critical_position(zeta):
    choice = binding_ladder(CHEBYSHEV, return_after(4, 0.0), [1.0, 0.0], 4, [zeta], SHORT)
    assert (choice.position, choice.k) == ('critical', None)

    itinerary = decompose_orbit(CHEBYSHEV, [1e-13, 0.0], 3, Xi=[zeta], constants=SHORT)
    record = itinerary.records[0]
    assert (record.position, record.k, record.p) == ('critical', None, 0)
    assert itinerary.states == ['free'] * 4

    report = recovery_report(CHEBYSHEV, itinerary, SHORT)
    assert len(report['critical']) == 1
    row = report['critical'][0]
    assert row['n'] == zeta.approx.order
    assert row['log_growth'] <= -8.0 * SHORT.lam * row['n']
    assert report['summary']['critical_contraction']


def test_deep_return_flags():
    assert deep_return_flags([0.1, 0.5]) == [True, False]
    assert deep_return_flags([0.1, 0.01]) == [True, True]


def test_cumulative_depth_condition():
    assert g_condition_from_distances([0.5, 0.5], 100, 0.01)[0] is False
    ok, margin = g_condition_from_distances([0.5, 0.5], 200, 0.01)
    assert ok and margin == pytest.approx(2.0 - 2.0 * math.log(2.0))


def test_bound_budget():
    def record(time, p):
        return BindingRecord(time, None, 0, 2, 'admissible', p, 1, 0.01)

    itinerary = Itinerary(np.zeros((301, 2)), np.zeros(301), [record(0, 2), record(10, 3), record(300, 3)], [])
    assert bound_budget_check(itinerary, 0.3) == [True, False]


def test_bound_period_of_a_return(zeta):
    assert bound_period(CHEBYSHEV, zeta, [1e-3, 0.0], SHORT) == (9, 9)
    assert bound_period(CHEBYSHEV, zeta, [0.3, 0.0], SHORT) is NO_BINDING


def test_deep_returns_of_an_itinerary(itinerary):
    assert deep_returns(itinerary) == itinerary.records


def unbound_return(time, distance):
    return BindingRecord(time, None, 0, None, 'unbound', 0, 0, distance)


def test_condition_counts_every_free_return():
    itinerary = Itinerary(np.zeros((11, 2)), np.zeros(11), [unbound_return(3, 1e-3)], ['free'] * 11)
    ok, margin = check_G_condition(None, 10, itinerary, 0.01)
    assert not ok
    assert margin == pytest.approx(math.log(1e-3) + 0.1)


@pytest.mark.parametrize("returns, ok, margin", [
    ([], True, 1.0),
    ([unbound_return(5, math.exp(-0.5))], True, 0.5),
    ([unbound_return(5, math.exp(-2.0))], False, -1.0),
    ([unbound_return(0, 1e-9), unbound_return(101, 1e-9)], True, 1.0),
])
def test_condition_on_return_depths(returns, ok, margin):
    itinerary = Itinerary(np.zeros((102, 2)), np.zeros(102), returns, ['free'] * 102)
    passed, value = check_G_condition(None, 100, itinerary, 0.01)
    assert passed is ok
    assert value == pytest.approx(margin)
