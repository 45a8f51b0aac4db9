import math

import numpy as np
import pytest

from cocycle import (
    CocycleHistory,
    contracting_sequence,
    derivative_log_norms,
    hyperbolic_times_from_lognorms,
    is_kappa_expanding,
    is_regular_norms,
    most_contracting,
    slope_report,
    verify_hyperbolic_times,
    wi_sequence,
)
from henon_family import FamilyParams
from logger import (
    DegenerateSingularValues,
    ExpansionHypothesisViolated,
    NoHyperbolicTimes,
    PreconditionError,
)

DEGENERATE = FamilyParams(2.0, 0.0)


def test_most_contracting_of_diagonal():
    assert np.allclose(most_contracting(np.diag([3.0, 0.5])), [0.0, 1.0])
    assert np.allclose(most_contracting(np.diag([0.5, 3.0])), [1.0, 0.0])


def test_most_contracting_matches_svd():
    M = np.array([[-3.1, 0.02], [0.02, 0.0]])
    e = most_contracting(M)
    smallest = np.linalg.svd(M, compute_uv=False)[-1]
    assert np.hypot(*(M @ e)) == pytest.approx(smallest, rel=1e-9)
    assert e[1] >= 0.0


@pytest.mark.parametrize("M", [np.eye(2), np.zeros((2, 2))])
def test_most_contracting_needs_separated_values(M):
    with pytest.raises(DegenerateSingularValues):
        most_contracting(M)


def test_product_norms_of_constant_cocycle():
    history = CocycleHistory(np.zeros(2), [np.diag([2.0, 1e-3])] * 5, b=1e-3)
    assert np.allclose(history.log_norms, np.arange(1, 6) * math.log(2.0))

    report = contracting_sequence(history)
    assert np.allclose(report.directions, [0.0, 1.0])
    assert np.allclose(report.crosses, 0.0)
    assert report.fitted_ratio is None
    assert report.image_monotone


def test_contracting_sequence_requires_expansion():
    history = CocycleHistory(np.zeros(2), [np.diag([0.3, 0.2])] * 3, b=0.06)
    with pytest.raises(ExpansionHypothesisViolated):
        contracting_sequence(history, kappa=0.5)


def test_log_norms_along_the_critical_orbit():
    L = derivative_log_norms(DEGENERATE, [1.0, 0.0], [1.0, 0.0], 5)
    assert np.allclose(L, np.arange(6) * math.log(4.0))
    with pytest.raises(PreconditionError):
        derivative_log_norms(DEGENERATE, [1.0, 0.0], [0.0, 0.0], 3)


def test_kappa_expansion():
    assert is_kappa_expanding(DEGENERATE, [1.0, 0.0], [1.0, 0.0], 3.0, 4) == (True, None)
    assert is_kappa_expanding(DEGENERATE, [1.0, 0.0], [1.0, 0.0], 5.0, 4) == (False, 1)


def test_regularity():
    assert is_regular_norms([0.0, 1.0, 2.0], 0.01, 0.05)
    assert not is_regular_norms([0.0, 10.0, 0.0], 0.01, 0.05)


def test_hyperbolic_times_on_linear_growth():
    m = 40
    L = np.arange(m + 1) * math.log(4.0)
    ht = hyperbolic_times_from_lognorms(L, m, 0.05, 0.5)
    assert ht.times == [8, 32, 38]
    assert not ht.spacing_relaxed
    assert verify_hyperbolic_times(ht, L, 0.05, 0.5) == {'expansion': True, 'spacing': True, 'placement': True}


def test_hyperbolic_times_preconditions():
    L = np.arange(41) * math.log(4.0)
    with pytest.raises(PreconditionError):
        hyperbolic_times_from_lognorms(L, 2, 0.05, 0.5)
    with pytest.raises(PreconditionError):
        hyperbolic_times_from_lognorms(L[:10], 40, 0.05, 0.5)


def test_no_hyperbolic_times_without_growth():
    L = -0.1 * np.arange(11)
    with pytest.raises(NoHyperbolicTimes):
        hyperbolic_times_from_lognorms(L, 10, 0.05, 0.99)


def test_critical_history_at_the_chebyshev_parameter():
    history = wi_sequence(DEGENERATE, [0.0, 0.0], 12)
    assert len(history) == 12
    assert np.allclose(history.vector(1), [1.0, 0.0])
    assert np.allclose(history.log_norms(), np.arange(12) * math.log(4.0))
    with pytest.raises(IndexError):
        history.vector(0)


def test_escaping_critical_orbit_is_truncated():
    history = wi_sequence(FamilyParams(2.5, 0.0), [0.0, 0.0], 100)
    assert history.diverged_at is not None
    assert len(history) < 100


def test_contracting_directions_are_steep_off_the_critical_strip():
    params = FamilyParams(2.0, 1e-4)
    xs = np.concatenate([np.linspace(-1.0, -0.1, 10), np.linspace(0.1, 1.0, 10)])
    pts = np.stack([xs, np.zeros_like(xs)], axis=-1)
    report = slope_report(params, pts, 0.05)
    assert report['holds_outside_delta']
    assert report['bound'] == pytest.approx(10.0)


def test_slope_bound_near_the_critical_strip():
    params = FamilyParams(2.0, 1e-4)
    xs = np.array([-0.5, -0.02, 0.02, 0.5])
    report = slope_report(params, np.stack([xs, np.zeros_like(xs)], axis=-1), 0.05)
    assert report['holds_outside_delta']
    assert not report['holds_outside_sqrt_b']
    assert report['min_slope_outside_sqrt_b'] == pytest.approx(8.12, abs=0.01)
    assert report['measured_constant_outside_sqrt_b'] == pytest.approx(0.0812, abs=1e-4)
