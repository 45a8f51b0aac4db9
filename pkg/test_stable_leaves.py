import numpy as np
import pytest

from henon_family import FamilyParams
from logger import FieldDegenerate, PreconditionError
from manifolds import Curve
from stable_leaves import (
    Leaf,
    contracting_direction,
    expansion_rate,
    leaf_curve_intersection,
    leaf_of_order,
    leaves_cross,
    limit_leaf,
    project_along_leaves,
)

PARAMS = FamilyParams(1.99, 1e-4, 'reversing')


def vertical_leaf(x0=0.0):
    ys = np.linspace(-1.0, 1.0, 41)
    return Leaf.from_graph(ys, np.full_like(ys, x0))


def graph_curve(ys, xs):
    return Curve(np.stack([xs, ys], axis=-1))


@pytest.fixture(scope='module')
def leaf():
    return limit_leaf(PARAMS, [0.5, 0.0])


def test_contracting_direction_is_nearly_vertical():
    e = contracting_direction(PARAMS, [0.5, 0.0], 4)
    assert abs(e[1]) > 0.99


def test_expansion_rate_on_the_critical_orbit():
    assert expansion_rate(FamilyParams(2.0, 0.0), [1.0, 0.0], 3) == pytest.approx(4.0)


def test_leaf_preconditions():
    with pytest.raises(FieldDegenerate):
        leaf_of_order(FamilyParams(2.0, 0.0), [0.5, 0.0], 2)
    with pytest.raises(PreconditionError):
        leaf_of_order(PARAMS, [0.5, 0.0], 0)


def test_leaf_of_order_is_a_steep_graph_through_its_base():
    leaf = leaf_of_order(PARAMS, [0.5, 0.0], 3)
    assert float(leaf.x(0.0)) == pytest.approx(0.5, abs=1e-10)
    assert leaf.y_range == pytest.approx((-0.01, 0.01))
    assert np.max(np.abs(leaf.x_prime(leaf.ys))) < 0.1


def test_limit_leaf_converges_and_contracts(leaf):
    assert leaf.is_limit
    assert leaf.record['converged']
    cert = leaf.record['certificate']
    assert cert['factor'] is not None and cert['factor'] < 1.0
    assert float(leaf.x(0.0)) == pytest.approx(0.5, abs=1e-10)


def test_limit_leaves_do_not_cross(leaf):
    other = limit_leaf(PARAMS, [0.51, 0.0])
    assert not leaves_cross(leaf, other)


def test_leaves_cross():
    ys = np.linspace(-1.0, 1.0, 21)
    assert not leaves_cross(vertical_leaf(0.0), vertical_leaf(0.1))
    assert leaves_cross(Leaf.from_graph(ys, ys), Leaf.from_graph(ys, -ys))


def test_intersection_with_a_single_crossing():
    xs = np.linspace(-1.0, 1.0, 21)
    hit = leaf_curve_intersection(vertical_leaf(), Curve(np.stack([xs, np.full_like(xs, 0.1)], axis=-1)))
    assert hit.kind == 'transverse'
    assert hit.points[0] == pytest.approx([0.0, 0.1], abs=1e-9)


def test_intersection_with_a_fold():
    ys = np.linspace(-1.0, 1.0, 40)
    hit = leaf_curve_intersection(vertical_leaf(), graph_curve(ys, 0.25 - ys ** 2))
    assert hit.kind == 'two_points'
    assert hit.separation == pytest.approx(1.0, abs=1e-3)


def test_intersection_with_a_tangent_fold():
    ys = np.arange(-20, 21) / 20.0
    hit = leaf_curve_intersection(vertical_leaf(), graph_curve(ys, ys ** 2))
    assert hit.kind == 'tangency'
    assert hit.points[0] == pytest.approx([0.0, 0.0])


def test_intersection_misses_a_clear_fold():
    ys = np.linspace(-1.0, 1.0, 41)
    hit = leaf_curve_intersection(vertical_leaf(), graph_curve(ys, ys ** 2 + 0.2))
    assert hit.kind == 'empty'
    assert hit.discriminant < 0.0


def test_projection_along_leaves_is_nearly_isometric():
    xs = np.linspace(-0.5, 0.9, 57)
    target = Curve(np.stack([xs, np.zeros_like(xs)], axis=-1))
    report = project_along_leaves(PARAMS, [[0.3, 0.005], [0.31, 0.005]], target)
    assert np.allclose(report.projected[:, 1], 0.0, atol=1e-9)
    assert report.ratios[0] == pytest.approx(1.0, abs=0.05)
