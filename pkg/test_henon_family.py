import math

import numpy as np
import pytest

from henon_family import (
    Constants,
    FamilyParams,
    apply,
    apply_modified,
    get_region,
    inverse_apply,
    jacobian,
    jacobian_modified,
    orbit,
    region_tag,
)
from logger import ModifiedFamilyUnavailable, NotInvertible, PreconditionError
from manifolds import build_R0


@pytest.fixture(scope='module')
def family():
    params = FamilyParams(1.99, 1e-4, 'reversing')
    return params, build_R0(params)


@pytest.mark.parametrize("orientation", ['reversing', 'preserving'])
def test_determinant_is_constant(orientation):
    params = FamilyParams(1.9, 1e-3, orientation)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.5, 1.5, (50, 2))
    dets = np.linalg.det(jacobian(params, pts))
    assert np.allclose(dets, -params.sigma * params.b, rtol=1e-12, atol=1e-15)


def test_degenerate_family_is_logistic():
    params = FamilyParams(2.0, 0.0)
    xs = np.linspace(-1.0, 1.0, 11)
    pts = np.stack([xs, np.full_like(xs, 0.3)], axis=-1)
    image = apply(params, pts)
    assert np.allclose(image[:, 0], 1.0 - 2.0 * xs ** 2)
    assert np.all(image[:, 1] == 0.0)
    assert np.allclose(apply(params, [0.5, 0.0]), [0.5, 0.0])


def test_inverse_undoes_the_map():
    params = FamilyParams(1.9, 1e-3, 'preserving')
    z = np.array([0.3, -0.01])
    assert np.allclose(inverse_apply(params, apply(params, z)), z, atol=1e-12)


def test_degenerate_family_is_not_invertible():
    with pytest.raises(NotInvertible):
        inverse_apply(FamilyParams(2.0, 0.0), [0.1, 0.0])


def test_rejects_bad_parameters():
    with pytest.raises(PreconditionError):
        FamilyParams(2.0, -1e-4)
    with pytest.raises(PreconditionError):
        FamilyParams(2.0, 1e-4, 'sideways')
    with pytest.raises(PreconditionError):
        Constants(lambda0=math.log(2))


def test_constants_derived_values():
    c = Constants()
    assert c.lam == pytest.approx(0.3)
    assert c.kappa0 == pytest.approx(8.0 ** -10)
    assert c.beta(0.0) == 0.0
    assert c.beta(1e-4) == pytest.approx(2.0 * math.log(8.0) / math.log(1e4))
    assert c.n0(1e-2) == 0.0
    assert c.n0(0.0) == math.inf
    assert c.n0(1e-14) > c.n0(1e-12) > 0.0


def test_modified_family_needs_a_region():
    with pytest.raises(ModifiedFamilyUnavailable):
        get_region(FamilyParams(2.1234, 1e-4))


def test_modified_family_agrees_on_R0(family):
    params, region = family
    pts = region.sample(100, np.random.default_rng(1))
    image, tags = apply_modified(params, pts, region)
    assert np.array_equal(image, apply(params, pts))
    assert set(tags) == {'in_R0'}
    assert np.array_equal(jacobian_modified(params, pts, region), jacobian(params, pts))


def test_modified_family_keeps_D1(family):
    params, region = family
    ys = np.linspace(-0.9, 0.9, 7) * params.sqrt_b
    xs = region.s_of(ys) - 0.2
    pts = np.stack([xs, ys], axis=-1)
    assert np.all(region.in_D1(pts))
    image, tags = apply_modified(params, pts, region)
    assert set(tags) == {'in_D1'}
    assert np.all(region.in_D1(image))


def test_region_tags(family):
    params, region = family
    assert region_tag(params, [0.0, 0.0], 0.05, region) == 'I_delta'
    assert region_tag(params, [1.6, 0.0], 0.05, region) == 'D0'


def test_orbit_records_first_exit(family):
    params, region = family
    start = np.array([1.6, 0.0])
    result = orbit(params, start, 3, region=region)
    assert result.exit.step == 0
    assert result.exit.region == 'D0'
    assert result.points.shape == (4, 2)


def test_orbit_rejects_negative_length(family):
    params, region = family
    with pytest.raises(PreconditionError):
        orbit(params, [0.0, 0.0], -1, region=region)
