"""
Henon-like family near the first bifurcation

Defines the map (x, y) -> (1 - a x^2 + sqrt(b) y, +/- sqrt(b) x) (or a
user-supplied perturbation of the quadratic map), its derivative and
inverse, the modified family that agrees with the map on R0 and sends
everything else off to the left, and raw orbit evaluation.

All point-valued functions accept a single point of shape (2,) or an array
of points of shape (..., 2) and return arrays of the same leading shape.
"""
import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import optimize

from config import FAMILY_DEFAULTS, CONSTANTS_DEFAULTS, NUMERICS
from logger import (
    logger,
    ModifiedFamilyUnavailable,
    NotInvertible,
    NumericOverflow,
    PreconditionError,
)

ORIENTATIONS = ('reversing', 'preserving')


class Point(NamedTuple):
    x: float
    y: float


class TangentVector(NamedTuple):
    base: Point
    direction: tuple

    @property
    def slope(self) -> float:
        """|dy/dx| of the direction; inf for vertical vectors"""
        dx, dy = self.direction
        if dx == 0.0:
            return math.inf
        return abs(dy / dx)


@dataclass(frozen=True)
class FamilyParams:
    """One member of the Henon-like family"""
    a: float = FAMILY_DEFAULTS['a']
    b: float = FAMILY_DEFAULTS['b']
    orientation: str = FAMILY_DEFAULTS['orientation']
    # perturbation(a, b, x, y) -> (phi1, phi2); None selects the standard coupling
    perturbation: Optional[Callable] = None

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise PreconditionError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        if not (self.b >= 0.0):
            raise PreconditionError(f"b must be non-negative, got {self.b}")

    @property
    def sigma(self) -> float:
        """+1 when det Df = -b (reversing), -1 when det Df = +b (preserving)"""
        return 1.0 if self.orientation == 'reversing' else -1.0

    @property
    def sqrt_b(self) -> float:
        return math.sqrt(self.b)

    @property
    def is_degenerate(self) -> bool:
        return self.b == 0.0

    def with_a(self, a: float) -> 'FamilyParams':
        return replace(self, a=float(a))


@dataclass(frozen=True)
class Constants:
    """
    Constructive constants

    alpha, M and delta are chosen first (in that order), then b. C0 bounds
    the derivatives of the family on the working box; C1..C3 are measured
    by the rectangle checks and stay None until then.
    """
    alpha: float = CONSTANTS_DEFAULTS['alpha']
    M: int = CONSTANTS_DEFAULTS['M']
    delta: float = CONSTANTS_DEFAULTS['delta']
    lambda0: float = CONSTANTS_DEFAULTS['lambda0']
    C0: float = 8.0
    C1: Optional[float] = None
    C2: Optional[float] = None
    C3: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.lambda0 < math.log(2):
            raise PreconditionError(f"lambda0 must lie in (0, log 2), got {self.lambda0}")
        if self.C0 <= 1.0:
            raise PreconditionError(f"C0 must exceed 1, got {self.C0}")

    @classmethod
    def for_family(cls, params: FamilyParams, **overrides) -> 'Constants':
        """Constants with C0 estimated from the family on the working box"""
        overrides.setdefault('C0', estimate_C0(params))
        return cls(**overrides)

    @property
    def lam(self) -> float:
        return self.lambda0 / 2.0

    @property
    def theta(self) -> float:
        return self.alpha ** 3

    @property
    def kappa0(self) -> float:
        return self.C0 ** -10

    @property
    def kappa_half(self) -> float:
        return self.kappa0 ** 0.5

    @property
    def kappa_third(self) -> float:
        return self.kappa0 ** (1.0 / 3.0)

    @property
    def kappa_quarter(self) -> float:
        return self.kappa0 ** 0.25

    @property
    def N(self) -> int:
        return int(math.floor(math.log(1.0 / self.delta) / self.theta))

    def beta(self, b: float) -> float:
        """2 log C0 / log(1/b); zero in the degenerate family"""
        if b <= 0.0:
            return 0.0
        return 2.0 * math.log(self.C0) / math.log(1.0 / b)

    def n0(self, eps: float) -> float:
        """
        Non-recurrence horizon for parameters within eps below a*

        Grows like log(1/eps) as eps -> 0; clamped at zero.
        """
        if eps <= 0.0:
            return math.inf
        return max(0.0, math.log(self.kappa0 / (2.0 * eps)) / (2.0 * math.log(self.C0)))


class ExitRecord(NamedTuple):
    step: int
    region: str  # 'D0', 'D1' or 'outside'
    point: Point


class OrbitResult(NamedTuple):
    points: np.ndarray
    exit: Optional[ExitRecord]


# Trapping regions built by manifolds.build_R0, keyed by family
_REGIONS = {}


def register_region(params: FamilyParams, region) -> None:
    """Make a built R0 available to the modified family"""
    _REGIONS[params] = region


def get_region(params: FamilyParams):
    try:
        return _REGIONS[params]
    except KeyError:
        raise ModifiedFamilyUnavailable(
            f"R0 has not been built for a={params.a}, b={params.b}, {params.orientation}"
        ) from None


def _split(z):
    z = np.asarray(z, dtype=float)
    return z, z[..., 0], z[..., 1]


def apply(params: FamilyParams, z) -> np.ndarray:
    """Image of z under the family"""
    z, x, y = _split(z)
    if params.perturbation is None:
        sb = params.sqrt_b
        X = 1.0 - params.a * x * x + sb * y
        Y = params.sigma * sb * x
    else:
        p1, p2 = params.perturbation(params.a, params.b, x, y)
        X = 1.0 - params.a * x * x + params.b * np.asarray(p1, dtype=float)
        Y = params.b * np.asarray(p2, dtype=float)
    return np.stack([X, Y], axis=-1)


def jacobian(params: FamilyParams, z) -> np.ndarray:
    """Derivative of apply at z, shape (..., 2, 2)"""
    z, x, y = _split(z)
    J = np.zeros(z.shape[:-1] + (2, 2))
    J[..., 0, 0] = -2.0 * params.a * x
    if params.perturbation is None:
        sb = params.sqrt_b
        J[..., 0, 1] = sb
        J[..., 1, 0] = params.sigma * sb
        return J

    h = 1e-6
    px_hi = np.asarray(params.perturbation(params.a, params.b, x + h, y), dtype=float)
    px_lo = np.asarray(params.perturbation(params.a, params.b, x - h, y), dtype=float)
    py_hi = np.asarray(params.perturbation(params.a, params.b, x, y + h), dtype=float)
    py_lo = np.asarray(params.perturbation(params.a, params.b, x, y - h), dtype=float)
    dx = (px_hi - px_lo) / (2.0 * h)
    dy = (py_hi - py_lo) / (2.0 * h)
    J[..., 0, 0] += params.b * dx[0]
    J[..., 0, 1] = params.b * dy[0]
    J[..., 1, 0] = params.b * dx[1]
    J[..., 1, 1] = params.b * dy[1]
    return J


def inverse_apply(params: FamilyParams, z) -> np.ndarray:
    """Preimage of z; the family is a diffeomorphism onto its image for b > 0"""
    if params.is_degenerate:
        raise NotInvertible("the degenerate family (b = 0) is not invertible")
    z, X, Y = _split(z)
    sb = params.sqrt_b
    x = params.sigma * Y / sb
    y = (X - 1.0 + params.a * x * x) / sb
    guess = np.stack([x, y], axis=-1)
    if params.perturbation is None:
        return guess

    flat_guess = guess.reshape(-1, 2)
    flat_target = z.reshape(-1, 2)
    out = np.empty_like(flat_guess)
    for i, (g, target) in enumerate(zip(flat_guess, flat_target)):
        sol = optimize.root(lambda w: apply(params, w) - target, g,
                            jac=lambda w: jacobian(params, w), tol=1e-14)
        if not sol.success:
            raise NotInvertible(f"inverse solve failed at {tuple(target)}: {sol.message}")
        out[i] = sol.x
    return out.reshape(z.shape)


def estimate_C0(params: FamilyParams, samples: int = 101) -> float:
    """Largest sampled derivative norm (first and second order) over the working box"""
    box = NUMERICS['working_box']
    grid = np.linspace(-box, box, samples)
    X, Y = np.meshgrid(grid, grid)
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    first = float(np.max(np.linalg.norm(jacobian(params, pts), ord=2, axis=(-2, -1))))
    return max(first, 2.0 * params.a, 1.0 + 1e-9)


def region_tag(params: FamilyParams, z, delta: float = CONSTANTS_DEFAULTS['delta'], region=None):
    """
    Classify points as 'I_delta', 'R0', 'D0', 'D1' or 'outside'

    Args:
        params: Family parameters
        z: Point or array of points
        delta: Half-width of the critical strip
        region: R0 to use (defaults to the registered one)

    Returns:
        Tag string for a single point, array of tags otherwise
    """
    region = region or get_region(params)
    pts = np.atleast_2d(np.asarray(z, dtype=float))
    inside = region.contains(pts)
    d1 = region.in_D1(pts) & ~inside
    d0 = ~inside & (pts[:, 0] >= math.sqrt(2.0))
    tags = np.full(len(pts), 'outside', dtype=object)
    tags[d0] = 'D0'
    tags[d1] = 'D1'
    tags[inside] = 'R0'
    tags[inside & (np.abs(pts[:, 0]) < delta)] = 'I_delta'
    return tags[0] if np.ndim(z) == 1 else tags


def apply_modified(params: FamilyParams, z, region=None):
    """
    Image under the modified family and the tag of the source point

    The modified map equals apply on R0; D1 (left of the local stable
    manifold of Q, |y| <= sqrt(b)) is sent affinely into itself with
    horizontal expansion 3; every other point is sent into D1 with the same
    expansion, so shallow vectors keep slope <= sqrt(b) and grow by 3.
    """
    region = region or get_region(params)
    single = np.ndim(z) == 1
    pts = np.atleast_2d(np.asarray(z, dtype=float))
    x, y = pts[:, 0], pts[:, 1]

    inside = region.contains(pts)
    s = region.s_of(y)
    d1 = ~inside & (x < s) & (np.abs(y) <= params.sqrt_b)
    escaping = ~inside & ~d1

    out = np.empty_like(pts)
    if inside.any():
        out[inside] = apply(params, pts[inside])
    out[d1, 0] = region.x_floor - 3.0 * (s[d1] - x[d1])
    out[d1, 1] = params.b * y[d1]
    out[escaping, 0] = region.x_floor - 1.0 - 3.0 * np.abs(x[escaping])
    out[escaping, 1] = params.b * np.clip(y[escaping], -1.0, 1.0)

    tags = np.where(inside, 'in_R0', np.where(d1, 'in_D1', 'escaping'))
    if single:
        return out[0], str(tags[0])
    return out, tags


def jacobian_modified(params: FamilyParams, z, region=None) -> np.ndarray:
    """Derivative of apply_modified, shape (..., 2, 2)"""
    region = region or get_region(params)
    single = np.ndim(z) == 1
    pts = np.atleast_2d(np.asarray(z, dtype=float))
    x, y = pts[:, 0], pts[:, 1]

    inside = region.contains(pts)
    s = region.s_of(y)
    d1 = ~inside & (x < s) & (np.abs(y) <= params.sqrt_b)
    escaping = ~inside & ~d1

    J = np.zeros((len(pts), 2, 2))
    if inside.any():
        J[inside] = jacobian(params, pts[inside])
    J[d1, 0, 0] = 3.0
    J[d1, 0, 1] = -3.0 * region.s_prime(y[d1])
    J[d1, 1, 1] = params.b
    J[escaping, 0, 0] = -3.0 * np.sign(x[escaping])
    J[escaping, 1, 1] = params.b * (np.abs(y[escaping]) < 1.0)
    return J[0] if single else J


def orbit(params: FamilyParams, z, n: int, use_modified: bool = False, region=None) -> OrbitResult:
    """
    Forward orbit z, f z, ..., f^n z with the first exit from R0

    Args:
        params: Family parameters
        z: Initial point
        n: Number of iterates
        use_modified: Iterate the modified family instead of the map
        region: R0 to test membership against (defaults to the registered one)

    Returns:
        OrbitResult with the n+1 points and the exit record (None if the
        orbit never leaves R0)
    """
    if n < 0:
        raise PreconditionError(f"n must be non-negative, got {n}")
    region = region or get_region(params)
    bound = NUMERICS['overflow_bound']

    points = np.empty((n + 1, 2))
    points[0] = np.asarray(z, dtype=float)
    exit_record = None
    for step in range(n + 1):
        current = points[step]
        if not np.all(np.abs(current) <= bound):
            logger.debug(f"orbit diverged at step {step} from {tuple(points[0])}")
            raise NumericOverflow(
                f"orbit left |coordinate| <= {bound:g} at step {step}",
                step=step,
                points=points[:step + 1].copy(),
            )
        if exit_record is None and not region.contains(current[None, :])[0]:
            if current[0] >= math.sqrt(2.0):
                where = 'D0'
            elif region.in_D1(current[None, :])[0]:
                where = 'D1'
            else:
                where = 'outside'
            exit_record = ExitRecord(step, where, Point(*current))
        if step == n:
            break
        if use_modified:
            points[step + 1] = apply_modified(params, current, region)[0]
        else:
            points[step + 1] = apply(params, current)
    return OrbitResult(points, exit_record)
