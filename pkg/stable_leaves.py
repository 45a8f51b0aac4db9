"""
Long stable leaves

A leaf of order i through z is the integral curve of the most contracting
direction field of Df^i, written as a graph x(y) over |y| <= sqrt(b). The
limit leaf is taken once successive orders agree to working precision.
"""
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import optimize, stats
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from config import NUMERICS
from cocycle import most_contracting
from henon_family import FamilyParams, Constants, apply, jacobian
from logger import (
    logger,
    AmbiguousTangency,
    ExpansionHypothesisViolated,
    FieldDegenerate,
    LeafMissesTarget,
    PreconditionError,
)
from manifolds import Curve


@dataclass
class Leaf:
    """Vertical graph x(y) of a stable leaf"""
    ys: np.ndarray
    xs: np.ndarray
    order: Optional[int] = None
    is_limit: bool = False
    base: Optional[np.ndarray] = None
    kappa: Optional[float] = None
    marginal: bool = False
    record: dict = field(default_factory=dict)
    spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self.ys = np.asarray(self.ys, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        self.spline = CubicSpline(self.ys, self.xs)

    @classmethod
    def from_graph(cls, ys, xs, **kwargs) -> 'Leaf':
        return cls(np.asarray(ys, dtype=float), np.asarray(xs, dtype=float), **kwargs)

    def x(self, y):
        return self.spline(y)

    def x_prime(self, y):
        return self.spline(y, 1)

    def x_second(self, y):
        return self.spline(y, 2)

    @property
    def y_range(self):
        return float(self.ys[0]), float(self.ys[-1])

    def as_curve(self) -> Curve:
        return Curve(np.stack([self.xs, self.ys], axis=-1))

    def tangent(self, y) -> np.ndarray:
        t = np.array([float(self.x_prime(y)), 1.0])
        return t / np.hypot(*t)


def contracting_direction(params: FamilyParams, z, order: int) -> np.ndarray:
    """e_order(z), the most contracting direction of Df^order at z"""
    current = np.asarray(z, dtype=float)
    P = np.eye(2)
    for _ in range(order):
        P = jacobian(params, current) @ P
        P = P / np.max(np.abs(P))
        current = apply(params, current)
    return most_contracting(P)


def contracting_field(params: FamilyParams, pts, order: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return np.array([contracting_direction(params, p, order) for p in pts])


def expansion_rate(params: FamilyParams, z, order: int) -> float:
    """min over j <= order of |Df^j(z)|^(1/j)"""
    current = np.asarray(z, dtype=float)
    P = np.eye(2)
    log_scale = 0.0
    rate = math.inf
    for j in range(1, order + 1):
        P = jacobian(params, current) @ P
        s = float(np.max(np.abs(P)))
        P = P / s
        log_scale += math.log(s)
        current = apply(params, current)
        log_norm = math.log(np.linalg.norm(P, ord=2)) + log_scale
        rate = min(rate, math.exp(log_norm / j))
    return rate


def _slope_field(params: FamilyParams, order: int):
    def rhs(y, x):
        e = contracting_direction(params, (x[0], y), order)
        if abs(e[1]) < 1e-12:
            raise FieldDegenerate(f"contracting field horizontal at ({x[0]:.6g}, {y:.6g})")
        return [e[0] / e[1]]
    return rhs


def _integrate(rhs, y0: float, x0: float, y1: float, n: int, step: float) -> np.ndarray:
    ys = np.linspace(y0, y1, n)
    if abs(y1 - y0) < 1e-15:
        return np.full(n, x0)
    sol = solve_ivp(rhs, (y0, y1), [x0], method='RK45', t_eval=ys, rtol=1e-12, atol=1e-15,
                    first_step=min(step, abs(y1 - y0)), max_step=step)
    if not sol.success:
        raise FieldDegenerate(f"leaf integration failed: {sol.message}")
    return sol.y[0]


def leaf_of_order(params: FamilyParams, z, order: int, constants: Constants = None) -> Leaf:
    """
    Integral curve of e_order through z on |y| <= sqrt(b)

    Raises:
        FieldDegenerate: b = 0 or the field turns horizontal
        ExpansionHypothesisViolated: z expands below delta^15 up to the order
    """
    if params.is_degenerate:
        raise FieldDegenerate("contracting field undefined for the degenerate family")
    if order < 1:
        raise PreconditionError(f"leaf order must be at least 1, got {order}")
    constants = constants or Constants()
    z = np.asarray(z, dtype=float)

    kappa = expansion_rate(params, z, order)
    if kappa < constants.delta ** 15:
        raise ExpansionHypothesisViolated(
            f"expansion rate {kappa:.3e} at {tuple(z)} is below delta^15 = {constants.delta ** 15:.3e}"
        )
    marginal = kappa < constants.kappa_half
    if marginal:
        logger.warning(f"leaf through {tuple(z)} is marginal: expansion rate {kappa:.3e}")

    sb = params.sqrt_b
    top = max(sb, float(z[1]))
    bottom = min(-sb, float(z[1]))
    half = NUMERICS['leaf_points'] // 2 + 1
    step = sb / 64.0
    rhs = _slope_field(params, order)
    up = _integrate(rhs, float(z[1]), float(z[0]), top, half, step)
    down = _integrate(rhs, float(z[1]), float(z[0]), bottom, half, step)

    ys = np.concatenate([np.linspace(float(z[1]), bottom, half)[::-1], np.linspace(float(z[1]), top, half)[1:]])
    xs = np.concatenate([down[::-1], up[1:]])
    return Leaf(ys, xs, order=order, base=z, kappa=kappa, marginal=marginal)


def _leaf_distances(leaf: Leaf, previous: Leaf):
    y = leaf.ys
    d0 = np.max(np.abs(leaf.x(y) - previous.x(y)))
    d1 = np.max(np.abs(leaf.x_prime(y) - previous.x_prime(y)))
    d2 = np.max(np.abs(leaf.x_second(y) - previous.x_second(y)))
    return float(d0 + d1), float(d0 + d1 + d2)


def contraction_certificate(params: FamilyParams, leaf: Leaf, steps: int = 20, floor: float = 1e-13) -> dict:
    """Iterate the leaf endpoints and fit the per-step contraction factor"""
    y0, y1 = leaf.y_range
    xi = np.array([float(leaf.x(y0)), y0])
    eta = np.array([float(leaf.x(y1)), y1])
    dist = np.empty(steps + 1)
    for n in range(steps + 1):
        dist[n] = float(np.hypot(*(xi - eta)))
        xi, eta = apply(params, xi), apply(params, eta)
    resolved = np.nonzero(dist > floor)[0]
    resolved = resolved[resolved == np.arange(len(resolved))]
    factor = None
    if len(resolved) >= 2:
        fit = stats.linregress(resolved.astype(float), np.log(dist[resolved]))
        factor = math.exp(fit.slope)
    tail = dist[resolved][3:] if len(resolved) > 3 else dist[resolved]
    monotone = bool(np.all(np.diff(tail) <= 0.0))
    return {'distances': dist, 'factor': factor, 'resolved_steps': int(len(resolved)), 'monotone': monotone}


def limit_leaf(params: FamilyParams, z, constants: Constants = None,
               max_order: int = NUMERICS['leaf_max_order']) -> Leaf:
    """
    Leaf of the order where successive orders agree in C1 to 1e-12

    The returned leaf carries the C1/C2 distance record and a contraction
    certificate of its endpoints.
    """
    constants = constants or Constants()
    tol = NUMERICS['leaf_converged']
    previous = None
    c1_record, c2_record = [], []
    converged = False
    leaf = None
    for order in range(1, max_order + 1):
        leaf = leaf_of_order(params, z, order, constants)
        if previous is not None:
            c1, c2 = _leaf_distances(leaf, previous)
            stagnated = bool(c1_record) and c1 < 1e-9 and c1 >= c1_record[-1]
            c1_record.append(c1)
            c2_record.append(c2)
            if c1 < tol or stagnated:
                converged = True
                break
        previous = leaf

    if not converged:
        logger.warning(f"limit leaf through {tuple(np.asarray(z))} not converged by order {max_order}")
    leaf.is_limit = True
    leaf.record = {'c1_distances': c1_record, 'c2_distances': c2_record, 'converged': converged}
    leaf.record['certificate'] = contraction_certificate(params, leaf)
    return leaf


class Intersection(NamedTuple):
    kind: str           # 'two_points', 'tangency', 'empty', 'transverse'
    points: list
    separation: Optional[float] = None
    discriminant: Optional[float] = None


def _curve_offsets(leaf: Leaf, curve: Curve):
    y0, y1 = leaf.y_range
    v = curve.vertices
    ok = (v[:, 1] >= y0) & (v[:, 1] <= y1)
    g = np.full(len(v), np.nan)
    g[ok] = v[ok, 0] - leaf.x(v[ok, 1])
    return g


def leaf_curve_intersection(leaf: Leaf, curve: Curve) -> Intersection:
    """
    Intersection of a leaf with a curve: two points, a quadratic tangency
    or nothing

    Raises:
        AmbiguousTangency: the local quadratic fit has a vanishing
            discriminant but its roots are not coincident
    """
    g = _curve_offsets(leaf, curve)
    s = curve.arclength()
    spline = curve.spline()

    def h(t):
        px, py = spline(t)
        return px - float(leaf.x(py))

    roots, touching = [], []
    for j in range(len(g) - 1):
        gj, gk = g[j], g[j + 1]
        if not (np.isfinite(gj) and np.isfinite(gk)):
            continue
        if gj * gk < 0.0:
            t = optimize.brentq(h, s[j], s[j + 1], xtol=1e-15)
            roots.append(spline(t))
    for j in range(1, len(g) - 1):
        if g[j] == 0.0 and np.isfinite(g[j - 1]) and np.isfinite(g[j + 1]):
            if g[j - 1] * g[j + 1] < 0.0:
                roots.append(curve.vertices[j].copy())
            elif g[j - 1] * g[j + 1] > 0.0:
                touching.append(curve.vertices[j].copy())

    if touching and not roots:
        return Intersection('tangency', touching[:1], 0.0, 0.0)
    if len(roots) == 2:
        return Intersection('two_points', roots, float(np.hypot(*(roots[0] - roots[1]))))
    if roots:
        return Intersection('transverse', roots)

    finite = np.nonzero(np.isfinite(g))[0]
    if len(finite) < 7:
        return Intersection('empty', [])
    j = finite[np.argmin(np.abs(g[finite]))]
    lo = int(np.clip(j - 3, finite[0], finite[-1] - 6))
    window = np.arange(lo, lo + 7)
    center, scale = s[j], max(s[window[-1]] - s[window[0]], 1e-300) / 6.0
    t = (s[window] - center) / scale
    A, B, C = np.polyfit(t, g[window], 2)
    disc = B * B - 4.0 * A * C
    ref = max(B * B, abs(4.0 * A * C), 1e-300)
    tol = NUMERICS['tangency_tol']

    if abs(disc) <= tol * ref:
        separation = scale * math.sqrt(abs(disc)) / abs(A) if A != 0.0 else math.inf
        if separation <= NUMERICS['tangency_separation']:
            t_star = center - scale * B / (2.0 * A)
            return Intersection('tangency', [spline(t_star)], separation, disc / ref)
        raise AmbiguousTangency(f"vanishing discriminant with root separation {separation:.3e}")
    if disc < 0.0:
        return Intersection('empty', [], None, disc / ref)

    t_star = center - scale * B / (2.0 * A)
    a_lo, a_hi = s[window[0]], s[window[-1]]
    t_star = min(max(t_star, a_lo), a_hi)
    points = []
    for lo_t, hi_t in ((a_lo, t_star), (t_star, a_hi)):
        if h(lo_t) * h(hi_t) < 0.0:
            points.append(spline(optimize.brentq(h, lo_t, hi_t, xtol=1e-15)))
    if len(points) == 2:
        return Intersection('two_points', points, float(np.hypot(*(points[0] - points[1]))), disc / ref)
    return Intersection('empty', [], None, disc / ref)


def leaves_cross(first: Leaf, second: Leaf, floor: float = 1e-14) -> bool:
    """Whether the horizontal gap between two leaves changes sign on their common y-range"""
    y0 = max(first.y_range[0], second.y_range[0])
    y1 = min(first.y_range[1], second.y_range[1])
    if y1 <= y0:
        return False
    y = np.linspace(y0, y1, 257)
    gap = first.x(y) - second.x(y)
    gap = gap[np.abs(gap) > floor]
    return bool(gap.size and np.any(gap > 0.0) and np.any(gap < 0.0))


class ProjectionReport(NamedTuple):
    projected: np.ndarray
    ratios: np.ndarray
    measured_constant: Optional[float]


def project_along_leaves(params: FamilyParams, points, target: Curve, constants: Constants = None,
                         order: int = None) -> ProjectionReport:
    """
    Slide each point along its stable leaf onto the target curve

    Consecutive pairs of points give the Lipschitz ratios
    |pi(p1) - pi(p2)| / |p1 - p2| and the constant C with ratio <= e^(C sqrt b).

    Args:
        order: Leaf order to use; None selects the limit leaf
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    projected = np.empty_like(pts)
    for k, p in enumerate(pts):
        leaf = limit_leaf(params, p, constants) if order is None else leaf_of_order(params, p, order, constants)
        hit = leaf_curve_intersection(leaf, target)
        if hit.kind != 'transverse' or len(hit.points) != 1:
            raise LeafMissesTarget(f"leaf through {tuple(p)} meets the target as '{hit.kind}'")
        projected[k] = hit.points[0]

    ratios = []
    for k in range(0, len(pts) - 1, 2):
        d = float(np.hypot(*(pts[k] - pts[k + 1])))
        if d > 0.0:
            ratios.append(float(np.hypot(*(projected[k] - projected[k + 1]))) / d)
    ratios = np.array(ratios)
    measured = None
    if ratios.size and params.sqrt_b > 0:
        measured = float(np.log(max(np.max(ratios), 1e-300)) / params.sqrt_b)
    return ProjectionReport(projected, ratios, measured)
