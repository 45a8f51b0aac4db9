"""
Critical Structure

Critical approximations on horizontal curves, genuine critical points,
the nested critical regions and the critical partition of a free segment.
"""
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline
from scipy.spatial.distance import directed_hausdorff

from config import NUMERICS
from cocycle import (
    DerivativeHistory,
    cocycle_history,
    is_kappa_expanding,
    is_regular,
    wi_sequence,
)
from henon_family import (
    FamilyParams,
    Constants,
    apply,
    jacobian,
    inverse_apply,
    get_region,
)
from logger import (
    logger,
    ComponentResolutionLost,
    HypothesisViolated,
    NoSignChange,
    NoTangency,
    NotInvertible,
)
from manifolds import Curve, classify_curve
from stable_leaves import contracting_direction, limit_leaf


@dataclass
class CriticalApprox:
    """Critical approximation of a given order on a host curve"""
    params: FamilyParams
    point: np.ndarray
    order: int
    host: Curve
    s: float
    residual: float
    expanding: bool = True
    flags: dict = field(default_factory=dict)
    chi: Optional[np.ndarray] = None
    _wi: Optional[DerivativeHistory] = field(default=None, repr=False)

    @property
    def wi(self) -> DerivativeHistory:
        """w_1..w_{20n+1} of the critical orbit"""
        if self._wi is None:
            self._wi = wi_sequence(self.params, self.point, 20 * self.order + 1)
        return self._wi

    @property
    def tangent(self) -> np.ndarray:
        t = self.host.spline().derivative()(self.s)
        return t / np.hypot(*t)


@dataclass
class CriticalPoint:
    point: np.ndarray
    host: Curve
    approx: CriticalApprox
    orders: List[int]
    gaps: List[float]
    converged: bool
    tangency_count: int = 1

    @property
    def order(self) -> int:
        return self.approx.order

    @property
    def wi(self) -> DerivativeHistory:
        return self.approx.wi

    def gap_ratios(self, floor: float = NUMERICS['critical_gap_floor']) -> np.ndarray:
        g = np.asarray(self.gaps)
        ok = (g[:-1] > floor) & (g[1:] > floor)
        return g[1:][ok] / g[:-1][ok]


def as_approx(zeta) -> CriticalApprox:
    return zeta.approx if isinstance(zeta, CriticalPoint) else zeta


def _tangency_function(params: FamilyParams, curve: Curve, n: int):
    """g(s) = e_n(f gamma(s)) x Df t(gamma(s)), both unit length"""
    spline = curve.spline()
    dspline = spline.derivative()

    def g(s):
        z = spline(s)
        t = dspline(s)
        dft = jacobian(params, z) @ t
        norm = math.hypot(*dft)
        if norm == 0.0:
            return 0.0
        e = contracting_direction(params, apply(params, z), n)
        return float(e[0] * dft[1] - e[1] * dft[0]) / norm

    return g


def _roots_on_grid(g, s_grid: np.ndarray, points: np.ndarray):
    """Brackets (or exact zeros) of g on a grid, nearest x = 0 first"""
    values = np.array([g(s) for s in s_grid])
    brackets = []
    for j in range(len(s_grid)):
        if values[j] == 0.0:
            brackets.append((abs(points[j, 0]), s_grid[j], s_grid[j]))
        elif j + 1 < len(s_grid) and values[j] * values[j + 1] < 0.0:
            brackets.append((abs(0.5 * (points[j, 0] + points[j + 1, 0])), s_grid[j], s_grid[j + 1]))
    brackets.sort(key=lambda item: item[0])
    return brackets


def _solve_bracket(g, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    return optimize.brentq(g, lo, hi, xtol=NUMERICS['critical_xtol'])


def _min_cocycle_norm(params: FamilyParams, z, n: int) -> float:
    return float(np.min(cocycle_history(params, apply(params, z), n).norms))


def _make_approx(params: FamilyParams, curve: Curve, n: int, s0: float, g) -> CriticalApprox:
    point = curve.spline()(s0)
    residual = abs(g(s0))
    if residual > NUMERICS['critical_residual']:
        logger.warning(f"critical approximation residual {residual:.3e} at order {n}")
    expanding = _min_cocycle_norm(params, point, n) >= 0.1
    if not expanding:
        logger.warning(f"cocycle along f(zeta) contracts below 1/10 at order {n}")
    return CriticalApprox(params, np.asarray(point), n, curve, float(s0), residual, expanding)


def find_critical_approx(params: FamilyParams, curve: Curve, n: int) -> CriticalApprox:
    """
    Root of the tangency function on the curve, taking the bracket nearest x = 0

    Raises:
        NoSignChange: g keeps one sign along the curve
    """
    g = _tangency_function(params, curve, n)
    brackets = _roots_on_grid(g, curve.arclength(), curve.vertices)
    if not brackets:
        raise NoSignChange(f"tangency function of order {n} has no sign change on the curve")
    _, lo, hi = brackets[0]
    return _make_approx(params, curve, n, _solve_bracket(g, lo, hi), g)


def count_tangencies(params: FamilyParams, curve: Curve, n: int) -> int:
    g = _tangency_function(params, curve, n)
    return len(_roots_on_grid(g, curve.arclength(), curve.vertices))


def _nearest_parameter(curve: Curve, point) -> float:
    s = curve.arclength()
    j = int(np.argmin(np.hypot(*(curve.vertices - np.asarray(point)).T)))
    lo, hi = s[max(j - 1, 0)], s[min(j + 1, len(s) - 1)]
    if hi <= lo:
        return float(s[j])
    spline = curve.spline()
    res = optimize.minimize_scalar(lambda t: float(np.sum((spline(t) - point) ** 2)),
                                   bounds=(lo, hi), method='bounded', options={'xatol': 1e-15})
    return float(res.x)


def _unit_tangent(curve: Curve, s: float) -> np.ndarray:
    t = curve.spline().derivative()(s)
    return t / np.hypot(*t)


def refine_critical_approx(params: FamilyParams, curve: Curve, existing: CriticalApprox,
                           eps: float = None, constants: Constants = None) -> CriticalApprox:
    """
    Carry an approximation of order n to a nearby curve

    The new curve must pass within eps^n of the old point with tangents
    within eps^n in angle; the new root is searched in an eps^(n/2) window.

    Raises:
        HypothesisViolated: closeness or angle hypothesis fails, or the
            window holds no root
    """
    constants = constants or Constants()
    eps = constants.C0 ** -5 if eps is None else eps
    n = existing.order
    bound = eps ** n

    s_near = _nearest_parameter(curve, existing.point)
    distance = float(np.hypot(*(curve.spline()(s_near) - existing.point)))
    if distance > bound:
        raise HypothesisViolated(f"curves {distance:.3e} apart, closeness bound {bound:.3e}")
    t_old, t_new = existing.tangent, _unit_tangent(curve, s_near)
    angle = abs(math.atan2(t_old[0] * t_new[1] - t_old[1] * t_new[0], float(np.dot(t_old, t_new))))
    angle = min(angle, math.pi - angle)
    if angle > bound:
        raise HypothesisViolated(f"tangent angle {angle:.3e} exceeds bound {bound:.3e}")

    width = eps ** (n / 2.0)
    s = curve.arclength()
    lo, hi = max(s[0], s_near - width), min(s[-1], s_near + width)
    grid = np.linspace(lo, hi, 65)
    g = _tangency_function(params, curve, n)
    points = curve.spline()(grid)
    brackets = _roots_on_grid(g, grid, points)
    if not brackets:
        raise HypothesisViolated(f"no tangency within {width:.3e} of the carried point")
    brackets.sort(key=lambda item: abs(0.5 * (item[1] + item[2]) - s_near))
    _, a, b = brackets[0]
    return _make_approx(params, curve, n, _solve_bracket(g, a, b), g)


def find_critical_point(params: FamilyParams, segment: Curve, constants: Constants = None,
                        max_order: int = NUMERICS['leaf_max_order'], require_span: bool = True) -> CriticalPoint:
    """
    Limit of critical approximations of increasing order on a free segment

    Raises:
        NoTangency: the segment does not stretch across I(delta)
    """
    constants = constants or Constants()
    delta = constants.delta
    if require_span and not (np.min(segment.x) <= -delta and np.max(segment.x) >= delta):
        raise NoTangency(f"segment spans x in [{np.min(segment.x):.4f}, {np.max(segment.x):.4f}], "
                         f"not across [-{delta}, {delta}]")
    floor = NUMERICS['critical_gap_floor']
    orders, gaps = [], []
    previous = None
    approx = None
    converged = False
    for n in range(1, max_order + 1):
        try:
            approx = find_critical_approx(params, segment, n)
        except NoSignChange as e:
            raise NoTangency(str(e)) from e
        orders.append(n)
        if previous is not None:
            gap = float(np.hypot(*(approx.point - previous.point)))
            gaps.append(gap)
            if gap < floor:
                converged = True
                break
        previous = approx

    if not converged:
        last_gap = gaps[-1] if gaps else float('nan')
        logger.warning(f"critical point not converged by order {max_order}, last gap {last_gap:.3e}")
    count = count_tangencies(params, segment, approx.order)
    if count != 1:
        logger.warning(f"segment carries {count} tangencies at order {approx.order}")
    logger.debug(f"critical point {tuple(approx.point)} from orders {orders}")
    return CriticalPoint(approx.point, segment, approx, orders, gaps, converged, count)


class GoodBehavior(NamedTuple):
    g1: bool
    g2: bool
    g3: bool
    chi: np.ndarray          # chi[j - M] for j in [M, horizon]
    chi_monotone: bool
    horizon: int
    truncated: bool


def free_returns(zeta, delta: float, horizon: int, C0: float) -> list:
    """
    (time, period) of the free returns of the critical orbit to I(delta)

    Periods use the short estimate 3 log(1/d) / log C0 in d = |x|; returns
    inside a running period are bound and skipped.
    """
    orbit = as_approx(zeta).wi.orbit
    out = []
    bound_until = 0
    for i in range(1, min(horizon, len(orbit) - 1) + 1):
        if i <= bound_until:
            continue
        d = abs(float(orbit[i, 0]))
        if d < delta:
            p = max(1, int(math.ceil(3.0 * math.log(1.0 / max(d, 1e-300)) / math.log(C0))))
            out.append((i, p))
            bound_until = i + p
    return out


def build_chi(M: int, horizon: int, returns, lambda0: float, delta: float) -> np.ndarray:
    """chi(j) by chaining back through free returns whose bound periods cover h"""
    threshold = math.log(10.0 * delta) / lambda0
    times = [t for t, _ in returns]
    chi = np.empty(max(horizon - M + 1, 0), dtype=int)
    for j in range(M, horizon + 1):
        h = j
        while True:
            earlier = [idx for idx, t in enumerate(times) if t < h]
            if not earlier:
                break
            t, p = returns[earlier[-1]]
            if h - t - p <= threshold:
                h = t
            else:
                break
        chi[j - M] = h
    return chi


def check_good_behavior(zeta, horizon: int = None, returns=None, constants: Constants = None) -> GoodBehavior:
    """
    (G1) growth, (G2) bounded decay and (G3) recovery function chi

    Failures are reported, not raised.
    """
    approx = as_approx(zeta)
    constants = constants or Constants()
    horizon = horizon or 20 * approx.order
    L = approx.wi.log_norms()
    truncated = len(L) < horizon
    H = min(horizon, len(L))
    L = L[:H]
    i = np.arange(1, H + 1)

    g1 = bool(np.all(L >= constants.lam * (i - 1) - 1e-12))

    if H > 1:
        suffix_min = np.minimum.accumulate(L[::-1])[::-1]
        later = suffix_min[1:]
        g2 = bool(np.all(later >= L[:-1] - 2.0 * constants.alpha * i[:-1] - 1e-12))
    else:
        g2 = True

    if returns is None:
        returns = free_returns(approx, constants.delta, H, constants.C0)
    M = min(constants.M, H)
    chi = build_chi(M, H, returns, constants.lambda0, constants.delta)
    prefix_max = np.maximum.accumulate(L)
    g3 = True
    for j in range(M, H + 1):
        c = int(chi[j - M])
        if not (1.0 - math.sqrt(constants.alpha)) * j <= c <= j:
            g3 = False
            break
        if c > 1 and L[c - 1] < math.log(constants.delta) + prefix_max[c - 2] - 1e-12:
            g3 = False
            break
    monotone = bool(np.all(np.diff(chi) >= 0))
    approx.chi = chi
    approx.flags['good'] = {'G1': g1, 'G2': g2, 'G3': g3}
    if truncated:
        logger.warning(f"critical orbit history truncated at {H} < {horizon}")
    if not (g1 and g2 and g3):
        logger.warning(f"good critical behaviour fails: G1={g1} G2={g2} G3={g3}")
    return GoodBehavior(g1, g2, g3, chi, monotone, H, truncated)


def check_nice(params: FamilyParams, zeta, constants: Constants = None) -> dict:
    """
    (C1) expansion along f(zeta), (C2) backward orbit in the strip and
    (C3) expansion and regularity of the pulled-back tangent

    (C2) and (C3) are vacuous when floor(theta n) = 0.
    """
    approx = as_approx(zeta)
    constants = constants or Constants()
    n = approx.order
    c1 = bool(np.all(cocycle_history(params, apply(params, approx.point), n).log_norms >= -1e-12))

    depth = int(math.floor(constants.theta * n))
    report = {'C1': c1, 'C2': True, 'C3': True, 'theta_n': depth, 'vacuous': depth == 0}
    if depth == 0:
        approx.flags['nice'] = report
        return report

    sb = params.sqrt_b
    try:
        back = [np.asarray(approx.point)]
        for _ in range(depth):
            back.append(inverse_apply(params, back[-1]))
    except NotInvertible:
        report.update(C2=False, C3=False)
        approx.flags['nice'] = report
        return report
    report['C2'] = all(abs(p[0]) <= 2.0 and abs(p[1]) <= sb for p in back[1:])

    u = approx.tangent
    for k in range(1, depth + 1):
        u = np.linalg.solve(jacobian(params, back[k]), u)
        u = u / np.hypot(*u)
    expanding, _ = is_kappa_expanding(params, back[depth], u, constants.kappa_third, depth)
    regular = is_regular(params, back[depth], u, 0.01, depth, constants.delta)
    report['C3'] = bool(expanding and regular)
    approx.flags['nice'] = report
    return report


def tangential_position(point, direction, zeta, b: float) -> bool:
    """Whether a horizontal curve is tangent to direction at point and to the host of zeta at zeta"""
    approx = as_approx(zeta)
    z0 = np.asarray(point, dtype=float)
    z1 = np.asarray(approx.point, dtype=float)
    t0 = np.asarray(direction, dtype=float)
    t1 = approx.tangent
    if t0[0] == 0.0 or t1[0] == 0.0:
        return False
    if abs(z1[0] - z0[0]) < 1e-12:
        return abs(z1[1] - z0[1]) < 1e-12 and abs(t0[1] / t0[0] - t1[1] / t1[0]) <= 0.1
    (xa, ya, sa), (xb, yb, sb_) = sorted([(z0[0], z0[1], t0[1] / t0[0]), (z1[0], z1[1], t1[1] / t1[0])])
    hermite = CubicHermiteSpline([xa, xb], [ya, yb], [sa, sb_])
    xs = np.linspace(xa, xb, 33)
    return classify_curve(Curve(np.stack([xs, hermite(xs)], axis=-1)), b).horizontal


@dataclass
class RegionComponent:
    upper: Curve
    lower: Curve
    gap: float
    length: float
    critical_points: list
    midpoint_offsets: list
    s2_holds: bool

    def contains(self, pts, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        hi = _graph(self.upper, x)
        lo = _graph(self.lower, x)
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
        with np.errstate(invalid='ignore'):
            return (y >= lo - tol) & (y <= hi + tol)


def _graph(curve: Curve, x):
    order = np.argsort(curve.x)
    return np.interp(x, curve.x[order], curve.y[order], left=np.nan, right=np.nan)


@dataclass
class CriticalRegion:
    level: int
    components: List[RegionComponent]
    dropped: int = 0

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts), dtype=bool)
        for comp in self.components:
            out |= comp.contains(pts)
        return out


def _component(params: FamilyParams, first: Curve, second: Curve, level: int,
               constants: Constants) -> RegionComponent:
    upper, lower = (first, second) if np.mean(first.y) >= np.mean(second.y) else (second, first)
    gap = max(directed_hausdorff(upper.vertices, lower.vertices)[0],
              directed_hausdorff(lower.vertices, upper.vertices)[0])
    points, offsets = [], []
    bound = 10.0 * params.b ** (level / 4.0)
    for boundary in (upper, lower):
        try:
            cp = find_critical_point(params, boundary, constants, require_span=False)
        except NoTangency:
            points.append(None)
            offsets.append(math.inf)
            continue
        mid = boundary.point_at(0.5 * boundary.length)
        points.append(cp)
        offsets.append(float(np.hypot(*(cp.point - mid))))
    s2 = all(off <= bound for off in offsets)
    return RegionComponent(upper, lower, float(gap), upper.length, points, offsets, s2)


def _runs(mask: np.ndarray):
    idx = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(int), [0]])))
    return list(zip(idx[::2], idx[1::2] - 1))


def _arm_images(params: FamilyParams, region, X: np.ndarray, k: int):
    lo, hi = region.band(X)
    ok = np.isfinite(lo) & np.isfinite(hi)
    upper = np.stack([X, hi], axis=-1)
    lower = np.stack([X, lo], axis=-1)
    with np.errstate(invalid='ignore', over='ignore'):
        for _ in range(k):
            upper = apply(params, upper)
            lower = apply(params, lower)
            ok &= region.contains(upper) & region.contains(lower)
    return upper, lower, ok


def build_critical_regions(params: FamilyParams, k_max: int, region=None, constants: Constants = None,
                           tol: float = 1e-12, grid: int = 20001) -> List[CriticalRegion]:
    """
    Nested critical regions C(0) > C(1) > ... > C(k_max)

    Level k is cut out of f^k(R0) by the images of the two arms of the
    boundary of R0 that land in I(delta).

    Raises:
        ComponentResolutionLost: b^(k/2) or a measured boundary gap falls
            below tol; carries the levels built so far
    """
    region = region or get_region(params)
    constants = constants or Constants()
    delta = constants.delta

    pieces = [piece for piece in region.fold_segments(delta)]
    if len(pieces) < 2:
        raise ComponentResolutionLost("R0 boundary does not cross I(delta) twice", [])
    regions = [CriticalRegion(0, [_component(params, pieces[0], pieces[-1], 0, constants)])]
    logger.info(f"critical region level 0: gap {regions[0].components[0].gap:.3e}")

    (x0, x1), _ = region.bounds()
    X = np.linspace(x0, x1, grid)
    for k in range(1, k_max + 1):
        if params.b ** (k / 2.0) < tol:
            raise ComponentResolutionLost(f"b^(k/2) = {params.b ** (k / 2.0):.3e} below {tol} at level {k}",
                                          regions)
        upper, lower, ok = _arm_images(params, region, X, k)
        with np.errstate(invalid='ignore'):
            ok &= (np.abs(upper[:, 0]) <= delta) & (np.abs(lower[:, 0]) <= delta)
        components, dropped = [], 0
        for i0, i1 in _runs(ok):
            fine = np.linspace(X[max(i0 - 1, 0)], X[min(i1 + 1, grid - 1)], 401)
            up, low, keep = _arm_images(params, region, fine, k)
            with np.errstate(invalid='ignore'):
                keep &= (np.abs(up[:, 0]) <= delta) & (np.abs(low[:, 0]) <= delta)
            runs = _runs(keep)
            if not runs:
                continue
            j0, j1 = max(runs, key=lambda r: r[1] - r[0])
            if j1 - j0 < 6:
                continue
            comp = _component(params, Curve(up[j0:j1 + 1]), Curve(low[j0:j1 + 1]), k, constants)
            if comp.gap < tol:
                raise ComponentResolutionLost(f"boundary gap {comp.gap:.3e} below {tol} at level {k}", regions)
            mid = comp.upper.point_at(0.5 * comp.upper.length)
            if not regions[-1].contains(mid)[0]:
                dropped += 1
                continue
            components.append(comp)
        regions.append(CriticalRegion(k, components, dropped))
        logger.info(f"critical region level {k}: {len(components)} components, {dropped} dropped")
    return regions


@dataclass
class PartitionElement:
    curve: Curve
    k: int
    side: int
    slice_index: int
    period: int
    s_interval: tuple


def leaf_offset_function(params: FamilyParams, zeta_image: np.ndarray, constants: Constants):
    """Horizontal distance of points from the stable leaf through f(zeta)"""
    if params.is_degenerate:
        return lambda pts: np.abs(pts[..., 0] - zeta_image[0])
    leaf = limit_leaf(params, zeta_image, constants)
    return lambda pts: np.abs(pts[..., 0] - leaf.x(pts[..., 1]))


def critical_partition(params: FamilyParams, segment: Curve, zeta, constants: Constants = None,
                       k_max: int = None) -> List[PartitionElement]:
    """
    Two-sided partition of the segment by pullbacks of the strips V_k

    A piece at the end of the segment that does not reach the outer
    boundary of its strip is merged with the adjacent inner piece. Each
    piece is cut into floor(e^(3 alpha k)) slices of equal length.
    """
    from binding import log_dk_table

    constants = constants or Constants()
    approx = as_approx(zeta)
    n = approx.order
    M = constants.M
    top = 20 * n - 2 if k_max is None else min(k_max, 20 * n - 2)
    log_D = log_dk_table(approx.wi, constants.alpha, top + 1)
    behaviour = check_good_behavior(approx, constants=constants)
    chi = behaviour.chi

    spline = segment.spline()
    offset_of = leaf_offset_function(params, apply(params, approx.point), constants)

    def d(s):
        return float(offset_of(apply(params, spline(s))))

    s_all = segment.arclength()
    s_zeta = _nearest_parameter(segment, approx.point)
    cap = NUMERICS['slice_cap']
    elements = []
    d_zeta = d(s_zeta)
    for side, s_end in ((-1, s_all[0]), (1, s_all[-1])):
        if s_end == s_zeta:
            continue
        d_end = d(s_end)
        lo, hi = sorted((s_zeta, s_end))
        boundaries = {}
        for k in range(M, top + 2):
            level = 0.5 * math.exp(log_D[k])
            if level <= d_zeta:
                break
            if d_end < level:
                boundaries[k] = None
            else:
                boundaries[k] = optimize.brentq(lambda s: d(s) - level, lo, hi, xtol=1e-15)

        pieces = []
        k = M
        if boundaries.get(M, 0.0) is None:
            inside = max(j for j, s in boundaries.items() if s is None)
            if boundaries.get(inside + 2) is not None:
                pieces.append((inside + 1, s_end, boundaries[inside + 2]))
            k = inside + 2
        while k <= top and boundaries.get(k) is not None and boundaries.get(k + 1) is not None:
            pieces.append((k, boundaries[k], boundaries[k + 1]))
            k += 1

        for label, outer, inner in pieces:
            a, b = sorted((outer, inner))
            count = int(min(math.floor(math.exp(3.0 * constants.alpha * label)), cap))
            period = int(chi[label - M]) if 0 <= label - M < len(chi) else label
            edges = np.linspace(a, b, count + 1)
            for idx in range(count):
                s_piece = np.linspace(edges[idx], edges[idx + 1], 17)
                elements.append(PartitionElement(Curve(spline(s_piece)), label, side, idx + 1, period,
                                                 (float(edges[idx]), float(edges[idx + 1]))))
    elements.sort(key=lambda e: e.s_interval[0])
    logger.debug(f"critical partition: {len(elements)} elements")
    return elements


def element_metrics(params: FamilyParams, element: PartitionElement, samples: int = 65) -> dict:
    """Length of f^p of the element and the log distortion of Df^p t across it"""
    s0, s1 = element.s_interval
    spline = element.curve.spline()
    t = np.linspace(0.0, element.curve.length, samples)
    pts = spline(t)
    tangents = spline.derivative()(t)
    tangents = tangents / np.hypot(tangents[:, 0], tangents[:, 1])[:, None]
    log_growth = np.zeros(samples)
    for _ in range(element.period):
        tangents = np.einsum('nij,nj->ni', jacobian(params, pts), tangents)
        norms = np.hypot(tangents[:, 0], tangents[:, 1])
        log_growth += np.log(norms)
        tangents = tangents / norms[:, None]
        pts = apply(params, pts)
    image = Curve(pts)
    return {
        'image_length': image.length,
        'log_distortion': float(np.max(log_growth) - np.min(log_growth)),
        'image_diameter': float(np.hypot(*(pts[-1] - pts[0]))),
    }
