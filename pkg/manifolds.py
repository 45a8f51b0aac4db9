"""
Fixed saddles, invariant manifolds and the trapping region R0

Unstable manifolds are grown by iterating a fundamental domain on the
unstable eigenvector with adaptive midpoint insertion. The local stable
manifold of Q and its preimage branch near x = 1 are computed as graphs
over y by escape-side bisection. R0 is the region enclosed by a walk along
the unstable manifold of the source saddle (out to the fold tip and back)
closed up along the local stable manifold of Q.
"""
import math
from typing import Dict, List, NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from config import NUMERICS
from henon_family import FamilyParams, Point, apply, jacobian, inverse_apply, register_region
from logger import (
    logger,
    BoundaryNotClosed,
    NewtonDiverged,
    PreconditionError,
    ResolutionExhausted,
)


class Saddle(NamedTuple):
    location: np.ndarray
    eigenvalues: tuple    # (stable, unstable)
    eigenvectors: tuple   # (stable, unstable), unit vectors
    label: str

    @property
    def stable_value(self) -> float:
        return self.eigenvalues[0]

    @property
    def unstable_value(self) -> float:
        return self.eigenvalues[1]

    @property
    def unstable_vector(self) -> np.ndarray:
        return self.eigenvectors[1]


def _newton_fixed_point(params: FamilyParams, z0: np.ndarray) -> np.ndarray:
    z = np.array(z0, dtype=float)
    for _ in range(NUMERICS['newton_max_steps']):
        residual = apply(params, z) - z
        if np.max(np.abs(residual)) <= NUMERICS['newton_tol']:
            return z
        step = np.linalg.solve(jacobian(params, z) - np.eye(2), -residual)
        z = z + step
        if not np.all(np.isfinite(z)):
            break
    residual = apply(params, z) - z
    if np.all(np.isfinite(z)) and np.max(np.abs(residual)) <= 1e-12:
        return z
    raise NewtonDiverged(f"fixed-point Newton from {tuple(z0)} did not converge")


def _saddle(params: FamilyParams, z: np.ndarray, label: str) -> Saddle:
    values, vectors = np.linalg.eig(jacobian(params, z))
    values = np.real(values)
    vectors = np.real(vectors)
    order = np.argsort(np.abs(values))
    stable = vectors[:, order[0]] / np.linalg.norm(vectors[:, order[0]])
    unstable = vectors[:, order[1]] / np.linalg.norm(vectors[:, order[1]])
    if unstable[0] < 0.0:
        unstable = -unstable
    if stable[1] < 0.0:
        stable = -stable
    return Saddle(z, (float(values[order[0]]), float(values[order[1]])), (stable, unstable), label)


def find_fixed_points(params: FamilyParams):
    """
    The two saddles P (near (1/2, 0)) and Q (near (-1, 0))

    Returns:
        (P, Q) as Saddle tuples with eigen-data sorted by modulus
    """
    a, b, sb = params.a, params.b, params.sqrt_b
    c = 1.0 - params.sigma * b
    disc = math.sqrt(c * c + 4.0 * a)
    seeds = {
        'P': (-c + disc) / (2.0 * a),
        'Q': (-c - disc) / (2.0 * a),
    }
    saddles = {}
    for label, x in seeds.items():
        z = _newton_fixed_point(params, np.array([x, params.sigma * sb * x]))
        saddles[label] = _saddle(params, z, label)
    logger.debug(f"saddles at a={a}: P={tuple(saddles['P'].location)}, Q={tuple(saddles['Q'].location)}")
    return saddles['P'], saddles['Q']


class Curve:
    """Polyline with chord-length parametrization, tangents and discrete curvature"""

    def __init__(self, vertices, meta: dict = None):
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(v) > 1:
            keep = np.ones(len(v), dtype=bool)
            keep[1:] = np.any(np.diff(v, axis=0) != 0.0, axis=1)
            v = v[keep]
        self.vertices = v
        self.meta = meta or {}
        self._spline = None

    def __len__(self):
        return len(self.vertices)

    @property
    def x(self) -> np.ndarray:
        return self.vertices[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.vertices[:, 1]

    def segment_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.vertices, axis=0).T)

    def arclength(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths())])

    @property
    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    def spline(self) -> CubicSpline:
        if self._spline is None:
            self._spline = CubicSpline(self.arclength(), self.vertices, axis=0)
        return self._spline

    def point_at(self, s) -> np.ndarray:
        return self.spline()(s)

    def tangents(self) -> np.ndarray:
        t = np.gradient(self.vertices, axis=0)
        return t / np.hypot(t[:, 0], t[:, 1])[:, None]

    def segment_slopes(self) -> np.ndarray:
        d = np.diff(self.vertices, axis=0)
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(d[:, 0] == 0.0, np.inf, np.abs(d[:, 1] / d[:, 0]))

    def curvature(self) -> np.ndarray:
        """Turning angle over mean adjacent segment length; zero at the ends"""
        k = np.zeros(len(self))
        if len(self) < 3:
            return k
        d = np.diff(self.vertices, axis=0)
        lengths = np.hypot(d[:, 0], d[:, 1])
        cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
        dot = np.sum(d[:-1] * d[1:], axis=1)
        k[1:-1] = np.abs(np.arctan2(cross, dot)) / (0.5 * (lengths[:-1] + lengths[1:]))
        return k


class CurveClass(NamedTuple):
    horizontal: bool
    c2b: bool
    vertical: bool

    @property
    def label(self) -> str:
        if self.c2b:
            return 'C2b'
        if self.horizontal:
            return 'horizontal'
        if self.vertical:
            return 'vertical'
        return 'none'


def classify_curve(curve: Curve, b: float, C: float = 10.0) -> CurveClass:
    """
    Horizontal / C2(b) / vertical flags from discrete slopes and curvatures

    Vertical means a graph over y (strictly monotone y) with |x'| and |x''|
    bounded by C sqrt(b).
    """
    if len(curve) < 3:
        raise PreconditionError("curve classification needs at least 3 vertices")
    sb = math.sqrt(b)
    slope = float(np.max(curve.segment_slopes()))
    kappa = float(np.max(curve.curvature()))
    horizontal = slope <= 0.1 and kappa <= 0.1
    c2b = slope <= sb and kappa <= sb

    vertical = False
    dy = np.diff(curve.y)
    if np.all(dy > 0.0) or np.all(dy < 0.0):
        xp = np.diff(curve.x) / dy
        ymid = 0.5 * (curve.y[1:] + curve.y[:-1])
        xpp = np.diff(xp) / np.diff(ymid) if len(xp) > 1 else np.zeros(1)
        bound = C * sb
        vertical = bool(np.max(np.abs(xp)) <= bound and np.max(np.abs(xpp)) <= bound)
    return CurveClass(bool(horizontal), bool(c2b), vertical)


class FreeSegmentCheck(NamedTuple):
    pulled_back: Curve
    max_curvature: float
    bound: float
    holds: bool


def free_segment_curvature_check(params: FamilyParams, curve: Curve, n: int) -> FreeSegmentCheck:
    """Pull a free segment back n steps and compare its curvature with 5^(3n) (sqrt(b) for n = 0)"""
    pts = curve.vertices
    for _ in range(n):
        pts = inverse_apply(params, pts)
    pulled = Curve(pts)
    kmax = float(np.max(pulled.curvature()))
    bound = params.sqrt_b if n == 0 else 5.0 ** (3 * n)
    return FreeSegmentCheck(pulled, kmax, bound, kmax <= bound)


class Branch(NamedTuple):
    points: np.ndarray     # may contain nan after overflow
    params_t: np.ndarray   # level + u per vertex
    complete_levels: int
    exited_box: bool
    pieces: list


def _branch_geometry(saddle: Saddle):
    lam = saddle.unstable_value
    m = 1 if lam > 0.0 else 2
    return m, abs(lam) ** m


def branch_point(params: FamilyParams, saddle: Saddle, sign: float, t) -> np.ndarray:
    """Point of the unstable branch at parameter t = level + u"""
    m, Lam = _branch_geometry(saddle)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    level = np.floor(t).astype(int)
    u = t - level
    s0 = NUMERICS['manifold_seed']
    pts = saddle.location + sign * s0 * (Lam ** u)[:, None] * saddle.unstable_vector
    bound = NUMERICS['overflow_bound']
    for step in range(m * int(level.max(initial=0))):
        active = level * m > step
        with np.errstate(over='ignore', invalid='ignore'):
            pts[active] = apply(params, pts[active])
        pts[~np.all(np.abs(pts) <= bound, axis=1)] = np.nan
    return pts


def _refine_flags(pts: np.ndarray, u: np.ndarray) -> np.ndarray:
    d = np.diff(pts, axis=0)
    spacing = np.hypot(d[:, 0], d[:, 1])
    finite = np.isfinite(spacing)
    box = NUMERICS['growth_box']
    inside = np.all(np.abs(pts) <= box, axis=1)
    in_lo, in_hi = inside[:-1], inside[1:]
    ugap = np.diff(u)

    flags = spacing > NUMERICS['manifold_spacing']
    if len(pts) >= 3:
        cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
        dot = np.sum(d[:-1] * d[1:], axis=1)
        with np.errstate(invalid='ignore'):
            turning = np.abs(np.arctan2(cross, dot)) > NUMERICS['manifold_turning']
        flags[:-1] |= turning
        flags[1:] |= turning

    flags &= finite & (spacing > NUMERICS['manifold_min_spacing'])
    flags &= in_lo | in_hi
    flags &= ~((in_lo ^ in_hi) & (ugap <= 1e-9))
    flags &= ugap > 1e-15
    return flags


def _split_pieces(points: np.ndarray) -> list:
    box = NUMERICS['growth_box']
    ok = np.all(np.isfinite(points), axis=1) & np.all(np.abs(np.nan_to_num(points, nan=np.inf)) <= box, axis=1)
    pieces, start = [], None
    for i, good in enumerate(ok):
        if good and start is None:
            start = i
        elif not good and start is not None:
            if i - start >= 2:
                pieces.append(Curve(points[start:i]))
            start = None
    if start is not None and len(points) - start >= 2:
        pieces.append(Curve(points[start:]))
    return pieces


def _grow_branch(params: FamilyParams, saddle: Saddle, sign: float, arc_budget: float,
                 max_levels: int = 40, initial_seeds: int = 33) -> Branch:
    m, _ = _branch_geometry(saddle)
    cap = NUMERICS['manifold_vertex_cap']
    working = NUMERICS['working_box']

    levels_pts: List[np.ndarray] = []
    levels_u: List[np.ndarray] = []
    total_vertices = 0
    arc = 0.0
    complete = 0

    u = np.linspace(0.0, 1.0, initial_seeds)
    pts = branch_point(params, saddle, sign, u)
    for level in range(max_levels):
        if level > 0:
            with np.errstate(over='ignore', invalid='ignore'):
                for _ in range(m):
                    pts = apply(params, pts)
            pts[~np.all(np.abs(pts) <= NUMERICS['overflow_bound'], axis=1)] = np.nan

        for _ in range(NUMERICS['manifold_max_passes']):
            flags = _refine_flags(pts, u)
            if not flags.any():
                break
            idx = np.nonzero(flags)[0]
            new_u = 0.5 * (u[idx] + u[idx + 1])
            new_pts = branch_point(params, saddle, sign, level + new_u)
            u = np.insert(u, idx + 1, new_u)
            pts = np.insert(pts, idx + 1, new_pts, axis=0)
            if total_vertices + len(u) > cap:
                raise ResolutionExhausted(
                    f"unstable manifold of {saddle.label} needs more than {cap} vertices (level {level})"
                )

        d = np.diff(pts, axis=0)
        seg = np.hypot(d[:, 0], d[:, 1])
        inside = np.all(np.abs(np.nan_to_num(pts, nan=np.inf)) <= NUMERICS['growth_box'], axis=1)
        seg = np.where(np.isfinite(seg) & inside[:-1] & inside[1:], seg, 0.0)
        cumulative = arc + np.concatenate([[0.0], np.cumsum(seg)])

        if cumulative[-1] >= arc_budget:
            stop = int(np.searchsorted(cumulative, arc_budget)) + 1
            levels_pts.append(pts[:stop])
            levels_u.append(level + u[:stop])
            arc = float(cumulative[min(stop, len(cumulative)) - 1])
            break

        levels_pts.append(pts.copy())
        levels_u.append(level + u)
        total_vertices += len(u)
        arc = float(cumulative[-1])
        complete = level + 1
        if not inside.any():
            break

    points = np.concatenate(levels_pts)
    params_t = np.concatenate(levels_u)
    finite = points[np.all(np.isfinite(points), axis=1)]
    exited = bool(np.any(np.max(np.abs(finite), axis=1) > working)) if len(finite) else False
    return Branch(points, params_t, complete, exited, _split_pieces(points))


class UnstableManifold(Curve):
    """
    Unstable manifold of a saddle grown up to an arclength budget per branch

    The Curve vertices are the connected main piece: reversed left branch,
    the saddle, then the right branch, cut where a branch leaves the growth
    box or overflows.
    """

    def __init__(self, params: FamilyParams, saddle: Saddle, branches: Dict[str, Branch]):
        left = branches.get('left')
        right = branches.get('right')
        parts = []
        if left is not None and left.pieces:
            parts.append(left.pieces[0].vertices[::-1])
        parts.append(saddle.location[None, :])
        if right is not None and right.pieces:
            parts.append(right.pieces[0].vertices)
        super().__init__(np.concatenate(parts))
        self.params = params
        self.saddle = saddle
        self.branches = branches

    @property
    def exited_box(self) -> bool:
        return any(br.exited_box for br in self.branches.values())

    @property
    def complete_levels(self) -> int:
        return min(br.complete_levels for br in self.branches.values())

    @property
    def pieces(self) -> list:
        return [piece for br in self.branches.values() for piece in br.pieces]

    def invariance_residual(self) -> dict:
        """
        Distance from f^m of fully built levels to the nearest grown vertex,
        relative to ten times the local spacing there
        """
        m, _ = _branch_geometry(self.saddle)
        all_pts = [self.saddle.location[None, :]]
        images = []
        for br in self.branches.values():
            pts = br.points[np.all(np.isfinite(br.points), axis=1)]
            all_pts.append(pts)
            level = np.floor(br.params_t).astype(int)
            mask = (level <= br.complete_levels - 2) & np.all(np.isfinite(br.points), axis=1)
            src = br.points[mask]
            for _ in range(m):
                src = apply(self.params, src)
            images.append(src)
        cloud = np.concatenate(all_pts)
        images = np.concatenate(images) if images else np.empty((0, 2))
        box = NUMERICS['growth_box']
        images = images[np.all(np.abs(images) <= box, axis=1)]
        if len(images) == 0:
            return {'max_ratio': 0.0, 'max_distance': 0.0, 'checked': 0}
        tree = cKDTree(cloud)
        dist, idx = tree.query(images, k=2)
        spacing = np.maximum(dist[:, 1], np.linalg.norm(cloud[idx[:, 1]] - cloud[idx[:, 0]], axis=1))
        local = np.maximum(spacing, NUMERICS['manifold_min_spacing'])
        ratio = dist[:, 0] / (10.0 * local)
        return {'max_ratio': float(np.max(ratio)), 'max_distance': float(np.max(dist[:, 0])),
                'checked': int(len(images))}


def grow_unstable_manifold(params: FamilyParams, saddle: Saddle, arc_budget: float,
                           branches: str = 'both') -> UnstableManifold:
    """
    Polyline approximation of the unstable manifold of a saddle

    Args:
        params: Family parameters
        saddle: Saddle to grow from
        arc_budget: Arclength budget per branch (inside the growth box)
        branches: 'right', 'left' or 'both'

    Returns:
        UnstableManifold
    """
    if arc_budget <= 0:
        raise PreconditionError(f"arc budget must be positive, got {arc_budget}")
    names = ('right', 'left') if branches == 'both' else (branches,)
    grown = {}
    for name in names:
        sign = 1.0 if name == 'right' else -1.0
        grown[name] = _grow_branch(params, saddle, sign, arc_budget)
        logger.debug(f"W^u({saddle.label}) {name} branch: {len(grown[name].points)} vertices, "
                     f"{grown[name].complete_levels} complete levels")
    return UnstableManifold(params, saddle, grown)


def _escape_side(params: FamilyParams, pts: np.ndarray, x_q: float) -> np.ndarray:
    """+1 if the orbit first moves 0.3 away from Q to the right, -1 to the left"""
    side = np.zeros(len(pts))
    current = pts.copy()
    steps = NUMERICS['stable_escape_steps']
    for _ in range(steps + 1):
        off = current[:, 0] - x_q
        newly = (side == 0.0) & (np.abs(off) > 0.3)
        side[newly] = np.sign(off[newly])
        if np.all(side != 0.0):
            break
        with np.errstate(over='ignore', invalid='ignore'):
            current = apply(params, current)
    side[side == 0.0] = 1.0
    return side


def _side_bisection(params: FamilyParams, ys: np.ndarray, lo: float, hi: float,
                    x_q: float, preimage: bool) -> np.ndarray:
    lo = np.full(len(ys), lo)
    hi = np.full(len(ys), hi)

    def side(x):
        pts = np.stack([x, ys], axis=-1)
        if preimage:
            pts = apply(params, pts)
        return _escape_side(params, pts, x_q)

    s_lo = side(lo)
    for _ in range(NUMERICS['stable_bisection_steps']):
        mid = 0.5 * (lo + hi)
        s_mid = side(mid)
        same = s_mid == s_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def stable_grid(params: FamilyParams) -> np.ndarray:
    half = max(1.5 * params.sqrt_b, 1e-6)
    return np.linspace(-half, half, NUMERICS['stable_grid_points'])


def local_stable_graph(params: FamilyParams, Q: Saddle = None) -> CubicSpline:
    """Local stable manifold of Q as a spline x = s(y) on |y| <= 1.5 sqrt(b)"""
    if Q is None:
        Q = find_fixed_points(params)[1]
    x_q = float(Q.location[0])
    ys = stable_grid(params)
    xs = _side_bisection(params, ys, x_q - 0.2, x_q + 0.2, x_q, preimage=False)
    return CubicSpline(ys, xs)


def stable_parabola(params: FamilyParams, Q: Saddle = None) -> CubicSpline:
    """Right preimage branch of the local stable manifold of Q, x = p(y) near x = 1"""
    if Q is None:
        Q = find_fixed_points(params)[1]
    x_q = float(Q.location[0])
    ys = stable_grid(params)
    xs = _side_bisection(params, ys, 0.5, 1.6, x_q, preimage=True)
    return CubicSpline(ys, xs)


def first_tip_index(x: np.ndarray) -> Optional[int]:
    """Index of the first local maximum of x along a polyline"""
    for j in range(1, len(x) - 1):
        if x[j] >= x[j - 1] and x[j] > x[j + 1]:
            return j
    return None


def _monotone_arm(points: np.ndarray):
    order = np.argsort(points[:, 0], kind='stable')
    xs = points[order, 0]
    ys = points[order, 1]
    return xs, ys


class RegionR0:
    """
    Trapping region bounded by the source unstable manifold and the local
    stable manifold of Q

    The chain runs along the unstable manifold from its left end, through
    the fold tip and back; both arms are monotone in x, so membership
    reduces to interpolating the two arms at x plus the stable-side tests
    s(y) <= x <= p(y).
    """

    def __init__(self, params: FamilyParams, P: Saddle, Q: Saddle, source: Saddle,
                 manifold: UnstableManifold, chain: np.ndarray, tip_index: int,
                 s_spline: CubicSpline, p_spline: CubicSpline, closure_gap: float):
        self.params = params
        self.P = P
        self.Q = Q
        self.source = source
        self.manifold = manifold
        self.chain = Curve(chain)
        self.tip = Point(*chain[tip_index])
        self.s_spline = s_spline
        self.p_spline = p_spline
        self._s_prime = s_spline.derivative()
        self.closure_gap = closure_gap
        self.y_half = float(s_spline.x[-1])
        self.x_floor = float(np.min(s_spline(s_spline.x))) - 1e-9
        self.snap = NUMERICS['snap_tol']

        start, end = chain[0], chain[-1]
        arm_a = np.vstack([[self.s_of(start[1]), start[1]], chain[:tip_index + 1]])
        arm_b = np.vstack([chain[tip_index:], [[self.s_of(end[1]), end[1]]]])
        self._arm_a = _monotone_arm(arm_a)
        self._arm_b = _monotone_arm(arm_b)
        closing_y = np.linspace(end[1], start[1], 32)
        closing = np.stack([self.s_of(closing_y), closing_y], axis=-1)
        self._polygon = np.vstack([arm_a[:1], chain, closing])

    def s_of(self, y):
        return self.s_spline(y)

    def s_prime(self, y):
        return self._s_prime(y)

    def p_of(self, y):
        return self.p_spline(y)

    def polygon(self) -> np.ndarray:
        return self._polygon

    def band(self, x):
        """Lower and upper arm heights at x (nan beyond the fold tip)"""
        x = np.asarray(x, dtype=float)
        xa, ya = self._arm_a
        xb, yb = self._arm_b
        h_a = np.interp(x, xa, ya, left=ya[0], right=np.nan)
        h_b = np.interp(x, xb, yb, left=yb[0], right=np.nan)
        return np.minimum(h_a, h_b), np.maximum(h_a, h_b)

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        lo, hi = self.band(x)
        snap = self.snap
        with np.errstate(invalid='ignore'):
            ok = np.abs(y) <= self.y_half + snap
            ok &= x >= self.s_of(y) - snap
            ok &= x <= self.p_of(y) + snap
            ok &= x <= self.tip.x + snap
            ok &= (y >= lo - snap) & (y <= hi + snap)
        return ok & np.all(np.isfinite(pts), axis=1)

    def in_D0(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return ~self.contains(pts) & (pts[:, 0] >= math.sqrt(2.0))

    def in_D1(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (pts[:, 0] < self.s_of(pts[:, 1])) & (np.abs(pts[:, 1]) <= self.params.sqrt_b)

    def in_I(self, pts, delta: float) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.contains(pts) & (np.abs(pts[:, 0]) < delta)

    def bounds(self):
        """((x_min, x_max), (y_min, y_max)) of the region"""
        poly = self._polygon
        return (float(np.min(poly[:, 0])), float(self.tip.x)), (float(np.min(poly[:, 1])), float(np.max(poly[:, 1])))

    def sample(self, n: int, rng: np.random.Generator, max_rounds: int = 200) -> np.ndarray:
        """Uniform samples of R0 by rejection from its bounding box"""
        (x0, x1), (y0, y1) = self.bounds()
        out = []
        count = 0
        for _ in range(max_rounds):
            cand = np.column_stack([rng.uniform(x0, x1, 4 * n), rng.uniform(y0, y1, 4 * n)])
            cand = cand[self.contains(cand)]
            out.append(cand)
            count += len(cand)
            if count >= n:
                break
        return np.concatenate(out)[:n]

    def fold_segments(self, halfwidth: float) -> List[Curve]:
        """Pieces of the chain crossing |x| <= halfwidth (one per arm)"""
        v = self.chain.vertices
        near = np.abs(v[:, 0]) <= halfwidth
        pieces = []
        j = 0
        while j < len(v):
            if near[j]:
                k = j
                while k + 1 < len(v) and near[k + 1]:
                    k += 1
                lo, hi = max(j - 1, 0), min(k + 1, len(v) - 1)
                if hi - lo >= 2:
                    pieces.append(Curve(v[lo:hi + 1]))
                j = k + 1
            else:
                j += 1
        return pieces

    def parabola_crossings(self) -> int:
        v = self.chain.vertices
        ok = np.abs(v[:, 1]) <= self.y_half
        g = v[ok, 0] - self.p_of(v[ok, 1])
        return int(np.count_nonzero(np.diff(np.sign(g)) != 0))


def source_saddle(orientation: str, P: Saddle, Q: Saddle) -> Saddle:
    """Saddle whose unstable manifold bounds R0 (its first fold is the inner one)"""
    return Q if orientation == 'reversing' else P


def _walk_right(branch: np.ndarray, s_vals: np.ndarray):
    """Out to the first fold tip, then back until the stable side or the next x-minimum"""
    tip = first_tip_index(branch[:, 0])
    if tip is None:
        return branch, None
    x = branch[:, 0]
    end = len(branch) - 1
    for j in range(tip + 1, len(branch)):
        if x[j] <= s_vals[j] or (j + 1 < len(branch) and x[j] <= x[j + 1]):
            end = j
            break
    return branch[:end + 1], tip


def _walk_left(branch: np.ndarray, s_vals: np.ndarray) -> np.ndarray:
    x = branch[:, 0]
    for j in range(1, len(branch)):
        if x[j] <= s_vals[j] or (j + 1 < len(branch) and x[j] <= x[j + 1]):
            return branch[:j + 1]
    return branch


def build_R0(params: FamilyParams, arc_budget: float = 6.0,
             corner_tolerance: float = NUMERICS['corner_tolerance']) -> RegionR0:
    """
    Build R0 for the family and register it for the modified family

    Raises:
        BoundaryNotClosed: the walk has no fold tip or does not come back
            within corner_tolerance of the local stable manifold of Q
    """
    P, Q = find_fixed_points(params)
    source = source_saddle(params.orientation, P, Q)
    s_spline = local_stable_graph(params, Q)
    p_spline = stable_parabola(params, Q)

    branches = 'right' if source.label == 'Q' else 'both'
    manifold = grow_unstable_manifold(params, source, arc_budget, branches=branches)

    right = manifold.branches['right'].pieces
    if not right:
        raise BoundaryNotClosed(f"unstable branch of {source.label} never stays inside the growth box")
    walk = np.vstack([source.location, right[0].vertices])
    right_walk, tip = _walk_right(walk, s_spline(walk[:, 1]))
    if tip is None:
        raise BoundaryNotClosed(f"unstable manifold of {source.label} has no fold tip within the arc budget")

    left_walk = np.empty((0, 2))
    if source.label == 'P':
        left_pieces = manifold.branches['left'].pieces
        if left_pieces:
            walk = np.vstack([source.location, left_pieces[0].vertices])
            left_walk = _walk_left(walk, s_spline(walk[:, 1]))[1:]

    chain = np.vstack([left_walk[::-1], right_walk])
    tip_index = len(left_walk) + tip

    gaps = [abs(chain[-1, 0] - float(s_spline(chain[-1, 1])))]
    if len(left_walk):
        gaps.append(abs(chain[0, 0] - float(s_spline(chain[0, 1]))))
    closure_gap = max(gaps)
    if closure_gap > corner_tolerance:
        raise BoundaryNotClosed(
            f"R0 boundary does not close: gap {closure_gap:.3g} to the stable manifold of Q "
            f"exceeds {corner_tolerance}"
        )

    region = RegionR0(params, P, Q, source, manifold, chain, tip_index, s_spline, p_spline, closure_gap)
    register_region(params, region)
    logger.info(f"R0 built for a={params.a}, b={params.b} ({params.orientation}): "
                f"source {source.label}, tip x={region.tip.x:.12f}, closure gap {closure_gap:.3g}")
    return region
