"""
Escape Statistics

Survival of grids and curves in R0, stopping-time partitions of seed
segments, close returns and the Omega_k ratios, angle propagation and
the homoclinic witness for transitivity.
"""
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import optimize, stats
from tqdm import tqdm

from config import ESCAPE_CONFIG, NUMERICS
from cocycle import derivative_log_norms
from henon_family import FamilyParams, Constants, apply, jacobian, get_region
from logger import (
    logger,
    DepthExhausted,
    ModifiedFamilyUnavailable,
    RegionUnavailable,
    SampleStarved,
)
from manifolds import Curve, find_fixed_points, grow_unstable_manifold


def _membership(params: FamilyParams, region):
    """Survival test: R0 when available, the invariant interval for b = 0, else the working box"""
    if region is None:
        try:
            region = get_region(params)
        except ModifiedFamilyUnavailable:
            region = None
    if region is not None:
        return region.contains
    if params.is_degenerate:
        return lambda pts: np.all(np.isfinite(pts), axis=1) & (np.abs(pts[:, 0]) <= 1.0 + 1e-12)
    box = NUMERICS['working_box']
    return lambda pts: np.all(np.isfinite(pts), axis=1) & np.all(np.abs(pts) <= box, axis=1)


# ---------------------------------------------------------------------------
# Grid escape
# ---------------------------------------------------------------------------

class GridEscape(NamedTuple):
    survival: np.ndarray       # fraction of the seeds still in R0 after t steps, t = 0..T
    escape_times: np.ndarray   # first step outside R0, -1 for survivors
    escape_fraction: float
    seeds: int


def grid_points(region, n: int) -> np.ndarray:
    """The n x n grid over the bounding box of R0, restricted to R0"""
    (x0, x1), (y0, y1) = region.bounds()
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    return pts[region.contains(pts)]


def grid_escape(params: FamilyParams, n: int, T: int, region=None, points=None,
                progress: bool = False) -> GridEscape:
    """
    Iterate a grid of R0 (or given seeds) and record the first exit from R0

    A point that leaves R0 never comes back, so survival is non-increasing.
    """
    region = region or get_region(params)
    pts = grid_points(region, n) if points is None else np.atleast_2d(np.asarray(points, dtype=float)).copy()
    count = len(pts)
    if count == 0:
        logger.warning(f"grid of size {n} has no point inside R0")
        return GridEscape(np.zeros(T + 1), np.empty(0, dtype=int), 1.0, 0)

    alive = region.contains(pts)
    escape_times = np.where(alive, -1, 0)
    survival = np.zeros(T + 1)
    survival[0] = alive.mean()
    for t in tqdm(range(1, T + 1), desc="Escape grid", unit="step", disable=not progress):
        if not alive.any():
            break
        with np.errstate(over='ignore', invalid='ignore'):
            pts[alive] = apply(params, pts[alive])
        still = region.contains(pts[alive])
        idx = np.flatnonzero(alive)
        escape_times[idx[~still]] = t
        alive[idx[~still]] = False
        survival[t] = alive.mean()

    fraction = 1.0 - float(survival[-1])
    logger.debug(f"grid escape a={params.a}: {count} seeds, escaped fraction {fraction:.4f} by T={T}")
    return GridEscape(survival, escape_times, fraction, count)


# ---------------------------------------------------------------------------
# Stopping times on a seed segment
# ---------------------------------------------------------------------------

class StoppingElement(NamedTuple):
    s_interval: tuple
    S: Optional[int]          # None when unresolved at the depth
    kind: str                 # 'free', 'escaped' or 'unresolved'
    image_span: tuple         # x-range of the image at the stopping time
    distortion: float         # spread of log |Df^S t| across the element


class TailFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    n_range: tuple


@dataclass
class StoppingPartition:
    host: Curve
    elements: List[StoppingElement]
    depth: int

    @property
    def mass(self) -> float:
        return self.host.length

    @property
    def remaining_mass(self) -> float:
        """Fraction of the host not stopped by the depth"""
        left = sum(e.s_interval[1] - e.s_interval[0] for e in self.elements if e.S is None)
        return left / self.mass if self.mass > 0 else 0.0

    def tail(self) -> np.ndarray:
        """|{S > n}| / |host| for n = 0..depth"""
        out = np.zeros(self.depth + 1)
        for e in self.elements:
            width = e.s_interval[1] - e.s_interval[0]
            last = self.depth if e.S is None else e.S - 1
            if last >= 0:
                out[:last + 1] += width
        return out / self.mass

    def fit_tail(self) -> TailFit:
        tail = self.tail()
        ns = np.flatnonzero(tail > 0.0)
        if len(ns) < 3:
            return TailFit(math.nan, math.nan, math.nan, (0, int(ns[-1]) if len(ns) else 0))
        fit = stats.linregress(ns, np.log(tail[ns]))
        return TailFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2), (int(ns[0]), int(ns[-1])))

    def images_verified(self, params: FamilyParams, delta: float, samples: int = 33) -> bool:
        """Re-check that every free element's image avoids I(delta) and crosses a component of I(2 delta) minus I(delta)"""
        spline = self.host.spline()
        for e in self.elements:
            if e.kind != 'free':
                continue
            pts = spline(np.linspace(*e.s_interval, samples))
            for _ in range(e.S):
                pts = apply(params, pts)
            if not _crosses_annulus(pts[:, 0], delta):
                return False
        return True


def _crosses_annulus(xs: np.ndarray, delta: float, rel: float = 1e-9) -> bool:
    if not np.all(np.abs(xs) >= delta * (1.0 - rel)):
        return False
    lo, hi = float(np.min(xs)), float(np.max(xs))
    right = lo <= delta * (1.0 + rel) and hi >= 2.0 * delta
    left = hi >= -delta * (1.0 + rel) and lo <= -2.0 * delta
    return right or left


def _image(params: FamilyParams, spline, s: np.ndarray, t: int) -> np.ndarray:
    pts = spline(s)
    with np.errstate(over='ignore', invalid='ignore'):
        for _ in range(t):
            pts = apply(params, pts)
    return pts


def _log_tangent_growth(params: FamilyParams, spline, s: np.ndarray, t: int) -> np.ndarray:
    pts = spline(s)
    tangents = spline.derivative()(s)
    log_norm = np.log(np.hypot(tangents[:, 0], tangents[:, 1]))
    for _ in range(t):
        tangents = np.einsum('nij,nj->ni', jacobian(params, pts), tangents)
        norms = np.hypot(tangents[:, 0], tangents[:, 1])
        log_norm += np.log(norms)
        tangents = tangents / norms[:, None]
        pts = apply(params, pts)
    return log_norm


def _cut_parameters(params: FamilyParams, spline, s0: float, s1: float, t: int,
                    levels: List[float], samples: int) -> List[float]:
    s = np.linspace(s0, s1, samples)
    x = _image(params, spline, s, t)[:, 0]
    cuts = []
    for c in levels:
        g = x - c
        with np.errstate(invalid='ignore'):
            idx = np.flatnonzero(g[:-1] * g[1:] < 0.0)
        for j in idx:
            def h(u, c=c):
                return float(_image(params, spline, np.array([u]), t)[0, 0] - c)
            cuts.append(optimize.brentq(h, s[j], s[j + 1], xtol=1e-15))
    return sorted(cuts)


def _merge_short(edges: List[float], min_len: float) -> List[float]:
    edges = list(edges)
    while len(edges) > 2:
        widths = np.diff(edges)
        j = int(np.argmin(widths))
        if widths[j] >= min_len:
            break
        # drop the inner edge shared with the neighbour
        del edges[j + 1 if j + 1 < len(edges) - 1 else j]
    return edges


def segment_stopping_times(params: FamilyParams, segment: Curve, depth: int = ESCAPE_CONFIG['depth'],
                           constants: Constants = None, region=None, samples: int = 65,
                           return_levels: int = ESCAPE_CONFIG['return_levels'],
                           max_elements: int = 50_000) -> StoppingPartition:
    """
    Recursive cutting of a seed segment until images escape

    At each step every active piece is cut where its image crosses
    |x| = delta; a piece whose image meets I(delta) is also cut at x = 0
    and at |x| = delta e^-j, j = 1..return_levels. Pieces shorter than a
    thousandth of their parent are merged into a neighbour. A piece stops
    when its image avoids I(delta) and stretches across a component of
    I(2 delta) minus I(delta), or when it has left R0 entirely.

    Raises:
        DepthExhausted: more than the configured share of the mass is
            still active at the depth; carries the partial partition
    """
    constants = constants or Constants()
    delta = constants.delta
    inside = _membership(params, region)
    spline = segment.spline()
    inner = [delta * math.exp(-j) for j in range(1, return_levels + 1)]

    finished: List[StoppingElement] = []
    active = [(0.0, segment.length)]
    for t in range(depth + 1):
        next_active = []
        for s0, s1 in active:
            s = np.linspace(s0, s1, samples)
            pts = _image(params, spline, s, t)
            alive = inside(pts)
            if not alive.any():
                finished.append(StoppingElement((s0, s1), t, 'escaped', (math.nan, math.nan), 0.0))
                continue
            x = pts[:, 0]
            levels = [delta, -delta]
            with np.errstate(invalid='ignore'):
                if np.any(np.abs(x) < delta):
                    levels += [0.0] + inner + [-c for c in inner]
            cuts = _cut_parameters(params, spline, s0, s1, t, levels, samples)
            edges = _merge_short([s0] + [c for c in cuts if s0 < c < s1] + [s1], 1e-3 * (s1 - s0))
            for a, b in zip(edges[:-1], edges[1:]):
                sub = np.linspace(a, b, samples)
                xs = _image(params, spline, sub, t)[:, 0]
                if np.all(np.isfinite(xs)) and _crosses_annulus(xs, delta):
                    growth = _log_tangent_growth(params, spline, np.linspace(a, b, 17), t)
                    finished.append(StoppingElement((a, b), t, 'free', (float(xs.min()), float(xs.max())),
                                                    float(np.max(growth) - np.min(growth))))
                else:
                    next_active.append((a, b))
        active = next_active
        if len(active) > max_elements:
            partition = StoppingPartition(segment, finished + [
                StoppingElement(iv, None, 'unresolved', (math.nan, math.nan), math.nan) for iv in active], t)
            raise DepthExhausted(f"{len(active)} active pieces at step {t} exceed {max_elements}", partition)
        if not active:
            break

    elements = finished + [StoppingElement(iv, None, 'unresolved', (math.nan, math.nan), math.nan)
                           for iv in active]
    elements.sort(key=lambda e: e.s_interval[0])
    partition = StoppingPartition(segment, elements, depth)
    remaining = partition.remaining_mass
    if remaining > ESCAPE_CONFIG['max_remaining_mass']:
        raise DepthExhausted(f"mass {remaining:.3f} still active at depth {depth}", partition)
    if remaining > 0.0:
        logger.warning(f"stopping-time partition leaves mass {remaining:.3e} unresolved at depth {depth}")
    logger.debug(f"stopping-time partition: {len(elements)} elements, remaining mass {remaining:.3e}")
    return partition


# ---------------------------------------------------------------------------
# Survival proportion on a curve
# ---------------------------------------------------------------------------

class ProportionReport(NamedTuple):
    proportion: float
    survivors: int
    samples: int
    T: int
    crosses_stable: Optional[bool]
    preimages: Optional[int]


def fixed_point_preimages(a: float, depth: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """Preimages of the repelling fixed point of 1 - a x^2 up to the given depth, inside [lo, hi]"""
    fixed = (-1.0 + math.sqrt(1.0 + 4.0 * a)) / (2.0 * a)
    level = np.array([fixed])
    found = [level]
    for _ in range(depth):
        arg = (1.0 - level) / a
        root = np.sqrt(arg[arg >= 0.0])
        level = np.unique(np.concatenate([root, -root]))
        found.append(level)
    out = np.unique(np.concatenate(found))
    return out[(out >= lo) & (out <= hi)]


def leaf_intersection_proportion(params: FamilyParams, curve: Curve, T: int,
                                 samples: int = ESCAPE_CONFIG['samples'], rng: np.random.Generator = None,
                                 region=None, preimage_depth: int = 12) -> ProportionReport:
    """
    Fraction of points on a curve that stay T iterations in R0

    For b > 0 the report says whether the curve crosses the local stable
    manifold of Q; for b = 0 it counts preimages of the repelling fixed
    point inside the x-range of the curve.
    """
    rng = rng or np.random.default_rng(12345)
    spline = curve.spline()
    pts = spline(rng.uniform(0.0, curve.length, samples))
    inside = _membership(params, region)
    alive = inside(pts)
    for _ in range(T):
        if not alive.any():
            break
        with np.errstate(over='ignore', invalid='ignore'):
            pts[alive] = apply(params, pts[alive])
        alive[alive] = inside(pts[alive])
    survivors = int(alive.sum())

    crosses, preimages = None, None
    if params.is_degenerate:
        preimages = int(len(fixed_point_preimages(params.a, preimage_depth, float(curve.x.min()),
                                                   float(curve.x.max()))))
    else:
        region = region or get_region(params)
        v = curve.vertices
        ok = np.abs(v[:, 1]) <= region.y_half
        g = v[ok, 0] - region.s_of(v[ok, 1])
        crosses = bool(np.any(g[:-1] * g[1:] < 0.0))
    return ProportionReport(survivors / samples, survivors, samples, T, crosses, preimages)


# ---------------------------------------------------------------------------
# Slowly recurrent (controlled) points
# ---------------------------------------------------------------------------

class ControlledReport(NamedTuple):
    points: np.ndarray
    certified: np.ndarray        # bool per candidate
    depth: np.ndarray            # steps checked before a violation, escape or the horizon
    growth_holds: np.ndarray     # |w_n| >= sigma^(n-1) along the certified window
    mild_growth_holds: np.ndarray  # |w_n| >= delta^(12 n log2 / lambda) along the window


def _critical_distance(pts: np.ndarray, Xi: np.ndarray, delta: float) -> np.ndarray:
    """Distance to the nearest binding point for points in I(delta), 1 elsewhere"""
    out = np.ones(len(pts))
    near = np.abs(pts[:, 0]) < delta
    if near.any() and len(Xi):
        d = np.hypot(pts[near, None, 0] - Xi[None, :, 0], pts[near, None, 1] - Xi[None, :, 1])
        out[near] = d.min(axis=1)
    return out


def controlled_points(params: FamilyParams, candidates, constants: Constants = None,
                      horizon: int = ESCAPE_CONFIG['recurrence_horizon'], Xi=None, region=None) -> ControlledReport:
    """
    Rejection test for d(f^n z, critical set) >= e^(-5 alpha n), 1 <= n <= horizon

    Certificates are only as deep as the horizon; a point that leaves R0
    first is certified up to its escape.
    """
    from binding import default_binding_points

    constants = constants or Constants()
    inside = _membership(params, region)
    if Xi is None:
        Xi = default_binding_points(params, constants, region)
    xi = np.array([np.asarray(getattr(z, 'point', z), dtype=float) for z in Xi]).reshape(-1, 2)

    pts0 = np.atleast_2d(np.asarray(candidates, dtype=float))
    pts = pts0.copy()
    count = len(pts)
    ok = np.ones(count, dtype=bool)
    running = np.ones(count, dtype=bool)
    depth = np.full(count, horizon)
    for n in range(1, horizon + 1):
        if not running.any():
            break
        with np.errstate(over='ignore', invalid='ignore'):
            pts[running] = apply(params, pts[running])
        idx = np.flatnonzero(running)
        escaped = ~inside(pts[idx])
        depth[idx[escaped]] = n - 1
        running[idx[escaped]] = False
        idx = idx[~escaped]
        bad = _critical_distance(pts[idx], xi, constants.delta) < math.exp(-5.0 * constants.alpha * n)
        ok[idx[bad]] = False
        depth[idx[bad]] = n - 1
        running[idx[bad]] = False

    log_sigma = constants.lam / 8.0
    mild = 12.0 * math.log(2.0) / constants.lam * math.log(constants.delta)
    growth = np.zeros(count, dtype=bool)
    mild_growth = np.zeros(count, dtype=bool)
    for i in range(count):
        n = int(depth[i])
        if n < 1:
            growth[i] = mild_growth[i] = True
            continue
        L = derivative_log_norms(params, apply(params, pts0[i]), (1.0, 0.0), n - 1)
        steps = np.arange(1, n + 1)
        growth[i] = bool(np.all(L >= (steps - 1) * log_sigma - 1e-12))
        mild_growth[i] = bool(np.all(L >= steps * mild - 1e-12))
    logger.debug(f"controlled points: {int(ok.sum())} of {count} certified to horizon {horizon}")
    return ControlledReport(pts0, ok, depth, growth, mild_growth)


# ---------------------------------------------------------------------------
# Close returns
# ---------------------------------------------------------------------------

class CloseReturnBoxes:
    """
    The boxes A(n) around the critical points of the critical regions

    A point is in A(n) when it lies in a component of C(n) and within
    delta^(n/2) horizontally of a critical point on that component's
    boundary. Above the last built level only points that could still be
    in the box are undecided.
    """

    def __init__(self, regions, delta: float, floor: float = 1e-12):
        if not regions:
            raise RegionUnavailable("no critical regions were built")
        self.regions = regions
        self.k_max = len(regions) - 1
        self.delta = delta
        self.floor = floor
        self.boxes = []
        for region in regions:
            level = []
            for comp in region.components:
                for cp in comp.critical_points:
                    if cp is not None:
                        level.append((comp, float(np.asarray(cp.point)[0])))
            self.boxes.append(level)

    def radius(self, n) -> np.ndarray:
        return self.delta ** (np.asarray(n, dtype=float) / 2.0)

    def locate(self, pts, n):
        """
        Box index per point (-1 when in no box) and the undecided mask

        Args:
            pts: Points, shape (m, 2)
            n: Relative return time per point
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = np.broadcast_to(np.asarray(n, dtype=int), (len(pts),))
        hit = np.full(len(pts), -1)
        undecided = np.zeros(len(pts), dtype=bool)
        radius = self.radius(n)
        level = np.minimum(n, self.k_max)
        for lev in np.unique(level):
            sel = np.flatnonzero(level == lev)
            for j, (comp, xz) in enumerate(self.boxes[lev]):
                with np.errstate(invalid='ignore'):
                    near = np.abs(pts[sel, 0] - xz) <= np.maximum(radius[sel], self.floor)
                    inside = near & comp.contains(pts[sel])
                unresolved = (n[sel] > self.k_max) | (radius[sel] < self.floor)
                undecided[sel[inside & unresolved]] = True
                fresh = sel[inside & ~unresolved & (hit[sel] < 0)]
                hit[fresh] = j
        return hit, undecided

    def sample(self, k0: int, count: int, rng: np.random.Generator, max_rounds: int = 400) -> np.ndarray:
        """Uniform seeds in A(k0) by rejection from the bounding boxes"""
        if k0 > self.k_max:
            raise RegionUnavailable(f"seed level {k0} above the built level {self.k_max}")
        r = float(self.radius(k0))
        rects = []
        for comp, xz in self.boxes[k0]:
            ys = np.concatenate([comp.upper.y, comp.lower.y])
            xs = np.concatenate([comp.upper.x, comp.lower.x])
            x0, x1 = max(xz - r, xs.min()), min(xz + r, xs.max())
            if x1 > x0:
                rects.append((x0, x1, float(ys.min()), float(ys.max())))
        if not rects:
            raise SampleStarved(f"A({k0}) has no box to sample")
        areas = np.array([(x1 - x0) * max(y1 - y0, 1e-300) for x0, x1, y0, y1 in rects])
        out = []
        got = 0
        for _ in range(max_rounds):
            which = rng.choice(len(rects), size=4 * count, p=areas / areas.sum())
            lo = np.array([[rects[w][0], rects[w][2]] for w in which])
            hi = np.array([[rects[w][1], rects[w][3]] for w in which])
            cand = lo + (hi - lo) * rng.uniform(0.0, 1.0, (len(which), 2))
            hit, _ = self.locate(cand, np.full(len(cand), k0))
            cand = cand[hit >= 0]
            out.append(cand)
            got += len(cand)
            if got >= count:
                break
        return np.concatenate(out)[:count]


@dataclass
class CloseReturnLog:
    seed: np.ndarray
    k0: int
    times: List[int] = field(default_factory=list)       # relative close-return times nu_l
    absolute: List[int] = field(default_factory=list)
    boxes: List[int] = field(default_factory=list)
    truncated: bool = False
    escaped: bool = False

    def __len__(self):
        return len(self.times)

    @property
    def controlled(self) -> bool:
        return not self.times and not self.truncated


def check_close_return_laws(log: CloseReturnLog) -> dict:
    """nu_(l+1) >= 4 nu_l and nu_l >= 4^l k0 on a log"""
    nu = log.times
    spacing = all(b >= 4 * a for a, b in zip(nu, nu[1:]))
    growth = all(v >= 4 ** (l + 1) * log.k0 for l, v in enumerate(nu))
    first = not nu or nu[0] >= 4 * log.k0
    return {'spacing': spacing, 'growth': growth, 'first': first, 'holds': spacing and growth and first}


def close_return_logs(params: FamilyParams, seeds, T: int, k0: int, boxes: CloseReturnBoxes,
                      region=None) -> List[CloseReturnLog]:
    """Close-return logs of many seeds iterated together"""
    inside = _membership(params, region)
    pts = np.atleast_2d(np.asarray(seeds, dtype=float)).copy()
    logs = [CloseReturnLog(p.copy(), k0) for p in pts]
    start = np.zeros(len(pts), dtype=int)
    running = np.ones(len(pts), dtype=bool)
    for t in range(1, T + 1):
        if not running.any():
            break
        idx = np.flatnonzero(running)
        with np.errstate(over='ignore', invalid='ignore'):
            pts[idx] = apply(params, pts[idx])
        gone = ~inside(pts[idx])
        for i in idx[gone]:
            logs[i].escaped = True
        running[idx[gone]] = False
        idx = idx[~gone]
        hit, undecided = boxes.locate(pts[idx], t - start[idx])
        for i in idx[undecided]:
            logs[i].truncated = True
        running[idx[undecided]] = False
        for i, j in zip(idx[(hit >= 0) & ~undecided], hit[(hit >= 0) & ~undecided]):
            logs[i].times.append(int(t - start[i]))
            logs[i].absolute.append(t)
            logs[i].boxes.append(int(j))
            start[i] = t
    violations = sum(1 for log in logs if log.times and not check_close_return_laws(log)['holds'])
    if violations:
        logger.warning(f"{violations} close-return logs break the spacing laws")
    return logs


def close_returns(params: FamilyParams, seed, T: int, k0: int, boxes: CloseReturnBoxes,
                  region=None) -> CloseReturnLog:
    return close_return_logs(params, [seed], T, k0, boxes, region)[0]


def clopper_pearson(successes: int, trials: int, level: float = 0.95):
    """Exact binomial confidence interval"""
    tail = (1.0 - level) / 2.0
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(tail, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1.0 - tail, successes + 1, trials - successes))
    return lo, hi


def _log_det_along(params: FamilyParams, z, steps: int) -> float:
    """log |det Df^steps(z)|; -inf once a step has a singular Jacobian"""
    total = 0.0
    z = np.asarray(z, dtype=float)
    for _ in range(steps):
        det = abs(float(np.linalg.det(jacobian(params, z))))
        if det == 0.0:
            return -math.inf
        total += math.log(det)
        z = apply(params, z)
    return total


def omega_ratio(params: FamilyParams, k0: int, sample_size: int, boxes: CloseReturnBoxes,
                T: int = ESCAPE_CONFIG['recurrence_horizon'], levels: int = 3,
                constants: Constants = None, rng: np.random.Generator = None, region=None) -> dict:
    """
    Monte Carlo estimates of |Omega_k| / |Omega_(k-1)| for seeds in A(k0)

    Seeds with at least k-1 close returns form the pool for level k; a
    log truncated right after its (k-1)-th return is left out of that
    level. Levels with fewer than the starvation floor in their pool
    report only the upper confidence bound.

    Raises:
        SampleStarved: fewer seeds than the floor could be drawn from A(k0)
    """
    constants = constants or Constants()
    rng = rng or np.random.default_rng(12345)
    floor = ESCAPE_CONFIG['starved_floor']
    seeds = boxes.sample(k0, sample_size, rng)
    if len(seeds) < floor:
        raise SampleStarved(f"only {len(seeds)} seeds found in A({k0})")

    batches = np.array_split(seeds, max(1, len(seeds) // 256))
    logs: List[CloseReturnLog] = []
    for batch in tqdm(batches, desc=f"Close returns k0={k0}", unit="batch"):
        logs += close_return_logs(params, batch, T, k0, boxes, region)

    rows = []
    for k in range(1, levels + 1):
        pool = [log for log in logs if len(log) >= k - 1 and not (log.truncated and len(log) == k - 1)]
        hits = sum(1 for log in pool if len(log) >= k)
        lo, hi = clopper_pearson(hits, len(pool)) if pool else (0.0, 1.0)
        starved = len(pool) < floor
        if starved:
            logger.warning(f"Omega ratio level {k}: pool of {len(pool)} below {floor}, upper bound only")
        rows.append({'k': k, 'pool': len(pool), 'hits': hits,
                     'ratio': None if starved or not pool else hits / len(pool),
                     'ci_lo': lo, 'ci_hi': hi, 'starved': starved})

    resolved = [r['ratio'] for r in rows if r['ratio'] is not None]
    decreasing = all(b < a for a, b in zip(resolved, resolved[1:]))

    spread = 0.0
    groups = {}
    for log in logs:
        if log.times:
            groups.setdefault(log.times[0], []).append(log.seed)
    if params.is_degenerate:
        logger.warning("area distortion is undefined for b = 0, skipped")
        spread = None
        groups = {}
    for nu, group in groups.items():
        if len(group) > 1:
            dets = [_log_det_along(params, z, nu) for z in group]
            spread = max(spread, max(dets) - min(dets))

    laws = [check_close_return_laws(log)['holds'] for log in logs if log.times]
    return {
        'k0': k0,
        'seeds': len(seeds),
        'rows': rows,
        'decreasing': decreasing,
        'truncated': sum(1 for log in logs if log.truncated),
        'laws_hold': all(laws),
        'area_distortion': None if spread is None else math.exp(spread),
        'area_bound': math.exp(1.0 / constants.C1) if constants.C1 else None,
        'logs': logs,
    }


# ---------------------------------------------------------------------------
# Angle propagation and projectivized derivative bounds
# ---------------------------------------------------------------------------

def _push_angle(params: FamilyParams, xi, theta: float) -> float:
    v = np.array([math.cos(theta), math.sin(theta)])
    w = jacobian(params, np.asarray(xi, dtype=float)) @ v
    return math.atan2(w[1], w[0])


def _angle_diff(a: float, b: float) -> float:
    d = (a - b + math.pi) % (2.0 * math.pi) - math.pi
    return d


def _second_derivative_norm(params: FamilyParams, xi, h: float = 1e-5) -> float:
    xi = np.asarray(xi, dtype=float)
    if params.perturbation is None:
        return 2.0 * params.a
    dJx = (jacobian(params, xi + [h, 0.0]) - jacobian(params, xi - [h, 0.0])) / (2.0 * h)
    dJy = (jacobian(params, xi + [0.0, h]) - jacobian(params, xi - [0.0, h])) / (2.0 * h)
    # bilinear norm bounded by the Frobenius norm of the stacked slices
    return float(math.sqrt(np.sum(dJx ** 2) + np.sum(dJy ** 2)))


def projectivized_bounds(params: FamilyParams, samples: int = 100, rng: np.random.Generator = None,
                         h: float = 1e-6, box: float = 1.0) -> dict:
    """
    Finite-difference derivatives of the projectivized map against their bounds

    d angle(Df v) / d angle(v) <= 2 |det Df| / |Df v|^2 and
    |d angle(Df v) / d xi| <= |D^2 f| |v| / |Df v|, at random (xi, v).
    """
    rng = rng or np.random.default_rng(12345)
    ratio_v, ratio_xi = [], []
    for _ in range(samples):
        xi = rng.uniform(-box, box, 2)
        theta = rng.uniform(0.0, math.pi)
        v = np.array([math.cos(theta), math.sin(theta)])
        J = jacobian(params, xi)
        w = J @ v
        wn = float(np.hypot(*w))
        if wn < 1e-8:
            continue
        det = abs(float(np.linalg.det(J)))
        dv = abs(_angle_diff(_push_angle(params, xi, theta + h), _push_angle(params, xi, theta - h))) / (2.0 * h)
        bound_v = 2.0 * det / wn ** 2
        if bound_v > 0.0:
            ratio_v.append(dv / bound_v)
        elif dv > 1e-8:
            ratio_v.append(math.inf)
        gx = _angle_diff(_push_angle(params, xi + [h, 0.0], theta), _push_angle(params, xi - [h, 0.0], theta)) / (2.0 * h)
        gy = _angle_diff(_push_angle(params, xi + [0.0, h], theta), _push_angle(params, xi - [0.0, h], theta)) / (2.0 * h)
        bound_xi = _second_derivative_norm(params, xi) / wn
        ratio_xi.append(math.hypot(gx, gy) / bound_xi)
    worst_v = max(ratio_v, default=0.0)
    worst_xi = max(ratio_xi, default=0.0)
    return {'vector_ratio': worst_v, 'point_ratio': worst_xi, 'samples': len(ratio_xi),
            'holds': worst_v <= 1.0 + 1e-4 and worst_xi <= 1.0 + 1e-4}


def angle_propagation_check(params: FamilyParams, sides, nu: int, constants: Constants = None,
                            samples: int = 100, rng: np.random.Generator = None) -> dict:
    """
    Angle between tangents of two unstable sides against their distance

    Pairs are taken at equal x on the two sides. The geometric bound
    C2 C3^(3 nu) is reported through its logarithm; the projectivized
    derivative bounds are re-checked alongside.
    """
    constants = constants or Constants()
    first, second = sides
    lo = max(first.x.min(), second.x.min())
    hi = min(first.x.max(), second.x.max())
    ratios = []
    if hi > lo:
        xs = np.linspace(lo, hi, samples)
        o1, o2 = np.argsort(first.x), np.argsort(second.x)
        y1 = np.interp(xs, first.x[o1], first.y[o1])
        y2 = np.interp(xs, second.x[o2], second.y[o2])
        s1 = np.gradient(y1, xs)
        s2 = np.gradient(y2, xs)
        angles = np.abs(np.arctan(s1) - np.arctan(s2))
        dist = np.abs(y1 - y2)
        ok = dist > 0.0
        ratios = list(angles[ok] / dist[ok])
    worst = max(ratios, default=0.0)
    if constants.C2 and constants.C3:
        log_bound = math.log(constants.C2) + 3.0 * nu * math.log(constants.C3)
        holds = worst == 0.0 or math.log(worst) <= log_bound
    else:
        # unmeasured constants: report the ratio only
        log_bound, holds = None, None
    return {
        'max_ratio': worst,
        'log_bound': log_bound,
        'holds': holds,
        'projectivized': projectivized_bounds(params, samples, rng),
    }


# ---------------------------------------------------------------------------
# Homoclinic witness
# ---------------------------------------------------------------------------

class TransitivityReport(NamedTuple):
    applicable: bool
    count: int
    points: np.ndarray
    angles: np.ndarray
    tangential: int


def _graph_crossings(vertices: np.ndarray, graph, y_half: float, exclude: np.ndarray,
                     tangency_tol: float):
    v = vertices[np.all(np.isfinite(vertices), axis=1)]
    ok = np.abs(v[:, 1]) <= y_half
    h = np.where(ok, v[:, 0] - graph(np.clip(v[:, 1], -y_half, y_half)), np.nan)
    slope = graph.derivative()
    points, angles = [], []
    with np.errstate(invalid='ignore'):
        idx = np.flatnonzero(h[:-1] * h[1:] < 0.0)
    for j in idx:
        w = h[j] / (h[j] - h[j + 1])
        p = v[j] + w * (v[j + 1] - v[j])
        if np.hypot(*(p - exclude)) < 1e-6:
            continue
        d = v[j + 1] - v[j]
        t = np.array([float(slope(p[1])), 1.0])
        angles.append(abs(d[0] * t[1] - d[1] * t[0]) / (np.hypot(*d) * np.hypot(*t)))
        points.append(p)
    tangential = 0
    a = np.abs(h)
    for j in range(1, len(a) - 1):
        if np.isfinite(a[j - 1:j + 2]).all() and a[j] <= a[j - 1] and a[j] < a[j + 1] \
                and a[j] < tangency_tol and h[j - 1] * h[j + 1] > 0.0:
            tangential += 1
    return points, angles, tangential


def transitivity_witness(params: FamilyParams, arc_budget: float = 8.0, angle_floor: float = 1e-6,
                         region=None, tangency_tol: float = 1e-8) -> TransitivityReport:
    """
    Transverse intersections of the unstable manifold of Q with its local
    stable manifold and the stable parabola
    """
    if params.is_degenerate:
        logger.info("transitivity witness is not applicable for b = 0")
        return TransitivityReport(False, 0, np.empty((0, 2)), np.empty(0), 0)
    region = region or get_region(params)
    _, Q = find_fixed_points(params)
    manifold = grow_unstable_manifold(params, Q, arc_budget)
    points, angles, tangential = [], [], 0
    for branch in manifold.branches.values():
        for graph in (region.s_spline, region.p_spline):
            p, a, t = _graph_crossings(branch.points, graph, region.y_half, Q.location, tangency_tol)
            points += p
            angles += a
            tangential += t
    angles = np.array(angles)
    keep = angles >= angle_floor
    pts = np.array(points).reshape(-1, 2)[keep]
    logger.info(f"homoclinic witness a={params.a}: {int(keep.sum())} transverse, {tangential} tangential")
    return TransitivityReport(True, int(keep.sum()), pts, angles[keep], tangential)
