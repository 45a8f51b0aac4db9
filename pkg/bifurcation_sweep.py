"""
Bifurcation Sweep

Locates the first bifurcation parameter a* and the lower parameter a**,
tracks critical approximations across parameters, and runs the exclusion
diagnostic and the density sweep below a*.
"""
import json
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline
from tqdm import tqdm

from config import SWEEP_CONFIG
from binding import check_G_condition, decompose_orbit, default_binding_points
from critical_structure import CriticalApprox, as_approx, find_critical_approx
from henon_family import FamilyParams, Constants, apply, get_region
from logger import (
    logger,
    ModifiedFamilyUnavailable,
    MultipleCrossings,
    NoBracket,
    NoCrossing,
    NoSignChange,
    NumericalError,
    PreconditionError,
    TrackLost,
)
from manifolds import (
    Saddle,
    branch_point,
    build_R0,
    find_fixed_points,
    first_tip_index,
    grow_unstable_manifold,
    source_saddle,
    stable_parabola,
)

PROXY_STATEMENT = ("good = exclusion diagnostic good up to 20 n_max and grid escape fraction "
                   ">= {threshold} at T = {horizon}")


class FoldWitness(NamedTuple):
    tip: np.ndarray
    parabola_x: float
    indicator: float


def _fold_tip(params: FamilyParams, saddle: Saddle, arc_budget: float = 3.0) -> np.ndarray:
    """First fold tip of the right unstable branch, refined in the branch parameter"""
    branch = grow_unstable_manifold(params, saddle, arc_budget, branches='right').branches['right']
    pts, t = branch.points, branch.params_t
    finite = np.all(np.isfinite(pts), axis=1)
    stop = int(np.argmin(finite)) if not finite.all() else len(pts)
    j = first_tip_index(pts[:stop, 0])
    if j is None:
        raise NoBracket(f"unstable branch of {saddle.label} has no fold tip at a={params.a}")
    res = optimize.minimize_scalar(lambda u: -float(branch_point(params, saddle, 1.0, u)[0, 0]),
                                   bounds=(t[j - 1], t[j + 1]), method='bounded', options={'xatol': 1e-15})
    return branch_point(params, saddle, 1.0, res.x)[0]


def fold_witness(params: FamilyParams, which: str = 'source') -> FoldWitness:
    """
    Signed gap between a fold tip and the preimage branch x = p(y) of the
    local stable manifold of Q

    Positive when the fold pokes past the parabola (two crossings).

    Args:
        which: 'source' for the saddle bounding R0, 'other' for the second saddle
    """
    P, Q = find_fixed_points(params)
    source = source_saddle(params.orientation, P, Q)
    saddle = source if which == 'source' else (P if source is Q else Q)
    tip = _fold_tip(params, saddle)
    px = float(stable_parabola(params, Q)(tip[1]))
    return FoldWitness(tip, px, float(tip[0] - px))


def intersection_count(params: FamilyParams, which: str = 'source') -> int:
    w = fold_witness(params, which)
    return 2 if w.indicator > 0.0 else (1 if w.indicator == 0.0 else 0)


def _bisect(indicator, lo: float, hi: float, tol: float, label: str):
    f_lo, f_hi = indicator(lo), indicator(hi)
    if not (f_lo < 0.0 < f_hi):
        raise NoBracket(f"{label} indicator does not change sign on [{lo}, {hi}]: {f_lo:.3e}, {f_hi:.3e}")
    steps = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if indicator(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        steps += 1
    logger.debug(f"{label}: {steps} bisection steps")
    return lo, hi


@dataclass
class BifurcationReport:
    b: float
    orientation: str
    a_star: float
    a_star_bracket: tuple
    witness: Optional[FoldWitness] = None
    a_star_star: Optional[float] = None
    a_star_star_bracket: Optional[tuple] = None
    box_exit_consistent: Optional[bool] = None

    @property
    def a_star_hi(self) -> float:
        """Upper bracket end, on the hyperbolic side of the tangency"""
        return self.a_star_bracket[1]

    def to_dict(self) -> dict:
        out = {
            'b': self.b,
            'orientation': self.orientation,
            'a_star': self.a_star,
            'a_star_bracket': list(self.a_star_bracket),
            'a_star_star': self.a_star_star,
            'a_star_star_bracket': list(self.a_star_star_bracket) if self.a_star_star_bracket else None,
            'box_exit_consistent': self.box_exit_consistent,
        }
        if self.witness is not None:
            out['witness'] = {'tip': [float(v) for v in self.witness.tip],
                              'parabola_x': self.witness.parabola_x,
                              'indicator': self.witness.indicator}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> 'BifurcationReport':
        star_star = data.get('a_star_star_bracket')
        return cls(data['b'], data['orientation'], data['a_star'], tuple(data['a_star_bracket']),
                   None, data.get('a_star_star'), tuple(star_star) if star_star else None,
                   data.get('box_exit_consistent'))


def find_a_star(b: float, orientation: str = 'reversing', bracket=None,
                tol: float = SWEEP_CONFIG['a_star_tol']) -> BifurcationReport:
    """
    Bisection on a for the tangency of the source fold with the stable parabola

    Raises:
        NoBracket: the indicator has the same sign at both bracket ends
    """
    lo, hi = bracket or SWEEP_CONFIG['a_bracket']

    def indicator(a):
        return fold_witness(FamilyParams(a, b, orientation)).indicator

    lo, hi = _bisect(indicator, lo, hi, tol, 'a*')
    a_star = 0.5 * (lo + hi)
    witness = fold_witness(FamilyParams(a_star, b, orientation))
    logger.info(f"a* located for b={b} ({orientation}): {a_star:.12f} in [{lo:.12f}, {hi:.12f}]")
    return BifurcationReport(b, orientation, a_star, (lo, hi), witness)


def tip_escapes(params: FamilyParams, which: str = 'other', steps: int = 60, box: float = 2.0) -> bool:
    """Whether the orbit of a fold tip leaves [-box, box]^2 within the given steps"""
    P, Q = find_fixed_points(params)
    source = source_saddle(params.orientation, P, Q)
    saddle = source if which == 'source' else (P if source is Q else Q)
    z = _fold_tip(params, saddle)
    for _ in range(steps):
        z = apply(params, z)
        if not np.all(np.abs(z) <= box):
            return True
    return False


def find_a_star_star(b: float, a_star: float, orientation: str = 'reversing', lower: float = None,
                     tol: float = SWEEP_CONFIG['a_star_star_tol']):
    """
    Bisection for the tangency of the second saddle's fold with the stable
    parabola, cross-checked by the box-exit of that fold on either side

    The second saddle is the one source_saddle does not pick: P when f
    reverses orientation, Q when it preserves it.

    Returns:
        (a**, bracket, box-exit consistent)
    """
    lower = SWEEP_CONFIG['a_bracket'][0] if lower is None else lower
    logger.info(f"a**: growing the unstable manifold of {'P' if orientation == 'reversing' else 'Q'}")

    def indicator(a):
        return fold_witness(FamilyParams(a, b, orientation), which='other').indicator

    lo, hi = _bisect(indicator, lower, a_star, tol, 'a**')
    a_ss = 0.5 * (lo + hi)
    offset = SWEEP_CONFIG['box_exit_offset']
    consistent = (tip_escapes(FamilyParams(a_ss + offset, b, orientation))
                  and not tip_escapes(FamilyParams(a_ss - offset, b, orientation)))
    if not consistent:
        logger.warning(f"box-exit flag disagrees with the tangency indicator near a**={a_ss:.8f}")
    logger.info(f"a** located for b={b}: {a_ss:.8f}")
    return a_ss, (lo, hi), consistent


@dataclass
class DeformationTrack:
    a_values: np.ndarray
    points: np.ndarray
    order: int
    center: float
    window: tuple
    speeds: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.a_values) > 1:
            self.speeds = np.hypot(*np.gradient(self.points, self.a_values, axis=0).T)
        else:
            self.speeds = np.zeros(len(self.a_values))

    @property
    def within_window(self) -> bool:
        return bool(self.window[0] <= self.a_values[0] and self.a_values[-1] <= self.window[1])

    @property
    def max_speed(self) -> float:
        return float(np.max(self.speeds))

    def image_track(self, params: FamilyParams, nu: int) -> 'Track':
        """f_a^nu of the tracked points"""
        out = np.empty_like(self.points)
        for idx, (a, z) in enumerate(zip(self.a_values, self.points)):
            p = params.with_a(float(a))
            for _ in range(nu):
                z = apply(p, z)
            out[idx] = z
        return Track(self.a_values, out)

    def image_speed_ratios(self, params: FamilyParams, nu: int, w_norm: float) -> np.ndarray:
        """|zeta_nu(a) - zeta_nu(a')| / (|w_nu| |a - a'|) between consecutive samples"""
        img = self.image_track(params, nu).points
        da = np.diff(self.a_values)
        return np.hypot(*np.diff(img, axis=0).T) / (w_norm * da)


class Track(NamedTuple):
    a_values: np.ndarray
    points: np.ndarray


def log_speed_bound(constants: Constants) -> float:
    """log of kappa0^(10 log delta)"""
    return 10.0 * math.log(constants.delta) * math.log(constants.kappa0)


def track_deformation(params: FamilyParams, zeta_hat: CriticalApprox, interval, host_builder=None,
                      samples: int = 9, constants: Constants = None) -> DeformationTrack:
    """
    Re-solve the critical approximation along a parameter interval

    Args:
        host_builder: params -> host Curve at that parameter; by default the
            host of zeta_hat is kept

    Raises:
        TrackLost: a re-solve fails or the track jumps by more than ten
            times its median step
    """
    constants = constants or Constants()
    n = zeta_hat.order
    a_values = np.linspace(interval[0], interval[1], samples)
    points = np.empty((samples, 2))
    for idx, a in enumerate(a_values):
        p = params.with_a(float(a))
        host = host_builder(p) if host_builder else zeta_hat.host
        try:
            points[idx] = find_critical_approx(p, host, n).point
        except (NoSignChange, NumericalError) as e:
            raise TrackLost(f"re-solve failed at a={a}: {e}") from e

    steps = np.hypot(*np.diff(points, axis=0).T)
    if len(steps) >= 2:
        median = float(np.median(steps))
        if median > 0.0 and float(np.max(steps)) > 10.0 * median:
            raise TrackLost(f"track jumps by {np.max(steps):.3e} against median step {median:.3e}")

    width = constants.kappa0 ** n
    a_hat = params.a
    track = DeformationTrack(a_values, points, n, a_hat, (a_hat - width, a_hat + width))
    if not track.within_window:
        logger.debug(f"track interval exceeds the validity window of half-width {width:.3e}")
    return track


def critical_parameter(track, binding_track) -> float:
    """
    The parameter where the x-coordinates of two tracks agree

    Raises:
        NoCrossing: the difference keeps one sign
        MultipleCrossings: the difference changes sign more than once
    """
    a = np.asarray(track.a_values, dtype=float)
    b_a = np.asarray(binding_track.a_values, dtype=float)
    lo, hi = max(a[0], b_a[0]), min(a[-1], b_a[-1])
    grid = a[(a >= lo) & (a <= hi)]
    first = CubicSpline(a, np.asarray(track.points)[:, 0])
    second = CubicSpline(b_a, np.asarray(binding_track.points)[:, 0])

    def diff(x):
        return float(first(x) - second(x))

    values = np.array([diff(x) for x in grid])
    changes = [j for j in range(len(grid) - 1) if values[j] * values[j + 1] < 0.0]
    zeros = [j for j in range(len(grid)) if values[j] == 0.0]
    if not changes and not zeros:
        raise NoCrossing("tracks do not cross on their common interval")
    if len(changes) + len(zeros) > 1:
        raise MultipleCrossings(f"tracks cross {len(changes) + len(zeros)} times")
    if zeros:
        return float(grid[zeros[0]])
    j = changes[0]
    return optimize.brentq(diff, grid[j], grid[j + 1], xtol=1e-15)


def _ensure_region(params: FamilyParams):
    try:
        return get_region(params)
    except ModifiedFamilyUnavailable:
        return build_R0(params)


def nonrecurrence_check(params: FamilyParams, capproxes, horizon: int = None) -> dict:
    """Minimum |x| along f^i zeta for 1 <= i < horizon (default 20n) over the approximations"""
    worst = math.inf
    rows = []
    for zeta in capproxes:
        approx = as_approx(zeta)
        H = horizon or 20 * approx.order
        z = np.asarray(approx.point, dtype=float)
        low = math.inf
        for _ in range(1, H):
            z = apply(params, z)
            if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > 1e8:
                break
            low = min(low, abs(float(z[0])))
        rows.append({'point': [float(v) for v in approx.point], 'order': approx.order, 'min_abs_x': low})
        worst = min(worst, low)
    return {'min_abs_x': worst, 'holds': worst >= 0.9, 'orbits': rows}


def exclusion_diagnostic(params: FamilyParams, n_max: int, constants: Constants = None, capproxes=None) -> dict:
    """
    (G)_m along each tracked critical orbit for m up to 20 n_max

    Returns:
        {'verdict': 'good' | 'excluded', 'first_failure': (index, m) or None, ...}
    """
    constants = constants or Constants()
    horizon = 20 * n_max
    if capproxes is None:
        _ensure_region(params)
        capproxes = default_binding_points(params, constants)
    Xi = list(capproxes)
    for idx, zeta in enumerate(Xi):
        itinerary = decompose_orbit(params, as_approx(zeta).point, horizon, Xi=Xi, constants=constants)
        for m in range(1, horizon + 1):
            ok, margin = check_G_condition(zeta, m, itinerary, constants.alpha)
            if not ok:
                logger.debug(f"a={params.a}: (G)_{m} fails on critical orbit {idx}, margin {margin:.3e}")
                return {'verdict': 'excluded', 'first_failure': (idx, m), 'horizon': horizon,
                        'returns': len(itinerary.records)}
    return {'verdict': 'good', 'first_failure': None, 'horizon': horizon, 'returns': None}


@dataclass
class SweepResult:
    b: float
    a_star: float
    eps_ladder: List[float]
    rungs: List[dict]
    control: Optional[dict] = None
    proxy: str = ''

    @property
    def good_fractions(self) -> List[float]:
        return [r['good_fraction'] for r in self.rungs]

    def rows(self) -> List[dict]:
        return [row for rung in self.rungs for row in rung['rows']]


def stratified_parameters(a_star: float, eps: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """a* - eps (i + U_i) / count for i = 0..count-1"""
    u = rng.uniform(0.0, 1.0, count)
    return a_star - eps * (np.arange(count) + u) / count


def _sweep_worker(task: dict) -> dict:
    """Classify one sampled parameter; runs in a worker process"""
    from escape_stats import grid_escape

    params = FamilyParams(task['a'], task['b'], task['orientation'])
    constants = Constants(**task['constants'])
    row = {'eps': task['eps'], 'index': task['index'], 'a': task['a']}
    try:
        region = _ensure_region(params)
        escape = grid_escape(params, task['grid'], task['horizon'], region=region)
        row['escape_fraction'] = escape.escape_fraction
        if task.get('control'):
            row['verdict'] = 'hyperbolic' if escape.escape_fraction >= task['threshold'] else 'not_hyperbolic'
            row['first_fail_m'] = None
        else:
            verdict = exclusion_diagnostic(params, task['n_max'], constants)
            row['verdict'] = verdict['verdict']
            row['first_fail_m'] = verdict['first_failure'][1] if verdict['first_failure'] else None
    except NumericalError as e:
        row.update(verdict='error', first_fail_m=None, escape_fraction=None, error=str(e))
    row['good'] = bool(row['verdict'] == 'good' and row['escape_fraction'] is not None
                       and row['escape_fraction'] >= task['threshold'])
    return row


def _load_checkpoint(path: Optional[Path]) -> dict:
    done = {}
    if path is None or not path.exists():
        return done
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line:
                row = json.loads(line)
                done[(row['eps'], row['index'])] = row
    logger.info(f"resuming sweep from {path}: {len(done)} samples done")
    return done


def _failed_row(task: dict, error: Exception) -> dict:
    logger.error(f"sweep sample a={task['a']} failed: {error}")
    return {'eps': task['eps'], 'index': task['index'], 'a': task['a'], 'verdict': 'error',
            'first_fail_m': None, 'escape_fraction': None, 'good': False, 'error': str(error)}


def _run_tasks(tasks: List[dict], jobs: int, checkpoint: Optional[Path], desc: str) -> List[dict]:
    """
    One row per task, in completion order

    A task whose worker raises becomes an 'error' row counted as not good.
    Such rows stay out of the checkpoint so a resumed sweep retries them.
    """
    rows = []
    handle = open(checkpoint, 'a', encoding='utf-8') if checkpoint else None

    def record(row: dict, failed: bool):
        rows.append(row)
        if handle and not failed:
            handle.write(json.dumps(row) + '\n')
            handle.flush()
        pbar.update(1)

    try:
        with tqdm(total=len(tasks), desc=desc, unit='a') as pbar:
            if jobs > 1:
                with ProcessPoolExecutor(max_workers=jobs) as executor:
                    future_to_task = {executor.submit(_sweep_worker, task): task for task in tasks}
                    for future in as_completed(future_to_task):
                        task = future_to_task[future]
                        try:
                            row = future.result()
                        except Exception as e:
                            record(_failed_row(task, e), True)
                            continue
                        record(row, False)
            else:
                for task in tasks:
                    try:
                        row = _sweep_worker(task)
                    except Exception as e:
                        record(_failed_row(task, e), True)
                        continue
                    record(row, False)
    finally:
        if handle:
            handle.close()
    return rows


def density_sweep(b: float, eps_ladder, samples_per_eps: int, n_max: int = SWEEP_CONFIG['n_max'],
                  a_star: float = None, orientation: str = 'reversing', constants: Constants = None,
                  jobs: int = SWEEP_CONFIG['jobs'], seed: int = 12345, checkpoint: Path = None,
                  escape_grid: int = SWEEP_CONFIG['escape_grid'], escape_horizon: int = SWEEP_CONFIG['escape_horizon'],
                  control: bool = False) -> SweepResult:
    """
    Good-fraction of sampled parameters in [a* - eps, a*] along a ladder of eps

    Rungs with floor(n0(eps) / 20) >= n_max admit no exclusion and are
    reported as trivially good. Finished samples are appended to the
    checkpoint file and skipped on resume.

    Raises:
        PreconditionError: the ladder is not strictly decreasing and positive
    """
    ladder = [float(e) for e in eps_ladder]
    if not ladder or any(e <= 0.0 for e in ladder) or any(x <= y for x, y in zip(ladder, ladder[1:])):
        raise PreconditionError(f"eps ladder must be positive and strictly decreasing, got {ladder}")
    constants = constants or Constants()
    if a_star is None:
        a_star = find_a_star(b, orientation).a_star
    threshold = SWEEP_CONFIG['escape_threshold']
    done = _load_checkpoint(checkpoint)
    base = {'b': b, 'orientation': orientation, 'n_max': n_max, 'grid': escape_grid, 'horizon': escape_horizon,
            'threshold': threshold,
            'constants': {'alpha': constants.alpha, 'M': constants.M, 'delta': constants.delta,
                          'lambda0': constants.lambda0, 'C0': constants.C0}}

    rungs = []
    for rung_index, eps in enumerate(ladder):
        rng = np.random.default_rng([seed, rung_index])
        a_values = stratified_parameters(a_star, eps, samples_per_eps, rng)
        trivial = math.floor(constants.n0(eps) / 20.0) >= n_max
        if trivial:
            rows = [{'eps': eps, 'index': i, 'a': float(a), 'verdict': 'good', 'first_fail_m': None,
                     'escape_fraction': None, 'good': True, 'trivial': True} for i, a in enumerate(a_values)]
        else:
            tasks = [dict(base, eps=eps, index=i, a=float(a)) for i, a in enumerate(a_values)
                     if (eps, i) not in done]
            rows = [done[(eps, i)] for i in range(samples_per_eps) if (eps, i) in done]
            rows += _run_tasks(tasks, jobs, checkpoint, f"eps={eps:g}")
        rows.sort(key=lambda r: r['index'])
        fraction = sum(1 for r in rows if r['good']) / len(rows) if rows else 0.0
        failures = sum(1 for r in rows if r['verdict'] == 'error')
        rungs.append({'eps': eps, 'rows': rows, 'good_fraction': fraction, 'trivial': trivial,
                      'failures': failures})
        if failures:
            logger.warning(f"sweep rung eps={eps:g}: {failures} of {len(rows)} samples failed")
        logger.info(f"sweep rung eps={eps:g}: good fraction {fraction:.4f}{' (trivial)' if trivial else ''}")

    control_rung = None
    if control:
        rng = np.random.default_rng([seed, len(ladder)])
        a_values = a_star + ladder[0] * (np.arange(samples_per_eps) + rng.uniform(0.0, 1.0, samples_per_eps)) / samples_per_eps
        tasks = [dict(base, eps=-ladder[0], index=i, a=float(a), control=True) for i, a in enumerate(a_values)]
        rows = sorted(_run_tasks(tasks, jobs, None, 'control'), key=lambda r: r['index'])
        hyperbolic = sum(1 for r in rows if r['verdict'] == 'hyperbolic') / len(rows) if rows else 0.0
        control_rung = {'eps': ladder[0], 'rows': rows, 'hyperbolic_fraction': hyperbolic,
                        'failures': sum(1 for r in rows if r['verdict'] == 'error')}

    proxy = PROXY_STATEMENT.format(threshold=threshold, horizon=escape_horizon)
    return SweepResult(b, a_star, ladder, rungs, control_rung, proxy)
