"""
Binding

Bound and fold periods relative to critical approximations, the binding
ladder, bound/free decomposition of orbits, deep returns and the
cumulative return-depth condition.
"""
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from config import NUMERICS
from cocycle import DerivativeHistory, HyperbolicTimes, derivative_log_norms, hyperbolic_times, is_regular
from critical_structure import (
    CriticalPoint,
    as_approx,
    check_good_behavior,
    find_critical_point,
    leaf_offset_function,
    tangential_position,
)
from henon_family import FamilyParams, Constants, apply, jacobian, get_region
from logger import (
    logger,
    ControlLost,
    CriticalPosition,
    LadderExhausted,
    NoTangency,
    PreconditionError,
)

NO_BINDING = None

_TIE = 1e-13


def _log_norms(source) -> np.ndarray:
    if isinstance(source, DerivativeHistory):
        return source.log_norms()
    if hasattr(source, 'wi'):
        return source.wi.log_norms()
    return np.asarray(source, dtype=float)


def log_dk_table(source, alpha: float, k_max: int) -> np.ndarray:
    """
    log D_k for k = 1..k_max (index 0 unused)

    D_k = e^(-3 alpha k) min_{1<=i<=k} min_{i<=j<=k+1} |w_j|^2 / |w_i|^3
    """
    L = _log_norms(source)
    if len(L) < k_max + 1:
        raise PreconditionError(f"D_{k_max} needs w up to {k_max + 1}, history has {len(L)}")
    out = np.full(k_max + 1, np.nan)
    mins = np.empty(0)
    for k in range(1, k_max + 1):
        mins = np.minimum(np.append(mins, L[k - 1]), L[k])
        out[k] = -3.0 * alpha * k + float(np.min(2.0 * mins - 3.0 * L[:k]))
    return out


def compute_Dk(zeta, k: int, alpha: float = None) -> float:
    alpha = Constants().alpha if alpha is None else alpha
    return math.exp(log_dk_table(zeta, alpha, k)[k])


def dk_ratio_bounds(log_D: np.ndarray, alpha: float, k_min: int = 1) -> np.ndarray:
    """Per k: e^(-3 alpha k) <= D_{k+1}/D_k <= e^(-3 alpha), up to roundoff"""
    ks = np.arange(k_min, len(log_D) - 1)
    ratio = log_D[ks + 1] - log_D[ks]
    return (ratio >= -3.0 * alpha * ks - 1e-12) & (ratio <= -3.0 * alpha + 1e-12)


def bound_period_from_offset(offset: float, log_D: np.ndarray, chi, M: int, n: int):
    """
    Annulus index k with offset in V_k minus V_{k+1}, and p = chi(k)

    Offsets within a relative 1e-13 of a strip boundary count as outside
    it. Returns NO_BINDING when the offset is outside V_M.

    Raises:
        CriticalPosition: the offset lies in V_{20n-1}
    """
    top = min(len(log_D) - 1, 20 * n - 1)
    k = None
    for j in range(M, top + 1):
        if offset <= 0.5 * math.exp(log_D[j]) * (1.0 - _TIE):
            k = j
        else:
            break
    if k is None:
        return NO_BINDING
    if k >= 20 * n - 1:
        raise CriticalPosition(f"offset {offset:.3e} inside V_{20 * n - 1}")
    if chi is not None and 0 <= k - M < len(chi):
        return k, int(chi[k - M])
    return k, k


def fold_period(zeta, distance: float, p: int, beta: float) -> int:
    """
    q = min{i in [1, p): |zeta - z|^beta |w_{j+1}| >= 1 for every i <= j < p}

    Returns p when no such i exists.
    """
    L = _log_norms(zeta)
    log_d = math.log(distance) if distance > 0.0 else -math.inf
    q = p
    for j in range(p - 1, 0, -1):
        if j >= len(L) or beta * log_d + L[j] < 0.0:
            break
        q = j
    if q == p:
        logger.debug(f"fold period undefined for p={p}, distance {distance:.3e}")
    return q


@dataclass
class BindingRecord:
    time: int
    zeta: object
    zeta_index: int
    k: Optional[int]
    position: str           # 'admissible', 'critical' or 'unbound'
    p: int
    q: int
    distance: float


@dataclass
class Itinerary:
    orbit: np.ndarray
    log_norms: np.ndarray
    records: List[BindingRecord]
    states: List[str]
    deep: List[bool] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.orbit) - 1

    @property
    def return_times(self) -> List[int]:
        return [r.time for r in self.records]

    def to_dict(self) -> dict:
        return {
            'T': self.T,
            'events': [
                {'time': r.time, 'binding': r.zeta_index, 'k': r.k, 'position': r.position,
                 'p': r.p, 'q': r.q, 'distance': r.distance, 'deep': d}
                for r, d in zip(self.records, self.deep)
            ],
        }


class _Binder:
    """Per-critical-point data reused across returns: D_k table, chi and the leaf offset"""

    def __init__(self, params: FamilyParams, zeta, constants: Constants):
        self.zeta = zeta
        approx = as_approx(zeta)
        self.n = approx.order
        self.point = np.asarray(approx.point)
        self.log_D = log_dk_table(approx, constants.alpha, 20 * self.n - 1)
        self.chi = check_good_behavior(approx, constants=constants).chi
        self.offset = leaf_offset_function(params, apply(params, self.point), constants)


_DEFAULT_XI = {}


def default_binding_points(params: FamilyParams, constants: Constants = None, region=None) -> list:
    """Critical points on the pieces of the R0 boundary crossing I(delta)"""
    constants = constants or Constants()
    key = (params.a, params.b, params.orientation, constants.delta)
    if key not in _DEFAULT_XI:
        region = region or get_region(params)
        points = []
        for piece in region.fold_segments(constants.delta):
            try:
                points.append(find_critical_point(params, piece, constants))
            except NoTangency as e:
                logger.warning(f"no critical point on a boundary piece: {e}")
        _DEFAULT_XI[key] = points
    return _DEFAULT_XI[key]


def _position(binder: _Binder, image, M: int):
    try:
        result = bound_period_from_offset(float(binder.offset(np.asarray(image))), binder.log_D, binder.chi, M, binder.n)
    except CriticalPosition:
        return 'critical', None, 0
    if result is NO_BINDING:
        return 'unbound', None, 0
    k, p = result
    return 'admissible', k, p


def bound_period(params: FamilyParams, zeta, z, constants: Constants = None):
    """
    (k, p) for a return z bound to zeta, measured by the offset of f(z)
    from the stable leaf through f(zeta)

    Returns NO_BINDING when f(z) is outside V_M.

    Raises:
        CriticalPosition: f(z) lies in V_{20n-1}
    """
    constants = constants or Constants()
    binder = _Binder(params, zeta, constants)
    offset = float(binder.offset(np.asarray(apply(params, np.asarray(z, dtype=float)))))
    return bound_period_from_offset(offset, binder.log_D, binder.chi, constants.M, binder.n)


class LadderChoice(NamedTuple):
    zeta: object
    level: int
    position: str
    k: Optional[int]
    mu: int
    required_order: int
    exact_order: bool


def ladder_orders(ht: HyperbolicTimes, theta: float) -> List[int]:
    """n_i = min{n : [theta n] = m - mu_i} for each hyperbolic time mu_i"""
    return [math.ceil((ht.m - mu) / theta - 1e-9) for mu in ht.times]


def _level_orders(orders: List[int], d: int, required: int, theta: float) -> Tuple[List[int], bool]:
    exact = [n for n in orders if math.floor(theta * n + 1e-12) == d]
    if exact:
        return exact, True
    below = [n for n in orders if n <= required]
    return below[-1:], False


def binding_ladder(params: FamilyParams, z, v, m: int, Xi, constants: Constants = None) -> LadderChoice:
    """
    Binding point for Df^m v on the ladder built from the hyperbolic times
    mu_1 < ... < mu_s of v up to m

    Level i asks for critical approximations of order n_i with
    [theta n_i] = m - mu_i, so n_1 > ... > n_s. When Xi holds no such order
    the level uses the largest available order below n_i and the choice is
    marked inexact. Levels are tried from s down to 1 and the first one
    with an approximation in tangential position is returned.

    Raises:
        PreconditionError: f^m z is outside I(delta), or m < log(1/delta)
        NoHyperbolicTimes: v has no hyperbolic times up to m
        LadderExhausted: no level admits tangential position
    """
    constants = constants or Constants()
    point = np.asarray(z, dtype=float)
    vec = np.asarray(v, dtype=float)
    for _ in range(m):
        vec = jacobian(params, point) @ vec
        vec = vec / np.hypot(*vec)
        point = apply(params, point)
    if abs(point[0]) >= constants.delta:
        raise PreconditionError(f"f^{m} z = {tuple(point)} is not in I({constants.delta})")
    ht = hyperbolic_times(params, z, v, m, constants)
    if not is_regular(params, z, v, 0.1, m, constants.delta):
        logger.warning(f"tangent vector is not 1/10-regular up to {m}")

    theta = constants.theta
    required = ladder_orders(ht, theta)
    orders = sorted({as_approx(zeta).order for zeta in Xi})
    for level in range(len(ht.times), 0, -1):
        mu = ht.times[level - 1]
        usable, exact = _level_orders(orders, m - mu, required[level - 1], theta)
        candidates = [zeta for zeta in Xi if as_approx(zeta).order in usable
                      and tangential_position(point, vec, zeta, params.b)]
        if not candidates:
            continue
        zeta = min(candidates, key=lambda c: float(np.hypot(*(as_approx(c).point - point))))
        position, k, _ = _position(_Binder(params, zeta, constants), apply(params, point), constants.M)
        if not exact:
            logger.debug(f"ladder level {level} wants order {required[level - 1]}, "
                         f"using {as_approx(zeta).order}")
        return LadderChoice(zeta, level, position, k, mu, required[level - 1], exact)
    raise LadderExhausted(f"no critical approximation in tangential position for the return at {m} "
                          f"(hyperbolic times {ht.times})")


def deep_return_flags(distances) -> List[bool]:
    """
    Return t+1 is deep if it is the first, or for every earlier s
    sum_{j=s+1}^{t+1} 2 log d_j <= log d_s
    """
    logs = np.log(np.asarray(distances, dtype=float))
    flags = []
    for t in range(len(logs)):
        if t == 0:
            flags.append(True)
            continue
        tails = np.cumsum(2.0 * logs[t:0:-1])[::-1]
        flags.append(bool(np.all(tails <= logs[:t])))
    return flags


def deep_returns(itinerary: Itinerary) -> List[BindingRecord]:
    return [r for r, d in zip(itinerary.records, itinerary.deep) if d]


def decompose_orbit(params: FamilyParams, z, T: int, Xi=None, v=(1.0, 0.0),
                    constants: Constants = None, region=None) -> Itinerary:
    """
    Split the orbit of z into bound and free stretches up to time T

    Each free return to I(delta) binds to the nearest critical point of Xi
    (by default the critical points on the boundary of R0). A bound return
    at m with period p makes m+1..m+p-1 bound; m+p is free again.

    Raises:
        ControlLost: a free return finds no binding point
    """
    constants = constants or Constants()
    if Xi is None:
        Xi = default_binding_points(params, constants, region)
    binders = {}
    bound = NUMERICS['overflow_bound']

    orbit = [np.asarray(z, dtype=float)]
    for _ in range(T):
        nxt = apply(params, orbit[-1])
        if not np.all(np.abs(nxt) <= bound):
            logger.warning(f"orbit left the overflow bound after {len(orbit)} steps")
            break
        orbit.append(nxt)
    orbit = np.array(orbit)
    T = len(orbit) - 1
    log_norms = derivative_log_norms(params, orbit[0], v, T)

    states = ['free'] * (T + 1)
    records = []
    i = 0
    while i <= T:
        zi = orbit[i]
        if abs(zi[0]) >= constants.delta:
            i += 1
            continue
        if not Xi:
            raise ControlLost(f"free return at {i} with no binding point available")
        idx = int(np.argmin([np.hypot(*(as_approx(c).point - zi)) for c in Xi]))
        if idx not in binders:
            binders[idx] = _Binder(params, Xi[idx], constants)
        binder = binders[idx]
        distance = float(np.hypot(*(binder.point - zi)))
        position, k, p = _position(binder, apply(params, zi), constants.M)
        q = fold_period(binder.zeta, distance, p, constants.beta(params.b)) if p > 0 else 0
        records.append(BindingRecord(i, binder.zeta, idx, k, position, p, q, distance))
        if p > 0:
            for j in range(i + 1, min(i + p, T + 1)):
                states[j] = 'bound'
            i += p
        else:
            i += 1

    deep = deep_return_flags([max(r.distance, 1e-300) for r in records]) if records else []
    logger.debug(f"decomposed orbit: {len(records)} returns, {states.count('bound')} bound steps")
    return Itinerary(orbit, log_norms, records, states, deep)


def theta_nu(zeta, itinerary: Optional[Itinerary], nu: int, kappa0: float) -> float:
    """
    kappa0 [sum over free i < nu of 1/sigma_i]^-1

    sigma_i = |w_{i+1}| / |w_i|^2 on free steps and |f^i zeta - z_i|^(10/9) / |w_i|
    at returns.
    """
    L = _log_norms(zeta)
    returns = {}
    states = None
    if itinerary is not None:
        returns = {r.time: r.distance for r in itinerary.records}
        states = itinerary.states
    terms = []
    for i in range(1, nu):
        if states is not None and i < len(states) and states[i] == 'bound':
            continue
        if i in returns:
            terms.append(-(10.0 / 9.0) * math.log(returns[i]) + L[i - 1])
        else:
            terms.append(-(L[i] - 2.0 * L[i - 1]))
    if not terms:
        return math.inf
    return kappa0 * math.exp(-logsumexp(terms))


def g_condition_from_distances(distances, m: int, alpha: float):
    """(sum log d_i >= -alpha m, margin)"""
    total = float(np.sum(np.log(np.asarray(distances, dtype=float)))) if len(distances) else 0.0
    margin = total + alpha * m
    return margin >= 0.0, margin


def check_G_condition(zeta, m: int, itinerary: Itinerary, alpha: float = None):
    """Sum of log distances over every free return at times 1..m, whatever its position"""
    alpha = Constants().alpha if alpha is None else alpha
    distances = [max(r.distance, 1e-300) for r in itinerary.records if 1 <= r.time <= m]
    return g_condition_from_distances(distances, m, alpha)


def recovery_report(params: FamilyParams, itinerary: Itinerary, constants: Constants = None) -> dict:
    """
    Re-check the bound-period estimates on every completed binding

    Checks the p window, q <= C beta p with the measured C, shadowing,
    the fold sandwich, growth at expiry and free growth between returns.
    Critical-position landings are checked for |Df^n v| <= e^(-8 lambda n).
    """
    constants = constants or Constants()
    L = itinerary.log_norms
    beta = constants.beta(params.b)
    lam = constants.lam
    rows = []
    for rec in itinerary.records:
        if rec.p <= 0 or rec.time + rec.p > itinerary.T:
            continue
        m, p, q, d = rec.time, rec.p, rec.q, rec.distance
        log_inv = -math.log(d)
        zeta_orbit = as_approx(rec.zeta).wi.orbit
        steps = range(1, min(p, len(zeta_orbit) - 1) + 1)
        shadow = max((float(np.hypot(*(zeta_orbit[i] - itinerary.orbit[m + i]))) for i in steps), default=0.0)
        seg = L[m:m + p + 1] - L[m]
        rows.append({
            'time': m,
            'p': p,
            'q': q,
            'p_window': 3.0 * log_inv / math.log(constants.C0) <= p <= 3.0 * log_inv / lam,
            'q_constant': q / (beta * p) if beta > 0 else math.inf,
            'shadowing': shadow <= math.exp(-2.0 * constants.alpha * p),
            'fold_sandwich': (q < len(seg) and -log_inv - 1e-12 <= seg[q] <= (1.0 - beta) * -log_inv + 1e-12),
            'expiry_growth': seg[p] >= lam * p / 3.0,
            'expiry_recovery': seg[p] >= math.log(constants.delta / 10.0) + float(np.max(seg[:p])),
        })

    free_growth = []
    bound_ends = [(r.time + r.p) for r in itinerary.records if r.p > 0]
    times = itinerary.return_times
    for end in bound_ends:
        later = [t for t in times if t > end]
        if later:
            n = later[0] - end
            free_growth.append(bool(L[later[0]] - L[end] >= math.log(constants.delta) + constants.lambda0 * n - 1e-12))

    critical = []
    for rec in itinerary.records:
        n = as_approx(rec.zeta).order
        if rec.position != 'critical' or rec.time + n > itinerary.T:
            continue
        log_growth = float(L[rec.time + n] - L[rec.time])
        critical.append({'time': rec.time, 'n': n, 'log_growth': log_growth,
                         'contracted': log_growth <= -8.0 * lam * n + 1e-12})

    keys = ('p_window', 'shadowing', 'fold_sandwich', 'expiry_growth', 'expiry_recovery')
    summary = {key: all(row[key] for row in rows) for key in keys}
    summary['free_growth'] = all(free_growth)
    summary['critical_contraction'] = all(row['contracted'] for row in critical)
    measured = [row['q_constant'] for row in rows if math.isfinite(row['q_constant'])]
    summary['q_constant'] = max(measured) if measured else None
    for key, ok in summary.items():
        if ok is False:
            logger.warning(f"recovery check '{key}' fails on the itinerary")
    return {'bindings': rows, 'free_growth': free_growth, 'critical': critical, 'summary': summary}


def bound_budget_check(itinerary: Itinerary, lam: float = None) -> List[bool]:
    """n_{i+1} - n_i - p_i <= 20 p_i / lambda for consecutive bound returns"""
    lam = Constants().lam if lam is None else lam
    bound = [r for r in itinerary.records if r.p > 0]
    out = []
    for cur, nxt in zip(bound, bound[1:]):
        out.append(nxt.time - cur.time - cur.p <= 20.0 * cur.p / lam)
    return out
