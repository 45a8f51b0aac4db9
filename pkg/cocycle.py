"""
2x2 cocycle analysis

Most contracting directions of derivative products, expansion and
regularity predicates on derivative histories, hyperbolic times and the
derivative history w_i of the critical orbit.
"""
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import stats

from config import NUMERICS
from henon_family import FamilyParams, Constants, apply, jacobian
from logger import (
    logger,
    DegenerateSingularValues,
    ExpansionHypothesisViolated,
    NoHyperbolicTimes,
    PreconditionError,
)

LOG2 = math.log(2.0)
_RESCALE_EXPONENT = 500


def most_contracting(M) -> np.ndarray:
    """
    Unit vector e minimizing |M e|, from the closed-form 2x2 SVD

    The sign is fixed so that e_y >= 0 (e_x > 0 when e is horizontal).
    """
    M = np.asarray(M, dtype=float)
    scale = float(np.max(np.abs(M)))
    if not np.isfinite(scale) or scale == 0.0:
        raise DegenerateSingularValues(f"matrix has no finite nonzero entries: {M.tolist()}")
    A = M / scale
    p = A[0, 0] ** 2 + A[1, 0] ** 2
    r = A[0, 1] ** 2 + A[1, 1] ** 2
    q = A[0, 0] * A[0, 1] + A[1, 0] * A[1, 1]

    lam_max = 0.5 * (p + r) + math.hypot(0.5 * (p - r), q)
    s1 = math.sqrt(lam_max)
    s2 = abs(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]) / s1
    if s1 - s2 <= NUMERICS['singular_gap'] * s1:
        raise DegenerateSingularValues(f"singular values {s1 * scale:.6g}, {s2 * scale:.6g} not separated")

    u1 = (q, lam_max - p)
    u2 = (lam_max - r, q)
    ux, uy = u1 if math.hypot(*u1) >= math.hypot(*u2) else u2
    norm = math.hypot(ux, uy)
    e = np.array([-uy / norm, ux / norm])
    if e[1] < 0.0 or (e[1] == 0.0 and e[0] < 0.0):
        e = -e
    return e


@dataclass
class CocycleHistory:
    """Matrices M_1..M_n along an orbit with normalized products M^(i) = M_i...M_1"""
    base: np.ndarray
    matrices: np.ndarray
    b: float = 0.0
    products: np.ndarray = field(init=False)
    log_scales: np.ndarray = field(init=False)
    log_dets: np.ndarray = field(init=False)

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float)
        n = len(self.matrices)
        self.products = np.empty((n, 2, 2))
        self.log_scales = np.empty(n)
        self.log_dets = np.empty(n)
        P = np.eye(2)
        log_scale = 0.0
        log_det = 0.0
        for i, Mi in enumerate(self.matrices):
            P = Mi @ P
            s = float(np.max(np.abs(P)))
            P = P / s
            log_scale += math.log(s)
            det = abs(Mi[0, 0] * Mi[1, 1] - Mi[0, 1] * Mi[1, 0])
            log_det += math.log(det) if det > 0.0 else -math.inf
            self.products[i] = P
            self.log_scales[i] = log_scale
            self.log_dets[i] = log_det

    def __len__(self):
        return len(self.matrices)

    @property
    def log_norms(self) -> np.ndarray:
        """log |M^(i)| for i = 1..n"""
        return np.log(np.linalg.norm(self.products, ord=2, axis=(-2, -1))) + self.log_scales

    @property
    def norms(self) -> np.ndarray:
        return np.exp(self.log_norms)


def cocycle_history(params: FamilyParams, z, n: int) -> CocycleHistory:
    """Derivative cocycle Df(z), Df(fz), ..., Df(f^{n-1} z)"""
    pts = np.empty((n, 2))
    current = np.asarray(z, dtype=float)
    for i in range(n):
        pts[i] = current
        current = apply(params, current)
    return CocycleHistory(np.asarray(z, dtype=float), jacobian(params, pts), b=params.b)


class ContractingReport(NamedTuple):
    directions: np.ndarray
    crosses: np.ndarray
    ratios: np.ndarray
    fitted_ratio: Optional[float]
    r_squared: Optional[float]
    image_log_norms: np.ndarray
    image_monotone: bool


def contracting_sequence(history: CocycleHistory, kappa: float = None) -> ContractingReport:
    """
    Most contracting directions e_i of M^(i) and their decay report

    Args:
        history: The cocycle
        kappa: Expansion rate required of |M^(i)|; defaults to b^(1/10)

    Returns:
        ContractingReport with e_1..e_n, |e_i x e_{i-1}| for i >= 2, those
        cross products divided by (b/kappa^2)^(i-1), the fitted geometric
        ratio, and log |M^(i) e_n| for i = 1..n
    """
    if kappa is None:
        kappa = history.b ** 0.1
    log_norms = history.log_norms
    if kappa > 0.0:
        required = np.arange(1, len(history) + 1) * math.log(kappa)
        bad = np.nonzero(log_norms < required - 1e-12)[0]
        if bad.size:
            i = int(bad[0]) + 1
            raise ExpansionHypothesisViolated(
                f"|M^({i})| = {math.exp(log_norms[i - 1]):.3e} < kappa^{i} = {kappa ** i:.3e}"
            )

    directions = np.array([most_contracting(P) for P in history.products])
    crosses = np.abs(directions[1:, 0] * directions[:-1, 1] - directions[1:, 1] * directions[:-1, 0])

    ratios = np.full(len(crosses), np.nan)
    if kappa > 0.0 and history.b > 0.0:
        base = history.b / kappa ** 2
        ratios = crosses / base ** np.arange(1, len(crosses) + 1)

    fitted_ratio, r_squared = None, None
    idx = np.nonzero(crosses > 1e-14)[0]
    if idx.size >= 2:
        fit = stats.linregress(idx.astype(float), np.log(crosses[idx]))
        fitted_ratio = math.exp(fit.slope)
        r_squared = fit.rvalue ** 2

    e_n = directions[-1]
    image_log_norms = np.log(np.linalg.norm(history.products @ e_n, axis=-1)) + history.log_scales
    monotone = bool(np.all(np.diff(image_log_norms) <= 1e-9))
    return ContractingReport(directions, crosses, ratios, fitted_ratio, r_squared,
                             image_log_norms, monotone)


def derivative_log_norms(params: FamilyParams, z, v, n: int) -> np.ndarray:
    """log |Df^i(z) v| for i = 0..n"""
    out = np.empty(n + 1)
    vec = np.asarray(v, dtype=float)
    norm = float(np.hypot(*vec))
    if norm == 0.0:
        raise PreconditionError("tangent vector must be nonzero")
    vec = vec / norm
    out[0] = math.log(norm)
    current = np.asarray(z, dtype=float)
    for i in range(1, n + 1):
        vec = jacobian(params, current) @ vec
        current = apply(params, current)
        g = float(np.hypot(*vec))
        out[i] = out[i - 1] + (math.log(g) if g > 0.0 else -math.inf)
        if g > 0.0:
            vec = vec / g
    return out


def is_kappa_expanding(params: FamilyParams, z, v, kappa: float, n: int):
    """
    Whether |Df^i v| >= kappa^i |v| for 1 <= i <= n

    Returns:
        (True, None) or (False, first failing i)
    """
    if n <= 0:
        return True, None
    L = derivative_log_norms(params, z, v, n)
    required = L[0] + np.arange(1, n + 1) * math.log(kappa)
    bad = np.nonzero(L[1:] < required)[0]
    if bad.size:
        return False, int(bad[0]) + 1
    return True, None


def is_regular_norms(log_norms, r: float, delta: float) -> bool:
    """|Df^m v| >= r delta |Df^i v| for all 0 <= i < m, on a log-norm sequence L[0..m]"""
    L = np.asarray(log_norms, dtype=float)
    if len(L) < 2:
        return True
    return bool(L[-1] >= math.log(r * delta) + np.max(L[:-1]))


def is_regular(params: FamilyParams, z, v, r: float, m: int, delta: float) -> bool:
    if m < 1:
        raise PreconditionError(f"m must be at least 1, got {m}")
    return is_regular_norms(derivative_log_norms(params, z, v, m), r, delta)


class HyperbolicTimes(NamedTuple):
    times: List[int]
    m: int
    spacing_relaxed: bool


def _expanding_from(L: np.ndarray, mu: int, m: int, log_kappa: float) -> bool:
    steps = np.arange(1, m - mu + 1)
    return bool(np.all(L[mu + 1:m + 1] - L[mu] >= steps * log_kappa - 1e-12))


def hyperbolic_times_from_lognorms(log_norms, m: int, delta: float, kappa: float) -> HyperbolicTimes:
    """
    Well-distributed hyperbolic times mu_1 < ... < mu_s on a log-norm sequence

    Depth-first search over d = m - mu starting from the smallest admissible
    d_s, each earlier time taken from [4d, 16d]; the search stops once
    mu < m/2 with at least two times. When m is too short for the spacing
    window, [0, m - d_s] is returned with spacing_relaxed set.
    """
    L = np.asarray(log_norms, dtype=float)
    if len(L) < m + 1:
        raise PreconditionError(f"log-norm sequence covers {len(L) - 1} steps, need {m}")
    log_inv_delta = math.log(1.0 / delta)
    if m < log_inv_delta:
        raise PreconditionError(f"m = {m} is below log(1/delta) = {log_inv_delta:.3f}")
    if not is_regular_norms(L[:m + 1], 1.0 / 100.0, delta):
        raise NoHyperbolicTimes(f"vector is not 1/100-regular up to m = {m}")

    log_kappa = math.log(kappa)
    d_lo = max(1, math.ceil(log_inv_delta / 2.0))
    d_hi = min(m, math.floor(log_inv_delta))

    def search(chain):
        d = chain[-1]
        if d > m / 2.0 and len(chain) >= 2:
            return chain
        for d_next in range(4 * d, min(16 * d, m) + 1):
            if _expanding_from(L, m - d_next, m, log_kappa):
                found = search(chain + [d_next])
                if found:
                    return found
        return None

    for d_s in range(d_lo, d_hi + 1):
        if not _expanding_from(L, m - d_s, m, log_kappa):
            continue
        chain = search([d_s])
        if chain:
            return HyperbolicTimes(sorted(m - d for d in chain), m, False)

    for d_s in range(d_lo, d_hi + 1):
        if d_s < m and _expanding_from(L, 0, m, log_kappa) and _expanding_from(L, m - d_s, m, log_kappa):
            logger.debug(f"hyperbolic times for m={m} use relaxed spacing")
            return HyperbolicTimes([0, m - d_s], m, True)

    raise NoHyperbolicTimes(f"no admissible hyperbolic times up to m = {m}")


def hyperbolic_times(params: FamilyParams, z, v, m: int, constants: Constants = None) -> HyperbolicTimes:
    constants = constants or Constants()
    L = derivative_log_norms(params, z, v, m)
    return hyperbolic_times_from_lognorms(L, m, constants.delta, constants.kappa_quarter)


def verify_hyperbolic_times(ht: HyperbolicTimes, log_norms, delta: float, kappa: float) -> dict:
    """Re-check expansion, spacing and placement of a hyperbolic-time list"""
    L = np.asarray(log_norms, dtype=float)
    m, mu = ht.m, ht.times
    log_inv_delta = math.log(1.0 / delta)
    expansion = all(_expanding_from(L, t, m, math.log(kappa)) for t in mu)
    spacing = all(
        1.0 / 16.0 <= (m - mu[j + 1]) / (m - mu[j]) <= 1.0 / 4.0
        for j in range(len(mu) - 1)
    )
    placement = len(mu) >= 2 and mu[0] < m / 2.0 and m - log_inv_delta <= mu[-1] <= m - log_inv_delta / 2.0
    return {'expansion': expansion, 'spacing': spacing, 'placement': placement}


class DerivativeHistory:
    """
    w_i(z) = Df^{i-1}(fz)(1, 0) for i = 1..n, 1-indexed

    Vectors are kept as a mantissa and a binary exponent so very long
    histories neither overflow nor lose exactness under powers of two.
    """

    def __init__(self, orbit: np.ndarray, mantissas: np.ndarray, exponents: np.ndarray,
                 diverged_at: Optional[int] = None):
        self.orbit = orbit
        self.mantissas = mantissas
        self.exponents = exponents
        self.diverged_at = diverged_at

    def __len__(self):
        return len(self.mantissas)

    def _check(self, i: int):
        if not 1 <= i <= len(self):
            raise IndexError(f"w_{i} not available (history has {len(self)} terms)")

    def vector(self, i: int) -> np.ndarray:
        self._check(i)
        return np.ldexp(self.mantissas[i - 1], int(self.exponents[i - 1]))

    def log_norm(self, i: int) -> float:
        self._check(i)
        return math.log(math.hypot(*self.mantissas[i - 1])) + int(self.exponents[i - 1]) * LOG2

    def norm(self, i: int) -> float:
        self._check(i)
        return math.ldexp(math.hypot(*self.mantissas[i - 1]), int(self.exponents[i - 1]))

    def log_norms(self) -> np.ndarray:
        """log |w_i| for i = 1..len"""
        return np.log(np.hypot(self.mantissas[:, 0], self.mantissas[:, 1])) + self.exponents * LOG2


def wi_sequence(params: FamilyParams, zeta, n: int) -> DerivativeHistory:
    """Derivative history of the orbit of f(zeta), truncated if the orbit overflows"""
    if n < 1:
        raise PreconditionError(f"n must be at least 1, got {n}")
    bound = NUMERICS['overflow_bound']
    orbit = np.empty((n + 1, 2))
    orbit[0] = np.asarray(zeta, dtype=float)
    mantissas = np.empty((n, 2))
    exponents = np.zeros(n, dtype=np.int64)

    vec = np.array([1.0, 0.0])
    exponent = 0
    current = apply(params, orbit[0])
    diverged_at = None
    count = n
    for i in range(n):
        orbit[i + 1] = current
        mantissas[i] = vec
        exponents[i] = exponent
        if i == n - 1:
            break
        if not np.all(np.abs(current) <= bound):
            diverged_at = i + 1
            count = i + 1
            break
        vec = jacobian(params, current) @ vec
        current = apply(params, current)
        peak = float(np.max(np.abs(vec)))
        if peak > 2.0 ** _RESCALE_EXPONENT or 0.0 < peak < 2.0 ** -_RESCALE_EXPONENT:
            shift = math.frexp(peak)[1]
            vec = np.ldexp(vec, -shift)
            exponent += shift

    if diverged_at is not None:
        logger.debug(f"critical orbit overflowed after {diverged_at} steps")
    return DerivativeHistory(orbit[:count + 1], mantissas[:count], exponents[:count], diverged_at)


def slope_report(params: FamilyParams, points, delta: float) -> dict:
    """
    Slopes of e_1 = most_contracting(Df) at sampled points

    Returns the minimum slope outside I(delta) and outside I(sqrt b), each
    against the bound 1/(10 sqrt b), and the measured constant
    min(slope * sqrt b) outside I(sqrt b). The slope is close to
    2a|x| / sqrt b, so outside I(sqrt b) the bound only holds once
    |x| >= 1/(20a); holds_outside_sqrt_b reports what the points show.
    """
    pts = np.asarray(points, dtype=float)
    J = jacobian(params, pts)
    slopes = np.empty(len(pts))
    for k, Jk in enumerate(J):
        e = most_contracting(Jk)
        slopes[k] = math.inf if e[0] == 0.0 else abs(e[1] / e[0])
    sb = params.sqrt_b
    outside_delta = np.abs(pts[:, 0]) >= delta
    outside_sqrt_b = np.abs(pts[:, 0]) >= sb
    min_delta = float(np.min(slopes[outside_delta])) if outside_delta.any() else math.inf
    min_sqrt_b = float(np.min(slopes[outside_sqrt_b])) if outside_sqrt_b.any() else math.inf
    bound = 1.0 / (10.0 * sb) if sb > 0 else math.inf
    return {
        'min_slope_outside_delta': min_delta,
        'min_slope_outside_sqrt_b': min_sqrt_b,
        'bound': bound,
        'holds_outside_delta': min_delta >= bound,
        'holds_outside_sqrt_b': min_sqrt_b >= bound,
        'measured_constant_outside_sqrt_b': min_sqrt_b * sb if math.isfinite(min_sqrt_b) else math.inf,
    }
