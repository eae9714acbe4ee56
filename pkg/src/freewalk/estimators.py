"""Monte Carlo estimators turning the limit theorems into desk-scale checks.

Every estimator is a pure function of (inputs, seed): trajectory i of an
experiment runs on RNG stream i (or a documented affine reallocation for
multi-walk experiments), results are reduced in trajectory order, and
thread count never changes the output.

Decay rates are never asserted against theoretical constants (the
theorems' bounds are not effective); fits report sign, monotonicity and
goodness of fit only.  Confidence intervals are Wilson for proportions
and normal-approximation for means, and are recorded in outputs so
acceptance thresholds stay auditable.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .decompositions import (
    _kak_padic,
    exterior_square_atoms,
    scaled_identity,
    scaled_log_norm,
    scaled_log_vector_norm,
    scaled_multiply,
    scaled_premultiply,
)
from .errors import DomainError, UsageError
from .fields import FieldSpec, abs_value
from .linalg import (
    as_vector,
    dist_point_hyperplane,
    exact_inv,
    fubini_study,
    normalize_representative,
    wedge_pairs,
)
from .pingpong import (
    ContractionData,
    cross_margin_matrix,
    pole_pair,
    tuple_failure_reasons,
)
from .walks import WalkMeasure, _fast_scaled_products, sample_increment_indices

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError("wilson_interval needs at least one trial")
    z2 = Z95 * Z95
    p = successes / trials
    denom = 1 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = (Z95 / denom) * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def _mean_se(values) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _pmap(fn, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class GeometricFit:
    """Weighted least squares of log(value) against n."""

    log_rho: float
    intercept: float
    r_squared: float
    points_used: int

    @property
    def rho_hat(self) -> float:
        return math.exp(self.log_rho)


def fit_geometric_decay(ns, values, widths) -> GeometricFit | None:
    """WLS fit of log(value) on n, weights = inverse CI widths.

    Points with value outside (0, 1) are dropped; returns None when fewer
    than two usable points remain.
    """
    pts = [
        (float(n), math.log(v), 1.0 / max(w, 1e-12))
        for n, v, w in zip(ns, values, widths)
        if 0.0 < v < 1.0
    ]
    if len(pts) < 2:
        return None
    sw = sum(w for _, _, w in pts)
    sx = sum(w * x for x, _, w in pts)
    sy = sum(w * y for _, y, w in pts)
    sxx = sum(w * x * x for x, _, w in pts)
    sxy = sum(w * x * y for x, y, w in pts)
    denom = sw * sxx - sx * sx
    if denom == 0:
        return None
    slope = (sw * sxy - sx * sy) / denom
    intercept = (sxx * sy - sx * sxy) / denom
    ybar = sy / sw
    ss_tot = sum(w * (y - ybar) ** 2 for _, y, w in pts)
    ss_res = sum(w * (y - intercept - slope * x) ** 2 for x, y, w in pts)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return GeometricFit(log_rho=slope, intercept=intercept, r_squared=r2, points_used=len(pts))


@dataclass(frozen=True)
class DecayEstimate:
    """A grid of walk lengths with empirical values, CIs and a geometric fit."""

    kind: str  # "proportion" or "mean"
    grid: tuple
    p_hat: tuple
    ci_lo: tuple
    ci_hi: tuple
    reps: int
    fit: GeometricFit | None
    extra: dict = dc_field(default_factory=dict)


def _decay_from_means(grid, per_point_values, reps, extra=None) -> DecayEstimate:
    means, los, his = [], [], []
    for vals in per_point_values:
        m, se = _mean_se(vals)
        means.append(m)
        los.append(m - Z95 * se)
        his.append(m + Z95 * se)
    fit = fit_geometric_decay(grid, means, [hi - lo for lo, hi in zip(los, his)])
    return DecayEstimate(
        kind="mean",
        grid=tuple(grid),
        p_hat=tuple(means),
        ci_lo=tuple(los),
        ci_hi=tuple(his),
        reps=reps,
        fit=fit,
        extra=extra or {},
    )


def _decay_from_counts(grid, counts, reps, extra=None) -> DecayEstimate:
    ps, los, his = [], [], []
    for c in counts:
        ps.append(c / reps)
        lo, hi = wilson_interval(c, reps)
        los.append(lo)
        his.append(hi)
    fit = fit_geometric_decay(grid, ps, [hi - lo for lo, hi in zip(los, his)])
    return DecayEstimate(
        kind="proportion",
        grid=tuple(grid),
        p_hat=tuple(ps),
        ci_lo=tuple(los),
        ci_hi=tuple(his),
        reps=reps,
        fit=fit,
        extra=extra or {},
    )


# ---------------------------------------------------------------------------
# Lyapunov exponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovEstimate:
    """Estimates of lambda_1 and lambda_1 + lambda_2 with normal CIs."""

    lambda1_hat: float
    lambda12_hat: float
    gap_hat: float  # 2*lambda1 - lambda12 = lambda1 - lambda2
    ci_half_widths: tuple  # (lambda1, lambda12, gap)
    n: int
    reps: int
    d: int

    @property
    def lambda2_hat(self) -> float:
        return self.lambda12_hat - self.lambda1_hat


def lyapunov_estimate(
    measure: WalkMeasure, n: int, reps: int, seed: int, threads: int = 1
) -> LyapunovEstimate:
    """lambda_1 from (1/n) log ||S_n||, lambda_1 + lambda_2 from the exterior square."""
    if n < 10 or reps < 10:
        raise UsageError("lyapunov_estimate needs n >= 10 and reps >= 10")
    field = measure.field
    wedges = exterior_square_atoms(measure.atoms)
    wedge_d = len(wedge_pairs(measure.d))

    def one_rep(rep: int) -> tuple[float, float]:
        idx = sample_increment_indices(measure, n, seed, rep)
        s = scaled_identity(measure.d, field)
        w = scaled_identity(wedge_d, field) if wedge_d else None
        for i in idx:
            s = scaled_premultiply(measure.atoms[i], s, field)
            if w is not None:
                w = scaled_premultiply(wedges[i], w, field)
        l1 = scaled_log_norm(s, field) / n
        l12 = scaled_log_norm(w, field) / n if w is not None else 0.0
        return l1, l12

    rows = _pmap(one_rep, range(reps), threads)
    l1s = [r[0] for r in rows]
    l12s = [r[1] for r in rows]
    m1, se1 = _mean_se(l1s)
    m12, se12 = _mean_se(l12s)
    gaps = [2 * a - b for a, b in zip(l1s, l12s)]
    mg, seg = _mean_se(gaps)
    return LyapunovEstimate(
        lambda1_hat=m1,
        lambda12_hat=m12,
        gap_hat=mg,
        ci_half_widths=(Z95 * se1, Z95 * se12, Z95 * seg),
        n=n,
        reps=reps,
        d=measure.d,
    )


@dataclass(frozen=True)
class GapVerdict:
    positive: bool
    gap: float
    half_width: float
    sl2_balanced: bool | None  # |lambda1 + lambda2| <= CI, only meaningful for d = 2


def gap_test(est: LyapunovEstimate) -> GapVerdict:
    """Positive iff the top Lyapunov gap clears its confidence interval."""
    hw = est.ci_half_widths[2]
    sl2 = None
    if est.d == 2:
        sl2 = abs(est.lambda12_hat) <= max(est.ci_half_widths[1], 1e-12)
    return GapVerdict(positive=est.gap_hat - hw > 0, gap=est.gap_hat, half_width=hw, sl2_balanced=sl2)


def moment_ratio(measure: WalkMeasure, eps: float, n: int, reps: int, seed: int) -> float:
    """max over basis x of (mean (||S_n|| / ||S_n x||)**eps)**(1/n).

    Near 1 for strongly irreducible contracting measures; a reducible
    point mass is the documented counterexample.
    """
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    field = measure.field
    d = measure.d
    basis = [as_vector([1 if i == j else 0 for j in range(d)], field) for i in range(d)]
    sums = [0.0] * d
    for rep in range(reps):
        idx = sample_increment_indices(measure, n, seed, rep)
        _, s = _fast_scaled_products(measure, idx, want_left=False)
        log_norm = scaled_log_norm(s, field)
        for i, e in enumerate(basis):
            sums[i] += math.exp(eps * (log_norm - scaled_log_vector_norm(s, e, field)))
    means = [t / reps for t in sums]
    return max(math.exp(math.log(m) / n) for m in means)


# ---------------------------------------------------------------------------
# Exact-replay projective distances
# ---------------------------------------------------------------------------


def _fraction_log(q: Fraction) -> float:
    return math.log(q.numerator) - math.log(q.denominator)


def _exact_delta(x, y, field: FieldSpec) -> float:
    """delta([x],[y]) for exact rational vectors, safe far below 1e-16.

    Computed from the exact squared distance via big-integer logs, so
    exponentially small separations keep full relative precision.
    """
    pairs = wedge_pairs(len(x))
    w = [x[i] * y[j] - x[j] * y[i] for i, j in pairs]
    if all(c == 0 for c in w):
        return 0.0
    if field.is_archimedean:
        num = sum((c * c for c in w), Fraction(0))
        den = sum((c * c for c in x), Fraction(0)) * sum((c * c for c in y), Fraction(0))
        delta_sq = num / den
    else:
        num = max(abs_value(c, field) for c in w)
        den = max(abs_value(c, field) for c in x) * max(abs_value(c, field) for c in y)
        delta_sq = (num / den) ** 2
    return math.exp(0.5 * _fraction_log(delta_sq))


def _exact_identity(d: int) -> np.ndarray:
    return np.array(
        [[Fraction(1) if i == j else Fraction(0) for j in range(d)] for i in range(d)],
        dtype=object,
    )


def direction_convergence(
    measure: WalkMeasure,
    x,
    grid,
    horizon: int,
    reps: int,
    seed: int,
    threads: int = 1,
) -> DecayEstimate:
    """Mean delta(M_n[x], M_N[x]) per grid n, N the horizon checkpoint.

    The horizon direction proxies the almost-sure limit direction; it
    must dominate the grid (N >= 2 max grid).  Products are replayed in
    exact arithmetic so the curve stays meaningful below float precision.
    """
    grid = sorted(grid)
    if horizon < 2 * max(grid):
        raise UsageError("horizon too small: need horizon >= 2 * max(grid)")
    field = measure.field
    x_exact = np.array([Fraction(v) for v in x], dtype=object)
    cps = set(grid) | {horizon}

    def one_rep(rep: int) -> list[float]:
        idx = sample_increment_indices(measure, horizon, seed, rep)
        prod = _exact_identity(measure.d)
        dirs = {}
        for i, ai in enumerate(idx, start=1):
            prod = prod @ measure.exact_atoms[ai]
            if i in cps:
                dirs[i] = prod @ x_exact
        return [_exact_delta(dirs[n], dirs[horizon], field) for n in grid]

    rows = _pmap(one_rep, range(reps), threads)
    return _decay_from_means(grid, list(zip(*rows)), reps, extra={"horizon": horizon})


@dataclass(frozen=True)
class KakFrameConvergence:
    k_curve: DecayEstimate  # delta(k(M_n) e1, k(M_N) e1)
    u_curve: DecayEstimate  # delta(U_n^{-1} e1*, U_N^{-1} e1*), U from kak(S_n)


def _top_left_direction(m: np.ndarray, z: np.ndarray) -> np.ndarray:
    # three power steps on M M^T: angular error O((a2/a1)^6), far below
    # the O(a2/a1) scale of the frame-convergence curves
    w = z
    for _ in range(3):
        w = m @ (m.T @ w)
    return w


def _top_right_direction(m: np.ndarray, z: np.ndarray) -> np.ndarray:
    w = z
    for _ in range(3):
        w = m.T @ (m @ w)
    return w


def kak_convergence(
    measure: WalkMeasure,
    grid,
    horizon: int,
    reps: int,
    seed: int,
    threads: int = 1,
) -> KakFrameConvergence:
    """Decay of the KAK frame directions of M_n (k-part) and S_n (u-part)."""
    grid = sorted(grid)
    if horizon < 2 * max(grid):
        raise UsageError("horizon too small: need horizon >= 2 * max(grid)")
    field = measure.field
    d = measure.d
    z = np.array([Fraction(3) ** j for j in range(d)], dtype=object)
    cps = set(grid) | {horizon}

    def one_rep(rep: int):
        idx = sample_increment_indices(measure, horizon, seed, rep)
        m = _exact_identity(d)
        s = _exact_identity(d)
        vs, hs = {}, {}
        for i, ai in enumerate(idx, start=1):
            a = measure.exact_atoms[ai]
            m = m @ a
            s = a @ s
            if i in cps:
                vs[i] = _top_left_direction(m, z)
                hs[i] = _top_right_direction(s, z)
        kd = [_exact_delta(vs[n], vs[horizon], field) for n in grid]
        ud = [_exact_delta(hs[n], hs[horizon], field) for n in grid]
        return kd, ud

    rows = _pmap(one_rep, range(reps), threads)
    k_cols = list(zip(*[r[0] for r in rows]))
    u_cols = list(zip(*[r[1] for r in rows]))
    extra = {"horizon": horizon}
    return KakFrameConvergence(
        k_curve=_decay_from_means(grid, k_cols, reps, extra=extra),
        u_curve=_decay_from_means(grid, u_cols, reps, extra=extra),
    )


# ---------------------------------------------------------------------------
# Asymptotic independence of the KAK frames
# ---------------------------------------------------------------------------

HOLDER_KINDS = ("dist_to_point", "dist_to_hyperplane", "one_minus_dist_to_point")


@dataclass(frozen=True)
class HolderTestFunction:
    """A Holder test function from the fixed distance-based catalog.

    Each catalog entry is built from 1-Lipschitz projective distance
    factors, so its Holder norm at exponent e is bounded by the recorded
    constant (sqrt(2) for hyperplane distances, 1 otherwise).
    """

    kind: str
    reference: tuple
    exponent: float
    holder_norm_bound: float
    field: FieldSpec

    def evaluate(self, x) -> float:
        ref = as_vector(self.reference, self.field)
        if self.kind == "dist_to_point":
            return float(fubini_study(x, ref, self.field)) ** self.exponent
        if self.kind == "dist_to_hyperplane":
            return float(dist_point_hyperplane(x, ref, self.field)) ** self.exponent
        if self.kind == "one_minus_dist_to_point":
            return 1.0 - float(fubini_study(x, ref, self.field)) ** self.exponent
        raise DomainError(f"unknown Holder catalog kind {self.kind!r}")


def holder_function(kind: str, reference, field: FieldSpec, exponent: float = 1.0) -> HolderTestFunction:
    if kind not in HOLDER_KINDS:
        raise DomainError(f"Holder catalog has {HOLDER_KINDS}, not {kind!r}")
    if not 0 < exponent <= 1:
        raise DomainError("Holder exponent must lie in (0, 1]")
    bound = math.sqrt(2.0) if kind == "dist_to_hyperplane" else 1.0
    return HolderTestFunction(
        kind=kind,
        reference=tuple(reference),
        exponent=exponent,
        holder_norm_bound=bound,
        field=field,
    )


@dataclass(frozen=True)
class IndependenceResult:
    discrepancy: float  # |E(phi1 phi2) - E(phi1) E(phi2)|
    se: float  # influence-function SE of the signed covariance
    mean_joint: float
    mean_phi1: float
    mean_phi2: float
    n: int
    reps: int


def _kak_frame_classes(unit: np.ndarray, field: FieldSpec):
    """(K e1, U^{-1} e1*) classes of a matrix, scale-invariant."""
    if field.is_archimedean:
        k, _, u = np.linalg.svd(np.asarray(unit, dtype=float))
        return (
            normalize_representative(k[:, 0], field),
            normalize_representative(u[0, :], field),
        )
    dec = _kak_padic(unit, field)
    return dec.v, dec.h


def independence_test(
    measure: WalkMeasure,
    phi1: HolderTestFunction,
    phi2: HolderTestFunction,
    n: int,
    reps: int,
    seed: int,
    threads: int = 1,
) -> IndependenceResult:
    """Empirical covariance gap of phi1(K_n e1) and phi2(U_n^{-1} e1*) along S_n."""
    field = measure.field

    def one_rep(rep: int):
        idx = sample_increment_indices(measure, n, seed, rep)
        _, s = _fast_scaled_products(measure, idx, want_left=False)
        x1, x2 = _kak_frame_classes(s.unit, field)
        a = phi1.evaluate(x1)
        b = phi2.evaluate(x2)
        return a, b

    rows = _pmap(one_rep, range(reps), threads)
    m1 = sum(r[0] for r in rows) / reps
    m2 = sum(r[1] for r in rows) / reps
    mj = sum(r[0] * r[1] for r in rows) / reps
    # influence function of the covariance functional
    infl = [(a * b - mj) - m2 * (a - m1) - m1 * (b - m2) for a, b in rows]
    var = sum(v * v for v in infl) / max(reps - 1, 1)
    return IndependenceResult(
        discrepancy=abs(mj - m1 * m2),
        se=math.sqrt(var / reps),
        mean_joint=mj,
        mean_phi1=m1,
        mean_phi2=m2,
        n=n,
        reps=reps,
    )


# ---------------------------------------------------------------------------
# Invariant measure regularity probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvariantProbeResult:
    fractions: tuple  # per hyperplane: P(delta(M_n[e1], H) <= t**n)
    ci_lo: tuple
    ci_hi: tuple
    sup_fraction: float
    t: float
    n: int
    reps: int


def invariant_measure_probe(
    measure: WalkMeasure, n: int, reps: int, hyperplanes, t: float, seed: int
) -> InvariantProbeResult:
    """Tail mass of the limit direction near each supplied hyperplane."""
    if not 0 < t < 1:
        raise DomainError("t must lie in (0, 1)")
    field = measure.field
    covs = [as_vector(h, field) for h in hyperplanes]
    x0 = as_vector([1] + [0] * (measure.d - 1), field)
    threshold = t**n
    counts = [0] * len(covs)
    for rep in range(reps):
        idx = sample_increment_indices(measure, n, seed, rep)
        left, _ = _fast_scaled_products(measure, idx, want_right=False)
        direction = left.unit @ x0
        for i, f in enumerate(covs):
            if dist_point_hyperplane(direction, f, field) <= threshold:
                counts[i] += 1
    fracs, los, his = [], [], []
    for c in counts:
        fracs.append(c / reps)
        lo, hi = wilson_interval(c, reps)
        los.append(lo)
        his.append(hi)
    return InvariantProbeResult(
        fractions=tuple(fracs),
        ci_lo=tuple(los),
        ci_hi=tuple(his),
        sup_fraction=max(fracs) if fracs else 0.0,
        t=t,
        n=n,
        reps=reps,
    )


# ---------------------------------------------------------------------------
# Ping-pong failure decay
# ---------------------------------------------------------------------------

FAILURE_KEYS = ("own-contraction", "own-separation", "cross-margin")


def _inverse_atoms(measure: WalkMeasure) -> tuple:
    if measure.field.is_archimedean:
        return tuple(np.linalg.inv(np.asarray(a, dtype=float)) for a in measure.atoms)
    return tuple(exact_inv(a) for a in measure.exact_atoms)


def _walk_poles(measure: WalkMeasure, idx, inv_atoms, wedges, inv_wedges):
    """Contraction data of (S_n, S_n^{-1}) along one increment sequence.

    Directions come from the SVD of the scaled unit part; the singular
    value ratios use ||wedge(g)|| / ||g||**2 on scaled log products, which
    stays fully accurate when the true ratio is far below float precision.
    The p-adic route is exact throughout.
    """
    field = measure.field
    if not field.is_archimedean:
        _, s = _fast_scaled_products(measure, idx, want_left=False)
        return pole_pair(s.unit, field, unimodular=False)
    d = measure.d
    wedge_d = len(wedge_pairs(d))
    s = scaled_identity(d, field)
    s_inv = scaled_identity(d, field)
    w = scaled_identity(wedge_d, field)
    w_inv = scaled_identity(wedge_d, field)
    for i in idx:
        s = scaled_premultiply(measure.atoms[i], s, field)
        s_inv = scaled_multiply(s_inv, inv_atoms[i], field)
        w = scaled_premultiply(wedges[i], w, field)
        w_inv = scaled_multiply(w_inv, inv_wedges[i], field)
    k, _, u = np.linalg.svd(s.unit)
    v_p = normalize_representative(k[:, 0], field)
    h_p = normalize_representative(u[0, :], field)
    v_m = normalize_representative(u[d - 1, :], field)
    h_m = normalize_representative(k[:, d - 1], field)
    ratio_p = math.exp(scaled_log_norm(w, field) - 2 * scaled_log_norm(s, field))
    ratio_m = math.exp(scaled_log_norm(w_inv, field) - 2 * scaled_log_norm(s_inv, field))
    plus = ContractionData(
        v=v_p, h=h_p, ratio=ratio_p, separation=dist_point_hyperplane(v_p, h_p, field)
    )
    minus = ContractionData(
        v=v_m, h=h_m, ratio=ratio_m, separation=dist_point_hyperplane(v_m, h_m, field)
    )
    return plus, minus


def _pole_caches(measure: WalkMeasure):
    inv_atoms = _inverse_atoms(measure)
    wedges = exterior_square_atoms(measure.atoms)
    inv_wedges = exterior_square_atoms(inv_atoms)
    return inv_atoms, wedges, inv_wedges


def pingpong_decay(
    measure: WalkMeasure,
    measure2: WalkMeasure,
    r_base: float,
    eps_base: float,
    grid,
    reps: int,
    seed: int,
    threads: int = 1,
) -> DecayEstimate:
    """P(the pair (S_n, S'_n) fails the ping-pong pair test at r_base**n, eps_base**n).

    Thresholds are evaluated at every grid point; points where
    r_base**n <= 2 * eps_base**n cannot support the freeness
    interpretation and are marked invalid in extra["thresholds_valid"]
    (the raw inequalities are still scored there).
    """
    if not 0 < eps_base < r_base < 1:
        raise DomainError("need 0 < eps_base < r_base < 1")
    grid = sorted(grid)
    field = measure.field
    caches1 = _pole_caches(measure)
    caches2 = _pole_caches(measure2)

    def one_task(task: tuple[int, int]):
        gi, rep = task
        n = grid[gi]
        base = 2 * (gi * reps + rep)
        idx1 = sample_increment_indices(measure, n, seed, base)
        idx2 = sample_increment_indices(measure2, n, seed, base + 1)
        poles = list(_walk_poles(measure, idx1, *caches1))
        poles.extend(_walk_poles(measure2, idx2, *caches2))
        margins = cross_margin_matrix(poles, field)
        return gi, tuple_failure_reasons(poles, margins, r_base**n, eps_base**n)

    tasks = [(gi, rep) for gi in range(len(grid)) for rep in range(reps)]
    results = _pmap(one_task, tasks, threads)
    counts = [0] * len(grid)
    breakdown = {k: [0] * len(grid) for k in FAILURE_KEYS}
    for gi, fails in results:
        if fails:
            counts[gi] += 1
        for k in fails:
            breakdown[k][gi] += 1
    extra = {
        "breakdown": breakdown,
        "thresholds_valid": [r_base**n > 2 * eps_base**n for n in grid],
        "r": [r_base**n for n in grid],
        "eps": [eps_base**n for n in grid],
        "r_base": r_base,
        "eps_base": eps_base,
    }
    return _decay_from_counts(grid, counts, reps, extra=extra)


@dataclass(frozen=True)
class TupleDecayResult:
    failure_fraction: float
    failures: int
    reps: int
    l: int
    n: int
    r: float
    eps: float
    prediction: float | None  # union bound l(l-1) rho_hat**n
    prediction_se: float | None

    @property
    def within_prediction(self) -> bool | None:
        if self.prediction is None:
            return None
        return self.failure_fraction <= self.prediction + 2 * (self.prediction_se or 0.0)


def tuple_decay(
    measure: WalkMeasure,
    l: int,
    r: float,
    eps: float,
    n: int,
    reps: int,
    seed: int,
    rho_hat: float | None = None,
    threads: int = 1,
) -> TupleDecayResult:
    """Failure fraction of the ping-pong l-tuple test at time n.

    When rho_hat (a fitted pair-failure rate) is given, also reports the
    union-bound prediction l(l-1) rho_hat**n with its binomial SE.
    """
    if l < 2:
        raise DomainError("tuple size l must be at least 2")
    field = measure.field
    caches = _pole_caches(measure)

    def one_rep(rep: int) -> bool:
        poles = []
        for w in range(l):
            idx = sample_increment_indices(measure, n, seed, rep * l + w)
            poles.extend(_walk_poles(measure, idx, *caches))
        margins = cross_margin_matrix(poles, field)
        return bool(tuple_failure_reasons(poles, margins, r, eps))

    results = _pmap(one_rep, range(reps), threads)
    failures = sum(1 for f in results if f)
    prediction = None
    prediction_se = None
    if rho_hat is not None:
        prediction = min(1.0, l * (l - 1) * rho_hat**n)
        prediction_se = math.sqrt(max(prediction * (1 - prediction), 1e-12) / reps)
    return TupleDecayResult(
        failure_fraction=failures / reps,
        failures=failures,
        reps=reps,
        l=l,
        n=n,
        r=r,
        eps=eps,
        prediction=prediction,
        prediction_se=prediction_se,
    )
