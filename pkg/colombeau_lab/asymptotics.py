"""
ε-asymptotics of representatives along smoothing kernels.

A sweep evaluates, for every ε of a geometric grid, the h-norm supremum over a
compact box K of p ↦ L_{X_1}...L_{X_l}(d3^j u(Φ(ε, p), p, A)(B_1, ..., B_j))
and fits the log-log slope of those suprema. Moderateness and negligibility
verdicts are built from batteries of sweeps and are relative to the battery
that produced them.
"""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional

import numpy as np
from scipy import optimize, stats

from . import numerics
from .basic_space import Restricted, directional, hat_lie, saturate
from .exceptions import BatteryError, ValenceError
from .geometry import Box, RiemannianMetric, SmoothTensorField, as_points, lie_word_field
from .kernels import build_kernel, evaluate_kernel
from .transport import core_contains, kernel_contains
from .utils import kernel_order_map, lab_setting

logger = logging.getLogger(__name__)

DEFAULT_EPS_GRID = tuple(2.0 ** -k for k in range(3, 13))
OSCILLATION_RESIDUAL = 5e-3
FOCUS_OFFSETS = np.linspace(-1.5, 1.5, 61)
MIN_FIT_POINTS = 4
DEFAULT_POINTS_PER_AXIS = 31


def minimal_kernel_order(m):
    """
    k_of(m) = m: the smallest kernel order whose moment defect is O(ε^{m+1}).
    """
    return int(m)


# Order estimation


class OrderEstimate(NamedTuple):
    slope: float
    ci: float
    intercept: float = 0.0
    flags: tuple = ()
    used: int = 0
    steepest: float = np.inf


class OrderReport(NamedTuple):
    test_id: str
    samples: tuple
    estimate: OrderEstimate
    verdict: str = "indeterminate"
    shrunk: tuple = ()
    argmax: tuple = ()

    @property
    def fitted_slope(self):
        return self.estimate.slope

    @property
    def slope_ci(self):
        return self.estimate.ci

    @property
    def flags(self):
        return self.estimate.flags

    def with_verdict(self, verdict):
        return self._replace(verdict=verdict)

    def as_dict(self):
        return {
            "test_id": self.test_id,
            "verdict": self.verdict,
            "slope": _finite_or_label(self.estimate.slope),
            "ci": _finite_or_label(self.estimate.ci),
            "flags": list(self.estimate.flags),
            "samples": [[eps, value] for eps, value in self.samples],
            "shrunk": list(self.shrunk),
        }


def _finite_or_label(value):
    if np.isfinite(value):
        return float(value)
    return "inf" if value > 0 else "-inf"


def estimate_order(samples, window=None, abs_floor=None):
    """
    Least-squares slope of log(value) against log(ε) over the tail window.

    Values at or below ``abs_floor`` end the usable range; if every value is
    below it the samples are identically zero, and if fewer than four usable
    values remain the decay is beyond the measurable range. Both cases report
    slope +inf. Non-finite values report slope -inf with the "divergent" flag.
    """
    window = window or lab_setting("COLOMBEAU_TAIL_WINDOW")
    abs_floor = lab_setting("COLOMBEAU_ABS_FLOOR") if abs_floor is None else abs_floor
    ordered = sorted(((float(e), abs(float(v))) for e, v in samples), key=lambda item: -item[0])
    if len(ordered) < MIN_FIT_POINTS:
        raise BatteryError("Estimating an order needs at least %d samples, got %d." % (MIN_FIT_POINTS, len(ordered)))
    eps = np.array([e for e, _ in ordered])
    values = np.array([v for _, v in ordered])

    if not np.all(np.isfinite(values)):
        logger.debug("Non-finite sup-values %s", values)
        return OrderEstimate(-np.inf, np.inf, flags=("divergent",), used=int(np.isfinite(values).sum()),
                             steepest=-np.inf)
    if np.all(values <= abs_floor):
        return OrderEstimate(np.inf, 0.0, flags=("identically-zero",), used=len(values))

    flags = ()
    below = np.nonzero(values <= abs_floor)[0]
    if len(below):
        cut = int(below[0])
        logger.warning("Values below %g from eps=%g on; truncating the fit", abs_floor, eps[cut])
        flags += ("noise-floor",)
        eps, values = eps[:cut], values[:cut]
    if len(values) < MIN_FIT_POINTS:
        return OrderEstimate(np.inf, 0.0, flags=flags + ("below-floor",), used=len(values))

    log_eps = np.log(eps)
    log_values = np.log(values)
    steepest = float(np.min(np.diff(log_values) / np.diff(log_eps)))
    tail_eps = log_eps[-window:]
    tail_values = log_values[-window:]
    fit = stats.linregress(tail_eps, tail_values)
    residuals = tail_values - (fit.intercept + fit.slope * tail_eps)
    dof = len(tail_eps) - 2
    ci = float(stats.t.ppf(0.975, dof) * fit.stderr) if fit.stderr > 0 else 0.0
    if np.max(np.abs(residuals)) > OSCILLATION_RESIDUAL:
        flags += ("oscillatory",)
    return OrderEstimate(float(fit.slope), ci, float(fit.intercept), flags, len(tail_eps), steepest)


# Sweeps


class SweepConfig(NamedTuple):
    """
    One sweep: compact box K inside core(A), directions B_list for d3, a Lie
    word X_list acting in p, a kernel and the ε grid.
    """

    K: Box
    A: object
    kernel: object
    B_list: tuple = ()
    X_list: tuple = ()
    eps_grid: tuple = DEFAULT_EPS_GRID
    p_points: Optional[int] = None
    metric: Optional[RiemannianMetric] = None
    domain: object = None
    focus: bool = True
    refine: bool = True
    threads: Optional[int] = None

    def validate(self):
        eps = np.asarray(self.eps_grid, dtype=float)
        if len(eps) < MIN_FIT_POINTS:
            raise BatteryError("The eps grid needs at least %d values." % MIN_FIT_POINTS)
        if np.any(np.diff(eps) >= 0) or eps[0] > 1 or eps[-1] <= 0:
            raise BatteryError("The eps grid must be strictly decreasing inside (0, 1].")
        if not core_contains(self.A, self.K):
            raise BatteryError("K = %s is not compactly inside the core of %r." % (self.K, self.A))
        for B in self.B_list:
            if not kernel_contains(B, self.A.core_region):
                raise BatteryError("%r does not vanish on the diagonal over core(A)." % B)
        for X in self.X_list:
            if X.valence != (1, 0):
                raise ValenceError("Lie words are built from vector fields.")
        return self

    @property
    def points_per_axis(self):
        return int(self.p_points or DEFAULT_POINTS_PER_AXIS)


def _fd_step(kernel, eps):
    return lab_setting("COLOMBEAU_FD_RELATIVE_STEP") * kernel.radius(eps)


def usable_eps(cfg, domain):
    """
    Split the ε grid into the values whose kernel supports (plus the Lie
    stencil) stay inside the domain around K, and those that do not.
    """
    kept, shrunk = [], []
    for eps in cfg.eps_grid:
        margin = cfg.kernel.radius(eps) + 4 * len(cfg.X_list) * _fd_step(cfg.kernel, eps)
        (kept if domain.contains_box(cfg.K.expand(margin)) else shrunk).append(float(eps))
    if shrunk:
        logger.warning("Dropping eps %s: kernel supports around %s leave the domain", shrunk, cfg.K)
    return kept, shrunk


def kernel_field(u, cfg, eps, domain=None):
    """
    The field p ↦ u(Φ(ε, p), p, A) with a finite-difference step at kernel scale.
    """
    domain = domain or cfg.domain or u.domain
    shape = u.fiber_shape

    def func(points):
        batch = points.shape[:-1]
        flat = points.reshape(-1, u.dim)
        if not len(flat):
            return np.zeros(batch + shape)
        values = [u(evaluate_kernel(cfg.kernel, eps, p, domain), p, cfg.A) for p in flat]
        return np.stack(values).reshape(batch + shape)

    return SmoothTensorField(domain, u.r, u.s, func, fd_step=_fd_step(cfg.kernel, eps), label="%s[eps=%g]" % (u.label, eps))


def sample_set(u, cfg, eps):
    """
    The lattice on K plus, around each singular-support point, focus points at
    kernel scale.
    """
    points = [cfg.K.grid(cfg.points_per_axis)]
    if cfg.focus:
        radius = cfg.kernel.radius(eps)
        for center in u.singular_support():
            center = np.ravel(center)
            axes = [center[i] + radius * FOCUS_OFFSETS for i in range(u.dim)]
            if u.dim > 1:
                axes = [axis[::5] for axis in axes]
            grids = np.meshgrid(*axes, indexing="ij")
            points.append(np.stack([g.ravel() for g in grids], axis=-1))
    points = np.concatenate(points, axis=0)
    return points[cfg.K.contains(points)]


def _norms(values, points, metric, r, s):
    return numerics.fiber_norm(values, metric(points), r, s)


def _refine(norm_at, best, points, K):
    """
    Bounded scalar maximization between the neighbours of the best sample.
    """
    xs = np.unique(points[:, 0])
    index = int(np.searchsorted(xs, best[0]))
    lower = xs[max(index - 1, 0)]
    upper = xs[min(index + 1, len(xs) - 1)]
    lower = max(lower, K.lower[0])
    upper = min(upper, K.upper[0])
    if upper <= lower:
        return best, norm_at(best)
    result = optimize.minimize_scalar(
        lambda x: -norm_at(np.array([x])),
        bounds=(lower, upper),
        method="bounded",
        options={"xatol": 1e-6 * (upper - lower)},
    )
    return np.array([result.x]), -float(result.fun)


def sup_at(u, cfg, eps, domain, metric):
    """
    (sup-value, argmax) of the h-norm of the swept field at one ε.
    """
    field = kernel_field(u, cfg, eps, domain)
    if cfg.X_list:
        field = lie_word_field(field, cfg.X_list)
    points = sample_set(u, cfg, eps)

    def norm_at(p):
        p = as_points(p, u.dim).reshape(-1, u.dim)
        return float(_norms(field(p), p, metric, u.r, u.s)[0])

    norms = _norms(field(points), points, metric, u.r, u.s)
    if not np.all(np.isfinite(norms)):
        return float("inf"), tuple(points[int(np.argmax(~np.isfinite(norms)))])
    best_index = int(np.argmax(norms))
    best, value = points[best_index], float(norms[best_index])
    if cfg.refine and u.dim == 1 and value > 0:
        candidate, refined = _refine(norm_at, best, points, cfg.K)
        if np.isfinite(refined) and refined > value:
            best, value = candidate, refined
    logger.debug("eps=%g sup=%.6e at %s", eps, value, best)
    return value, tuple(float(x) for x in np.ravel(best))


def sweep(u, cfg, j=None, test_id=None):
    """
    Sup-values of L_{X...}(d3^j u(Φ(ε, p), p, A)(B_1..B_j)) over p ∈ K per ε,
    with the fitted slope. The verdict is left to the caller.
    """
    cfg.validate()
    directions = tuple(cfg.B_list) if j is None else tuple(cfg.B_list[:j])
    if j is not None and len(directions) < j:
        raise BatteryError("d3^%d needs %d directions, the configuration has %d." % (j, j, len(cfg.B_list)))
    target = directional(u, directions)
    domain = cfg.domain or u.domain
    metric = cfg.metric or RiemannianMetric.euclidean(domain)
    eps_values, shrunk = usable_eps(cfg, domain)
    if len(eps_values) < MIN_FIT_POINTS:
        raise BatteryError("Only %d eps values keep the kernel supports inside the domain." % len(eps_values))
    test_id = test_id or "j%d-l%d-m%d" % (len(directions), len(cfg.X_list), cfg.kernel.order)

    threads = cfg.threads or lab_setting("COLOMBEAU_THREADS")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(lambda eps: sup_at(target, cfg, eps, domain, metric), eps_values))
    else:
        results = [sup_at(target, cfg, eps, domain, metric) for eps in eps_values]

    samples = tuple((eps, value) for eps, (value, _) in zip(eps_values, results))
    argmax = tuple((eps, point) for eps, (_, point) in zip(eps_values, results))
    estimate = estimate_order(samples)
    logger.info("Sweep %s of %s: slope %.4g ± %.2g %s", test_id, u.label, estimate.slope, estimate.ci, estimate.flags)
    return OrderReport(test_id, samples, estimate, shrunk=tuple(shrunk), argmax=argmax)


# Verdicts


class Verdict(NamedTuple):
    test: str
    passed: bool
    reports: tuple = ()
    details: Optional[dict] = None

    @property
    def status(self):
        return "pass" if self.passed else "fail"

    def failures(self):
        return [report for report in self.reports if report.verdict == "fail"]

    def error_display(self):
        failed = self.failures()
        if not failed:
            return ""
        return "; ".join("%s (slope %s)" % (r.test_id, _finite_or_label(r.fitted_slope)) for r in failed)


class Battery(NamedTuple):
    """
    The finite test battery standing in for the quantifiers over kernels,
    vector fields and transport directions.
    """

    K: Box
    A: object
    profile: object = "bump"
    support_constant: float = 1.0
    X_choices: tuple = ()
    B_choices: tuple = ()
    max_word: int = 2
    max_j: int = 2
    eps_grid: tuple = DEFAULT_EPS_GRID
    p_points: Optional[int] = None
    metric: Optional[RiemannianMetric] = None
    domain: object = None
    threads: Optional[int] = None

    def words(self, max_length=None):
        max_length = self.max_word if max_length is None else max_length
        for length in range(max_length + 1):
            yield from itertools.product(self.X_choices, repeat=length)

    def direction_sets(self):
        for j in range(self.max_j + 1):
            if j and not self.B_choices:
                return
            yield from itertools.combinations_with_replacement(self.B_choices, j)

    def config(self, kernel, directions=(), word=()):
        return SweepConfig(
            K=self.K,
            A=self.A,
            kernel=kernel,
            B_list=tuple(directions),
            X_list=tuple(word),
            eps_grid=tuple(self.eps_grid),
            p_points=self.p_points,
            metric=self.metric,
            domain=self.domain,
            threads=self.threads,
        )

    def describe(self):
        return {
            "K": [list(self.K.lower), list(self.K.upper)],
            "A": getattr(self.A, "label", repr(self.A)),
            "profile": getattr(self.profile, "name", self.profile),
            "support_constant": self.support_constant,
            "X": [X.label for X in self.X_choices],
            "B": [B.label for B in self.B_choices],
            "max_word": self.max_word,
            "max_j": self.max_j,
            "eps_grid": list(self.eps_grid),
        }


def _exponent(slope):
    if slope == np.inf:
        return 0.0
    return max(0.0, -float(slope))


def _test_id(prefix, directions, word, order):
    return "%s-j%d-l%d-k%d" % (prefix, len(directions), len(word), order)


def is_moderate(u, battery):
    """
    PASS iff every sweep of the battery (kernel order 0, j ≤ max_j, Lie words
    up to max_word) has a slope bounded below by -N_max and no super-polynomial
    growth. ``details["N"]`` holds the per-test exponents.
    """
    n_max = lab_setting("COLOMBEAU_MAX_MODERATE_ORDER")
    kernel = build_kernel(battery.profile, 0, battery.support_constant)
    reports = []
    exponents = {}
    for directions in battery.direction_sets():
        for word in battery.words():
            cfg = battery.config(kernel, directions, word)
            report = sweep(u, cfg, test_id=_test_id("moderate", directions, word, 0))
            estimate = report.estimate
            ok = (
                "divergent" not in estimate.flags
                and estimate.slope >= -n_max
                and estimate.steepest >= -n_max
            )
            reports.append(report.with_verdict("pass" if ok else "fail"))
            exponents[report.test_id] = _exponent(estimate.slope)
    passed = all(r.verdict == "pass" for r in reports)
    logger.info("%s is %smoderate on the battery", u.label, "" if passed else "not ")
    return Verdict("moderate", passed, tuple(reports), {"N": exponents})


def is_negligible(u, battery, m_list=(1, 2, 3), moderate=None):
    """
    PASS iff u is moderate and, for every target order m, every d3^j sweep
    (l = 0) with a kernel of order k_of(m) decays with slope at least
    m - slope_tol or vanishes identically.
    """
    moderate = moderate if moderate is not None else is_moderate(u, battery)
    if not moderate.passed:
        return Verdict("negligible", False, moderate.reports, {"moderate": False})
    slope_tol = lab_setting("COLOMBEAU_SLOPE_TOLERANCE")
    k_of = kernel_order_map()
    reports = []
    per_order = {}
    for m in m_list:
        k = int(k_of(m))
        kernel = build_kernel(battery.profile, k, battery.support_constant)
        slopes = []
        for directions in battery.direction_sets():
            cfg = battery.config(kernel, directions)
            report = sweep(u, cfg, test_id="negligible-m%d-%s" % (m, _test_id("d3", directions, (), k)))
            ok = "identically-zero" in report.flags or report.fitted_slope >= m - slope_tol
            reports.append(report.with_verdict("pass" if ok else "fail"))
            slopes.append(report.fitted_slope)
        per_order[m] = {"kernel_order": k, "min_slope": float(min(slopes))}
    passed = all(r.verdict == "pass" for r in reports)
    logger.info("%s is %snegligible on the battery", u.label, "" if passed else "not ")
    return Verdict("negligible", passed, tuple(reports), {"moderate": True, "orders": per_order})


def embedding_rate_check(u, battery, orders=(0, 1, 2)):
    """
    Rate check for embedding differences ι(ρ(t)) - σ(t): with a kernel of
    order k every d3^j sweep must decay with slope at least k + 1 - slope_tol
    (or vanish identically), and the minimal slopes must not decrease as k
    grows.
    """
    slope_tol = lab_setting("COLOMBEAU_SLOPE_TOLERANCE")
    reports = []
    per_order = {}
    for k in sorted(set(int(k) for k in orders)):
        kernel = build_kernel(battery.profile, k, battery.support_constant)
        slopes = []
        for directions in battery.direction_sets():
            cfg = battery.config(kernel, directions)
            report = sweep(u, cfg, test_id="embed-rate-%s" % _test_id("d3", directions, (), k))
            if "identically-zero" in report.flags:
                slope = float("inf")
            else:
                slope = report.fitted_slope
            ok = slope >= k + 1 - slope_tol
            reports.append(report.with_verdict("pass" if ok else "fail"))
            slopes.append(slope)
        per_order[k] = {"kernel_order": k, "min_slope": float(min(slopes))}
    min_slopes = [per_order[k]["min_slope"] for k in sorted(per_order)]
    monotone = all(b >= a - slope_tol for a, b in zip(min_slopes, min_slopes[1:]))
    passed = monotone and all(r.verdict == "pass" for r in reports)
    logger.info("Embedding rates of %s: %s", u.label, ", ".join(str(_finite_or_label(s)) for s in min_slopes))
    return Verdict("embed-rate", passed, tuple(reports), {"orders": per_order, "monotone": monotone})


def check_fiber_basis(basis, K, points_per_axis=5):
    """
    Raise BatteryError unless the fields span the full fiber at sampled points of K.
    """
    if not basis:
        raise BatteryError("A saturation basis needs at least one field.")
    points = K.grid(points_per_axis)
    stacked = np.stack([np.asarray(t(points)).reshape(len(points), -1) for t in basis], axis=1)
    size = stacked.shape[-1]
    for matrix in stacked:
        if np.linalg.matrix_rank(matrix, tol=1e-10) < size:
            raise BatteryError("Saturation basis is degenerate on %s." % (K,))


def saturation_check(u, basis, battery, mode="moderate", m_list=(1,)):
    """
    Run the moderateness (or negligibility) test on u and on every scalar
    saturate u·t̃; PASS iff all verdicts agree.
    """
    check_fiber_basis(basis, battery.K)
    if mode == "moderate":
        test = is_moderate
    elif mode == "negligible":
        def test(v, b):
            return is_negligible(v, b, m_list=m_list)
    else:
        raise ValueError("Unknown saturation mode %r." % mode)
    direct = test(u, battery)
    saturates = [test(saturate(u, t_tilde), battery) for t_tilde in basis]
    agree = all(v.passed == direct.passed for v in saturates)
    details = {
        "mode": mode,
        "direct": direct.passed,
        "saturates": [v.passed for v in saturates],
    }
    if mode == "moderate":
        details["N"] = [direct.details["N"]] + [v.details["N"] for v in saturates]
    reports = direct.reports + tuple(r for v in saturates for r in v.reports)
    return Verdict("saturation-%s" % mode, agree, reports, details)


def stability_under_lie(u, battery, fields=None):
    """
    Moderateness of L̂_X u for each X; slope changes are logged.
    """
    base = is_moderate(u, battery)
    verdicts = []
    for X in fields or battery.X_choices:
        derived = is_moderate(hat_lie(X, u), battery)
        for before, after in zip(base.reports, derived.reports):
            logger.info("%s: slope %s -> %s under L^_%s", before.test_id, before.fitted_slope, after.fitted_slope, X.label)
        verdicts.append(derived)
    passed = (not base.passed) or all(v.passed for v in verdicts)
    return Verdict("lie-stability", passed, tuple(r for v in verdicts for r in v.reports), {"base": base.passed})


# Scalar theory and reduction


class ScalarNet:
    """
    A 2-slot scalar evaluator (ω, p) ↦ R(ω, p).
    """

    def __init__(self, domain, evaluate, label=""):
        self.domain = domain
        self._evaluate = evaluate
        self.label = label

    def __repr__(self):
        return "<ScalarNet %s>" % self.label

    @property
    def dim(self):
        return self.domain.dim

    def __call__(self, omega, p):
        p = np.ravel(as_points(p, self.dim))
        return float(np.asarray(self._evaluate(omega, p)))

    def kernel_field(self, kernel, eps, domain=None):
        domain = domain or self.domain

        def func(points):
            batch = points.shape[:-1]
            flat = points.reshape(-1, self.dim)
            values = [self(evaluate_kernel(kernel, eps, p, domain), p) for p in flat]
            return np.asarray(values, dtype=float).reshape(batch)

        return SmoothTensorField(domain, 0, 0, func, fd_step=_fd_step(kernel, eps), label=self.label)


def reduction_view(u, A, B_list=()):
    """
    The scalar map (ω, p) ↦ d3^j u(ω, p, A)(B_1, ..., B_j) of a (0, 0)
    representative.
    """
    if u.valence != (0, 0):
        raise ValenceError("Reduction applies to scalar representatives, got %s." % (u.valence,))
    B_list = tuple(B_list)
    return ScalarNet(
        u.domain,
        lambda omega, p: u.d3(omega, p, A, B_list),
        label="d3^%d(%s)" % (len(B_list), u.label),
    )


def scalar_sweep(net, K, kernel, eps_grid=DEFAULT_EPS_GRID, alpha=None, p_points=None, test_id=None):
    """
    sup_{p ∈ K} |∂^α (p ↦ R(Φ(ε, p), p))| per ε, with the fitted slope.
    """
    alpha = tuple(alpha) if alpha is not None else (0,) * net.dim
    points = K.grid(p_points or DEFAULT_POINTS_PER_AXIS)
    samples = []
    shrunk = []
    for eps in eps_grid:
        margin = kernel.radius(eps) + 4 * sum(alpha) * _fd_step(kernel, eps)
        if not net.domain.contains_box(K.expand(margin)):
            shrunk.append(float(eps))
            continue
        field = net.kernel_field(kernel, eps)
        values = field.derivative(points, alpha) if any(alpha) else field(points)
        samples.append((float(eps), float(np.max(np.abs(values)))))
    if shrunk:
        logger.warning("Dropping eps %s: kernel supports around %s leave the domain", shrunk, K)
    estimate = estimate_order(samples)
    test_id = test_id or "scalar-%s-k%d" % ("".join(str(a) for a in alpha), kernel.order)
    return OrderReport(test_id, tuple(samples), estimate, shrunk=tuple(shrunk))


# Localization


def localization_check(u, cfg, box, j=None, tol=1e-10):
    """
    Sweep u over K on its own domain and the restriction of u to ``box``
    on the sub-chart; the sup-values must agree on the shared ε values.
    """
    if not box.contains_box(cfg.K):
        raise BatteryError("K = %s is not inside the restriction box %s." % (cfg.K, box))
    full = sweep(u, cfg, j=j, test_id="localization-full")
    restricted_u = Restricted(u, box)
    restricted = sweep(
        restricted_u,
        cfg._replace(domain=restricted_u.domain, threads=1),
        j=j,
        test_id="localization-restricted",
    )
    full_values = dict(full.samples)
    shared = [(eps, value) for eps, value in restricted.samples if eps in full_values]
    difference = max(abs(full_values[eps] - value) for eps, value in shared) if shared else np.inf
    return Verdict(
        "localization",
        bool(difference <= tol),
        (full, restricted),
        {"max_difference": float(difference), "shared_eps": [eps for eps, _ in shared]},
    )
