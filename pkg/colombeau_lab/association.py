"""
Association of representatives: weak limits against test pairs (t̃, ω) along
smoothing kernels, distributional shadows and C⁰/Cᵏ-association.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Optional

import numpy as np

from . import numerics, quadrature
from .asymptotics import (
    DEFAULT_EPS_GRID,
    MIN_FIT_POINTS,
    OrderReport,
    SweepConfig,
    Verdict,
    estimate_order,
    sweep,
)
from .basic_space import LinearCombination, Sigma, TensorProduct, iota, saturate
from .distributions import (
    DeltaDistribution,
    RegularDistribution,
    TensorProductDistribution,
    zero_distribution,
)
from .exceptions import BatteryError, SupportEscapeError, ValenceError
from .geometry import Box, ChartDomain, SmoothTensorField
from .kernels import build_kernel, bump_form, evaluate_kernel
from .transport import PlateauCutoff, TransportOperator
from .utils import lab_setting

logger = logging.getLogger(__name__)

OUTER_TOLERANCE = 1e-8
TAIL_POINTS = 2


class AssociationProbe(NamedTuple):
    omega_list: tuple
    A: object
    t_tilde_list: tuple
    kernel_order: int = 0
    eps_grid: tuple = DEFAULT_EPS_GRID
    profile: object = "bump"
    support_constant: float = 1.0
    tolerance: float = OUTER_TOLERANCE
    domain: Optional[ChartDomain] = None
    threads: Optional[int] = None

    def validate(self, u=None):
        if not self.omega_list or not self.t_tilde_list:
            raise BatteryError("An association probe needs at least one n-form and one test field.")
        for omega in self.omega_list:
            if not np.all(np.isfinite(omega.support.widths)):
                raise BatteryError("Probe n-forms must be compactly supported.")
        if u is not None:
            for t_tilde in self.t_tilde_list:
                if t_tilde.valence != (u.s, u.r):
                    raise ValenceError(
                        "Probing a (%d,%d) representative needs (%d,%d) test fields, got %s."
                        % (u.r, u.s, u.s, u.r, t_tilde.valence)
                    )
        eps = np.asarray(self.eps_grid, dtype=float)
        if len(eps) < MIN_FIT_POINTS or np.any(np.diff(eps) >= 0):
            raise BatteryError("The eps grid must hold at least %d strictly decreasing values." % MIN_FIT_POINTS)
        return self

    def kernel(self, order=None):
        order = self.kernel_order if order is None else order
        return build_kernel(self.profile, order, self.support_constant)

    def pairs(self):
        for i, omega in enumerate(self.omega_list):
            for j, t_tilde in enumerate(self.t_tilde_list):
                yield "w%d-t%d" % (i, j), omega, t_tilde


def _breakpoints(u, omega, radius):
    points = []
    for center in u.singular_support():
        center = float(np.ravel(center)[0])
        for point in (center - radius, center, center + radius):
            if omega.support.lower[0] < point < omega.support.upper[0]:
                points.append(np.array([point]))
    return points


def probe_integral(u, probe, omega, t_tilde, kernel, eps):
    """
    I(ε) = ∫ (u(Φ(ε, p), p, A) · t̃(p)) ω(p) dp over supp ω.
    """
    domain = probe.domain or u.domain
    A = probe.A

    def integrand(points):
        values = np.zeros(len(points))
        weights = omega(points)
        fibers = t_tilde(points)
        for index, (p, w) in enumerate(zip(points, weights)):
            if w == 0:
                continue
            fiber = u(evaluate_kernel(kernel, eps, p, domain), p, A)
            values[index] = float(numerics.full_contraction(fiber, fibers[index], u.r, u.s)) * w
        return values

    breakpoints = _breakpoints(u, omega, kernel.radius(eps)) if u.dim == 1 else ()
    return float(quadrature.integrate_adaptive(integrand, omega.support, tol=probe.tolerance, breakpoints=breakpoints))


def _usable_eps(u, probe, kernel):
    domain = probe.domain or u.domain
    kept, shrunk = [], []
    for eps in probe.eps_grid:
        radius = kernel.radius(eps)
        ok = all(domain.contains_box(omega.support.expand(radius)) for omega in probe.omega_list)
        (kept if ok else shrunk).append(float(eps))
    if shrunk:
        logger.warning("Dropping eps %s: kernel supports around the probe forms leave the domain", shrunk)
    if len(kept) < MIN_FIT_POINTS:
        raise SupportEscapeError("Only %d eps values keep the probe kernels inside the domain." % len(kept))
    return kept, shrunk


def rate_curves(u, probe, kernel_order=None):
    """
    For every probe pair, the curve ε ↦ I(ε) as a list of (pair id, [(ε, I)]).
    """
    probe.validate(u)
    kernel = probe.kernel(kernel_order)
    eps_values, shrunk = _usable_eps(u, probe, kernel)

    def curve(item):
        pair_id, omega, t_tilde = item
        values = [(eps, probe_integral(u, probe, omega, t_tilde, kernel, eps)) for eps in eps_values]
        logger.debug("Pair %s of %s: %s", pair_id, u.label, values)
        return pair_id, omega, t_tilde, values

    items = list(probe.pairs())
    threads = probe.threads or lab_setting("COLOMBEAU_THREADS")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(curve, items)), tuple(shrunk)
    return [curve(item) for item in items], tuple(shrunk)


def tail_converges(deviations, estimate, tolerance=None):
    """
    Tail max below the association tolerance, and either a positive fitted
    slope, identically zero deviations or tail deviations below numerical zero.
    """
    tolerance = tolerance or lab_setting("COLOMBEAU_ASSOCIATION_TOLERANCE")
    zero = lab_setting("COLOMBEAU_NUMERICAL_ZERO")
    tail = np.abs(np.asarray(deviations[-TAIL_POINTS:], dtype=float))
    if not np.all(np.isfinite(tail)) or np.max(tail) >= tolerance:
        return False
    return bool(estimate.slope > 0 or "identically-zero" in estimate.flags or np.all(tail < zero))


def _deviation_reports(test, u, probe, reference, kernel_order):
    curves, shrunk = rate_curves(u, probe, kernel_order)
    reports = []
    references = {}
    for pair_id, omega, t_tilde, values in curves:
        target = reference(omega, t_tilde)
        references[pair_id] = target
        samples = tuple((eps, abs(value - target)) for eps, value in values)
        estimate = estimate_order(samples)
        ok = tail_converges([d for _, d in samples], estimate)
        reports.append(
            OrderReport("%s-%s-m%d" % (test, pair_id, kernel_order), samples, estimate, "pass" if ok else "fail", shrunk)
        )
    return reports, references


def _smallest_passing(test, u, probe, reference, orders):
    orders = tuple(orders) if orders is not None else (probe.kernel_order,)
    attempts = []
    for order in orders:
        reports, references = _deviation_reports(test, u, probe, reference, order)
        attempts.extend(reports)
        if all(r.verdict == "pass" for r in reports):
            logger.info("%s: %s passes with kernel order %d", test, u.label, order)
            return Verdict(test, True, tuple(reports), {"kernel_order": order, "references": references})
    logger.info("%s: %s fails for kernel orders %s", test, u.label, list(orders))
    return Verdict(test, False, tuple(attempts), {"kernel_order": None, "orders_tried": list(orders)})


def associated_zero(u, probe, orders=None):
    """
    PASS iff I(ε) → 0 for every probe pair; with ``orders`` the kernel orders
    are tried in turn and the smallest passing one is recorded.
    """
    return _smallest_passing("associated-zero", u, probe, lambda omega, t_tilde: 0.0, orders)


def shadow_matches(u, v, probe, orders=None):
    """
    PASS iff I(ε) → ⟨v, t̃ ⊗ ω⟩ for every probe pair.
    """
    if u.valence != v.valence:
        raise ValenceError("Representative of valence %s cannot shadow %s." % (u.valence, v.valence))
    return _smallest_passing("shadow", u, probe, lambda omega, t_tilde: float(v.pair(t_tilde, omega)), orders)


def shadow_search(u, zoo, probe):
    """
    Names of the distributions in ``zoo`` (name -> distribution) that ``u`` shadows.
    """
    return [name for name, v in zoo.items() if v.valence == u.valence and shadow_matches(u, v, probe).passed]


def shadow_difference(v1, v2, probe):
    """
    max over probe pairs of |⟨v1 - v2, t̃ ⊗ ω⟩|.
    """
    return max(abs(float((v1 - v2).pair(t_tilde, omega))) for _, omega, t_tilde in probe.pairs())


def diverges(u, probe, rate=-1.0):
    """
    PASS iff |I(ε)| grows at least like ε^rate (within the slope tolerance)
    for every probe pair, so that no distribution can be its shadow.
    """
    slope_tol = lab_setting("COLOMBEAU_SLOPE_TOLERANCE")
    curves, shrunk = rate_curves(u, probe)
    reports = []
    for pair_id, omega, t_tilde, values in curves:
        samples = tuple((eps, abs(value)) for eps, value in values)
        estimate = estimate_order(samples)
        ok = "divergent" in estimate.flags or estimate.slope <= rate + slope_tol
        reports.append(OrderReport("divergence-%s" % pair_id, samples, estimate, "pass" if ok else "fail", shrunk))
    passed = all(r.verdict == "pass" for r in reports)
    logger.info("%s %s like eps^%g", u.label, "diverges" if passed else "does not diverge", rate)
    return Verdict("divergence", passed, tuple(reports), {"rate": rate})


def c0_associated(u, t, probe, K_list, k=0, X_choices=()):
    """
    sup_{p ∈ K} |u(Φ(ε, p), p, A) · t̃(p) - t(p) · t̃(p)| → 0 on every K. With
    k > 0 the deviation field is also differentiated along Lie words of
    length up to k built from ``X_choices``.
    """
    if t.valence != u.valence:
        raise ValenceError("C0-association compares against a field of valence %s." % (u.valence,))
    probe.validate(u)
    tolerance = lab_setting("COLOMBEAU_ASSOCIATION_TOLERANCE")
    kernel = probe.kernel()
    difference = LinearCombination([(1.0, u), (-1.0, Sigma(t))])
    words = [()]
    for length in range(1, k + 1):
        words.extend(_words(X_choices, length))
    reports = []
    for box_index, K in enumerate(K_list):
        for t_index, t_tilde in enumerate(probe.t_tilde_list):
            scalar = saturate(difference, t_tilde)
            for word in words:
                cfg = SweepConfig(
                    K=K,
                    A=probe.A,
                    kernel=kernel,
                    X_list=tuple(word),
                    eps_grid=tuple(probe.eps_grid),
                    domain=probe.domain,
                    threads=probe.threads,
                )
                test_id = "c%d-K%d-t%d-l%d" % (k, box_index, t_index, len(word))
                report = sweep(scalar, cfg, test_id=test_id)
                estimate = report.estimate
                smallest = report.samples[-1][1]
                ok = (
                    "identically-zero" in estimate.flags
                    or (np.isfinite(estimate.slope) and estimate.slope - estimate.ci > 0)
                    or estimate.slope == np.inf
                    or smallest < tolerance
                )
                reports.append(report.with_verdict("pass" if ok else "fail"))
    passed = all(r.verdict == "pass" for r in reports)
    logger.info("%s is %sC%d-associated with %s", u.label, "" if passed else "not ", k, t.label)
    return Verdict("c%d-associated" % k, passed, tuple(reports), {"k": k})


def _words(fields, length):
    if length == 0:
        return [()]
    return [(X,) + rest for X in fields for rest in _words(fields, length - 1)]


def default_probe(domain, r=0, s=0, kernel_order=0, eps_grid=None):
    """
    The standard one-dimensional probe: bump test forms around 0 and 0.2,
    constant test fields and the cut-off identity transport on [-1.5, 1.5].
    """
    if domain.dim != 1:
        raise BatteryError("The default association probe is one-dimensional.")
    chi = PlateauCutoff(Box((-1.5,), (1.5,)), 0.5)
    A = TransportOperator.identity_cutoff(domain, chi)
    omegas = (bump_form(domain, (0.0,), 0.7), bump_form(domain, (0.2,), 0.5))
    t_tildes = (
        SmoothTensorField.from_expressions(domain, s, r, _nested("1", r + s), label="1"),
        SmoothTensorField.from_expressions(domain, s, r, _nested("1 + x/2", r + s), label="1+x/2"),
    )
    return AssociationProbe(
        omega_list=omegas,
        A=A,
        t_tilde_list=t_tildes,
        kernel_order=kernel_order,
        eps_grid=tuple(eps_grid or DEFAULT_EPS_GRID[:8]),
        domain=domain,
    )


def _nested(expression, rank):
    value = expression
    for _ in range(rank):
        value = [value]
    return value


def product_matrix(domain):
    """
    (name, u, shadow) entries: smooth ⊗ distributional and continuous ⊗
    continuous tensor products of embeddings against their classical products.
    """
    vector = SmoothTensorField.from_expressions(domain, 1, 0, ["1"], label="d/dx")
    covector_delta = DeltaDistribution(domain, (0.0,), components=[1.0], r=0, s=1, label="delta dx")
    decaying = SmoothTensorField.from_expressions(domain, 1, 0, ["1/(1 + x^2)"], label="(1+x^2)^-1 d/dx")
    absolute = SmoothTensorField.from_expressions(domain, 0, 0, "Abs(x)", label="|x|")
    coordinate = SmoothTensorField.from_expressions(domain, 0, 0, "x", label="x")
    delta = DeltaDistribution(domain, (0.0,))
    zero_vector = SmoothTensorField.zero(domain, 1, 0)
    return [
        (
            "smooth-x-delta",
            TensorProduct(iota(RegularDistribution(vector)), iota(covector_delta)),
            TensorProductDistribution(vector, covector_delta),
        ),
        (
            "continuous-x-continuous",
            TensorProduct(iota(RegularDistribution(decaying)), iota(RegularDistribution(decaying))),
            RegularDistribution(decaying.tensor(decaying)),
        ),
        (
            "kink-x-kink",
            TensorProduct(iota(RegularDistribution(absolute, kinks=[0.0])), iota(RegularDistribution(absolute, kinks=[0.0]))),
            RegularDistribution(absolute.tensor(absolute), kinks=[0.0]),
        ),
        (
            "coordinate-x-delta",
            TensorProduct(iota(RegularDistribution(coordinate)), iota(delta)),
            zero_distribution(domain),
        ),
        (
            "zero-x-delta",
            TensorProduct(iota(RegularDistribution(zero_vector)), iota(covector_delta)),
            zero_distribution(domain, 1, 1),
        ),
    ]


def product_association_suite(domain=None, probe_factory=None, entries=None):
    """
    shadow_matches over the product matrix; ``details["entries"]`` maps each
    entry to its verdict.
    """
    domain = domain or ChartDomain.create(1, [-3.0], [3.0])
    probe_factory = probe_factory or default_probe
    entries = entries if entries is not None else product_matrix(domain)
    verdicts = {}
    reports = []
    for name, u, v in entries:
        if u.valence != v.valence:
            raise ValenceError("Entry %s pairs valences %s and %s." % (name, u.valence, v.valence))
        verdict = shadow_matches(u, v, probe_factory(domain, u.r, u.s))
        verdicts[name] = verdict.passed
        reports.extend(report._replace(test_id="%s:%s" % (name, report.test_id)) for report in verdict.reports)
    passed = all(verdicts.values())
    return Verdict("product-association", passed, tuple(reports), {"entries": verdicts})
