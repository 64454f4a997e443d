"""
Smoothing kernels in scaled-mollifier form.

A kernel of order m is the tensorized profile rho_m(s) = P_m(s) rho(s) with a
polynomial P_m chosen so that rho_m has unit integral and vanishing moments of
orders 1..m; Φ(ε, p)(q) = (εC)^{-n} Π_i rho_m((q_i - p_i) / (εC)).

Normalization and moment correction are computed with the reference rule of
``colombeau_lab.quadrature``, the same rule every pairing against a kernel
uses, so the discrete moments vanish to rounding.
"""
import itertools
import logging
import math
from typing import Callable, NamedTuple, Optional

import numpy as np
import sympy
from numpy.polynomial import polynomial as P

from . import quadrature
from .exceptions import KernelConstructionError, SupportEscapeError
from .expressions import parse_expression
from .geometry import Box, ChartDomain, NForm, as_points
from .utils import lab_setting

logger = logging.getLogger(__name__)

EDGE = 1.0 - 1e-12

PROFILES = {
    "bump": ("exp(-1/(1 - s^2))", "C-infinity"),
    "cos2": ("cos(pi*s/2)^2", "C1"),
}


class MollifierProfile:
    """
    A one-dimensional profile on (-1, 1), normalized to unit integral and
    tensorized over coordinates.
    """

    def __init__(self, expression, smoothness_class="user", name=""):
        self.symbol = sympy.Symbol("s", real=True)
        if isinstance(expression, str):
            expression = parse_expression(expression, {"s": self.symbol, "x": self.symbol})
        self.expression = expression
        self.smoothness_class = smoothness_class
        self.name = name or str(expression)
        self._derivatives = {}
        nodes, weights = quadrature.reference_rule()
        base_integral = float(np.dot(weights, self._raw(nodes, 0)))
        if not np.isfinite(base_integral) or base_integral <= 0:
            raise KernelConstructionError("Profile %r does not have a positive integral." % self.name)
        self.base_integral = base_integral

    def __repr__(self):
        return "<MollifierProfile %s>" % self.name

    @classmethod
    def named(cls, name):
        try:
            expression, smoothness = PROFILES[name]
        except KeyError:
            raise KernelConstructionError(
                "Unknown profile %r, expected one of %s or an expression." % (name, ", ".join(PROFILES))
            )
        return cls(expression, smoothness, name=name)

    @classmethod
    def resolve(cls, value):
        if isinstance(value, MollifierProfile):
            return value
        if value in PROFILES:
            return cls.named(value)
        return cls(value)

    def _raw(self, s, k):
        if k not in self._derivatives:
            self._derivatives[k] = sympy.lambdify(
                self.symbol, sympy.diff(self.expression, self.symbol, k), modules="numpy"
            )
        s = np.asarray(s, dtype=float)
        inside = np.abs(s) < EDGE
        values = np.zeros(s.shape)
        if np.any(inside):
            values[inside] = np.broadcast_to(self._derivatives[k](s[inside]), values[inside].shape)
        return values

    def __call__(self, s):
        return self._raw(s, 0) / self.base_integral

    def derivative(self, s, k):
        return self._raw(s, int(k)) / self.base_integral


class SmoothingKernel(NamedTuple):
    profile: MollifierProfile
    order: int
    support_constant: float
    coefficients: tuple
    modulation: Optional[Callable] = None

    def __repr__(self):
        return "<SmoothingKernel %s m=%d C=%g>" % (self.profile.name, self.order, self.support_constant)

    def corrected(self, s, k=0):
        """
        k-th derivative of rho_m = P_m·rho at the scaled abscissae ``s``.
        """
        s = np.asarray(s, dtype=float)
        total = np.zeros(s.shape)
        coefficients = np.asarray(self.coefficients)
        for j in range(k + 1):
            poly = P.polyder(coefficients, j) if j else coefficients
            if not np.any(poly):
                continue
            total = total + math.comb(k, j) * P.polyval(s, poly) * self.profile.derivative(s, k - j)
        return total

    def radius(self, eps, p=None):
        scale = 1.0
        if self.modulation is not None and p is not None:
            scale = float(self.modulation(np.asarray(p, dtype=float)))
            if not 0.0 < scale <= 1.0:
                raise ValueError("Kernel modulation must lie in (0, 1], got %g." % scale)
        return eps * self.support_constant * scale


def build_kernel(profile, m, C, modulation=None):
    """
    Moment-corrected smoothing kernel of order m with support constant C.
    """
    profile = MollifierProfile.resolve(profile)
    m = int(m)
    m_max = lab_setting("COLOMBEAU_MAX_MOMENT_ORDER")
    if not 0 <= m <= m_max:
        raise KernelConstructionError("Kernel order %d outside 0..%d." % (m, m_max))
    if C <= 0:
        raise KernelConstructionError("Support constant must be positive, got %g." % C)
    nodes, weights = quadrature.reference_rule()
    values = profile(nodes)
    moments = np.array([np.dot(weights, nodes ** k * values) for k in range(2 * m + 1)])
    hankel = np.array([[moments[i + j] for j in range(m + 1)] for i in range(m + 1)])
    if np.linalg.cond(hankel) > 1e12:
        raise KernelConstructionError("Moment system of %r is singular for m=%d." % (profile, m))
    rhs = np.zeros(m + 1)
    rhs[0] = 1.0
    coefficients = np.linalg.solve(hankel, rhs)
    coefficients[np.abs(coefficients) < 1e-14] = 0.0
    logger.debug("Kernel %s m=%d correction coefficients %s", profile.name, m, coefficients)
    return SmoothingKernel(profile, m, float(C), tuple(float(c) for c in coefficients), modulation)


class KernelForm(NForm):
    """
    Φ(ε, p) as an n-form with exact derivatives of every order.
    """

    def __init__(self, domain, kernel, eps, center):
        self.kernel = kernel
        self.eps = float(eps)
        self.center = np.asarray(center, dtype=float)
        self.scale = kernel.radius(eps, center)
        support = Box.around(self.center, self.scale)
        super().__init__(
            domain,
            self._density,
            support,
            derivative=self._density_derivative,
            integral_hint=1.0,
            label="Phi(%g,%s)" % (eps, np.array2string(self.center, precision=4)),
        )

    def scaled(self, points):
        return (as_points(points, self.dim) - self.center) / self.scale

    def _density(self, points):
        return self._density_derivative(points, (0,) * self.dim)

    def _density_derivative(self, points, alpha):
        s = self.scaled(points)
        values = np.ones(s.shape[:-1])
        for axis, k in enumerate(alpha):
            values = values * self.kernel.corrected(s[..., axis], k)
        return values * self.scale ** (-self.dim - sum(alpha))


def evaluate_kernel(kernel, eps, p, domain=None):
    """
    Φ(ε, p) as a unit-integral n-form supported in the sup-norm ball B_{εC}(p).
    """
    if not 0 < eps <= 1:
        raise ValueError("Kernel scale must satisfy 0 < eps <= 1, got %g." % eps)
    p = np.ravel(np.asarray(p, dtype=float))
    domain = domain or ChartDomain(len(p))
    form = KernelForm(domain, kernel, eps, p)
    form.check_support(domain)
    return form


def bump_form(domain, center, radius, profile="bump"):
    """
    A unit-integral test n-form centred at ``center``.
    """
    kernel = build_kernel(profile, 0, radius)
    return evaluate_kernel(kernel, 1.0, center, domain)


def kernel_moments(kernel, max_order=None):
    """
    Discrete moments ∫ s^k rho_m(s) ds for k = 0..max_order.
    """
    max_order = kernel.order + 2 if max_order is None else max_order
    nodes, weights = quadrature.reference_rule()
    values = kernel.corrected(nodes)
    return [float(np.dot(weights, nodes ** k * values)) for k in range(max_order + 1)]


def verify_moment_order(kernel, f, K, eps_grid, domain=None, p_points=21):
    """
    sup_{p ∈ K} |f(p) - ∫ f(q) Φ(ε, p)(q) dq| per ε, with the fitted slope.
    Passes when the slope reaches m + 1 - slope_tol or the defect vanishes.
    """
    from .asymptotics import OrderReport, estimate_order

    domain = domain or f.domain
    centers = K.grid(p_points)
    nodes, weights = quadrature.box_rule(Box(tuple([-1.0] * K.dim), tuple([1.0] * K.dim)))
    reference_values = np.prod(kernel.corrected(nodes), axis=-1) * weights
    samples = []
    shrunk = []
    for eps in eps_grid:
        radius = kernel.radius(eps)
        if not domain.contains_box(K.expand(radius)):
            shrunk.append(eps)
            continue
        q = centers[:, None, :] + radius * nodes[None, :, :]
        smoothed = np.asarray(f(q)).reshape(q.shape[:2]) @ reference_values
        defect = np.abs(np.asarray(f(centers)).reshape(-1) - smoothed)
        samples.append((float(eps), float(np.max(defect))))
        logger.debug("Moment defect at eps=%g: %.3e", eps, samples[-1][1])
    if shrunk:
        logger.warning("Dropped eps %s whose kernel supports leave the domain", shrunk)
    estimate = estimate_order(samples)
    target = kernel.order + 1 - lab_setting("COLOMBEAU_SLOPE_TOLERANCE")
    flags = estimate.flags
    if "identically-zero" in flags:
        flags = flags + ("superconvergent",)
        estimate = estimate._replace(flags=flags)
    verdict = "pass" if estimate.slope >= target else "fail"
    return OrderReport(
        test_id="moments-m%d" % kernel.order,
        samples=tuple(samples),
        estimate=estimate,
        verdict=verdict,
        shrunk=tuple(shrunk),
    )


def derivative_scaling_report(kernel, eps_grid, dim=1, max_derivative=2, points_per_axis=None):
    """
    sup_q |∂_q^β Φ(ε, 0)(q)| per ε for every |β| <= max_derivative, sampled on
    a lattice over the support; each slope should be -n - |β| within 0.1.
    """
    from .asymptotics import OrderReport, estimate_order

    points_per_axis = points_per_axis or (201 if dim == 1 else 41)
    origin = np.zeros(dim)
    reports = []
    for beta in itertools.product(range(max_derivative + 1), repeat=dim):
        if sum(beta) > max_derivative:
            continue
        samples = []
        for eps in eps_grid:
            form = KernelForm(ChartDomain(dim), kernel, eps, origin)
            lattice = form.support.grid(points_per_axis)
            value = float(np.max(np.abs(form.derivative(lattice, beta))))
            samples.append((float(eps), value))
        estimate = estimate_order(samples)
        expected = -dim - sum(beta)
        verdict = "pass" if abs(estimate.slope - expected) <= 0.1 else "fail"
        reports.append(
            OrderReport(
                test_id="kernel-derivative-%s" % "".join(str(b) for b in beta),
                samples=tuple(samples),
                estimate=estimate,
                verdict=verdict,
            )
        )
    return reports
