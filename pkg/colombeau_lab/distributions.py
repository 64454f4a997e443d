"""
A finite library of tensor distributions on a chart domain.

Every distribution acts on pairs (t̃, ω) of an (s, r) tensor field and a
compactly supported n-form through ``pair``. Kinds with closed forms for the
Lie derivative or the pullback override ``lie_derivative`` / ``pullback``;
everything else falls back to the adjoint definitions.
"""
import itertools
import logging
import math
import string

import numpy as np

from . import numerics, quadrature
from .exceptions import (
    DomainError,
    PrincipalValueError,
    UnsupportedDistributionError,
    ValenceError,
)
from .geometry import (
    SmoothTensorField,
    as_points,
    lie_derivative_nform,
    lie_derivative_tensor,
    pullback_tensor,
)

logger = logging.getLogger(__name__)

PV_MAX_LEVELS = 14
PV_TOLERANCE = 1e-8

# fields derived from test fields, kept per distribution
FIELD_CACHE_SIZE = 64


def _memoized(cache, t_tilde, build):
    """
    build(t_tilde), memoized by identity of t_tilde; the oldest entry is
    evicted once the cache holds FIELD_CACHE_SIZE fields.
    """
    cached = cache.get(id(t_tilde))
    if cached is None or cached[0] is not t_tilde:
        cached = (t_tilde, build(t_tilde))
        cache.pop(id(t_tilde), None)
        cache[id(t_tilde)] = cached
        while len(cache) > FIELD_CACHE_SIZE:
            cache.pop(next(iter(cache)), None)
    return cached[1]


class TensorDistribution:
    kind = "distribution"

    def __init__(self, domain, r, s, label=""):
        self.domain = domain
        self.r = int(r)
        self.s = int(s)
        self.label = label or self.kind

    def __repr__(self):
        return "<%s (%d,%d) %s>" % (type(self).__name__, self.r, self.s, self.label)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def valence(self):
        return (self.r, self.s)

    @property
    def fiber_shape(self):
        return (self.dim,) * (self.r + self.s)

    def pair(self, t_tilde, omega):
        """
        ⟨v, t̃ ⊗ ω⟩ for an (s, r) field t̃ and an n-form ω.
        """
        if t_tilde.valence != (self.s, self.r):
            raise ValenceError(
                "A (%d,%d) distribution pairs with (%d,%d) fields, got %s."
                % (self.r, self.s, self.s, self.r, t_tilde.valence)
            )
        if omega.dim != self.dim:
            raise DomainError("The n-form lives on a %d-dimensional chart." % omega.dim)
        return float(self._pair(t_tilde, omega))

    def _pair(self, t_tilde, omega):
        raise NotImplementedError

    def spread_fiber(self, slots, p, omega):
        """
        The fiber at p whose contraction with every τ equals ⟨v, θ ⊗ ω⟩ for the
        spreading θ(q) of τ built from the per-slot operators ``slots`` (see
        ``pull_to_base``), when a vectorized rule exists; None otherwise.
        """
        return None

    def singular_support(self):
        return ()

    def lie_derivative(self, X):
        return LieDerivativeDistribution(X, self)

    def pullback(self, mu):
        return PullbackDistribution(mu, self)

    def times(self, function):
        return SmoothCoeffProduct(function, self)

    def __add__(self, other):
        return LinearCombination([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return LinearCombination([(1.0, self), (-1.0, other)])

    def __mul__(self, factor):
        if isinstance(factor, SmoothTensorField):
            return self.times(factor)
        return LinearCombination([(float(factor), self)])

    __rmul__ = __mul__

    def __neg__(self):
        return LinearCombination([(-1.0, self)])


def _contracted(field, t_tilde, r, s):
    """
    The scalar q ↦ field(q) · t̃(q).
    """

    def func(points):
        return numerics.full_contraction(field(points), t_tilde(points), r, s)

    return func


def pull_to_base(values, slots, p, q, r, s):
    """
    Carry an (r, s) fiber at q back to p through the spreading operators: the
    contravariant slot a by slots[s + a](q, p), the covariant slot b by
    slots[b](p, q)^T. ``slots`` lists the r + s operators in the slot order of
    the dual (s, r) spreading.
    """
    result = np.asarray(values, dtype=float)
    for a in range(r):
        result = numerics.slot_action(result, slots[s + a](q, p), a)
    for b in range(s):
        result = numerics.slot_action(result, np.swapaxes(slots[b](p, q), -1, -2), r + b)
    return result


class RegularDistribution(TensorDistribution):
    """
    ρ(t): ⟨ρ(t), t̃ ⊗ ω⟩ = ∫ (t · t̃) ω. ``kinks`` lists points where a
    merely continuous t is not smooth; they become quadrature breakpoints.
    """

    kind = "regular"

    def __init__(self, field, kinks=(), label=""):
        super().__init__(field.domain, field.r, field.s, label=label or "rho(%s)" % field.label)
        self.field = field
        self.kinks = tuple(np.ravel(np.asarray(k, dtype=float)) for k in kinks)

    def singular_support(self):
        return self.kinks

    def _integrate(self, integrand, omega):
        if self.kinks and self.dim == 1:
            inside = [k for k in self.kinks if omega.support.contains(k, strict=True)]
            if inside:
                return quadrature.integrate_adaptive(integrand, omega.support, breakpoints=inside)
        return quadrature.integrate(integrand, omega.support)

    def _pair(self, t_tilde, omega):
        contraction = _contracted(self.field, t_tilde, self.r, self.s)
        return self._integrate(lambda points: contraction(points) * omega(points), omega)

    def spread_fiber(self, slots, p, omega):
        if self.kinks and self.dim == 1:
            return None
        nodes, weights = quadrature.box_rule(omega.support)
        p = np.broadcast_to(np.ravel(p), nodes.shape)
        fibers = pull_to_base(self.field(nodes), slots, p, nodes, self.r, self.s)
        return np.tensordot(weights * omega(nodes), fibers, axes=([0], [0]))

    def lie_derivative(self, X):
        if self.field.deriv_order >= 1 and not self.kinks:
            return RegularDistribution(lie_derivative_tensor(X, self.field))
        return super().lie_derivative(X)

    def pullback(self, mu):
        if not self.kinks:
            return RegularDistribution(pullback_tensor(mu, self.field))
        return super().pullback(mu)


def rho_embed(t, kinks=()):
    return RegularDistribution(t, kinks=kinks)


class DeltaDistribution(TensorDistribution):
    """
    components ⊗ ∂^α δ_point: (-1)^{|α|} ∂^α[(c · t̃) w](point).
    """

    kind = "delta"

    def __init__(self, domain, point, alpha=None, components=None, r=0, s=0, label=""):
        super().__init__(domain, r, s)
        self.point = as_points(np.ravel(np.asarray(point, dtype=float)), domain.dim)
        self.alpha = tuple(int(a) for a in (alpha or (0,) * domain.dim))
        if len(self.alpha) != domain.dim:
            raise ValenceError("Multi-index %s on a %d-dimensional chart." % (self.alpha, domain.dim))
        if components is None:
            if r + s:
                raise ValenceError("Tensor-valued deltas need explicit components.")
            components = 1.0
        self.components = np.broadcast_to(np.asarray(components, dtype=float), self.fiber_shape).copy()
        order = sum(self.alpha)
        self.label = label or ("delta" + "'" * order if domain.dim == 1 else "d^%s delta" % (self.alpha,))

    def singular_support(self):
        return (self.point,)

    def _factor(self, t_tilde):
        components = self.components

        def func(points):
            values = t_tilde(points)
            return numerics.full_contraction(components, values, self.r, self.s)

        return func

    def _pair(self, t_tilde, omega):
        if not omega.support.contains(self.point):
            return 0.0
        point = self.point
        total = 0.0
        for beta in itertools.product(*(range(a + 1) for a in self.alpha)):
            gamma = tuple(a - b for a, b in zip(self.alpha, beta))
            weight = math.prod(math.comb(a, b) for a, b in zip(self.alpha, beta))
            if any(beta):
                derivative = t_tilde.derivative(point, beta)
                factor = numerics.full_contraction(self.components, derivative, self.r, self.s)
            else:
                factor = self._factor(t_tilde)(point)
            if factor == 0:
                continue
            total += weight * float(factor) * float(omega.derivative(point, gamma))
        return (-1) ** sum(self.alpha) * total

    def spread_fiber(self, slots, p, omega):
        if any(self.alpha):
            return None
        point = self.point
        if not omega.support.contains(point):
            return np.zeros(self.fiber_shape)
        fiber = pull_to_base(self.components, slots, np.ravel(p), point, self.r, self.s)
        return float(omega(point)) * fiber

    def lie_derivative(self, X):
        if X.symbolic is None or not _is_constant(X):
            return super().lie_derivative(X)
        coefficients = [float(c) for c in X.symbolic]
        terms = []
        for i, c in enumerate(coefficients):
            if c == 0:
                continue
            alpha = list(self.alpha)
            alpha[i] += 1
            terms.append(
                (c, DeltaDistribution(self.domain, self.point, alpha, self.components, self.r, self.s))
            )
        return LinearCombination(terms, domain=self.domain, r=self.r, s=self.s)

    def pullback(self, mu):
        if any(self.alpha):
            return super().pullback(mu)
        preimage = mu.apply_inverse(self.point)
        jacobian = mu.jacobian(preimage)
        components = numerics.apply_fiber_map(
            self.components, np.linalg.inv(jacobian), jacobian.T, self.r, self.s
        )
        scale = 1.0 / abs(float(np.linalg.det(jacobian)))
        return DeltaDistribution(
            self.domain, preimage, self.alpha, scale * components, self.r, self.s, label="mu*%s" % self.label
        )


def _is_constant(field):
    from .expressions import coordinate_symbols

    symbols = set(coordinate_symbols(field.dim))
    return all(not (e.free_symbols & symbols) for e in field.symbolic)


class HeavisideDistribution(TensorDistribution):
    """
    The scalar H(x - offset) on a one-dimensional chart.
    """

    kind = "heaviside"

    def __init__(self, domain, offset=0.0, label=""):
        if domain.dim != 1:
            raise UnsupportedDistributionError("Heaviside distributions live on one-dimensional charts.")
        super().__init__(domain, 0, 0, label=label or "H(x-%g)" % offset)
        self.offset = float(offset)

    def singular_support(self):
        return (np.array([self.offset]),)

    def _pair(self, t_tilde, omega):
        lo, hi = omega.support.lower[0], omega.support.upper[0]
        if self.offset >= hi:
            return 0.0
        start = max(self.offset, lo)
        return quadrature.adaptive_gauss_legendre(
            lambda x: t_tilde(x[:, None]) * omega(x[:, None]), start, hi
        )

    def lie_derivative(self, X):
        if X.symbolic is None or not _is_constant(X):
            return super().lie_derivative(X)
        c = float(X.symbolic[0])
        return LinearCombination([(c, DeltaDistribution(self.domain, [self.offset]))], domain=self.domain)


class PrincipalValueDistribution(TensorDistribution):
    """
    vp(1/(x - point)) on a one-dimensional chart, by symmetric excision with
    Richardson extrapolation in the excision radius.
    """

    kind = "principal_value"

    def __init__(self, domain, point=0.0, label=""):
        if domain.dim != 1:
            raise UnsupportedDistributionError("Principal values live on one-dimensional charts.")
        super().__init__(domain, 0, 0, label=label or "vp(1/(x-%g))" % point)
        self.point = float(point)

    def singular_support(self):
        return (np.array([self.point]),)

    def _pair(self, t_tilde, omega):
        a = self.point
        lo, hi = omega.support.lower[0], omega.support.upper[0]

        def g(x):
            x = np.asarray(x, dtype=float)[:, None]
            return t_tilde(x) * omega(x)

        if a <= lo or a >= hi:
            return quadrature.adaptive_gauss_legendre(lambda x: g(x) / (x - a), lo, hi)

        def symmetric(y):
            return (g(a + y) - g(a - y)) / y

        reach = max(a - lo, hi - a)
        radius = 0.25 * reach
        partial = quadrature.adaptive_gauss_legendre(symmetric, radius, reach)
        table = [[partial]]
        for level in range(1, PV_MAX_LEVELS):
            inner = radius / 2.0
            partial += quadrature.adaptive_gauss_legendre(symmetric, inner, radius)
            radius = inner
            row = [partial]
            for k in range(level):
                factor = 2.0 ** (2 * k + 1)
                row.append(row[k] + (row[k] - table[level - 1][k]) / (factor - 1.0))
            table.append(row)
            if abs(row[-1] - table[level - 1][-1]) < PV_TOLERANCE * max(1.0, abs(row[-1])):
                logger.debug("Principal value converged after %d excision levels", level)
                return row[-1]
        raise PrincipalValueError(
            "Principal value at %g did not converge within %d excision levels." % (a, PV_MAX_LEVELS)
        )


class LinearCombination(TensorDistribution):
    kind = "linear_combination"

    def __init__(self, terms, domain=None, r=None, s=None, label=""):
        terms = [(float(c), v) for c, v in terms]
        if not terms and domain is None:
            raise ValenceError("An empty combination needs an explicit domain.")
        domain = domain or terms[0][1].domain
        r = terms[0][1].r if r is None else r
        s = terms[0][1].s if s is None else s
        for _, v in terms:
            if v.valence != (r, s):
                raise ValenceError("Cannot combine distributions of valence %s and %s." % ((r, s), v.valence))
            if v.dim != domain.dim:
                raise DomainError("Distributions on different charts.")
        super().__init__(domain, r, s)
        self.terms = terms
        self.label = label or " + ".join("%g*%s" % (c, v.label) for c, v in terms) or "0"

    def singular_support(self):
        points = []
        for _, v in self.terms:
            for point in v.singular_support():
                if not any(np.array_equal(point, seen) for seen in points):
                    points.append(point)
        return tuple(points)

    def _pair(self, t_tilde, omega):
        return sum(c * v.pair(t_tilde, omega) for c, v in self.terms if c)

    def spread_fiber(self, slots, p, omega):
        total = np.zeros(self.fiber_shape)
        for c, v in self.terms:
            if not c:
                continue
            fiber = v.spread_fiber(slots, p, omega)
            if fiber is None:
                return None
            total = total + c * fiber
        return total

    def lie_derivative(self, X):
        return LinearCombination(
            [(c, v.lie_derivative(X)) for c, v in self.terms], domain=self.domain, r=self.r, s=self.s
        )

    def pullback(self, mu):
        return LinearCombination([(c, v.pullback(mu)) for c, v in self.terms], domain=self.domain, r=self.r, s=self.s)


class SmoothCoeffProduct(TensorDistribution):
    """
    f·v for a smooth scalar f: ⟨f v, t̃ ⊗ ω⟩ = ⟨v, f t̃ ⊗ ω⟩.
    """

    kind = "smooth_coeff_product"

    def __init__(self, function, inner, label=""):
        if function.valence != (0, 0):
            raise ValenceError("Coefficients of distributions are scalar fields.")
        super().__init__(inner.domain, inner.r, inner.s, label=label or "(%s)*%s" % (function.label, inner.label))
        self.function = function
        self.inner = inner
        self._products = {}

    def singular_support(self):
        return self.inner.singular_support()

    def _weighted(self, t_tilde):
        if t_tilde.symbolic is None:
            return t_tilde.multiply(self.function)
        return _memoized(self._products, t_tilde, lambda t: t.multiply(self.function))

    def _pair(self, t_tilde, omega):
        return self.inner.pair(self._weighted(t_tilde), omega)

    def spread_fiber(self, slots, p, omega):
        if isinstance(self.inner, DeltaDistribution) and any(self.inner.alpha):
            return None
        return self.inner.spread_fiber(slots, p, omega.weighted(self.function))


def _partial_contraction_subscripts(r1, s1, r2, s2):
    letters = iter(string.ascii_letters)
    upper1 = "".join(next(letters) for _ in range(r1))
    lower1 = "".join(next(letters) for _ in range(s1))
    upper2 = "".join(next(letters) for _ in range(r2))
    lower2 = "".join(next(letters) for _ in range(s2))
    field = "..." + upper1 + lower1
    dual = "..." + lower1 + lower2 + upper1 + upper2
    return "%s,%s->...%s%s" % (field, dual, lower2, upper2)


class TensorProductDistribution(TensorDistribution):
    """
    t ⊗ v for a smooth (r1, s1) field t and an (r2, s2) distribution v.
    """

    kind = "tensor_product"

    def __init__(self, field, inner, label=""):
        if field.dim != inner.dim:
            raise DomainError("Factors live on different charts.")
        super().__init__(inner.domain, field.r + inner.r, field.s + inner.s)
        self.field = field
        self.inner = inner
        self.label = label or "%s (x) %s" % (field.label, inner.label)
        self._subscripts = _partial_contraction_subscripts(field.r, field.s, inner.r, inner.s)

    def singular_support(self):
        return self.inner.singular_support()

    def _reduced(self, t_tilde):
        subscripts = self._subscripts
        field = self.field

        def func(points):
            return np.einsum(subscripts, field(points), t_tilde(points))

        return SmoothTensorField(
            self.domain,
            self.inner.s,
            self.inner.r,
            func,
            fd_step=t_tilde.fd_step,
            deriv_order=min(field.deriv_order, t_tilde.deriv_order),
        )

    def _pair(self, t_tilde, omega):
        return self.inner.pair(self._reduced(t_tilde), omega)


class LieDerivativeDistribution(TensorDistribution):
    """
    ⟨L_X v, t̃ ⊗ ω⟩ = -⟨v, L_X t̃ ⊗ ω⟩ - ⟨v, t̃ ⊗ L_X ω⟩.
    """

    kind = "lie_derivative"

    def __init__(self, X, inner):
        super().__init__(inner.domain, inner.r, inner.s, label="L_X(%s)" % inner.label)
        self.X = X
        self.inner = inner
        self._derivatives = {}

    def singular_support(self):
        return self.inner.singular_support()

    def _derived(self, t_tilde):
        if t_tilde.symbolic is None:
            return lie_derivative_tensor(self.X, t_tilde)
        return _memoized(self._derivatives, t_tilde, lambda t: lie_derivative_tensor(self.X, t))

    def _pair(self, t_tilde, omega):
        return -self.inner.pair(self._derived(t_tilde), omega) - self.inner.pair(
            t_tilde, lie_derivative_nform(self.X, omega)
        )


def lie_derivative_distribution(X, v):
    return v.lie_derivative(X)


class PullbackDistribution(TensorDistribution):
    """
    ⟨μ*v, t̃ ⊗ ω⟩ = ⟨v, (μ^{-1})*t̃ ⊗ μ_*ω⟩.
    """

    kind = "pullback"

    def __init__(self, mu, inner):
        super().__init__(inner.domain, inner.r, inner.s, label="mu*(%s)" % inner.label)
        self.mu = mu
        self.inner = inner

    def singular_support(self):
        return tuple(self.mu.apply_inverse(point) for point in self.inner.singular_support())

    def _pair(self, t_tilde, omega):
        return self.inner.pair(pullback_tensor(self.mu.inverse(), t_tilde), omega.push_forward(self.mu))


def zero_distribution(domain, r=0, s=0):
    return LinearCombination([], domain=domain, r=r, s=s)
