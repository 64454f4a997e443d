"""
Representatives of the basic space: evaluators u(ω, p, A) valued in the
(r, s) tensor fiber at p, with directional derivatives in the n-form slot
(``d1``) and in the transport slot (``d3``).

Representatives are immutable evaluation trees. Embedded smooth fields and
embedded distributions differentiate exactly; composite nodes propagate
derivatives by the product rule and everything else falls back to central
differences in the functional slot.
"""
import functools
import itertools
import logging

import numpy as np

from . import numerics
from .exceptions import DomainError, SupportEscapeError, ValenceError
from .geometry import (
    SmoothTensorField,
    as_points,
    lie_derivative_nform,
    lie_derivative_tensor,
)
from .transport import lie_derivative_transport, pullback_transport
from .utils import lab_setting

logger = logging.getLogger(__name__)


class Representative:
    kind = "composite"

    def __init__(self, domain, r, s, label=""):
        if r < 0 or s < 0:
            raise ValenceError("Valence must be non-negative, got (%d, %d)." % (r, s))
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

    @property
    def provenance(self):
        return ("composite", self.kind, self.label)

    def __call__(self, omega, p, A):
        p = np.ravel(as_points(p, self.dim))
        return np.asarray(self._evaluate(omega, p, A), dtype=float).reshape(self.fiber_shape)

    evaluate = __call__

    def _evaluate(self, omega, p, A):
        raise NotImplementedError

    def d1(self, omega, p, A, eta):
        """
        Derivative in the n-form slot along the n-form ``eta``.
        """
        p = np.ravel(as_points(p, self.dim))
        return np.asarray(self._d1(omega, p, A, eta), dtype=float).reshape(self.fiber_shape)

    def _d1(self, omega, p, A, eta):
        step = lab_setting("COLOMBEAU_FUNCTIONAL_STEP")
        return numerics.functional_derivative(lambda h: self(omega.combine(eta, 1.0, h), p, A), step)

    def d3(self, omega, p, A, directions):
        """
        Iterated derivative in the transport slot along ``directions``.
        """
        p = np.ravel(as_points(p, self.dim))
        directions = tuple(directions)
        if not directions:
            return self(omega, p, A)
        return np.asarray(self._d3(omega, p, A, directions), dtype=float).reshape(self.fiber_shape)

    def _d3(self, omega, p, A, directions):
        step = lab_setting("COLOMBEAU_FUNCTIONAL_STEP")
        *rest, last = directions
        return numerics.functional_derivative(lambda h: self.d3(omega, p, A.perturbed(last, h), rest), step)

    def d2(self, omega, p, A, vector):
        """
        Directional derivative in p along the tangent vector ``vector``.
        """
        p = np.ravel(as_points(p, self.dim))
        vector = np.ravel(np.asarray(vector, dtype=float))
        length = float(np.linalg.norm(vector))
        if length == 0:
            return np.zeros(self.fiber_shape)
        step = lab_setting("COLOMBEAU_FD_STEP") * self.domain.scale / length
        return numerics.functional_derivative(lambda h: self(omega, p + h * vector, A), step)

    def frozen_field(self, omega, A, fd_step=None):
        """
        The smooth field p ↦ u(ω, p, A).
        """
        shape = self.fiber_shape

        def func(points):
            batch = points.shape[:-1]
            flat = points.reshape(-1, self.dim)
            values = np.stack([self(omega, point, A) for point in flat]) if len(flat) else np.zeros((0,) + shape)
            return values.reshape(batch + shape)

        return SmoothTensorField(self.domain, self.r, self.s, func, fd_step=fd_step, label="%s(omega,.,A)" % self.label)

    def singular_support(self):
        return ()

    def children(self):
        return ()

    def __add__(self, other):
        return LinearCombination([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return LinearCombination([(1.0, self), (-1.0, other)])

    def __mul__(self, factor):
        return LinearCombination([(float(factor), self)])

    __rmul__ = __mul__

    def __neg__(self):
        return LinearCombination([(-1.0, self)])


class Sigma(Representative):
    kind = "sigma"

    def __init__(self, field):
        super().__init__(field.domain, field.r, field.s, label="sigma(%s)" % field.label)
        self.field = field

    @property
    def provenance(self):
        return ("embedded-smooth", self.field.label)

    def _evaluate(self, omega, p, A):
        return self.field(p)

    def _d1(self, omega, p, A, eta):
        return np.zeros(self.fiber_shape)

    def _d3(self, omega, p, A, directions):
        return np.zeros(self.fiber_shape)

    def frozen_field(self, omega, A, fd_step=None):
        return self.field


def sigma(t):
    return Sigma(t)


@functools.lru_cache(maxsize=16)
def unit_field(domain):
    return SmoothTensorField.constant(domain, 0, 0, 1.0, label="1")


def spreading(slots, tau, p, s, r, domain):
    """
    The (s, r) field q ↦ (per-slot transport of the fiber τ at p to q); the
    contravariant slot k uses slots[k](p, q), the covariant slot k uses
    slots[s + k](q, p)^T.
    """
    tau = np.asarray(tau, dtype=float)
    p = np.ravel(p)
    if r + s == 0:
        if float(tau) == 1.0:
            return unit_field(domain)
        return SmoothTensorField.constant(domain, 0, 0, float(tau), label="theta")

    def func(points):
        batch = points.shape[:-1]
        result = np.broadcast_to(tau, batch + tau.shape)
        base = np.broadcast_to(p, points.shape)
        for k in range(s):
            result = numerics.slot_action(result, slots[k](base, points), k)
        for k in range(r):
            result = numerics.slot_action(result, np.swapaxes(slots[s + k](points, base), -1, -2), s + k)
        return np.asarray(result, dtype=float)

    return SmoothTensorField(domain, s, r, func, label="theta")


def spreading_theta(A, t_tilde, p):
    """
    θ(A, t̃, p): q ↦ A^s_r(p, q) t̃(p) for an (s, r) field t̃.
    """
    p = np.ravel(as_points(p, t_tilde.dim))
    s, r = t_tilde.valence
    return spreading((A,) * (r + s), t_tilde(p), p, s, r, t_tilde.domain)


def spread_derivative(A, directions, t_tilde, p):
    """
    d_B^j of θ(A, t̃, p): the sum over injective placements of the directions
    on the r + s factors of A^s_r, as a list of fields.
    """
    p = np.ravel(as_points(p, t_tilde.dim))
    s, r = t_tilde.valence
    fields = []
    for placement in itertools.permutations(range(r + s), len(directions)):
        slots = [A] * (r + s)
        for direction, slot in zip(directions, placement):
            slots[slot] = direction
        fields.append(spreading(tuple(slots), t_tilde(p), p, s, r, t_tilde.domain))
    return fields


class Iota(Representative):
    """
    ι(v): (ι(v)(ω, p, A)) · t̃(p) = ⟨v, θ(A, t̃, p) ⊗ ω⟩.
    """

    kind = "iota"

    def __init__(self, distribution):
        super().__init__(distribution.domain, distribution.r, distribution.s, label="iota(%s)" % distribution.label)
        self.distribution = distribution

    @property
    def provenance(self):
        return ("embedded-distribution", self.distribution.label)

    def singular_support(self):
        return self.distribution.singular_support()

    def _check(self, omega):
        if not self.domain.contains_box(omega.support):
            raise SupportEscapeError("Support %s of the n-form escapes the domain." % (omega.support,))

    def _evaluate_slots(self, omega, p, slots):
        v = self.distribution
        fiber = v.spread_fiber(slots, p, omega)
        if fiber is not None:
            return fiber
        r, s = self.r, self.s
        values = np.zeros(self.fiber_shape)
        for index in np.ndindex(*self.fiber_shape):
            upper, lower = index[:r], index[r:]
            tau = numerics.basis_fiber(self.dim, r + s, lower + upper)
            theta = spreading(slots, tau, p, s, r, self.domain)
            values[index] = v.pair(theta, omega)
        return values

    def _evaluate(self, omega, p, A):
        self._check(omega)
        return self._evaluate_slots(omega, p, (A,) * (self.r + self.s))

    def _d1(self, omega, p, A, eta):
        self._check(eta)
        return self._evaluate_slots(eta, p, (A,) * (self.r + self.s))

    def _d3(self, omega, p, A, directions):
        self._check(omega)
        rank = self.r + self.s
        total = np.zeros(self.fiber_shape)
        for placement in itertools.permutations(range(rank), len(directions)):
            slots = [A] * rank
            for direction, slot in zip(directions, placement):
                slots[slot] = direction
            total = total + self._evaluate_slots(omega, p, tuple(slots))
        return total


def iota(v):
    return Iota(v)


def _leibniz_subsets(directions):
    indices = range(len(directions))
    for size in range(len(directions) + 1):
        for chosen in itertools.combinations(indices, size):
            rest = tuple(directions[i] for i in indices if i not in chosen)
            yield tuple(directions[i] for i in chosen), rest


class TensorProduct(Representative):
    kind = "tensor_product"

    def __init__(self, first, second):
        if first.dim != second.dim:
            raise DomainError("Factors live on different charts.")
        super().__init__(first.domain, first.r + second.r, first.s + second.s)
        self.first = first
        self.second = second
        self.label = "(%s (x) %s)" % (first.label, second.label)

    def children(self):
        return (self.first, self.second)

    def singular_support(self):
        return _merge_points(self.first.singular_support(), self.second.singular_support())

    def _product(self, a, b):
        return numerics.fiber_tensor_product(a, b, self.first.r, self.first.s, self.second.r, self.second.s)

    def _evaluate(self, omega, p, A):
        return self._product(self.first(omega, p, A), self.second(omega, p, A))

    def _d1(self, omega, p, A, eta):
        return self._product(self.first.d1(omega, p, A, eta), self.second(omega, p, A)) + self._product(
            self.first(omega, p, A), self.second.d1(omega, p, A, eta)
        )

    def _d3(self, omega, p, A, directions):
        total = np.zeros(self.fiber_shape)
        for chosen, rest in _leibniz_subsets(directions):
            total = total + self._product(self.first.d3(omega, p, A, chosen), self.second.d3(omega, p, A, rest))
        return total


def tensor_product(u1, u2):
    return TensorProduct(u1, u2)


class Contraction(Representative):
    kind = "contraction"

    def __init__(self, inner, upper, lower):
        if not (0 <= upper < inner.r and 0 <= lower < inner.s):
            raise ValenceError(
                "Cannot contract slots (%d, %d) of a (%d,%d) representative." % (upper, lower, inner.r, inner.s)
            )
        super().__init__(inner.domain, inner.r - 1, inner.s - 1, label="C^%d_%d(%s)" % (upper, lower, inner.label))
        self.inner = inner
        self.upper = upper
        self.lower = lower

    def children(self):
        return (self.inner,)

    def singular_support(self):
        return self.inner.singular_support()

    def _trace(self, values):
        return np.trace(values, axis1=self.upper, axis2=self.inner.r + self.lower)

    def _evaluate(self, omega, p, A):
        return self._trace(self.inner(omega, p, A))

    def _d1(self, omega, p, A, eta):
        return self._trace(self.inner.d1(omega, p, A, eta))

    def _d3(self, omega, p, A, directions):
        return self._trace(self.inner.d3(omega, p, A, directions))


def contract(u, i, j):
    return Contraction(u, i, j)


def saturate(u, t_tilde):
    """
    The scalar u · t̃: every slot of u contracted against σ(t̃).
    """
    if t_tilde.valence != (u.s, u.r):
        raise ValenceError("Saturating a (%d,%d) representative needs a (%d,%d) field." % (u.r, u.s, u.s, u.r))
    result = TensorProduct(u, Sigma(t_tilde))
    for a in reversed(range(u.r)):
        result = Contraction(result, a, u.s + a)
    for b in reversed(range(u.s)):
        result = Contraction(result, b, b)
    return result


class LinearCombination(Representative):
    kind = "linear_combination"

    def __init__(self, terms, domain=None, r=None, s=None):
        terms = [(float(c), u) for c, u in terms]
        if not terms and domain is None:
            raise ValenceError("An empty combination needs an explicit domain.")
        first = terms[0][1] if terms else None
        domain = domain or first.domain
        r = first.r if r is None else r
        s = first.s if s is None else s
        for _, u in terms:
            if u.valence != (r, s):
                raise ValenceError("Cannot add representatives of valence %s and %s." % ((r, s), u.valence))
        super().__init__(domain, r, s)
        self.terms = terms
        self.label = " + ".join("%g*%s" % (c, u.label) for c, u in terms) or "0"

    def children(self):
        return tuple(u for _, u in self.terms)

    def singular_support(self):
        return _merge_points(*(u.singular_support() for _, u in self.terms))

    def _combine(self, method, *args):
        total = np.zeros(self.fiber_shape)
        for c, u in self.terms:
            if c:
                total = total + c * getattr(u, method)(*args)
        return total

    def _evaluate(self, omega, p, A):
        return self._combine("__call__", omega, p, A)

    def _d1(self, omega, p, A, eta):
        return self._combine("d1", omega, p, A, eta)

    def _d3(self, omega, p, A, directions):
        return self._combine("d3", omega, p, A, directions)


def zero_representative(domain, r=0, s=0):
    return LinearCombination([], domain=domain, r=r, s=s)


class HatPullback(Representative):
    """
    (μ̂*u)(ω, p, A) = (T_{μ(p)} μ^{-1})^r_s u(μ_*ω, μ(p), (μ^{-1}, μ^{-1})*A).
    """

    kind = "hat_pullback"

    def __init__(self, mu, inner):
        super().__init__(inner.domain, inner.r, inner.s, label="mu^*(%s)" % inner.label)
        self.mu = mu
        self.inner = inner
        self._inverse = mu.inverse()

    def children(self):
        return (self.inner,)

    def singular_support(self):
        return tuple(self.mu.apply_inverse(point) for point in self.inner.singular_support())

    def _pushed(self, A):
        return pullback_transport(self._inverse, self._inverse, A)

    def _to_base(self, values, p):
        jacobian = self.mu.jacobian(p)
        return numerics.apply_fiber_map(values, np.linalg.inv(jacobian), jacobian.T, self.r, self.s)

    def _evaluate(self, omega, p, A):
        return self._to_base(self.inner(omega.push_forward(self.mu), self.mu(p), self._pushed(A)), p)

    def _d1(self, omega, p, A, eta):
        values = self.inner.d1(omega.push_forward(self.mu), self.mu(p), self._pushed(A), eta.push_forward(self.mu))
        return self._to_base(values, p)

    def _d3(self, omega, p, A, directions):
        pushed = tuple(self._pushed(B) for B in directions)
        values = self.inner.d3(omega.push_forward(self.mu), self.mu(p), self._pushed(A), pushed)
        return self._to_base(values, p)


def hat_pullback(mu, u):
    return HatPullback(mu, u)


HAT_LIE_PARTS = ("omega", "p", "A")


class HatLie(Representative):
    """
    L̂_X u = L_X(u(ω, ., A))(p) - d1 u(ω, p, A)(L_X ω) - d3 u(ω, p, A)(L_{X,X} A).

    ``parts`` selects the terms of the decomposition L̂_{X,0,0} + L̂_{0,X,0} +
    L̂_{0,0,X} by slot name: "omega", "p" and "A".
    """

    kind = "hat_lie"

    def __init__(self, X, inner, parts=HAT_LIE_PARTS):
        if X.valence != (1, 0):
            raise ValenceError("L̂_X needs a vector field X.")
        parts = tuple(parts)
        unknown = set(parts) - set(HAT_LIE_PARTS)
        if unknown:
            raise ValueError("Unknown Lie derivative parts: %s" % ", ".join(sorted(unknown)))
        super().__init__(inner.domain, inner.r, inner.s, label="L^_X(%s)" % inner.label)
        self.X = X
        self.inner = inner
        self.parts = parts

    def children(self):
        return (self.inner,)

    def singular_support(self):
        return self.inner.singular_support()

    def _evaluate(self, omega, p, A):
        total = np.zeros(self.fiber_shape)
        if "p" in self.parts:
            frozen = self.inner.frozen_field(omega, A)
            total = total + lie_derivative_tensor(self.X, frozen)(p)
        if "omega" in self.parts:
            total = total - self.inner.d1(omega, p, A, lie_derivative_nform(self.X, omega))
        if "A" in self.parts:
            total = total - self.inner.d3(omega, p, A, [lie_derivative_transport(self.X, self.X, A)])
        return total

    def scalar_p_term(self, omega, p, A):
        """
        For scalars the p-slot term is the directional derivative d2 u(ω, p, A)(X(p)).
        """
        if self.r + self.s:
            raise ValenceError("The directional form of the p-slot term is for scalars.")
        p = np.ravel(as_points(p, self.dim))
        return self.inner.d2(omega, p, A, self.X(p))


def hat_lie(X, u, parts=HAT_LIE_PARTS):
    return HatLie(X, u, parts)


class Directional(Representative):
    """
    (ω, p, A) ↦ d3^j u(ω, p, A)(B_1, ..., B_j) with frozen directions.
    """

    kind = "directional"

    def __init__(self, inner, directions):
        super().__init__(inner.domain, inner.r, inner.s, label="d3^%d(%s)" % (len(directions), inner.label))
        self.inner = inner
        self.directions = tuple(directions)

    def children(self):
        return (self.inner,)

    def singular_support(self):
        return self.inner.singular_support()

    def _evaluate(self, omega, p, A):
        return self.inner.d3(omega, p, A, self.directions)

    def _d3(self, omega, p, A, directions):
        return self.inner.d3(omega, p, A, self.directions + tuple(directions))


def directional(u, directions):
    return Directional(u, directions) if directions else u


class SupportScale(Representative):
    """
    A scalar depending on ω only through its support radius, g(radius(ω)).
    """

    kind = "support_scale"

    def __init__(self, domain, function, label=""):
        super().__init__(domain, 0, 0, label=label or "g(radius)")
        self.function = function

    def _evaluate(self, omega, p, A):
        with np.errstate(over="ignore"):
            return np.asarray(self.function(omega.radius), dtype=float)

    def _d3(self, omega, p, A, directions):
        return np.zeros(())


class Restricted(Representative):
    """
    u restricted to an open box U: defined for p ∈ U and supp ω ⊂ U.
    """

    kind = "restricted"

    def __init__(self, inner, box):
        domain = inner.domain.restrict(box)
        super().__init__(domain, inner.r, inner.s, label="%s|U" % inner.label)
        self.inner = inner
        self.box = box

    def children(self):
        return (self.inner,)

    def singular_support(self):
        return tuple(point for point in self.inner.singular_support() if self.box.contains(point, strict=True))

    def _check(self, omega, p):
        if not self.box.contains(p, strict=True):
            raise DomainError("Point %s lies outside the restriction box %s." % (p, self.box))
        if not self.domain.contains_box(omega.support):
            raise SupportEscapeError("Support %s escapes the restriction box %s." % (omega.support, self.box))

    def _evaluate(self, omega, p, A):
        self._check(omega, p)
        return self.inner(omega, p, A)

    def _d1(self, omega, p, A, eta):
        self._check(omega, p)
        return self.inner.d1(omega, p, A, eta)

    def _d3(self, omega, p, A, directions):
        self._check(omega, p)
        return self.inner.d3(omega, p, A, directions)


def restrict(u, box):
    return Restricted(u, box)


def _merge_points(*groups):
    points = []
    for group in groups:
        for point in group:
            point = np.ravel(point)
            if not any(np.array_equal(point, seen) for seen in points):
                points.append(point)
    return tuple(points)


def operation_tree(u):
    """
    Nested (kind, label, children) description of a representative.
    """
    return {
        "kind": u.kind,
        "label": u.label,
        "valence": list(u.valence),
        "children": [operation_tree(child) for child in u.children()],
    }
