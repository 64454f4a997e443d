"""
Compactly supported transport operators A(p, q): T_pM -> T_qM, their induced
maps on tensor fibers, pullbacks under pairs of diffeomorphisms, Lie
derivatives along pairs of flows and two-point tensors with the bullet map.

Matrices are stored in chart components, A(p, q)[i, j] = dy^i(A ∂_j), and
evaluated in batches: ``A(p, q)`` broadcasts p and q of shape (..., n) and
returns (..., n, n).
"""
import logging
from typing import NamedTuple

import numpy as np

from . import numerics
from .exceptions import BatteryError, DomainError, ValenceError
from .expressions import compile_components, coordinate_names, parse_expression
from .geometry import (
    Box,
    SmoothTensorField,
    as_points,
    flow_with_jacobian,
    geodesic_parallel_transport,
    lie_derivative_tensor,
    pullback_tensor,
)
from .utils import lab_setting

logger = logging.getLogger(__name__)


def smooth_step(t):
    """
    C∞ step, exactly 0 for t <= 0 and exactly 1 for t >= 1.
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _everywhere(domain):
    if domain.bounds is not None:
        return domain.bounds
    return Box((-np.inf,) * domain.dim, (np.inf,) * domain.dim)


class PlateauCutoff:
    """
    χ(p, q) = ψ(p) ψ(q) φ(|q - p|_∞): ψ is 1 on ``plateau`` and 0 outside the
    plateau grown by ``margin``; φ is 1 below ``near`` and 0 beyond
    ``near + near_margin`` (no distance factor when ``near`` is None).
    """

    def __init__(self, plateau, margin, near=None, near_margin=None):
        self.plateau = plateau
        self.margin = float(margin)
        self.near = near
        self.near_margin = near_margin if near_margin is not None else self.margin

    def __repr__(self):
        if self.plateau is None:
            return "<PlateauCutoff empty>"
        return "<PlateauCutoff %s margin=%g near=%s>" % (self.plateau, self.margin, self.near)

    @classmethod
    def empty(cls):
        return cls(None, 1.0)

    @property
    def outer(self):
        return None if self.plateau is None else self.plateau.expand(self.margin)

    @property
    def support(self):
        if self.plateau is None:
            return None
        return self.outer.product(self.outer)

    def box_factor(self, points):
        lower = np.asarray(self.plateau.lower)
        upper = np.asarray(self.plateau.upper)
        rising = smooth_step((points - (lower - self.margin)) / self.margin)
        falling = smooth_step(((upper + self.margin) - points) / self.margin)
        return np.prod(rising * falling, axis=-1)

    def __call__(self, p, q):
        p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
        if self.plateau is None:
            return np.zeros(p.shape[:-1])
        value = self.box_factor(p) * self.box_factor(q)
        if self.near is not None:
            distance = np.max(np.abs(q - p), axis=-1)
            value = value * smooth_step((self.near + self.near_margin - distance) / self.near_margin)
        return value

    def as_field(self, domain):
        """
        χ as a scalar field on the product domain.
        """
        n = domain.dim
        return SmoothTensorField(
            domain.product(),
            0,
            0,
            lambda points: self(points[..., :n], points[..., n:]),
            label="chi",
        )


class TransportOperator:
    def __init__(self, domain, matrix, support=None, core_region=None, kernel_region=None, label=""):
        self.domain = domain
        self._matrix = matrix
        self.support = support
        self.core_region = core_region
        self.kernel_region = kernel_region
        self.label = label

    def __repr__(self):
        return "<TransportOperator %s>" % (self.label or "")

    @property
    def dim(self):
        return self.domain.dim

    def __call__(self, p, q):
        p = as_points(p, self.dim)
        q = as_points(q, self.dim)
        p, q = np.broadcast_arrays(p, q)
        return np.asarray(self._matrix(p, q), dtype=float)

    def diagonal(self, points):
        return self(points, points)

    # construction

    @classmethod
    def zero(cls, domain):
        n = domain.dim
        return cls(
            domain,
            lambda p, q: np.zeros(p.shape[:-1] + (n, n)),
            kernel_region=_everywhere(domain),
            label="0",
        )

    @classmethod
    def identity_cutoff(cls, domain, chi):
        n = domain.dim
        return cls(
            domain,
            lambda p, q: chi(p, q)[..., None, None] * np.eye(n),
            support=chi.support,
            core_region=chi.plateau,
            label="chi*id",
        )

    @classmethod
    def diagonal_vanishing(cls, domain, chi, matrix=None, weights=None):
        """
        B(p, q) = χ(p, q) (Σ_i c_i (q_i - p_i)) M, which vanishes on the diagonal.
        """
        n = domain.dim
        matrix = np.eye(n) if matrix is None else np.asarray(matrix, dtype=float)
        weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        if matrix.shape != (n, n) or weights.shape != (n,):
            raise ValenceError("Direction matrix must be %dx%d with %d weights." % (n, n, n))

        def func(p, q):
            factor = chi(p, q) * ((q - p) @ weights)
            return factor[..., None, None] * matrix

        return cls(domain, func, support=chi.support, kernel_region=_everywhere(domain), label="B")

    @classmethod
    def from_expressions(cls, domain, components, support=None, core_region=None, kernel_region=None, label=""):
        """
        An n x n matrix of expressions over p1..pn, q1..qn, zero outside ``support``.
        """
        n = domain.dim
        names = dict(coordinate_names(n, "p"))
        names.update(coordinate_names(n, "q"))
        flat = list(np.ravel(np.asarray(components, dtype=object)))
        if len(flat) != n * n:
            raise ValenceError("A transport matrix on a %d-dimensional chart needs %d entries." % (n, n * n))
        symbols = tuple(names["p%d" % (i + 1)] for i in range(n)) + tuple(names["q%d" % (i + 1)] for i in range(n))
        evaluate = compile_components([parse_expression(text, names) for text in flat], symbols)

        def func(p, q):
            points = np.concatenate([p, q], axis=-1)
            values = evaluate(points).reshape(p.shape[:-1] + (n, n))
            if support is not None:
                values = values * support.contains(points)[..., None, None]
            return values

        return cls(domain, func, support=support, core_region=core_region, kernel_region=kernel_region, label=label)

    # algebra

    def combine(self, other, a=1.0, b=1.0):
        if self.domain.dim != other.domain.dim:
            raise DomainError("Transport operators on different charts.")
        core = None
        if a == 1.0 and other.kernel_region is not None and self.core_region is not None:
            if other.kernel_region.contains_box(self.core_region):
                core = self.core_region
        support = None
        if self.support is not None and other.support is not None:
            support = self.support.union(other.support)
        return TransportOperator(
            self.domain,
            lambda p, q: a * self(p, q) + b * other(p, q),
            support=support,
            core_region=core,
            label="%g*%s%+g*%s" % (a, self.label, b, other.label),
        )

    def __add__(self, other):
        return self.combine(other)

    def __sub__(self, other):
        return self.combine(other, 1.0, -1.0)

    def scaled(self, factor):
        factor = float(factor)
        return TransportOperator(
            self.domain,
            lambda p, q: factor * self(p, q),
            support=self.support,
            kernel_region=self.kernel_region if factor else _everywhere(self.domain),
            label="%g*%s" % (factor, self.label),
        )

    def perturbed(self, direction, h):
        """
        A + h B, keeping the core of A when B vanishes on its diagonal.
        """
        return self.combine(direction, 1.0, float(h))


def induced_map_asr(A, p, q, r, s):
    """
    Matrix of A^s_r(p, q) on flattened (s, r) fibers: s copies of A(p, q) on
    the contravariant slots and r copies of A(q, p)^T on the covariant ones.
    """
    forward = A(np.ravel(p), np.ravel(q))
    backward_t = A(np.ravel(q), np.ravel(p)).T
    result = np.ones((1, 1))
    for _ in range(s):
        result = np.kron(result, forward)
    for _ in range(r):
        result = np.kron(result, backward_t)
    return result


def apply_induced_map(A, p, q, fiber, r, s):
    """
    A^s_r(p, q) applied to (s, r) fibers at p, batched over p and q.
    """
    return numerics.apply_fiber_map(fiber, A(p, q), np.swapaxes(A(q, p), -1, -2), s, r)


def core_contains(A, K, tol=None, points_per_axis=11):
    """
    True iff K lies inside the core of A with positive margin and A(p, p) = id
    on a lattice over K.
    """
    tol = lab_setting("COLOMBEAU_CORE_TOLERANCE") if tol is None else tol
    if A.core_region is None:
        return False
    if not (
        np.all(np.asarray(K.lower) > np.asarray(A.core_region.lower))
        and np.all(np.asarray(K.upper) < np.asarray(A.core_region.upper))
    ):
        return False
    points = K.grid(points_per_axis)
    deviation = np.abs(A.diagonal(points) - np.eye(A.dim))
    return bool(np.max(deviation) <= tol)


def kernel_contains(B, U, tol=None, points_per_axis=11):
    """
    True iff B(p, p) vanishes on a lattice over U.
    """
    tol = lab_setting("COLOMBEAU_CORE_TOLERANCE") if tol is None else tol
    points = U.grid(points_per_axis)
    return bool(np.max(np.abs(B.diagonal(points))) <= tol)


def _preimage_core(mu, core):
    if core is None:
        return None
    samples = mu.apply_inverse(core.grid(9))
    candidate = Box.bounding(samples)
    center = candidate.center
    for _ in range(20):
        if np.all(core.contains(mu(candidate.grid(9)))):
            return candidate
        half = 0.45 * candidate.widths
        candidate = Box(tuple(center - half), tuple(center + half))
    return None


def _preimage_box(mu, box):
    image = Box.bounding(mu.apply_inverse(box.grid(9)))
    return image.expand(0.05 * float(np.max(image.widths)))


def _factors(support, n):
    return Box(support.lower[:n], support.upper[:n]), Box(support.lower[n:], support.upper[n:])


def _preimage_support(mu, nu, support):
    """
    A box around (μ^{-1} × ν^{-1})(support), grown like push-forward supports.
    """
    if support is None:
        return None
    p_box, q_box = _factors(support, mu.dim)
    return _preimage_box(mu, p_box).product(_preimage_box(nu, q_box))


def pullback_transport(mu, nu, A):
    """
    ((μ, ν)*A)(p, q) = Dν(q)^{-1} A(μ(p), ν(q)) Dμ(p).
    """

    def func(p, q):
        return np.linalg.solve(nu.jacobian(q), A(mu(p), nu(q)) @ mu.jacobian(p))

    core = _preimage_core(mu, A.core_region) if mu is nu else None
    return TransportOperator(
        A.domain,
        func,
        support=_preimage_support(mu, nu, A.support),
        core_region=core,
        label="(%s,%s)*%s" % (mu.label, nu.label, A.label),
    )


def _flow_pullback(X, Y, A, tau, p, q):
    moved_p, jac_p = flow_with_jacobian(X, tau, p, h_ode=tau)
    moved_q, jac_q = flow_with_jacobian(Y, tau, q, h_ode=tau)
    return np.linalg.solve(jac_q, A(moved_p, moved_q) @ jac_p)


def _flow_reach(X, Y, support, tau):
    """
    The support grown by how far the flows of X and Y move its points in time τ.
    """
    if support is None:
        return None
    p_box, q_box = _factors(support, X.dim)
    speed = max(float(np.max(np.abs(X(p_box.grid(9))))), float(np.max(np.abs(Y(q_box.grid(9))))))
    return support.expand(2.0 * tau * speed)


def lie_derivative_transport(X, Y, A, tau=None):
    """
    L_{X,Y} A: derivative at 0 of τ ↦ (Fl^X_τ, Fl^Y_τ)*A by central
    differences with one Richardson level. L_{X,X} A vanishes on the diagonal
    over core(A).
    """
    tau = tau or lab_setting("COLOMBEAU_LIE_TAU")

    def quotient(p, q, h):
        return (_flow_pullback(X, Y, A, h, p, q) - _flow_pullback(X, Y, A, -h, p, q)) / (2 * h)

    def func(p, q):
        return numerics.richardson(quotient(p, q, tau), quotient(p, q, tau / 2), 2)

    return TransportOperator(
        A.domain,
        func,
        support=_flow_reach(X, Y, A.support, tau),
        kernel_region=A.core_region if X is Y else None,
        label="L_(X,Y)%s" % A.label,
    )


def build_geodesic_transport(metric, chi, K=None):
    """
    A(p, q) = χ(p, q) · (parallel transport p -> q along the geodesic).
    Transport is only computed where χ does not vanish.
    """
    domain = metric.domain
    n = domain.dim
    if K is not None and (chi.plateau is None or not chi.plateau.contains_box(K)):
        raise BatteryError("The cutoff is not identically 1 near %s." % (K,))

    def func(p, q):
        weights = chi(p, q)
        values = np.zeros(p.shape[:-1] + (n, n))
        active = weights != 0
        if np.any(active):
            transport = geodesic_parallel_transport(metric, p[active], q[active])
            values[active] = weights[active][:, None, None] * transport
        return values

    return TransportOperator(
        domain,
        func,
        support=chi.support,
        core_region=chi.plateau,
        label="geodesic(%s)" % metric.label,
    )


class TwoPointTerm(NamedTuple):
    coefficient: SmoothTensorField  # scalar on the product domain
    covector: SmoothTensorField  # (0, 1) at p
    vector: SmoothTensorField  # (1, 0) at q


def _split(points, n):
    return points[..., :n], points[..., n:]


def product_vector_field(X, Y):
    """
    (X, Y) as a vector field on the product domain.
    """
    n = X.dim
    domain = X.domain.product()

    def func(points):
        p, q = _split(points, n)
        return np.concatenate([X(p), Y(q)], axis=-1)

    def partials(points):
        p, q = _split(points, n)
        batch = points.shape[:-1]
        values = np.zeros(batch + (2 * n, 2 * n))
        values[..., :n, :n] = X.partials(p)
        values[..., n:, n:] = Y.partials(q)
        return values

    return SmoothTensorField(
        domain, 1, 0, func, partials=partials, deriv_order=min(X.deriv_order, Y.deriv_order), label="(X,Y)"
    )


def _composed_coefficient(f, mu, nu):
    n = mu.dim

    def func(points):
        p, q = _split(points, n)
        return f(np.concatenate([mu(p), nu(q)], axis=-1))

    return SmoothTensorField(f.domain, 0, 0, func, fd_step=f.fd_step, deriv_order=f.deriv_order)


class TwoPointTensor:
    """
    A finite sum of terms f(p, q) η(p) ⊗ ξ(q).
    """

    def __init__(self, domain, terms=()):
        self.domain = domain
        self.terms = tuple(TwoPointTerm(*term) for term in terms)
        for term in self.terms:
            if term.coefficient.valence != (0, 0) or term.coefficient.dim != 2 * domain.dim:
                raise ValenceError("Coefficients of two-point tensors are scalars on the product domain.")
            if term.covector.valence != (0, 1) or term.vector.valence != (1, 0):
                raise ValenceError("Two-point terms pair a one-form at p with a vector at q.")

    def __repr__(self):
        return "<TwoPointTensor %d terms>" % len(self.terms)

    def __add__(self, other):
        return TwoPointTensor(self.domain, self.terms + other.terms)

    def matrix(self, p, q):
        """
        Υ_•(p, q) = Σ f(p, q) ξ(q) η(p)^T.
        """
        n = self.domain.dim
        p, q = np.broadcast_arrays(as_points(p, n), as_points(q, n))
        total = np.zeros(p.shape[:-1] + (n, n))
        points = np.concatenate([p, q], axis=-1)
        for term in self.terms:
            f = term.coefficient(points)
            total = total + f[..., None, None] * term.vector(q)[..., :, None] * term.covector(p)[..., None, :]
        return total

    def pullback(self, mu, nu):
        """
        (μ, ν)*Υ, term by term: f(μp, νq) μ*η(p) ⊗ ν*ξ(q).
        """
        return TwoPointTensor(
            self.domain,
            [
                (_composed_coefficient(term.coefficient, mu, nu), pullback_tensor(mu, term.covector), pullback_tensor(nu, term.vector))
                for term in self.terms
            ],
        )

    def lie_derivative(self, X, Y):
        """
        L_{X,Y}(f η ⊗ ξ) = (L_{(X,Y)} f) η ⊗ ξ + f (L_X η) ⊗ ξ + f η ⊗ (L_Y ξ).
        """
        XY = product_vector_field(X, Y)
        terms = []
        for term in self.terms:
            terms.append((lie_derivative_tensor(XY, term.coefficient), term.covector, term.vector))
            terms.append((term.coefficient, lie_derivative_tensor(X, term.covector), term.vector))
            terms.append((term.coefficient, term.covector, lie_derivative_tensor(Y, term.vector)))
        return TwoPointTensor(self.domain, terms)


def two_point_to_transport(upsilon):
    return TransportOperator(upsilon.domain, upsilon.matrix, label="bullet")

