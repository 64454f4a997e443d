"""
Differential geometry on a single chart domain: boxes, tensor fields, n-forms,
metrics, diffeomorphisms, flows, classical Lie derivatives and parallel
transport along geodesics.

Every evaluator is vectorized: points are arrays of shape (..., n) and tensor
fields return arrays of shape (..., n, ..., n) in the fiber layout described
in ``colombeau_lab.numerics``.
"""
import functools
import logging
from typing import NamedTuple, Optional

import numpy as np
import sympy

from . import numerics, quadrature
from .exceptions import (
    DerivativeOrderError,
    DomainError,
    FlowEscapeError,
    InjectivityRadiusError,
    ShootingError,
    SingularJacobianError,
    SupportEscapeError,
    ValenceError,
)
from .expressions import (
    compile_components,
    coordinate_names,
    coordinate_symbols,
    flatten_nested,
    nested_shape,
    parse_expression,
)
from .utils import lab_setting

logger = logging.getLogger(__name__)

NFORM_FD_FRACTION = 1e-3


class Box(NamedTuple):
    lower: tuple
    upper: tuple

    @classmethod
    def from_bounds(cls, lower, upper):
        lower = tuple(float(a) for a in np.ravel(lower))
        upper = tuple(float(b) for b in np.ravel(upper))
        if len(lower) != len(upper) or not lower:
            raise ValueError("Box bounds must be non-empty and of equal length.")
        if any(b <= a for a, b in zip(lower, upper)):
            raise ValueError("Box %r x %r has no volume." % (lower, upper))
        return cls(lower, upper)

    @classmethod
    def around(cls, center, radius):
        center = np.ravel(np.asarray(center, dtype=float))
        return cls.from_bounds(center - radius, center + radius)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def widths(self):
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def center(self):
        return 0.5 * (np.asarray(self.upper) + np.asarray(self.lower))

    def contains(self, points, strict=False):
        points = np.asarray(points, dtype=float)
        lower = np.asarray(self.lower)
        upper = np.asarray(self.upper)
        if strict:
            return np.all((points > lower) & (points < upper), axis=-1)
        return np.all((points >= lower) & (points <= upper), axis=-1)

    def contains_box(self, other, margin=0.0):
        return bool(
            np.all(np.asarray(other.lower) - margin >= np.asarray(self.lower))
            and np.all(np.asarray(other.upper) + margin <= np.asarray(self.upper))
        )

    def expand(self, amount):
        return Box(
            tuple(a - amount for a in self.lower),
            tuple(b + amount for b in self.upper),
        )

    def union(self, other):
        return Box(
            tuple(min(a, b) for a, b in zip(self.lower, other.lower)),
            tuple(max(a, b) for a, b in zip(self.upper, other.upper)),
        )

    def product(self, other):
        return Box(self.lower + other.lower, self.upper + other.upper)

    def grid(self, points_per_axis):
        """
        Lattice including the faces of the box, shape (points_per_axis**n, n).
        """
        axes = [np.linspace(a, b, points_per_axis) for a, b in zip(self.lower, self.upper)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @classmethod
    def bounding(cls, points):
        points = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
        return cls(tuple(points.min(axis=0)), tuple(points.max(axis=0)))


class ChartDomain(NamedTuple):
    dim: int
    bounds: Optional[Box] = None

    @classmethod
    def create(cls, dim, lower=None, upper=None):
        if int(dim) < 1:
            raise ValueError("A chart domain needs dim >= 1.")
        if lower is None and upper is None:
            return cls(int(dim), None)
        bounds = Box.from_bounds(lower, upper)
        if bounds.dim != int(dim):
            raise ValueError("Bounds of dimension %d for a %d-dimensional domain." % (bounds.dim, dim))
        return cls(int(dim), bounds)

    @property
    def scale(self):
        if self.bounds is None:
            return 1.0
        return float(np.max(self.bounds.widths))

    def contains(self, points):
        if self.bounds is None:
            return np.ones(np.shape(points)[:-1], dtype=bool)
        return self.bounds.contains(points, strict=True)

    def contains_box(self, box):
        if self.bounds is None:
            return True
        return bool(
            np.all(np.asarray(box.lower) > np.asarray(self.bounds.lower))
            and np.all(np.asarray(box.upper) < np.asarray(self.bounds.upper))
        )

    def product(self):
        """
        The domain of two-point objects, coordinates (p1..pn, q1..qn).
        """
        bounds = None if self.bounds is None else self.bounds.product(self.bounds)
        return ChartDomain(2 * self.dim, bounds)

    def restrict(self, box):
        if not self.contains_box(box):
            raise DomainError("%s is not inside the domain %s." % (box, self.bounds))
        return ChartDomain(self.dim, box)


def check_same_domain(*objects):
    domains = {obj.domain.dim for obj in objects}
    if len(domains) != 1:
        raise DomainError("Objects live on charts of different dimension: %s" % sorted(domains))


def as_points(points, dim):
    points = np.asarray(points, dtype=float)
    if points.ndim == 0 or points.shape[-1] != dim:
        points = points.reshape(points.shape + (1,)) if dim == 1 else points
    if points.shape[-1] != dim:
        raise DomainError("Expected points with %d coordinates, got shape %s." % (dim, points.shape))
    return points


def _object_array(exprs, shape):
    array = np.empty(len(exprs), dtype=object)
    array[:] = list(exprs)
    return array.reshape(shape)


class SmoothTensorField:
    """
    An (r, s) tensor field on a chart domain.

    ``func`` maps points (..., n) to components (..., *fiber_shape). Derivatives
    come from ``partials`` when given, from sympy when the field was built from
    expressions, and from central differences with step ``fd_step`` otherwise.
    """

    def __init__(
        self,
        domain,
        r,
        s,
        func,
        partials=None,
        symbolic=None,
        fd_step=None,
        deriv_order=4,
        label="",
    ):
        if r < 0 or s < 0:
            raise ValenceError("Valence must be non-negative, got (%d, %d)." % (r, s))
        self.domain = domain
        self.r = int(r)
        self.s = int(s)
        self._func = func
        self._partials = partials
        self.symbolic = symbolic
        self.fd_step = fd_step
        self.deriv_order = deriv_order
        self.label = label
        self._compiled = {}

    def __repr__(self):
        return "<SmoothTensorField (%d,%d) %s>" % (self.r, self.s, self.label or "")

    @property
    def dim(self):
        return self.domain.dim

    @property
    def fiber_shape(self):
        return (self.dim,) * (self.r + self.s)

    @property
    def valence(self):
        return (self.r, self.s)

    @property
    def step(self):
        return self.fd_step or lab_setting("COLOMBEAU_FD_STEP") * self.domain.scale

    def __call__(self, points):
        points = as_points(points, self.dim)
        values = np.asarray(self._func(points), dtype=float)
        return np.broadcast_to(values, points.shape[:-1] + self.fiber_shape)

    def partials(self, points):
        """
        All first partials, shape (..., *fiber_shape, n).
        """
        points = as_points(points, self.dim)
        if self._partials is not None:
            return np.asarray(self._partials(points), dtype=float)
        if self.symbolic is not None:
            values = self._symbolic_gradient()(points)
            return values.reshape(points.shape[:-1] + self.fiber_shape + (self.dim,))
        return numerics.gradient(self.__call__, points, self.step)

    def derivative(self, points, alpha):
        """
        Mixed partial ∂^alpha of every component.
        """
        points = as_points(points, self.dim)
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > self.deriv_order:
            raise DerivativeOrderError(
                "%r supports derivatives up to order %s, not %d." % (self, self.deriv_order, sum(alpha))
            )
        if self.symbolic is not None:
            values = self._symbolic_derivative(alpha)(points)
            return values.reshape(points.shape[:-1] + self.fiber_shape)
        return numerics.partial_derivative(self.__call__, points, alpha, self.step)

    @functools.cached_property
    def _symbols(self):
        return coordinate_symbols(self.dim)

    def _symbolic_gradient(self):
        return self._symbolic_derivative("gradient")

    def _symbolic_derivative(self, alpha):
        compiled = self._compiled.get(alpha)
        if compiled is None:
            compiled = self._compiled[alpha] = self._compile_derivative(alpha)
        return compiled

    def _compile_derivative(self, alpha):
        symbols = self._symbols
        if alpha == "gradient":
            exprs = [sympy.diff(e, x) for e in self.symbolic for x in symbols]
        else:
            exprs = []
            for expr in self.symbolic:
                for symbol, count in zip(symbols, alpha):
                    if count:
                        expr = sympy.diff(expr, symbol, count)
                exprs.append(expr)
        return compile_components(exprs, symbols)

    # construction

    @classmethod
    def from_symbolic(cls, domain, r, s, exprs, label=""):
        exprs = tuple(sympy.sympify(e) for e in exprs)
        fiber_shape = (domain.dim,) * (r + s)
        evaluate = compile_components(exprs, coordinate_symbols(domain.dim))

        def func(points):
            return evaluate(points).reshape(points.shape[:-1] + fiber_shape)

        return cls(domain, r, s, func, symbolic=exprs, deriv_order=12, label=label)

    @classmethod
    def from_expressions(cls, domain, r, s, components, label="", deriv_order=None):
        """
        Build a field from (nested lists of) expression strings over x1..xn.
        """
        fiber_shape = (domain.dim,) * (r + s)
        if r + s == 0 and not isinstance(components, (list, tuple)):
            components = [components]
        shape = nested_shape(components)
        expected = fiber_shape if r + s else (1,)
        if shape != expected:
            raise ValenceError(
                "Components of shape %s do not fit a (%d,%d) field on a %d-dimensional chart."
                % (shape, r, s, domain.dim)
            )
        names = coordinate_names(domain.dim)
        exprs = [parse_expression(text, names) for text in flatten_nested(components)]
        field = cls.from_symbolic(domain, r, s, exprs, label=label)
        if deriv_order is not None:
            field.deriv_order = deriv_order
        return field

    @classmethod
    def constant(cls, domain, r, s, value, label=""):
        fiber = np.broadcast_to(np.asarray(value, dtype=float), (domain.dim,) * (r + s))
        return cls.from_symbolic(domain, r, s, [sympy.Float(v) for v in fiber.ravel()], label=label)

    @classmethod
    def zero(cls, domain, r=0, s=0):
        return cls.constant(domain, r, s, 0.0, label="0")

    # algebra

    def _combine(self, other, a, b):
        if not isinstance(other, SmoothTensorField):
            return NotImplemented
        check_same_domain(self, other)
        if self.valence != other.valence:
            raise ValenceError("Cannot add fields of valence %s and %s." % (self.valence, other.valence))
        if self.symbolic is not None and other.symbolic is not None:
            exprs = [a * x + b * y for x, y in zip(self.symbolic, other.symbolic)]
            return SmoothTensorField.from_symbolic(self.domain, self.r, self.s, exprs)
        return SmoothTensorField(
            self.domain,
            self.r,
            self.s,
            lambda points: a * self(points) + b * other(points),
            partials=lambda points: a * self.partials(points) + b * other.partials(points),
            fd_step=self.fd_step or other.fd_step,
            deriv_order=min(self.deriv_order, other.deriv_order),
        )

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, factor):
        if isinstance(factor, SmoothTensorField):
            return self.multiply(factor)
        factor = float(factor)
        if self.symbolic is not None:
            return SmoothTensorField.from_symbolic(
                self.domain, self.r, self.s, [factor * e for e in self.symbolic], label=self.label
            )
        return SmoothTensorField(
            self.domain,
            self.r,
            self.s,
            lambda points: factor * self(points),
            partials=lambda points: factor * self.partials(points),
            fd_step=self.fd_step,
            deriv_order=self.deriv_order,
        )

    __rmul__ = __mul__

    def multiply(self, function):
        """
        Product with a scalar field ``function``.
        """
        if function.valence != (0, 0):
            raise ValenceError("Only scalar fields act as coefficients.")
        check_same_domain(self, function)
        if self.symbolic is not None and function.symbolic is not None:
            f = function.symbolic[0]
            return SmoothTensorField.from_symbolic(self.domain, self.r, self.s, [f * e for e in self.symbolic])
        rank = self.r + self.s

        def func(points):
            f = function(points)
            return f.reshape(f.shape + (1,) * rank) * self(points)

        def partials(points):
            f = function(points)
            df = function.partials(points)
            values = self(points)
            return (
                f.reshape(f.shape + (1,) * (rank + 1)) * self.partials(points)
                + values[..., None] * df.reshape(df.shape[:-1] + (1,) * rank + df.shape[-1:])
            )

        return SmoothTensorField(
            self.domain,
            self.r,
            self.s,
            func,
            partials=partials,
            fd_step=self.fd_step or function.fd_step,
            deriv_order=min(self.deriv_order, function.deriv_order),
        )

    def tensor(self, other):
        """
        The tensor product self ⊗ other, of valence (r + r', s + s').
        """
        check_same_domain(self, other)
        r1, s1, r2, s2 = self.r, self.s, other.r, other.s
        if self.symbolic is not None and other.symbolic is not None:
            a = _object_array(self.symbolic, self.fiber_shape)
            b = _object_array(other.symbolic, other.fiber_shape)
            result = np.empty((self.dim,) * (r1 + s1 + r2 + s2), dtype=object)
            for index in np.ndindex(result.shape):
                i1, i2 = index[:r1], index[r1:r1 + r2]
                j1, j2 = index[r1 + r2:r1 + r2 + s1], index[r1 + r2 + s1:]
                result[index] = a[i1 + j1] * b[i2 + j2]
            return SmoothTensorField.from_symbolic(self.domain, r1 + r2, s1 + s2, list(result.ravel()))

        def func(points):
            batch = points.ndim - 1
            return numerics.fiber_tensor_product(self(points), other(points), r1, s1, r2, s2, batch)

        return SmoothTensorField(
            self.domain,
            r1 + r2,
            s1 + s2,
            func,
            fd_step=self.fd_step or other.fd_step,
            deriv_order=min(self.deriv_order, other.deriv_order),
        )


def lie_derivative_tensor(X, t):
    """
    Classical Lie derivative L_X t in chart components:
    X^k ∂_k t − Σ_upper (∂_k X^i) t^{..k..} + Σ_lower (∂_j X^k) t_{..k..}.
    """
    if X.valence != (1, 0):
        raise ValenceError("L_X needs a vector field X, got valence %s." % (X.valence,))
    if X.domain != t.domain:
        if X.domain.dim != t.domain.dim:
            raise DomainError("X and t live on different chart domains.")
    if t.deriv_order < 1 or X.deriv_order < 1:
        raise DerivativeOrderError("L_X needs first derivatives of both X and t.")
    r, s = t.r, t.s
    rank = r + s

    if X.symbolic is not None and t.symbolic is not None:
        return SmoothTensorField.from_symbolic(
            t.domain, r, s, _symbolic_lie_derivative(X, t), label="L_X(%s)" % t.label
        )

    def func(points):
        x = X(points)
        dx = X.partials(points)
        values = t(points)
        transport = (t.partials(points) * x.reshape(x.shape[:-1] + (1,) * rank + x.shape[-1:])).sum(axis=-1)
        result = transport
        for axis in range(r):
            result = result - numerics.slot_action(values, dx, axis)
        dx_t = np.swapaxes(dx, -1, -2)
        for axis in range(r, rank):
            result = result + numerics.slot_action(values, dx_t, axis)
        return result

    return SmoothTensorField(
        t.domain,
        r,
        s,
        func,
        fd_step=t.fd_step,
        deriv_order=min(t.deriv_order, X.deriv_order) - 1,
        label="L_X(%s)" % t.label,
    )


def _symbolic_lie_derivative(X, t):
    symbols = coordinate_symbols(t.dim)
    n = t.dim
    r = t.r
    xs = list(X.symbolic)
    components = _object_array(t.symbolic, t.fiber_shape)
    exprs = []
    for index in np.ndindex(t.fiber_shape):
        expr = sum(xs[k] * sympy.diff(components[index], symbols[k]) for k in range(n))
        for slot, i in enumerate(index):
            for k in range(n):
                moved = index[:slot] + (k,) + index[slot + 1:]
                if slot < r:
                    expr -= sympy.diff(xs[i], symbols[k]) * components[moved]
                else:
                    expr += sympy.diff(xs[k], symbols[i]) * components[moved]
        exprs.append(expr)
    return exprs


def pullback_tensor(mu, t):
    """
    (μ*t)(p) = (T_{μ(p)} μ^{-1})^r_s t(μ(p)).
    """
    r, s = t.r, t.s

    def func(points):
        jac = mu.jacobian(points)
        return numerics.apply_fiber_map(
            t(mu(points)), _safe_inverse(jac), np.swapaxes(jac, -1, -2), r, s
        )

    return SmoothTensorField(
        t.domain, r, s, func, fd_step=t.fd_step, deriv_order=t.deriv_order, label="mu*(%s)" % t.label
    )


def _safe_inverse(matrices):
    det = np.linalg.det(matrices)
    if np.any(np.abs(det) < 1e-14):
        raise SingularJacobianError("Jacobian is singular at a sampled point.")
    return np.linalg.inv(matrices)


# Flows


def flow(X, tau, points, h_ode=None):
    """
    Fl^X_tau(points) by fixed-step RK4 with ceil(|tau| / h_ode) steps.
    """
    points = as_points(points, X.dim)
    if tau == 0:
        return points.copy()
    h_ode = h_ode or lab_setting("COLOMBEAU_ODE_STEP")
    steps = numerics.step_count(tau, h_ode)

    def check(y):
        if not np.all(X.domain.contains(y)):
            raise FlowEscapeError("Integral curve of %r left the domain before tau=%g." % (X, tau))

    return numerics.rk4(lambda y: X(y), points, tau, steps, after_step=check)


def flow_with_jacobian(X, tau, points, h_ode=None):
    """
    Flow together with its Jacobian DFl_tau, integrated from the variational
    equation J' = DX(Fl) J.
    """
    points = as_points(points, X.dim)
    n = X.dim
    batch = points.shape[:-1]
    state = np.concatenate(
        [points, np.broadcast_to(np.eye(n), batch + (n, n)).reshape(batch + (n * n,))], axis=-1
    )
    if tau == 0:
        return points.copy(), np.broadcast_to(np.eye(n), batch + (n, n)).copy()
    h_ode = h_ode or lab_setting("COLOMBEAU_ODE_STEP")
    steps = numerics.step_count(tau, h_ode)

    def rhs(y):
        x = y[..., :n]
        jac = y[..., n:].reshape(y.shape[:-1] + (n, n))
        dx = X.partials(x)
        return np.concatenate([X(x), np.matmul(dx, jac).reshape(y.shape[:-1] + (n * n,))], axis=-1)

    def check(y):
        if not np.all(X.domain.contains(y[..., :n])):
            raise FlowEscapeError("Integral curve of %r left the domain before tau=%g." % (X, tau))

    result = numerics.rk4(rhs, state, tau, steps, after_step=check)
    return result[..., :n], result[..., n:].reshape(batch + (n, n))


class Diffeomorphism:
    """
    A diffeomorphism of the chart domain with forward map, inverse and Jacobian.
    Missing inverses are computed by Newton iteration, missing Jacobians by
    central differences.
    """

    def __init__(self, domain, forward, inverse=None, jacobian=None, label=""):
        self.domain = domain
        self._forward = forward
        self._inverse = inverse
        self._jacobian = jacobian
        self.label = label

    def __repr__(self):
        return "<Diffeomorphism %s>" % (self.label or "")

    @property
    def dim(self):
        return self.domain.dim

    def __call__(self, points):
        points = as_points(points, self.dim)
        return np.asarray(self._forward(points), dtype=float)

    def jacobian(self, points):
        points = as_points(points, self.dim)
        if self._jacobian is not None:
            return np.asarray(self._jacobian(points), dtype=float)
        step = lab_setting("COLOMBEAU_FD_STEP") * self.domain.scale
        return numerics.gradient(self.__call__, points, step)

    def inverse_jacobian(self, points):
        return _safe_inverse(self.jacobian(points))

    def apply_inverse(self, points, tol=1e-13, max_iter=50):
        points = as_points(points, self.dim)
        if self._inverse is not None:
            return np.asarray(self._inverse(points), dtype=float)
        x = points.copy()
        for _ in range(max_iter):
            residual = self(x) - points
            if np.max(np.abs(residual), initial=0.0) <= tol * (1.0 + np.max(np.abs(points), initial=0.0)):
                return x
            x = x - np.linalg.solve(self.jacobian(x), residual[..., None])[..., 0]
        raise SingularJacobianError("Newton inversion of %r did not converge." % self)

    def inverse(self):
        return Diffeomorphism(
            self.domain,
            self.apply_inverse,
            inverse=self.__call__,
            jacobian=lambda y: self.inverse_jacobian(self.apply_inverse(y)),
            label="(%s)^-1" % self.label,
        )

    def compose(self, other):
        """
        self ∘ other.
        """
        return Diffeomorphism(
            self.domain,
            lambda x: self(other(x)),
            inverse=lambda y: other.apply_inverse(self.apply_inverse(y)),
            jacobian=lambda x: np.matmul(self.jacobian(other(x)), other.jacobian(x)),
            label="%s o %s" % (self.label, other.label),
        )

    def round_trip_error(self, points):
        points = as_points(points, self.dim)
        return float(np.max(np.abs(self.apply_inverse(self(points)) - points)))

    @classmethod
    def identity(cls, domain):
        n = domain.dim
        return cls(
            domain,
            lambda x: np.array(x, dtype=float),
            inverse=lambda y: np.array(y, dtype=float),
            jacobian=lambda x: np.broadcast_to(np.eye(n), np.shape(x)[:-1] + (n, n)).copy(),
            label="id",
        )

    @classmethod
    def from_expressions(cls, domain, forward, inverse=None, label=""):
        names = coordinate_names(domain.dim)
        symbols = coordinate_symbols(domain.dim)
        n = domain.dim
        forward_exprs = [parse_expression(text, names) for text in np.ravel(np.asarray(forward, dtype=object))]
        if len(forward_exprs) != n:
            raise ValenceError("A diffeomorphism of a %d-dimensional chart needs %d components." % (n, n))
        jacobian_exprs = [sympy.diff(e, x) for e in forward_exprs for x in symbols]
        forward_func = compile_components(forward_exprs, symbols)
        jacobian_func = compile_components(jacobian_exprs, symbols)
        inverse_func = None
        if inverse is not None:
            inverse_exprs = [parse_expression(text, names) for text in np.ravel(np.asarray(inverse, dtype=object))]
            inverse_func = compile_components(inverse_exprs, symbols)
        return cls(
            domain,
            forward_func,
            inverse=inverse_func,
            jacobian=lambda x: jacobian_func(x).reshape(np.shape(x)[:-1] + (n, n)),
            label=label or ",".join(str(e) for e in forward_exprs),
        )

    @classmethod
    def flow_map(cls, X, tau):
        return cls(
            X.domain,
            lambda x: flow(X, tau, x),
            inverse=lambda y: flow(X, -tau, y),
            jacobian=lambda x: flow_with_jacobian(X, tau, x)[1],
            label="Fl^X_%g" % tau,
        )


# n-forms


class NForm:
    """
    A compactly supported n-form ``w(x) dx^1 ∧ ... ∧ dx^n`` on a chart domain.

    ``derivative(points, alpha)`` returns ∂^alpha of the density; when not
    supplied it falls back to central differences with a step tied to the
    support size.
    """

    def __init__(self, domain, density, support, derivative=None, integral_hint=None, label=""):
        if support.dim != domain.dim:
            raise DomainError("Support of dimension %d on a %d-dimensional chart." % (support.dim, domain.dim))
        self.domain = domain
        self._density = density
        self.support = support
        self._derivative = derivative
        self.integral_hint = integral_hint
        self.label = label

    def __repr__(self):
        return "<NForm %s on %s>" % (self.label or "", self.support)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def radius(self):
        return 0.5 * float(np.max(self.support.widths))

    def check_support(self, domain=None):
        domain = domain or self.domain
        if not domain.contains_box(self.support):
            raise SupportEscapeError("Support %s of %r escapes the domain %s." % (self.support, self, domain.bounds))

    def __call__(self, points):
        return self._masked(self._density, as_points(points, self.dim))

    def _masked(self, func, points):
        flat = points.reshape(-1, self.dim)
        inside = self.support.contains(flat)
        values = np.zeros(len(flat))
        if np.any(inside):
            values[inside] = np.asarray(func(flat[inside]), dtype=float)
        return values.reshape(points.shape[:-1])

    def derivative(self, points, alpha):
        alpha = tuple(int(a) for a in alpha)
        if not any(alpha):
            return self(points)
        points = as_points(points, self.dim)
        if self._derivative is not None:
            return self._masked(lambda inside: self._derivative(inside, alpha), points)
        step = NFORM_FD_FRACTION * float(np.min(self.support.widths))
        return numerics.partial_derivative(self.__call__, points, alpha, step)

    def gradient(self, points):
        n = self.dim
        return np.stack([self.derivative(points, tuple(np.eye(n, dtype=int)[i])) for i in range(n)], axis=-1)

    def integral(self):
        return float(quadrature.integrate(self, self.support))

    def combine(self, other, a=1.0, b=1.0):
        """
        The form a·self + b·other.
        """
        if self.domain.dim != other.domain.dim:
            raise DomainError("n-forms on different charts.")
        return NForm(
            self.domain,
            lambda points: a * self(points) + b * other(points),
            self.support.union(other.support),
            derivative=lambda points, alpha: a * self.derivative(points, alpha) + b * other.derivative(points, alpha),
            label="%g*%s%+g*%s" % (a, self.label, b, other.label),
        )

    def __add__(self, other):
        return self.combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self.combine(other, 1.0, -1.0)

    def __mul__(self, factor):
        factor = float(factor)
        return NForm(
            self.domain,
            lambda points: factor * self(points),
            self.support,
            derivative=lambda points, alpha: factor * self.derivative(points, alpha),
            label="%g*%s" % (factor, self.label),
        )

    __rmul__ = __mul__

    def weighted(self, function):
        """
        The form f·ω for a scalar field f.
        """
        return NForm(
            self.domain,
            lambda points: function(points) * self(points),
            self.support,
            label="(%s)*%s" % (function.label, self.label),
        )

    def push_forward(self, mu):
        """
        μ_*ω, with density w(μ^{-1}y) |det Dμ^{-1}(y)|.
        """
        samples = mu(self.support.grid(9))
        image = Box.bounding(samples)
        support = image.expand(0.05 * float(np.max(image.widths)))

        def density(points):
            x = mu.apply_inverse(points)
            return self(x) / np.abs(np.linalg.det(mu.jacobian(x)))

        return NForm(self.domain, density, support, label="mu_*(%s)" % self.label)


def lie_derivative_nform(X, omega):
    """
    L_X ω, whose density is ∂_i(X^i w) in a chart.
    """
    if X.valence != (1, 0):
        raise ValenceError("L_X needs a vector field X.")
    if X.domain.dim != omega.domain.dim:
        raise DomainError("X and ω live on different chart domains.")

    def density(points):
        x = X(points)
        divergence = np.trace(X.partials(points), axis1=-2, axis2=-1)
        return divergence * omega(points) + (x * omega.gradient(points)).sum(axis=-1)

    return NForm(omega.domain, density, omega.support, label="L_X(%s)" % omega.label)


# Metrics, geodesics and parallel transport


class RiemannianMetric:
    def __init__(self, field, injectivity_radius=np.inf, label=""):
        if field.valence != (0, 2):
            raise ValenceError("A metric is a (0,2) field, got %s." % (field.valence,))
        self.field = field
        self.domain = field.domain
        self.injectivity_radius = float(injectivity_radius)
        self.label = label

    def __repr__(self):
        return "<RiemannianMetric %s>" % (self.label or "")

    @property
    def dim(self):
        return self.domain.dim

    def __call__(self, points):
        return self.field(points)

    @classmethod
    def from_expressions(cls, domain, components, injectivity_radius=np.inf, label=""):
        field = SmoothTensorField.from_expressions(domain, 0, 2, components, label=label)
        return cls(field, injectivity_radius, label=label)

    @classmethod
    def euclidean(cls, domain):
        return cls(SmoothTensorField.constant(domain, 0, 2, np.eye(domain.dim), label="euclidean"), label="euclidean")

    def scaled(self, factor):
        return RiemannianMetric(self.field * factor, self.injectivity_radius, label="%g*%s" % (factor, self.label))

    @functools.cached_property
    def is_flat(self):
        """
        True when the metric components are symbolically constant.
        """
        if self.field.symbolic is None:
            return False
        symbols = coordinate_symbols(self.dim)
        return all(sympy.diff(e, x) == 0 for e in self.field.symbolic for x in symbols)

    def validate(self, points, tol=1e-12):
        g = self(points)
        if np.max(np.abs(g - np.swapaxes(g, -1, -2)), initial=0.0) > tol:
            raise ValueError("Metric %r is not symmetric at the sampled points." % self)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise ValueError("Metric %r is not positive definite at the sampled points." % self)

    def christoffel(self, points):
        """
        Γ^i_{jk} with shape (..., n, n, n).
        """
        g = self(points)
        dg = self.field.partials(points)
        terms = (
            np.swapaxes(dg, -1, -2)
            + dg
            - np.moveaxis(dg, -1, -3)
        )
        return 0.5 * np.einsum("...il,...ljk->...ijk", np.linalg.inv(g), terms)


def _geodesic_endpoint(metric, start, velocity, steps):
    n = metric.dim

    def rhs(y):
        x, v = y[..., :n], y[..., n:]
        gamma = metric.christoffel(x)
        return np.concatenate([v, -np.einsum("...ijk,...j,...k->...i", gamma, v, v)], axis=-1)

    state = np.concatenate([start, velocity], axis=-1)
    return numerics.rk4(rhs, state, 1.0, steps)[..., :n]


def geodesic_parallel_transport(metric, p, q, steps=None):
    """
    Matrix of parallel transport T_pM -> T_qM along the geodesic from p to q.

    The boundary problem is solved by Newton shooting on the initial velocity,
    then the transport equation P' = -Γ(ẋ, P) is integrated along the curve.
    ``p`` and ``q`` broadcast against each other.
    """
    n = metric.dim
    p = as_points(p, n)
    q = as_points(q, n)
    p, q = np.broadcast_arrays(p, q)
    batch = p.shape[:-1]
    distance = np.linalg.norm(q - p, axis=-1)
    if np.any(distance > metric.injectivity_radius):
        raise InjectivityRadiusError(
            "Points are %.3g apart, beyond the injectivity radius %.3g of %r."
            % (float(np.max(distance)), metric.injectivity_radius, metric)
        )
    identity = np.broadcast_to(np.eye(n), batch + (n, n)).copy()
    if metric.is_flat:
        return identity

    steps = steps or lab_setting("COLOMBEAU_GEODESIC_STEPS")
    tol = lab_setting("COLOMBEAU_SHOOTING_TOLERANCE")
    max_iter = lab_setting("COLOMBEAU_SHOOTING_MAX_ITER")
    velocity = (q - p).astype(float)
    for iteration in range(max_iter):
        end = _geodesic_endpoint(metric, p, velocity, steps)
        residual = end - q
        if np.max(np.abs(residual), initial=0.0) <= tol * (1.0 + np.max(np.abs(q), initial=0.0)):
            break
        delta = 1e-7 * max(1.0, float(np.max(np.abs(velocity), initial=0.0)))
        columns = [
            (_geodesic_endpoint(metric, p, velocity + delta * np.eye(n)[i], steps) - end) / delta
            for i in range(n)
        ]
        jacobian = np.stack(columns, axis=-1)
        velocity = velocity - np.linalg.solve(jacobian, residual[..., None])[..., 0]
    else:
        raise ShootingError("Geodesic shooting did not converge after %d iterations." % max_iter)
    logger.debug("Geodesic shooting converged after %d iterations", iteration)

    def rhs(y):
        x, v = y[..., :n], y[..., n:2 * n]
        transport = y[..., 2 * n:].reshape(y.shape[:-1] + (n, n))
        gamma = metric.christoffel(x)
        dv = -np.einsum("...ijk,...j,...k->...i", gamma, v, v)
        dp = -np.einsum("...ijk,...j,...kc->...ic", gamma, v, transport)
        return np.concatenate([v, dv, dp.reshape(y.shape[:-1] + (n * n,))], axis=-1)

    state = np.concatenate([p, velocity, identity.reshape(batch + (n * n,))], axis=-1)
    final = numerics.rk4(rhs, state, 1.0, steps)
    return final[..., 2 * n:].reshape(batch + (n, n))


def lie_word_field(field, word):
    """
    L_{X_1} ... L_{X_l} field, innermost derivative X_l applied first.
    """
    result = field
    for X in reversed(tuple(word)):
        result = lie_derivative_tensor(X, result)
    return result


def flow_pullback_quotient(X, t, points, tau):
    """
    Central difference quotient of τ ↦ (Fl^X_τ)* t at τ = 0.
    """
    forward = pullback_tensor(Diffeomorphism.flow_map(X, tau), t)(points)
    backward = pullback_tensor(Diffeomorphism.flow_map(X, -tau), t)(points)
    return (forward - backward) / (2 * tau)

