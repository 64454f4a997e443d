"""
Small numerical kernels shared by the geometry, transport and basic-space
modules: finite-difference stencils, fixed-step RK4 and operations on tensor
fibers stored as numpy arrays.

Fiber layout: an (r, s)-tensor at a point is an array of shape ``(n,) * (r + s)``
whose first r axes are the contravariant (upper) slots and the last s axes the
covariant (lower) slots. Batched fibers carry leading batch axes.
"""
import functools
import math

import numpy as np


@functools.lru_cache(maxsize=None)
def _central_weights(order):
    half = (order + 1) // 2 + 1
    offsets = np.arange(-half, half + 1, dtype=float)
    vandermonde = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    weights = np.linalg.solve(vandermonde, rhs)
    weights[np.abs(weights) < 1e-12 * np.abs(weights).max()] = 0.0
    return tuple(offsets), tuple(weights)


def central_weights(order):
    """
    Offsets and weights of the central stencil for the ``order``-th derivative,
    accurate to fourth order or better.
    """
    offsets, weights = _central_weights(int(order))
    return np.array(offsets), np.array(weights)


def partial_derivative(func, points, alpha, step):
    """
    Mixed partial derivative ∂^alpha of a vectorized ``func`` at ``points``
    (shape (..., n)) using tensor-product central stencils.
    """
    points = np.asarray(points, dtype=float)
    alpha = tuple(int(a) for a in alpha)
    if not any(alpha):
        return np.asarray(func(points), dtype=float)
    axis = next(i for i, a in enumerate(alpha) if a)
    rest = list(alpha)
    rest[axis] = 0
    offsets, weights = central_weights(alpha[axis])
    total = 0.0
    for offset, weight in zip(offsets, weights):
        if weight == 0.0:
            continue
        shifted = points.copy()
        shifted[..., axis] += offset * step
        total = total + weight * partial_derivative(func, shifted, rest, step)
    return total / step ** alpha[axis]


def gradient(func, points, step):
    """
    First partials of ``func`` stacked on a trailing axis:
    ``points (..., n) -> (..., *value_shape, n)``. All shifted points are
    evaluated in one batched call.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[-1]
    offsets, weights = central_weights(1)
    shifts = np.eye(n)[:, None, :] * (offsets[None, :, None] * step)
    shifted = points[None, None] + shifts.reshape((n, len(offsets)) + (1,) * (points.ndim - 1) + (n,))
    values = np.asarray(func(shifted), dtype=float)
    grad = np.tensordot(weights, values, axes=([0], [1])) / step
    return np.moveaxis(grad, 0, -1)


def richardson(coarse, fine, order):
    factor = 2.0 ** order
    return (factor * fine - coarse) / (factor - 1.0)


def functional_derivative(func, step):
    """
    d/dh func(h) at h = 0 by the five-point stencil with one Richardson level.
    ``func`` returns arrays; it is called eight times.
    """

    def stencil(h):
        return (-func(2 * h) + 8 * func(h) - 8 * func(-h) + func(-2 * h)) / (12 * h)

    return richardson(stencil(step), stencil(step / 2), 4)


def rk4(rhs, y0, duration, steps, after_step=None):
    """
    Fixed-step classical Runge–Kutta for the autonomous system y' = rhs(y).
    ``after_step`` is called with the state after every step (escape checks).
    """
    y = np.array(y0, dtype=float)
    if steps <= 0 or duration == 0:
        return y
    h = duration / steps
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if after_step is not None:
            after_step(y)
    return y


def step_count(duration, max_step):
    return max(1, int(math.ceil(abs(duration) / max_step - 1e-12)))


# Fiber operations


def slot_action(tensor, matrix, axis):
    """
    Apply ``matrix`` (batch + (n, n)) to fiber slot ``axis`` of ``tensor``
    (batch + fiber): result[..., i, ...] = Σ_k matrix[..., i, k] tensor[..., k, ...].
    """
    matrix = np.asarray(matrix, dtype=float)
    tensor = np.asarray(tensor, dtype=float)
    batch_ndim = matrix.ndim - 2
    rank = tensor.ndim - batch_ndim
    moved = np.moveaxis(tensor, batch_ndim + axis, -1)
    expanded = matrix.reshape(matrix.shape[:-2] + (1,) * (rank - 1) + matrix.shape[-2:])
    result = np.einsum("...ik,...k->...i", expanded, moved)
    return np.moveaxis(result, -1, batch_ndim + axis)


def apply_fiber_map(tensor, upper_matrix, lower_matrix, r, s):
    """
    Act with ``upper_matrix`` on the r contravariant slots and with
    ``lower_matrix`` on the s covariant slots.
    """
    result = tensor
    for axis in range(r):
        result = slot_action(result, upper_matrix, axis)
    for axis in range(r, r + s):
        result = slot_action(result, lower_matrix, axis)
    return np.asarray(result, dtype=float)


def fiber_tensor_product(a, b, r1, s1, r2, s2, batch_ndim=0):
    """
    Outer product of an (r1, s1) and an (r2, s2) fiber, reordered to the
    (r1 + r2, s1 + s2) layout (all upper slots first).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a_expanded = a.reshape(a.shape + (1,) * (r2 + s2))
    b_expanded = b.reshape(b.shape[:batch_ndim] + (1,) * (r1 + s1) + b.shape[batch_ndim:])
    product = a_expanded * b_expanded
    start = product.ndim - (r1 + s1 + r2 + s2)
    upper1 = list(range(start, start + r1))
    lower1 = list(range(start + r1, start + r1 + s1))
    upper2 = list(range(start + r1 + s1, start + r1 + s1 + r2))
    lower2 = list(range(start + r1 + s1 + r2, product.ndim))
    order = list(range(start)) + upper1 + upper2 + lower1 + lower2
    return np.transpose(product, order)


def full_contraction(tensor, dual, r, s):
    """
    Σ tensor[I, J] dual[J, I] for an (r, s) ``tensor`` and an (s, r) ``dual``;
    batch axes broadcast.
    """
    tensor = np.asarray(tensor, dtype=float)
    dual = np.asarray(dual, dtype=float)
    rank = r + s
    if rank == 0:
        return tensor * dual
    start = dual.ndim - rank
    order = (
        list(range(start))
        + list(range(start + s, start + s + r))
        + list(range(start, start + s))
    )
    swapped = np.transpose(dual, order)
    return (tensor * swapped).sum(axis=tuple(range(-rank, 0)))


def fiber_norm(tensor, metric, r, s):
    """
    Norm of an (r, s) fiber induced by the metric matrix (batch + (n, n)).
    """
    metric = np.asarray(metric, dtype=float)
    lowered = apply_fiber_map(tensor, metric, np.linalg.inv(metric), r, s)
    squared = np.asarray(tensor * lowered, dtype=float)
    rank = r + s
    if rank:
        squared = squared.sum(axis=tuple(range(-rank, 0)))
    return np.sqrt(np.maximum(squared, 0.0))


def basis_fiber(n, rank, index):
    fiber = np.zeros((n,) * rank)
    fiber[tuple(index)] = 1.0
    return fiber
