"""
Gauss–Legendre quadrature on boxes.

Kernels, pairings and association integrals all go through the composite rule
returned by ``reference_rule``: integrals against a smoothing kernel are taken
in the scaled variable, so the kernel's normalization and moment correction
are exact for the discrete rule as well.
"""
import functools
import logging

import numpy as np
from numpy.polynomial.legendre import leggauss

from .exceptions import QuadratureError
from .utils import lab_setting

logger = logging.getLogger(__name__)


@functools.lru_cache(maxsize=64)
def _composite_rule(order, panels):
    x, w = leggauss(order)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    halves = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + halves[:, None] * x[None, :]).ravel()
    weights = (halves[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def reference_rule(order=None, panels=None):
    """
    Composite Gauss–Legendre nodes and weights on [-1, 1].
    """
    order = order or lab_setting("COLOMBEAU_QUADRATURE_ORDER")
    panels = panels or lab_setting("COLOMBEAU_QUADRATURE_PANELS")
    return _composite_rule(int(order), int(panels))


def box_rule(box, order=None, panels=None):
    """
    Tensor-product rule on an axis-aligned box (anything with ``lower`` and
    ``upper`` sequences). Returns nodes of shape (m, n) and weights (m,).
    """
    lower = np.asarray(box.lower, dtype=float)
    upper = np.asarray(box.upper, dtype=float)
    ref_nodes, ref_weights = reference_rule(order, panels)
    centers = 0.5 * (upper + lower)
    halves = 0.5 * (upper - lower)
    axes_nodes = [centers[i] + halves[i] * ref_nodes for i in range(len(lower))]
    axes_weights = [halves[i] * ref_weights for i in range(len(lower))]
    grids = np.meshgrid(*axes_nodes, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weight_grids = np.meshgrid(*axes_weights, indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in weight_grids], axis=-1), axis=-1)
    return nodes, weights


def integrate(func, box, order=None, panels=None):
    """
    ∫_box func with the composite rule; ``func`` maps (m, n) points to (m, ...).
    """
    nodes, weights = box_rule(box, order, panels)
    values = np.asarray(func(nodes), dtype=float)
    return np.tensordot(weights, values, axes=([0], [0]))


def _gauss_estimate(func, a, b, order):
    x, w = leggauss(order)
    half = 0.5 * (b - a)
    values = np.asarray(func(0.5 * (a + b) + half * x), dtype=float)
    return half * np.dot(w, values)


def adaptive_gauss_legendre(func, a, b, tol=None, order=10, max_depth=40, breakpoints=()):
    """
    Adaptive bisection with Gauss–Legendre panels for 1-D integrands that
    concentrate on small scales. ``func`` maps an array of abscissae to values.
    Breakpoints inside (a, b) always split the interval.
    """
    tol = tol or lab_setting("COLOMBEAU_ADAPTIVE_TOLERANCE")
    if b <= a:
        return 0.0
    cuts = sorted({a, b, *(float(c) for c in breakpoints if a < c < b)})
    length = b - a
    total = 0.0
    stack = [(lo, hi, 0, _gauss_estimate(func, lo, hi, order)) for lo, hi in zip(cuts[:-1], cuts[1:])]
    while stack:
        lo, hi, depth, whole = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _gauss_estimate(func, lo, mid, order)
        right = _gauss_estimate(func, mid, hi, order)
        error = abs(left + right - whole)
        allowed = max(tol * (hi - lo) / length, 1e-15 * abs(left + right))
        if error <= allowed:
            total += left + right
        elif depth >= max_depth:
            raise QuadratureError(
                "Adaptive quadrature did not converge on [%g, %g] (error %.3e)." % (lo, hi, error)
            )
        else:
            stack.append((lo, mid, depth + 1, left))
            stack.append((mid, hi, depth + 1, right))
    return total


def integrate_adaptive(func, box, tol=None, breakpoints=(), max_panels=64):
    """
    Integrate a scalar integrand over a box to an absolute tolerance.

    One-dimensional boxes use adaptive bisection (``func`` receives (m, 1)
    points); higher dimensions double the panel count until two successive
    composite estimates agree.
    """
    tol = tol or lab_setting("COLOMBEAU_ADAPTIVE_TOLERANCE")
    lower = np.asarray(box.lower, dtype=float)
    upper = np.asarray(box.upper, dtype=float)
    if len(lower) == 1:
        return adaptive_gauss_legendre(
            lambda x: func(np.asarray(x, dtype=float)[:, None]),
            float(lower[0]),
            float(upper[0]),
            tol=tol,
            breakpoints=[float(np.ravel(b)[0]) for b in breakpoints],
        )
    panels = 2
    previous = integrate(func, box, order=10, panels=panels)
    while panels < max_panels:
        panels *= 2
        current = integrate(func, box, order=10, panels=panels)
        if abs(current - previous) <= tol * max(1.0, abs(current)):
            return current
        previous = current
    raise QuadratureError("Panel refinement did not converge on %s." % (box,))
