"""
Small builders shared by the test modules.
"""
import numpy as np

from colombeau_lab.geometry import Box, ChartDomain, SmoothTensorField
from colombeau_lab.kernels import build_kernel, bump_form, evaluate_kernel
from colombeau_lab.transport import PlateauCutoff, TransportOperator

SHORT_EPS_GRID = (2.0 ** -3, 2.0 ** -4, 2.0 ** -5, 2.0 ** -6)
UNIT_BOX = Box((-1.0,), (1.0,))


def line_domain(half_width=3.0):
    return ChartDomain.create(1, [-half_width], [half_width])


def plane_domain(half_width=3.0):
    return ChartDomain.create(2, [-half_width, -half_width], [half_width, half_width])


def scalar(domain, expression, label=""):
    return SmoothTensorField.from_expressions(domain, 0, 0, expression, label=label or expression)


def vector(domain, *components):
    return SmoothTensorField.from_expressions(domain, 1, 0, list(components), label="X")


def covector(domain, *components):
    return SmoothTensorField.from_expressions(domain, 0, 1, list(components), label="eta")


def cutoff_identity(domain, half_width=1.5, margin=0.5):
    box = Box((-half_width,) * domain.dim, (half_width,) * domain.dim)
    return TransportOperator.identity_cutoff(domain, PlateauCutoff(box, margin))


def unit_bump(domain, center=0.0, radius=0.5):
    return bump_form(domain, np.full(domain.dim, center, dtype=float), radius)


def kernel_form(domain, eps, p, order=0, support_constant=1.0):
    kernel = build_kernel("bump", order, support_constant)
    return evaluate_kernel(kernel, eps, np.atleast_1d(np.asarray(p, dtype=float)), domain)


def density_at(omega, point):
    return float(omega(np.atleast_2d(np.asarray(point, dtype=float)))[0])
