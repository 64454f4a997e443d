"""
Utility functions for colombeau-lab.
"""
from importlib import import_module

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    "COLOMBEAU_FD_STEP": 1e-4,
    "COLOMBEAU_FD_RELATIVE_STEP": 1e-2,
    "COLOMBEAU_FUNCTIONAL_STEP": 1e-3,
    "COLOMBEAU_ODE_STEP": 1e-3,
    "COLOMBEAU_GEODESIC_STEPS": 100,
    "COLOMBEAU_SHOOTING_TOLERANCE": 1e-12,
    "COLOMBEAU_SHOOTING_MAX_ITER": 30,
    "COLOMBEAU_LIE_TAU": 1e-3,
    "COLOMBEAU_QUADRATURE_ORDER": 16,
    "COLOMBEAU_QUADRATURE_PANELS": 4,
    "COLOMBEAU_ADAPTIVE_TOLERANCE": 1e-10,
    "COLOMBEAU_MAX_MOMENT_ORDER": 6,
    "COLOMBEAU_SLOPE_TOLERANCE": 0.25,
    "COLOMBEAU_TAIL_WINDOW": 6,
    "COLOMBEAU_ABS_FLOOR": 1e-13,
    "COLOMBEAU_MAX_MODERATE_ORDER": 20,
    "COLOMBEAU_ASSOCIATION_TOLERANCE": 1e-5,
    "COLOMBEAU_NUMERICAL_ZERO": 1e-8,
    "COLOMBEAU_CORE_TOLERANCE": 1e-12,
    "COLOMBEAU_ORDER_MAP": "colombeau_lab.asymptotics.minimal_kernel_order",
    "COLOMBEAU_THREADS": 1,
    "COLOMBEAU_DEBUG": False,
}


def lab_setting(name):
    """
    Return the value of a COLOMBEAU_* setting.

    Settings are read at call time so ``override_settings`` works in tests.
    Outside a configured Django project the built-in default is used.
    """
    if name not in DEFAULTS:
        raise ImproperlyConfigured("%r is not a colombeau-lab setting." % name)
    if not settings.configured:
        return DEFAULTS[name]
    return getattr(settings, name, DEFAULTS[name])


def import_string(module_name):
    location, attribute = module_name.rsplit(".", 1)
    module = import_module(location)
    return getattr(module, attribute)


def kernel_order_map():
    """
    The callable mapping a target negligibility order m to the kernel order k.
    """
    path = lab_setting("COLOMBEAU_ORDER_MAP")
    if callable(path):
        return path
    try:
        return import_string(path)
    except (ImportError, AttributeError, ValueError):
        raise ImproperlyConfigured(
            "COLOMBEAU_ORDER_MAP %r could not be imported." % path
        )
