"""
Exceptions raised by colombeau-lab.

Configuration problems raise ``django.core.exceptions.ImproperlyConfigured``
instead; everything here is a numerical or structural failure at run time.
"""


class ColombeauError(Exception):
    pass


class DomainError(ColombeauError):
    """Objects living on different chart domains were combined."""


class DerivativeOrderError(ColombeauError):
    pass


class ValenceError(ColombeauError):
    pass


class FlowEscapeError(ColombeauError):
    """An integral curve left the chart domain."""


class ShootingError(ColombeauError):
    pass


class InjectivityRadiusError(ShootingError):
    pass


class SingularJacobianError(ColombeauError):
    pass


class SupportEscapeError(ColombeauError):
    """A compactly supported object does not fit inside the chart domain."""


class KernelConstructionError(ColombeauError):
    pass


class QuadratureError(ColombeauError):
    pass


class PrincipalValueError(QuadratureError):
    pass


class UnsupportedDistributionError(ColombeauError):
    pass


class BatteryError(ColombeauError):
    """A sweep configuration violates the preconditions of the test battery."""
