"""
Turn a validated experiment config into live objects: chart domain, named
fields, metrics, maps, kernels, transport operators, distributions and the
representative's operation tree.
"""
import logging
import math

import numpy as np
import sympy
from django.core.exceptions import ImproperlyConfigured

from . import basic_space, distributions
from .asymptotics import DEFAULT_EPS_GRID, Battery
from .association import AssociationProbe, default_probe
from .exceptions import ColombeauError
from .expressions import parse_expression
from .geometry import Box, ChartDomain, Diffeomorphism, RiemannianMetric, SmoothTensorField
from .kernels import build_kernel, bump_form
from .transport import PlateauCutoff, TransportOperator, build_geodesic_transport

logger = logging.getLogger(__name__)


def _box(bounds):
    return Box.from_bounds(bounds[0], bounds[1])


def eps_grid_for(test):
    """
    The explicit ``eps_grid`` of a test, or the powers of two between
    ``eps_max`` and ``eps_min``.
    """
    if test.get("eps_grid"):
        return tuple(float(e) for e in test["eps_grid"])
    first = math.ceil(-math.log2(test["eps_max"]) - 1e-12)
    last = math.floor(-math.log2(test["eps_min"]) + 1e-12)
    return tuple(2.0 ** -k for k in range(first, last + 1))


class ExperimentBuilder:
    def __init__(self, config, threads=None):
        self.config = config
        self.threads = threads
        domain = config["domain"]
        self.domain = ChartDomain.create(domain["dim"], domain.get("lower"), domain.get("upper"))
        self.objects = config.get("objects", {})
        self._built = {}
        self._building = set()

    # named objects

    def _lookup(self, group, name, factory):
        key = (group, name)
        if key in self._built:
            return self._built[key]
        specs = self.objects.get(group, {})
        if name not in specs:
            raise ImproperlyConfigured("objects.%s has no entry %r." % (group, name))
        if key in self._building:
            raise ImproperlyConfigured("objects.%s.%s refers to itself." % (group, name))
        self._building.add(key)
        try:
            value = factory(name, specs[name])
        except (ColombeauError, ValueError) as e:
            raise ImproperlyConfigured("objects.%s.%s: %s" % (group, name, e))
        finally:
            self._building.discard(key)
        self._built[key] = value
        logger.debug("Built %s %s: %r", group, name, value)
        return value

    def tensor(self, name):
        def factory(name, spec):
            r, s = spec["valence"]
            field = SmoothTensorField.from_expressions(self.domain, r, s, spec["components"], label=spec.get("label") or name)
            field.kinks = tuple(spec.get("kinks", ()))
            return field

        return self._lookup("tensors", name, factory)

    def metric(self, name):
        def factory(name, spec):
            radius = spec.get("injectivity_radius")
            metric = RiemannianMetric.from_expressions(
                self.domain, spec["components"], np.inf if radius is None else radius, label=name
            )
            metric.validate(self._sample_points())
            return metric

        return self._lookup("metrics", name, factory)

    def map(self, name):
        def factory(name, spec):
            return Diffeomorphism.from_expressions(self.domain, spec["forward"], spec.get("inverse"), label=name)

        return self._lookup("maps", name, factory)

    def kernel(self, name):
        def factory(name, spec):
            return build_kernel(spec["profile"], spec["order"], spec["support_constant"])

        return self._lookup("kernels", name, factory)

    def transport(self, name):
        def factory(name, spec):
            kind = spec["kind"]
            if kind == "zero":
                return TransportOperator.zero(self.domain)
            if kind == "expressions":
                return TransportOperator.from_expressions(
                    self.domain,
                    spec["components"],
                    support=_box(spec["support"]) if spec.get("support") else None,
                    core_region=_box(spec["core"]) if spec.get("core") else None,
                    kernel_region=_box(spec["kernel_region"]) if spec.get("kernel_region") else None,
                    label=name,
                )
            chi = PlateauCutoff(_box(spec["plateau"]), spec["margin"], spec.get("near"), spec.get("near_margin"))
            if kind == "identity-cutoff":
                operator = TransportOperator.identity_cutoff(self.domain, chi)
            elif kind == "diagonal-vanishing":
                operator = TransportOperator.diagonal_vanishing(self.domain, chi, weights=spec.get("weights"))
            else:
                operator = build_geodesic_transport(self.metric(spec["metric"]), chi)
            operator.label = name
            return operator

        return self._lookup("transports", name, factory)

    def distribution(self, name):
        return self._lookup("distributions", name, self._make_distribution)

    def _make_distribution(self, name, spec):
        kind = spec["kind"]
        r, s = spec["valence"]
        label = spec.get("label", "")
        if kind == "delta":
            alpha = spec.get("alpha") or None
            return distributions.DeltaDistribution(
                self.domain, spec["point"], alpha, spec.get("components"), r, s, label=label
            )
        if kind == "regular":
            field = self.tensor(spec["field"])
            return distributions.RegularDistribution(field, kinks=getattr(field, "kinks", ()), label=label)
        if kind == "heaviside":
            return distributions.HeavisideDistribution(self.domain, spec["offset"], label=label)
        if kind == "pv":
            point = spec.get("point", [0.0])
            return distributions.PrincipalValueDistribution(self.domain, point[0], label=label)
        if kind == "combination":
            terms = [(c, self.distribution(term)) for c, term in spec["terms"]]
            return distributions.LinearCombination(terms, domain=self.domain, r=r if not terms else None, s=s if not terms else None, label=label)
        if kind == "product":
            return distributions.SmoothCoeffProduct(self.tensor(spec["function"]), self.distribution(spec["inner"]), label=label)
        if kind == "tensor":
            return distributions.TensorProductDistribution(self.tensor(spec["field"]), self.distribution(spec["inner"]), label=label)
        if kind == "lie":
            return self.distribution(spec["inner"]).lie_derivative(self.tensor(spec["field"]))
        if kind == "pullback":
            return self.distribution(spec["inner"]).pullback(self.map(spec["map"]))
        return distributions.zero_distribution(self.domain, r, s)

    def _sample_points(self):
        bounds = self.domain.bounds or Box((-1.0,) * self.domain.dim, (1.0,) * self.domain.dim)
        return bounds.grid(5)

    # representatives

    def representative(self, tree=None, path="representative"):
        if tree is None:
            tree = self.config.get("representative")
            if tree is None:
                raise ImproperlyConfigured("The config has no representative.")
        try:
            return self._node(tree, path)
        except ColombeauError as e:
            raise ImproperlyConfigured("%s: %s" % (path, e))

    def named_representative(self, name):
        trees = self.config.get("representatives", {})
        if name not in trees:
            raise ImproperlyConfigured("representatives has no entry %r." % name)
        return self.representative(trees[name], "representatives.%s" % name)

    def representatives(self):
        """
        (name, representative) for the main tree and every named tree.
        """
        items = []
        if self.config.get("representative"):
            items.append(("representative", self.representative()))
        for name in sorted(self.config.get("representatives", {})):
            items.append((name, self.named_representative(name)))
        return items

    def _node(self, tree, path):
        op = tree["op"]
        args = [self._node(child, "%s.args.%d" % (path, i)) for i, child in enumerate(tree.get("args", []))]
        try:
            if op == "sigma":
                return basic_space.sigma(self.tensor(tree["of"]))
            if op == "iota":
                return basic_space.iota(self.distribution(tree["of"]))
            if op == "zero":
                r, s = tree.get("valence", [0, 0])
                return basic_space.zero_representative(self.domain, r, s)
            if op == "support_scale":
                radius = sympy.Symbol("r", positive=True)
                expr = parse_expression(tree["expression"], {"r": radius})
                return basic_space.SupportScale(self.domain, sympy.lambdify(radius, expr, modules="numpy"), label=tree["expression"])
            if op == "tensor":
                return basic_space.tensor_product(args[0], args[1])
            if op == "contract":
                return basic_space.contract(args[0], tree["upper"], tree["lower"])
            if op == "add":
                return basic_space.LinearCombination([(1.0, u) for u in args])
            if op == "sub":
                return args[0] - args[1]
            if op == "scale":
                return tree["factor"] * args[0]
            if op == "hat_lie":
                return basic_space.hat_lie(self.tensor(tree["of"]), args[0], tree.get("parts", basic_space.HAT_LIE_PARTS))
            if op == "hat_pullback":
                return basic_space.hat_pullback(self.map(tree["of"]), args[0])
            if op == "saturate":
                return basic_space.saturate(args[0], self.tensor(tree["of"]))
            if op == "directional":
                return basic_space.directional(args[0], [self.transport(name) for name in tree["directions"]])
            if op == "restrict":
                return basic_space.restrict(args[0], _box(tree["box"]))
        except (ColombeauError, ValueError) as e:
            raise ImproperlyConfigured("%s: %s" % (path, e))
        raise ImproperlyConfigured("%s: unknown operation %r." % (path, op))

    # batteries and probes

    def compact_set(self, test):
        if test.get("K"):
            return _box(test["K"])
        return Box((-1.0,) * self.domain.dim, (1.0,) * self.domain.dim)

    def test_transport(self, test):
        if test.get("A"):
            return self.transport(test["A"])
        K = self.compact_set(test)
        return TransportOperator.identity_cutoff(self.domain, PlateauCutoff(K.expand(0.5), 0.5))

    def kernel_spec(self, test):
        if test.get("kernel"):
            spec = self.objects.get("kernels", {}).get(test["kernel"])
            if spec is None:
                raise ImproperlyConfigured("test.kernel: objects.kernels has no entry %r." % test["kernel"])
            return spec
        return {"profile": "bump", "order": 0, "support_constant": 1.0}

    def battery(self, test):
        spec = self.kernel_spec(test)
        return Battery(
            K=self.compact_set(test),
            A=self.test_transport(test),
            profile=spec["profile"],
            support_constant=spec["support_constant"],
            X_choices=tuple(self.tensor(name) for name in test.get("X", [])),
            B_choices=tuple(self.transport(name) for name in test.get("B", [])),
            max_word=test["max_word"],
            max_j=test["max_j"],
            eps_grid=eps_grid_for(test),
            p_points=test["p_points"],
            metric=self.metric(test["metric"]) if test.get("metric") else None,
            domain=self.domain,
            threads=self.threads,
        )

    def probe(self, test, r=0, s=0):
        """
        The association probe of a test for (r, s) representatives.
        """
        spec = self.kernel_spec(test)
        eps_grid = eps_grid_for(test) if test.get("eps_grid") else None
        if not test.get("forms") and not test.get("basis"):
            probe = default_probe(self.domain, r, s, spec["order"], eps_grid)
        else:
            forms = test.get("forms") or []
            if not forms:
                raise ImproperlyConfigured("test.forms: a probe with explicit test fields needs test forms.")
            omegas = tuple(bump_form(self.domain, form["center"], form["radius"], form["profile"]) for form in forms)
            if test.get("basis"):
                t_tildes = tuple(self.tensor(name) for name in test["basis"])
            else:
                t_tildes = default_probe(self.domain, r, s).t_tilde_list
            probe = AssociationProbe(omega_list=omegas, A=None, t_tilde_list=t_tildes, kernel_order=spec["order"], eps_grid=eps_grid or DEFAULT_EPS_GRID[:8], domain=self.domain)
        return probe._replace(
            A=self.test_transport(test) if test.get("A") or probe.A is None else probe.A,
            profile=spec["profile"],
            support_constant=spec["support_constant"],
            threads=self.threads,
            tolerance=test.get("tolerance") or probe.tolerance,
        )
