import hashlib
import json
import logging
import platform
import time
from importlib import metadata
from typing import NamedTuple, Optional

import numpy as np
from django.core.exceptions import ImproperlyConfigured
from scipy import optimize

from .association import (
    associated_zero,
    c0_associated,
    diverges,
    product_association_suite,
    shadow_matches,
    shadow_search,
)
from .asymptotics import (
    MIN_FIT_POINTS,
    OrderEstimate,
    OrderReport,
    Verdict,
    embedding_rate_check,
    estimate_order,
    is_moderate,
    is_negligible,
    saturation_check,
    sweep,
)
from .basic_space import hat_lie, hat_pullback, iota, sigma, tensor_product
from .builder import ExperimentBuilder, eps_grid_for
from .distributions import DeltaDistribution, PrincipalValueDistribution, SmoothCoeffProduct, zero_distribution
from .exceptions import ColombeauError
from .geometry import SmoothTensorField
from .kernels import build_kernel, derivative_scaling_report, evaluate_kernel, kernel_moments, verify_moment_order
from .numerics import fiber_norm
from .serializers import flatten_errors, parse_config

logger = logging.getLogger(__name__)

MOMENT_TOLERANCE = 1e-8
COMMUTATION_TOLERANCE = 1e-5
NOGO_RELATIVE_TOLERANCE = 0.1
NOGO_TAIL = 4


class RunReport(NamedTuple):
    name: str
    kind: str
    status: str
    verdicts: tuple = ()
    config: Optional[dict] = None
    environment: Optional[dict] = None
    timings: Optional[dict] = None
    battery: Optional[dict] = None
    errors: Optional[dict] = None

    @property
    def passed(self):
        return self.status == "pass"

    @property
    def returncode(self):
        return {"pass": 0, "fail": 2}.get(self.status, 1)

    def error_display(self):
        if self.errors:
            return "\n".join(flatten_errors(self.errors))
        failed = [v for v in self.verdicts if not v.passed]
        return "; ".join("%s: %s" % (v.test, v.error_display() or "fail") for v in failed)


def nogo_constant(kernel):
    """
    sup_s s^2 |rho_m'(s)| on the reference support [-1, 1].
    """
    s = np.linspace(-1.0, 1.0, 4001)
    values = s ** 2 * np.abs(kernel.corrected(s, 1))
    best = int(np.argmax(values))
    lower, upper = s[max(best - 1, 0)], s[min(best + 1, len(s) - 1)]
    result = optimize.minimize_scalar(
        lambda x: -(x ** 2) * abs(float(kernel.corrected(np.array([x]), 1)[0])),
        bounds=(lower, upper),
        method="bounded",
    )
    return max(float(values[best]), -float(result.fun))


def _package_version():
    try:
        return metadata.version("colombeau-lab")
    except metadata.PackageNotFoundError:
        return "unknown"


def environment_fingerprint(config):
    import django
    import rest_framework
    import scipy
    import sympy

    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return {
        "colombeau_lab": _package_version(),
        "python": platform.python_version(),
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "django": django.get_version(),
        "djangorestframework": rest_framework.VERSION,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
    }


def _tagged(verdict, name):
    if name == "representative":
        return verdict
    reports = tuple(r._replace(test_id="%s:%s" % (name, r.test_id)) for r in verdict.reports)
    return verdict._replace(test="%s:%s" % (name, verdict.test), reports=reports)


def _deviation_report(test_id, samples, tolerance):
    """
    An OrderReport over (ε, max relative deviation) that passes when every
    deviation stays below ``tolerance``.
    """
    samples = tuple(samples)
    if len(samples) >= MIN_FIT_POINTS:
        estimate = estimate_order(samples)
    else:
        estimate = OrderEstimate(np.inf, 0.0, flags=("too-few-points",), used=len(samples))
    worst = max((value for _, value in samples), default=np.inf)
    return OrderReport(test_id, samples, estimate, "pass" if worst <= tolerance else "fail")


class ExperimentRunner:
    """
    Validate a config, build its objects and run the test it names.

    Command-line overrides (threads, seed, eps bounds) are applied on top of
    the config before anything is built.
    """

    def __init__(self, config, threads=None, seed=None, eps_min=None, eps_max=None, verbosity=1):
        self.raw_config = config
        self.verbosity = verbosity
        if verbosity >= 2:
            logging.getLogger("colombeau_lab").setLevel(logging.DEBUG)
        self.threads = threads
        self.seed = seed
        self.eps_min = eps_min
        self.eps_max = eps_max
        self.config = None
        self.builder = None

    def _apply_overrides(self, config):
        test = config["test"]
        if self.eps_min is not None or self.eps_max is not None:
            test["eps_min"] = self.eps_min if self.eps_min is not None else test["eps_min"]
            test["eps_max"] = self.eps_max if self.eps_max is not None else test["eps_max"]
            if not 0 < test["eps_min"] < test["eps_max"] <= 1:
                raise ImproperlyConfigured("Need 0 < eps-min < eps-max <= 1.")
            test["eps_grid"] = list(eps_grid_for(dict(test, eps_grid=None)))
        if self.seed is not None:
            config["seed"] = self.seed
        return config

    def run(self):
        started = time.perf_counter()
        config, errors = parse_config(self.raw_config)
        if errors:
            raw = self.raw_config if isinstance(self.raw_config, dict) else {}
            name = str(raw.get("name", ""))
            test = raw.get("test") if isinstance(raw.get("test"), dict) else {}
            kind = str(test.get("kind", ""))
            logger.error("Config %s is invalid", name or "<unnamed>")
            return RunReport(name, kind, "error", config=self.raw_config, errors=errors)

        try:
            self.config = config = self._apply_overrides(config)
            self.builder = ExperimentBuilder(config, threads=self.threads)
            handler = getattr(self, "run_%s" % config["test"]["kind"].replace("-", "_"))
            built = time.perf_counter()
            verdicts = tuple(handler(config["test"]))
        except (ImproperlyConfigured, ColombeauError) as e:
            logger.error("Experiment %s stopped: %s", config["name"], e)
            return RunReport(
                config["name"],
                config["test"]["kind"],
                "error",
                config=config,
                environment=environment_fingerprint(config),
                timings={"total": time.perf_counter() - started},
                errors={"exception": [str(e)]},
            )

        finished = time.perf_counter()
        outcome = all(v.passed for v in verdicts)
        expected = config["test"]["expect"] == "pass"
        status = "pass" if outcome == expected else "fail"
        logger.info("Experiment %s: %s (%d verdicts)", config["name"], status, len(verdicts))
        return RunReport(
            config["name"],
            config["test"]["kind"],
            status,
            verdicts=verdicts,
            config=config,
            environment=environment_fingerprint(config),
            timings={"build": built - started, "tests": finished - built, "total": finished - started},
            battery=self._battery_description(config["test"]),
        )

    def _battery_description(self, test):
        try:
            return self.builder.battery(test).describe()
        except (ImproperlyConfigured, ColombeauError):
            return None

    def _require(self, test, key):
        if not test.get(key):
            raise ImproperlyConfigured("test.%s is required for %s tests." % (key, test["kind"]))
        return test[key]

    def _kernel(self, test, order=None):
        spec = self.builder.kernel_spec(test)
        return build_kernel(spec["profile"], spec["order"] if order is None else order, spec["support_constant"])

    # quotient tests

    def run_moderate(self, test):
        battery = self.builder.battery(test)
        return [_tagged(is_moderate(u, battery), name) for name, u in self.builder.representatives()]

    def run_negligible(self, test):
        battery = self.builder.battery(test)
        verdicts = []
        for name, u in self.builder.representatives():
            verdicts.append(_tagged(is_negligible(u, battery, m_list=test["m_list"]), name))
            if test.get("rate_orders"):
                verdicts.append(_tagged(embedding_rate_check(u, battery, orders=test["rate_orders"]), name))
        return verdicts

    def run_saturation(self, test):
        battery = self.builder.battery(test)
        basis = [self.builder.tensor(name) for name in self._require(test, "basis")]
        return [
            _tagged(saturation_check(u, basis, battery, mode=test["mode"], m_list=test["m_list"]), name)
            for name, u in self.builder.representatives()
        ]

    # association tests

    def run_associate(self, test):
        verdicts = []
        for name, u in self.builder.representatives():
            probe = self.builder.probe(test, u.r, u.s)
            verdicts.append(_tagged(associated_zero(u, probe, orders=test.get("orders")), name))
        return verdicts

    def run_shadow(self, test):
        verdicts = []
        zoo = {name: self.builder.distribution(name) for name in test.get("distributions", [])}
        if not test.get("distribution") and not zoo:
            raise ImproperlyConfigured("test.distribution is required for shadow tests.")
        for name, u in self.builder.representatives():
            probe = self.builder.probe(test, u.r, u.s)
            if test.get("distribution"):
                v = self.builder.distribution(test["distribution"])
                verdicts.append(_tagged(shadow_matches(u, v, probe, orders=test.get("orders")), name))
            if zoo:
                found = shadow_search(u, zoo, probe)
                verdicts.append(_tagged(Verdict("shadow-search", bool(found), (), {"shadows": found}), name))
        return verdicts

    def run_product_suite(self, test):
        domain = self.builder.domain
        if domain.dim != 1:
            raise ImproperlyConfigured("The product suite runs on a one-dimensional chart.")
        suite = product_association_suite(domain, probe_factory=self._probe_factory(test))
        square = tensor_product(iota(DeltaDistribution(domain, (0.0,))), iota(DeltaDistribution(domain, (0.0,))))
        probe = self._probe_factory(test)(domain, 0, 0)
        divergence = diverges(square, probe, rate=-1.0)
        zoo = {
            "delta": DeltaDistribution(domain, (0.0,)),
            "zero": zero_distribution(domain),
        }
        found = shadow_search(square, zoo, probe)
        no_shadow = Verdict("delta-squared-no-shadow", not found, (), {"shadows": found})
        return [suite, divergence, no_shadow]

    def _probe_factory(self, test):
        def factory(domain, r, s):
            return self.builder.probe(test, r, s)

        return factory

    def run_c0(self, test):
        t = self.builder.tensor(self._require(test, "field"))
        X_choices = tuple(self.builder.tensor(name) for name in test.get("X", []))
        verdicts = []
        for name, u in self.builder.representatives():
            probe = self.builder.probe(test, u.r, u.s)
            K_list = [self.builder.compact_set(test)]
            verdicts.append(_tagged(c0_associated(u, t, probe, K_list, k=test["k"], X_choices=X_choices), name))
        return verdicts

    # commutation tests

    def _sample_points(self, test):
        rng = np.random.default_rng(self.config["seed"])
        K = self.builder.compact_set(test)
        lower = np.asarray(K.lower)
        upper = np.asarray(K.upper)
        return lower + (upper - lower) * rng.random((test["samples"], len(lower)))

    def _commutation(self, test_id, pairs, test):
        """
        Max relative h-norm deviation of lhs - rhs over sampled (ε, p), per ε.
        ``pairs`` yields (label, lhs, rhs) representatives.
        """
        tolerance = test.get("tolerance") or COMMUTATION_TOLERANCE
        kernel = self._kernel(test)
        A = self.builder.test_transport(test)
        domain = self.builder.domain
        K = self.builder.compact_set(test)
        points = self._sample_points(test)
        eps_values = [eps for eps in eps_grid_for(test) if domain.contains_box(K.expand(kernel.radius(eps)))]
        reports = []
        maxima = {}
        for label, lhs, rhs in pairs:
            identity = np.eye(domain.dim)
            samples = []
            for eps in eps_values:
                worst = 0.0
                for p in points:
                    omega = evaluate_kernel(kernel, eps, p, domain)
                    a = lhs(omega, p, A)
                    b = rhs(omega, p, A)
                    scale = max(1.0, float(fiber_norm(b, identity, rhs.r, rhs.s)))
                    worst = max(worst, float(fiber_norm(a - b, identity, rhs.r, rhs.s)) / scale)
                samples.append((float(eps), worst))
                logger.debug("%s %s eps=%g: max deviation %.3e", test_id, label, eps, worst)
            report = _deviation_report("%s-%s" % (test_id, label), samples, tolerance)
            maxima[label] = max((value for _, value in samples), default=np.inf)
            reports.append(report)
        passed = bool(reports) and all(r.verdict == "pass" for r in reports)
        return Verdict(test_id, passed, tuple(reports), {"max_deviation": maxima, "tolerance": tolerance})

    def _distributions(self, test):
        names = list(test.get("distributions", []))
        if test.get("distribution"):
            names.insert(0, test["distribution"])
        if not names:
            raise ImproperlyConfigured("test.distributions is required for %s tests." % test["kind"])
        return [(name, self.builder.distribution(name)) for name in names]

    def run_lie_commute(self, test):
        fields = [(name, self.builder.tensor(name)) for name in self._require(test, "X")]
        pairs = [
            ("%s-%s" % (v_name, X_name), hat_lie(X, iota(v)), iota(v.lie_derivative(X)))
            for v_name, v in self._distributions(test)
            for X_name, X in fields
        ]
        verdicts = [self._commutation("lie-commute", pairs, test)]
        leibniz_pairs = test.get("pairs") or []
        if not leibniz_pairs and {"left", "right"} <= set(self.config.get("representatives", {})):
            leibniz_pairs = [["left", "right"]]
        for left_name, right_name in leibniz_pairs:
            left = self.builder.named_representative(left_name)
            right = self.builder.named_representative(right_name)
            leibniz = [
                (
                    X_name,
                    hat_lie(X, tensor_product(left, right)),
                    tensor_product(hat_lie(X, left), right) + tensor_product(left, hat_lie(X, right)),
                )
                for X_name, X in fields
            ]
            verdicts.append(_tagged(self._commutation("leibniz", leibniz, test), "%s*%s" % (left_name, right_name)))
        return verdicts

    def run_pullback_commute(self, test):
        mu = self.builder.map(self._require(test, "map"))
        pairs = [(name, hat_pullback(mu, iota(v)), iota(v.pullback(mu))) for name, v in self._distributions(test)]
        return [self._commutation("pullback-commute", pairs, test)]

    # canonical experiments

    def run_nogo(self, test):
        """
        Both coordinate representations are moderate, their difference is not
        negligible, and its sup-values settle at sup_s s^2 |rho'(s)|.
        """
        battery = self.builder.battery(test)
        left = self.builder.named_representative("left")
        right = self.builder.named_representative("right")
        difference = left - right
        verdicts = [
            _tagged(is_moderate(left, battery), "left"),
            _tagged(is_moderate(right, battery), "right"),
        ]
        negligible = is_negligible(difference, battery, m_list=test["m_list"])
        verdicts.append(
            Verdict("difference-not-negligible", not negligible.passed, negligible.reports, negligible.details)
        )
        spec = self.builder.kernel_spec(test)
        for order in test.get("orders") or [spec["order"]]:
            kernel = self._kernel(test, order)
            constant = nogo_constant(kernel)
            report = sweep(difference, battery.config(kernel), test_id="nogo-sup-k%d" % order)
            tail = [value for _, value in report.samples[-NOGO_TAIL:]]
            deviation = max(abs(value - constant) / constant for value in tail)
            ok = len(tail) == NOGO_TAIL and deviation <= NOGO_RELATIVE_TOLERANCE
            logger.info("No-go k=%d: oracle %.6g, tail %s", order, constant, tail)
            verdicts.append(
                Verdict(
                    "nogo-oracle-k%d" % order,
                    ok,
                    (report.with_verdict("pass" if ok else "fail"),),
                    {"oracle": constant, "tail": tail, "relative_deviation": deviation},
                )
            )
        return verdicts

    def run_schwartz(self, test):
        """
        ι(x·vp(1/x)) ≈ σ(1) and ι(vp(1/x))·ι(x·δ) ≈ 0, while ι(δ) shadows δ
        and is not associated to 0.
        """
        domain = self.builder.domain
        if domain.dim != 1:
            raise ImproperlyConfigured("The Schwartz chain runs on a one-dimensional chart.")
        x = SmoothTensorField.from_expressions(domain, 0, 0, "x", label="x")
        one = SmoothTensorField.constant(domain, 0, 0, 1.0, label="1")
        delta = DeltaDistribution(domain, (0.0,))
        pv = PrincipalValueDistribution(domain, 0.0)
        probe = self._probe_factory(test)(domain, 0, 0)

        cancelled = iota(SmoothCoeffProduct(x, pv)) - sigma(one)
        annihilated = tensor_product(iota(pv), iota(SmoothCoeffProduct(x, delta)))
        first = associated_zero(cancelled, probe)
        second = associated_zero(annihilated, probe)
        shadow = shadow_matches(iota(delta), delta, probe)
        delta_zero = associated_zero(iota(delta), probe)
        return [
            first._replace(test="x-pv-minus-one-associated-zero"),
            second._replace(test="pv-times-x-delta-associated-zero"),
            shadow._replace(test="delta-shadows-delta"),
            Verdict("delta-not-associated-zero", not delta_zero.passed, delta_zero.reports, delta_zero.details),
        ]

    def run_moments(self, test):
        spec = self.builder.kernel_spec(test)
        domain = self.builder.domain
        K = self.builder.compact_set(test)
        if test.get("field"):
            f = self.builder.tensor(test["field"])
        else:
            f = SmoothTensorField.from_expressions(domain, 0, 0, "x1^2", label="x1^2")
        eps_grid = eps_grid_for(test)
        verdicts = []
        for order in test.get("orders") or [spec["order"]]:
            kernel = self._kernel(test, order)
            moments = kernel_moments(kernel, order)
            defect = max([abs(moments[0] - 1.0)] + [abs(m) for m in moments[1:]])
            defect_report = verify_moment_order(kernel, f, K, eps_grid, domain)
            scaling = derivative_scaling_report(kernel, eps_grid[:6], dim=domain.dim)
            reports = (defect_report,) + tuple(scaling)
            passed = defect <= MOMENT_TOLERANCE and all(r.verdict == "pass" for r in reports)
            verdicts.append(
                Verdict("moments-m%d" % order, passed, reports, {"moments": moments, "max_moment_defect": defect})
            )
        return verdicts
