from django.test import SimpleTestCase

from colombeau_lab.distributions import (
    FIELD_CACHE_SIZE,
    DeltaDistribution,
    HeavisideDistribution,
    LieDerivativeDistribution,
    LinearCombination,
    PrincipalValueDistribution,
    PullbackDistribution,
    RegularDistribution,
    SmoothCoeffProduct,
    TensorProductDistribution,
    lie_derivative_distribution,
    rho_embed,
    zero_distribution,
)
from colombeau_lab.exceptions import DomainError, UnsupportedDistributionError, ValenceError
from colombeau_lab.geometry import Diffeomorphism
from colombeau_lab.kernels import build_kernel, kernel_moments

from .factories import covector, density_at, line_domain, plane_domain, scalar, unit_bump, vector


class DistributionTestCase(SimpleTestCase):
    def setUp(self):
        self.domain = line_domain()
        self.one = scalar(self.domain, "1")
        self.omega = unit_bump(self.domain)
        self.shifted = unit_bump(self.domain, 0.2, 0.5)
        self.delta = DeltaDistribution(self.domain, [0.0])

    def w0(self, omega):
        return density_at(omega, [0.0])

    def dw0(self, omega):
        return float(omega.derivative([[0.0]], (1,))[0])


class TestRegular(DistributionTestCase):
    def test_pairing_is_an_integral(self):
        v = rho_embed(scalar(self.domain, "x^2"))
        second_moment = kernel_moments(build_kernel("bump", 0, 1.0))[2]
        self.assertAlmostEqual(v.pair(self.one, self.omega), 0.25 * second_moment, places=12)

    def test_valence_and_domain_checks(self):
        v = rho_embed(scalar(self.domain, "x^2"))
        with self.assertRaises(ValenceError):
            v.pair(vector(self.domain, "1"), self.omega)
        with self.assertRaises(DomainError):
            v.pair(self.one, unit_bump(plane_domain()))

    def test_kinks(self):
        v = RegularDistribution(scalar(self.domain, "abs(x)"), kinks=[[0.0]])
        self.assertEqual(len(v.singular_support()), 1)
        self.assertAlmostEqual(v.pair(self.one, unit_bump(self.domain, 1.0, 0.5)), 1.0, places=10)
        self.assertGreater(v.pair(self.one, self.omega), 0.0)

    def test_lie_derivative_matches_the_adjoint(self):
        v = rho_embed(scalar(self.domain, "x^2"))
        X = vector(self.domain, "1")
        closed = lie_derivative_distribution(X, v)
        self.assertIsInstance(closed, RegularDistribution)
        self.assertAlmostEqual(closed.pair(self.one, self.shifted), 0.4, places=10)
        adjoint = LieDerivativeDistribution(X, v)
        self.assertAlmostEqual(adjoint.pair(self.one, self.shifted), 0.4, delta=1e-6)

    def test_pullback(self):
        doubling = Diffeomorphism.from_expressions(self.domain, ["2*x"], ["x/2"])
        v = rho_embed(scalar(self.domain, "x^2")).pullback(doubling)
        second_moment = kernel_moments(build_kernel("bump", 0, 1.0))[2]
        self.assertAlmostEqual(v.pair(self.one, self.omega), second_moment, places=10)


class TestDelta(DistributionTestCase):
    def test_evaluation(self):
        self.assertAlmostEqual(self.delta.pair(self.one, self.omega), self.w0(self.omega), places=12)

    def test_outside_the_support(self):
        self.assertEqual(self.delta.pair(self.one, unit_bump(self.domain, 1.0, 0.5)), 0.0)

    def test_derivative_moves_onto_the_field(self):
        delta_prime = DeltaDistribution(self.domain, [0.0], alpha=[1])
        self.assertEqual(delta_prime.label, "delta'")
        self.assertAlmostEqual(
            delta_prime.pair(scalar(self.domain, "x"), self.omega), -self.w0(self.omega), places=10
        )
        self.assertAlmostEqual(delta_prime.pair(self.one, self.shifted), -self.dw0(self.shifted), places=8)

    def test_constant_lie_derivative_matches_the_adjoint(self):
        X = vector(self.domain, "1")
        closed = self.delta.lie_derivative(X)
        self.assertIsInstance(closed, LinearCombination)
        adjoint = LieDerivativeDistribution(X, self.delta)
        expected = -self.dw0(self.shifted)
        self.assertAlmostEqual(closed.pair(self.one, self.shifted), expected, places=8)
        self.assertAlmostEqual(adjoint.pair(self.one, self.shifted), expected, places=8)

    def test_bad_construction(self):
        with self.assertRaises(ValenceError):
            DeltaDistribution(self.domain, [0.0], alpha=[1, 0])
        with self.assertRaises(ValenceError):
            DeltaDistribution(self.domain, [0.0], r=1)

    def test_vector_valued(self):
        plane = plane_domain()
        v = DeltaDistribution(plane, [0.0, 0.0], components=[1.0, 2.0], r=1)
        omega = unit_bump(plane)
        value = v.pair(covector(plane, "x + 1", "3"), omega)
        self.assertAlmostEqual(value, 7.0 * density_at(omega, [0.0, 0.0]), places=10)

    def test_pullback_closed_form_and_adjoint(self):
        doubling = Diffeomorphism.from_expressions(self.domain, ["2*x"], ["x/2"])
        expected = 0.5 * self.w0(self.omega)
        self.assertAlmostEqual(self.delta.pullback(doubling).pair(self.one, self.omega), expected, places=10)
        adjoint = PullbackDistribution(doubling, self.delta)
        self.assertAlmostEqual(adjoint.pair(self.one, self.omega), expected, places=10)


class TestHeaviside(DistributionTestCase):
    def test_half_of_a_centred_bump(self):
        H = HeavisideDistribution(self.domain)
        self.assertAlmostEqual(H.pair(self.one, self.omega), 0.5, delta=1e-6)
        self.assertEqual(H.pair(self.one, unit_bump(self.domain, -1.0, 0.5)), 0.0)

    def test_derivative_is_delta(self):
        H = HeavisideDistribution(self.domain)
        adjoint = LieDerivativeDistribution(vector(self.domain, "1"), H)
        self.assertAlmostEqual(adjoint.pair(self.one, self.omega), self.w0(self.omega), delta=1e-7)
        closed = H.lie_derivative(vector(self.domain, "2"))
        self.assertAlmostEqual(closed.pair(self.one, self.omega), 2 * self.w0(self.omega), places=10)

    def test_one_dimensional_only(self):
        with self.assertRaises(UnsupportedDistributionError):
            HeavisideDistribution(plane_domain())


class TestPrincipalValue(DistributionTestCase):
    def test_x_times_pv_is_one(self):
        pv = PrincipalValueDistribution(self.domain)
        self.assertAlmostEqual(pv.pair(scalar(self.domain, "x"), self.omega), 1.0, delta=1e-6)

    def test_odd_pairing_vanishes(self):
        pv = PrincipalValueDistribution(self.domain)
        self.assertAlmostEqual(pv.pair(self.one, self.omega), 0.0, delta=1e-8)

    def test_one_dimensional_only(self):
        with self.assertRaises(UnsupportedDistributionError):
            PrincipalValueDistribution(plane_domain())


class TestCombinations(DistributionTestCase):
    def test_coefficient_product(self):
        x = scalar(self.domain, "x")
        self.assertAlmostEqual(SmoothCoeffProduct(x, self.delta).pair(self.one, self.omega), 0.0, places=12)
        self.assertIsInstance(self.delta * x, SmoothCoeffProduct)
        with self.assertRaises(ValenceError):
            SmoothCoeffProduct(vector(self.domain, "1"), self.delta)

    def test_tensor_product(self):
        v = TensorProductDistribution(vector(self.domain, "1"), self.delta)
        self.assertEqual(v.valence, (1, 0))
        self.assertAlmostEqual(v.pair(covector(self.domain, "1"), self.omega), self.w0(self.omega), places=12)
        with self.assertRaises(ValenceError):
            v.pair(self.one, self.omega)

    def test_linear_combination(self):
        combined = self.delta + HeavisideDistribution(self.domain)
        self.assertAlmostEqual(combined.pair(self.one, self.omega), self.w0(self.omega) + 0.5, delta=1e-6)
        self.assertAlmostEqual((-self.delta).pair(self.one, self.omega), -self.w0(self.omega), places=12)
        self.assertAlmostEqual((2 * self.delta).pair(self.one, self.omega), 2 * self.w0(self.omega), places=12)

    def test_mixed_valence_is_rejected(self):
        with self.assertRaises(ValenceError):
            LinearCombination([(1.0, self.delta), (1.0, rho_embed(vector(self.domain, "1")))])

    def test_singular_support_is_deduplicated(self):
        combined = self.delta - DeltaDistribution(self.domain, [0.0], alpha=[1])
        self.assertEqual(len(combined.singular_support()), 1)

    def test_zero(self):
        self.assertEqual(zero_distribution(self.domain).pair(self.one, self.omega), 0.0)
        with self.assertRaises(ValenceError):
            LinearCombination([])


class TestDerivedFieldCache(DistributionTestCase):
    def test_coefficient_products_are_reused(self):
        product = SmoothCoeffProduct(scalar(self.domain, "1 + x^2"), self.delta)
        weighted = product._weighted(self.one)
        self.assertIs(product._weighted(self.one), weighted)
        self.assertAlmostEqual(float(weighted([[2.0]])[0]), 5.0)

    def test_cache_is_bounded(self):
        product = SmoothCoeffProduct(scalar(self.domain, "x"), self.delta)
        derivative = LieDerivativeDistribution(vector(self.domain, "1"), self.delta)
        fields = [scalar(self.domain, "%d + x" % k) for k in range(FIELD_CACHE_SIZE + 10)]
        for field in fields:
            product._weighted(field)
            derivative._derived(field)
        self.assertEqual(len(product._products), FIELD_CACHE_SIZE)
        self.assertEqual(len(derivative._derivatives), FIELD_CACHE_SIZE)
        # the oldest fields were evicted, the newest are kept
        kept = [entry[0] for entry in product._products.values()]
        self.assertIs(kept[-1], fields[-1])
        self.assertNotIn(id(fields[0]), product._products)
        self.assertAlmostEqual(float(derivative._derived(fields[-1])([[0.5]])[0]), 1.0)
