import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from colombeau_lab.exceptions import BatteryError, ValenceError
from colombeau_lab.geometry import Box, Diffeomorphism, RiemannianMetric, SmoothTensorField
from colombeau_lab.transport import (
    PlateauCutoff,
    TransportOperator,
    TwoPointTensor,
    apply_induced_map,
    build_geodesic_transport,
    core_contains,
    induced_map_asr,
    kernel_contains,
    lie_derivative_transport,
    pullback_transport,
    smooth_step,
    two_point_to_transport,
)

from .factories import UNIT_BOX, covector, cutoff_identity, line_domain, plane_domain, vector


class TestCutoffs(SimpleTestCase):
    def test_smooth_step(self):
        np.testing.assert_allclose(smooth_step([-1.0, 0.0, 0.5, 1.0, 2.0]), [0.0, 0.0, 0.5, 1.0, 1.0])

    def test_plateau(self):
        chi = PlateauCutoff(Box((-1.0,), (1.0,)), 0.5)
        self.assertEqual(float(chi([0.0], [0.9])), 1.0)
        self.assertEqual(float(chi([0.0], [1.6])), 0.0)
        self.assertEqual(chi.support, Box((-1.5, -1.5), (1.5, 1.5)))

    def test_distance_factor(self):
        chi = PlateauCutoff(Box((-1.0,), (1.0,)), 0.5, near=0.2, near_margin=0.1)
        self.assertEqual(float(chi([0.0], [0.1])), 1.0)
        self.assertAlmostEqual(float(chi([0.0], [0.25])), 0.5)
        self.assertEqual(float(chi([0.0], [0.4])), 0.0)

    def test_empty_cutoff(self):
        chi = PlateauCutoff.empty()
        self.assertIsNone(chi.support)
        self.assertEqual(float(chi([0.0], [0.0])), 0.0)

    def test_as_field(self):
        field = PlateauCutoff(Box((-1.0,), (1.0,)), 0.5).as_field(line_domain())
        self.assertEqual(field.dim, 2)
        self.assertEqual(float(field([[0.0, 0.5]])[0]), 1.0)


class TestTransportOperator(SimpleTestCase):
    def setUp(self):
        self.domain = line_domain()
        self.A = cutoff_identity(self.domain)
        self.chi = PlateauCutoff(Box((-1.5,), (1.5,)), 0.5)

    def test_identity_on_the_core(self):
        self.assertTrue(core_contains(self.A, UNIT_BOX))
        self.assertFalse(core_contains(self.A, Box((-1.5,), (1.5,))))
        self.assertFalse(core_contains(TransportOperator.zero(self.domain), UNIT_BOX))

    def test_diagonal_vanishing_direction(self):
        B = TransportOperator.diagonal_vanishing(self.domain, self.chi)
        self.assertTrue(kernel_contains(B, UNIT_BOX))
        np.testing.assert_allclose(B([0.0], [0.5]), [[0.5]])
        self.assertFalse(kernel_contains(self.A, UNIT_BOX))

    def test_diagonal_vanishing_shape_check(self):
        with self.assertRaises(ValenceError):
            TransportOperator.diagonal_vanishing(self.domain, self.chi, matrix=np.eye(2))

    def test_perturbation_keeps_the_core(self):
        B = TransportOperator.diagonal_vanishing(self.domain, self.chi)
        perturbed = self.A.perturbed(B, 0.1)
        self.assertEqual(perturbed.core_region, self.A.core_region)
        self.assertTrue(core_contains(perturbed, UNIT_BOX))
        np.testing.assert_allclose(perturbed([0.0], [0.5]), [[1.05]])

    def test_sum_without_kernel_has_no_core(self):
        self.assertIsNone((self.A + self.A).core_region)

    def test_from_expressions(self):
        support = Box((-2.0, -2.0), (2.0, 2.0))
        A = TransportOperator.from_expressions(self.domain, ["1 + (q1 - p1)^2"], support=support)
        np.testing.assert_allclose(A([0.0], [0.5]), [[1.25]])
        np.testing.assert_allclose(A([0.0], [2.5]), [[0.0]])
        with self.assertRaises(ValenceError):
            TransportOperator.from_expressions(self.domain, ["1", "0"])

    def test_broadcasting(self):
        values = self.A(np.array([[0.0], [0.5], [2.5]]), [0.0])
        self.assertEqual(values.shape, (3, 1, 1))
        np.testing.assert_allclose(values[:, 0, 0], [1.0, 1.0, 0.0])


class TestInducedMaps(SimpleTestCase):
    def setUp(self):
        self.A = TransportOperator.from_expressions(
            plane_domain(), [["1", "q1 - p2"], ["p1 * q2", "2"]], label="A"
        )
        self.p = np.array([0.3, -0.2])
        self.q = np.array([0.5, 0.4])

    def test_scalars(self):
        np.testing.assert_allclose(induced_map_asr(self.A, self.p, self.q, 0, 0), [[1.0]])

    def test_vectors_and_covectors(self):
        forward = self.A(self.p, self.q)
        backward = self.A(self.q, self.p)
        np.testing.assert_allclose(induced_map_asr(self.A, self.p, self.q, 0, 1), forward)
        np.testing.assert_allclose(induced_map_asr(self.A, self.p, self.q, 1, 0), backward.T)
        np.testing.assert_allclose(induced_map_asr(self.A, self.p, self.q, 0, 2), np.kron(forward, forward))

    def test_apply_matches_the_matrix(self):
        fiber = np.array([[1.0, 2.0], [-1.0, 0.5]])
        applied = apply_induced_map(self.A, self.p, self.q, fiber, 1, 1)
        matrix = induced_map_asr(self.A, self.p, self.q, 1, 1)
        np.testing.assert_allclose(applied.ravel(), matrix @ fiber.ravel())


class TestPullbackAndLie(SimpleTestCase):
    def setUp(self):
        self.domain = line_domain()
        self.doubling = Diffeomorphism.from_expressions(self.domain, ["2*x"], ["x/2"])

    def test_pullback_of_cutoff_identity(self):
        pulled = pullback_transport(self.doubling, self.doubling, cutoff_identity(self.domain))
        self.assertAlmostEqual(pulled.core_region.lower[0], -0.75)
        np.testing.assert_allclose(pulled([0.5], [0.5]), [[1.0]])
        np.testing.assert_allclose(pulled([1.0], [1.0]), [[0.0]])

    def test_pullback_support(self):
        A = cutoff_identity(self.domain)
        self.assertEqual(A.support, Box((-2.0, -2.0), (2.0, 2.0)))
        pulled = pullback_transport(self.doubling, self.doubling, A)
        np.testing.assert_allclose(pulled.support.lower, [-1.1, -1.1])
        np.testing.assert_allclose(pulled.support.upper, [1.1, 1.1])
        np.testing.assert_allclose(pulled([1.05], [0.0]), [[0.0]])
        np.testing.assert_allclose(pulled([0.7], [0.0]), [[1.0]])

    def test_pullback_without_support(self):
        A = TransportOperator.from_expressions(self.domain, ["1 + p1*q1"])
        self.assertIsNone(pullback_transport(self.doubling, self.doubling, A).support)

    def test_lie_derivative_support(self):
        X = vector(self.domain, "1")
        L = lie_derivative_transport(X, X, cutoff_identity(self.domain))
        np.testing.assert_allclose(L.support.lower, [-2.002, -2.002])
        np.testing.assert_allclose(L.support.upper, [2.002, 2.002])

    def test_pullback_along_different_maps_has_no_core(self):
        identity = Diffeomorphism.identity(self.domain)
        self.assertIsNone(pullback_transport(self.doubling, identity, cutoff_identity(self.domain)).core_region)

    def test_lie_derivative_along_translations(self):
        X = vector(self.domain, "1")
        L = lie_derivative_transport(X, X, cutoff_identity(self.domain))
        np.testing.assert_allclose(L([0.0], [0.5]), [[0.0]], atol=1e-9)
        self.assertEqual(L.kernel_region, Box((-1.5,), (1.5,)))

    def test_lie_derivative_of_a_difference(self):
        A = TransportOperator.from_expressions(self.domain, ["q1 - p1"])
        L = lie_derivative_transport(vector(self.domain, "1"), vector(self.domain, "0"), A)
        np.testing.assert_allclose(L([0.0], [0.5]), [[-1.0]], atol=1e-8)
        self.assertIsNone(L.kernel_region)


class TestGeodesicTransport(SimpleTestCase):
    def test_flat_metric(self):
        domain = plane_domain()
        chi = PlateauCutoff(Box((-1.0, -1.0), (1.0, 1.0)), 0.5)
        A = build_geodesic_transport(RiemannianMetric.euclidean(domain), chi, Box((-0.5, -0.5), (0.5, 0.5)))
        np.testing.assert_allclose(A([0.0, 0.0], [0.2, 0.1]), np.eye(2))
        self.assertTrue(core_contains(A, Box((-0.5, -0.5), (0.5, 0.5))))

    def test_cutoff_must_cover_K(self):
        domain = line_domain()
        chi = PlateauCutoff(Box((-0.5,), (0.5,)), 0.5)
        with self.assertRaises(BatteryError):
            build_geodesic_transport(RiemannianMetric.euclidean(domain), chi, UNIT_BOX)


class TestTwoPointTensors(SimpleTestCase):
    def setUp(self):
        self.domain = line_domain()
        coefficient = SmoothTensorField.from_expressions(self.domain.product(), 0, 0, "x1*x2")
        self.upsilon = TwoPointTensor(
            self.domain, [(coefficient, covector(self.domain, "1"), vector(self.domain, "1"))]
        )

    def test_bullet(self):
        np.testing.assert_allclose(self.upsilon.matrix([0.5], [2.0]), [[1.0]])
        np.testing.assert_allclose(two_point_to_transport(self.upsilon)([0.5], [2.0]), [[1.0]])

    def test_terms_are_validated(self):
        coefficient = SmoothTensorField.from_expressions(self.domain.product(), 0, 0, "1")
        with self.assertRaises(ValenceError):
            TwoPointTensor(self.domain, [(coefficient, vector(self.domain, "1"), vector(self.domain, "1"))])

    def test_bullet_commutes_with_pullback(self):
        mu = Diffeomorphism.from_expressions(self.domain, ["2*x"], ["x/2"])
        left = two_point_to_transport(self.upsilon.pullback(mu, mu))
        right = pullback_transport(mu, mu, two_point_to_transport(self.upsilon))
        np.testing.assert_allclose(left([0.5], [1.0]), right([0.5], [1.0]))
        np.testing.assert_allclose(left([0.5], [1.0]), [[2.0]])

    def test_bullet_commutes_with_lie_derivative(self):
        X = vector(self.domain, "x")
        left = two_point_to_transport(self.upsilon.lie_derivative(X, X))
        right = lie_derivative_transport(X, X, two_point_to_transport(self.upsilon))
        np.testing.assert_allclose(left([0.5], [1.0]), [[1.0]], atol=1e-9)
        np.testing.assert_allclose(right([0.5], [1.0]), [[1.0]], atol=1e-6)


def constant_transport(domain, matrix):
    n = domain.dim
    matrix = np.asarray(matrix, dtype=float)
    return TransportOperator(domain, lambda p, q: np.broadcast_to(matrix, p.shape[:-1] + (n, n)).copy())


class TestTransportLaws(SimpleTestCase):
    def test_pullback_is_functorial_on_the_line(self):
        domain = line_domain()
        halving = Diffeomorphism.from_expressions(domain, ["x/2"], ["2*x"])
        cubic = Diffeomorphism.from_expressions(domain, ["x + 0.1*x^3"])
        A = TransportOperator.from_expressions(domain, ["1 + p1*q1^2"])
        rng = np.random.default_rng(0)
        p, q = rng.uniform(-1.0, 1.0, size=(2, 50, 1))
        stepwise = pullback_transport(halving, halving, pullback_transport(cubic, cubic, A))
        at_once = pullback_transport(cubic.compose(halving), cubic.compose(halving), A)
        np.testing.assert_allclose(stepwise(p, q), at_once(p, q), atol=1e-9)

    def test_pullback_is_functorial_in_the_plane(self):
        domain = plane_domain()
        shear = Diffeomorphism.from_expressions(domain, ["x/2", "y + 0.2*x"], ["2*x", "y - 0.4*x"])
        bend = Diffeomorphism.from_expressions(domain, ["x + 0.1*y^2", "y"], ["x - 0.1*y^2", "y"])
        A = TransportOperator.from_expressions(domain, [["1", "p1*q2"], ["q1 - p2", "2 + p2*q1"]])
        rng = np.random.default_rng(1)
        p, q = rng.uniform(-1.0, 1.0, size=(2, 50, 2))
        stepwise = pullback_transport(shear, bend, pullback_transport(bend, shear, A))
        at_once = pullback_transport(bend.compose(shear), shear.compose(bend), A)
        np.testing.assert_allclose(stepwise(p, q), at_once(p, q), atol=1e-9)

    def test_induced_maps_are_multiplicative(self):
        rng = np.random.default_rng(2)
        for domain in (line_domain(), plane_domain()):
            n = domain.dim
            first, second = rng.normal(size=(2, n, n))
            A1 = constant_transport(domain, first)
            A2 = constant_transport(domain, second)
            composed = constant_transport(domain, second @ first)
            p, q = np.zeros(n), np.ones(n)
            for r, s in ((0, 1), (0, 2), (1, 0), (2, 0)):
                with self.subTest(n=n, r=r, s=s):
                    fiber = rng.normal(size=n ** (r + s))
                    # contravariant slots compose forwards, covariant ones through the transpose
                    outer, inner = (A2, A1) if r == 0 else (A1, A2)
                    chained = induced_map_asr(outer, p, q, r, s) @ (induced_map_asr(inner, p, q, r, s) @ fiber)
                    np.testing.assert_allclose(induced_map_asr(composed, p, q, r, s) @ fiber, chained, atol=1e-10)

    def test_lie_derivative_vanishes_on_the_core_diagonal(self):
        line = line_domain()
        plane = plane_domain()
        cases = (
            (vector(line, "1 + x^2"), cutoff_identity(line), Box((-1.2,), (1.2,))),
            (vector(plane, "y", "-x"), cutoff_identity(plane), Box((-1.0, -1.0), (1.0, 1.0))),
        )
        for X, A, core_box in cases:
            with self.subTest(dim=X.dim):
                L = lie_derivative_transport(X, X, A)
                points = core_box.grid(5)
                self.assertLessEqual(float(np.max(np.abs(L.diagonal(points)))), 1e-6)
                self.assertTrue(kernel_contains(L, core_box, tol=1e-6, points_per_axis=5))


class TestTwoPointLeibniz(SimpleTestCase):
    def setUp(self):
        self.domain = line_domain()
        coefficient = SmoothTensorField.from_expressions(self.domain.product(), 0, 0, "x1 + x2^2")
        self.upsilon = TwoPointTensor(
            self.domain, [(coefficient, covector(self.domain, "1 + x^2"), vector(self.domain, "x"))]
        )
        self.X = vector(self.domain, "x")
        self.Y = vector(self.domain, "1")

    @staticmethod
    def four_terms(p, q):
        # f = p + q^2, η = (1 + p^2) dp, ξ = q ∂q, X = p ∂p, Y = ∂q
        f, g, h = p + q ** 2, 1 + p ** 2, q
        coefficient_p = p * 1.0 * g * h
        coefficient_q = 1.0 * 2 * q * g * h
        covector_term = f * (p * 2 * p + g * 1.0) * h
        vector_term = f * g * (1.0 * 1.0 - h * 0.0)
        return coefficient_p + coefficient_q + covector_term + vector_term

    def test_known_value(self):
        self.assertAlmostEqual(self.four_terms(0.5, 1.0), 7.625)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(min_value=-1.0, max_value=1.0), st.floats(min_value=-1.0, max_value=1.0))
    def test_lie_derivative_is_the_four_term_sum(self, p, q):
        expected = self.four_terms(p, q)
        termwise = two_point_to_transport(self.upsilon.lie_derivative(self.X, self.Y))
        by_flows = lie_derivative_transport(self.X, self.Y, two_point_to_transport(self.upsilon))
        self.assertAlmostEqual(float(termwise([p], [q])[0, 0]), expected, delta=1e-6)
        self.assertAlmostEqual(float(by_flows([p], [q])[0, 0]), expected, delta=1e-5)
