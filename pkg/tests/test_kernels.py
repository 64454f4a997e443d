import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, settings
from hypothesis import strategies as st

from colombeau_lab.exceptions import KernelConstructionError, SupportEscapeError
from colombeau_lab.kernels import (
    MollifierProfile,
    build_kernel,
    derivative_scaling_report,
    evaluate_kernel,
    kernel_moments,
    verify_moment_order,
)

from .factories import SHORT_EPS_GRID, UNIT_BOX, line_domain, plane_domain, scalar


class TestProfiles(SimpleTestCase):
    def test_named_profiles_are_normalized(self):
        for name in ("bump", "cos2"):
            with self.subTest(name=name):
                self.assertAlmostEqual(kernel_moments(build_kernel(name, 0, 1.0), 0)[0], 1.0, places=12)

    def test_unknown_profile(self):
        with self.assertRaises(KernelConstructionError):
            MollifierProfile.named("gaussian")

    def test_profile_from_expression(self):
        profile = MollifierProfile.resolve("1 - s^2")
        self.assertAlmostEqual(float(profile(np.array([0.0]))[0]), 0.75, places=10)
        self.assertEqual(float(profile(np.array([1.5]))[0]), 0.0)

    def test_profile_needs_positive_integral(self):
        with self.assertRaises(KernelConstructionError):
            MollifierProfile("-1")

    def test_bad_expression(self):
        with self.assertRaises(ValueError):
            MollifierProfile.resolve("q + 1")


class TestBuildKernel(SimpleTestCase):
    def test_order_range(self):
        with self.assertRaises(KernelConstructionError):
            build_kernel("bump", 7, 1.0)
        with self.assertRaises(KernelConstructionError):
            build_kernel("bump", -1, 1.0)

    @override_settings(COLOMBEAU_MAX_MOMENT_ORDER=2)
    def test_order_range_follows_settings(self):
        with self.assertRaises(KernelConstructionError):
            build_kernel("bump", 3, 1.0)

    def test_support_constant_must_be_positive(self):
        with self.assertRaises(KernelConstructionError):
            build_kernel("bump", 0, 0.0)

    def test_moments_vanish(self):
        for m in range(4):
            with self.subTest(m=m):
                moments = kernel_moments(build_kernel("bump", m, 1.0))
                self.assertAlmostEqual(moments[0], 1.0, places=12)
                for k in range(1, m + 1):
                    self.assertAlmostEqual(moments[k], 0.0, places=11)

    def test_uncorrected_second_moment_is_positive(self):
        self.assertGreater(kernel_moments(build_kernel("bump", 0, 1.0))[2], 0.0)

    def test_radius_and_modulation(self):
        kernel = build_kernel("bump", 0, 2.0, modulation=lambda p: 0.5)
        self.assertAlmostEqual(kernel.radius(0.1), 0.2)
        self.assertAlmostEqual(kernel.radius(0.1, [0.0]), 0.1)
        too_wide = build_kernel("bump", 0, 2.0, modulation=lambda p: 2.0)
        with self.assertRaises(ValueError):
            too_wide.radius(0.1, [0.0])


class TestEvaluateKernel(SimpleTestCase):
    def setUp(self):
        self.kernel = build_kernel("bump", 2, 1.0)

    def test_unit_integral(self):
        form = evaluate_kernel(self.kernel, 0.5, [0.3], line_domain())
        self.assertAlmostEqual(form.integral(), 1.0, places=10)
        self.assertAlmostEqual(form.support.lower[0], -0.2, places=12)

    def test_unit_integral_in_the_plane(self):
        form = evaluate_kernel(build_kernel("cos2", 1, 1.0), 0.25, [0.1, -0.2], plane_domain())
        self.assertAlmostEqual(form.integral(), 1.0, places=10)

    def test_eps_range(self):
        for eps in (0.0, -0.1, 1.5):
            with self.subTest(eps=eps):
                with self.assertRaises(ValueError):
                    evaluate_kernel(self.kernel, eps, [0.0])

    def test_support_must_fit_the_domain(self):
        with self.assertRaises(SupportEscapeError):
            evaluate_kernel(self.kernel, 0.5, [2.8], line_domain())

    def test_unbounded_domain_by_default(self):
        form = evaluate_kernel(self.kernel, 1.0, [100.0])
        self.assertIsNone(form.domain.bounds)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(min_value=0.01, max_value=1.0), st.floats(min_value=-1.0, max_value=1.0))
    def test_moments_survive_scaling(self, eps, center):
        form = evaluate_kernel(self.kernel, eps, [center], line_domain())
        self.assertAlmostEqual(form.integral(), 1.0, places=9)

    def test_derivative_is_antisymmetric(self):
        form = evaluate_kernel(build_kernel("bump", 0, 1.0), 0.5, [0.0], line_domain())
        left = form.derivative(np.array([[-0.2]]), (1,))
        right = form.derivative(np.array([[0.2]]), (1,))
        self.assertAlmostEqual(float(left[0]), -float(right[0]), places=10)
        self.assertGreater(float(left[0]), 0.0)


class TestMomentReports(SimpleTestCase):
    def test_plain_kernel_defect_is_second_order(self):
        f = scalar(line_domain(), "x^2")
        report = verify_moment_order(build_kernel("bump", 0, 1.0), f, UNIT_BOX, SHORT_EPS_GRID, p_points=5)
        self.assertEqual(report.test_id, "moments-m0")
        self.assertEqual(report.verdict, "pass")
        self.assertAlmostEqual(report.estimate.slope, 2.0, delta=1e-6)

    def test_corrected_kernel_is_exact_on_quadratics(self):
        f = scalar(line_domain(), "x^2")
        report = verify_moment_order(build_kernel("bump", 2, 1.0), f, UNIT_BOX, SHORT_EPS_GRID, p_points=5)
        self.assertEqual(report.verdict, "pass")
        self.assertIn("superconvergent", report.estimate.flags)

    def test_corrected_kernel_rate(self):
        f = scalar(line_domain(), "exp(x)")
        report = verify_moment_order(build_kernel("bump", 2, 1.0), f, UNIT_BOX, SHORT_EPS_GRID, p_points=5)
        self.assertEqual(report.verdict, "pass")
        self.assertGreater(report.estimate.slope, 3.5)

    def test_wide_kernels_are_dropped(self):
        f = scalar(line_domain(1.5), "exp(x)")
        grid = (1.0,) + SHORT_EPS_GRID
        report = verify_moment_order(build_kernel("bump", 0, 1.0), f, UNIT_BOX, grid, p_points=5)
        self.assertEqual(report.shrunk, (1.0,))
        self.assertEqual(len(report.samples), len(SHORT_EPS_GRID))

    def test_derivative_scaling(self):
        reports = derivative_scaling_report(build_kernel("bump", 0, 1.0), SHORT_EPS_GRID, dim=1)
        self.assertEqual([r.test_id for r in reports], ["kernel-derivative-0", "kernel-derivative-1", "kernel-derivative-2"])
        for report in reports:
            self.assertEqual(report.verdict, "pass")
