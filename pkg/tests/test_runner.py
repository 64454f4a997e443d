import json
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase

from colombeau_lab.asymptotics import OrderReport, Verdict, estimate_order
from colombeau_lab.kernels import build_kernel
from colombeau_lab.registry import get_experiment
from colombeau_lab.reports import write_report
from colombeau_lab.runner import ExperimentRunner, RunReport, environment_fingerprint, nogo_constant

from .factories import SHORT_EPS_GRID

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def load_fixture(name):
    with open(os.path.join(FIXTURES, name), encoding="utf-8") as f:
        return json.load(f)


class TestRunReport(SimpleTestCase):
    def test_returncodes(self):
        self.assertEqual(RunReport("a", "moderate", "pass").returncode, 0)
        self.assertEqual(RunReport("a", "moderate", "fail").returncode, 2)
        self.assertEqual(RunReport("a", "moderate", "error").returncode, 1)
        self.assertTrue(RunReport("a", "moderate", "pass").passed)

    def test_error_display(self):
        estimate = estimate_order([(eps, 1.0) for eps in SHORT_EPS_GRID])
        failed = Verdict("negligible", False, (OrderReport("m1", (), estimate, "fail"),))
        report = RunReport("a", "negligible", "fail", verdicts=(Verdict("moderate", True), failed))
        self.assertEqual(report.error_display(), "negligible: m1 (slope 0.0)")
        report = RunReport("a", "moderate", "error", errors={"test": {"kind": ["Bad kind."]}})
        self.assertEqual(report.error_display(), "test.kind: Bad kind.")


class TestRunner(SimpleTestCase):
    def test_invalid_config(self):
        report = ExperimentRunner(load_fixture("invalid.json")).run()
        self.assertEqual(report.status, "error")
        self.assertEqual(report.name, "fixture-invalid")
        self.assertEqual(report.kind, "moderate")
        self.assertIn("domain", report.errors)
        self.assertEqual(report.returncode, 1)

    def test_moments(self):
        report = ExperimentRunner(load_fixture("moments.json")).run()
        self.assertEqual(report.status, "pass", report.error_display())
        self.assertEqual([v.test for v in report.verdicts], ["moments-m0", "moments-m1"])
        self.assertLess(report.verdicts[1].details["max_moment_defect"], 1e-8)
        self.assertEqual(report.returncode, 0)
        self.assertEqual(set(report.timings), {"build", "tests", "total"})

    def test_moderate(self):
        report = ExperimentRunner(load_fixture("moderate.json")).run()
        self.assertEqual(report.status, "pass", report.error_display())
        self.assertEqual(report.verdicts[0].test, "moderate")
        self.assertEqual(report.battery["max_j"], 0)

    def test_unexpected_outcome_fails(self):
        config = load_fixture("moderate.json")
        config["test"]["expect"] = "fail"
        report = ExperimentRunner(config).run()
        self.assertEqual(report.status, "fail")
        self.assertEqual(report.returncode, 2)

    def test_eps_overrides(self):
        runner = ExperimentRunner(load_fixture("moderate.json"), eps_max=0.25, eps_min=0.03125, seed=7)
        report = runner.run()
        self.assertEqual(report.config["test"]["eps_grid"], [0.25, 0.125, 0.0625, 0.03125])
        self.assertEqual(report.config["seed"], 7)
        self.assertEqual(report.status, "pass", report.error_display())

    def test_bad_eps_overrides(self):
        report = ExperimentRunner(load_fixture("moderate.json"), eps_max=0.01, eps_min=0.1).run()
        self.assertEqual(report.status, "error")
        self.assertIn("eps-min", report.error_display())

    def test_build_errors_are_reported(self):
        config = load_fixture("moderate.json")
        config["representative"]["of"] = "cube"
        report = ExperimentRunner(config).run()
        self.assertEqual(report.status, "error")
        self.assertIn("cube", report.error_display())

    def test_pullback_commutes(self):
        config = {
            "name": "pullback",
            "domain": {"dim": 1, "lower": [-3.0], "upper": [3.0]},
            "objects": {
                "maps": {"doubling": {"forward": ["2*x"], "inverse": ["x/2"]}},
                "distributions": {"delta": {"kind": "delta", "point": [0.0]}},
            },
            "test": {
                "kind": "pullback-commute",
                "K": [[-0.5], [0.5]],
                "map": "doubling",
                "distributions": ["delta"],
                "samples": 3,
                "eps_grid": list(SHORT_EPS_GRID),
            },
        }
        report = ExperimentRunner(config).run()
        self.assertEqual(report.status, "pass", report.error_display())
        verdict = report.verdicts[0]
        self.assertEqual(verdict.reports[0].test_id, "pullback-commute-delta")
        self.assertLess(verdict.details["max_deviation"]["delta"], 1e-5)


class TestHelpers(SimpleTestCase):
    def test_nogo_constant(self):
        kernel = build_kernel("bump", 0, 1.0)
        s = np.linspace(-1.0, 1.0, 20001)
        brute = float(np.max(s ** 2 * np.abs(kernel.corrected(s, 1))))
        constant = nogo_constant(kernel)
        self.assertGreaterEqual(constant, brute - 1e-8)
        self.assertAlmostEqual(constant, brute, places=6)

    def test_fingerprint(self):
        first = environment_fingerprint({"name": "a", "seed": 1})
        second = environment_fingerprint({"seed": 1, "name": "a"})
        self.assertEqual(first["config_sha256"], second["config_sha256"])
        self.assertNotEqual(first["config_sha256"], environment_fingerprint({"name": "b"})["config_sha256"])
        self.assertIn("numpy", first)


class TestCanonicalExperiments(SimpleTestCase):
    """
    The registry experiments on shortened eps grids; the association tails
    use the same two smallest eps values as the full runs.
    """

    def run_experiment(self, name, eps_max, eps_min):
        report = ExperimentRunner(get_experiment(name), eps_max=eps_max, eps_min=eps_min).run()
        self.assertEqual(report.status, "pass", report.error_display())
        return {verdict.test: verdict for verdict in report.verdicts}

    def test_embedding_differences(self):
        verdicts = self.run_experiment("embed-diff", 2.0 ** -4, 2.0 ** -9)
        for name in ["sin(x)", "x*exp(-x^2)", "x^2"]:
            with self.subTest(field=name):
                self.assertTrue(verdicts["%s:negligible" % name].passed)
                rates = verdicts["%s:embed-rate" % name]
                self.assertTrue(rates.passed, rates.error_display())
                self.assertTrue(rates.details["monotone"])
                for k, order in rates.details["orders"].items():
                    self.assertGreaterEqual(order["min_slope"], k + 0.75)

    def test_leibniz_pairs(self):
        verdicts = self.run_experiment("lie-commute", 2.0 ** -3, 2.0 ** -6)
        self.assertEqual(
            sorted(verdicts),
            ["delta*step:leibniz", "lie-commute", "smooth*delta:leibniz", "smooth*smooth_vector:leibniz"],
        )
        for name, verdict in verdicts.items():
            with self.subTest(verdict=name):
                self.assertTrue(verdict.passed, verdict.error_display())
                self.assertLessEqual(max(verdict.details["max_deviation"].values()), 1e-5)

    def test_nogo(self):
        verdicts = self.run_experiment("nogo-vector", 2.0 ** -3, 2.0 ** -7)
        self.assertTrue(verdicts["left:moderate"].passed)
        self.assertTrue(verdicts["right:moderate"].passed)
        self.assertTrue(verdicts["difference-not-negligible"].passed)
        for k in (0, 1, 2):
            oracle = verdicts["nogo-oracle-k%d" % k]
            self.assertTrue(oracle.passed)
            self.assertLessEqual(oracle.details["relative_deviation"], 0.1)
            self.assertEqual(len(oracle.details["tail"]), 4)

    def test_schwartz_chain(self):
        verdicts = self.run_experiment("schwartz", 2.0 ** -7, 2.0 ** -10)
        self.assertEqual(
            sorted(verdicts),
            [
                "delta-not-associated-zero",
                "delta-shadows-delta",
                "pv-times-x-delta-associated-zero",
                "x-pv-minus-one-associated-zero",
            ],
        )
        self.assertTrue(all(verdict.passed for verdict in verdicts.values()))

    def test_product_matrix_and_delta_square(self):
        verdicts = self.run_experiment("shadow-suite", 2.0 ** -6, 2.0 ** -10)
        self.assertEqual(
            verdicts["product-association"].details["entries"],
            {
                "smooth-x-delta": True,
                "continuous-x-continuous": True,
                "kink-x-kink": True,
                "coordinate-x-delta": True,
                "zero-x-delta": True,
            },
        )
        self.assertTrue(verdicts["divergence"].passed)
        self.assertEqual(verdicts["divergence"].details["rate"], -1.0)
        self.assertEqual(verdicts["delta-squared-no-shadow"].details["shadows"], [])

    def test_rates_are_reproducible(self):
        contents = []
        for _ in range(2):
            report = ExperimentRunner(get_experiment("nogo-vector"), eps_max=2.0 ** -3, eps_min=2.0 ** -7).run()
            with tempfile.TemporaryDirectory() as tmp:
                _, rates_path = write_report(report, tmp)
                with open(rates_path, "rb") as f:
                    contents.append(f.read())
        self.assertEqual(contents[0], contents[1])
        self.assertTrue(contents[0].startswith(b"eps,sup_value,test_id\n"))
