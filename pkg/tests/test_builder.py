import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase

from colombeau_lab.builder import ExperimentBuilder, eps_grid_for
from colombeau_lab.distributions import DeltaDistribution, LinearCombination
from colombeau_lab.serializers import normalize_config
from colombeau_lab.transport import core_contains

from .factories import SHORT_EPS_GRID, UNIT_BOX, kernel_form, unit_bump


def builder_config(**extra):
    config = {
        "name": "builder",
        "domain": {"dim": 1, "lower": [-3.0], "upper": [3.0]},
        "objects": {
            "tensors": {
                "square": {"components": "x^2"},
                "one": {"components": "1"},
                "d_dx": {"valence": [1, 0], "components": ["1"]},
                "broken": {"components": "foo(x)"},
            },
            "maps": {"doubling": {"forward": ["2*x"], "inverse": ["x/2"]}},
            "kernels": {"second": {"order": 2}},
            "transports": {
                "A": {"kind": "identity-cutoff", "plateau": [[-1.5], [1.5]]},
                "B": {"kind": "diagonal-vanishing", "plateau": [[-1.5], [1.5]]},
            },
            "distributions": {
                "delta": {"kind": "delta", "point": [0.0]},
                "regular_square": {"kind": "regular", "field": "square"},
                "both": {"kind": "combination", "terms": [[1, "delta"], [-2, "regular_square"]]},
                "loop": {"kind": "combination", "terms": [[1, "loop"]]},
                "moved": {"kind": "pullback", "map": "doubling", "inner": "delta"},
            },
        },
        "representative": {
            "op": "sub",
            "args": [{"op": "iota", "of": "regular_square"}, {"op": "sigma", "of": "square"}],
        },
        "representatives": {"scaled": {"op": "support_scale", "expression": "1/r"}},
        "test": {"kind": "moderate", "K": [[-1.0], [1.0]], "B": ["B"], "max_word": 0, "max_j": 1, "p_points": 5},
    }
    config.update(extra)
    return normalize_config(config)


class TestEpsGrid(SimpleTestCase):
    def test_explicit_grid(self):
        self.assertEqual(eps_grid_for({"eps_grid": [0.5, 0.25]}), (0.5, 0.25))

    def test_powers_of_two(self):
        grid = eps_grid_for({"eps_grid": None, "eps_max": 2.0 ** -3, "eps_min": 2.0 ** -6})
        self.assertEqual(grid, SHORT_EPS_GRID)

    def test_bounds_round_inwards(self):
        grid = eps_grid_for({"eps_max": 0.2, "eps_min": 0.01})
        self.assertEqual(grid, (2.0 ** -3, 2.0 ** -4, 2.0 ** -5, 2.0 ** -6))


class TestNamedObjects(SimpleTestCase):
    def setUp(self):
        self.builder = ExperimentBuilder(builder_config())

    def test_tensor(self):
        square = self.builder.tensor("square")
        self.assertEqual(float(square([[0.5]])[0]), 0.25)
        self.assertIs(self.builder.tensor("square"), square)
        self.assertEqual(self.builder.tensor("d_dx").valence, (1, 0))

    def test_unknown_name(self):
        with self.assertRaisesMessage(ImproperlyConfigured, "objects.tensors has no entry 'cube'"):
            self.builder.tensor("cube")

    def test_bad_expression(self):
        with self.assertRaisesMessage(ImproperlyConfigured, "objects.tensors.broken"):
            self.builder.tensor("broken")

    def test_self_reference(self):
        with self.assertRaisesMessage(ImproperlyConfigured, "refers to itself"):
            self.builder.distribution("loop")

    def test_transports(self):
        A = self.builder.transport("A")
        self.assertEqual(A.label, "A")
        self.assertTrue(core_contains(A, UNIT_BOX))
        np.testing.assert_allclose(self.builder.transport("B")([0.0], [0.5]), [[0.5]])

    def test_distributions(self):
        self.assertIsInstance(self.builder.distribution("delta"), DeltaDistribution)
        both = self.builder.distribution("both")
        self.assertIsInstance(both, LinearCombination)
        omega = unit_bump(self.builder.domain, 1.0, 0.5)
        self.assertAlmostEqual(both.pair(self.builder.tensor("one"), omega), -2.0, delta=0.25)

    def test_pullback_distribution(self):
        moved = self.builder.distribution("moved")
        omega = unit_bump(self.builder.domain)
        one = self.builder.tensor("one")
        self.assertAlmostEqual(moved.pair(one, omega), 0.5 * float(omega([[0.0]])[0]), places=10)

    def test_kernel(self):
        self.assertEqual(self.builder.kernel("second").order, 2)


class TestRepresentatives(SimpleTestCase):
    def setUp(self):
        self.builder = ExperimentBuilder(builder_config())

    def test_operation_tree(self):
        u = self.builder.representative()
        self.assertEqual(u.valence, (0, 0))
        A = self.builder.transport("A")
        value = u(kernel_form(self.builder.domain, 0.125, 0.5), 0.5, A)
        self.assertGreater(float(value), 0.0)
        self.assertLess(float(value), 0.01)

    def test_support_scale(self):
        u = self.builder.named_representative("scaled")
        self.assertAlmostEqual(float(u(unit_bump(self.builder.domain), 0.0, None)), 2.0)

    def test_representatives(self):
        self.assertEqual([name for name, _ in self.builder.representatives()], ["representative", "scaled"])

    def test_missing_trees(self):
        with self.assertRaises(ImproperlyConfigured):
            self.builder.named_representative("left")
        builder = ExperimentBuilder(dict(builder_config(), representative=None))
        with self.assertRaisesMessage(ImproperlyConfigured, "no representative"):
            builder.representative()

    def test_errors_carry_the_path(self):
        tree = {"op": "restrict", "box": [[-4.0], [0.0]], "args": [{"op": "sigma", "of": "square"}]}
        with self.assertRaisesMessage(ImproperlyConfigured, "representative:"):
            self.builder.representative(tree)
        tree = {"op": "tensor", "args": [{"op": "sigma", "of": "square"}, {"op": "sigma", "of": "cube"}]}
        with self.assertRaisesMessage(ImproperlyConfigured, "cube"):
            self.builder.representative(tree)


class TestBatteriesAndProbes(SimpleTestCase):
    def setUp(self):
        self.builder = ExperimentBuilder(builder_config())
        self.test = self.builder.config["test"]

    def test_battery(self):
        battery = self.builder.battery(self.test)
        self.assertEqual(battery.K, UNIT_BOX)
        self.assertTrue(core_contains(battery.A, UNIT_BOX))
        self.assertEqual(len(battery.B_choices), 1)
        self.assertEqual(battery.eps_grid, tuple(2.0 ** -k for k in range(3, 13)))
        self.assertEqual(battery.describe()["B"], ["B"])

    def test_named_transport(self):
        battery = self.builder.battery(dict(self.test, A="A"))
        self.assertEqual(battery.A.label, "A")

    def test_kernel_spec(self):
        self.assertEqual(self.builder.kernel_spec(dict(self.test, kernel="second"))["order"], 2)
        with self.assertRaises(ImproperlyConfigured):
            self.builder.kernel_spec(dict(self.test, kernel="third"))

    def test_default_probe(self):
        probe = self.builder.probe(self.test)
        self.assertEqual(len(probe.omega_list), 2)
        self.assertEqual(probe.A.label, "chi*id")
        self.assertEqual(probe.threads, None)

    def test_probe_with_forms(self):
        test = dict(self.test, forms=[{"center": [0.5], "radius": 0.25, "profile": "bump"}], eps_grid=list(SHORT_EPS_GRID))
        probe = self.builder.probe(test)
        self.assertEqual(len(probe.omega_list), 1)
        self.assertEqual(probe.eps_grid, SHORT_EPS_GRID)
        self.assertTrue(core_contains(probe.A, UNIT_BOX))
        with self.assertRaises(ImproperlyConfigured):
            self.builder.probe(dict(self.test, basis=["square"]))
