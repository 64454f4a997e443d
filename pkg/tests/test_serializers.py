import json

from django.test import SimpleTestCase
from rest_framework import serializers

from colombeau_lab.registry import get_experiment, registry
from colombeau_lab.serializers import (
    DistributionSerializer,
    DomainSerializer,
    FieldSerializer,
    OperationSerializer,
    TransportSerializer,
    dump_config,
    flatten_errors,
    normalize_config,
    parse_config,
)


def minimal_config(**test):
    test.setdefault("kind", "moderate")
    return {
        "name": "minimal",
        "domain": {"dim": 1, "lower": [-3.0], "upper": [3.0]},
        "objects": {"tensors": {"square": {"components": "x^2"}}},
        "representative": {"op": "sigma", "of": "square"},
        "test": test,
    }


class TestExperimentConfig(SimpleTestCase):
    def test_defaults(self):
        config, errors = parse_config(minimal_config())
        self.assertIsNone(errors)
        self.assertEqual(config["test"]["expect"], "pass")
        self.assertEqual(config["test"]["max_word"], 2)
        self.assertEqual(config["test"]["p_points"], 31)
        self.assertEqual(config["seed"], 0)
        self.assertEqual(config["objects"]["tensors"]["square"]["valence"], [0, 0])

    def test_representative_is_required(self):
        data = minimal_config()
        del data["representative"]
        config, errors = parse_config(data)
        self.assertIsNone(config)
        self.assertIn("representative", errors)

    def test_nogo_needs_both_sides(self):
        data = minimal_config(kind="nogo")
        data["representatives"] = {"left": {"op": "sigma", "of": "square"}}
        _, errors = parse_config(data)
        self.assertIn("representatives", errors)

    def test_leibniz_pairs_name_representatives(self):
        data = minimal_config(kind="lie-commute", X=["square"], pairs=[["left", "right"]])
        data["representatives"] = {"left": {"op": "sigma", "of": "square"}}
        _, errors = parse_config(data)
        self.assertEqual(flatten_errors(errors), ["test.pairs: Unknown representatives: right."])
        data["representatives"]["right"] = {"op": "sigma", "of": "square"}
        config, errors = parse_config(data)
        self.assertIsNone(errors)
        self.assertEqual(config["test"]["pairs"], [["left", "right"]])
        _, errors = parse_config(minimal_config(pairs=[["left"]]))
        self.assertIn("pairs", errors["test"])

    def test_unknown_test_kind(self):
        _, errors = parse_config(minimal_config(kind="bounded"))
        self.assertIn("kind", errors["test"])

    def test_eps_grid(self):
        _, errors = parse_config(minimal_config(eps_grid=[0.125, 0.25, 0.0625, 0.03125]))
        self.assertIn("eps_grid", errors["test"])
        _, errors = parse_config(minimal_config(eps_grid=[2.0, 0.5, 0.25, 0.125]))
        self.assertIn("eps_grid", errors["test"])
        _, errors = parse_config(minimal_config(eps_min=0.5, eps_max=0.25))
        self.assertIn("eps_min", errors["test"])

    def test_normalize_raises(self):
        with self.assertRaises(serializers.ValidationError):
            normalize_config({"name": "broken"})

    def test_canonical_experiments_validate(self):
        for name, _ in registry():
            with self.subTest(name=name):
                config, errors = parse_config(get_experiment(name))
                self.assertIsNone(errors)
                self.assertEqual(config["name"], name)

    def test_dump_is_sorted_json(self):
        dumped = dump_config(normalize_config(minimal_config()))
        self.assertEqual(json.loads(dumped)["name"], "minimal")
        self.assertLess(dumped.index('"description"'), dumped.index('"domain"'))


class TestObjectSerializers(SimpleTestCase):
    def test_domain_bounds(self):
        self.assertTrue(DomainSerializer(data={"dim": 2}).is_valid())
        self.assertFalse(DomainSerializer(data={"dim": 1, "lower": [0.0]}).is_valid())
        self.assertFalse(DomainSerializer(data={"dim": 2, "lower": [0.0], "upper": [1.0]}).is_valid())
        self.assertFalse(DomainSerializer(data={"dim": 1, "lower": [1.0], "upper": [0.0]}).is_valid())

    def test_components_are_normalized(self):
        serializer = FieldSerializer(data={"valence": [1, 0], "components": [1, 0.5, "x"]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data["components"], ["1", "0.5", "x"])

    def test_bad_components(self):
        for components in (True, "  ", [], {"x": 1}):
            with self.subTest(components=components):
                self.assertFalse(FieldSerializer(data={"components": components}).is_valid())

    def test_transport_requirements(self):
        serializer = TransportSerializer(data={"kind": "identity-cutoff"})
        self.assertFalse(serializer.is_valid())
        self.assertIn("plateau", serializer.errors)
        serializer = TransportSerializer(data={"kind": "geodesic", "plateau": [[-1.0], [1.0]]})
        self.assertFalse(serializer.is_valid())
        self.assertIn("metric", serializer.errors)
        self.assertTrue(TransportSerializer(data={"kind": "zero"}).is_valid())

    def test_plateau_box(self):
        serializer = TransportSerializer(data={"kind": "identity-cutoff", "plateau": [[1.0], [-1.0]]})
        self.assertFalse(serializer.is_valid())
        serializer = TransportSerializer(data={"kind": "identity-cutoff", "plateau": [[-1.0], [1.0, 2.0]]})
        self.assertFalse(serializer.is_valid())

    def test_distribution_requirements(self):
        serializer = DistributionSerializer(data={"kind": "delta"})
        self.assertFalse(serializer.is_valid())
        self.assertIn("point", serializer.errors)
        serializer = DistributionSerializer(data={"kind": "combination", "terms": [[True, "delta"]]})
        self.assertFalse(serializer.is_valid())
        serializer = DistributionSerializer(data={"kind": "combination", "terms": [[2, "delta"]]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data["terms"], [[2.0, "delta"]])


class TestOperationSerializer(SimpleTestCase):
    def test_arity(self):
        serializer = OperationSerializer(data={"op": "sub", "args": [{"op": "zero"}]})
        self.assertFalse(serializer.is_valid())
        self.assertIn("args", serializer.errors)

    def test_required_parameters(self):
        serializer = OperationSerializer(data={"op": "sigma"})
        self.assertFalse(serializer.is_valid())
        self.assertIn("of", serializer.errors)

    def test_nested_errors(self):
        tree = {"op": "add", "args": [{"op": "zero"}, {"op": "scale", "args": [{"op": "zero"}]}]}
        serializer = OperationSerializer(data=tree)
        self.assertFalse(serializer.is_valid())
        self.assertEqual(flatten_errors(serializer.errors), ["args.1.factor: Required for scale."])

    def test_nested_tree(self):
        tree = {"op": "hat_lie", "of": "X", "parts": ["omega"], "args": [{"op": "iota", "of": "delta"}]}
        serializer = OperationSerializer(data=tree)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data["args"][0]["of"], "delta")


class TestFlattenErrors(SimpleTestCase):
    def test_paths(self):
        errors = {"test": {"kind": ["Bad kind."]}, "domain": ["Missing."]}
        self.assertEqual(flatten_errors(errors), ["test.kind: Bad kind.", "domain: Missing."])

    def test_lists(self):
        self.assertEqual(flatten_errors([{}, {"op": ["Bad."]}]), ["1.op: Bad."])
        self.assertEqual(flatten_errors("Broken."), ["config: Broken."])
