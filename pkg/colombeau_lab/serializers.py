"""
Validation and normalization of experiment configs.

An experiment config is a JSON document with a chart ``domain``, named
``objects`` (tensors, metrics, maps, kernels, transports, distributions), an
operation tree for the ``representative`` under test and a ``test`` block.
Expression strings use the grammar of ``colombeau_lab.expressions``.
"""
import json

from rest_framework import serializers

TEST_KINDS = (
    "moderate",
    "negligible",
    "associate",
    "shadow",
    "product-suite",
    "c0",
    "lie-commute",
    "pullback-commute",
    "saturation",
    "nogo",
    "schwartz",
    "moments",
)

TRANSPORT_KINDS = ("identity-cutoff", "diagonal-vanishing", "geodesic", "expressions", "zero")

DISTRIBUTION_KINDS = (
    "delta",
    "regular",
    "heaviside",
    "pv",
    "combination",
    "product",
    "tensor",
    "lie",
    "pullback",
    "zero",
)

# op name -> (minimum args, maximum args, required parameters)
OPERATIONS = {
    "sigma": (0, 0, ("of",)),
    "iota": (0, 0, ("of",)),
    "zero": (0, 0, ()),
    "support_scale": (0, 0, ("expression",)),
    "tensor": (2, 2, ()),
    "contract": (1, 1, ("upper", "lower")),
    "add": (1, None, ()),
    "sub": (2, 2, ()),
    "scale": (1, 1, ("factor",)),
    "hat_lie": (1, 1, ("of",)),
    "hat_pullback": (1, 1, ("of",)),
    "saturate": (1, 1, ("of",)),
    "directional": (1, 1, ("directions",)),
    "restrict": (1, 1, ("box",)),
}


def flatten_errors(errors, prefix=""):
    """
    Flatten a nested DRF error tree into "path: message" lines.
    """
    lines = []
    if isinstance(errors, dict):
        for key, value in errors.items():
            path = "%s.%s" % (prefix, key) if prefix else str(key)
            lines.extend(flatten_errors(value, path))
    elif isinstance(errors, list) and errors and all(isinstance(e, str) for e in errors):
        lines.append("%s: %s" % (prefix or "config", " ".join(str(e) for e in errors)))
    elif isinstance(errors, list):
        for index, value in enumerate(errors):
            if value:
                lines.extend(flatten_errors(value, "%s.%d" % (prefix, index) if prefix else str(index)))
    else:
        lines.append("%s: %s" % (prefix or "config", errors))
    return lines


class ComponentsField(serializers.JSONField):
    """
    An expression string or nested lists of expression strings and numbers.
    Numbers are normalized to strings.
    """

    def to_internal_value(self, data):
        data = super().to_internal_value(data)
        return self._normalize(data)

    def _normalize(self, value):
        if isinstance(value, bool):
            raise serializers.ValidationError("Components must be expressions or numbers, got %r." % value)
        if isinstance(value, (int, float)):
            return repr(value) if isinstance(value, float) else str(value)
        if isinstance(value, str):
            if not value.strip():
                raise serializers.ValidationError("Empty expression.")
            return value
        if isinstance(value, list) and value:
            return [self._normalize(item) for item in value]
        raise serializers.ValidationError("Components must be expressions or non-empty nested lists.")


class BoxField(serializers.ListField):
    """
    [[lower...], [upper...]].
    """

    child = serializers.ListField(child=serializers.FloatField(), min_length=1)

    def __init__(self, **kwargs):
        kwargs.setdefault("min_length", 2)
        kwargs.setdefault("max_length", 2)
        super().__init__(**kwargs)

    def to_internal_value(self, data):
        if not isinstance(data, list) or len(data) != 2:
            raise serializers.ValidationError("A box is a pair [lower, upper].")
        lower, upper = super().to_internal_value(data)
        if len(lower) != len(upper):
            raise serializers.ValidationError("Box bounds have different lengths.")
        if any(b <= a for a, b in zip(lower, upper)):
            raise serializers.ValidationError("Box has no volume.")
        return [lower, upper]


def valence_field(**kwargs):
    return serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2, **kwargs)


class DomainSerializer(serializers.Serializer):
    dim = serializers.IntegerField(min_value=1, max_value=3)
    lower = serializers.ListField(child=serializers.FloatField(), required=False)
    upper = serializers.ListField(child=serializers.FloatField(), required=False)

    def validate(self, data):
        bounds = [key for key in ("lower", "upper") if key in data]
        if len(bounds) == 1:
            raise serializers.ValidationError("Give both lower and upper bounds or neither.")
        if bounds:
            if len(data["lower"]) != data["dim"] or len(data["upper"]) != data["dim"]:
                raise serializers.ValidationError("Bounds must have %d entries." % data["dim"])
            if any(b <= a for a, b in zip(data["lower"], data["upper"])):
                raise serializers.ValidationError("The domain has no volume.")
        return data


class FieldSerializer(serializers.Serializer):
    valence = valence_field(default=[0, 0])
    components = ComponentsField()
    kinks = serializers.ListField(child=serializers.FloatField(), default=list)
    label = serializers.CharField(required=False, allow_blank=True)


class MetricSerializer(serializers.Serializer):
    components = ComponentsField()
    injectivity_radius = serializers.FloatField(min_value=0, required=False, allow_null=True)


class MapSerializer(serializers.Serializer):
    forward = serializers.ListField(child=serializers.CharField(), min_length=1)
    inverse = serializers.ListField(child=serializers.CharField(), required=False, allow_null=True)


class KernelSerializer(serializers.Serializer):
    profile = serializers.CharField(default="bump")
    order = serializers.IntegerField(min_value=0, default=0)
    support_constant = serializers.FloatField(min_value=0, default=1.0)

    def validate_support_constant(self, value):
        if value <= 0:
            raise serializers.ValidationError("The support constant must be positive.")
        return value


class TransportSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=TRANSPORT_KINDS)
    plateau = BoxField(required=False)
    margin = serializers.FloatField(min_value=0, default=0.5)
    near = serializers.FloatField(min_value=0, required=False, allow_null=True)
    near_margin = serializers.FloatField(min_value=0, required=False, allow_null=True)
    weights = serializers.ListField(child=serializers.FloatField(), required=False)
    metric = serializers.CharField(required=False)
    components = ComponentsField(required=False)
    support = BoxField(required=False)
    core = BoxField(required=False)
    kernel_region = BoxField(required=False)

    def validate(self, data):
        kind = data["kind"]
        if kind in ("identity-cutoff", "diagonal-vanishing", "geodesic") and "plateau" not in data:
            raise serializers.ValidationError({"plateau": ["A %s transport needs a plateau box." % kind]})
        if kind == "geodesic" and "metric" not in data:
            raise serializers.ValidationError({"metric": ["A geodesic transport needs a metric."]})
        if kind == "expressions" and "components" not in data:
            raise serializers.ValidationError({"components": ["An expression transport needs components."]})
        if kind != "zero" and data.get("margin") == 0 and "plateau" in data:
            raise serializers.ValidationError({"margin": ["The cutoff margin must be positive."]})
        return data


DISTRIBUTION_REQUIREMENTS = {
    "delta": ("point",),
    "regular": ("field",),
    "heaviside": (),
    "pv": (),
    "combination": ("terms",),
    "product": ("function", "inner"),
    "tensor": ("field", "inner"),
    "lie": ("field", "inner"),
    "pullback": ("map", "inner"),
    "zero": (),
}


class DistributionSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=DISTRIBUTION_KINDS)
    point = serializers.ListField(child=serializers.FloatField(), required=False)
    alpha = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False)
    components = serializers.JSONField(required=False)
    valence = valence_field(default=[0, 0])
    offset = serializers.FloatField(default=0.0)
    field = serializers.CharField(required=False)
    function = serializers.CharField(required=False)
    inner = serializers.CharField(required=False)
    map = serializers.CharField(required=False)
    terms = serializers.ListField(
        child=serializers.ListField(min_length=2, max_length=2),
        required=False,
    )
    label = serializers.CharField(required=False, allow_blank=True)

    def validate_terms(self, value):
        for coefficient, name in value:
            if isinstance(coefficient, bool) or not isinstance(coefficient, (int, float)):
                raise serializers.ValidationError("Term coefficients must be numbers.")
            if not isinstance(name, str):
                raise serializers.ValidationError("Terms reference distributions by name.")
        return [[float(c), name] for c, name in value]

    def validate(self, data):
        missing = [key for key in DISTRIBUTION_REQUIREMENTS[data["kind"]] if key not in data]
        if missing:
            raise serializers.ValidationError(
                {key: ["Required for %s distributions." % data["kind"]] for key in missing}
            )
        return data


class ObjectsSerializer(serializers.Serializer):
    tensors = serializers.DictField(child=FieldSerializer(), default=dict)
    metrics = serializers.DictField(child=MetricSerializer(), default=dict)
    maps = serializers.DictField(child=MapSerializer(), default=dict)
    kernels = serializers.DictField(child=KernelSerializer(), default=dict)
    transports = serializers.DictField(child=TransportSerializer(), default=dict)
    distributions = serializers.DictField(child=DistributionSerializer(), default=dict)


class OperationSerializer(serializers.Serializer):
    """
    One node of a representative's operation tree; ``args`` nest.
    """

    op = serializers.ChoiceField(choices=sorted(OPERATIONS))
    of = serializers.CharField(required=False)
    args = serializers.ListField(child=serializers.DictField(), default=list)
    factor = serializers.FloatField(required=False)
    upper = serializers.IntegerField(min_value=0, required=False)
    lower = serializers.IntegerField(min_value=0, required=False)
    valence = valence_field(required=False)
    expression = serializers.CharField(required=False)
    directions = serializers.ListField(child=serializers.CharField(), required=False)
    box = BoxField(required=False)
    parts = serializers.ListField(
        child=serializers.ChoiceField(choices=["omega", "p", "A"]), required=False, min_length=1
    )

    def validate_args(self, value):
        validated = []
        errors = {}
        for index, child in enumerate(value):
            serializer = OperationSerializer(data=child)
            if serializer.is_valid():
                validated.append(serializer.validated_data)
            else:
                errors[index] = serializer.errors
        if errors:
            raise serializers.ValidationError(errors)
        return validated

    def validate(self, data):
        minimum, maximum, required = OPERATIONS[data["op"]]
        count = len(data.get("args", []))
        if count < minimum or (maximum is not None and count > maximum):
            expected = str(minimum) if minimum == maximum else "at least %d" % minimum
            raise serializers.ValidationError({"args": ["%s takes %s arguments, got %d." % (data["op"], expected, count)]})
        missing = [key for key in required if key not in data]
        if missing:
            raise serializers.ValidationError({key: ["Required for %s." % data["op"]] for key in missing})
        return data


class ProbeFormSerializer(serializers.Serializer):
    center = serializers.ListField(child=serializers.FloatField(), min_length=1)
    radius = serializers.FloatField(min_value=0)
    profile = serializers.CharField(default="bump")


class TestSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=TEST_KINDS)
    expect = serializers.ChoiceField(choices=["pass", "fail"], default="pass")
    K = BoxField(required=False)
    A = serializers.CharField(required=False)
    B = serializers.ListField(child=serializers.CharField(), default=list)
    X = serializers.ListField(child=serializers.CharField(), default=list)
    max_word = serializers.IntegerField(min_value=0, max_value=3, default=2)
    max_j = serializers.IntegerField(min_value=0, max_value=2, default=2)
    kernel = serializers.CharField(required=False)
    m_list = serializers.ListField(child=serializers.IntegerField(min_value=0), default=[1, 2, 3])
    orders = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False)
    rate_orders = serializers.ListField(child=serializers.IntegerField(min_value=0, max_value=6), required=False)
    pairs = serializers.ListField(
        child=serializers.ListField(child=serializers.CharField(), min_length=2, max_length=2), default=list
    )
    eps_grid = serializers.ListField(child=serializers.FloatField(), required=False)
    eps_max = serializers.FloatField(default=2.0 ** -3)
    eps_min = serializers.FloatField(default=2.0 ** -12)
    p_points = serializers.IntegerField(min_value=2, default=31)
    metric = serializers.CharField(required=False)
    distribution = serializers.CharField(required=False)
    distributions = serializers.ListField(child=serializers.CharField(), default=list)
    map = serializers.CharField(required=False)
    basis = serializers.ListField(child=serializers.CharField(), default=list)
    field = serializers.CharField(required=False)
    forms = serializers.ListField(child=ProbeFormSerializer(), default=list)
    mode = serializers.ChoiceField(choices=["moderate", "negligible"], default="moderate")
    k = serializers.IntegerField(min_value=0, max_value=2, default=0)
    samples = serializers.IntegerField(min_value=1, default=5)
    tolerance = serializers.FloatField(required=False)

    def validate_eps_grid(self, value):
        if any(not 0 < eps <= 1 for eps in value):
            raise serializers.ValidationError("eps values must lie in (0, 1].")
        if any(b >= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError("The eps grid must be strictly decreasing.")
        return value

    def validate(self, data):
        if not 0 < data["eps_min"] < data["eps_max"] <= 1:
            raise serializers.ValidationError({"eps_min": ["Need 0 < eps_min < eps_max <= 1."]})
        return data


REPRESENTATIVE_KINDS = ("moderate", "negligible", "associate", "shadow", "saturation", "c0")


class ExperimentConfigSerializer(serializers.Serializer):
    name = serializers.CharField(max_length=100)
    description = serializers.CharField(default="", allow_blank=True)
    domain = DomainSerializer()
    objects = ObjectsSerializer(default=dict)
    representative = OperationSerializer(required=False)
    representatives = serializers.DictField(child=OperationSerializer(), default=dict)
    test = TestSerializer()
    seed = serializers.IntegerField(min_value=0, default=0)

    def validate(self, data):
        kind = data["test"]["kind"]
        if kind in REPRESENTATIVE_KINDS and "representative" not in data and not data["representatives"]:
            raise serializers.ValidationError({"representative": ["Required for %s tests." % kind]})
        if kind == "nogo" and not {"left", "right"} <= set(data["representatives"]):
            raise serializers.ValidationError({"representatives": ["nogo tests need 'left' and 'right'."]})
        missing = {name for pair in data["test"]["pairs"] for name in pair} - set(data["representatives"])
        if missing:
            raise serializers.ValidationError(
                {"test": {"pairs": ["Unknown representatives: %s." % ", ".join(sorted(missing))]}}
            )
        return data


def _plain(value):
    return json.loads(json.dumps(value))


def parse_config(data):
    """
    Validate a config mapping; returns (normalized config, errors).
    """
    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        return None, serializer.errors
    return _plain(serializer.validated_data), None


def normalize_config(data):
    config, errors = parse_config(data)
    if errors:
        raise serializers.ValidationError(errors)
    return config


def dump_config(config):
    return json.dumps(config, indent=2, sort_keys=True)


class ReportSerializer(serializers.Serializer):
    """
    Rendering of a run report for report.json.
    """

    name = serializers.CharField()
    kind = serializers.CharField()
    status = serializers.CharField()
    verdicts = serializers.ListField(child=serializers.DictField())
    config = serializers.DictField()
    environment = serializers.DictField()
    timings = serializers.DictField()
    battery = serializers.DictField(allow_null=True, required=False)
    errors = serializers.ListField(child=serializers.CharField(), required=False)
