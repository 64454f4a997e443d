"""
Canonical experiments, runnable by name with ``colombeau_run --experiment``.
"""
import copy

from django.core.exceptions import ImproperlyConfigured

LINE = {"dim": 1, "lower": [-3.0], "upper": [3.0]}
UNIT_INTERVAL = [[-1.0], [1.0]]

SCALAR_DISTRIBUTIONS = {
    "delta": {"kind": "delta", "point": [0.0]},
    "delta_prime": {"kind": "delta", "point": [0.0], "alpha": [1]},
    "heaviside": {"kind": "heaviside", "offset": 0.0},
    "pv": {"kind": "pv", "point": [0.0]},
}


def _embed_diff(expression):
    return {
        "op": "sub",
        "args": [{"op": "iota", "of": "regular_" + expression}, {"op": "sigma", "of": expression}],
    }


EMBED_DIFF_FIELDS = ("x^2", "sin(x)", "x*exp(-x^2)")

SCHWARTZ_EPS_GRID = [2.0 ** -k for k in range(6, 11)]

EXPERIMENTS = {
    "schwartz": {
        "name": "schwartz",
        "description": (
            "iota(x*vp(1/x)) - sigma(1) and iota(vp(1/x))*iota(x*delta) are associated to 0 "
            "while iota(delta) shadows delta and is not associated to 0. Runs for a few minutes; "
            "--threads (or COLOMBEAU_THREADS) spreads the test-form pairs over worker threads."
        ),
        "domain": LINE,
        "test": {"kind": "schwartz", "eps_grid": SCHWARTZ_EPS_GRID},
    },
    "nogo-vector": {
        "name": "nogo-vector",
        "description": (
            "The two coordinate representations of delta' (x) d/dx are moderate, but their "
            "difference is not negligible: its sup-values settle at sup_s s^2 |rho'(s)|."
        ),
        "domain": LINE,
        "objects": {
            "tensors": {
                "weight": {"components": "1 + x^2"},
                "d_dx": {"valence": [1, 0], "components": ["1"]},
                "decaying_d_dx": {"valence": [1, 0], "components": ["1/(1 + x^2)"]},
            },
            "distributions": {
                "delta_prime": SCALAR_DISTRIBUTIONS["delta_prime"],
                "weighted_delta_prime": {"kind": "product", "function": "weight", "inner": "delta_prime"},
            },
        },
        "representatives": {
            "left": {
                "op": "tensor",
                "args": [{"op": "iota", "of": "weighted_delta_prime"}, {"op": "sigma", "of": "decaying_d_dx"}],
            },
            "right": {
                "op": "tensor",
                "args": [{"op": "iota", "of": "delta_prime"}, {"op": "sigma", "of": "d_dx"}],
            },
        },
        "test": {"kind": "nogo", "K": UNIT_INTERVAL, "m_list": [1], "orders": [0, 1, 2], "max_word": 0, "max_j": 0},
    },
    "embed-diff": {
        "name": "embed-diff",
        "description": (
            "(iota - sigma)(t) is negligible for smooth t: with order-k kernels (k = 0, 1, 2) it decays "
            "like eps^(k+1) and the rates do not drop as k grows."
        ),
        "domain": LINE,
        "objects": {
            "tensors": {expression: {"components": expression} for expression in EMBED_DIFF_FIELDS},
            "distributions": {
                "regular_" + expression: {"kind": "regular", "field": expression} for expression in EMBED_DIFF_FIELDS
            },
        },
        "representatives": {expression: _embed_diff(expression) for expression in EMBED_DIFF_FIELDS},
        "test": {
            "kind": "negligible",
            "K": UNIT_INTERVAL,
            "m_list": [1, 2],
            "rate_orders": [0, 1, 2],
            "max_word": 0,
            "max_j": 0,
        },
    },
    "shadow-suite": {
        "name": "shadow-suite",
        "description": (
            "Products of embeddings are associated to their classical products; "
            "iota(delta)^2 diverges like 1/eps and has no shadow."
        ),
        "domain": LINE,
        "test": {"kind": "product-suite"},
    },
    "diffeo-commute": {
        "name": "diffeo-commute",
        "description": "Pullback along mu(x) = x + 0.3 x^3 commutes with the embedding.",
        "domain": LINE,
        "objects": {
            "maps": {"mu": {"forward": ["x + 0.3*x^3"]}},
            "distributions": dict(SCALAR_DISTRIBUTIONS),
        },
        "test": {
            "kind": "pullback-commute",
            "K": UNIT_INTERVAL,
            "map": "mu",
            "distributions": sorted(SCALAR_DISTRIBUTIONS),
            "eps_min": 2.0 ** -8,
        },
    },
    "lie-commute": {
        "name": "lie-commute",
        "description": (
            "The Lie derivative commutes with the embedding and obeys the Leibniz rule on smooth-smooth, "
            "smooth-distribution and distribution-distribution products."
        ),
        "domain": LINE,
        "objects": {
            "tensors": {
                "d_dx": {"valence": [1, 0], "components": ["1"]},
                "x_d_dx": {"valence": [1, 0], "components": ["x"]},
                "square": {"components": "x^2"},
            },
            "distributions": dict(SCALAR_DISTRIBUTIONS),
        },
        "representatives": {
            "smooth": {"op": "sigma", "of": "square"},
            "smooth_vector": {"op": "sigma", "of": "x_d_dx"},
            "delta": {"op": "iota", "of": "delta"},
            "step": {"op": "iota", "of": "heaviside"},
        },
        "test": {
            "kind": "lie-commute",
            "K": UNIT_INTERVAL,
            "X": ["d_dx", "x_d_dx"],
            "pairs": [["smooth", "smooth_vector"], ["smooth", "delta"], ["delta", "step"]],
            "distributions": sorted(SCALAR_DISTRIBUTIONS),
            "eps_min": 2.0 ** -8,
        },
    },
    "moments": {
        "name": "moments",
        "description": "Moment-corrected kernels: vanishing moments, O(eps^(m+1)) smoothing defect, derivative scaling.",
        "domain": LINE,
        "objects": {
            "tensors": {"square": {"components": "x^2"}},
            "kernels": {"bump": {"profile": "bump", "order": 1}},
        },
        "test": {"kind": "moments", "K": UNIT_INTERVAL, "kernel": "bump", "field": "square", "orders": [0, 1, 2, 3]},
    },
}


def registry():
    """
    (name, description) of every canonical experiment.
    """
    return [(name, config["description"]) for name, config in sorted(EXPERIMENTS.items())]


def get_experiment(name):
    if name not in EXPERIMENTS:
        raise ImproperlyConfigured(
            "Unknown experiment %r. Choose from: %s." % (name, ", ".join(sorted(EXPERIMENTS)))
        )
    return copy.deepcopy(EXPERIMENTS[name])
