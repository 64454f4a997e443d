"""
Parsing of the small expression grammar used for fields, metrics, maps and
mollifier profiles in experiment configs.

Expressions are ordinary arithmetic over the chart coordinates ``x1 ... xn``
(``x``, ``y``, ``z`` are accepted as aliases when n <= 3) with ``^`` or ``**``
for powers and the functions listed in ``ALLOWED_NAMES``.
"""
import logging

import numpy as np
import sympy
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

logger = logging.getLogger(__name__)

ALLOWED_NAMES = {
    "exp": sympy.exp,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tanh": sympy.tanh,
    "sqrt": sympy.sqrt,
    "log": sympy.log,
    "abs": sympy.Abs,
    "Abs": sympy.Abs,
    "pi": sympy.pi,
    "E": sympy.E,
}

_PARSER_GLOBALS = {
    "Integer": sympy.Integer,
    "Float": sympy.Float,
    "Rational": sympy.Rational,
    "Symbol": sympy.Symbol,
    "Function": sympy.Function,
}

_TRANSFORMATIONS = standard_transformations + (convert_xor,)


def coordinate_symbols(dim, prefix="x"):
    return tuple(sympy.Symbol(f"{prefix}{i + 1}", real=True) for i in range(dim))


def coordinate_names(dim, prefix="x"):
    """
    Map every accepted variable name to its symbol.
    """
    symbols = coordinate_symbols(dim, prefix)
    names = {str(symbol): symbol for symbol in symbols}
    if prefix == "x" and dim <= 3:
        for alias, symbol in zip("xyz", symbols):
            names[alias] = symbol
    return names


def parse_expression(text, variables) -> sympy.Expr:
    """
    Parse ``text`` into a sympy expression over ``variables`` (a name -> symbol
    mapping). Raises ValueError for anything outside the grammar.
    """
    if isinstance(text, bool) or not isinstance(text, (str, int, float)):
        raise ValueError("Expected an expression string, got %r." % (text,))
    local_dict = dict(ALLOWED_NAMES)
    local_dict.update(variables)
    try:
        expr = parse_expr(
            str(text),
            local_dict=local_dict,
            global_dict=dict(_PARSER_GLOBALS),
            transformations=_TRANSFORMATIONS,
        )
    except (SyntaxError, TypeError, ValueError, AttributeError, sympy.SympifyError) as e:
        raise ValueError("Could not parse expression %r: %s" % (text, e))

    if not isinstance(expr, sympy.Expr):
        raise ValueError("Expression %r is not arithmetic." % (text,))
    unknown_functions = expr.atoms(AppliedUndef)
    if unknown_functions:
        names = ", ".join(sorted(str(f.func) for f in unknown_functions))
        raise ValueError("Unknown function(s) in %r: %s" % (text, names))
    allowed = set(variables.values())
    unknown = {symbol for symbol in expr.free_symbols if symbol not in allowed}
    if unknown:
        names = ", ".join(sorted(str(s) for s in unknown))
        raise ValueError("Unknown variable(s) in %r: %s" % (text, names))
    return expr


def compile_components(exprs, symbols):
    """
    Turn a flat list of sympy expressions into one vectorized evaluator
    ``points (..., n) -> values (..., len(exprs))``.
    """
    funcs = [sympy.lambdify(symbols, expr, modules="numpy") for expr in exprs]

    def evaluate(points):
        points = np.asarray(points, dtype=float)
        batch = points.shape[:-1]
        args = [points[..., i] for i in range(points.shape[-1])]
        out = np.empty(batch + (len(funcs),))
        for k, func in enumerate(funcs):
            out[..., k] = np.broadcast_to(np.asarray(func(*args), dtype=float), batch)
        return out

    return evaluate


def nested_shape(value):
    """
    Shape of a nested list (rectangular) of expression strings.
    """
    shape = []
    while isinstance(value, (list, tuple)):
        shape.append(len(value))
        if not value:
            break
        value = value[0]
    return tuple(shape)


def flatten_nested(value):
    if isinstance(value, (list, tuple)):
        return [leaf for item in value for leaf in flatten_nested(item)]
    return [value]
