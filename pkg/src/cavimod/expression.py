"""Text form of a map: ``catalog:NAME(k=v, ...)`` or coordinate expressions.

A coordinate expression is a comma-separated list of ``n`` components in
the variables ``x1..xn`` and ``|x|``, using ``+ - * / **``, numbers, ``pi``
and the functions ``exp, log, pow, sin, cos``.  For example ``x1, x2, x3``
is the identity in R^3 and ``x1*exp(1 - 1/|x|), x2*exp(1 - 1/|x|)`` is a
radial map of the plane.
"""

from __future__ import annotations

import ast
import math
import re
from typing import Dict, Tuple

import numpy as np

from .errors import ExpressionError, ParameterError
from .mapping import MappingSpec, catalog_get

FUNCTIONS = {"exp": (np.exp, 1), "log": (np.log, 1), "pow": (np.power, 2),
             "sin": (np.sin, 1), "cos": (np.cos, 1)}
CONSTANTS = {"pi": math.pi}
_NORM = "_r_"  # same length as "|x|", so column offsets survive the substitution
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_CATALOG_RE = re.compile(r"\s*catalog:\s*([A-Za-z_]\w*)\s*(\((.*)\))?\s*$", re.S)


def _syntax(text: str) -> ast.Expression:
    try:
        return ast.parse(text, mode="eval")
    except SyntaxError as exc:
        pos = max((exc.offset or 1) - 1, 0)
        raise ExpressionError(f"syntax error: {exc.msg}", pos) from None


def parse_catalog(text: str) -> Tuple[str, Dict[str, object]]:
    """Split ``catalog:NAME(k=v, ...)`` into the name and a parameter dict."""
    mt = _CATALOG_RE.match(text)
    if mt is None:
        raise ExpressionError("expected catalog:NAME(param=value, ...)", 0)
    name, args = mt.group(1), mt.group(3)
    params: Dict[str, object] = {}
    if args and args.strip():
        offset = mt.start(3) - len("f(")
        tree = _syntax(f"f({args})")
        call = tree.body
        if not isinstance(call, ast.Call) or call.args:
            raise ExpressionError("catalog parameters must be given as name=value", mt.start(3))
        for kw in call.keywords:
            if kw.arg is None:
                raise ExpressionError("catalog parameters must be given as name=value", mt.start(3))
            try:
                value = ast.literal_eval(kw.value)
            except ValueError:
                raise ExpressionError(f"parameter {kw.arg!r} must be a literal",
                                      offset + kw.value.col_offset) from None
            if isinstance(value, bool) or not isinstance(value, (int, float, str)):
                raise ExpressionError(f"parameter {kw.arg!r} must be a number or string",
                                      offset + kw.value.col_offset)
            params[kw.arg] = value
    return name, params


def _check(node: ast.AST, n: int) -> None:
    """Reject anything outside the arithmetic whitelist."""
    pos = getattr(node, "col_offset", 0)
    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed", pos)
        _check(node.left, n)
        _check(node.right, n)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed", pos)
        _check(node.operand, n)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError("only real numeric constants are allowed", pos)
    elif isinstance(node, ast.Name):
        name = node.id
        if name == _NORM or name in CONSTANTS:
            return
        mt = re.fullmatch(r"x([1-9]\d*)", name)
        if mt is None:
            raise ExpressionError(f"unknown name {name!r}", pos)
        if int(mt.group(1)) > n:
            raise ExpressionError(f"variable {name} exceeds dimension n={n}", pos)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("only exp, log, pow, sin, cos may be called", pos)
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed", pos)
        arity = FUNCTIONS[node.func.id][1]
        if len(node.args) != arity:
            raise ExpressionError(f"{node.func.id} takes {arity} argument(s), got {len(node.args)}", pos)
        for a in node.args:
            _check(a, n)
    else:
        raise ExpressionError(f"{type(node).__name__} not allowed", pos)


def parse_map_expression(text: str, n: int) -> MappingSpec:
    """Build a :class:`MappingSpec` from its text form.

    Catalog maps keep their analytic Jacobians; expression maps use finite
    differences, which limits their accuracy to about ``1e-6``.

    Raises
    ------
    ExpressionError
        On a syntax error, a disallowed construct, or a component count
        that differs from ``n``.  The error carries the character position.
    ParameterError
        On an unknown catalog map or an out-of-range parameter.
    """
    if int(n) != n or n < 2:
        raise ParameterError(f"dimension must be an integer >= 2, got {n}")
    n = int(n)
    if text.lstrip().startswith("catalog:"):
        name, params = parse_catalog(text)
        return catalog_get(name, n, params)
    if not text.strip():
        raise ExpressionError("empty expression", 0)
    bad = re.search(r"\|(?!x\|)", text.replace("|x|", _NORM))
    if bad:
        raise ExpressionError("'|' is only allowed in |x|", bad.start())
    src = text.replace("|x|", _NORM)
    tree = _syntax(src)
    body = tree.body
    comps = list(body.elts) if isinstance(body, ast.Tuple) else [body]
    if len(comps) != n:
        raise ExpressionError(f"expected {n} components, got {len(comps)}", len(text))
    for c in comps:
        _check(c, n)
    codes = [compile(ast.Expression(c), "<map>", "eval") for c in comps]
    funcs = {k: v[0] for k, v in FUNCTIONS.items()}

    def rule(x):
        x = np.asarray(x, dtype=float)
        env = dict(funcs, **CONSTANTS)
        env.update({f"x{i + 1}": x[..., i] for i in range(n)})
        env[_NORM] = np.linalg.norm(x, axis=-1)
        out = [np.broadcast_to(eval(code, {"__builtins__": {}}, env), x.shape[:-1]) for code in codes]
        return np.stack(out, axis=-1).astype(float)

    return MappingSpec(dimension=n, rule=rule, label=text.strip())
