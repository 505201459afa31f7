"""Closed-form scalar fields on fracture planes.

Fields are sympy expression trees in the world coordinates x, y, z, restricted
to a fracture through its isometric frame. The restriction is again a sympy
expression in the local coordinates (u, v), so gradients and Laplacians needed
by the manufactured-solution machinery are exact.

The expression language used by DFN input files understands
+ - * / ^, cos, sin, abs, atan2 and the variables x, y, z. NOTE the atan2
convention: atan2(a, b) is the four-quadrant arctangent of b/a, i.e. the
first argument is the *denominator*. This is reversed with respect to the
usual C/numpy convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .errors import ParseError
from .geometry import Frame3

X, Y, Z = sp.symbols("x y z", real=True)
U, V = sp.symbols("u v", real=True)


# ---------------------------------------------------------------------------
# expression parsing (recursive descent over the file grammar)
# ---------------------------------------------------------------------------

_FUNCTIONS = {
    "cos": lambda a: sp.cos(a),
    "sin": lambda a: sp.sin(a),
    "abs": lambda a: sp.Abs(a),
    # file convention: atan2(denominator, numerator)
    "atan2": lambda a, b: sp.atan2(b, a),
}
_CONSTANTS = {"pi": sp.pi, "x": X, "y": Y, "z": Z}


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take_name(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        return self.text[start : self.pos]

    def take_number(self):
        start = self.pos
        seen_e = False
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch.isdigit() or ch == ".":
                self.pos += 1
            elif ch in "eE" and not seen_e:
                seen_e = True
                self.pos += 1
                if self.pos < len(self.text) and self.text[self.pos] in "+-":
                    self.pos += 1
            else:
                break
        tok = self.text[start : self.pos]
        try:
            return sp.Integer(tok) if tok.isdigit() else sp.Float(tok)
        except ValueError as exc:
            raise ParseError(f"bad number at position {start}: {self.text!r}") from exc


def parse_expression(text: str) -> sp.Expr:
    """Parse a file-format expression into a sympy tree in x, y, z."""
    toks = _Tokens(text)
    expr = _parse_sum(toks)
    if toks.peek():
        raise ParseError(f"unexpected trailing input at {toks.pos}: {text!r}")
    return expr


def _parse_sum(t: _Tokens) -> sp.Expr:
    expr = _parse_product(t)
    while t.peek() and t.peek() in "+-":
        op = t.peek()
        t.pos += 1
        rhs = _parse_product(t)
        expr = expr + rhs if op == "+" else expr - rhs
    return expr


def _parse_product(t: _Tokens) -> sp.Expr:
    expr = _parse_unary(t)
    while t.peek() and t.peek() in "*/":
        op = t.peek()
        t.pos += 1
        rhs = _parse_unary(t)
        expr = expr * rhs if op == "*" else expr / rhs
    return expr


def _parse_unary(t: _Tokens) -> sp.Expr:
    if t.peek() == "-":
        t.pos += 1
        return -_parse_unary(t)
    if t.peek() == "+":
        t.pos += 1
        return _parse_unary(t)
    return _parse_power(t)


def _parse_power(t: _Tokens) -> sp.Expr:
    base = _parse_atom(t)
    if t.peek() == "^":
        t.pos += 1
        return base ** _parse_unary(t)
    return base


def _parse_atom(t: _Tokens) -> sp.Expr:
    ch = t.peek()
    if ch == "(":
        t.pos += 1
        expr = _parse_sum(t)
        if t.peek() != ")":
            raise ParseError(f"missing ')' at {t.pos}")
        t.pos += 1
        return expr
    if ch.isdigit() or ch == ".":
        return t.take_number()
    if ch.isalpha():
        name = t.take_name()
        if name in _FUNCTIONS:
            if t.peek() != "(":
                raise ParseError(f"function {name} needs arguments")
            t.pos += 1
            args = [_parse_sum(t)]
            while t.peek() == ",":
                t.pos += 1
                args.append(_parse_sum(t))
            if t.peek() != ")":
                raise ParseError(f"missing ')' after {name} arguments")
            t.pos += 1
            try:
                return _FUNCTIONS[name](*args)
            except TypeError as exc:
                raise ParseError(f"wrong arity for {name}") from exc
        if name in _CONSTANTS:
            return _CONSTANTS[name]
        raise ParseError(f"unknown name {name!r}")
    raise ParseError(f"unexpected character {ch!r} at {t.pos}")


# ---------------------------------------------------------------------------
# plane-restricted fields
# ---------------------------------------------------------------------------


def _strip_distributions(expr: sp.Expr) -> sp.Expr:
    """Drop DiracDelta terms: the pointwise Laplacian is only ever evaluated
    away from the kink lines, which the conforming mesh never straddles."""
    return expr.replace(sp.DiracDelta, lambda *a: sp.S.Zero)


def _lambdify(expr: sp.Expr):
    fn = sp.lambdify((U, V), expr, modules="numpy")

    def call(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = fn(pts[:, 0], pts[:, 1])
        return np.broadcast_to(np.asarray(out, dtype=float), (len(pts),)).copy()

    return call


@dataclass
class PlaneField:
    """Scalar field in local fracture coordinates with exact derivatives."""

    expr: sp.Expr
    _value: object = field(default=None, repr=False, compare=False)
    _grad: object = field(default=None, repr=False, compare=False)
    _lap: object = field(default=None, repr=False, compare=False)

    @classmethod
    def from_world(cls, expr_xyz: sp.Expr, frame: Frame3) -> "PlaneField":
        o, bu, bv = frame.origin, frame.basis_u, frame.basis_v
        subs = {
            X: o[0] + U * bu[0] + V * bv[0],
            Y: o[1] + U * bu[1] + V * bv[1],
            Z: o[2] + U * bu[2] + V * bv[2],
        }
        return cls(sp.sympify(expr_xyz).subs(subs, simultaneous=True))

    @classmethod
    def constant(cls, value: float) -> "PlaneField":
        return cls(sp.Float(value))

    def value(self, pts: np.ndarray) -> np.ndarray:
        if self._value is None:
            self._value = _lambdify(self.expr)
        return self._value(pts)

    __call__ = value

    def grad(self, pts: np.ndarray) -> np.ndarray:
        if self._grad is None:
            gu = _strip_distributions(sp.diff(self.expr, U))
            gv = _strip_distributions(sp.diff(self.expr, V))
            fu, fv = _lambdify(gu), _lambdify(gv)
            self._grad = lambda p: np.stack([fu(p), fv(p)], axis=-1)
        return self._grad(pts)

    def laplacian(self, pts: np.ndarray) -> np.ndarray:
        if self._lap is None:
            lap = _strip_distributions(
                sp.diff(self.expr, U, 2) + sp.diff(self.expr, V, 2)
            )
            self._lap = _lambdify(lap)
        return self._lap(pts)

    def negated_scaled_laplacian(self, k: float) -> "PlaneField":
        """The manufactured forcing -k * Laplacian as a new field."""
        lap = _strip_distributions(sp.diff(self.expr, U, 2) + sp.diff(self.expr, V, 2))
        return PlaneField(-sp.Float(k) * lap)
