"""Closed-form height profiles z(t) and the test contours built from them.

Grammar (``t`` is the only variable)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary | unary)*      juxtaposition multiplies
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?
    atom   := number | "t" | "pi" | func ("^" atom)? "(" expr ")" | "(" expr ")"
    func   := sin | cos | tan | exp | sqrt

so ``sin(4t) - 2cos^2(t)`` parses as written.
"""
from __future__ import annotations

import re
from typing import NamedTuple

import numpy as np

from .net import Cell, GeodesicNet, Intersection, Polyline3, Segment

_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "sqrt": np.sqrt}
_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)|([A-Za-z]+)|(\S))")


class ProfileError(ValueError):
    pass


class _Tok(NamedTuple):
    kind: str   # num, name, op, end
    text: str
    pos: int


def _tokenize(src: str) -> list:
    out = []
    pos = 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ProfileError(f"unexpected input at column {pos + 1}")
        num, name, op = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            out.append(_Tok("num", num, start))
        elif name is not None:
            # split runs like "tsin" or "pit" into known words
            i = 0
            while i < len(name):
                for word in sorted(list(_FUNCS) + ["pi", "t"], key=len, reverse=True):
                    if name.startswith(word, i):
                        out.append(_Tok("name", word, start + i))
                        i += len(word)
                        break
                else:
                    raise ProfileError(f"unknown name {name[i:]!r} at column {start + i + 1}")
        else:
            if op not in "+-*/^()":
                raise ProfileError(f"unexpected character {op!r} at column {start + 1}")
            out.append(_Tok("op", op, start))
        pos = m.end()
    out.append(_Tok("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, text=None) -> _Tok:
        tok = self.toks[self.i]
        if text is not None and tok.text != text:
            raise ProfileError(f"expected {text!r} at column {tok.pos + 1}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ProfileError(f"unexpected {tok.text!r} at column {tok.pos + 1}")
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            node = (op, node, self.term())
        return node

    def _starts_atom(self, tok) -> bool:
        return tok.kind in ("num", "name") or tok.text == "("

    def term(self):
        node = self.unary()
        while True:
            tok = self.peek()
            if tok.text in ("*", "/"):
                self.take()
                node = (tok.text, node, self.unary())
            elif self._starts_atom(tok):
                node = ("*", node, self.power())
            else:
                return node

    def unary(self):
        tok = self.peek()
        if tok.text in ("-", "+"):
            self.take()
            inner = self.unary()
            return ("neg", inner) if tok.text == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "num":
            return ("num", float(tok.text))
        if tok.kind == "name":
            if tok.text == "t":
                return ("t",)
            if tok.text == "pi":
                return ("num", float(np.pi))
            exponent = None
            if self.peek().text == "^":
                self.take()
                exponent = self.atom()
            self.take("(")
            arg = self.expr()
            self.take(")")
            node = ("call", tok.text, arg)
            return ("^", node, exponent) if exponent is not None else node
        if tok.text == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ProfileError(f"unexpected {tok.text or 'end of input'!r} at column {tok.pos + 1}")


def _eval(node, t):
    kind = node[0]
    if kind == "num":
        return node[1] + 0.0 * t
    if kind == "t":
        return t
    if kind == "neg":
        return -_eval(node[1], t)
    if kind == "call":
        return _FUNCS[node[1]](_eval(node[2], t))
    a, b = _eval(node[1], t), _eval(node[2], t)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "/":
        return a / b
    if kind == "^":
        if node[2][0] == "num" and float(node[2][1]).is_integer():
            return a ** int(node[2][1])
        return a ** b
    raise ProfileError(f"bad node {kind}")


class Profile:
    """A parsed expression z(t) with value and derivative evaluation."""

    def __init__(self, source: str):
        self.source = source
        self.tree = _Parser(source).parse()

    def __call__(self, t):
        return np.real(_eval(self.tree, np.asarray(t, dtype=float)))

    def derivative(self, t, step: float = 1e-30):
        # complex-step differentiation: exact to rounding for analytic expressions
        t = np.asarray(t, dtype=float)
        return np.imag(_eval(self.tree, t + 1j * step)) / step


def profile_contour(profile, samples: int = 512) -> np.ndarray:
    """Points (cos t, sin t, z(t)) at ``samples`` equally spaced t in [0, 2 pi)."""
    prof = profile if isinstance(profile, Profile) else Profile(profile)
    if samples < 8:
        raise ProfileError("need at least 8 samples")
    t = 2.0 * np.pi * np.arange(samples) / samples
    z = prof(t)
    if not np.all(np.isfinite(z)):
        raise ProfileError("profile is not finite on [0, 2 pi)")
    return np.column_stack([np.cos(t), np.sin(t), z])


def profile_net(profile, samples: int = 512, cell_id: str = "c0") -> GeodesicNet:
    """One closed curve and the single cell it bounds."""
    curve = Polyline3(profile_contour(profile, samples), closed=True)
    return GeodesicNet((curve,), (), (Cell((Segment(0, 0.0, curve.length),), id=cell_id),))


def _dense(corners, per_edge: int) -> np.ndarray:
    corners = np.asarray(corners, dtype=float)
    s = np.linspace(0.0, 1.0, per_edge + 1)[:-1]
    pts = [a + (b - a) * u for a, b in zip(corners[:-1], corners[1:]) for u in s]
    return np.vstack(pts + [corners[-1]])


def folded_squares_net(angle: float = 0.0, per_edge: int = 16) -> GeodesicNet:
    """Two unit squares sharing the edge x = 1 of the z = 0 plane.

    The second square is rotated about that edge by ``angle`` radians, so the
    reconstructed patches meet with dihedral ``angle`` (modulo sign).
    """
    c, s = np.cos(angle), np.sin(angle)
    shared = Polyline3(_dense([[1, 0, 0], [1, 1, 0]], per_edge))
    west = Polyline3(_dense([[1, 1, 0], [0, 1, 0], [0, 0, 0], [1, 0, 0]], per_edge))
    east = Polyline3(_dense([[1, 1, 0], [1 + c, 1, s], [1 + c, 0, s], [1, 0, 0]], per_edge))
    curves = (shared, west, east)
    inters = (Intersection(0, 1, shared.length, 0.0, (1.0, 1.0, 0.0)),
              Intersection(0, 1, 0.0, west.length, (1.0, 0.0, 0.0)),
              Intersection(0, 2, shared.length, 0.0, (1.0, 1.0, 0.0)),
              Intersection(0, 2, 0.0, east.length, (1.0, 0.0, 0.0)))
    cells = (Cell((Segment(0, 0.0, shared.length), Segment(1, 0.0, west.length)), id="west"),
             Cell((Segment(0, 0.0, shared.length), Segment(2, 0.0, east.length)), id="east"))
    net = GeodesicNet(curves, inters, cells)
    net.validate()
    return net
