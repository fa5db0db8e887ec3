# SPDX-License-Identifier: Apache-2.0
# Copyright 2025 Ague Samuel Amen
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Langage de payoff.

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | IDENT | IDENT '(' args ')' | '(' expr ')' | '-' factor
    args   := expr (',' expr)*

Identifiants: B1..Bd (mouvement brownien), S, RUNMAX_S, RUNMIN_S, T, et t
pour les dividendes. Fonctions: max, min (au moins 2 arguments), abs, exp,
log (exactement 1).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ArityMismatch, InvalidSpec, ParseError, UnknownIdentifier
from .lattice import PathLattice, RandomVariable

NUMBER = "NUMBER"
IDENT = "IDENT"
END = "END"

LOG_FLOOR = 1e-300
MAX_DEPTH = 100

# name -> (min args, max args or None)
FUNCTIONS: dict[str, tuple[int, Optional[int]]] = {
    "max": (2, None),
    "min": (2, None),
    "abs": (1, 1),
    "exp": (1, 1),
    "log": (1, 1),
}

PATH_VARIABLES = ("RUNMAX_S", "RUNMIN_S")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/(),]))"
)


# AST
@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: "Expr"

    def __str__(self) -> str:
        return f"(-{self.operand})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]

    def __str__(self) -> str:
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


Expr = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            offset = len(text[:start].encode("utf-8"))
            raise ParseError(offset, {NUMBER, IDENT, "(", "-"}, text[start])
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        offset = len(text[:start].encode("utf-8"))
        if kind == "num":
            tokens.append(_Token(NUMBER, value, offset))
        elif kind == "ident":
            tokens.append(_Token(IDENT, value, offset))
        else:
            tokens.append(_Token(value, value, offset))
        pos = m.end()
    tokens.append(_Token(END, "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]) -> None:
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = set(variables)
        self.depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _fail(self, expected: set[str]) -> ParseError:
        return ParseError(self.tok.offset, expected, self.tok.text)

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != END:
            raise self._fail({"+", "-", "*", "/", END})
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.tok.kind
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.tok.kind in ("*", "/"):
            op = self.tok.kind
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError(self.tok.offset, {NUMBER, IDENT}, self.tok.text)
        try:
            return self._factor()
        finally:
            self.depth -= 1

    def _factor(self) -> Expr:
        tok = self.tok
        if tok.kind == NUMBER:
            value = float(tok.text)
            if not math.isfinite(value):
                raise InvalidSpec(f"numeric literal {tok.text!r} at offset {tok.offset} overflows")
            self.i += 1
            return Num(value)
        if tok.kind == "-":
            self.i += 1
            return Neg(self.factor())
        if tok.kind == "(":
            self.i += 1
            node = self.expr()
            if self.tok.kind != ")":
                raise self._fail({")", "+", "-", "*", "/"})
            self.i += 1
            return node
        if tok.kind == IDENT:
            self.i += 1
            if self.tok.kind == "(":
                return self.call(tok)
            if tok.text in FUNCTIONS:
                raise self._fail({"("})
            if tok.text not in self.variables:
                raise UnknownIdentifier(tok.text, tok.offset)
            return Var(tok.text)
        raise self._fail({NUMBER, IDENT, "(", "-"})

    def call(self, name_tok: _Token) -> Expr:
        if name_tok.text not in FUNCTIONS:
            raise UnknownIdentifier(name_tok.text, name_tok.offset)
        self.i += 1
        args = [self.expr()]
        while self.tok.kind == ",":
            self.i += 1
            args.append(self.expr())
        if self.tok.kind != ")":
            raise self._fail({",", ")", "+", "-", "*", "/"})
        self.i += 1
        lo, hi = FUNCTIONS[name_tok.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            expected = str(lo) if lo == hi else f">= {lo}"
            raise ArityMismatch(name_tok.text, len(args), expected)
        return Call(name_tok.text, tuple(args))


def claim_variables(dimension: int = 1, *, dividend: bool = False) -> tuple[str, ...]:
    names = [f"B{j + 1}" for j in range(dimension)] + ["S", *PATH_VARIABLES, "T"]
    if dividend:
        names.append("t")
    return tuple(names)


def parse_payoff(text: str, *, dimension: int = 1, variables: Optional[Sequence[str]] = None) -> Expr:
    """Parse a payoff expression into its syntax tree."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError(0, {NUMBER, IDENT, "(", "-"}, "")
    names = claim_variables(dimension) if variables is None else tuple(variables)
    return _Parser(text, names).parse()


def format_payoff(node: Expr) -> str:
    """Fully parenthesised text; parse(format(e)) == e."""
    return str(node)


def free_variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Call):
        return set().union(*(free_variables(a) for a in node.args))
    return set()


def uses_path_dependence(node: Expr) -> bool:
    return bool(free_variables(node) & set(PATH_VARIABLES))


Env = Mapping[str, Union[float, np.ndarray]]


def evaluate_expr(node: Expr, env: Env) -> np.ndarray:
    """Vectorised evaluation; the environment maps each variable to an array or scalar."""
    if isinstance(node, Num):
        return np.asarray(node.value, dtype=float)
    if isinstance(node, Var):
        try:
            return np.asarray(env[node.name], dtype=float)
        except KeyError as exc:
            raise UnknownIdentifier(node.name) from exc
    if isinstance(node, Neg):
        return -evaluate_expr(node.operand, env)
    if isinstance(node, BinOp):
        a, b = evaluate_expr(node.left, env), evaluate_expr(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b
    args = [evaluate_expr(a, env) for a in node.args]
    if node.name == "max":
        return np.maximum.reduce(np.broadcast_arrays(*args))
    if node.name == "min":
        return np.minimum.reduce(np.broadcast_arrays(*args))
    if node.name == "abs":
        return np.abs(args[0])
    if node.name == "exp":
        with np.errstate(over="ignore"):
            return np.exp(args[0])
    return np.log(np.maximum(args[0], LOG_FLOOR))


@dataclass(frozen=True)
class MarketParams:
    """S_t = S0 exp(nu t + sigma B1_t)."""

    S0: float = 100.0
    nu: float = 0.0
    sigma: float = 0.2

    def price(self, t: Union[float, np.ndarray], b: np.ndarray) -> np.ndarray:
        return self.S0 * np.exp(self.nu * np.asarray(t) + self.sigma * b)


def _finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise InvalidSpec(f"{what} is not finite on every node")
    return values


def claim_on_lattice(node: Expr, lattice: PathLattice, k: int, market: MarketParams = MarketParams()) -> RandomVariable:
    """Evaluate the expression on the time-k nodes (B, S and running extrema up to k)."""
    k = lattice.check_time(k)
    n = lattice.n_nodes(k)
    walk = lattice.walk(k)
    env: dict[str, Union[float, np.ndarray]] = {f"B{j + 1}": walk[:, j] for j in range(lattice.d)}
    env["T"] = lattice.T
    env["t"] = lattice.time(k)
    env["S"] = market.price(lattice.time(k), walk[:, 0])
    if uses_path_dependence(node):
        run_max = np.full(n, -np.inf)
        run_min = np.full(n, np.inf)
        for j in range(k + 1):
            s_j = lattice.broadcast(market.price(lattice.time(j), lattice.walk(j)[:, 0]), k - j)
            run_max = np.maximum(run_max, s_j)
            run_min = np.minimum(run_min, s_j)
        env["RUNMAX_S"], env["RUNMIN_S"] = run_max, run_min
    values = np.broadcast_to(evaluate_expr(node, env), (n,)).astype(float)
    return RandomVariable(lattice, k, _finite(values, "claim"))


def claim_on_levels(node: Expr, levels: np.ndarray, t: float, T: float, market: MarketParams = MarketParams()) -> np.ndarray:
    """Evaluate a path-independent one-dimensional expression on walk levels."""
    if uses_path_dependence(node):
        raise InvalidSpec("running extrema depend on the path, not only on the level")
    if free_variables(node) - {"B1", "S", "T", "t"}:
        raise InvalidSpec("the recombined solver handles one Brownian coordinate")
    env = {"B1": levels, "S": market.price(t, levels), "T": T, "t": t}
    return _finite(np.broadcast_to(evaluate_expr(node, env), levels.shape).astype(float), "claim")
