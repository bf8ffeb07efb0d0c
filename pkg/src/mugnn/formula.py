"""Graded modal mu-calculus formulas.

AST in negation normal form, a parser for the ASCII concrete syntax, a
round-trip printer, deterministic renaming of bound variables, and the
subformula index that the evaluator, the counting machine, and the
compiler all share.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

MAX_GRADE = 2**31 - 1


class FormulaError(ValueError):
    pass


class ParseError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# AST


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class NegProp(Formula):
    name: str


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class And(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class Or(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True)
class AtLeast(Formula):
    """Diamond with a grade: true at n when at least `grade` out-neighbors satisfy body."""

    grade: int
    body: Formula


@dataclass(frozen=True)
class AllBut(Formula):
    """Box with a grade: true at n when fewer than `grade` out-neighbors falsify body."""

    grade: int
    body: Formula


@dataclass(frozen=True)
class Mu(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Nu(Formula):
    var: str
    body: Formula


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, (And, Or)):
        return (f.lhs, f.rhs)
    if isinstance(f, (AtLeast, AllBut, Mu, Nu)):
        return (f.body,)
    return ()


def is_fixpoint(f: Formula) -> bool:
    return isinstance(f, (Mu, Nu))


def ast_size(f: Formula) -> int:
    return 1 + sum(ast_size(c) for c in children(f))


def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, Var):
        return frozenset((f.name,))
    if isinstance(f, (Mu, Nu)):
        return free_vars(f.body) - {f.var}
    out: frozenset[str] = frozenset()
    for c in children(f):
        out |= free_vars(c)
    return out


# ---------------------------------------------------------------------------
# Lexer / parser

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<dia><\s*(?P<dgrade>\d+)\s*>|<>)
    | (?P<box>\[\s*(?P<bgrade>\d+)\s*\]|\[\])
    | (?P<name>[A-Za-z][A-Za-z0-9_]*)
    | (?P<punct>[&|~().])
    """,
    re.VERBOSE,
)

_KEYWORDS = ("mu", "nu")


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            if kind == "dia" or kind == "box":
                raw = m.group("dgrade" if kind == "dia" else "bgrade")
                grade = 1 if raw is None else int(raw)
                if grade < 1:
                    raise ParseError("grade must be at least 1", pos)
                if grade > MAX_GRADE:
                    raise ParseError(f"grade exceeds {MAX_GRADE}", pos)
                tokens.append((kind, grade, pos))
            elif kind == "name":
                word = m.group("name")
                if word in _KEYWORDS:
                    tokens.append((word, word, pos))
                elif word[0].isupper():
                    tokens.append(("var", word, pos))
                else:
                    tokens.append(("prop", word, pos))
            else:
                tokens.append((m.group("punct"), m.group("punct"), pos))
        pos = m.end()
    tokens.append(("eof", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, object, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, object, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> tuple[str, object, int]:
        tok = self.take()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[0]!r}", tok[2])
        return tok

    def formula(self) -> Formula:
        f = self.conj()
        while self.peek()[0] == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek()[0] == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind, value, pos = self.peek()
        if kind == "dia":
            self.take()
            return AtLeast(value, self.unary())
        if kind == "box":
            self.take()
            return AllBut(value, self.unary())
        if kind == "~":
            self.take()
            k2, v2, p2 = self.take()
            if k2 != "prop":
                raise ParseError("negation is only allowed on propositions", p2)
            return NegProp(v2)
        if kind in _KEYWORDS:
            self.take()
            var = self.expect("var")[1]
            self.expect(".")
            body = self.formula()  # fixpoint scope extends maximally right
            return Mu(var, body) if kind == "mu" else Nu(var, body)
        return self.atom()

    def atom(self) -> Formula:
        kind, value, pos = self.take()
        if kind == "(":
            f = self.formula()
            self.expect(")")
            return f
        if kind == "prop":
            return Prop(value)
        if kind == "var":
            return Var(value)
        raise ParseError(f"unexpected token {kind!r}", pos)


def parse(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    tok = p.peek()
    if tok[0] != "eof":
        raise ParseError(f"trailing input starting with {tok[0]!r}", tok[2])
    return f


# ---------------------------------------------------------------------------
# Printer

_PREC_OR = 1
_PREC_AND = 2
_PREC_UNARY = 3


def _pp(f: Formula, min_prec: int) -> str:
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, NegProp):
        return "~" + f.name
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Or):
        s = f"{_pp(f.lhs, _PREC_OR)} | {_pp(f.rhs, _PREC_OR + 1)}"
        return f"({s})" if _PREC_OR < min_prec else s
    if isinstance(f, And):
        s = f"{_pp(f.lhs, _PREC_AND)} & {_pp(f.rhs, _PREC_AND + 1)}"
        return f"({s})" if _PREC_AND < min_prec else s
    if isinstance(f, AtLeast):
        op = "<>" if f.grade == 1 else f"<{f.grade}>"
        return op + _pp(f.body, _PREC_UNARY)
    if isinstance(f, AllBut):
        op = "[]" if f.grade == 1 else f"[{f.grade}]"
        return op + _pp(f.body, _PREC_UNARY)
    if isinstance(f, (Mu, Nu)):
        kw = "mu" if isinstance(f, Mu) else "nu"
        # binder scope runs maximally right, so any operand position needs parens
        s = f"{kw} {f.var}.{_pp(f.body, 0)}"
        return f"({s})" if min_prec > 0 else s
    raise TypeError(f"not a formula: {f!r}")


def to_text(f: Formula) -> str:
    return _pp(f, 0)


# ---------------------------------------------------------------------------
# Well-naming


def well_name(phi: Formula) -> Formula:
    """Rename bound variables so each is bound once and none is also free.

    Deterministic: a clashing binder gets the smallest fresh integer suffix,
    binders visited left to right.
    """
    used = set(free_vars(phi))

    def fresh(name: str) -> str:
        i = 1
        while f"{name}{i}" in used:
            i += 1
        return f"{name}{i}"

    def go(f: Formula, env: dict[str, str]) -> Formula:
        if isinstance(f, Var):
            return Var(env.get(f.name, f.name))
        if isinstance(f, (Mu, Nu)):
            name = f.var
            new = fresh(name) if name in used else name
            used.add(new)
            body = go(f.body, {**env, name: new})
            return type(f)(new, body)
        if isinstance(f, (And, Or)):
            return type(f)(go(f.lhs, env), go(f.rhs, env))
        if isinstance(f, (AtLeast, AllBut)):
            return type(f)(f.grade, go(f.body, env))
        return f

    return go(phi, {})


def is_well_named(phi: Formula) -> bool:
    free = free_vars(phi)
    seen: set[str] = set()

    def go(f: Formula) -> bool:
        if isinstance(f, (Mu, Nu)):
            if f.var in seen or f.var in free:
                return False
            seen.add(f.var)
        return all(go(c) for c in children(f))

    return go(phi)


# ---------------------------------------------------------------------------
# Subformula index


class SubformulaIndex:
    """Canonical ordering and cross-references for all distinct subformulas.

    Order is post-order, left to right, duplicates dropped keeping the first
    occurrence; children therefore always precede their parents, and the root
    is last.  Fixpoints and their bound variables are in 1:1 correspondence
    (well-naming), indexed identically.
    """

    def __init__(self, phi: Formula):
        if not is_well_named(phi):
            raise FormulaError("index requires a well-named formula")
        self.root_formula = phi

        order: list[Formula] = []
        pos: dict[Formula, int] = {}

        def visit(f: Formula) -> None:
            for c in children(f):
                visit(c)
            if f not in pos:
                pos[f] = len(order)
                order.append(f)

        visit(phi)
        self.formulas: tuple[Formula, ...] = tuple(order)
        self.pos = pos
        self.root = pos[phi]
        self.n = len(order)

        self.sub: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted({pos[c] for c in children(f)})) for f in order
        )
        self.free: tuple[frozenset[str], ...] = tuple(free_vars(f) for f in order)
        self.is_fp: tuple[bool, ...] = tuple(is_fixpoint(f) for f in order)
        self.is_mu: tuple[bool, ...] = tuple(isinstance(f, Mu) for f in order)

        # fixpoints in canonical order; variable i is the one bound by fixpoint i
        self.fp_positions: tuple[int, ...] = tuple(
            p for p, f in enumerate(order) if is_fixpoint(f)
        )
        self.fp_index: dict[int, int] = {p: i for i, p in enumerate(self.fp_positions)}
        self.n_fp = len(self.fp_positions)
        self.var_names: tuple[str, ...] = tuple(order[p].var for p in self.fp_positions)
        self.var_index: dict[str, int] = {x: i for i, x in enumerate(self.var_names)}
        if len(self.var_index) != self.n_fp:
            raise FormulaError("duplicate binder")  # unreachable once well-named
        self.body_pos: tuple[int, ...] = tuple(
            pos[order[p].body] for p in self.fp_positions
        )

        # strict fixpoint subformulas, as fixpoint indices, per formula
        tfp: list[frozenset[int]] = []
        for p, f in enumerate(order):
            acc: set[int] = set()
            for c in self.sub[p]:
                acc |= tfp[c]
                if self.is_fp[c]:
                    acc.add(self.fp_index[c])
            tfp.append(frozenset(acc))
        self.tfp: tuple[frozenset[int], ...] = tuple(tfp)

        # maximum fixpoint nesting depth
        depth: list[int] = []
        for p in range(self.n):
            d = max((depth[c] for c in self.sub[p]), default=0)
            depth.append(d + 1 if self.is_fp[p] else d)
        self.q = depth[self.root] if self.n else 0

    @property
    def is_sentence(self) -> bool:
        return not self.free[self.root]

    # construction is deterministic in the root formula, so two indexes for
    # the same formula are interchangeable
    def __eq__(self, other):
        return (
            isinstance(other, SubformulaIndex)
            and self.root_formula == other.root_formula
        )

    def __hash__(self):
        return hash(self.root_formula)


def index(phi: Formula) -> SubformulaIndex:
    return SubformulaIndex(phi)
