"""Concrete syntax for two-sorted formulas.

    forall x:R, v:V. norm(x * v) <= abs(x) * norm(v)
    exists v:V. ~(v = 0v) & d(v, 0v) = 1

Terms use ``+ - *``, rationals such as ``3`` or ``-1/2``, the zero vector ``0v`` and
the functions ``inner``, ``norm``, ``d`` and ``abs``. Formulas use ``= < <= > >=``,
``~ & | -> <->``, ``true``, ``false`` and quantifiers with typed binders.
Free variables get their sort from context, scalar when nothing decides it.

The grammar is untyped; sorts are elaborated in a second pass over the parse tree.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import ply.lex as lex
import ply.yacc as yacc

from services.formula_core import (
    And, ArithSort, Atom, Bottom, Exists, Forall, FormulaSyntaxError, Iff, Implies, Inner,
    Member, Norm, Not, Or, RationalConst, ScalarAdd, ScalarMul, ScalarNeg, ScalarVar,
    ScalarVectorMul, Sort, SortError, Top, VectorAdd, VectorNeg, VectorVar, ZeroVector, Dist,
    ZERO, term_children, rebuild_term,
)

logger = logging.getLogger(__name__)


# ---------- Lexer ----------
reserved = {
    "forall": "FORALL",
    "exists": "EXISTS",
    "true": "TRUE",
    "false": "FALSE",
    "in": "IN",
}

tokens = [
    "ZEROV", "RATIONAL", "IDENT",
    "IFF", "IMPLIES", "LE", "GE", "LT", "GT", "EQ",
    "PLUS", "MINUS", "TIMES", "LPAREN", "RPAREN", "COMMA", "COLON", "DOT",
    "NOT", "AND", "OR",
] + list(reserved.values())

t_IFF = r"<->"
t_IMPLIES = r"->"
t_LE = r"<="
t_GE = r">="
t_LT = r"<"
t_GT = r">"
t_EQ = r"="
t_PLUS = r"\+"
t_MINUS = r"-"
t_TIMES = r"\*"
t_LPAREN = r"\("
t_RPAREN = r"\)"
t_COMMA = r","
t_COLON = r":"
t_DOT = r"\."
t_NOT = r"~"
t_AND = r"&"
t_OR = r"\|"

t_ignore = " \t\r"
t_ignore_COMMENT = r"\#[^\n]*"


def t_ZEROV(t):
    r"0v(?![A-Za-z0-9_'])"
    return t


def t_RATIONAL(t):
    r"\d+(/\d+)?"
    return t


def t_IDENT(t):
    r"[A-Za-z_][A-Za-z0-9_']*"
    t.type = reserved.get(t.value, "IDENT")
    return t


def t_newline(t):
    r"\n+"
    t.lexer.lineno += len(t.value)


def t_error(t):
    line, column = _position(t.lexer.lexdata, t.lexpos)
    raise FormulaSyntaxError(f"unexpected character {t.value[0]!r}", line, column)


_lexer = lex.lex()


def _position(text: str, offset: int) -> Tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column


def _fail(text: str, offset: int, message: str):
    line, column = _position(text, offset)
    raise FormulaSyntaxError(message, line, column)


# ---------- Untyped parse trees ----------
@dataclass
class _Node:
    kind: str  # num, zero, id, add, sub, neg, mul, call
    start: int
    end: int
    value: Any = None
    children: Tuple["_Node", ...] = ()


@dataclass
class _RawFormula:
    kind: str  # true, false, not, and, or, implies, iff, forall, exists, atom, member
    children: Tuple[Any, ...] = ()
    value: Any = None
    pos: int = 0


@dataclass(frozen=True)
class _Abs:
    """Absolute value, expanded away at the enclosing atom."""

    arg: Any


FUNCTIONS = {"inner": 2, "norm": 1, "d": 2, "abs": 1}
SORT_NAMES = {"R": Sort.SCALAR, "V": Sort.VECTOR}
ARITH_SORT_NAMES = {"N": ArithSort.NAT, "P": ArithSort.SET}

_CONNECTIVES = {"<->": "iff", "->": "implies", "|": "or", "&": "and"}
_ARITHMETIC = {"+": "add", "-": "sub", "*": "mul"}


class _EndOfInput(Exception):
    pass


# ---------- Grammar ----------
# quantifier bodies extend as far right as possible
precedence = (
    ("right", "QUANT"),
    ("left", "IFF"),
    ("right", "IMPLIES"),
    ("left", "OR"),
    ("left", "AND"),
    ("right", "NOT"),
    ("nonassoc", "EQ", "LT", "LE", "GT", "GE", "IN"),
    ("left", "PLUS", "MINUS"),
    ("left", "TIMES"),
    ("right", "UMINUS"),
)


def p_formula_connective(p):
    """formula : formula IFF formula
               | formula IMPLIES formula
               | formula OR formula
               | formula AND formula"""
    p[0] = _RawFormula(_CONNECTIVES[p[2]], (p[1], p[3]))


def p_formula_not(p):
    "formula : NOT formula"
    p[0] = _RawFormula("not", (p[2],))


def p_formula_quantifier(p):
    """formula : FORALL binders DOT formula %prec QUANT
               | EXISTS binders DOT formula %prec QUANT"""
    p[0] = _RawFormula(p[1], (p[4],), value=p[2], pos=p.lexpos(1))


def p_formula_group(p):
    "formula : LPAREN formula RPAREN"
    p[0] = p[2]


def p_formula_constant(p):
    """formula : TRUE
               | FALSE"""
    p[0] = _RawFormula(p[1])


def p_formula_comparison(p):
    """formula : term EQ term
               | term LT term
               | term LE term
               | term GT term
               | term GE term"""
    p[0] = _RawFormula("atom", (p[1], p[3]), value=p[2], pos=p.lexpos(2))


def p_formula_member(p):
    "formula : term IN IDENT"
    p[0] = _RawFormula("member", (p[1],), value=p[3], pos=p.lexpos(2))


def p_binders(p):
    """binders : binder
               | binders COMMA binder"""
    p[0] = [p[1]] if len(p) == 2 else p[1] + [p[3]]


def p_binder(p):
    "binder : IDENT COLON IDENT"
    p[0] = (p[1], p[3], p.lexpos(3))


def p_term_arithmetic(p):
    """term : term PLUS term
            | term MINUS term
            | term TIMES term"""
    p[0] = _Node(_ARITHMETIC[p[2]], p[1].start, p[3].end, children=(p[1], p[3]))


def p_term_negation(p):
    "term : MINUS term %prec UMINUS"
    arg, start = p[2], p.lexpos(1)
    # "-3" is a constant, "-(3)" a negation
    if arg.kind == "num" and p.lexer.lexdata[arg.start].isdigit():
        p[0] = _Node("num", start, arg.end, value=-arg.value)
    else:
        p[0] = _Node("neg", start, arg.end, children=(arg,))


def p_term_group(p):
    "term : LPAREN term RPAREN"
    inner = p[2]
    p[0] = _Node(inner.kind, p.lexpos(1), p.lexpos(3) + 1, inner.value, inner.children)


def p_term_rational(p):
    "term : RATIONAL"
    start = p.lexpos(1)
    num, _, den = p[1].partition("/")
    if den and int(den) == 0:
        _fail(p.lexer.lexdata, start, f"zero denominator, found {p[1]!r}")
    p[0] = _Node("num", start, start + len(p[1]), value=Fraction(int(num), int(den) if den else 1))


def p_term_zero(p):
    "term : ZEROV"
    p[0] = _Node("zero", p.lexpos(1), p.lexpos(1) + len(p[1]))


def p_term_name(p):
    "term : IDENT"
    p[0] = _Node("id", p.lexpos(1), p.lexpos(1) + len(p[1]), value=p[1])


def p_term_call(p):
    "term : IDENT LPAREN arguments RPAREN"
    name, args, start = p[1], p[3], p.lexpos(1)
    if name not in FUNCTIONS:
        _fail(p.lexer.lexdata, start, f"unknown function {name!r}")
    if len(args) != FUNCTIONS[name]:
        _fail(p.lexer.lexdata, start, f"{name} takes {FUNCTIONS[name]} argument(s), found {len(args)}")
    p[0] = _Node("call", start, p.lexpos(4) + 1, value=name, children=tuple(args))


def p_arguments(p):
    """arguments : term
                 | arguments COMMA term"""
    p[0] = [p[1]] if len(p) == 2 else p[1] + [p[3]]


def p_error(tok):
    if tok is None:
        raise _EndOfInput()
    _fail(tok.lexer.lexdata, tok.lexpos, f"unexpected {tok.value!r}")


_formula_parser = yacc.yacc(start="formula", debug=False, write_tables=False, errorlog=logger)
# formula rules are unreachable from a bare term
_term_parser = yacc.yacc(start="term", debug=False, write_tables=False, errorlog=yacc.NullLogger())
_parse_lock = threading.Lock()


def _run(parser, text: str):
    lexer = _lexer.clone()
    lexer.lineno = 1
    with _parse_lock:
        try:
            return parser.parse(text, lexer=lexer)
        except _EndOfInput:
            line, column = _position(text, len(text))
            raise FormulaSyntaxError("unexpected end of input", line, column) from None


# ---------- Sort elaboration ----------
_BINARY = {"and": And, "or": Or, "implies": Implies, "iff": Iff}


class _Elaborator:
    def __init__(self, text: str, *, second_order: bool = False):
        self.text = text
        self.second_order = second_order
        self.scope: List[Tuple[str, Any]] = []
        self.free: Dict[str, Any] = {}

    def formula(self, raw: _RawFormula):
        kind = raw.kind
        if kind == "true":
            return Top()
        if kind == "false":
            return Bottom()
        if kind == "not":
            return Not(self.formula(raw.children[0]))
        if kind in _BINARY:
            left = self.formula(raw.children[0])
            return _BINARY[kind](left, self.formula(raw.children[1]))
        if kind in ("forall", "exists"):
            return self.quantifier(Forall if kind == "forall" else Exists, raw)
        if kind == "atom":
            return self.elaborate_atom(raw.value, *raw.children)
        if not self.second_order:
            _fail(self.text, raw.pos, "set membership needs second-order input, found 'in'")
        return self.elaborate_member(raw.children[0], raw.value)

    def quantifier(self, kind, raw: _RawFormula):
        binders = [self.binder(*b) for b in raw.value]
        mark = len(self.scope)
        for name, sort in binders:
            self.bind(name, sort)
        body = self.formula(raw.children[0])
        del self.scope[mark:]
        for name, sort in reversed(binders):
            body = kind(name, sort, body)
        return body

    def binder(self, name: str, sort_name: str, pos: int) -> Tuple[str, Any]:
        if sort_name in SORT_NAMES:
            return name, SORT_NAMES[sort_name]
        if self.second_order and sort_name in ARITH_SORT_NAMES:
            return name, ARITH_SORT_NAMES[sort_name]
        allowed = "R, V, N or P" if self.second_order else "R or V"
        _fail(self.text, pos, f"expected sort {allowed}, found {sort_name!r}")

    def bind(self, name: str, sort) -> None:
        current = self.lookup(name)
        if current is not None and current != sort:
            raise SortError(f"'{name}' rebound with a different sort", name)
        self.scope.append((name, sort))

    def lookup(self, name: str):
        for bound, sort in reversed(self.scope):
            if bound == name:
                return sort
        return None

    def source(self, node: _Node) -> str:
        return self.text[node.start:node.end]

    def name_sort(self, name: str, node: _Node):
        sort = self.lookup(name)
        if sort is None:
            sort = self.free.get(name)
        if sort == ArithSort.SET:
            raise SortError("set variable used as a term", self.source(node))
        if sort == ArithSort.NAT:
            return Sort.SCALAR
        return sort

    def sort_of(self, node: _Node) -> Optional[Sort]:
        if node.kind in ("num", "call"):
            return Sort.SCALAR
        if node.kind == "zero":
            return Sort.VECTOR
        if node.kind == "id":
            return self.name_sort(node.value, node)
        if node.kind == "neg":
            return self.sort_of(node.children[0])
        if node.kind in ("add", "sub"):
            return self.sort_of(node.children[0]) or self.sort_of(node.children[1])
        if node.kind == "mul":
            return self.sort_of(node.children[1])
        raise AssertionError(node.kind)

    def elaborate(self, node: _Node, expected: Optional[Sort]):
        sort = self.sort_of(node) or expected or Sort.SCALAR
        if expected is not None and sort != expected:
            raise SortError(f"expected a {'vector' if expected == Sort.VECTOR else 'scalar'} term", self.source(node))
        kind = node.kind
        if kind == "num":
            return RationalConst(node.value)
        if kind == "zero":
            return ZeroVector()
        if kind == "id":
            name = node.value
            if self.lookup(name) is None and name not in self.free:
                self.free[name] = sort
            return VectorVar(name) if sort == Sort.VECTOR else ScalarVar(name)
        if kind == "neg":
            arg = self.elaborate(node.children[0], sort)
            return VectorNeg(arg) if sort == Sort.VECTOR else ScalarNeg(arg)
        if kind in ("add", "sub"):
            left = self.elaborate(node.children[0], sort)
            right = self.elaborate(node.children[1], sort)
            if sort == Sort.VECTOR:
                return VectorAdd(left, VectorNeg(right) if kind == "sub" else right)
            return ScalarAdd(left, ScalarNeg(right) if kind == "sub" else right)
        if kind == "mul":
            left = self.elaborate(node.children[0], Sort.SCALAR)
            right = self.elaborate(node.children[1], sort)
            return ScalarVectorMul(left, right) if sort == Sort.VECTOR else ScalarMul(left, right)
        if kind == "call":
            fn, args = node.value, node.children
            if fn == "norm":
                return Norm(self.elaborate(args[0], Sort.VECTOR))
            if fn == "abs":
                return _Abs(self.elaborate(args[0], Sort.SCALAR))
            left = self.elaborate(args[0], Sort.VECTOR)
            right = self.elaborate(args[1], Sort.VECTOR)
            return Inner(left, right) if fn == "inner" else Dist(left, right)
        raise AssertionError(kind)

    def elaborate_atom(self, op: str, lhs: _Node, rhs: _Node):
        sort = self.sort_of(lhs) or self.sort_of(rhs) or Sort.SCALAR
        if sort == Sort.VECTOR and op != "=":
            raise SortError("vectors can only be compared with '='", self.text[lhs.start:rhs.end])
        return expand_abs_atom(Atom(op, self.elaborate(lhs, sort), self.elaborate(rhs, sort)))

    def elaborate_member(self, element: _Node, name: str):
        sort = self.lookup(name)
        if sort is None:
            sort = self.free.setdefault(name, ArithSort.SET)
        if sort != ArithSort.SET:
            raise SortError("membership needs a set variable", name)
        return expand_abs_atom(Member(self.elaborate(element, Sort.SCALAR), name))


# ---------- abs expansion ----------
def _find_abs(t):
    if isinstance(t, _Abs):
        return t
    for child in _children(t):
        hit = _find_abs(child)
        if hit is not None:
            return hit
    return None


def _children(t):
    if isinstance(t, _Abs):
        return (t.arg,)
    return term_children(t)


def _replace(t, target, replacement):
    if t == target:
        return replacement
    if isinstance(t, _Abs):
        return _Abs(_replace(t.arg, target, replacement))
    kids = term_children(t)
    if not kids:
        return t
    return rebuild_term(t, [_replace(k, target, replacement) for k in kids])


def expand_abs_atom(atom):
    """Rewrite ``P(|s|)`` into ``s >= 0 & P(s) | s < 0 & P(-s)`` until no ``abs`` remains."""
    terms = [atom.lhs, atom.rhs] if isinstance(atom, Atom) else [atom.element]
    target = next((hit for hit in map(_find_abs, terms) if hit is not None), None)
    if target is None:
        return atom
    s = target.arg

    def instance(value):
        if isinstance(atom, Atom):
            return Atom(atom.op, _replace(atom.lhs, target, value), _replace(atom.rhs, target, value))
        return Member(_replace(atom.element, target, value), atom.set_name)

    return Or(
        And(expand_abs_atom(Atom(">=", s, ZERO)), expand_abs_atom(instance(s))),
        And(expand_abs_atom(Atom("<", s, ZERO)), expand_abs_atom(instance(ScalarNeg(s)))),
    )


# ---------- Entry points ----------
def parse(text: str, *, second_order: bool = False):
    """Parse formula text into a sort-checked formula tree."""
    raw = _run(_formula_parser, text)
    return _Elaborator(text, second_order=second_order).formula(raw)


def parse_term(text: str, sort: Optional[Sort] = None):
    """Parse a single term; free names default to ``sort`` or are inferred."""
    node = _run(_term_parser, text)
    term = _Elaborator(text).elaborate(node, sort)
    if _find_abs(term) is not None:
        raise SortError("abs is only allowed inside a formula", text)
    return term


class Theory(str, Enum):
    VS = "vs"
    MS = "ms"
    NS = "ns"
    BS = "bs"
    IP = "ip"
    HS = "hs"


VECTOR_SPACE_AXIOMS = [
    "forall u:V, v:V, w:V. u + (v + w) = (u + v) + w",
    "forall v:V, w:V. v + w = w + v",
    "forall v:V. 0v + v = v",
    "forall v:V. -v + v = 0v",
    "forall a:R, v:V, w:V. a * (v + w) = a * v + a * w",
    "forall a:R, b:R, v:V. (a + b) * v = a * v + b * v",
    "forall v:V. 1 * v = v",
    "forall a:R, b:R, v:V. (a * b) * v = a * (b * v)",
]

METRIC_AXIOMS = [
    "forall x:V, y:V. d(x, y) >= 0 & (d(x, y) = 0 <-> x = y)",
    "forall x:V, y:V. d(x, y) = d(y, x)",
    "forall x:V, y:V, z:V. d(x, z) <= d(x, y) + d(y, z)",
]

NORM_AXIOMS = [
    "forall v:V. norm(v) >= 0 & (norm(v) = 0 <-> v = 0v)",
    "forall a:R, v:V. norm(a * v) = abs(a) * norm(v)",
    "forall v:V, w:V. norm(v + w) <= norm(v) + norm(w)",
]

INNER_PRODUCT_AXIOMS = [
    "forall v:V, w:V. inner(v, w) = inner(w, v)",
    "forall u:V, v:V, w:V. inner(u + v, w) = inner(u, w) + inner(v, w)",
    "forall a:R, v:V, w:V. inner(a * v, w) = a * inner(v, w)",
    "forall v:V. inner(v, v) >= 0 & (inner(v, v) = 0 <-> v = 0v)",
]


def theory_axiom_texts(theory: Theory) -> List[str]:
    theory = Theory(theory)
    if theory == Theory.MS:
        return list(METRIC_AXIOMS)
    if theory in (Theory.NS, Theory.BS):
        return VECTOR_SPACE_AXIOMS + NORM_AXIOMS
    if theory in (Theory.IP, Theory.HS):
        return VECTOR_SPACE_AXIOMS + INNER_PRODUCT_AXIOMS
    return list(VECTOR_SPACE_AXIOMS)


def theory_axioms(theory: Theory) -> List[Any]:
    """The defining sentences of a theory, beyond the real-closed-field axioms."""
    return [parse(text) for text in theory_axiom_texts(theory)]
