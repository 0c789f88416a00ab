"""Quantifier elimination and decisions for the first-order theory of the real field.

Elimination follows the Cohen-Hoermander sign-matrix construction written in
continuation-passing style: every unknown sign of a coefficient splits the search,
each branch carrying a context of sign assumptions about parameter polynomials.
Polynomials are sympy expressions; every atom is kept as ``p op 0``.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import sympy
from sympy import Poly, Symbol, expand

from services.formula_core import (
    And, Atom, Bottom, EagError, Exists, Forall, Iff, Implies, Inner, LanguageError, Member, Norm,
    Not, Or, RationalConst, ScalarAdd, ScalarMul, ScalarNeg, ScalarVar, Sort, Status, Top, Dist,
    VECTOR_TERMS, conj, disj, evaluate, free_variables, rename_apart,
)
from services.linear_programming import feasible_point
from services.monitoring import error_handler, performance_monitor
from services.settings import get_settings

logger = logging.getLogger(__name__)

# the continuation chain recurses once per case split
sys.setrecursionlimit(max(sys.getrecursionlimit(), 10000))

TRUE, FALSE = Top(), Bottom()

NEGATIVE, ZERO, POSITIVE, NONZERO = "-", "0", "+", "~0"
_FLIP = {NEGATIVE: POSITIVE, POSITIVE: NEGATIVE, ZERO: ZERO, NONZERO: NONZERO}


class BudgetExceeded(EagError):
    def __init__(self, kind: str, limit: int):
        super().__init__(f"{kind} budget of {limit} exceeded")
        self.kind = kind
        self.limit = limit


class _Inconsistent(Exception):
    """The current branch of sign assumptions is contradictory."""


@dataclass(frozen=True)
class PolyAtom:
    """``poly op 0`` with op one of = != < <= > >=."""

    op: str
    poly: sympy.Expr


_NEGATED = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
_MIRRORED = {"=": "=", "!=": "!=", "<": ">", ">": "<", "<=": ">=", ">=": "<="}


# ---------- Polynomial helpers ----------
def _symbol(name: str) -> Symbol:
    return Symbol(name)


def to_sympy(t) -> sympy.Expr:
    """A scalar term without geometric symbols as a sympy expression."""
    if isinstance(t, RationalConst):
        return sympy.Rational(t.value.numerator, t.value.denominator)
    if isinstance(t, ScalarVar):
        return _symbol(t.name)
    if isinstance(t, ScalarAdd):
        return to_sympy(t.left) + to_sympy(t.right)
    if isinstance(t, ScalarNeg):
        return -to_sympy(t.arg)
    if isinstance(t, ScalarMul):
        return to_sympy(t.left) * to_sympy(t.right)
    if isinstance(t, (Inner, Norm, Dist)) or isinstance(t, VECTOR_TERMS):
        raise LanguageError(f"not a real-field term: {type(t).__name__}")
    raise TypeError(f"not a term: {t!r}")


def _sorted_gens(p: sympy.Expr) -> List[Symbol]:
    return sorted(p.free_symbols, key=lambda s: s.name)


def _rational(value: sympy.Expr) -> Fraction:
    return Fraction(int(value.p), int(value.q))


def _monomial(coeff: Fraction, factors: List[ScalarVar]):
    term = None if (factors and coeff == 1) else RationalConst(coeff)
    for f in factors:
        term = f if term is None else ScalarMul(term, f)
    return term


def poly_term(p: sympy.Expr):
    """A sympy polynomial as a term: monomials in lex order, powers as repeated products."""
    p = expand(p)
    if p.is_number:
        return RationalConst(_rational(p))
    gens = _sorted_gens(p)
    out = None
    for monom, coeff in Poly(p, *gens).terms():
        c = _rational(coeff)
        factors = []
        for g, e in zip(gens, monom):
            factors += [ScalarVar(g.name)] * e
        if out is None:
            out = ScalarNeg(_monomial(Fraction(1), factors)) if (c == -1 and factors) else _monomial(c, factors)
        elif c < 0:
            out = ScalarAdd(out, ScalarNeg(_monomial(-c, factors)))
        else:
            out = ScalarAdd(out, _monomial(c, factors))
    return out


@lru_cache(maxsize=65536)
def _coeffs(p: sympy.Expr, x: Symbol) -> Tuple[sympy.Expr, ...]:
    if x not in p.free_symbols:
        return (p,)
    return tuple(Poly(p, x).all_coeffs())


def degree(p: sympy.Expr, x: Symbol) -> int:
    return len(_coeffs(p, x)) - 1


def head(p: sympy.Expr, x: Symbol) -> sympy.Expr:
    return _coeffs(p, x)[0]


@lru_cache(maxsize=65536)
def behead(p: sympy.Expr, x: Symbol) -> sympy.Expr:
    cs = _coeffs(p, x)
    n = len(cs) - 1
    return expand(sum((c * x ** (n - i) for i, c in enumerate(cs) if i > 0), sympy.Integer(0)))


@lru_cache(maxsize=65536)
def _derivative(p: sympy.Expr, x: Symbol) -> sympy.Expr:
    return expand(sympy.diff(p, x))


def _clear_denominator(p: sympy.Expr, x: Symbol, a: sympy.Expr, b: sympy.Expr) -> sympy.Expr:
    """``a**e * p(-b/a)`` with ``e`` the even one of ``d`` and ``d + 1``, ``d`` the degree of ``p`` in ``x``.

    Where ``a`` is nonzero it has the sign of ``p(-b/a)``.
    """
    cs = _coeffs(p, x)
    d = len(cs) - 1
    top = d + d % 2
    return expand(sum((c * (-b) ** (d - k) * a ** (top - d + k) for k, c in enumerate(cs)), sympy.Integer(0)))


@lru_cache(maxsize=65536)
def pseudo_remainder(p: sympy.Expr, q: sympy.Expr, x: Symbol) -> Tuple[int, sympy.Expr]:
    """``(k, r)`` with ``lc(q)**k * p = s * q + r`` and ``deg r < deg q``."""
    dp, dq = degree(p, x), degree(q, x)
    if dp < dq:
        return 0, p
    return dp - dq + 1, expand(sympy.prem(p, q, x))


@lru_cache(maxsize=65536)
def normalize(p: sympy.Expr) -> Tuple[sympy.Expr, int]:
    """Integer, content-free polynomial with positive leading coefficient, plus the sign relating it to ``p``."""
    gens = _sorted_gens(p)
    original = Poly(p, *gens)
    _, scaled = original.clear_denoms(convert=True)
    _, prim = scaled.primitive()
    if prim.LC() < 0:
        prim = -prim
    sign = 1 if (original.LC() / prim.LC()) > 0 else -1
    return prim.as_expr(), sign


def _number_sign(p: sympy.Expr) -> str:
    if p == 0:
        return ZERO
    return POSITIVE if p > 0 else NEGATIVE


@lru_cache(maxsize=65536)
def _linear_form(key: sympy.Expr):
    gens = _sorted_gens(key)
    poly = Poly(key, *gens)
    if poly.total_degree() != 1:
        return None
    coeffs: Dict[str, Fraction] = {}
    constant = Fraction(0)
    for monom, c in poly.terms():
        value = _rational(c)
        if sum(monom) == 0:
            constant = value
        else:
            coeffs[gens[monom.index(1)].name] = value
    return coeffs, constant


# ---------- Sign contexts ----------
def findsign(ctx: Dict[sympy.Expr, str], p: sympy.Expr) -> str:
    if p.is_number:
        return _number_sign(p)
    key, s = normalize(p)
    sign = ctx[key]
    return _FLIP[sign] if s < 0 else sign


def _linear_feasible(ctx: Dict[sympy.Expr, str]) -> bool:
    eqs, lts = [], []
    for key, sign in ctx.items():
        form = _linear_form(key)
        if form is None or sign == NONZERO:
            continue
        coeffs, constant = form
        if sign == ZERO:
            eqs.append(form)
        elif sign == NEGATIVE:
            lts.append(form)
        else:
            lts.append(({n: -c for n, c in coeffs.items()}, -constant))
    if not lts and len(eqs) < 2:
        return True
    return feasible_point(eqs, [], lts) is not None


def assertsign(ctx: Dict[sympy.Expr, str], p: sympy.Expr, sign: str) -> Dict[sympy.Expr, str]:
    if p.is_number:
        actual = _number_sign(p)
        if actual == sign or (sign == NONZERO and actual != ZERO):
            return ctx
        raise _Inconsistent()
    key, s = normalize(p)
    sign = _FLIP[sign] if s < 0 else sign
    known = ctx.get(key)
    if known == sign or (sign == NONZERO and known in (POSITIVE, NEGATIVE)):
        return ctx
    if known is not None and not (known == NONZERO and sign in (POSITIVE, NEGATIVE)):
        raise _Inconsistent()
    new = dict(ctx)
    new[key] = sign
    if sign != NONZERO and _linear_form(key) is not None and not _linear_feasible(new):
        raise _Inconsistent()
    return new


# ---------- Formula helpers ----------
def mk_and(a, b):
    if isinstance(a, Bottom) or isinstance(b, Bottom):
        return FALSE
    if isinstance(a, Top):
        return b
    if isinstance(b, Top):
        return a
    return And(a, b)


def mk_or(a, b):
    if isinstance(a, Top) or isinstance(b, Top):
        return TRUE
    if isinstance(a, Bottom):
        return b
    if isinstance(b, Bottom):
        return a
    return Or(a, b)


def _mk_not(a):
    if isinstance(a, Top):
        return FALSE
    if isinstance(a, Bottom):
        return TRUE
    if isinstance(a, PolyAtom):
        return PolyAtom(_NEGATED[a.op], a.poly)
    if isinstance(a, Not):
        return a.arg
    return Not(a)


def _to_internal(f):
    if isinstance(f, (Top, Bottom)):
        return f
    if isinstance(f, Atom):
        if f.op not in _MIRRORED:
            raise LanguageError(f"unknown relation {f.op}")
        return PolyAtom(f.op, expand(to_sympy(f.lhs) - to_sympy(f.rhs)))
    if isinstance(f, Member):
        raise LanguageError("set membership is not part of the real-field language")
    if isinstance(f, Not):
        return Not(_to_internal(f.arg))
    if isinstance(f, And):
        return And(_to_internal(f.left), _to_internal(f.right))
    if isinstance(f, Or):
        return Or(_to_internal(f.left), _to_internal(f.right))
    if isinstance(f, Implies):
        return Or(Not(_to_internal(f.left)), _to_internal(f.right))
    if isinstance(f, Iff):
        a, b = _to_internal(f.left), _to_internal(f.right)
        return Or(And(a, b), And(Not(a), Not(b)))
    if isinstance(f, (Exists, Forall)):
        if f.sort != Sort.SCALAR:
            raise LanguageError(f"vector quantifier over '{f.var}' in a real-field formula")
        body = _to_internal(f.body)
        if isinstance(f, Exists):
            return Exists(f.var, Sort.SCALAR, body)
        return Not(Exists(f.var, Sort.SCALAR, Not(body)))
    raise LanguageError(f"not a real-field formula: {type(f).__name__}")


def _nnf(f):
    if isinstance(f, Not):
        g = f.arg
        if isinstance(g, Not):
            return _nnf(g.arg)
        if isinstance(g, And):
            return mk_or(_nnf(Not(g.left)), _nnf(Not(g.right)))
        if isinstance(g, Or):
            return mk_and(_nnf(Not(g.left)), _nnf(Not(g.right)))
        return _mk_not(g)
    if isinstance(f, And):
        return mk_and(_nnf(f.left), _nnf(f.right))
    if isinstance(f, Or):
        return mk_or(_nnf(f.left), _nnf(f.right))
    return f


def _flatten(f, kind) -> List:
    if isinstance(f, kind):
        return _flatten(f.left, kind) + _flatten(f.right, kind)
    return [f]


def _symbols(f) -> set:
    if isinstance(f, PolyAtom):
        return f.poly.free_symbols
    if isinstance(f, Not):
        return _symbols(f.arg)
    if isinstance(f, (And, Or)):
        return _symbols(f.left) | _symbols(f.right)
    if isinstance(f, Exists):
        return _symbols(f.body) - {_symbol(f.var)}
    return set()


def _atoms(f, out: Dict[sympy.Expr, None]) -> Dict[sympy.Expr, None]:
    if isinstance(f, PolyAtom):
        out.setdefault(f.poly, None)
    elif isinstance(f, Not):
        _atoms(f.arg, out)
    elif isinstance(f, (And, Or)):
        _atoms(f.left, out)
        _atoms(f.right, out)
    return out


_SIGN_TESTS = {
    "=": lambda s: s == ZERO,
    "!=": lambda s: s != ZERO,
    "<": lambda s: s == NEGATIVE,
    "<=": lambda s: s in (NEGATIVE, ZERO),
    ">": lambda s: s == POSITIVE,
    ">=": lambda s: s in (POSITIVE, ZERO),
}


def _testform(signs: Dict[sympy.Expr, str], f) -> bool:
    if isinstance(f, PolyAtom):
        return _SIGN_TESTS[f.op](signs[f.poly])
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, Not):
        return not _testform(signs, f.arg)
    if isinstance(f, And):
        return _testform(signs, f.left) and _testform(signs, f.right)
    if isinstance(f, Or):
        return _testform(signs, f.left) or _testform(signs, f.right)
    raise TypeError(f"unexpected node {f!r}")


def simplify(f):
    """Evaluate ground atoms, fold truth constants and normalize every atom."""
    if isinstance(f, PolyAtom):
        if f.poly.is_number:
            return TRUE if _SIGN_TESTS[f.op](_number_sign(f.poly)) else FALSE
        key, s = normalize(f.poly)
        return PolyAtom(f.op if s > 0 else _MIRRORED[f.op], key)
    if isinstance(f, Not):
        return _mk_not(simplify(f.arg))
    if isinstance(f, And):
        return mk_and(simplify(f.left), simplify(f.right))
    if isinstance(f, Or):
        return mk_or(simplify(f.left), simplify(f.right))
    if isinstance(f, Exists):
        return Exists(f.var, f.sort, simplify(f.body))
    return f


def to_external(f):
    """Internal atoms back to ``Atom`` trees over integer polynomials."""
    if isinstance(f, PolyAtom):
        term = poly_term(f.poly)
        if f.op == "!=":
            return Not(Atom("=", term, RationalConst(Fraction(0))))
        return Atom(f.op, term, RationalConst(Fraction(0)))
    if isinstance(f, Not):
        return Not(to_external(f.arg))
    if isinstance(f, (And, Or)):
        return type(f)(to_external(f.left), to_external(f.right))
    if isinstance(f, Exists):
        return Exists(f.var, f.sort, to_external(f.body))
    return f


def _substitute(f, values: Dict[Symbol, sympy.Expr]):
    if isinstance(f, PolyAtom):
        return PolyAtom(f.op, expand(f.poly.subs(values)))
    if isinstance(f, Not):
        return Not(_substitute(f.arg, values))
    if isinstance(f, (And, Or)):
        return type(f)(_substitute(f.left, values), _substitute(f.right, values))
    if isinstance(f, Exists):
        inner = {k: v for k, v in values.items() if k.name != f.var}
        return Exists(f.var, f.sort, _substitute(f.body, inner))
    return f


# ---------- Sign matrices ----------
def _inferpsign(pd: List[str], qd: List[str]) -> List[str]:
    try:
        i = pd.index(ZERO)
    except ValueError:
        return [NONZERO] + pd
    return [qd[i]] + pd


def _condense(rows: List[List[str]]) -> List[List[str]]:
    out, i = [], 0
    while i + 1 < len(rows):
        interval, point = rows[i], rows[i + 1]
        if ZERO in point:
            out += [interval, point]
        i += 2
    return out + rows[i:]


def _inferisign(rows: List[List[str]]) -> List[List[str]]:
    out, i = [], 0
    while i + 2 < len(rows):
        left, interval, right = rows[i], rows[i + 1], rows[i + 2]
        l, r, rest = left[0], right[0], interval[1:]
        out.append(left)
        if (l == ZERO and r == ZERO) or NONZERO in (l, r):
            raise _Inconsistent()
        if l == ZERO:
            out.append([r] + rest)
        elif r == ZERO or l == r:
            out.append([l] + rest)
        else:
            out += [[l] + rest, [ZERO] + rest, [r] + rest]
        i += 2
    return out + rows[i:]


@dataclass(frozen=True)
class Limits:
    budget: int
    max_degree: int

    @classmethod
    def resolve(cls, budget: Optional[int] = None, max_degree: Optional[int] = None) -> "Limits":
        settings = get_settings()
        return cls(budget or settings.budget, max_degree or settings.max_degree)


class _Eliminator:
    def __init__(self, limits: Limits):
        self.limits = limits
        self.nodes = 0

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.limits.budget:
            raise BudgetExceeded("nodes", self.limits.budget)

    # -- case splits --
    def _guarded(self, cont, ctx, p, sign):
        try:
            extended = assertsign(ctx, p, sign)
        except _Inconsistent:
            return FALSE
        return cont(extended)

    def split_zero(self, ctx, p, cont_z, cont_n):
        try:
            sign = findsign(ctx, p)
        except KeyError:
            zero = PolyAtom("=", p)
            return mk_or(
                mk_and(zero, self._guarded(cont_z, ctx, p, ZERO)),
                mk_and(PolyAtom("!=", p), self._guarded(cont_n, ctx, p, NONZERO)),
            )
        return cont_z(ctx) if sign == ZERO else cont_n(ctx)

    def split_sign(self, ctx, p, cont):
        if findsign(ctx, p) == NONZERO:
            return mk_or(
                mk_and(PolyAtom(">", p), self._guarded(cont, ctx, p, POSITIVE)),
                mk_and(PolyAtom("<", p), self._guarded(cont, ctx, p, NEGATIVE)),
            )
        return cont(ctx)

    def split_trichotomy(self, ctx, p, cont_z, cont_pn):
        return self.split_zero(ctx, p, cont_z, lambda c: self.split_sign(c, p, cont_pn))

    # -- matrix construction --
    def casesplit(self, x, dun, pols, cont, ctx):
        if not pols:
            return self.matrix(x, dun, cont, ctx)
        p, rest = pols[0], pols[1:]
        if degree(p, x) == 0:
            branch = lambda c: self.delconst(x, dun, p, rest, cont, c)
            return self.split_trichotomy(ctx, p, branch, branch)
        return self.split_trichotomy(
            ctx,
            head(p, x),
            lambda c: self.casesplit(x, dun, [behead(p, x)] + rest, cont, c),
            lambda c: self.casesplit(x, dun + [p], rest, cont, c),
        )

    def delconst(self, x, dun, p, rest, cont, ctx):
        sign = findsign(ctx, p)
        at = len(dun)

        def with_column(rows):
            return cont([row[:at] + [sign] + row[at:] for row in rows])

        return self.casesplit(x, dun, rest, with_column, ctx)

    def pdivide_pos(self, ctx, p, q, x):
        a = head(q, x)
        k, r = pseudo_remainder(p, q, x)
        sign = findsign(ctx, a)
        if sign == ZERO:
            raise AssertionError("zero leading coefficient in division")
        if sign == POSITIVE or k % 2 == 0:
            return r
        if sign == NEGATIVE:
            return expand(-r)
        return expand(a * r)

    def matrix(self, x, pols, cont, ctx):
        self.tick()
        if not pols:
            try:
                return cont([[]])
            except _Inconsistent:
                return FALSE
        i = max(range(len(pols)), key=lambda j: (degree(pols[j], x), -j))
        p = pols[i]
        qs = [_derivative(p, x)] + pols[:i] + pols[i + 1:]
        gs = [self.pdivide_pos(ctx, p, q, x) for q in qs]

        def restore(rows):
            return cont([row[1:i + 1] + [row[0]] + row[i + 1:] for row in rows])

        return self.casesplit(x, [], qs + gs, lambda rows: self.dedmatrix(restore, rows), ctx)

    def dedmatrix(self, cont, rows):
        half = len(rows[0]) // 2
        signed = _condense([_inferpsign(row[:half], row[half:]) for row in rows])
        at_minus_infinity = [_FLIP[signed[0][1]]]
        at_plus_infinity = [signed[-1][1]]
        with_points = _inferisign([at_minus_infinity] + signed + [at_plus_infinity])[1:-1]
        return cont(_condense([row[:1] + row[2:] for row in with_points]))

    # -- elimination --
    def basic(self, x: Symbol, body, ctx):
        pols = list(_atoms(body, {}))
        worst = max((degree(p, x) for p in pols), default=0)
        if worst > self.limits.max_degree:
            raise BudgetExceeded("degree", self.limits.max_degree)

        def cont(rows):
            for row in rows:
                if _testform(dict(zip(pols, row)), body):
                    return TRUE
            return FALSE

        return self.casesplit(x, [], pols, cont, ctx)

    def _seed(self, literals) -> Dict[sympy.Expr, str]:
        ctx: Dict[sympy.Expr, str] = {}
        seeds = {"=": ZERO, "!=": NONZERO, "<": NEGATIVE, ">": POSITIVE}
        for lit in literals:
            if isinstance(lit, PolyAtom) and lit.op in seeds:
                ctx = assertsign(ctx, lit.poly, seeds[lit.op])
        return ctx

    def _linear_equation(self, x: Symbol, inside: List):
        """An equation ``a*x + b = 0`` among the literals as ``(literal, a, b)``; numeric ``a`` first."""
        symbolic = None
        for lit in inside:
            if isinstance(lit, PolyAtom) and lit.op == "=" and degree(lit.poly, x) == 1:
                a, b = head(lit.poly, x), behead(lit.poly, x)
                if a.is_number:
                    return lit, a, b
                if symbolic is None:
                    symbolic = (lit, a, b)
        return symbolic

    def exists(self, var: str, body):
        x = _symbol(var)
        parts = []
        for d in _flatten(_nnf(body), Or):
            literals = _flatten(d, And)
            outside = [c for c in literals if x not in _symbols(c)]
            inside = [c for c in literals if x in _symbols(c)]
            if not inside:
                parts.append(conj(outside))
                continue
            solved = self._linear_equation(x, inside)
            if solved is not None:
                lit, a, b = solved
                rest = [c for c in inside if c is not lit]
                if a.is_number:
                    value = expand(-b / a)
                    parts.append(simplify(conj(outside + [_substitute(c, {x: value}) for c in rest])))
                    continue
                if all(isinstance(c, PolyAtom) for c in rest):
                    parts.append(self._eliminate_by_equation(var, outside, rest, a, b))
                    continue
            try:
                ctx = self._seed(outside)
            except _Inconsistent:
                continue
            parts.append(mk_and(conj(outside), self.basic(x, conj(inside), ctx)))
        return simplify(disj(parts))

    def _eliminate_by_equation(self, var: str, outside: List, rest: List[PolyAtom], a, b):
        """``exists x. a*x + b = 0 & rest`` split on whether ``a`` vanishes."""
        self.tick()
        x = _symbol(var)
        moved = [PolyAtom(c.op, _clear_denominator(c.poly, x, a, b)) for c in rest]
        solved = simplify(conj(outside + [PolyAtom("!=", a)] + moved))
        degenerate = self.exists(var, conj(outside + [PolyAtom("=", a), PolyAtom("=", b)] + rest))
        return mk_or(solved, degenerate)

    def qelim(self, f):
        if isinstance(f, Exists):
            return self.exists(f.var, self.qelim(f.body))
        if isinstance(f, Not):
            return _mk_not(self.qelim(f.arg))
        if isinstance(f, And):
            return mk_and(self.qelim(f.left), self.qelim(f.right))
        if isinstance(f, Or):
            return mk_or(self.qelim(f.left), self.qelim(f.right))
        return simplify(f)


def _internal(f):
    return simplify(_to_internal(rename_apart(f)))


@error_handler
def eliminate(f, *, budget: Optional[int] = None, max_degree: Optional[int] = None):
    """Quantifier-free formula equivalent to ``f`` over the real field."""
    engine = _Eliminator(Limits.resolve(budget, max_degree))
    result = to_external(engine.qelim(_internal(f)))
    logger.debug(f"eliminated with {engine.nodes} matrix nodes")
    return result


@performance_monitor("rcf_decide")
@error_handler
def decide(sentence, *, budget: Optional[int] = None, max_degree: Optional[int] = None) -> Status:
    """Truth of a real-field sentence: ``VALID`` when true, ``INVALID`` when false."""
    free = free_variables(sentence)
    if free:
        raise LanguageError(f"decide expects a sentence, free variables: {', '.join(sorted(free))}")
    engine = _Eliminator(Limits.resolve(budget, max_degree))
    result = engine.qelim(_internal(sentence))
    if not isinstance(result, (Top, Bottom)):
        raise AssertionError(f"closed formula did not reduce to a truth value: {result!r}")
    return Status.VALID if isinstance(result, Top) else Status.INVALID


def evaluate_qf(f, env: Dict[str, Fraction]) -> bool:
    return evaluate(f, env)


# ---------- Rational witnesses ----------
def _holds(engine: _Eliminator, closed) -> bool:
    """Truth of a closed internal formula, with a fresh node budget for each check."""
    engine.nodes = 0
    return isinstance(engine.qelim(closed), Top)


def _truth_at(engine: _Eliminator, psi, x: Symbol, value: sympy.Rational) -> bool:
    return _holds(engine, _substitute(psi, {x: value}))


def _holds_between(engine: _Eliminator, psi, x: Symbol, *bounds: PolyAtom) -> bool:
    body = psi
    for atom in bounds:
        body = mk_and(body, atom)
    return _holds(engine, Exists(x.name, Sort.SCALAR, body))


def _equations(f) -> Iterable[sympy.Expr]:
    if isinstance(f, PolyAtom):
        if f.op == "=":
            yield f.poly
    elif isinstance(f, Not):
        yield from _equations(f.arg)
    elif isinstance(f, (And, Or)):
        yield from _equations(f.left)
        yield from _equations(f.right)


def _linear_solutions(psi, x: Symbol) -> List[sympy.Rational]:
    out = []
    for p in _equations(psi):
        if degree(p, x) == 1 and head(p, x).is_number:
            out.append(-behead(p, x) / head(p, x))
    return out


def _bisect(engine: _Eliminator, psi, x: Symbol, depth: int) -> Optional[sympy.Rational]:
    """A dyadic rational where ``psi`` holds, by halving an interval known to hold a solution."""
    zero = sympy.Integer(0)
    if _truth_at(engine, psi, x, zero):
        return zero
    sign = 1 if _holds_between(engine, psi, x, PolyAtom(">", x)) else -1

    def solution_between(lo, hi) -> bool:
        return _holds_between(engine, psi, x, PolyAtom(">", expand(sign * x - lo)), PolyAtom("<", expand(sign * x - hi)))

    # grow (lo, hi) on the chosen half-line until it holds a solution
    lo, hi = zero, sympy.Integer(1)
    for _ in range(depth + 1):
        if _truth_at(engine, psi, x, sign * hi):
            return sign * hi
        if solution_between(lo, hi):
            break
        lo, hi = hi, 2 * hi
    else:
        return None
    for _ in range(depth):
        mid = (lo + hi) / 2
        if _truth_at(engine, psi, x, sign * mid):
            return sign * mid
        if solution_between(lo, mid):
            hi = mid
        else:
            lo = mid
    return None


@error_handler
def find_rational_witness(
    f,
    *,
    budget: Optional[int] = None,
    witness_depth: Optional[int] = None,
    variables: Optional[Sequence[str]] = None,
) -> Optional[Dict[str, Fraction]]:
    """Rational values for the free variables of ``f`` making it true, or None.

    With ``variables`` only those are assigned; any other free variable is read as
    existentially quantified. Variables are fixed one at a time: first by solving an
    equation linear in the variable, otherwise by dyadic bisection of a half-line,
    each step decided by elimination. ``witness_depth`` bounds the bisection steps.
    """
    depth = get_settings().witness_depth if witness_depth is None else witness_depth
    engine = _Eliminator(Limits.resolve(budget))
    f = rename_apart(f)
    free = sorted(free_variables(f))
    order = list(variables) if variables is not None else free
    hidden = [n for n in free if n not in order]
    current = _internal(f)
    for name in hidden:
        current = Exists(name, Sort.SCALAR, current)
    found: Dict[str, Fraction] = {}
    for i, name in enumerate(order):
        x = _symbol(name)
        closed = current
        for other in reversed(order[i + 1:]):
            closed = Exists(other, Sort.SCALAR, closed)
        engine.nodes = 0
        psi = engine.qelim(closed)
        if not _holds_between(engine, psi, x):
            return None
        chosen = next((v for v in _linear_solutions(psi, x) if _truth_at(engine, psi, x, v)), None)
        if chosen is None:
            chosen = _bisect(engine, psi, x, depth)
        if chosen is None:
            logger.info(f"no rational value found for '{name}' within depth {depth}")
            return None
        found[name] = _rational(chosen)
        current = simplify(_substitute(current, {x: chosen}))
    return found


# ---------- Debug output ----------
def sign_matrix(polys: Sequence[sympy.Expr], var: str) -> str:
    """Table of the signs of univariate polynomials on the cells of the real line."""
    x = _symbol(var)
    polys = [expand(sympy.sympify(p)) for p in polys]
    for p in polys:
        extra = p.free_symbols - {x}
        if extra:
            raise LanguageError(f"sign_matrix expects polynomials in {var} only")
    engine = _Eliminator(Limits.resolve())
    captured: List[List[List[str]]] = []

    def cont(rows):
        captured.append(rows)
        return TRUE

    engine.casesplit(x, [], polys, cont, {})
    rows = captured[0] if captured else []
    header = "cell          " + "  ".join(str(p) for p in polys)
    lines = [header]
    for n, row in enumerate(rows):
        label = f"interval {n // 2}" if n % 2 == 0 else f"root {n // 2}"
        lines.append(f"{label:<14}" + "  ".join(row))
    return "\n".join(lines)
