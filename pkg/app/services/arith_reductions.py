"""Translations of arithmetic into theories with a real-number sort.

Given a formula ``N(x)`` that defines the natural numbers in some model, first-order
arithmetic is interpreted by relativizing quantifiers to ``N`` and second-order
arithmetic by coding sets as reals with ternary digits ``sharp A = sum chi_A(n) / 3^n``.
With a formula ``M(x, y, z)`` defining real multiplication the same works in additive
languages. The generators only build sentences; nothing here decides them.

The exponential relation ``3^n = k`` is defined through Goedel's beta function
``beta(c, d, i) = c mod (1 + (i + 1) * d)``: some sequence coded by ``c, d`` starts
at 1, triples at every step below ``n`` and ends at ``k``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Dict, Iterable, Optional, Set, Tuple

from services.formula_core import (
    And, ArithSort, ArityError, Atom, BINARY_CONNECTIVES, Dist, Exists, Forall, Iff, Implies, LanguageError,
    Member, Not, ONE, Or, QUANTIFIERS, ScalarAdd, ScalarMul, ScalarNeg, ScalarVar, Sort, SortError, VectorVar,
    ZERO, all_names, conj, const, expand_abs, free_variables, fresh_name, is_quantifier_free, map_atoms,
    quantify, substitute, unnest_multiplication,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DefiningFormula:
    """A formula with named scalar slots; other free names act as parameters."""

    body: object
    slots: Tuple[str, ...]

    def __post_init__(self):
        free = free_variables(self.body)
        for slot in self.slots:
            if free.get(slot) != Sort.SCALAR:
                raise SortError(f"slot {slot!r} is not a free scalar variable", slot)
        if len(set(self.slots)) != len(self.slots):
            raise ArityError(f"repeated slot in {self.slots}")

    @property
    def arity(self) -> int:
        return len(self.slots)

    @property
    def parameters(self) -> Dict[str, object]:
        return {n: s for n, s in free_variables(self.body).items() if n not in self.slots}

    def instantiate(self, *terms):
        if len(terms) != len(self.slots):
            raise ArityError(f"expected {len(self.slots)} argument(s), got {len(terms)}")
        return substitute(self.body, dict(zip(self.slots, terms)))

    def __call__(self, *terms):
        return self.instantiate(*terms)


def _require_arity(f: DefiningFormula, n: int, what: str) -> None:
    if f.arity != n:
        raise ArityError(f"{what} needs a formula with {n} free slot(s), got {f.arity}")


class _Names:
    def __init__(self, *formulas):
        self.used: Set[str] = set()
        for f in formulas:
            self.used |= all_names(f)

    def fresh(self, base: str) -> ScalarVar:
        name = fresh_name(base, self.used)
        self.used.add(name)
        return ScalarVar(name)


def _minus(a, b):
    return ScalarAdd(a, ScalarNeg(b))


def _forall(vars_, body):
    return quantify(Forall, [(v.name, Sort.SCALAR) for v in vars_], body)


def _exists(vars_, body):
    return quantify(Exists, [(v.name, Sort.SCALAR) for v in vars_], body)


# ---------- Characterizing sentences ----------
def peano_sentence(n: DefiningFormula):
    """Holds exactly when ``n`` defines the natural numbers among the reals."""
    _require_arity(n, 1, "peano_sentence")
    names = _Names(n.body)
    x, y = names.fresh("x"), names.fresh("y")
    base = n(ZERO)
    successor = _forall([x], Implies(n(x), And(Atom(">=", x, ZERO), n(ScalarAdd(x, ONE)))))
    separated = _forall([x, y], Implies(
        conj([n(x), n(y), Not(Atom("=", x, y))]),
        expand_abs(_minus(x, y), lambda t: Atom(">=", t, ONE)),
    ))
    return conj([base, successor, separated])


def mult_sentence(m: DefiningFormula):
    """Holds exactly when ``m(x, y, z)`` defines ``x * y = z`` on the reals."""
    _require_arity(m, 3, "mult_sentence")
    names = _Names(m.body)
    x, y, z = names.fresh("x"), names.fresh("y"), names.fresh("z")
    x1, x2, z1, z2 = names.fresh("x1"), names.fresh("x2"), names.fresh("z1"), names.fresh("z2")
    xp, zp = names.fresh("x'"), names.fresh("z'")
    eps, delta = names.fresh("eps"), names.fresh("delta")

    functional = _forall([x, y], _exists([z], And(
        m(x, y, z),
        _forall([zp], Implies(m(x, y, zp), Atom("=", zp, z))),
    )))
    commutative = _forall([x, y, z], Implies(m(x, y, z), m(y, x, z)))
    times_zero = _forall([y, z], Iff(m(ZERO, y, z), Atom("=", z, ZERO)))
    times_one = _forall([y, z], Iff(m(ONE, y, z), Atom("=", z, y)))
    additive = _forall([x1, x2, y, z1, z2], Implies(
        And(m(x1, y, z1), m(x2, y, z2)),
        m(ScalarAdd(x1, x2), y, ScalarAdd(z1, z2)),
    ))

    def close(dx, dz):
        return Implies(And(Atom("<", dx, delta), m(xp, y, zp)), Atom("<", dz, eps))

    continuous = _forall([x, y, z, eps], Implies(
        Atom(">", eps, ZERO),
        Implies(m(x, y, z), _exists([delta], And(
            Atom(">", delta, ZERO),
            _forall([xp, zp], expand_abs(_minus(x, xp), lambda dx: expand_abs(_minus(z, zp), lambda dz: close(dx, dz)))),
        ))),
    ))
    return conj([functional, commutative, times_zero, times_one, additive, continuous])


# ---------- First-order arithmetic ----------
def _relabel(sort):
    if sort in (Sort.SCALAR, ArithSort.NAT):
        return Sort.SCALAR
    raise LanguageError(f"quantifier of sort {getattr(sort, 'value', sort)} cannot be relativized here")


def _avoiding(f, reserved: Set[str]):
    """Rename binders of ``f`` that collide with ``reserved`` names."""
    if isinstance(f, QUANTIFIERS):
        var, body = f.var, f.body
        if var in reserved:
            new = fresh_name(var, reserved | all_names(f))
            body = substitute(body, {var: ScalarVar(new) if f.sort != Sort.VECTOR else VectorVar(new)})
            var = new
        return type(f)(var, f.sort, _avoiding(body, reserved))
    if isinstance(f, Not):
        return Not(_avoiding(f.arg, reserved))
    if isinstance(f, BINARY_CONNECTIVES):
        return type(f)(_avoiding(f.left, reserved), _avoiding(f.right, reserved))
    return f


def relativize(p, n: DefiningFormula):
    """Arithmetic sentence with every quantifier restricted to ``n`` and sorts relabeled to R."""
    _require_arity(n, 1, "relativize")
    p = _avoiding(p, set(n.parameters))

    def walk(f):
        if isinstance(f, Member):
            raise LanguageError("set membership needs so_translate")
        if isinstance(f, QUANTIFIERS):
            sort = _relabel(f.sort)
            guard = n(ScalarVar(f.var))
            body = walk(f.body)
            inner = And(guard, body) if isinstance(f, Exists) else Implies(guard, body)
            return type(f)(f.var, sort, inner)
        if isinstance(f, Not):
            return Not(walk(f.arg))
        if isinstance(f, BINARY_CONNECTIVES):
            return type(f)(walk(f.left), walk(f.right))
        return f

    return walk(p)


# ---------- Second-order arithmetic ----------
class ArithmeticDefinitions:
    """Relational definitions over the reals, relativized to a natural-number formula."""

    def __init__(self, nat: DefiningFormula, *context):
        _require_arity(nat, 1, "ArithmeticDefinitions")
        self.nat = nat
        self.names = _Names(nat.body, *context)

    def N(self, t):
        return self.nat(t)

    def beta(self, c, d, i, r):
        """``beta(c, d, i) = r``: r is the remainder of c modulo 1 + (i + 1) * d."""
        q = self.names.fresh("q")
        modulus = ScalarAdd(ONE, ScalarMul(ScalarAdd(i, ONE), d))
        return conj([
            self.N(r),
            Atom("<", r, modulus),
            _exists([q], And(self.N(q), Atom("=", c, ScalarAdd(ScalarMul(q, modulus), r)))),
        ])

    def pow3(self, n, k):
        """``3^n = k``."""
        c, d, i, a = (self.names.fresh(b) for b in ("c", "d", "i", "a"))
        steps = _forall([i], Implies(
            And(self.N(i), Atom("<", i, n)),
            _exists([a], conj([
                self.N(a),
                self.beta(c, d, i, a),
                self.beta(c, d, ScalarAdd(i, ONE), ScalarMul(const(3), a)),
            ])),
        ))
        return _exists([c, d], conj([
            self.N(c), self.N(d), self.beta(c, d, ZERO, ONE), steps, self.beta(c, d, n, k),
        ]))

    def h(self, n, x, l):
        """``floor(3^n * x) = l``."""
        k = self.names.fresh("k")
        kx = ScalarMul(k, x)
        return conj([
            self.N(n), self.N(l),
            _exists([k], conj([
                self.N(k), self.pow3(n, k), Atom("<=", l, kx), Atom("<", kx, ScalarAdd(l, ONE)),
            ])),
        ])

    def digit(self, n, x, y):
        """The ternary digit of x at position n is y."""
        m, l, k = (self.names.fresh(b) for b in ("m", "l", "k"))
        first = And(Atom("=", n, ZERO), self.h(ZERO, x, y))
        later = _exists([m, l, k], conj([
            self.N(m), self.N(l), self.N(k),
            Atom("=", n, ScalarAdd(m, ONE)),
            self.h(n, x, l), self.h(m, x, k),
            Atom("=", l, ScalarAdd(y, ScalarMul(const(3), k))),
        ]))
        return conj([self.N(n), self.N(y), Or(first, later)])

    def D(self, n, x):
        """n belongs to the set coded by x."""
        return self.digit(n, x, ONE)

    def S(self, x):
        """x is the canonical code of the set it describes."""
        y, n = self.names.fresh("y"), self.names.fresh("n")
        same = _forall([n], Iff(self.D(n, x), self.D(n, y)))
        return And(Atom(">=", x, ZERO), _forall([y], Implies(And(Atom(">=", y, ZERO), same), Atom("<=", x, y))))


def pow3_formula(nat: DefiningFormula) -> DefiningFormula:
    """``3^n = k`` with slots ``n`` and ``k``."""
    defs = ArithmeticDefinitions(nat)
    n, k = defs.names.fresh("n"), defs.names.fresh("k")
    return DefiningFormula(defs.pow3(n, k), (n.name, k.name))


def _sorted_names(p) -> Dict[str, object]:
    """Sort of every name in ``p``; a name used at two sorts is an error."""
    sorts: Dict[str, object] = {}

    def note(name, sort):
        sort = ArithSort.NAT if sort == Sort.SCALAR else sort
        if sorts.setdefault(name, sort) != sort:
            raise SortError(f"{name!r} is used both as {sorts[name].value} and as {sort.value}", name)

    def walk(f):
        if isinstance(f, QUANTIFIERS):
            note(f.var, f.sort)
            walk(f.body)
        elif isinstance(f, Not):
            walk(f.arg)
        elif isinstance(f, BINARY_CONNECTIVES):
            walk(f.left)
            walk(f.right)

    walk(p)
    for name, sort in free_variables(p).items():
        note(name, sort)
    return sorts


def so_translate(p, n: DefiningFormula):
    """Second-order arithmetic sentence as a sentence about the reals."""
    _require_arity(n, 1, "so_translate")
    p = _avoiding(p, set(n.parameters))
    _sorted_names(p)
    defs = ArithmeticDefinitions(n, p)

    def walk(f):
        if isinstance(f, Member):
            return defs.D(f.element, ScalarVar(f.set_name))
        if isinstance(f, QUANTIFIERS):
            var = ScalarVar(f.var)
            if f.sort == ArithSort.SET:
                guard = defs.S(var)
            elif f.sort in (ArithSort.NAT, Sort.SCALAR):
                guard = defs.N(var)
            else:
                raise LanguageError(f"quantifier of sort {f.sort} in an arithmetic sentence")
            body = walk(f.body)
            inner = And(guard, body) if isinstance(f, Exists) else Implies(guard, body)
            return type(f)(f.var, Sort.SCALAR, inner)
        if isinstance(f, Not):
            return Not(walk(f.arg))
        if isinstance(f, BINARY_CONNECTIVES):
            return type(f)(walk(f.left), walk(f.right))
        return f

    out = walk(p)
    logger.debug("second-order translation built")
    return out


def second_order_reduction(p, n: DefiningFormula):
    """``Peano => P*``: valid in a class of models iff the arithmetic sentence p is true."""
    return Implies(peano_sentence(n), so_translate(p, n))


def _products_as_relation(f, m: DefiningFormula):
    def on_atom(a):
        if (
            isinstance(a, Atom) and a.op == "=" and isinstance(a.lhs, ScalarMul)
            and isinstance(a.lhs.left, ScalarVar) and isinstance(a.lhs.right, ScalarVar)
            and isinstance(a.rhs, ScalarVar)
        ):
            return m(a.lhs.left, a.lhs.right, a.rhs)
        return a

    return map_atoms(f, on_atom)


def additive_reduction(p, n: DefiningFormula, m: DefiningFormula):
    """``Peano & Mult => P+`` where every product of P* goes through ``m``."""
    _require_arity(m, 3, "additive_reduction")
    translated = _products_as_relation(unnest_multiplication(so_translate(p, n)), m)
    return Implies(And(peano_sentence(n), mult_sentence(m)), translated)


# ---------- Metric spaces ----------
def metric_nat_formula() -> DefiningFormula:
    """``N(x) := exists a b. d(a, b) = x``; defines the naturals in the integers as a metric space."""
    body = Exists("a", Sort.VECTOR, Exists("b", Sort.VECTOR, Atom("=", Dist(VectorVar("a"), VectorVar("b")), ScalarVar("x"))))
    return DefiningFormula(body, ("x",))


def diophantine_to_metric(q, *, nat: Optional[DefiningFormula] = None, mult: Optional[DefiningFormula] = None):
    """``Peano & exists x1..xk. N(x1) & .. & N(xk) & q`` for a quantifier-free arithmetic q.

    With ``mult`` the products of q are unnested into that relation and the Mult
    sentence is conjoined, which keeps the result additive.
    """
    if not is_quantifier_free(q):
        raise LanguageError("diophantine_to_metric expects a quantifier-free formula")
    nat = nat or metric_nat_formula()
    free = free_variables(q)
    for name, sort in free.items():
        if sort != Sort.SCALAR:
            raise SortError(f"{name!r} must be a scalar unknown", name)
    if set(free) & set(nat.parameters):
        raise LanguageError("unknowns clash with the parameters of N")
    unknowns = [ScalarVar(v) for v in sorted(free)]
    core = q
    parts = [peano_sentence(nat)]
    if mult is not None:
        core = _products_as_relation(unnest_multiplication(q), mult)
        parts.append(mult_sentence(mult))
    parts.append(_exists(unknowns, conj([nat(v) for v in unknowns] + [core])))
    return conj(parts)


# ---------- Exact ternary coding ----------
def sharp_encode(members: Iterable[int]) -> Fraction:
    """``sharp A`` for a finite set A of naturals."""
    out = Fraction(0)
    for n in set(members):
        if n < 0:
            raise ValueError(f"{n} is not a natural number")
        out += Fraction(1, 3 ** n)
    return out


def h_floor(x, n: int) -> int:
    """``floor(3^n * x)``."""
    if n < 0:
        raise ValueError("digit position must be a natural number")
    return floor(Fraction(x) * 3 ** n)


def ternary_digit(x, n: int) -> int:
    if n == 0:
        return h_floor(x, 0)
    return h_floor(x, n) - 3 * h_floor(x, n - 1)


def decode_set(x, limit: int) -> Set[int]:
    """Members below ``limit`` of the set coded by x."""
    return {n for n in range(limit) if ternary_digit(x, n) == 1}
