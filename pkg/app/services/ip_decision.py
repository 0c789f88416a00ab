"""Decisions for real inner product spaces and Hilbert spaces under dimension constraints.

A sentence holds in R^n exactly when its coordinate translation ``res(p, n)`` holds over
the reals, and whether it holds in a space depends only on the dimension once that
reaches the number of vector variables. That leaves finitely many real-field decisions.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from services.formula_core import (
    And, Atom, Bottom, Dist, Exists, Forall, Implies, Inner, LanguageError, Member, Norm, Not,
    ONE, QUANTIFIERS, BINARY_CONNECTIVES, ScalarAdd, ScalarMul, ScalarNeg,
    ScalarVar, ScalarVectorMul, Sort, Status, Top, VectorAdd, VectorNeg, VectorVar, ZERO, ZeroVector,
    all_names, conj, const, count_vector_vars, disj, fresh_name, free_variables, is_sentence,
    iter_formula_subterms, map_atoms, quantify, rename_apart, scalar_sum, substitute, term_children,
    term_sort, vector_sum,
)
from services.formula_parser import INNER_PRODUCT_AXIOMS, parse
from services.monitoring import error_handler, performance_monitor
from services.rcf_engine import decide
from services.settings import get_settings

logger = logging.getLogger(__name__)


class ConstraintTag(str, Enum):
    ANY = "any"
    FINITE = "finite"
    INFINITE = "infinite"
    EXACTLY = "exactly"
    AT_MOST = "atmost"


@dataclass(frozen=True)
class DimensionConstraint:
    tag: ConstraintTag
    n: Optional[int] = None

    def __post_init__(self):
        if self.tag in (ConstraintTag.EXACTLY, ConstraintTag.AT_MOST):
            if self.n is None or self.n < 0:
                raise ValueError(f"{self.tag.value} needs a dimension n >= 0")
        elif self.n is not None:
            raise ValueError(f"{self.tag.value} takes no dimension")

    @classmethod
    def parse(cls, text: str) -> "DimensionConstraint":
        """``any``, ``finite``, ``infinite``, ``exactly:N`` or ``atmost:N``."""
        name, _, number = text.strip().lower().partition(":")
        try:
            tag = ConstraintTag(name)
        except ValueError:
            raise ValueError(f"unknown dimension constraint '{text}'")
        if number:
            if not number.isdigit():
                raise ValueError(f"dimension must be a natural number, got '{number}'")
            return cls(tag, int(number))
        return cls(tag)

    def __str__(self) -> str:
        return self.tag.value if self.n is None else f"{self.tag.value}:{self.n}"


ANY = DimensionConstraint(ConstraintTag.ANY)
FINITE = DimensionConstraint(ConstraintTag.FINITE)
INFINITE = DimensionConstraint(ConstraintTag.INFINITE)


@dataclass(frozen=True)
class DimensionSet:
    """Dimensions where a sentence holds: a finite set, or the complement of one (then infinite dimension is included)."""

    cofinite: bool
    base: FrozenSet[int] = field(default_factory=frozenset)

    def contains(self, n: Optional[int]) -> bool:
        if n is None:
            return self.cofinite
        return (n not in self.base) if self.cofinite else (n in self.base)

    def is_empty(self) -> bool:
        return not self.cofinite and not self.base

    def describe(self) -> str:
        listed = "{" + ", ".join(str(n) for n in sorted(self.base)) + "}"
        if self.cofinite:
            return "all dimensions" if not self.base else f"cofinite, excluding {listed}"
        return f"finite {listed}"


# ---------- Standard form ----------
def _mul(c, d):
    if c == ONE:
        return d
    if d == ONE:
        return c
    return ScalarMul(c, d)


def _lincomb(t) -> Dict[str, object]:
    if isinstance(t, VectorVar):
        return {t.name: ONE}
    if isinstance(t, ZeroVector):
        return {}
    if isinstance(t, VectorAdd):
        out = dict(_lincomb(t.left))
        for name, c in _lincomb(t.right).items():
            out[name] = ScalarAdd(out[name], c) if name in out else c
        return out
    if isinstance(t, VectorNeg):
        return {name: ScalarNeg(c) for name, c in _lincomb(t.arg).items()}
    if isinstance(t, ScalarVectorMul):
        s = _standard_scalar(t.scalar)
        return {name: _mul(s, c) for name, c in _lincomb(t.vector).items()}
    raise LanguageError(f"not a vector term: {type(t).__name__}")


def _bilinear(a, b):
    grouped: Dict[Tuple[str, str], object] = {}
    for u, c in _lincomb(a).items():
        for w, d in _lincomb(b).items():
            pair = tuple(sorted((u, w)))
            coeff = _mul(c, d)
            grouped[pair] = ScalarAdd(grouped[pair], coeff) if pair in grouped else coeff
    return scalar_sum([_mul(c, Inner(VectorVar(u), VectorVar(w))) for (u, w), c in grouped.items()])


def _is_norm_square(t) -> bool:
    return isinstance(t, ScalarMul) and isinstance(t.left, Norm) and isinstance(t.right, Norm) and t.left.arg == t.right.arg


def _standard_scalar(t):
    if isinstance(t, Inner):
        return _bilinear(t.left, t.right)
    if _is_norm_square(t):
        return _bilinear(t.left.arg, t.left.arg)
    if isinstance(t, (Norm, Dist)):
        raise LanguageError(f"{type(t).__name__.lower()} is not part of the inner product language")
    if isinstance(t, ScalarAdd):
        return ScalarAdd(_standard_scalar(t.left), _standard_scalar(t.right))
    if isinstance(t, ScalarMul):
        return ScalarMul(_standard_scalar(t.left), _standard_scalar(t.right))
    if isinstance(t, ScalarNeg):
        return ScalarNeg(_standard_scalar(t.arg))
    return t


def standard_form(f):
    """Equivalent formula whose only vector terms are variables directly under ``inner``."""

    def on_atom(a):
        if isinstance(a, Member):
            raise LanguageError("set membership is not part of the inner product language")
        if not isinstance(a, Atom):
            return a
        if term_sort(a.lhs) == Sort.VECTOR:
            diff = VectorAdd(a.lhs, VectorNeg(a.rhs))
            return Atom("=", _bilinear(diff, diff), ZERO)
        return Atom(a.op, _standard_scalar(a.lhs), _standard_scalar(a.rhs))

    return map_atoms(f, on_atom)


def is_standard(f) -> bool:
    """Every vector subterm is a variable whose parent is ``inner``."""
    for t in iter_formula_subterms(f):
        kids = term_children(t)
        if isinstance(t, Inner):
            if not all(isinstance(k, VectorVar) for k in kids):
                return False
        elif any(term_sort(k) == Sort.VECTOR for k in kids):
            return False
    return True


# ---------- Coordinates in R^n ----------
class _Coordinates:
    def __init__(self, n: int, used):
        self.n = n
        self.used = set(used)
        self.coords: Dict[str, List[object]] = {}

    def introduce(self, name: str, width: int) -> List[str]:
        """Coordinate names for the first ``width`` axes; the remaining coordinates are 0."""
        names = []
        for i in range(1, width + 1):
            fresh = fresh_name(f"{name}__{i}", self.used)
            self.used.add(fresh)
            names.append(fresh)
        self.coords[name] = [ScalarVar(c) for c in names] + [ZERO] * (self.n - width)
        return names

    def vector(self, t) -> List[object]:
        if isinstance(t, VectorVar):
            return list(self.coords[t.name])
        if isinstance(t, ZeroVector):
            return [ZERO] * self.n
        if isinstance(t, VectorAdd):
            return [ScalarAdd(a, b) for a, b in zip(self.vector(t.left), self.vector(t.right))]
        if isinstance(t, VectorNeg):
            return [ScalarNeg(a) for a in self.vector(t.arg)]
        if isinstance(t, ScalarVectorMul):
            s = self.scalar(t.scalar)
            return [ScalarMul(s, a) for a in self.vector(t.vector)]
        raise LanguageError(f"not a vector term: {type(t).__name__}")

    def dot(self, a, b):
        return scalar_sum([ScalarMul(x, y) for x, y in zip(self.vector(a), self.vector(b)) if ZERO not in (x, y)])

    def scalar(self, t):
        if isinstance(t, Inner):
            return self.dot(t.left, t.right)
        if _is_norm_square(t):
            return self.dot(t.left.arg, t.left.arg)
        if isinstance(t, (Norm, Dist)):
            raise LanguageError(f"{type(t).__name__.lower()} is not part of the inner product language")
        if isinstance(t, (ScalarAdd, ScalarMul)):
            return type(t)(self.scalar(t.left), self.scalar(t.right))
        if isinstance(t, ScalarNeg):
            return ScalarNeg(self.scalar(t.arg))
        return t


def res(p, n: int, *, triangular: bool = True):
    """Real-field formula true exactly when ``p`` holds in R^n.

    With ``triangular`` and no free vector variables, a vector quantifier with m vector
    variables in scope ranges over the span of the first m + 1 axes only. Rotations
    fixing the vectors in scope preserve every inner product, so the quantifier can
    rotate its witness into that span; k vectors then cost at most k(k+1)/2 reals.
    """
    if n < 0:
        raise ValueError("dimension must be >= 0")
    p = rename_apart(p)
    space = _Coordinates(n, all_names(p))
    free_vectors = [name for name, sort in sorted(free_variables(p).items()) if sort == Sort.VECTOR]
    for name in free_vectors:
        space.introduce(name, n)

    def on_atom(a):
        if isinstance(a, Member):
            raise LanguageError("set membership is not part of the inner product language")
        if not isinstance(a, Atom):
            return a
        if term_sort(a.lhs) == Sort.VECTOR:
            pairs = zip(space.vector(a.lhs), space.vector(a.rhs))
            return conj(Atom("=", x, y) for x, y in pairs if (x, y) != (ZERO, ZERO))
        return Atom(a.op, space.scalar(a.lhs), space.scalar(a.rhs))

    def walk(f, spanned: Optional[int]):
        if isinstance(f, QUANTIFIERS):
            if f.sort == Sort.VECTOR:
                width = n if spanned is None else min(spanned + 1, n)
                names = space.introduce(f.var, width)
                inner = None if spanned is None else width
                return quantify(type(f), [(c, Sort.SCALAR) for c in names], walk(f.body, inner))
            return type(f)(f.var, f.sort, walk(f.body, spanned))
        if isinstance(f, Not):
            return Not(walk(f.arg, spanned))
        if isinstance(f, BINARY_CONNECTIVES):
            return type(f)(walk(f.left, spanned), walk(f.right, spanned))
        return on_atom(f)

    return walk(p, 0 if triangular and not free_vectors else None)


# ---------- Dimension sentences ----------
def dim_le_sentence(n: int):
    """There is a spanning set of at most n vectors."""
    if n < 0:
        raise ValueError("dimension must be >= 0")
    if n == 0:
        return Forall("w", Sort.VECTOR, Atom("=", VectorVar("w"), ZeroVector()))
    span = vector_sum([ScalarVectorMul(ScalarVar(f"a{i}"), VectorVar(f"v{i}")) for i in range(1, n + 1)])
    body = quantify(Exists, [(f"a{i}", Sort.SCALAR) for i in range(1, n + 1)], Atom("=", span, VectorVar("w")))
    return quantify(Exists, [(f"v{i}", Sort.VECTOR) for i in range(1, n + 1)], Forall("w", Sort.VECTOR, body))


def dim_eq_sentence(n: int):
    if n == 0:
        return dim_le_sentence(0)
    return And(dim_le_sentence(n), Not(dim_le_sentence(n - 1)))


def star(p):
    """Sentence equivalent to ``p`` in every theory here, with vector quantifiers only in dimension statements."""
    k = count_vector_vars(p)
    if k == 0:
        return res(p, 0)
    cases = [And(dim_eq_sentence(i), res(p, i)) for i in range(k)]
    cases.append(And(Not(dim_le_sentence(k - 1)), res(p, k)))
    return disj(cases)


# ---------- Decisions ----------
def dimension_set(p, *, jobs: Optional[int] = None, budget: Optional[int] = None) -> DimensionSet:
    """Dimensions of the inner product spaces in which ``p`` holds."""
    if not is_sentence(p):
        raise LanguageError("dimension_set expects a sentence")
    jobs = jobs or get_settings().jobs
    k = count_vector_vars(p)
    sentences = [res(p, i) for i in range(k + 1)]

    def holds(sentence) -> bool:
        return decide(sentence, budget=budget) == Status.VALID

    if jobs > 1 and len(sentences) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            truths = list(pool.map(holds, sentences))
    else:
        truths = [holds(s) for s in sentences]
    logger.debug(f"dimension truths up to {k}: {truths}")
    if truths[k]:
        return DimensionSet(True, frozenset(i for i in range(k) if not truths[i]))
    return DimensionSet(False, frozenset(i for i in range(k) if truths[i]))


def satisfies_constraint(dims: DimensionSet, c: DimensionConstraint) -> bool:
    """Every dimension allowed by ``c`` lies in ``dims``."""
    if c.tag in (ConstraintTag.ANY, ConstraintTag.FINITE):
        return dims.cofinite and not dims.base
    if c.tag == ConstraintTag.INFINITE:
        return dims.cofinite
    if c.tag == ConstraintTag.EXACTLY:
        return dims.contains(c.n)
    return all(dims.contains(i) for i in range(c.n + 1))


@performance_monitor("ip_decide")
@error_handler
def decide_ip(p, c: DimensionConstraint = ANY, *, jobs: Optional[int] = None, budget: Optional[int] = None) -> Status:
    """Validity of ``p`` over inner product spaces (equivalently Hilbert spaces) allowed by ``c``."""
    dims = dimension_set(p, jobs=jobs, budget=budget)
    logger.info(f"dimension set: {dims.describe()}")
    return Status.VALID if satisfies_constraint(dims, c) else Status.INVALID


# ---------- Special formulas ----------
@dataclass(frozen=True)
class SpecialFormula:
    """``exists x_ij. (x_ij = inner(v_i, v_j) for i <= j) & core`` with a vector-free core."""

    vectors: Tuple[str, ...]
    gram: Dict[Tuple[str, str], str]
    core: object

    def to_formula(self):
        if not self.gram:
            return self.core
        pairs = sorted(self.gram)
        definitions = conj(Atom("=", ScalarVar(self.gram[pair]), Inner(VectorVar(pair[0]), VectorVar(pair[1]))) for pair in pairs)
        return quantify(Exists, [(self.gram[pair], Sort.SCALAR) for pair in pairs], And(definitions, self.core))


class _SpecialBuilder:
    def __init__(self, used):
        self.used = set(used)
        self.names: Dict[Tuple[str, str], str] = {}

    def fresh(self, base: str) -> str:
        name = fresh_name(base, self.used)
        self.used.add(name)
        return name

    def gram_var(self, u: str, w: str) -> ScalarVar:
        pair = tuple(sorted((u, w)))
        if pair not in self.names:
            self.names[pair] = self.fresh(f"x_{pair[0]}_{pair[1]}")
        return ScalarVar(self.names[pair])

    def abstract(self, t):
        if isinstance(t, Inner):
            return self.gram_var(t.left.name, t.right.name)
        kids = term_children(t)
        if not kids:
            return t
        return type(t)(*[self.abstract(k) for k in kids])

    def build(self, f) -> Tuple[FrozenSet[str], object]:
        """Free vector variables of ``f`` and the core over their Gram variables."""
        if isinstance(f, (Atom, Top, Bottom, Member)):
            std = standard_form(f)
            vectors = frozenset(n for n, s in free_variables(f).items() if s == Sort.VECTOR)
            return vectors, map_atoms(std, lambda a: Atom(a.op, self.abstract(a.lhs), self.abstract(a.rhs)) if isinstance(a, Atom) else a)
        if isinstance(f, Not):
            vectors, core = self.build(f.arg)
            return vectors, Not(core)
        if isinstance(f, BINARY_CONNECTIVES):
            va, ca = self.build(f.left)
            vb, cb = self.build(f.right)
            return va | vb, type(f)(ca, cb)
        if isinstance(f, QUANTIFIERS) and f.sort != Sort.VECTOR:
            vectors, core = self.build(f.body)
            return vectors, type(f)(f.var, f.sort, core)
        if isinstance(f, Forall):
            vectors, core = self.build(Not(Exists(f.var, f.sort, Not(f.body))))
            return vectors, core
        vectors, core = self.build(f.body)
        if f.var not in vectors:
            return vectors, core
        return vectors - {f.var}, self.eliminate(f.var, sorted(vectors - {f.var}), core)

    def eliminate(self, v: str, others: Sequence[str], core):
        # v = sum(y_j v_j) + y u with u a unit vector orthogonal to the others
        y = self.fresh(f"y_{v}")
        ys = {w: self.fresh(f"y_{v}_{w}") for w in others}
        mapping = {}
        for w in others:
            mapping[self.gram_var(w, v).name] = scalar_sum([ScalarMul(ScalarVar(ys[u]), self.gram_var(u, w)) for u in others])
        square = [ScalarMul(ScalarVar(y), ScalarVar(y))]
        for u in others:
            for w in others:
                square.append(ScalarMul(ScalarMul(ScalarVar(ys[u]), ScalarVar(ys[w])), self.gram_var(u, w)))
        mapping[self.gram_var(v, v).name] = scalar_sum(square)
        for pair in [pair for pair in self.names if v in pair]:
            del self.names[pair]
        binders = [(y, Sort.SCALAR)] + [(ys[w], Sort.SCALAR) for w in others]
        return quantify(Exists, binders, substitute(core, mapping))


def special_form(p) -> SpecialFormula:
    """Special form of an inner-product formula; equivalent to it in infinite-dimensional spaces."""
    p = rename_apart(p)
    builder = _SpecialBuilder(all_names(p))
    vectors, core = builder.build(p)
    gram = {pair: name for pair, name in builder.names.items() if pair[0] in vectors and pair[1] in vectors}
    return SpecialFormula(tuple(sorted(vectors)), gram, core)


# ---------- Polarization ----------
HALF = const("1/2")


def _polarized_inner(a, b):
    def square(t):
        return ScalarMul(Norm(t), Norm(t))

    total = ScalarAdd(ScalarAdd(square(VectorAdd(a, b)), ScalarNeg(square(a))), ScalarNeg(square(b)))
    return ScalarMul(HALF, total)


def _polarize_term(t):
    if isinstance(t, Inner):
        return _polarized_inner(_polarize_term(t.left), _polarize_term(t.right))
    kids = term_children(t)
    if not kids:
        return t
    return type(t)(*[_polarize_term(k) for k in kids])


def _polarize_formula(f):
    return map_atoms(f, lambda a: Atom(a.op, _polarize_term(a.lhs), _polarize_term(a.rhs)) if isinstance(a, Atom) else a)


def polarize(p):
    """Normed-space sentence valid in all normed spaces iff ``p`` is valid in all inner product spaces."""
    axioms = conj(_polarize_formula(parse(text)) for text in INNER_PRODUCT_AXIOMS)
    return Implies(axioms, _polarize_formula(p))
