"""Two-sorted formula trees and the structural operations shared by every decision procedure.

Terms and formulas are immutable dataclasses. Scalars (sort R) are real numbers,
vectors (sort V) are elements of a vector, inner product, normed or metric space.
Rational constants are kept as exact ``Fraction`` values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union


# ---------- Errors ----------
class EagError(Exception):
    """Base class for every error raised by the toolkit."""


class FormulaSyntaxError(EagError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class SortError(EagError):
    def __init__(self, message: str, subterm: str = ""):
        text = f"{message}: {subterm}" if subterm else message
        super().__init__(text)
        self.subterm = subterm


class LanguageError(EagError):
    """A symbol outside the language accepted by a procedure."""


class MissingVariableError(EagError):
    def __init__(self, name: str):
        super().__init__(f"no value for variable '{name}'")
        self.name = name


class ArityError(EagError):
    """A defining formula was instantiated with the wrong number of arguments."""


# ---------- Sorts and verdicts ----------
class Sort(Enum):
    SCALAR = "R"
    VECTOR = "V"


class ArithSort(Enum):
    """Sorts of second-order arithmetic input: numbers and sets of numbers."""

    NAT = "N"
    SET = "P"


class Status(str, Enum):
    VALID = "Valid"
    INVALID = "Invalid"
    SATISFIABLE = "Satisfiable"
    UNSATISFIABLE = "Unsatisfiable"
    UNSUPPORTED = "Unsupported"
    BUDGET = "Budget"


# ---------- Terms ----------
@dataclass(frozen=True)
class RationalConst:
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class ScalarVar:
    name: str


@dataclass(frozen=True)
class VectorVar:
    name: str


@dataclass(frozen=True)
class ZeroVector:
    pass


@dataclass(frozen=True)
class ScalarAdd:
    left: Any
    right: Any


@dataclass(frozen=True)
class ScalarNeg:
    arg: Any


@dataclass(frozen=True)
class ScalarMul:
    left: Any
    right: Any


@dataclass(frozen=True)
class VectorAdd:
    left: Any
    right: Any


@dataclass(frozen=True)
class VectorNeg:
    arg: Any


@dataclass(frozen=True)
class ScalarVectorMul:
    scalar: Any
    vector: Any


@dataclass(frozen=True)
class Inner:
    left: Any
    right: Any


@dataclass(frozen=True)
class Norm:
    arg: Any


@dataclass(frozen=True)
class Dist:
    left: Any
    right: Any


Term = Union[
    RationalConst, ScalarVar, VectorVar, ZeroVector, ScalarAdd, ScalarNeg, ScalarMul,
    VectorAdd, VectorNeg, ScalarVectorMul, Inner, Norm, Dist,
]

SCALAR_TERMS = (RationalConst, ScalarVar, ScalarAdd, ScalarNeg, ScalarMul, Inner, Norm, Dist)
VECTOR_TERMS = (VectorVar, ZeroVector, VectorAdd, VectorNeg, ScalarVectorMul)


# ---------- Formulas ----------
RELATIONS = ("=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Atom:
    op: str
    lhs: Any
    rhs: Any


@dataclass(frozen=True)
class Member:
    """``element in set_name`` of second-order arithmetic."""

    element: Any
    set_name: str


@dataclass(frozen=True)
class Not:
    arg: Any


@dataclass(frozen=True)
class And:
    left: Any
    right: Any


@dataclass(frozen=True)
class Or:
    left: Any
    right: Any


@dataclass(frozen=True)
class Implies:
    left: Any
    right: Any


@dataclass(frozen=True)
class Iff:
    left: Any
    right: Any


@dataclass(frozen=True)
class Forall:
    var: str
    sort: Any
    body: Any


@dataclass(frozen=True)
class Exists:
    var: str
    sort: Any
    body: Any


Formula = Union[Top, Bottom, Atom, Member, Not, And, Or, Implies, Iff, Forall, Exists]
QUANTIFIERS = (Forall, Exists)
BINARY_CONNECTIVES = (And, Or, Implies, Iff)


def const(value) -> RationalConst:
    return RationalConst(Fraction(value))


ZERO = RationalConst(Fraction(0))
ONE = RationalConst(Fraction(1))


def conj(items: Iterable) -> Any:
    """Left-associated conjunction; the empty conjunction is ``Top``."""
    out = None
    for item in items:
        out = item if out is None else And(out, item)
    return Top() if out is None else out


def disj(items: Iterable) -> Any:
    out = None
    for item in items:
        out = item if out is None else Or(out, item)
    return Bottom() if out is None else out


def conjuncts(f) -> List[Any]:
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def disjuncts(f) -> List[Any]:
    if isinstance(f, Or):
        return disjuncts(f.left) + disjuncts(f.right)
    return [f]


def quantify(kind, binders: Sequence[Tuple[str, Any]], body) -> Any:
    for name, sort in reversed(list(binders)):
        body = kind(name, sort, body)
    return body


def scalar_sum(terms: Sequence[Any]) -> Any:
    out = None
    for t in terms:
        out = t if out is None else ScalarAdd(out, t)
    return ZERO if out is None else out


def vector_sum(terms: Sequence[Any]) -> Any:
    out = None
    for t in terms:
        out = t if out is None else VectorAdd(out, t)
    return ZeroVector() if out is None else out


def term_sort(t) -> Sort:
    if isinstance(t, SCALAR_TERMS):
        return Sort.SCALAR
    if isinstance(t, VECTOR_TERMS):
        return Sort.VECTOR
    raise SortError("not a term", repr(t))


def expand_abs(s, build: Callable[[Any], Any]) -> Any:
    """``P(|s|)`` as ``s >= 0 & P(s) | s < 0 & P(-s)``."""
    return Or(
        And(Atom(">=", s, ZERO), build(s)),
        And(Atom("<", s, ZERO), build(ScalarNeg(s))),
    )


# ---------- Traversal ----------
def term_children(t) -> Tuple[Any, ...]:
    if isinstance(t, (ScalarAdd, ScalarMul, VectorAdd, Inner, Dist)):
        return (t.left, t.right)
    if isinstance(t, (ScalarNeg, VectorNeg, Norm)):
        return (t.arg,)
    if isinstance(t, ScalarVectorMul):
        return (t.scalar, t.vector)
    return ()


def rebuild_term(t, children: Sequence[Any]):
    if isinstance(t, (ScalarAdd, ScalarMul, VectorAdd, Inner, Dist)):
        return type(t)(children[0], children[1])
    if isinstance(t, (ScalarNeg, VectorNeg, Norm)):
        return type(t)(children[0])
    if isinstance(t, ScalarVectorMul):
        return ScalarVectorMul(children[0], children[1])
    return t


def map_term(t, fn: Callable[[Any], Any]):
    """Bottom-up rewrite of a term: children first, then ``fn`` on the rebuilt node."""
    kids = term_children(t)
    if kids:
        t = rebuild_term(t, [map_term(k, fn) for k in kids])
    return fn(t)


def iter_subterms(t):
    yield t
    for k in term_children(t):
        yield from iter_subterms(k)


def formula_terms(f) -> List[Any]:
    if isinstance(f, Atom):
        return [f.lhs, f.rhs]
    if isinstance(f, Member):
        return [f.element]
    return []


def map_atoms(f, fn: Callable[[Any], Any]):
    """Rewrite every atomic formula (Atom, Member, Top, Bottom) with ``fn``."""
    if isinstance(f, (Atom, Member, Top, Bottom)):
        return fn(f)
    if isinstance(f, Not):
        return Not(map_atoms(f.arg, fn))
    if isinstance(f, BINARY_CONNECTIVES):
        return type(f)(map_atoms(f.left, fn), map_atoms(f.right, fn))
    if isinstance(f, QUANTIFIERS):
        return type(f)(f.var, f.sort, map_atoms(f.body, fn))
    raise TypeError(f"not a formula: {f!r}")


def map_formula_terms(f, fn: Callable[[Any], Any]):
    def on_atom(a):
        if isinstance(a, Atom):
            return Atom(a.op, map_term(a.lhs, fn), map_term(a.rhs, fn))
        if isinstance(a, Member):
            return Member(map_term(a.element, fn), a.set_name)
        return a

    return map_atoms(f, on_atom)


def iter_formula_subterms(f):
    if isinstance(f, (Atom, Member)):
        for t in formula_terms(f):
            yield from iter_subterms(t)
    elif isinstance(f, Not):
        yield from iter_formula_subterms(f.arg)
    elif isinstance(f, BINARY_CONNECTIVES):
        yield from iter_formula_subterms(f.left)
        yield from iter_formula_subterms(f.right)
    elif isinstance(f, QUANTIFIERS):
        yield from iter_formula_subterms(f.body)


def is_quantifier_free(f) -> bool:
    if isinstance(f, QUANTIFIERS):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, BINARY_CONNECTIVES):
        return is_quantifier_free(f.left) and is_quantifier_free(f.right)
    return True


def _var_sort(t) -> Optional[Tuple[str, Sort]]:
    if isinstance(t, ScalarVar):
        return t.name, Sort.SCALAR
    if isinstance(t, VectorVar):
        return t.name, Sort.VECTOR
    return None


def term_variables(t) -> Dict[str, Sort]:
    out: Dict[str, Sort] = {}
    for sub in iter_subterms(t):
        hit = _var_sort(sub)
        if hit:
            out[hit[0]] = hit[1]
    return out


def free_variables(f) -> Dict[str, Any]:
    """Free variable names mapped to their sort."""
    if isinstance(f, (Atom, Member)):
        out: Dict[str, Any] = {}
        for t in formula_terms(f):
            out.update(term_variables(t))
        if isinstance(f, Member):
            out[f.set_name] = ArithSort.SET
        return out
    if isinstance(f, (Top, Bottom)):
        return {}
    if isinstance(f, Not):
        return free_variables(f.arg)
    if isinstance(f, BINARY_CONNECTIVES):
        out = free_variables(f.left)
        out.update(free_variables(f.right))
        return out
    if isinstance(f, QUANTIFIERS):
        out = free_variables(f.body)
        out.pop(f.var, None)
        return out
    raise TypeError(f"not a formula: {f!r}")


def is_sentence(f) -> bool:
    return not free_variables(f)


def all_names(f) -> Set[str]:
    """Every variable name in ``f``, free or bound."""
    names = set(free_variables(f))
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, QUANTIFIERS):
            names.add(g.var)
            stack.append(g.body)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, BINARY_CONNECTIVES):
            stack.extend([g.left, g.right])
    return names


def fresh_name(base: str, used: Set[str]) -> str:
    if base not in used:
        return base
    i = 1
    while f"{base}_{i}" in used:
        i += 1
    return f"{base}_{i}"


def make_var(name: str, sort) -> Any:
    return VectorVar(name) if sort == Sort.VECTOR else ScalarVar(name)


def substitute_term(t, mapping: Dict[str, Any]):
    def fn(node):
        hit = _var_sort(node)
        if hit and hit[0] in mapping:
            return mapping[hit[0]]
        return node

    return map_term(t, fn)


def substitute(f, mapping: Dict[str, Any]):
    """Capture-avoiding substitution of terms for free variables."""
    if not mapping:
        return f
    if isinstance(f, Atom):
        return Atom(f.op, substitute_term(f.lhs, mapping), substitute_term(f.rhs, mapping))
    if isinstance(f, Member):
        set_name = f.set_name
        target = mapping.get(set_name)
        if isinstance(target, ScalarVar):
            set_name = target.name
        return Member(substitute_term(f.element, mapping), set_name)
    if isinstance(f, (Top, Bottom)):
        return f
    if isinstance(f, Not):
        return Not(substitute(f.arg, mapping))
    if isinstance(f, BINARY_CONNECTIVES):
        return type(f)(substitute(f.left, mapping), substitute(f.right, mapping))
    if isinstance(f, QUANTIFIERS):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        if not inner:
            return f
        incoming: Set[str] = set()
        for k, v in inner.items():
            if k in free_variables(f.body):
                incoming.update(term_variables(v))
        var, body = f.var, f.body
        if var in incoming:
            new = fresh_name(var, incoming | all_names(body) | set(inner))
            body = substitute(body, {var: make_var(new, f.sort)})
            var = new
        return type(f)(var, f.sort, substitute(body, inner))
    raise TypeError(f"not a formula: {f!r}")


def count_vector_vars(f) -> int:
    """Distinct vector variable names anywhere in ``f``, ignoring binding structure."""
    names: Set[str] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, QUANTIFIERS):
            if g.sort == Sort.VECTOR:
                names.add(g.var)
            stack.append(g.body)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, BINARY_CONNECTIVES):
            stack.extend([g.left, g.right])
        elif isinstance(g, (Atom, Member)):
            for t in formula_terms(g):
                names.update(n for n, s in term_variables(t).items() if s == Sort.VECTOR)
    return len(names)


def has_vectors(f) -> bool:
    if any(isinstance(t, VECTOR_TERMS) for t in iter_formula_subterms(f)):
        return True
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, QUANTIFIERS):
            if g.sort == Sort.VECTOR:
                return True
            stack.append(g.body)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, BINARY_CONNECTIVES):
            stack.extend([g.left, g.right])
    return False


# ---------- Printing ----------
_SUM, _PROD, _UNARY = 1, 2, 3
_IFF, _IMP, _OR, _AND, _NOT = 1, 2, 3, 4, 5


def _wrap(text: str, needed: bool) -> str:
    return f"({text})" if needed else text


def print_term(t, prec: int = 0) -> str:
    if isinstance(t, RationalConst):
        return str(t.value)
    if isinstance(t, (ScalarVar, VectorVar)):
        return t.name
    if isinstance(t, ZeroVector):
        return "0v"
    if isinstance(t, Inner):
        return f"inner({print_term(t.left)}, {print_term(t.right)})"
    if isinstance(t, Norm):
        return f"norm({print_term(t.arg)})"
    if isinstance(t, Dist):
        return f"d({print_term(t.left)}, {print_term(t.right)})"
    if isinstance(t, (ScalarAdd, VectorAdd)):
        neg = ScalarNeg if isinstance(t, ScalarAdd) else VectorNeg
        if isinstance(t.right, neg):
            text = f"{print_term(t.left, _SUM)} - {print_term(t.right.arg, _PROD)}"
        else:
            text = f"{print_term(t.left, _SUM)} + {print_term(t.right, _PROD)}"
        return _wrap(text, prec > _SUM)
    if isinstance(t, (ScalarMul, ScalarVectorMul)):
        left, right = (t.left, t.right) if isinstance(t, ScalarMul) else (t.scalar, t.vector)
        return _wrap(f"{print_term(left, _PROD)} * {print_term(right, _UNARY)}", prec > _PROD)
    if isinstance(t, (ScalarNeg, VectorNeg)):
        if isinstance(t.arg, RationalConst):
            # a bare "-3" would read back as a negative constant
            return f"-({print_term(t.arg)})"
        return f"-{print_term(t.arg, _UNARY)}"
    raise TypeError(f"not a term: {t!r}")


def _binder_block(f) -> Tuple[List[str], Any]:
    kind = type(f)
    binders = []
    while isinstance(f, kind):
        binders.append(f"{f.var}:{f.sort.value}")
        f = f.body
    return binders, f


def print_formula(f, prec: int = 0) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Atom):
        return f"{print_term(f.lhs)} {f.op} {print_term(f.rhs)}"
    if isinstance(f, Member):
        return f"{print_term(f.element, _UNARY)} in {f.set_name}"
    if isinstance(f, QUANTIFIERS):
        binders, body = _binder_block(f)
        word = "forall" if isinstance(f, Forall) else "exists"
        return _wrap(f"{word} {', '.join(binders)}. {print_formula(body, 0)}", prec > 0)
    if isinstance(f, Not):
        return f"~{print_formula(f.arg, _NOT)}"
    if isinstance(f, And):
        return _wrap(f"{print_formula(f.left, _AND)} & {print_formula(f.right, _NOT)}", prec > _AND)
    if isinstance(f, Or):
        return _wrap(f"{print_formula(f.left, _OR)} | {print_formula(f.right, _AND)}", prec > _OR)
    if isinstance(f, Implies):
        return _wrap(f"{print_formula(f.left, _OR)} -> {print_formula(f.right, _IMP)}", prec > _IMP)
    if isinstance(f, Iff):
        return _wrap(f"{print_formula(f.left, _IMP)} <-> {print_formula(f.right, _IMP)}", prec > _IFF)
    raise TypeError(f"not a formula: {f!r}")


# ---------- Prenex normal form ----------
def expand_iff(f):
    if isinstance(f, Iff):
        a, b = expand_iff(f.left), expand_iff(f.right)
        return And(Implies(a, b), Implies(b, a))
    if isinstance(f, Not):
        return Not(expand_iff(f.arg))
    if isinstance(f, BINARY_CONNECTIVES):
        return type(f)(expand_iff(f.left), expand_iff(f.right))
    if isinstance(f, QUANTIFIERS):
        return type(f)(f.var, f.sort, expand_iff(f.body))
    return f


def rename_apart(f):
    """Rename bound variables that clash with a free name or an earlier binder."""
    seen = set(free_variables(f))
    names = all_names(f)

    def walk(g):
        if isinstance(g, QUANTIFIERS):
            var, body = g.var, g.body
            if var in seen:
                new = fresh_name(var, seen | names)
                body = substitute(body, {var: make_var(new, g.sort)})
                var = new
            seen.add(var)
            names.add(var)
            return type(g)(var, g.sort, walk(body))
        if isinstance(g, Not):
            return Not(walk(g.arg))
        if isinstance(g, BINARY_CONNECTIVES):
            left = walk(g.left)
            return type(g)(left, walk(g.right))
        return g

    return walk(f)


def _flip(prefix):
    return [(Exists if kind is Forall else Forall, v, s) for kind, v, s in prefix]


def _merge_prefixes(left, right, prefer):
    left, right, out = list(left), list(right), []
    kind = Forall if prefer == "forall" else Exists
    while left or right:
        while left and left[0][0] is kind:
            out.append(left.pop(0))
        while right and right[0][0] is kind:
            out.append(right.pop(0))
        kind = Exists if kind is Forall else Forall
    return out


def _pull(f, prefer):
    if isinstance(f, Not):
        prefix, m = _pull(f.arg, prefer)
        return _flip(prefix), Not(m)
    if isinstance(f, (And, Or)):
        pa, ma = _pull(f.left, prefer)
        pb, mb = _pull(f.right, prefer)
        return _merge_prefixes(pa, pb, prefer), type(f)(ma, mb)
    if isinstance(f, Implies):
        pa, ma = _pull(f.left, prefer)
        pb, mb = _pull(f.right, prefer)
        return _merge_prefixes(_flip(pa), pb, prefer), Implies(ma, mb)
    if isinstance(f, QUANTIFIERS):
        prefix, m = _pull(f.body, prefer)
        return [(type(f), f.var, f.sort)] + prefix, m
    return [], f


def split_prefix(f) -> Tuple[List[Tuple[Any, str, Any]], Any]:
    prefix = []
    while isinstance(f, QUANTIFIERS):
        prefix.append((type(f), f.var, f.sort))
        f = f.body
    return prefix, f


def wrap_prefix(prefix, matrix):
    for kind, var, sort in reversed(prefix):
        matrix = kind(var, sort, matrix)
    return matrix


def prenex(f, prefer: str = "forall"):
    """Equivalent formula with every quantifier leading.

    ``prefer`` picks which quantifier kind is pulled out first when the prefixes of
    two independent subformulas are merged; order inside each prefix is kept.
    """
    if prefer not in ("forall", "exists"):
        raise ValueError("prefer must be 'forall' or 'exists'")
    f = rename_apart(expand_iff(f))
    prefix, matrix = _pull(f, prefer)
    return wrap_prefix(prefix, matrix)


# ---------- Fragment classification ----------
class Shape(str, Enum):
    PURELY_UNIVERSAL = "purely-universal"
    PURELY_EXISTENTIAL = "purely-existential"
    AE_P = "AEp"
    EA_P = "EAp"
    A_IMP_A = "AimpA"
    GENERAL = "general"


@dataclass(frozen=True)
class FragmentClass:
    shape: Shape
    additive: bool
    vector_var_count: int
    point_universal_count: int
    point_existential_count: int

    def describe(self) -> str:
        additive = "additive" if self.additive else "non-additive"
        return f"{self.shape.value}, {additive}, k={self.vector_var_count}"


def is_ae_prefix(prefix) -> bool:
    """No universal vector quantifier inside the scope of an existential."""
    seen_exists = False
    for kind, _, sort in prefix:
        if kind is Exists:
            seen_exists = True
        elif sort == Sort.VECTOR and seen_exists:
            return False
    return True


def is_ea_prefix(prefix) -> bool:
    """No existential vector quantifier inside the scope of a universal."""
    seen_forall = False
    for kind, _, sort in prefix:
        if kind is Forall:
            seen_forall = True
        elif sort == Sort.VECTOR and seen_forall:
            return False
    return True


def is_purely_universal(f) -> bool:
    prefix, _ = split_prefix(prenex(f))
    return all(kind is Forall for kind, _, _ in prefix)


def classify_fragment(f) -> FragmentClass:
    prefix, _ = split_prefix(prenex(f))
    kinds = [kind for kind, _, _ in prefix]
    if Exists not in kinds:
        shape = Shape.PURELY_UNIVERSAL
    elif Forall not in kinds:
        shape = Shape.PURELY_EXISTENTIAL
    elif isinstance(f, Implies) and is_purely_universal(f.left) and is_purely_universal(f.right):
        shape = Shape.A_IMP_A
    else:
        ae, ea = is_ae_prefix(prefix), is_ea_prefix(prefix)
        if ae and ea:
            point_first = any(
                kind is Exists and sort == Sort.VECTOR and Forall in kinds[i + 1:]
                for i, (kind, _, sort) in enumerate(prefix)
            )
            shape = Shape.EA_P if point_first else Shape.AE_P
        elif ae:
            shape = Shape.AE_P
        elif ea:
            shape = Shape.EA_P
        else:
            shape = Shape.GENERAL
    return FragmentClass(
        shape=shape,
        additive=is_additive(f),
        vector_var_count=count_vector_vars(f),
        point_universal_count=sum(1 for k, _, s in prefix if k is Forall and s == Sort.VECTOR),
        point_existential_count=sum(1 for k, _, s in prefix if k is Exists and s == Sort.VECTOR),
    )


def is_constant_term(t) -> bool:
    """Closed term built from rational constants and the zero vector only."""
    return all(
        isinstance(s, (RationalConst, ZeroVector, ScalarAdd, ScalarNeg, ScalarMul, VectorAdd, VectorNeg, ScalarVectorMul))
        for s in iter_subterms(t)
    )


def is_additive(f) -> bool:
    for t in iter_formula_subterms(f):
        if isinstance(t, ScalarMul) and not is_constant_term(t.left):
            return False
        if isinstance(t, ScalarVectorMul) and not is_constant_term(t.scalar):
            return False
        if isinstance(t, Inner) and not is_constant_term(t.left):
            return False
    return True


# ---------- Multiplication unnesting ----------
def unnest_multiplication(f):
    """Equivalent formula whose non-constant products only occur as atoms ``x * y = z``."""
    used = all_names(f)

    def is_product_atom(a) -> bool:
        return (
            a.op == "="
            and isinstance(a.lhs, ScalarMul)
            and isinstance(a.lhs.left, ScalarVar)
            and isinstance(a.lhs.right, ScalarVar)
            and isinstance(a.rhs, ScalarVar)
        )

    def unnest_atom(a, positive: bool):
        if not isinstance(a, (Atom, Member)) or (isinstance(a, Atom) and is_product_atom(a)):
            return a
        defs: List[Tuple[str, Any]] = []

        def name(base: str) -> str:
            n = fresh_name(base, used)
            used.add(n)
            return n

        def as_var(t):
            if isinstance(t, ScalarVar):
                return t
            v = ScalarVar(name("u"))
            defs.append((v.name, Atom("=", v, t)))
            return v

        def fn(t):
            if isinstance(t, ScalarMul) and not is_constant_term(t.left) and not is_constant_term(t.right):
                left, right = as_var(t.left), as_var(t.right)
                z = ScalarVar(name("z"))
                defs.append((z.name, Atom("=", ScalarMul(left, right), z)))
                return z
            return t

        rewritten = map_formula_terms(a, fn)
        if not defs:
            return a
        binders = [(n, Sort.SCALAR) for n, _ in defs]
        definitions = conj(d for _, d in defs)
        if positive:
            return quantify(Exists, binders, And(definitions, rewritten))
        return quantify(Forall, binders, Implies(definitions, rewritten))

    def walk(g, positive: bool):
        if isinstance(g, (Atom, Member, Top, Bottom)):
            return unnest_atom(g, positive)
        if isinstance(g, Not):
            return Not(walk(g.arg, not positive))
        if isinstance(g, Implies):
            return Implies(walk(g.left, not positive), walk(g.right, positive))
        if isinstance(g, Iff):
            return Iff(walk(g.left, True), walk(g.right, True))
        if isinstance(g, (And, Or)):
            return type(g)(walk(g.left, positive), walk(g.right, positive))
        if isinstance(g, QUANTIFIERS):
            return type(g)(g.var, g.sort, walk(g.body, positive))
        raise TypeError(f"not a formula: {g!r}")

    return walk(f, True)


# ---------- Evaluation ----------
Vector = Tuple[Fraction, ...]


def _dot(a: Vector, b: Vector) -> Fraction:
    if len(a) != len(b):
        raise ValueError("vectors of different dimension")
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


@dataclass
class Interpretation:
    """Values for free variables plus the meaning of the geometric symbols."""

    env: Dict[str, Any]
    inner: Optional[Callable[[Any, Any], Fraction]] = None
    norm: Optional[Callable[[Any], Fraction]] = None
    dist: Optional[Callable[[Any, Any], Fraction]] = None
    dim: Optional[int] = None
    _zero: Optional[Vector] = field(default=None, init=False)

    def zero(self) -> Vector:
        if self._zero is None:
            dim = self.dim
            if dim is None:
                dim = next((len(v) for v in self.env.values() if isinstance(v, tuple)), 0)
            self._zero = tuple(Fraction(0) for _ in range(dim))
        return self._zero


def evaluate_term(t, interp: Interpretation):
    if isinstance(t, RationalConst):
        return t.value
    if isinstance(t, (ScalarVar, VectorVar)):
        if t.name not in interp.env:
            raise MissingVariableError(t.name)
        value = interp.env[t.name]
        return Fraction(value) if isinstance(t, ScalarVar) else value
    if isinstance(t, ZeroVector):
        return interp.zero()
    if isinstance(t, ScalarAdd):
        return evaluate_term(t.left, interp) + evaluate_term(t.right, interp)
    if isinstance(t, ScalarNeg):
        return -evaluate_term(t.arg, interp)
    if isinstance(t, ScalarMul):
        return evaluate_term(t.left, interp) * evaluate_term(t.right, interp)
    if isinstance(t, VectorAdd):
        a, b = evaluate_term(t.left, interp), evaluate_term(t.right, interp)
        if len(a) != len(b):
            raise ValueError("vectors of different dimension")
        return tuple(x + y for x, y in zip(a, b))
    if isinstance(t, VectorNeg):
        return tuple(-x for x in evaluate_term(t.arg, interp))
    if isinstance(t, ScalarVectorMul):
        s = evaluate_term(t.scalar, interp)
        return tuple(s * x for x in evaluate_term(t.vector, interp))
    if isinstance(t, Inner):
        fn = interp.inner or _dot
        return Fraction(fn(evaluate_term(t.left, interp), evaluate_term(t.right, interp)))
    if isinstance(t, Norm):
        if interp.norm is None:
            raise LanguageError("no norm supplied for evaluation")
        return Fraction(interp.norm(evaluate_term(t.arg, interp)))
    if isinstance(t, Dist):
        if interp.dist is None:
            raise LanguageError("no distance supplied for evaluation")
        return Fraction(interp.dist(evaluate_term(t.left, interp), evaluate_term(t.right, interp)))
    raise TypeError(f"not a term: {t!r}")


_COMPARE = {
    "=": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def evaluate(f, env: Dict[str, Any], *, inner=None, norm=None, dist=None, dim: Optional[int] = None) -> bool:
    """Truth of a quantifier-free formula under exact rational arithmetic."""
    interp = env if isinstance(env, Interpretation) else Interpretation(env, inner, norm, dist, dim)

    def walk(g) -> bool:
        if isinstance(g, Top):
            return True
        if isinstance(g, Bottom):
            return False
        if isinstance(g, Atom):
            return _COMPARE[g.op](evaluate_term(g.lhs, interp), evaluate_term(g.rhs, interp))
        if isinstance(g, Not):
            return not walk(g.arg)
        if isinstance(g, And):
            return walk(g.left) and walk(g.right)
        if isinstance(g, Or):
            return walk(g.left) or walk(g.right)
        if isinstance(g, Implies):
            return (not walk(g.left)) or walk(g.right)
        if isinstance(g, Iff):
            return walk(g.left) == walk(g.right)
        if isinstance(g, QUANTIFIERS):
            raise ValueError("evaluate expects a quantifier-free formula")
        raise TypeError(f"cannot evaluate {g!r}")

    return walk(f)
