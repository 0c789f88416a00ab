"""Purely universal and existential sentences over real normed spaces.

A universal sentence fails in some normed space exactly when a system of norm
constraints ``norm(y_i) = b_i`` is consistent with the rest of its negation. A system
of upper and lower norm bounds on finitely many vectors is realizable iff the bounds
are nonnegative, zero bounds sit on zero vectors and no lower-bounded vector is a
cheap combination of the upper-bounded ones. When it is realizable, a norm whose unit
ball is a polytope realizes it.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import sympy
from sympy import Matrix, Symbol, expand

from services.formula_core import (
    And, Atom, Bottom, Dist, Exists, Forall, Implies, Inner, LanguageError, Member, Norm, Not, Or,
    BINARY_CONNECTIVES, RationalConst, ScalarAdd, ScalarMul, ScalarNeg, ScalarVar,
    ScalarVectorMul, Sort, Status, Top, VectorAdd, VectorNeg, VectorVar, ZERO, ZeroVector,
    all_names, conj, evaluate, expand_abs, free_variables, fresh_name, is_sentence, iter_formula_subterms,
    map_atoms, prenex, print_term, quantify, scalar_sum, split_prefix, term_sort, vector_sum,
)
from services.ip_decision import dimension_set
from services.linear_programming import OPTIMAL, solve_lp
from services.monitoring import error_handler, performance_monitor
from services.rcf_engine import BudgetExceeded, Limits, decide, find_rational_witness, poly_term, to_sympy

logger = logging.getLogger(__name__)

Vector = Tuple[Fraction, ...]


# ---------- Norm constraint systems ----------
@dataclass(frozen=True)
class NormConstraintSystem:
    """Upper bounds ``norm(x_i) <= b_i`` and lower bounds ``norm(y_j) >= d_j`` in Q^dim."""

    dim: int
    upper: Tuple[Tuple[Vector, Fraction], ...] = ()
    lower: Tuple[Tuple[Vector, Fraction], ...] = ()

    def __post_init__(self):
        def clean(pairs):
            out = []
            for vec, bound in pairs:
                vec = tuple(Fraction(v) for v in vec)
                if len(vec) != self.dim:
                    raise ValueError(f"vector {vec} is not in dimension {self.dim}")
                out.append((vec, Fraction(bound)))
            return tuple(out)

        object.__setattr__(self, "upper", clean(self.upper))
        object.__setattr__(self, "lower", clean(self.lower))

    @classmethod
    def equalities(cls, dim: int, pairs: Sequence[Tuple[Vector, Fraction]]) -> "NormConstraintSystem":
        """``norm(x_i) = b_i`` for every pair."""
        return cls(dim, tuple(pairs), tuple(pairs))


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: Optional[str] = None


def _is_zero(v: Vector) -> bool:
    return all(x == 0 for x in v)


def _scale(v: Vector, s: Fraction) -> Vector:
    return tuple(s * x for x in v)


def _min_l1_combination(points: Sequence[Vector], v: Vector) -> Optional[Fraction]:
    """Least ``sum |c_i|`` over ``v = sum c_i * points[i]``; None when v is outside their span."""
    if not points:
        return Fraction(0) if _is_zero(v) else None
    objective = {}
    eqs = []
    for i in range(len(points)):
        objective[f"p{i}"] = Fraction(1)
        objective[f"n{i}"] = Fraction(1)
    for k in range(len(v)):
        coeffs = {}
        for i, point in enumerate(points):
            if point[k]:
                coeffs[f"p{i}"] = point[k]
                coeffs[f"n{i}"] = -point[k]
        eqs.append((coeffs, -v[k]))
    result = solve_lp(objective, eqs, [], nonneg=list(objective))
    return result.value if result.status == OPTIMAL else None


def sconv_member(points: Sequence[Vector], v: Vector, strict: bool = False) -> bool:
    """Membership of ``v`` in the symmetric convex hull of ``points`` (its relative interior when strict)."""
    best = _min_l1_combination([tuple(Fraction(x) for x in p) for p in points], tuple(Fraction(x) for x in v))
    if best is None:
        return False
    return best < 1 if strict else best <= 1


def norm_feasible(s: NormConstraintSystem) -> Feasibility:
    for vec, bound in s.upper:
        if bound < 0:
            return Feasibility(False, "negative bound")
        if bound == 0 and not _is_zero(vec):
            return Feasibility(False, f"zero bound on the nonzero vector {_format_vector(vec)}")
    units = [_scale(vec, 1 / bound) for vec, bound in s.upper if bound > 0]
    for vec, bound in s.lower:
        if bound <= 0:
            continue
        if sconv_member(units, _scale(vec, 1 / bound), strict=True):
            return Feasibility(False, f"lower bound {bound} unreachable for {_format_vector(vec)}")
    return Feasibility(True)


# ---------- Polyhedral norms ----------
@dataclass(frozen=True)
class PolyhedralNorm:
    """Norm whose unit ball is the hull of ``vertices`` plus the complement directions ``+-e_k / scale``."""

    dim: int
    vertices: Tuple[Vector, ...]
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        verts = tuple(tuple(Fraction(x) for x in v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "scale", Fraction(self.scale))
        if self.scale <= 0:
            raise ValueError("complement scale must be positive")
        for v in verts:
            if len(v) != self.dim:
                raise ValueError(f"vertex {v} is not in dimension {self.dim}")
            if _is_zero(v):
                raise ValueError("the origin cannot be a vertex")
            if tuple(-x for x in v) not in verts:
                raise ValueError(f"vertex set is not symmetric: missing -{_format_vector(v)}")

    def __call__(self, v) -> Fraction:
        return gauge(self, v)


def _complement_axes(dim: int, vectors: Sequence[Vector]) -> List[int]:
    """Coordinates whose unit vectors complement the span of ``vectors``."""
    if not vectors:
        return list(range(dim))
    _, pivots = Matrix([list(v) for v in vectors]).rref()
    return [k for k in range(dim) if k not in pivots]


@lru_cache(maxsize=256)
def _generators(nm: PolyhedralNorm) -> Tuple[Vector, ...]:
    gens = list(nm.vertices)
    for k in _complement_axes(nm.dim, nm.vertices):
        e = tuple(Fraction(1) / nm.scale if i == k else Fraction(0) for i in range(nm.dim))
        gens += [e, tuple(-x for x in e)]
    return tuple(gens)


def gauge(nm: PolyhedralNorm, v) -> Fraction:
    """Exact value of the norm at ``v``."""
    v = tuple(Fraction(x) for x in v)
    if len(v) != nm.dim:
        raise ValueError(f"vector {v} is not in dimension {nm.dim}")
    if _is_zero(v):
        return Fraction(0)
    best = _min_l1_combination(list(_generators(nm)), v)
    if best is None:
        raise AssertionError("norm generators do not span the space")
    return best


def build_norm(s: NormConstraintSystem) -> PolyhedralNorm:
    """A polyhedral norm meeting every bound of a feasible system."""
    check = norm_feasible(s)
    if not check.feasible:
        raise ValueError(f"infeasible norm constraints: {check.reason}")
    units: List[Vector] = []
    for vec, bound in s.upper:
        if bound > 0 and not _is_zero(vec):
            u = _scale(vec, 1 / bound)
            for w in (u, tuple(-x for x in u)):
                if w not in units:
                    units.append(w)
    axes = _complement_axes(s.dim, units)
    scale = Fraction(1)
    if axes:
        basis = [list(u) for u in _independent(units)] + [[Fraction(int(i == k)) for i in range(s.dim)] for k in axes]
        change = Matrix(basis).T
        lengths = []
        for vec, bound in s.lower:
            if bound <= 0:
                continue
            z = change.LUsolve(Matrix([x / bound for x in vec]))
            outside = sum(abs(Fraction(int(c.p), int(c.q))) for c in list(z)[len(basis) - len(axes):])
            if outside > 0:
                lengths.append(1 / outside)
        if lengths:
            scale = max(lengths) + 1
    return PolyhedralNorm(s.dim, tuple(units), scale)


def _independent(vectors: Sequence[Vector]) -> List[Vector]:
    if not vectors:
        return []
    _, pivots = Matrix([list(v) for v in vectors]).T.rref()
    return [vectors[i] for i in pivots]


def serialize_norm(nm: PolyhedralNorm) -> str:
    lines = [f"dim {nm.dim}", f"scale {nm.scale}"]
    lines += [" ".join(str(x) for x in v) for v in nm.vertices]
    return "\n".join(lines) + "\n"


def parse_norm(text: str) -> PolyhedralNorm:
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if len(lines) < 2 or not lines[0].startswith("dim ") or not lines[1].startswith("scale "):
        raise ValueError("norm must start with 'dim m' and 'scale B'")
    dim = int(lines[0].split()[1])
    scale = Fraction(lines[1].split()[1])
    vertices = tuple(tuple(Fraction(x) for x in line.split()) for line in lines[2:])
    return PolyhedralNorm(dim, vertices, scale)


def _format_vector(v: Vector) -> str:
    return "(" + ", ".join(str(x) for x in v) + ")"


# ---------- Counter-models ----------
@dataclass
class NormedCounterModel:
    norm: PolyhedralNorm
    vectors: Dict[str, Vector]
    scalars: Dict[str, Fraction]
    bounds: Dict[str, Tuple[str, Fraction]] = field(default_factory=dict)

    def serialize(self) -> str:
        lines = [serialize_norm(self.norm).rstrip("\n")]
        for name in sorted(self.vectors):
            lines.append(f"vector {name} " + " ".join(str(x) for x in self.vectors[name]))
        for name in sorted(self.scalars):
            lines.append(f"scalar {name} {self.scalars[name]}")
        for name in sorted(self.bounds):
            term, value = self.bounds[name]
            lines.append(f"bound {name} {value} = {term}")
        return "\n".join(lines) + "\n"


@dataclass
class NormedOutcome:
    status: Status
    model: Optional[NormedCounterModel] = None


# ---------- Norm abstraction ----------
@dataclass(frozen=True)
class NormTerm:
    name: str
    combination: Tuple[Tuple[str, sympy.Expr], ...]

    def is_numeric(self) -> bool:
        return all(c.is_number for _, c in self.combination)

    def vector_term(self):
        return _combination_term(dict(self.combination))

    def describe(self) -> str:
        return f"norm({print_term(self.vector_term())})"


def _combination_term(lc: Dict[str, sympy.Expr]):
    parts = []
    for name, c in lc.items():
        parts.append(VectorVar(name) if c == 1 else ScalarVectorMul(poly_term(c), VectorVar(name)))
    return vector_sum(parts)


def _fraction(c: sympy.Expr) -> Fraction:
    return Fraction(int(c.p), int(c.q))


class _Abstraction:
    """Replaces norm terms, innermost first, by fresh scalar variables ``b_i``."""

    def __init__(self, used):
        self.used = set(used)
        self.norms: Dict[Tuple, NormTerm] = {}
        self.side: List[object] = []
        self.vector_atoms: Dict[object, Dict[str, sympy.Expr]] = {}

    def fresh(self, base: str) -> str:
        name = fresh_name(base, self.used)
        self.used.add(name)
        return name

    def scalar(self, t) -> sympy.Expr:
        if isinstance(t, (RationalConst, ScalarVar)):
            return to_sympy(t)
        if isinstance(t, ScalarAdd):
            return self.scalar(t.left) + self.scalar(t.right)
        if isinstance(t, ScalarNeg):
            return -self.scalar(t.arg)
        if isinstance(t, ScalarMul):
            return self.scalar(t.left) * self.scalar(t.right)
        if isinstance(t, Norm):
            return self.norm(self.combination(t.arg))
        if isinstance(t, Dist):
            diff = dict(self.combination(t.left))
            for name, c in self.combination(t.right).items():
                diff[name] = diff.get(name, 0) - c
            return self.norm(diff)
        raise LanguageError(f"{type(t).__name__} is not part of the normed-space language")

    def combination(self, t) -> Dict[str, sympy.Expr]:
        if isinstance(t, VectorVar):
            return {t.name: sympy.Integer(1)}
        if isinstance(t, ZeroVector):
            return {}
        if isinstance(t, VectorAdd):
            out = dict(self.combination(t.left))
            for name, c in self.combination(t.right).items():
                out[name] = out.get(name, 0) + c
            return out
        if isinstance(t, VectorNeg):
            return {name: -c for name, c in self.combination(t.arg).items()}
        if isinstance(t, ScalarVectorMul):
            s = self.scalar(t.scalar)
            return {name: s * c for name, c in self.combination(t.vector).items()}
        raise LanguageError(f"not a vector term: {type(t).__name__}")

    @staticmethod
    def clean(lc: Dict[str, sympy.Expr]) -> Dict[str, sympy.Expr]:
        out = {}
        for name in sorted(lc):
            c = expand(lc[name])
            if c != 0:
                out[name] = c
        return out

    def bound(self, lc: Dict[str, sympy.Expr]) -> Symbol:
        key = tuple(lc.items())
        if key not in self.norms:
            self.norms[key] = NormTerm(self.fresh(f"b_{len(self.norms) + 1}"), key)
        return Symbol(self.norms[key].name)

    def absolute(self, c: sympy.Expr) -> sympy.Expr:
        if c.is_number:
            return abs(c)
        s = self.fresh("s")
        term, var = poly_term(c), ScalarVar(s)
        self.side.append(Or(
            And(Atom(">=", term, ZERO), Atom("=", var, term)),
            And(Atom("<", term, ZERO), Atom("=", var, ScalarNeg(term))),
        ))
        return Symbol(s)

    def norm(self, lc: Dict[str, sympy.Expr]) -> sympy.Expr:
        lc = self.clean(lc)
        if not lc:
            return sympy.Integer(0)
        if len(lc) == 1:
            (name, c), = lc.items()
            return self.absolute(c) * self.bound({name: sympy.Integer(1)})
        if all(c.is_number for c in lc.values()):
            first = next(iter(lc.values()))
            return abs(first) * self.bound({n: c / first for n, c in lc.items()})
        return self.bound(lc)

    def atom(self, a):
        if isinstance(a, Member):
            raise LanguageError("set membership is not part of the normed-space language")
        if not isinstance(a, Atom):
            return a
        if term_sort(a.lhs) == Sort.VECTOR:
            diff = dict(self.combination(a.lhs))
            for name, c in self.combination(a.rhs).items():
                diff[name] = diff.get(name, 0) - c
            lc = self.clean(diff)
            if not lc:
                return Top()
            literal = Atom("=", _combination_term(lc), ZeroVector())
            self.vector_atoms[literal] = lc
            return literal
        e = expand(self.scalar(a.lhs) - self.scalar(a.rhs))
        if e.is_number:
            return Top() if {"=": e == 0, "<": e < 0, "<=": e <= 0, ">": e > 0, ">=": e >= 0}[a.op] else Bottom()
        return Atom(a.op, poly_term(e), ZERO)


def _universal_parts(p):
    """Prefix binders and matrix of a purely universal sentence, or None for other shapes."""
    prefix, matrix = split_prefix(prenex(p))
    if any(kind is Exists for kind, _, _ in prefix):
        return None
    return prefix, matrix


def _check_normed_language(f) -> None:
    for t in iter_formula_subterms(f):
        if isinstance(t, Inner):
            raise LanguageError("inner products are not part of the normed-space language")


# ---------- Disjunctive normal form ----------
def _nnf(f):
    if isinstance(f, Not):
        g = f.arg
        if isinstance(g, Not):
            return _nnf(g.arg)
        if isinstance(g, And):
            return Or(_nnf(Not(g.left)), _nnf(Not(g.right)))
        if isinstance(g, Or):
            return And(_nnf(Not(g.left)), _nnf(Not(g.right)))
        if isinstance(g, Implies):
            return And(_nnf(g.left), _nnf(Not(g.right)))
        if isinstance(g, Top):
            return Bottom()
        if isinstance(g, Bottom):
            return Top()
        if isinstance(g, BINARY_CONNECTIVES):
            return _nnf(Not(_expand_iff_once(g)))
        return f
    if isinstance(f, Implies):
        return Or(_nnf(Not(f.left)), _nnf(f.right))
    if isinstance(f, (And, Or)):
        return type(f)(_nnf(f.left), _nnf(f.right))
    if isinstance(f, BINARY_CONNECTIVES):
        return _nnf(_expand_iff_once(f))
    return f


def _expand_iff_once(f):
    return And(Implies(f.left, f.right), Implies(f.right, f.left))


def _dnf(f) -> List[List[Tuple[object, bool]]]:
    """Cubes of (atom, polarity) literals; unsatisfiable constant cubes are dropped."""
    if isinstance(f, Top):
        return [[]]
    if isinstance(f, Bottom):
        return []
    if isinstance(f, Or):
        return _dnf(f.left) + _dnf(f.right)
    if isinstance(f, And):
        return [a + b for a in _dnf(f.left) for b in _dnf(f.right)]
    if isinstance(f, Not):
        return [[(f.arg, False)]]
    return [[(f, True)]]


# ---------- Additive compilation ----------
def _to_matrix_column(lc: Dict[str, sympy.Expr], names: Sequence[str]) -> Matrix:
    return Matrix([lc.get(n, 0) for n in names])


def _quotient_map(kernel: List[Matrix], size: int) -> Matrix:
    """Rows spanning the orthogonal complement of ``kernel``; applying it quotients by the kernel."""
    if not kernel:
        return sympy.eye(size)
    complement = Matrix.hstack(*kernel).T.nullspace()
    if not complement:
        return sympy.zeros(0, size)
    return Matrix.hstack(*complement).T


def _is_zero_matrix(m: Matrix) -> bool:
    return all(x == 0 for x in m)


class _SearchBudget:
    """Count of zero patterns and supports enumerated for one sentence."""

    def __init__(self, budget: Optional[int] = None):
        self.limit = Limits.resolve(budget).budget
        self.used = 0

    def tick(self) -> None:
        self.used += 1
        if self.used > self.limit:
            raise BudgetExceeded("nodes", self.limit)


def _subset_bounds(images: Dict[int, Matrix], i: int, bnames: Dict[int, str], search: _SearchBudget) -> List[object]:
    """``sum |c_j| b_j >= b_i`` for every independent support S expressing image i."""
    out = []
    others = [j for j in images if j != i]
    target = images[i]
    # independent columns never outnumber the rows
    for size in range(1, min(len(others), target.shape[0]) + 1):
        for support in itertools.combinations(others, size):
            search.tick()
            columns = Matrix.hstack(*[images[j] for j in support])
            if columns.rank() != size:
                continue
            try:
                solution, params = columns.gauss_jordan_solve(target)
            except ValueError:
                continue
            if params.shape[0]:
                continue
            terms = []
            for j, c in zip(support, list(solution)):
                if c != 0:
                    terms.append(ScalarMul(RationalConst(abs(_fraction(c))), ScalarVar(bnames[j])))
            out.append(Atom(">=", scalar_sum(terms), ScalarVar(bnames[i])))
    return out


def _decide_additive(prefix, abstraction: _Abstraction, q_abstract, *, budget):
    vector_names = sorted(v for _, v, s in prefix if s == Sort.VECTOR)
    norm_terms = list(abstraction.norms.values())
    bnames = {i: nt.name for i, nt in enumerate(norm_terms)}
    columns = {i: _to_matrix_column(dict(nt.combination), vector_names) for i, nt in enumerate(norm_terms)}
    size = len(vector_names)
    search = _SearchBudget(budget)

    for cube in _dnf(_nnf(q_abstract)):
        positive_eqs, negative_eqs, scalar_literals = [], [], []
        for atom, polarity in cube:
            if atom in abstraction.vector_atoms:
                column = _to_matrix_column(abstraction.vector_atoms[atom], vector_names)
                (positive_eqs if polarity else negative_eqs).append(column)
            else:
                scalar_literals.append(atom if polarity else Not(atom))
        for zero_count in range(len(norm_terms) + 1):
            for zeros in itertools.combinations(range(len(norm_terms)), zero_count):
                search.tick()
                kernel = positive_eqs + [columns[i] for i in zeros]
                project = _quotient_map(kernel, size)
                if any(_is_zero_matrix(project * e) for e in negative_eqs):
                    continue
                images = {i: project * columns[i] for i in columns if i not in zeros}
                if any(_is_zero_matrix(m) for m in images.values()):
                    continue
                constraints = [Atom("=", ScalarVar(bnames[i]), ZERO) for i in zeros]
                constraints += [Atom(">", ScalarVar(bnames[i]), ZERO) for i in images]
                for i in images:
                    constraints += _subset_bounds(images, i, bnames, search)
                body = conj(scalar_literals + constraints)
                scalars = sorted(free_variables(body))
                sentence = quantify(Exists, [(n, Sort.SCALAR) for n in scalars], body)
                if decide(sentence, budget=budget) != Status.VALID:
                    continue
                logger.info(f"counter-model case found with {len(zeros)} zero norm term(s)")
                return NormedOutcome(Status.INVALID, _counter_model(
                    body, scalars, project, prefix, norm_terms, columns, budget=budget))
    return NormedOutcome(Status.VALID)


def _counter_model(body, scalars, project, prefix, norm_terms, columns, *, budget):
    vector_names = sorted(v for _, v, s in prefix if s == Sort.VECTOR)
    values = find_rational_witness(body, budget=budget, variables=scalars)
    if values is None:
        logger.info("counter-model exists but needs irrational values")
        return None
    dim = project.shape[0]

    def image(column) -> Vector:
        return tuple(_fraction(x) for x in list(project * column))

    vectors = {}
    for k, name in enumerate(vector_names):
        unit = Matrix([int(i == k) for i in range(len(vector_names))])
        vectors[name] = image(unit)
    pairs = [(image(columns[i]), values[nt.name]) for i, nt in enumerate(norm_terms)]
    norm = build_norm(NormConstraintSystem.equalities(dim, pairs))
    bounds = {nt.name: (nt.describe(), values[nt.name]) for nt in norm_terms}
    plain = {n: v for n, v in values.items() if n not in bounds}
    for _, name, sort in prefix:
        # the satisfied case does not constrain these
        if sort == Sort.SCALAR and name not in plain:
            plain[name] = Fraction(0)
    return NormedCounterModel(norm, vectors, plain, bounds)


# ---------- Generic route ----------
def _feasibility_body(abstraction: _Abstraction, q_abstract):
    norm_terms = list(abstraction.norms.values())
    ys = [nt.vector_term() for nt in norm_terms]
    bs = [ScalarVar(nt.name) for nt in norm_terms]
    parts = [q_abstract]
    parts += [Atom(">=", b, ZERO) for b in bs]
    parts += [Implies(Atom("=", b, ZERO), Atom("=", y, ZeroVector())) for b, y in zip(bs, ys)]
    cs = [abstraction.fresh(f"c_{k + 1}") for k in range(len(norm_terms))]
    for i, (b, y) in enumerate(zip(bs, ys)):
        combo = vector_sum([ScalarVectorMul(ScalarVar(c), yj) for c, yj in zip(cs, ys)])
        separated = Atom("=", y, combo)

        def weighted(k: int, weights: List[object]):
            if k == len(cs):
                cost = scalar_sum([ScalarMul(w, bj) for w, bj in zip(weights, bs)])
                return Implies(Atom("<", cost, b), Not(separated))
            return expand_abs(ScalarVar(cs[k]), lambda t: weighted(k + 1, weights + [t]))

        parts.append(quantify(Forall, [(c, Sort.SCALAR) for c in cs], weighted(0, [])))
    return conj(parts)


def _abstract(p):
    """Abstraction state and abstracted negated matrix of a purely universal sentence."""
    _check_normed_language(p)
    parts = _universal_parts(p)
    if parts is None:
        return None
    prefix, matrix = parts
    abstraction = _Abstraction(all_names(p))
    q_abstract = And(map_atoms(Not(matrix), abstraction.atom), conj(abstraction.side))
    return prefix, abstraction, q_abstract


def feasibility_sentence(p):
    """Existential sentence over vector spaces, true in some space iff ``p`` has a normed counter-model."""
    parts = _abstract(p)
    if parts is None:
        raise LanguageError("feasibility_sentence expects a purely universal sentence")
    prefix, abstraction, q_abstract = parts
    body = _feasibility_body(abstraction, q_abstract)
    binders = sorted(free_variables(body).items())
    return quantify(Exists, binders, body)


@performance_monitor("normed_universal")
@error_handler
def decide_universal(p, *, budget: Optional[int] = None) -> NormedOutcome:
    """Validity over normed spaces of a sentence with only universal quantifiers."""
    if not is_sentence(p):
        raise LanguageError("expected a sentence")
    parts = _abstract(p)
    if parts is None:
        return NormedOutcome(Status.UNSUPPORTED)
    prefix, abstraction, q_abstract = parts
    additive = all(nt.is_numeric() for nt in abstraction.norms.values()) and all(
        all(c.is_number for c in lc.values()) for lc in abstraction.vector_atoms.values()
    )
    logger.debug(f"{len(abstraction.norms)} norm term(s), additive={additive}")
    if additive:
        return _decide_additive(prefix, abstraction, q_abstract, budget=budget)
    dims = dimension_set(feasibility_sentence(p), budget=budget)
    return NormedOutcome(Status.VALID if dims.is_empty() else Status.INVALID)


def check_counter_model(p, model: NormedCounterModel) -> bool:
    """True when ``model`` falsifies the purely universal sentence ``p``."""
    parts = _universal_parts(p)
    if parts is None:
        raise LanguageError("check_counter_model expects a purely universal sentence")
    _, matrix = parts
    env: Dict[str, object] = dict(model.scalars)
    env.update(model.vectors)

    def dist(a, b):
        return gauge(model.norm, tuple(x - y for x, y in zip(a, b)))

    return not evaluate(matrix, env, norm=model.norm, dist=dist, dim=model.norm.dim)


# ---------- Existential sentences ----------
@performance_monitor("normed_existential")
@error_handler
def decide_existential_validity(p, *, budget: Optional[int] = None) -> Status:
    """Validity of a sentence without universal vector quantifiers: it holds in the zero space."""
    _check_normed_language(p)
    prefix, matrix = split_prefix(prenex(p, prefer="exists"))
    if any(kind is Forall and sort == Sort.VECTOR for kind, _, sort in prefix):
        return Status.UNSUPPORTED
    scalar_prefix = [(kind, v, s) for kind, v, s in prefix if s != Sort.VECTOR]

    def zero_norm(t):
        if isinstance(t, (Norm, Dist)):
            return ZERO
        if isinstance(t, ScalarAdd):
            return ScalarAdd(zero_norm(t.left), zero_norm(t.right))
        if isinstance(t, ScalarMul):
            return ScalarMul(zero_norm(t.left), zero_norm(t.right))
        if isinstance(t, ScalarNeg):
            return ScalarNeg(zero_norm(t.arg))
        return t

    def on_atom(a):
        if isinstance(a, Atom) and term_sort(a.lhs) == Sort.VECTOR:
            return Atom("=", ZERO, ZERO)
        if isinstance(a, Atom):
            return Atom(a.op, zero_norm(a.lhs), zero_norm(a.rhs))
        return a

    residual = map_atoms(matrix, on_atom)
    for kind, v, s in reversed(scalar_prefix):
        residual = kind(v, s, residual)
    return decide(residual, budget=budget)
