"""Validity of universal-existential sentences over metric spaces.

A sentence ``exists x1..xn forall y1..ym. R`` (point quantifiers in that order, scalar
quantifiers anywhere) has a model iff it has one with at most max(n, 1) points, so
its satisfiability is a real-field question about the distances between witnesses.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from services.formula_core import (
    And, Atom, Bottom, Dist, Exists, Forall, LanguageError, Member, Not, QUANTIFIERS,
    BINARY_CONNECTIVES, RationalConst, ScalarAdd, ScalarMul, ScalarNeg, ScalarVar, Sort, Status, Top,
    VectorVar, ZERO, all_names, conj, disj, fresh_name, has_vectors, is_ea_prefix, is_sentence,
    iter_formula_subterms, map_atoms, map_term, prenex, quantify, split_prefix, substitute, term_sort,
)
from services.monitoring import error_handler, performance_monitor
from services.rcf_engine import decide, find_rational_witness

logger = logging.getLogger(__name__)

UNDECIDABLE_EA = "Theorem ms-ea-valid-undec"

_METRIC_TERMS = (RationalConst, ScalarVar, ScalarAdd, ScalarNeg, ScalarMul, VectorVar, Dist)


@dataclass(frozen=True)
class FiniteMetricModel:
    n: int
    dist: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.dist)
        object.__setattr__(self, "dist", rows)
        if self.n < 1 or len(rows) != self.n or any(len(r) != self.n for r in rows):
            raise ValueError(f"distance matrix must be {self.n} x {self.n}")
        for i in range(self.n):
            if rows[i][i] != 0:
                raise ValueError(f"point {i + 1} has nonzero distance to itself")
            for j in range(self.n):
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"distance between points {i + 1} and {j + 1} is not symmetric")
                if i != j and rows[i][j] <= 0:
                    raise ValueError(f"distinct points {i + 1} and {j + 1} are at distance {rows[i][j]}")
                for k in range(self.n):
                    if rows[i][k] > rows[i][j] + rows[j][k]:
                        raise ValueError(f"triangle inequality fails for points {i + 1}, {j + 1}, {k + 1}")


@dataclass(frozen=True)
class T2Instance:
    original: object
    witness_count: int
    sentence: object
    formula: object
    distance_vars: Tuple[str, ...]
    witnesses: Tuple[str, ...]


@dataclass
class MetricOutcome:
    status: Status
    model: Optional[FiniteMetricModel] = None
    citation: Optional[str] = None


def check_metric_language(f) -> None:
    for t in iter_formula_subterms(f):
        if not isinstance(t, _METRIC_TERMS):
            raise LanguageError(f"{type(t).__name__} is not part of the metric-space language")
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Member):
            raise LanguageError("set membership is not part of the metric-space language")
        if isinstance(g, Atom) and term_sort(g.lhs) == Sort.VECTOR and g.op != "=":
            raise LanguageError("points can only be compared with '='")
        if isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, BINARY_CONNECTIVES):
            stack += [g.left, g.right]
        elif isinstance(g, QUANTIFIERS):
            stack.append(g.body)


def build_t2(q) -> T2Instance:
    """Real-field sentence satisfiable exactly when the exists-forall point sentence ``q`` is."""
    original = q
    q = prenex(q, prefer="exists")
    prefix, matrix = split_prefix(q)
    if not is_ea_prefix(prefix):
        raise LanguageError("build_t2 expects existential point quantifiers before universal ones")
    used = all_names(q)
    witnesses = [v for kind, v, sort in prefix if kind is Exists and sort == Sort.VECTOR]
    if not witnesses:
        witnesses = [fresh_name("p", used)]
        used.add(witnesses[0])

    def instantiate(rest, body):
        if not rest:
            return body
        (kind, var, sort), tail = rest[0], rest[1:]
        if sort != Sort.VECTOR:
            return kind(var, sort, instantiate(tail, body))
        if kind is Exists:
            return instantiate(tail, body)
        return conj(instantiate(tail, substitute(body, {var: VectorVar(w)})) for w in witnesses)

    core = instantiate(prefix, matrix)
    n = len(witnesses)
    index = {w: i for i, w in enumerate(witnesses)}
    names: Dict[Tuple[int, int], str] = {}
    for i in range(n):
        for j in range(n):
            names[i, j] = fresh_name(f"d_{i + 1}_{j + 1}", used)
            used.add(names[i, j])

    def d(i: int, j: int) -> ScalarVar:
        return ScalarVar(names[i, j])

    def to_distance(t):
        if isinstance(t, Dist):
            return d(index[t.left.name], index[t.right.name])
        return t

    def on_atom(a):
        if isinstance(a, Atom) and term_sort(a.lhs) == Sort.VECTOR:
            return Atom("=", d(index[a.lhs.name], index[a.rhs.name]), ZERO)
        if isinstance(a, Atom):
            return Atom(a.op, map_term(a.lhs, to_distance), map_term(a.rhs, to_distance))
        return a

    core = map_atoms(core, on_atom)
    constraints = []
    for i in range(n):
        constraints.append(Atom("=", d(i, i), ZERO))
    for i, j in itertools.product(range(n), repeat=2):
        constraints.append(Atom(">=", d(i, j), ZERO))
    for i, j in itertools.product(range(n), repeat=2):
        constraints.append(Atom("=", d(i, j), d(j, i)))
    for i, j, k in itertools.product(range(n), repeat=3):
        constraints.append(Atom("<=", d(i, k), ScalarAdd(d(i, j), d(j, k))))
    formula = And(conj(constraints), core)
    distance_vars = tuple(names[i, j] for i in range(n) for j in range(n))
    sentence = quantify(Exists, [(v, Sort.SCALAR) for v in distance_vars], formula)
    return T2Instance(original, n, sentence, formula, distance_vars, tuple(witnesses))


def _quotient(t2: T2Instance, values: Dict[str, Fraction]) -> FiniteMetricModel:
    n = t2.witness_count
    matrix = [[values[t2.distance_vars[i * n + j]] for j in range(n)] for i in range(n)]
    representatives: List[int] = []
    for i in range(n):
        if not any(matrix[i][r] == 0 for r in representatives):
            representatives.append(i)
    dist = tuple(tuple(matrix[i][j] for j in representatives) for i in representatives)
    return FiniteMetricModel(len(representatives), dist)


@error_handler
def extract_finite_model(q, *, budget: Optional[int] = None) -> Optional[FiniteMetricModel]:
    """A finite model of ``q`` with rational distances, or None when none is found."""
    t2 = build_t2(q)
    if decide(t2.sentence, budget=budget) != Status.VALID:
        return None
    values = find_rational_witness(t2.formula, budget=budget, variables=list(t2.distance_vars))
    if values is None:
        logger.info("satisfiable, but no rational distances found")
        return None
    return _quotient(t2, values)


@performance_monitor("metric_satisfiability")
@error_handler
def satisfiability(q, *, want_model: bool = False, budget: Optional[int] = None) -> MetricOutcome:
    """Satisfiability of an exists-forall point sentence over metric spaces."""
    check_metric_language(q)
    if not is_sentence(q):
        raise LanguageError("expected a sentence")
    if not has_vectors(q):
        sat = decide(q, budget=budget) == Status.VALID
        return MetricOutcome(Status.SATISFIABLE if sat else Status.UNSATISFIABLE)
    prefix, _ = split_prefix(prenex(q, prefer="exists"))
    if not is_ea_prefix(prefix):
        return MetricOutcome(Status.UNSUPPORTED, citation=UNDECIDABLE_EA)
    t2 = build_t2(q)
    logger.debug(f"T2 instance over {t2.witness_count} witness point(s)")
    if decide(t2.sentence, budget=budget) != Status.VALID:
        return MetricOutcome(Status.UNSATISFIABLE)
    model = None
    if want_model:
        values = find_rational_witness(t2.formula, budget=budget, variables=list(t2.distance_vars))
        model = _quotient(t2, values) if values is not None else None
    return MetricOutcome(Status.SATISFIABLE, model)


def check_validity(p, *, want_model: bool = False, budget: Optional[int] = None) -> MetricOutcome:
    """Validity of ``p`` over metric spaces, with a finite counter-model on request."""
    outcome = satisfiability(Not(p), want_model=want_model, budget=budget)
    if outcome.status == Status.UNSUPPORTED:
        return outcome
    if outcome.status == Status.SATISFIABLE:
        return MetricOutcome(Status.INVALID, outcome.model)
    return MetricOutcome(Status.VALID)


def decide_ae_validity(p, *, budget: Optional[int] = None) -> Status:
    return check_validity(p, budget=budget).status


@error_handler
def check_model(m: FiniteMetricModel, p, *, budget: Optional[int] = None) -> bool:
    """Truth of the sentence ``p`` in the finite metric space ``m``."""
    check_metric_language(p)
    used = all_names(p)
    points = []
    for i in range(m.n):
        points.append(fresh_name(f"pt{i + 1}", used))
        used.add(points[-1])
    index = {name: i for i, name in enumerate(points)}

    def to_value(t):
        if isinstance(t, Dist):
            return RationalConst(m.dist[index[t.left.name]][index[t.right.name]])
        return t

    def ground(f):
        if isinstance(f, QUANTIFIERS) and f.sort == Sort.VECTOR:
            cases = [ground(substitute(f.body, {f.var: VectorVar(pt)})) for pt in points]
            return conj(cases) if isinstance(f, Forall) else disj(cases)
        if isinstance(f, QUANTIFIERS):
            return type(f)(f.var, f.sort, ground(f.body))
        if isinstance(f, Not):
            return Not(ground(f.arg))
        if isinstance(f, BINARY_CONNECTIVES):
            return type(f)(ground(f.left), ground(f.right))
        if isinstance(f, Atom) and term_sort(f.lhs) == Sort.VECTOR:
            return Top() if f.lhs.name == f.rhs.name else Bottom()
        if isinstance(f, Atom):
            return Atom(f.op, map_term(f.lhs, to_value), map_term(f.rhs, to_value))
        return f

    return decide(ground(p), budget=budget) == Status.VALID


# ---------- Serialization ----------
def serialize_model(m: FiniteMetricModel) -> str:
    lines = [f"points {m.n}"]
    lines += [" ".join(str(v) for v in row) for row in m.dist]
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> FiniteMetricModel:
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines or not lines[0].startswith("points "):
        raise ValueError("model must start with 'points n'")
    try:
        n = int(lines[0].split()[1])
        rows = [tuple(Fraction(v) for v in line.split()) for line in lines[1:]]
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"malformed model: {e}")
    if len(rows) != n:
        raise ValueError(f"expected {n} rows, found {len(rows)}")
    return FiniteMetricModel(n, tuple(rows))


def grid_models(n: int, grid: Sequence[Fraction]) -> Iterator[FiniteMetricModel]:
    """Every metric space on n points whose distances come from ``grid``, in a fixed order."""
    values = sorted({Fraction(v) for v in grid if Fraction(v) > 0})
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for choice in itertools.product(values, repeat=len(pairs)):
        matrix = [[Fraction(0)] * n for _ in range(n)]
        for (i, j), v in zip(pairs, choice):
            matrix[i][j] = matrix[j][i] = v
        try:
            yield FiniteMetricModel(n, tuple(tuple(r) for r in matrix))
        except ValueError:
            continue
