"""Routing of sentences to the decision procedure that covers them.

Every refusal names the result that makes the requested fragment undecidable, so
an ``Unsupported`` verdict is an answer, not a failure.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from services.formula_core import (
    BINARY_CONNECTIVES, Dist, EagError, Forall, FragmentClass, Inner, LanguageError, Member, Norm, Not,
    QUANTIFIERS, Shape, Sort, Status, classify_fragment, free_variables, has_vectors, is_ea_prefix,
    is_sentence, iter_formula_subterms, prenex, split_prefix,
)
from services.formula_parser import Theory
from services.ip_decision import ANY, DimensionConstraint, dimension_set, satisfies_constraint
from services.metric_decision import FiniteMetricModel, check_metric_language, check_validity, serialize_model
from services.monitoring import monitoring
from services.normed_decision import NormedCounterModel, decide_existential_validity, decide_universal
from services.rcf_engine import BudgetExceeded, decide
from services.settings import Settings, get_settings

logger = logging.getLogger(__name__)

IP_DECIDABLE = "Theorem ip-decidable"
METRIC_DECIDABLE = "Theorem ea-v-decidable"
NORMED_UNIVERSAL = "Corollary ms-a-dec"
NORMED_EXISTENTIAL = "Corollary ms-a-dec (trivial space)"
REAL_FIELD = "Tarski quantifier elimination"
METRIC_EA_UNDECIDABLE = "Theorem ms-ea-valid-undec"
NORMED_AE_UNDECIDABLE = "Corollary ns-ae-valid-undec"
NORMED_EA_UNDECIDABLE = "Theorem ns-ea-valid-undec"
NORMED_AIA_UNDECIDABLE = "Theorem ns-aia-valid-undec"

EXIT_CODES = {
    Status.VALID: 0,
    Status.INVALID: 0,
    Status.SATISFIABLE: 0,
    Status.UNSATISFIABLE: 0,
    Status.UNSUPPORTED: 2,
    Status.BUDGET: 3,
}


class UnsupportedFragment(EagError):
    def __init__(self, message: str, citation: str):
        super().__init__(message)
        self.citation = citation


class Route(str, Enum):
    RCF = "rcf"
    INNER_PRODUCT = "inner-product"
    METRIC = "metric-ae"
    NORMED_UNIVERSAL = "normed-universal"
    NORMED_EXISTENTIAL = "normed-existential"
    UNSUPPORTED = "unsupported"


class Mode(str, Enum):
    VALIDITY = "validity"
    SATISFIABILITY = "satisfiability"
    MODEL = "model"


@dataclass(frozen=True)
class RoutePlan:
    route: Route
    citation: Optional[str]

    def describe(self) -> str:
        if self.route == Route.UNSUPPORTED:
            return f"route: unsupported ({self.citation})"
        return f"route: {self.route.value}"


@dataclass
class Verdict:
    status: Status
    theory: str
    fragment: FragmentClass
    route: Route
    citation: Optional[str] = None
    model: Optional[str] = None
    dimensions: Optional[str] = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.status == Status.UNSUPPORTED and not self.citation:
            raise ValueError("an unsupported verdict needs a citation")
        if self.model is not None and self.status not in (Status.INVALID, Status.SATISFIABLE):
            raise ValueError("only invalid or satisfiable verdicts carry a model")

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_record(self, model_path: Optional[str] = None) -> Dict[str, Any]:
        return {
            "status": self.status.value,
            "theory": self.theory,
            "fragment": self.fragment.describe(),
            "route": self.route.value,
            "model_path": model_path,
            "citation": self.citation,
        }


def _theory(theory) -> Theory:
    try:
        return Theory(theory)
    except ValueError:
        raise LanguageError(f"unknown theory {theory!r}") from None


def _check_language(f, theory: Theory) -> None:
    if not is_sentence(f):
        raise LanguageError("expected a sentence; free variables: " + ", ".join(sorted(free_variables(f))))
    for t in iter_formula_subterms(f):
        if theory == Theory.VS and isinstance(t, (Inner, Norm, Dist)):
            raise LanguageError(f"{type(t).__name__.lower()} is not part of the vector-space language")
    if theory == Theory.MS:
        check_metric_language(f)
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Member):
            raise LanguageError("set membership only appears in arithmetic input")
        if isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, BINARY_CONNECTIVES):
            stack += [g.left, g.right]
        elif isinstance(g, QUANTIFIERS):
            if not isinstance(g.sort, Sort):
                raise LanguageError(f"sort {g.sort.value} only appears in arithmetic input")
            stack.append(g.body)


def plan_route(f, theory) -> RoutePlan:
    """The procedure ``decide`` would use for the validity of ``f``."""
    theory = _theory(theory)
    if not has_vectors(f):
        return RoutePlan(Route.RCF, REAL_FIELD)
    if theory in (Theory.IP, Theory.HS, Theory.VS):
        return RoutePlan(Route.INNER_PRODUCT, IP_DECIDABLE)
    fragment = classify_fragment(f)
    if theory == Theory.MS:
        negated, _ = split_prefix(prenex(Not(f), prefer="exists"))
        if is_ea_prefix(negated):
            return RoutePlan(Route.METRIC, METRIC_DECIDABLE)
        return RoutePlan(Route.UNSUPPORTED, METRIC_EA_UNDECIDABLE)
    if fragment.shape == Shape.PURELY_UNIVERSAL:
        return RoutePlan(Route.NORMED_UNIVERSAL, NORMED_UNIVERSAL)
    prefix, _ = split_prefix(prenex(f, prefer="exists"))
    if not any(kind is Forall and sort == Sort.VECTOR for kind, _, sort in prefix):
        return RoutePlan(Route.NORMED_EXISTENTIAL, NORMED_EXISTENTIAL)
    if fragment.shape == Shape.AE_P:
        return RoutePlan(Route.UNSUPPORTED, NORMED_EA_UNDECIDABLE)
    if fragment.shape == Shape.A_IMP_A:
        return RoutePlan(Route.UNSUPPORTED, NORMED_AIA_UNDECIDABLE)
    return RoutePlan(Route.UNSUPPORTED, NORMED_AE_UNDECIDABLE)


def _validity(f, theory: Theory, plan: RoutePlan, dim: DimensionConstraint, want_model: bool,
              settings: Settings, notes: list):
    """Status, serialized model and dimension report of the validity of ``f``."""
    budget = settings.budget
    if plan.route == Route.RCF:
        return decide(f, budget=budget, max_degree=settings.max_degree), None, None
    if plan.route == Route.INNER_PRODUCT:
        dims = dimension_set(f, jobs=settings.jobs, budget=budget)
        status = Status.VALID if satisfies_constraint(dims, dim) else Status.INVALID
        return status, None, dims.describe()
    if dim != ANY:
        notes.append(f"dimension constraint {dim} ignored: the decision is dimension-uniform")
        logger.warning(notes[-1])
    if plan.route == Route.METRIC:
        outcome = check_validity(f, want_model=want_model, budget=budget)
        model = serialize_model(outcome.model) if isinstance(outcome.model, FiniteMetricModel) else None
        return outcome.status, model, None
    if plan.route == Route.NORMED_UNIVERSAL:
        outcome = decide_universal(f, budget=budget)
        model = outcome.model.serialize() if isinstance(outcome.model, NormedCounterModel) and want_model else None
        return outcome.status, model, None
    if plan.route == Route.NORMED_EXISTENTIAL:
        return decide_existential_validity(f, budget=budget), None, None
    raise UnsupportedFragment("no decision procedure covers this fragment", plan.citation)


def decide_sentence(
    f,
    theory="ip",
    dim: DimensionConstraint = ANY,
    *,
    mode: Mode = Mode.VALIDITY,
    settings: Optional[Settings] = None,
) -> Verdict:
    """Verdict for ``f`` in ``theory``; satisfiability is validity of the negation."""
    theory = _theory(theory)
    mode = Mode(mode)
    settings = settings or get_settings()
    _check_language(f, theory)
    fragment = classify_fragment(f)
    query = Not(f) if mode == Mode.SATISFIABILITY else f
    plan = plan_route(query, theory)
    notes: list = []
    logger.info(f"{theory.value}: {fragment.describe()}, {plan.describe()}")
    try:
        status, model, dims = _validity(query, theory, plan, dim, mode != Mode.VALIDITY, settings, notes)
    except UnsupportedFragment as e:
        return Verdict(Status.UNSUPPORTED, theory.value, fragment, plan.route, e.citation, notes=notes)
    except BudgetExceeded as e:
        monitoring.track_event("budget_exceeded", {"kind": e.kind, "limit": e.limit, "route": plan.route.value})
        return Verdict(Status.BUDGET, theory.value, fragment, plan.route, plan.citation, notes=[str(e)])
    if status == Status.UNSUPPORTED:
        citation = plan.citation if plan.route != Route.METRIC else METRIC_EA_UNDECIDABLE
        return Verdict(Status.UNSUPPORTED, theory.value, fragment, Route.UNSUPPORTED, citation, notes=notes)
    if mode == Mode.SATISFIABILITY:
        status = {Status.VALID: Status.UNSATISFIABLE, Status.INVALID: Status.SATISFIABLE}.get(status, status)
    if status not in (Status.INVALID, Status.SATISFIABLE):
        model = None
    elif mode == Mode.MODEL and model is None and plan.route in (Route.METRIC, Route.NORMED_UNIVERSAL):
        notes.append("no rational model was extracted")
    return Verdict(status, theory.value, fragment, plan.route, plan.citation, model, dims, notes)
