import pytest
from unittest.mock import patch
from services.formula_core import LanguageError, Status, classify_fragment
from services.formula_parser import parse
from services.ip_decision import INFINITE, DimensionConstraint
from services.pipeline import (
    EXIT_CODES, IP_DECIDABLE, METRIC_DECIDABLE, METRIC_EA_UNDECIDABLE, NORMED_EA_UNDECIDABLE, NORMED_EXISTENTIAL,
    NORMED_UNIVERSAL, REAL_FIELD, Mode, Route, Verdict, decide_sentence, plan_route,
)
from services.settings import Settings

BOUNDED = "forall x:V, y:V. d(x, y) <= 2"
NONZERO_VECTOR = "exists v:V. inner(v, v) > 0"
SEPARATOR = "forall x:V, y:V. norm(x) = norm(y) & norm(x + y) = norm(x) + norm(y) -> x = y"
ALTERNATING = "forall v:V. exists w:V. norm(w) = norm(v) + 1"


class TestRoutePlanning:
    """Test which procedure covers a sentence"""

    @pytest.mark.parametrize("text,theory,route,citation", [
        ("forall x:R. x * x >= 0", "ns", Route.RCF, REAL_FIELD),
        (NONZERO_VECTOR, "ip", Route.INNER_PRODUCT, IP_DECIDABLE),
        ("forall v:V, w:V. v + w = w + v", "vs", Route.INNER_PRODUCT, IP_DECIDABLE),
        (BOUNDED, "ms", Route.METRIC, METRIC_DECIDABLE),
        ("exists x:V. forall y:V. d(x, y) <= 1", "ms", Route.UNSUPPORTED, METRIC_EA_UNDECIDABLE),
        (SEPARATOR, "ns", Route.NORMED_UNIVERSAL, NORMED_UNIVERSAL),
        ("exists v:V. norm(v) = 0", "bs", Route.NORMED_EXISTENTIAL, NORMED_EXISTENTIAL),
        (ALTERNATING, "ns", Route.UNSUPPORTED, NORMED_EA_UNDECIDABLE),
    ])
    def test_routes(self, text, theory, route, citation):
        plan = plan_route(parse(text), theory)
        assert plan.route == route
        assert plan.citation == citation

    def test_describe(self):
        assert plan_route(parse(BOUNDED), "ms").describe() == "route: metric-ae"
        refused = plan_route(parse(ALTERNATING), "ns")
        assert refused.describe() == f"route: unsupported ({NORMED_EA_UNDECIDABLE})"

    def test_unknown_theory(self):
        with pytest.raises(LanguageError):
            plan_route(parse(BOUNDED), "banach")


class TestVerdict:
    """Test verdict invariants and records"""

    @pytest.fixture
    def fragment(self):
        return classify_fragment(parse(BOUNDED))

    def test_unsupported_needs_citation(self, fragment):
        with pytest.raises(ValueError):
            Verdict(Status.UNSUPPORTED, "ms", fragment, Route.UNSUPPORTED)

    def test_only_counter_examples_carry_models(self, fragment):
        with pytest.raises(ValueError):
            Verdict(Status.VALID, "ms", fragment, Route.METRIC, METRIC_DECIDABLE, model="points 1\n0\n")

    def test_record(self, fragment):
        verdict = Verdict(Status.INVALID, "ms", fragment, Route.METRIC, METRIC_DECIDABLE)
        assert verdict.to_record("out.model") == {
            "status": "Invalid",
            "theory": "ms",
            "fragment": "purely-universal, additive, k=2",
            "route": "metric-ae",
            "model_path": "out.model",
            "citation": METRIC_DECIDABLE,
        }

    def test_exit_codes(self):
        assert EXIT_CODES[Status.VALID] == 0
        assert EXIT_CODES[Status.SATISFIABLE] == 0
        assert EXIT_CODES[Status.UNSUPPORTED] == 2
        assert EXIT_CODES[Status.BUDGET] == 3


class TestDecideSentence:
    """Test end-to-end decisions"""

    def test_real_field(self):
        verdict = decide_sentence(parse("forall x:R. x * x >= 0"), "ip")
        assert verdict.status == Status.VALID
        assert verdict.exit_code == 0

    def test_inner_product_dimensions(self):
        verdict = decide_sentence(parse(NONZERO_VECTOR), "ip")
        assert verdict.status == Status.INVALID
        assert verdict.dimensions == "cofinite, excluding {0}"
        assert decide_sentence(parse(NONZERO_VECTOR), "hs", INFINITE).status == Status.VALID

    def test_inner_product_satisfiability(self):
        verdict = decide_sentence(parse(NONZERO_VECTOR), "ip", mode=Mode.SATISFIABILITY)
        assert verdict.status == Status.SATISFIABLE

    def test_metric_counter_model(self):
        verdict = decide_sentence(parse(BOUNDED), "ms", mode=Mode.MODEL)
        assert verdict.status == Status.INVALID
        assert verdict.model.startswith("points 2\n")

    def test_validity_mode_omits_models(self):
        verdict = decide_sentence(parse(SEPARATOR), "ns")
        assert verdict.status == Status.INVALID
        assert verdict.model is None

    def test_normed_counter_model(self):
        verdict = decide_sentence(parse(SEPARATOR), "ns", mode=Mode.MODEL)
        assert verdict.model.startswith("dim 2\n")

    def test_metric_satisfiability(self):
        verdict = decide_sentence(parse("exists x:V. forall y:V. d(x, y) > 0"), "ms", mode=Mode.SATISFIABILITY)
        assert verdict.status == Status.UNSATISFIABLE
        assert verdict.model is None

    def test_refusal_names_the_undecidability_result(self):
        verdict = decide_sentence(parse("exists x:V. forall y:V. d(x, y) <= 1"), "ms")
        assert verdict.status == Status.UNSUPPORTED
        assert verdict.citation == METRIC_EA_UNDECIDABLE
        assert verdict.exit_code == 2

    def test_normed_refusal(self):
        verdict = decide_sentence(parse(ALTERNATING), "ns")
        assert verdict.status == Status.UNSUPPORTED
        assert verdict.route == Route.UNSUPPORTED
        assert verdict.citation == NORMED_EA_UNDECIDABLE

    def test_existential_normed(self):
        assert decide_sentence(parse("exists v:V. norm(v) = 0"), "ns").status == Status.VALID

    def test_dimension_constraint_is_noted_outside_inner_product_spaces(self):
        verdict = decide_sentence(parse(BOUNDED), "ms", DimensionConstraint.parse("exactly:2"))
        assert verdict.status == Status.INVALID
        assert any("ignored" in note for note in verdict.notes)

    @patch('services.pipeline.monitoring')
    def test_budget(self, mock_monitoring):
        verdict = decide_sentence(
            parse("exists x:R. x * x * x - x - 1 = 0"), "ip", settings=Settings(budget=1),
        )
        assert verdict.status == Status.BUDGET
        assert verdict.exit_code == 3
        assert verdict.citation == REAL_FIELD
        mock_monitoring.track_event.assert_called_once()
        assert mock_monitoring.track_event.call_args[0][0] == "budget_exceeded"


class TestLanguageChecks:
    """Test rejection of input outside a theory's language"""

    def test_free_variables(self):
        with pytest.raises(LanguageError):
            decide_sentence(parse("norm(v) > 0"), "ns")

    def test_vector_spaces_have_no_norm(self):
        with pytest.raises(LanguageError):
            decide_sentence(parse("forall v:V. norm(v) >= 0"), "vs")

    def test_metric_spaces_have_no_addition(self):
        with pytest.raises(LanguageError):
            decide_sentence(parse("forall x:V, y:V. x + y = y + x"), "ms")

    def test_arithmetic_sorts(self):
        p = parse("forall A:P. exists k:N. k in A | ~(k in A)", second_order=True)
        with pytest.raises(LanguageError):
            decide_sentence(p, "ns")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
