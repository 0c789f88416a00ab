import random
import pytest
from fractions import Fraction
from services.formula_core import LanguageError, Not, Status, has_vectors, print_formula
from services.formula_parser import METRIC_AXIOMS, parse
from services.metric_decision import (
    UNDECIDABLE_EA, FiniteMetricModel, build_t2, check_metric_language, check_model, check_validity,
    decide_ae_validity, extract_finite_model, grid_models, parse_model, satisfiability, serialize_model,
)

F = Fraction
BOUNDED = "forall x:V, y:V. d(x, y) <= 2"


def random_point_matrix(rng, points):
    distances = [f"d({a}, {b})" for a in points for b in points]
    atoms = []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.2:
            atoms.append(f"{rng.choice(points)} = {rng.choice(points)}")
            continue
        op = rng.choice(["=", "<", "<=", ">", ">="])
        atoms.append(f"{rng.choice(distances)} {op} {rng.choice(distances + ['1', '2', '1/2'])}")
    return f" {rng.choice(['&', '|', '->'])} ".join(atoms)


def random_ea_sentence(rng):
    """exists-forall point sentence with one or two witnesses"""
    witnesses = ["x", "y"][: rng.randint(1, 2)]
    binders = ", ".join(f"{w}:V" for w in witnesses)
    return parse(f"exists {binders}. forall z:V. {random_point_matrix(rng, witnesses + ['z'])}")


def random_ae_sentence(rng):
    return parse(f"forall x:V, y:V. exists z:V. {random_point_matrix(rng, ['x', 'y', 'z'])}")


class TestFiniteMetricModel:
    """Test finite metric space validation"""

    def test_valid_space(self):
        m = FiniteMetricModel(2, ((0, 3), (3, 0)))
        assert m.dist[0][1] == Fraction(3)

    @pytest.mark.parametrize("rows", [
        ((0, 1), (2, 0)),
        ((1, 1), (1, 0)),
        ((0, 0), (0, 0)),
    ])
    def test_rejects_non_metrics(self, rows):
        with pytest.raises(ValueError):
            FiniteMetricModel(2, rows)

    def test_rejects_triangle_failure(self):
        with pytest.raises(ValueError):
            FiniteMetricModel(3, ((0, 1, 5), (1, 0, 1), (5, 1, 0)))

    def test_serialization(self):
        m = FiniteMetricModel(2, ((0, Fraction(1, 2)), (Fraction(1, 2), 0)))
        text = serialize_model(m)
        assert text == "points 2\n0 1/2\n1/2 0\n"
        assert parse_model(text) == m

    @pytest.mark.parametrize("text", ["", "points two\n", "points 2\n0 1\n", "2\n0 1\n1 0\n"])
    def test_malformed_models(self, text):
        with pytest.raises(ValueError):
            parse_model(text)

    def test_grid_models(self):
        models = list(grid_models(3, [1, 2, 3]))
        # every triple of distances except the permutations of (3, 1, 1)
        assert len(models) == 24


class TestLanguage:
    """Test the metric-space language check"""

    def test_norm_is_rejected(self):
        with pytest.raises(LanguageError):
            check_metric_language(parse("forall v:V. norm(v) = 1"))

    def test_point_arithmetic_is_rejected(self):
        with pytest.raises(LanguageError):
            check_metric_language(parse("forall x:V, y:V. x + y = x"))

    def test_distances_are_accepted(self):
        check_metric_language(parse(BOUNDED))


class TestReduction:
    """Test the reduction to a real-field sentence"""

    def test_witnesses_and_distance_variables(self):
        t2 = build_t2(parse("exists x:V, y:V. forall z:V. d(x, z) <= d(x, y)"))
        assert t2.witness_count == 2
        assert len(t2.distance_vars) == 4
        assert not has_vectors(t2.sentence)

    def test_universal_only_sentence_gets_one_point(self):
        t2 = build_t2(parse("forall z:V. d(z, z) = 0"))
        assert t2.witness_count == 1

    def test_wrong_prefix(self):
        with pytest.raises(LanguageError):
            build_t2(parse("forall x:V. exists y:V. d(x, y) = 1"))


class TestDecisions:
    """Test satisfiability and validity"""

    def test_reflexivity_and_symmetry_axioms(self):
        for text in METRIC_AXIOMS[:2]:
            assert decide_ae_validity(parse(text)) == Status.VALID

    def test_bounded_distances_are_invalid(self):
        outcome = check_validity(parse(BOUNDED), want_model=True)
        assert outcome.status == Status.INVALID
        model = outcome.model
        assert model.n == 2
        assert model.dist[0][1] > 2
        assert not check_model(model, parse(BOUNDED))
        assert check_model(model, Not(parse(BOUNDED)))

    def test_point_isolated_from_everything(self):
        outcome = satisfiability(parse("exists x:V. forall y:V. d(x, y) > 0"))
        assert outcome.status == Status.UNSATISFIABLE

    def test_scalar_quantifiers(self):
        p = parse("forall x:V, y:V. exists r:R. r > d(x, y)")
        assert decide_ae_validity(p) == Status.VALID

    def test_nonempty_space(self):
        assert decide_ae_validity(parse("exists x:V. d(x, x) = 0")) == Status.VALID

    def test_exists_forall_validity_is_refused(self):
        outcome = check_validity(parse("exists x:V. forall y:V. d(x, y) <= 1"))
        assert outcome.status == Status.UNSUPPORTED
        assert outcome.citation == UNDECIDABLE_EA

    def test_extract_finite_model(self):
        model = extract_finite_model(parse("exists x:V, y:V. d(x, y) = 1"))
        assert model == FiniteMetricModel(2, ((0, 1), (1, 0)))

    def test_triangle_holds_in_grid_models(self):
        triangle = parse(METRIC_AXIOMS[2])
        for model in grid_models(3, [1, 2, 3]):
            assert check_model(model, triangle)


class TestAgainstEnumeration:
    """Test the reduction against finite models on seeded random sentences"""

    @pytest.mark.slow
    def test_satisfiability_agrees_with_grid_models(self):
        rng = random.Random(43)
        models = [m for n in (1, 2, 3) for m in grid_models(n, [F(1, 2), 1, 2])]
        for _ in range(100):
            q = random_ea_sentence(rng)
            outcome = satisfiability(q, want_model=True)
            found = any(check_model(m, q) for m in models)
            if found:
                assert outcome.status == Status.SATISFIABLE, print_formula(q)
            if outcome.model is not None:
                assert check_model(outcome.model, q), print_formula(q)

    @pytest.mark.slow
    def test_valid_sentences_hold_in_small_models(self):
        rng = random.Random(47)
        models = [m for n in (1, 2, 3, 4) for m in grid_models(n, [1, 2, 3])]
        valid = 0
        for _ in range(60):
            p = random_ae_sentence(rng)
            if decide_ae_validity(p) != Status.VALID:
                continue
            valid += 1
            for m in rng.sample(models, 5):
                assert check_model(m, p), print_formula(p)
        assert valid > 0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
