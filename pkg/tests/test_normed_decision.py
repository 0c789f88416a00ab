import itertools
import random
import pytest
import sympy
from fractions import Fraction
from sympy import Matrix
from services.formula_core import Exists, LanguageError, Status, evaluate
from services.formula_parser import NORM_AXIOMS, parse
from services.normed_decision import (
    NormConstraintSystem, NormedCounterModel, PolyhedralNorm, _SearchBudget, _subset_bounds, build_norm,
    check_counter_model, decide_existential_validity, decide_universal, feasibility_sentence, gauge, norm_feasible,
    parse_norm, sconv_member, serialize_norm,
)
from services.rcf_engine import BudgetExceeded

F = Fraction
SEPARATOR = "forall x:V, y:V. norm(x) = norm(y) & norm(x + y) = norm(x) + norm(y) -> x = y"


def random_vector(rng, dim):
    while True:
        v = tuple(F(rng.randint(-2, 2)) for _ in range(dim))
        if any(v):
            return v


def least_l1_weight(points, v):
    """Least sum |c_i| with v = sum c_i * points[i], over supports of independent points."""
    target = Matrix([sympy.Rational(x.numerator, x.denominator) for x in v])
    if not any(v):
        return sympy.Integer(0)
    best = None
    for size in range(1, len(points) + 1):
        for support in itertools.combinations(points, size):
            columns = Matrix.hstack(*[Matrix([sympy.Rational(x.numerator, x.denominator) for x in p]) for p in support])
            if columns.rank() != size:
                continue
            c = (columns.T * columns).inv() * columns.T * target
            if columns * c != target:
                continue
            weight = sum(abs(x) for x in c)
            best = weight if best is None else min(best, weight)
    return best


def feasible_by_supports(s):
    """Norm feasibility decided from basic solutions only."""
    for vec, bound in s.upper:
        if bound < 0 or (bound == 0 and any(vec)):
            return False
    units = [tuple(x / bound for x in vec) for vec, bound in s.upper if bound > 0]
    for vec, bound in s.lower:
        if bound <= 0:
            continue
        weight = least_l1_weight(units, tuple(x / bound for x in vec))
        if weight is not None and weight < 1:
            return False
    return True


class TestSymmetricHull:
    """Test symmetric convex hull membership"""

    def test_segment_midpoint(self):
        points = [(1, 0), (0, 1)]
        assert sconv_member(points, (F(1, 2), F(1, 2)))
        assert not sconv_member(points, (F(1, 2), F(1, 2)), strict=True)
        assert sconv_member(points, (F(-1, 4), F(1, 4)), strict=True)

    def test_outside(self):
        assert not sconv_member([(1, 0), (0, 1)], (1, 1))

    def test_outside_the_span(self):
        assert not sconv_member([(1, 0)], (0, F(1, 100)))

    def test_empty_hull_holds_only_the_origin(self):
        assert sconv_member([], (0, 0))
        assert not sconv_member([], (1, 0))


class TestFeasibility:
    """Test norm constraint feasibility"""

    def test_l1_corner_is_reachable(self):
        s = NormConstraintSystem.equalities(2, [((1, 0), 1), ((0, 1), 1), ((1, 1), 2)])
        assert norm_feasible(s).feasible

    def test_lower_bound_beyond_the_triangle_inequality(self):
        s = NormConstraintSystem(2, upper=(((1, 0), 1), ((0, 1), 1)), lower=(((1, 1), 3),))
        check = norm_feasible(s)
        assert not check.feasible
        assert check.reason == "lower bound 3 unreachable for (1, 1)"

    def test_negative_bound(self):
        s = NormConstraintSystem(1, upper=(((1,), -1),))
        assert norm_feasible(s).reason == "negative bound"

    def test_zero_bound_on_nonzero_vector(self):
        s = NormConstraintSystem(2, upper=(((1, 0), 0),))
        assert norm_feasible(s).reason == "zero bound on the nonzero vector (1, 0)"

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            NormConstraintSystem(2, upper=(((1, 0, 0), 1),))

    @pytest.mark.slow
    def test_agrees_with_basic_solutions(self):
        rng = random.Random(53)
        outcomes = set()
        for _ in range(200):
            dim = rng.randint(1, 3)
            pairs = []
            for _ in range(rng.randint(1, 4)):
                vec = tuple(F(rng.randint(-2, 2)) for _ in range(dim))
                pairs.append((vec, F(rng.randint(-1, 3), rng.randint(1, 2)), rng.random() < 0.5))
            s = NormConstraintSystem(
                dim,
                upper=tuple((v, b) for v, b, is_upper in pairs if is_upper),
                lower=tuple((v, b) for v, b, is_upper in pairs if not is_upper),
            )
            expected = feasible_by_supports(s)
            assert norm_feasible(s).feasible == expected, s
            outcomes.add(expected)
        assert outcomes == {True, False}


class TestPolyhedralNorms:
    """Test norm construction and evaluation"""

    def test_l1_norm_is_built(self):
        s = NormConstraintSystem.equalities(2, [((1, 0), 1), ((0, 1), 1), ((1, 1), 2)])
        nm = build_norm(s)
        assert nm((1, 0)) == 1
        assert nm((0, 1)) == 1
        assert nm((1, 1)) == 2
        assert nm((1, -1)) == 2
        assert nm((0, 0)) == 0

    def test_complement_direction_meets_lower_bound(self):
        s = NormConstraintSystem(2, upper=(((1, 0), 1),), lower=(((1, 0), 1), ((0, 1), 3)))
        nm = build_norm(s)
        assert gauge(nm, (1, 0)) == 1
        assert gauge(nm, (0, 1)) >= 3

    def test_infeasible_system(self):
        s = NormConstraintSystem(2, upper=(((1, 0), 1), ((0, 1), 1)), lower=(((1, 1), 3),))
        with pytest.raises(ValueError):
            build_norm(s)

    def test_homogeneity(self):
        nm = PolyhedralNorm(2, ((1, 0), (-1, 0), (0, 1), (0, -1)))
        v = (F(3, 2), F(-1, 3))
        assert gauge(nm, (-2 * v[0], -2 * v[1])) == 2 * gauge(nm, v)

    def test_vertices_must_be_symmetric(self):
        with pytest.raises(ValueError):
            PolyhedralNorm(2, ((1, 0), (0, 1), (0, -1)))

    def test_origin_is_not_a_vertex(self):
        with pytest.raises(ValueError):
            PolyhedralNorm(1, ((0,),))

    def test_serialization(self):
        nm = PolyhedralNorm(2, ((F(1, 2), F(1, 2)), (F(-1, 2), F(-1, 2))), F(3))
        text = serialize_norm(nm)
        assert text.splitlines()[:3] == ["dim 2", "scale 3", "1/2 1/2"]
        assert parse_norm(text) == nm

    def test_malformed_norm(self):
        with pytest.raises(ValueError):
            parse_norm("scale 1\n")

    @pytest.mark.slow
    def test_built_norms_meet_their_bounds(self):
        rng = random.Random(11)
        built = 0
        for _ in range(200):
            dim = rng.choice([1, 2])
            upper = tuple((random_vector(rng, dim), F(rng.randint(1, 3))) for _ in range(rng.randint(0, 2)))
            lower = tuple((random_vector(rng, dim), F(rng.randint(1, 3))) for _ in range(rng.randint(1, 2)))
            s = NormConstraintSystem(dim, upper, lower)
            if not norm_feasible(s).feasible:
                with pytest.raises(ValueError):
                    build_norm(s)
                continue
            built += 1
            nm = build_norm(s)
            for vec, bound in s.upper:
                assert gauge(nm, vec) <= bound
            for vec, bound in s.lower:
                assert gauge(nm, vec) >= bound
            x, y = random_vector(rng, dim), random_vector(rng, dim)
            assert gauge(nm, tuple(a + b for a, b in zip(x, y))) <= gauge(nm, x) + gauge(nm, y)
            assert gauge(nm, tuple(-a for a in x)) == gauge(nm, x)
            assert gauge(nm, tuple(3 * a for a in x)) == 3 * gauge(nm, x)
        assert built > 0


class TestUniversalSentences:
    """Test validity of purely universal sentences"""

    @pytest.mark.parametrize("text", NORM_AXIOMS)
    def test_norm_axioms(self, text):
        assert decide_universal(parse(text)).status == Status.VALID

    def test_distance_is_a_norm_of_differences(self):
        p = parse("forall x:V, y:V. d(x, y) = norm(x - y) & d(x, y) = d(y, x)")
        assert decide_universal(p).status == Status.VALID

    def test_equal_norms_on_a_segment_need_not_coincide(self):
        p = parse(SEPARATOR)
        outcome = decide_universal(p)
        assert outcome.status == Status.INVALID
        model = outcome.model
        assert isinstance(model, NormedCounterModel)
        assert check_counter_model(p, model)
        assert sorted(value for _, value in model.bounds.values()) == [1, 1, 2]
        x, y = model.vectors["x"], model.vectors["y"]
        assert model.norm(x) == model.norm(y)
        assert model.norm(tuple(a + b for a, b in zip(x, y))) == 2 * model.norm(x)

    def test_counter_model_serialization(self):
        outcome = decide_universal(parse(SEPARATOR))
        text = outcome.model.serialize()
        assert text.startswith("dim 2\n")
        assert "vector x " in text
        assert "bound b_1 " in text

    def test_symbolic_coefficients_use_the_feasibility_sentence(self):
        p = parse("forall a:R, v:V. a * v = v -> a = 1 | norm(v) = 0")
        assert decide_universal(p).status == Status.VALID

    def test_feasibility_sentence_is_vector_existential(self):
        sentence = feasibility_sentence(parse("forall a:R, v:V. a * v = v -> a = 1 | norm(v) = 0"))
        assert isinstance(sentence, Exists)

    def test_support_search_respects_the_budget(self):
        with pytest.raises(BudgetExceeded) as exc:
            decide_universal(parse(SEPARATOR), budget=2)
        assert exc.value.kind == "nodes"

    def test_alternation_is_unsupported(self):
        outcome = decide_universal(parse("forall v:V. exists w:V. norm(w) = norm(v) + 1"))
        assert outcome.status == Status.UNSUPPORTED

    def test_inner_products_are_rejected(self):
        with pytest.raises(LanguageError):
            decide_universal(parse("forall v:V. inner(v, v) >= 0"))


class TestSupportBounds:
    """Test the triangle-inequality bounds from independent supports"""

    def test_supports_stop_at_the_row_count(self):
        images = {i: Matrix([i + 1]) for i in range(5)}
        search = _SearchBudget()
        bounds = _subset_bounds(images, 0, {i: f"b_{i}" for i in images}, search)
        assert len(bounds) == 4
        assert search.used == 4

    def test_enumeration_is_budgeted(self):
        images = {i: Matrix([1, i, i * i]) for i in range(12)}
        with pytest.raises(BudgetExceeded):
            _subset_bounds(images, 0, {i: f"b_{i}" for i in images}, _SearchBudget(10))


class TestExistentialSentences:
    """Test validity of sentences without universal vector quantifiers"""

    def test_zero_vector_always_exists(self):
        assert decide_existential_validity(parse("exists v:V. norm(v) = 0")) == Status.VALID

    def test_unit_vector_is_not_guaranteed(self):
        assert decide_existential_validity(parse("exists v:V. norm(v) = 1")) == Status.INVALID

    def test_scalar_quantifiers_are_kept(self):
        p = parse("forall x:R. exists v:V. norm(v) <= x * x")
        assert decide_existential_validity(p) == Status.VALID

    def test_universal_vectors_are_unsupported(self):
        assert decide_existential_validity(parse("exists v:V. forall w:V. norm(w) <= norm(v)")) == Status.UNSUPPORTED

    def test_agrees_with_the_zero_vector(self):
        rng = random.Random(23)
        lhs = ["norm(v)", "norm(w)", "norm(v + w)", "norm(v) + norm(w)", "2 * norm(v - w)"]
        for _ in range(50):
            atoms = [
                f"{rng.choice(lhs)} {rng.choice(['<', '<=', '=', '>', '>='])} {rng.randint(-2, 2)}"
                for _ in range(rng.randint(1, 3))
            ]
            matrix = atoms[0]
            for atom in atoms[1:]:
                matrix = f"{matrix} {rng.choice(['&', '|'])} {atom}"
            in_zero_space = evaluate(parse(matrix), {"v": (), "w": ()}, norm=lambda t: F(0), dim=0)
            expected = Status.VALID if in_zero_space else Status.INVALID
            assert decide_existential_validity(parse(f"exists v:V, w:V. {matrix}")) == expected, matrix


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
