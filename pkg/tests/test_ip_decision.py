import random
import pytest
from fractions import Fraction
from services.formula_core import (
    Exists, Forall, Implies, Inner, LanguageError, Or, Status, count_vector_vars, evaluate, free_variables,
    has_vectors, iter_formula_subterms, print_formula,
)
from services.formula_parser import Theory, parse, theory_axioms
from services.ip_decision import (
    ANY, FINITE, INFINITE, ConstraintTag, DimensionConstraint, DimensionSet, decide_ip, dim_le_sentence,
    dimension_set, is_standard, polarize, res, satisfies_constraint, special_form, standard_form, star,
)
from services.rcf_engine import decide

F = Fraction
NONZERO_VECTOR = "exists v:V. inner(v, v) > 0"
ORTHONORMAL_PAIR = "exists v:V, w:V. inner(v, w) = 0 & inner(v, v) = 1 & inner(w, w) = 1"
RELATIONS = ["=", "<", "<=", ">", ">="]


def random_ip_sentence(rng, max_vectors=2):
    """A closed inner-product sentence with at most ``max_vectors`` vector variables."""
    vectors = ["v", "w"][: rng.randint(1, max_vectors)]
    products = [f"inner({a}, {b})" for a in vectors for b in vectors]
    atoms = []
    for _ in range(rng.randint(1, 2)):
        if rng.random() < 0.15:
            atoms.append(f"{rng.choice(vectors)} = {rng.choice(vectors + ['0v'])}")
            continue
        lhs = " + ".join(f"{rng.randint(-2, 2)} * {rng.choice(products)}" for _ in range(rng.randint(1, 2)))
        atoms.append(f"{lhs} {rng.choice(RELATIONS)} {rng.randint(-2, 2)}")
    matrix = f" {rng.choice(['&', '|', '->'])} ".join(atoms)
    prefix = "".join(f"{rng.choice(['forall', 'exists'])} {v}:V. " for v in vectors)
    return parse(prefix + matrix)


def random_vector_text(rng, depth=2):
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(["u", "v", "w", "0v"])
    kind = rng.randrange(3)
    if kind == 0:
        return f"({random_vector_text(rng, depth - 1)} + {random_vector_text(rng, depth - 1)})"
    if kind == 1:
        return f"-({random_vector_text(rng, depth - 1)})"
    return f"{rng.choice(['a', 'b', '2', '-1/2'])} * ({random_vector_text(rng, depth - 1)})"


def random_ip_matrix(rng):
    """A quantifier-free formula over free vectors u, v, w and scalars a, b."""
    atoms = []
    for _ in range(rng.randint(1, 3)):
        left, right = random_vector_text(rng), random_vector_text(rng)
        if rng.random() < 0.25:
            atoms.append(f"{left} + 0v = {right}")
        else:
            rhs = rng.choice(["a * inner(u, v)", "inner(w, w)", "b", str(rng.randint(-3, 3))])
            atoms.append(f"inner({left}, {right}) {rng.choice(RELATIONS)} {rhs}")
    return parse(f" {rng.choice(['&', '|', '<->'])} ".join(atoms))


def scalar_binders(f) -> int:
    count = 0
    while isinstance(f, (Forall, Exists)):
        count += 1
        f = f.body
    return count


class TestDimensionConstraint:
    """Test --dim parsing"""

    def test_parse(self):
        assert DimensionConstraint.parse("any") == ANY
        assert DimensionConstraint.parse("Infinite") == INFINITE
        assert DimensionConstraint.parse("exactly:2") == DimensionConstraint(ConstraintTag.EXACTLY, 2)
        assert str(DimensionConstraint.parse("atmost:3")) == "atmost:3"

    @pytest.mark.parametrize("text", ["bogus", "exactly", "exactly:-1", "exactly:two", "finite:2"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            DimensionConstraint.parse(text)


class TestDimensionSet:
    """Test dimension set bookkeeping"""

    def test_cofinite(self):
        dims = DimensionSet(True, frozenset({0}))
        assert not dims.contains(0)
        assert dims.contains(5)
        assert dims.contains(None)
        assert dims.describe() == "cofinite, excluding {0}"

    def test_finite(self):
        dims = DimensionSet(False, frozenset({0, 2}))
        assert dims.contains(2)
        assert not dims.contains(None)
        assert dims.describe() == "finite {0, 2}"
        assert DimensionSet(False).is_empty()

    def test_constraints(self):
        dims = DimensionSet(True, frozenset({0}))
        assert not satisfies_constraint(dims, ANY)
        assert not satisfies_constraint(dims, FINITE)
        assert satisfies_constraint(dims, INFINITE)
        assert satisfies_constraint(dims, DimensionConstraint(ConstraintTag.EXACTLY, 1))
        assert not satisfies_constraint(dims, DimensionConstraint(ConstraintTag.AT_MOST, 1))


class TestStandardForm:
    """Test the rewriting into inner products of variables"""

    def test_inner_of_sums(self):
        f = parse("forall v:V, w:V. inner(v + w, 2 * v) = norm(v) * norm(v)")
        std = standard_form(f)
        assert is_standard(std)
        assert not is_standard(f)

    def test_vector_equation(self):
        std = standard_form(parse("forall v:V, w:V. v + w = w + v"))
        assert is_standard(std)
        assert decide_ip(std) == Status.VALID

    def test_distance_is_rejected(self):
        with pytest.raises(LanguageError):
            standard_form(parse("forall v:V. d(v, v) = 0"))

    def test_truth_is_preserved_in_three_dimensions(self):
        rng = random.Random(29)
        pool = [tuple(F(rng.randint(-2, 2)) for _ in range(3)) for _ in range(4)]
        for _ in range(100):
            f = random_ip_matrix(rng)
            std = standard_form(f)
            assert is_standard(std)
            env = {name: rng.choice(pool) for name in ("u", "v", "w")}
            env.update(a=F(rng.randint(-3, 3), rng.randint(1, 2)), b=F(rng.randint(-3, 3)))
            assert evaluate(std, env, dim=3) == evaluate(f, env, dim=3), print_formula(f)


class TestCoordinates:
    """Test the translation into real-field sentences"""

    def test_zero_dimensional_space(self):
        assert decide(res(parse(NONZERO_VECTOR), 0)) == Status.INVALID

    def test_line(self):
        assert decide(res(parse(NONZERO_VECTOR), 1)) == Status.VALID

    def test_translation_is_vector_free(self):
        translated = res(parse("forall v:V, w:V. inner(v, w) = inner(w, v)"), 3)
        assert not has_vectors(translated)
        assert free_variables(translated) == {}

    def test_negative_dimension(self):
        with pytest.raises(ValueError):
            res(parse(NONZERO_VECTOR), -1)

    @pytest.mark.parametrize("text", [
        "forall v:V. inner(v, v) >= {c}",
        "exists v:V. inner(v, v) = {c}",
        "forall v:V. exists r:R. r * r = inner(v, v) + {c}",
    ])
    @pytest.mark.parametrize("c", [-1, 0, 2])
    def test_one_vector_sentences_are_stable_from_dimension_one(self, text, c):
        p = parse(text.format(c=c))
        assert decide(res(p, 1)) == decide(res(p, 2))

    def test_dimension_sentences(self):
        assert decide(res(dim_le_sentence(0), 0)) == Status.VALID
        assert decide(res(dim_le_sentence(0), 1)) == Status.INVALID
        assert decide(res(dim_le_sentence(1), 1)) == Status.VALID

    def test_quantified_vectors_get_triangular_coordinates(self):
        p = parse(ORTHONORMAL_PAIR)
        assert scalar_binders(res(p, 5)) == 3
        assert scalar_binders(res(p, 5, triangular=False)) == 10
        assert scalar_binders(res(p, 1)) == 2

    def test_free_vectors_get_every_coordinate(self):
        assert len(free_variables(res(parse("inner(v, v) > 0"), 3))) == 3

    def test_orthonormal_pair_needs_the_plane(self):
        p = parse(ORTHONORMAL_PAIR)
        expected = [Status.INVALID, Status.INVALID, Status.VALID, Status.VALID, Status.VALID]
        assert [decide(res(p, n)) for n in range(5)] == expected

    def test_triangular_coordinates_agree_with_full_coordinates(self):
        rng = random.Random(37)
        for _ in range(40):
            p = random_ip_sentence(rng, max_vectors=1)
            assert decide(res(p, 2)) == decide(res(p, 2, triangular=False)), print_formula(p)

    @pytest.mark.slow
    def test_translation_is_stable_past_the_vector_count(self):
        """Truth in R^k, R^(k+1) and R^(k+2) agrees for k vector variables"""
        rng = random.Random(31)
        for _ in range(100):
            p = random_ip_sentence(rng)
            k = count_vector_vars(p)
            truths = [decide(res(p, n)) for n in (k, k + 1, k + 2)]
            assert len(set(truths)) == 1, print_formula(p)


class TestDecisions:
    """Test validity under dimension constraints"""

    def test_axioms_are_valid(self):
        for axiom in theory_axioms(Theory.IP):
            assert decide_ip(axiom) == Status.VALID

    def test_nonzero_vector_depends_on_dimension(self):
        p = parse(NONZERO_VECTOR)
        assert decide_ip(p, ANY) == Status.INVALID
        assert decide_ip(p, INFINITE) == Status.VALID
        assert decide_ip(p, DimensionConstraint.parse("exactly:0")) == Status.INVALID
        assert decide_ip(p, DimensionConstraint.parse("exactly:2")) == Status.VALID

    def test_dimension_set(self):
        assert dimension_set(parse(NONZERO_VECTOR)) == DimensionSet(True, frozenset({0}))
        assert dimension_set(dim_le_sentence(0)) == DimensionSet(False, frozenset({0}))

    def test_orthonormal_pair_dimension_set(self):
        dims = dimension_set(parse(ORTHONORMAL_PAIR))
        assert dims == DimensionSet(True, frozenset({0, 1}))
        assert dims.describe() == "cofinite, excluding {0, 1}"

    def test_parallel_jobs_agree(self):
        p = parse(NONZERO_VECTOR)
        assert dimension_set(p, jobs=2) == dimension_set(p, jobs=1)

    def test_star_preserves_dimensions(self):
        p = parse(NONZERO_VECTOR)
        starred = star(p)
        assert isinstance(starred, Or)
        assert dimension_set(starred) == dimension_set(p)


class TestSpecialForm:
    """Test Gram-variable special forms"""

    def test_unit_vector(self):
        special = special_form(parse("exists v:V. inner(v, v) = 1"))
        assert special.vectors == ()
        formula = special.to_formula()
        assert not has_vectors(formula)
        assert decide(formula) == Status.VALID

    def test_nonzero_vector(self):
        formula = special_form(parse("exists v:V. ~(v = 0v)")).to_formula()
        assert decide(formula) == Status.VALID

    def test_free_vectors_keep_gram_variables(self):
        special = special_form(parse("inner(v, w) > 0"))
        assert special.vectors == ("v", "w")
        assert set(special.gram) == {("v", "w")}


class TestPolarization:
    """Test the inner-product to normed-space translation"""

    def test_no_inner_products_remain(self):
        result = polarize(parse("forall v:V, w:V. inner(v, w) = inner(w, v)"))
        assert isinstance(result, Implies)
        assert not any(isinstance(t, Inner) for t in iter_formula_subterms(result))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
