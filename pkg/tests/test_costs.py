import random

import pytest
from hypothesis import given, strategies as st

import helpers
from branchgen import (
    AdtError,
    ConstraintError,
    chi_square,
    only_cost,
    only_types_cost,
    parse_cost_expression,
    parse_universe,
    predict_constructors,
    renormalize_probmap,
    uniform_cost,
    uniform_probmap,
    weighted_cost,
    without_cost,
    without_types_cost,
)


class TestChiSquare:
    def test_identical_is_zero(self):
        assert chi_square([3.0, 4.0], [3.0, 4.0]) == 0.0

    def test_worked_values(self):
        assert chi_square([2.0, 4.0], [4.0, 4.0]) == pytest.approx(1.0)
        assert chi_square([0.0, 8.0], [4.0, 4.0]) == pytest.approx(8.0)

    def test_length_mismatch(self):
        with pytest.raises(AdtError):
            chi_square([1.0], [1.0, 2.0])

    def test_nonpositive_expected(self):
        with pytest.raises(AdtError, match="positive"):
            chi_square([1.0, 2.0], [1.0, 0.0])

    @given(st.lists(st.floats(min_value=0.01, max_value=1e6), min_size=1, max_size=10))
    def test_self_distance_zero(self, xs):
        assert chi_square(xs, xs) == 0.0

    @given(st.lists(st.tuples(st.floats(min_value=0, max_value=1e6),
                              st.floats(min_value=0.01, max_value=1e6)),
                    min_size=1, max_size=10))
    def test_nonnegative(self, pairs):
        obs = [o for o, _ in pairs]
        exp = [e for _, e in pairs]
        assert chi_square(obs, exp) >= 0.0


class TestUniform:
    def test_matches_direct_chi_square(self, tree_u):
        cost = uniform_cost(tree_u)
        probs = uniform_probmap(tree_u)
        predicted = predict_constructors(tree_u, probs, 10).totals()
        want = chi_square([predicted[c] for c in tree_u.family_constructors()],
                          [10.0] * 4)
        assert cost(10, probs) == want

    def test_degenerate_probs_cost_more(self, tree_u):
        cost = uniform_cost(tree_u)
        balanced = {"Tree.LeafA": 0.135, "Tree.LeafB": 0.135,
                    "Tree.LeafC": 0.135, "Tree.Node": 0.595}
        degenerate = {"Tree.LeafA": 0.97, "Tree.LeafB": 0.01,
                      "Tree.LeafC": 0.01, "Tree.Node": 0.01}
        assert cost(10, degenerate) > cost(10, balanced)

    def test_pure(self, tree_u):
        cost = uniform_cost(tree_u)
        probs = uniform_probmap(tree_u)
        assert cost(10, probs) == cost(10, probs)


class TestWeighted:
    def test_all_ones_equals_uniform_bitwise(self, tree_u, t1t2_u):
        rng = random.Random(1)
        for u in (tree_u, t1t2_u):
            ones = dict.fromkeys(u.family_constructors(), 1)
            # listing order must not matter
            shuffled = list(ones)
            rng.shuffle(shuffled)
            w = weighted_cost(u, {c: 1 for c in shuffled})
            uni = uniform_cost(u)
            for size in (5, 10, 17):
                probs = helpers.random_probmap(rng, u)
                assert w(size, probs) == uni(size, probs)

    def test_unknown_constructor(self, tree_u):
        with pytest.raises(AdtError, match="unknown constructor"):
            weighted_cost(tree_u, {"Tree.Nope": 2})

    def test_empty(self, tree_u):
        with pytest.raises(AdtError, match="at least one"):
            weighted_cost(tree_u, {})

    def test_nonpositive_weight(self, tree_u):
        with pytest.raises(AdtError, match="positive"):
            weighted_cost(tree_u, {"Tree.Node": 0})

    def test_unlisted_do_not_contribute(self, tree_u):
        cost = weighted_cost(tree_u, {"Tree.LeafA": 1})
        probs = uniform_probmap(tree_u)
        predicted = predict_constructors(tree_u, probs, 10).totals()
        assert cost(10, probs) == pytest.approx(
            (predicted["Tree.LeafA"] - 10.0) ** 2 / 10.0)

    def test_foreign_constructor_rejected(self, composite_u):
        with pytest.raises(ConstraintError, match="not in the branching family"):
            weighted_cost(composite_u, {"Bool.True": 1})


class TestOnlyWithout:
    def test_only_pins_complement(self, tree_u):
        cost = only_cost(tree_u, ["LeafA", "Node"])
        assert cost.pinned == {"Tree.LeafB", "Tree.LeafC"}
        assert [c for c, _ in cost.targets] == ["Tree.LeafA", "Tree.Node"]

    def test_without_pins_list(self, tree_u):
        cost = without_cost(tree_u, ["LeafC"])
        assert cost.pinned == {"Tree.LeafC"}
        assert [c for c, _ in cost.targets] == [
            "Tree.LeafA", "Tree.LeafB", "Tree.Node"]

    def test_without_empty_equals_uniform_bitwise(self, tree_u):
        rng = random.Random(2)
        w = without_cost(tree_u, [])
        uni = uniform_cost(tree_u)
        for _ in range(3):
            probs = helpers.random_probmap(rng, tree_u)
            assert w(10, probs) == uni(10, probs)

    def test_excluding_all_terminals(self, tree_u):
        with pytest.raises(ConstraintError, match="terminal"):
            without_cost(tree_u, ["LeafA", "LeafB", "LeafC"])

    def test_only_keeping_nothing_of_a_type(self, t1t2_u):
        with pytest.raises(ConstraintError, match="every constructor"):
            only_cost(t1t2_u, ["T1.A", "T1.B"])

    def test_pinned_evaluation_is_exact_zero_mass(self, tree_u):
        cost = without_cost(tree_u, ["LeafC"])
        probs = renormalize_probmap(tree_u, uniform_probmap(tree_u), cost.pinned)
        assert probs["Tree.LeafC"] == 0.0
        predicted = predict_constructors(tree_u, probs, 10).totals()
        assert predicted["Tree.LeafC"] == 0.0


class TestTypeFilters:
    def test_without_types_propagates(self, t1t2_u):
        cost = without_types_cost(t1t2_u, ["T2"])
        # B references T2, so pinning T2's constructors also kills B
        assert cost.pinned == {"T2.C", "T2.D", "T1.B"}
        assert [c for c, _ in cost.targets] == ["T1.A"]
        probs = renormalize_probmap(t1t2_u, uniform_probmap(t1t2_u), cost.pinned)
        assert probs == {"T1.A": 1.0, "T1.B": 0.0, "T2.C": 0.0, "T2.D": 0.0}
        # the process degenerates to the terminal A
        totals = predict_constructors(t1t2_u, probs, 10).totals()
        assert totals["T1.A"] == pytest.approx(1.0)
        assert totals["T1.B"] == totals["T2.C"] == totals["T2.D"] == 0.0

    def test_only_types_all_equals_uniform(self, t1t2_u):
        rng = random.Random(3)
        w = only_types_cost(t1t2_u, ["T1", "T2"])
        uni = uniform_cost(t1t2_u)
        probs = helpers.random_probmap(rng, t1t2_u)
        assert w(10, probs) == uni(10, probs)
        assert w.pinned == frozenset()

    def test_root_exclusion(self, t1t2_u):
        with pytest.raises(ConstraintError, match="root"):
            only_types_cost(t1t2_u, ["T2"])
        with pytest.raises(ConstraintError, match="root"):
            without_types_cost(t1t2_u, ["T1"])

    def test_disconnection_detected(self):
        u = parse_universe("data T1 = B T1 T2 | E T2\ndata T2 = C | D T1", "T1")
        with pytest.raises(ConstraintError, match="disconnect|terminate"):
            without_types_cost(u, ["T2"])

    def test_unknown_type(self, t1t2_u):
        with pytest.raises(AdtError, match="unknown type"):
            without_types_cost(t1t2_u, ["T9"])

    def test_foreign_type_rejected(self, composite_u):
        with pytest.raises(ConstraintError, match="not in the branching family"):
            without_types_cost(composite_u, ["Bool"])


class TestCostExpressions:
    def test_uniform(self, tree_u):
        assert parse_cost_expression(tree_u, "uniform").label == "uniform"

    def test_weighted(self, tree_u):
        cost = parse_cost_expression(
            tree_u, "weighted(Tree.LeafA=3,Tree.LeafB=1,Tree.LeafC=1)")
        assert dict(cost.targets) == {
            "Tree.LeafA": 3.0, "Tree.LeafB": 1.0, "Tree.LeafC": 1.0}

    def test_only_without(self, tree_u):
        assert parse_cost_expression(
            tree_u, "only(Tree.LeafA,Tree.Node)").pinned == {
                "Tree.LeafB", "Tree.LeafC"}
        assert parse_cost_expression(tree_u, "without(Tree.LeafC)").pinned == {
            "Tree.LeafC"}

    def test_type_filters(self, t1t2_u):
        assert parse_cost_expression(t1t2_u, "withoutTypes(T2)").pinned == {
            "T2.C", "T2.D", "T1.B"}
        assert parse_cost_expression(t1t2_u, "onlyTypes(T1,T2)").pinned == frozenset()

    def test_bare_names_resolve(self, tree_u):
        cost = parse_cost_expression(tree_u, "weighted(LeafA=3,Node=1)")
        assert dict(cost.targets) == {"Tree.LeafA": 3.0, "Tree.Node": 1.0}

    def test_rejects_garbage(self, tree_u):
        for text in ("nope", "weighted(X)", "weighted(LeafA=much)", "only()(", ""):
            with pytest.raises(AdtError):
                parse_cost_expression(tree_u, text)
