import math

import numpy as np
import pytest

from meanlcb.analysis import (
    BoundFunction,
    PriorConfig,
    compare,
    count_possible_error_sets,
    error_set,
    realizable_error_sets,
    simulate_coverage,
    verify_validity,
)
from meanlcb.bounds import standard_ordering, compute_bound_table
from meanlcb.lattice import enumerate_sample_space, normalize_support
from meanlcb.likelihood import Distribution, build_subset_likelihood, evaluate
from meanlcb.solver import CapExceededError, SolverConfig

SQRT35 = math.sqrt(0.35)
TWO_OF_TWO = 1.0 - math.sqrt(0.65)


def make_space(values, n):
    return enumerate_sample_space(normalize_support(values), n)


@pytest.fixture(scope="module")
def binom2():
    return make_space([0, 1], 2)


@pytest.fixture(scope="module")
def binom2_bound(binom2):
    table = compute_bound_table(binom2, standard_ordering(binom2, "lexicographic"),
                                0.35)
    return BoundFunction.from_table(table)


class TestBoundFunction:
    def test_validation(self):
        with pytest.raises(ValueError, match="1-D"):
            BoundFunction(np.zeros((2, 2)))
        with pytest.raises(ValueError, match="nonempty"):
            BoundFunction(np.array([]))
        with pytest.raises(ValueError, match="NaN"):
            BoundFunction(np.array([0.0, math.nan]))
        with pytest.raises(ValueError, match="nonnegative"):
            BoundFunction(np.array([0.0, -0.1]))

    def test_infinite_entries_allowed(self):
        bf = BoundFunction(np.array([0.0, math.inf]))
        assert math.isinf(bf.values[1])

    def test_values_read_only(self, binom2_bound):
        with pytest.raises(ValueError):
            binom2_bound.values[0] = 7.0

    def test_from_table(self, binom2):
        table = compute_bound_table(binom2, standard_ordering(binom2, "lexicographic"),
                                    0.35)
        bf = BoundFunction.from_table(table)
        np.testing.assert_array_equal(bf.values, table.values_by_sample())
        assert bf.provenance.startswith("table:")

    def test_constant(self):
        bf = BoundFunction.constant(4, 0.25)
        assert bf.size == 4
        assert set(bf.values) == {0.25}

    def test_file_round_trip_with_shift_and_inf(self, tmp_path):
        # Files carry original units; support {5,6} has shift 5.
        space = make_space([5, 6], 2)
        path = tmp_path / "bound.txt"
        path.write_text("# comment\n0 5.0\n2 inf\n1 5.25\n")
        bf = BoundFunction.from_file(str(path), space)
        assert bf.values[0] == 0.0
        assert bf.values[1] == 0.25
        assert math.isinf(bf.values[2])

    def test_file_errors(self, tmp_path, binom2):
        bad = tmp_path / "a.txt"
        bad.write_text("0 1 2\n")
        with pytest.raises(ValueError, match="index value"):
            BoundFunction.from_file(str(bad), binom2)
        dupe = tmp_path / "b.txt"
        dupe.write_text("0 0.0\n0 0.1\n1 0.2\n2 0.3\n")
        with pytest.raises(ValueError, match="duplicate"):
            BoundFunction.from_file(str(dupe), binom2)
        missing = tmp_path / "c.txt"
        missing.write_text("0 0.0\n1 0.1\n")
        with pytest.raises(ValueError, match="cover"):
            BoundFunction.from_file(str(missing), binom2)


class TestErrorSets:
    def test_strict_exceedance(self):
        bf = BoundFunction(np.array([0.0, 0.5, 1.0]))
        assert error_set(bf, 0.5) == (2,)
        assert error_set(bf, 0.49) == (1, 2)

    def test_infinite_always_member(self):
        bf = BoundFunction(np.array([0.0, math.inf]))
        assert 1 in error_set(bf, 1e9)

    def test_nested_in_mu(self, binom2_bound):
        mus = np.linspace(0.0, 1.0, 50)
        sets = [set(error_set(binom2_bound, mu)) for mu in mus]
        assert all(b <= a for a, b in zip(sets, sets[1:]))

    def test_count_injective(self, binom2_bound):
        # All three values distinct: N + 1 possible sets.
        assert count_possible_error_sets(binom2_bound) == 4

    def test_count_constant(self):
        assert count_possible_error_sets(BoundFunction.constant(5, 0.3)) == 2

    def test_count_with_repeats(self):
        bf = BoundFunction(np.array([0.0, 0.0, 0.6]))
        assert count_possible_error_sets(bf) == 3

    def test_count_with_inf(self):
        bf = BoundFunction(np.array([0.0, 0.2, math.inf]))
        assert count_possible_error_sets(bf) == 3
        sets = realizable_error_sets(bf)
        assert sets[-1] == (2,)

    def test_count_all_inf(self):
        bf = BoundFunction(np.array([math.inf, math.inf]))
        assert count_possible_error_sets(bf) == 1
        assert realizable_error_sets(bf) == [(0, 1)]

    def test_tolerance_merges_levels(self):
        bf = BoundFunction(np.array([0.0, 1e-9, 0.5]))
        assert count_possible_error_sets(bf) == 4
        assert count_possible_error_sets(bf, tol=1e-7) == 3

    def test_sweep_matches_count(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            vals = rng.choice([0.0, 0.1, 0.1, 0.4, 0.7, math.inf],
                              size=rng.integers(1, 7))
            bf = BoundFunction(vals)
            sets = realizable_error_sets(bf)
            assert len(sets) == count_possible_error_sets(bf)
            assert all(set(b) < set(a) for a, b in zip(sets, sets[1:]))


class TestVerifyValidity:
    def test_constant_zero_valid(self, binom2):
        rep = verify_validity(binom2, BoundFunction.constant(3, 0.0), 0.35)
        assert rep.verdict == "valid"
        assert rep.max_error_prob == 0.0
        assert rep.method == "refined"

    def test_constant_half_invalid(self, binom2):
        # Distributions with mean below 0.5 see every sample as an error.
        rep = verify_validity(binom2, BoundFunction.constant(3, 0.5), 0.05)
        assert rep.verdict == "invalid"
        assert rep.max_error_prob == pytest.approx(1.0, abs=1e-9)
        assert rep.witness is not None

    def test_true_table_valid(self, binom2, binom2_bound):
        rep = verify_validity(binom2, binom2_bound, 0.35)
        assert rep.verdict == "valid"
        assert rep.max_error_prob <= 0.35 - rep.margin
        assert rep.max_error_prob > 0.3499
        assert all(d["kind"] == "exact" for d in rep.details)

    def test_tied_table_valid(self):
        space = make_space([0, 1, 3], 2)
        table = compute_bound_table(space, standard_ordering(space, "sample_mean"),
                                    0.35)
        rep = verify_validity(space, BoundFunction.from_table(table), 0.35)
        assert rep.verdict == "valid"

    def test_raised_entry_invalid_with_witness(self, binom2, binom2_bound):
        vals = binom2_bound.values.copy()
        vals[1] += 1e-3
        rep = verify_validity(binom2, BoundFunction(vals), 0.35)
        assert rep.verdict == "invalid"
        assert rep.max_error_prob > 0.35 + 1e-6
        # The witness is a concrete counterexample: its own error set
        # genuinely carries the reported probability.
        w = rep.witness
        ids = error_set(BoundFunction(vals), w.mean(binom2.support))
        prob = evaluate(build_subset_likelihood(binom2, ids), w)
        assert prob >= rep.max_error_prob - 1e-9

    def test_raised_zero_entry_invalid(self, binom2, binom2_bound):
        # Claiming a positive mean at the all-least sample fails under
        # distributions concentrated there: the error set is everything.
        vals = binom2_bound.values.copy()
        vals[0] = 1e-3
        rep = verify_validity(binom2, BoundFunction(vals), 0.35)
        assert rep.verdict == "invalid"
        assert rep.max_error_prob == pytest.approx(1.0, abs=1e-9)

    def test_hairline_raise_never_valid(self, binom2, binom2_bound):
        # A raise of ten mean-tolerances sits inside the tie-detection
        # width, yet certification must still refuse it.
        for k in (1, 2):
            vals = binom2_bound.values.copy()
            vals[k] += 1e-8
            rep = verify_validity(binom2, BoundFunction(vals), 0.35)
            assert rep.verdict in ("invalid", "undetermined"), k

    def test_grid_only_cannot_certify_critical(self, binom2, binom2_bound):
        rep = verify_validity(binom2, binom2_bound, 0.35, refine=False)
        assert rep.method == "grid"
        assert rep.verdict == "undetermined"
        assert rep.margin == pytest.approx(2.0 * 2 * 2 / 500)

    def test_grid_only_certifies_slack(self, binom2):
        rep = verify_validity(binom2, BoundFunction.constant(3, 0.0), 0.35,
                              refine=False)
        assert rep.verdict == "valid"

    def test_validation_errors(self, binom2, binom2_bound):
        with pytest.raises(ValueError, match="alpha"):
            verify_validity(binom2, binom2_bound, 1.5)
        with pytest.raises(ValueError, match="resolution"):
            verify_validity(binom2, binom2_bound, 0.35, resolution=0)
        with pytest.raises(ValueError, match="does not match"):
            verify_validity(binom2, BoundFunction.constant(4, 0.0), 0.35)

    def test_cell_cap_refusal(self):
        space = make_space([0, 1, 3], 2)
        bf = BoundFunction.constant(space.size, 0.0)
        with pytest.raises(CapExceededError, match="cap"):
            verify_validity(space, bf, 0.35, resolution=5000,
                            config=SolverConfig(grid_cell_cap=100_000))


class TestSimulateCoverage:
    def test_zero_bound_never_errs(self, binom2):
        dist = Distribution(np.array([0.7, 0.3]))
        res = simulate_coverage(binom2, BoundFunction.constant(3, 0.0), dist, 2000)
        assert res.errors == 0
        assert res.error_rate == 0.0
        assert res.true_mean == pytest.approx(0.3)

    def test_point_mass_on_least_never_errs(self, binom2, binom2_bound):
        dist = Distribution(np.array([1.0, 0.0]))
        res = simulate_coverage(binom2, binom2_bound, dist, 1000)
        assert res.errors == 0

    def test_valid_bound_within_budget(self, binom2, binom2_bound):
        rng = np.random.default_rng(11)
        for _ in range(5):
            p = rng.dirichlet([2.0, 2.0])
            res = simulate_coverage(binom2, binom2_bound, Distribution(p),
                                    20_000, seed=int(rng.integers(1 << 30)))
            assert res.error_rate <= 0.35 + 4.0 * res.standard_error

    def test_deterministic(self, binom2, binom2_bound):
        dist = Distribution(np.array([0.6, 0.4]))
        a = simulate_coverage(binom2, binom2_bound, dist, 5000, seed=3)
        b = simulate_coverage(binom2, binom2_bound, dist, 5000, seed=3)
        assert (a.errors, a.error_rate, a.standard_error) == \
               (b.errors, b.error_rate, b.standard_error)

    def test_rate_consistency(self, binom2, binom2_bound):
        dist = Distribution(np.array([0.5, 0.5]))
        res = simulate_coverage(binom2, binom2_bound, dist, 4000, seed=9)
        assert res.error_rate == res.errors / res.trials
        want_se = math.sqrt(res.error_rate * (1 - res.error_rate) / res.trials)
        assert res.standard_error == pytest.approx(want_se)

    def test_validation(self, binom2, binom2_bound):
        dist = Distribution(np.array([0.6, 0.4]))
        with pytest.raises(ValueError, match="trials"):
            simulate_coverage(binom2, binom2_bound, dist, 0)
        with pytest.raises(ValueError, match="support"):
            simulate_coverage(binom2, binom2_bound,
                              Distribution(np.array([0.2, 0.3, 0.5])), 10)
        with pytest.raises(ValueError, match="sample space"):
            simulate_coverage(binom2, BoundFunction.constant(5, 0.0), dist, 10)


class TestCompare:
    def test_sample_aligned_dominates(self, binom2):
        a = BoundFunction(np.array([0.0, 0.2, 0.4]))
        b = BoundFunction(np.array([0.0, 0.1, 0.4]))
        res = compare(binom2, a, b)
        assert res.relation == "dominates"
        assert res.witnesses == {"a_gt_b": [1], "b_gt_a": []}
        assert compare(binom2, b, a).relation == "dominated"

    def test_sample_aligned_equal_within_tol(self, binom2):
        a = BoundFunction(np.array([0.0, 0.2, 0.4]))
        b = BoundFunction(np.array([0.0, 0.2 + 1e-12, 0.4]))
        assert compare(binom2, a, b).relation == "equal"

    def test_incomparable_admissible_pair(self, binom2):
        # The two admissible binomial tables each win at one sample.
        a = BoundFunction(np.array([0.0, TWO_OF_TWO, SQRT35]))
        b = BoundFunction(np.array([0.0, (1 - math.sqrt(0.3)) / 2, TWO_OF_TWO]))
        res = compare(binom2, a, b)
        assert res.relation == "incomparable"
        assert res.witnesses == {"a_gt_b": [2], "b_gt_a": [1]}
        # Sorted positionally the first table dominates outright: the two
        # metrics genuinely disagree on this pair.
        assert compare(binom2, a, b, metric="rank_ordered").relation == "dominates"

    def test_rank_ordered_ignores_placement(self, binom2):
        a = BoundFunction(np.array([0.0, 0.7, 0.2]))
        b = BoundFunction(np.array([0.0, 0.2, 0.7]))
        assert compare(binom2, a, b, metric="rank_ordered").relation == "equal"

    def test_expected_value_consistent_with_dominance(self, binom2):
        a = BoundFunction(np.array([0.0, 0.2, 0.4]))
        b = BoundFunction(np.array([0.0, 0.1, 0.4]))
        res = compare(binom2, a, b, metric="expected_value",
                      prior=PriorConfig(draws=4000, seed=5))
        assert res.relation == "dominates"
        assert res.details["diff"] > 0
        assert res.details["expected_a"] > res.details["expected_b"]

    def test_expected_value_infinite_entries(self, binom2):
        a = BoundFunction(np.array([0.0, 0.2, math.inf]))
        b = BoundFunction(np.array([0.0, 0.1, 0.4]))
        res = compare(binom2, a, b, metric="expected_value")
        assert res.relation == "dominates"
        assert res.details["a_infinite"] and not res.details["b_infinite"]
        assert math.isinf(res.details["expected_a"])
        both = compare(binom2, a, BoundFunction(np.array([0.0, 0.3, math.inf])),
                       metric="expected_value")
        assert both.relation == "equal"

    def test_expected_value_deterministic(self, binom2):
        a = BoundFunction(np.array([0.0, 0.2, 0.4]))
        b = BoundFunction(np.array([0.0, 0.21, 0.4]))
        r1 = compare(binom2, a, b, metric="expected_value")
        r2 = compare(binom2, a, b, metric="expected_value")
        assert r1.details == r2.details

    def test_infinite_ties_not_witnesses(self, binom2):
        a = BoundFunction(np.array([0.0, 0.2, math.inf]))
        b = BoundFunction(np.array([0.0, 0.2, math.inf]))
        res = compare(binom2, a, b)
        assert res.relation == "equal"

    def test_prior_vector(self):
        assert PriorConfig(concentration=2.0).vector(3).tolist() == [2.0] * 3
        assert PriorConfig(concentration=(1.0, 2.0)).vector(2).tolist() == [1.0, 2.0]
        with pytest.raises(ValueError, match="length"):
            PriorConfig(concentration=(1.0, 2.0)).vector(3)

    def test_validation(self, binom2):
        a = BoundFunction.constant(3, 0.1)
        with pytest.raises(ValueError, match="sizes"):
            compare(binom2, a, BoundFunction.constant(4, 0.1))
        with pytest.raises(ValueError, match="unknown comparison"):
            compare(binom2, a, a, metric="vibes")
