"""Bound tables induced by orderings of the sample space, and their quality.

Choose a total order of the sample space.  The bound attached to the
sample at position ``k`` is the least mean any distribution can have while
giving the suffix from ``k`` onward probability above ``alpha``; solving
that for every position yields a bound table that is nondecreasing along
the order by construction.

Not all orders are worth using.  An order whose first element is not the
all-least sample wastes its opening positions (their bounds are pinned at
zero); tied adjacent bounds can sometimes be improved by swapping the two
samples without hurting anything else.  The classification logic below
sorts orders into admissible / inadmissible / undetermined on exactly
those grounds, testing tie breakability by recomputing the single suffix
a swap changes.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import SampleSpace
from .likelihood import Distribution
from .solver import (
    CapExceededError,
    CentralProblem,
    NonConvergenceError,
    SolveResult,
    SolverConfig,
    solve_central,
)

__all__ = [
    "Ordering",
    "BoundEntry",
    "BoundTable",
    "TieCluster",
    "BreakabilityRecord",
    "AdmissibilityReport",
    "standard_ordering",
    "load_order_file",
    "compute_bound_table",
    "detect_ties",
    "test_breakability",
    "classify_admissibility",
    "enumerate_admissible",
    "table_to_jsonable",
]


@dataclass(frozen=True)
class Ordering:
    """A total order of the sample space: position -> reference index."""

    perm: tuple[int, ...]
    label: str = ""

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError("perm must be a permutation of 0..N-1")

    @property
    def size(self) -> int:
        return len(self.perm)

    def position_of(self, sample_index: int) -> int:
        return self.perm.index(sample_index)

    def reversed(self) -> "Ordering":
        return Ordering(perm=tuple(reversed(self.perm)), label=f"reverse_of:{self.label}")


def standard_ordering(space: SampleSpace, kind: str, base: Ordering | None = None,
                      path: str | None = None) -> Ordering:
    """Construct one of the stock orderings.

    ``lexicographic`` is the reference enumeration itself.  ``sample_mean``
    sorts by sample mean ascending with lexicographic tie-break.
    ``reverse_of`` needs ``base``; ``from_file`` needs ``path``.
    """
    n = space.size
    if kind == "lexicographic":
        return Ordering(perm=tuple(range(n)), label="lexicographic")
    if kind == "sample_mean":
        means = space.sample_means()
        order = sorted(range(n), key=lambda i: (means[i], i))
        return Ordering(perm=tuple(order), label="sample_mean")
    if kind == "reverse_of":
        if base is None:
            raise ValueError("reverse_of needs a base ordering")
        if base.size != n:
            raise ValueError("base ordering size does not match the space")
        return base.reversed()
    if kind == "from_file":
        if path is None:
            raise ValueError("from_file needs a path")
        return load_order_file(path, n)
    raise ValueError(f"unknown ordering kind {kind!r}")


def load_order_file(path: str, n: int) -> Ordering:
    """Order file: one line of N whitespace-separated 0-based sample indices."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    try:
        perm = tuple(int(t) for t in tokens)
    except ValueError:
        raise ValueError(f"order file {path!r} must contain only integers") from None
    if len(perm) != n:
        raise ValueError(f"order file has {len(perm)} indices, expected {n}")
    return Ordering(perm=perm, label=f"file:{os.path.basename(path)}")


@dataclass(frozen=True)
class BoundEntry:
    sample_index: int
    bound: float
    argmin: Distribution | None
    on_boundary: bool


@dataclass(frozen=True)
class BoundTable:
    """Solved bounds for every position of one ordering at one level."""

    ordering: Ordering
    alpha: float
    entries: tuple[BoundEntry, ...]

    def __post_init__(self):
        if len(self.entries) != self.ordering.size:
            raise ValueError("one entry per position required")

    def values_by_position(self) -> np.ndarray:
        return np.array([e.bound for e in self.entries], dtype=np.float64)

    def values_by_sample(self) -> np.ndarray:
        out = np.empty(len(self.entries), dtype=np.float64)
        for e in self.entries:
            out[e.sample_index] = e.bound
        return out


def _solve_position(space: SampleSpace, perm, k: int, alpha: float,
                    config: SolverConfig) -> SolveResult:
    ids = perm[k:]
    try:
        return solve_central(CentralProblem.from_member_ids(space, ids, alpha), config)
    except NonConvergenceError as err:
        err.context["position"] = k + 1
        raise


def compute_bound_table(space: SampleSpace, ordering: Ordering, alpha: float,
                        config: SolverConfig | None = None) -> BoundTable:
    """Solve every position's suffix problem; verify monotonicity on the way out."""
    config = config or SolverConfig()
    if ordering.size != space.size:
        raise ValueError("ordering size does not match the sample space")
    perm = ordering.perm
    ks = range(space.size)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(
                lambda k: _solve_position(space, perm, k, alpha, config), ks
            ))
    else:
        results = [_solve_position(space, perm, k, alpha, config) for k in ks]
    entries = tuple(
        BoundEntry(sample_index=perm[k], bound=r.bound, argmin=r.argmin,
                   on_boundary=r.on_boundary)
        for k, r in zip(ks, results)
    )
    previous = -math.inf
    for k, e in enumerate(entries):
        if e.bound < previous - config.mean_tol:
            raise RuntimeError(
                f"bound table not nondecreasing at position {k + 1}: "
                f"{e.bound} after {previous}"
            )
        previous = max(previous, e.bound)
    return BoundTable(ordering=ordering, alpha=alpha, entries=entries)


@dataclass(frozen=True)
class TieCluster:
    """Maximal run of positions whose bounds pairwise agree within tolerance.

    ``start``..``end`` are 0-based positions, inclusive, with ``end > start``.
    ``boundary_consistent`` records whether every finite argmin in the run
    sits on the simplex boundary -- the necessary condition for a genuine
    tie; an interior argmin marks the cluster as numerically suspect.
    """

    start: int
    end: int
    value: float
    boundary_consistent: bool


def detect_ties(table: BoundTable, tie_tol: float = 1e-7) -> tuple[TieCluster, ...]:
    """Maximal runs of (pairwise) tied adjacent bounds; +inf runs tie together."""
    entries = table.entries
    clusters = []
    k = 0
    n = len(entries)
    while k < n:
        j = k
        if math.isinf(entries[k].bound):
            while j + 1 < n and math.isinf(entries[j + 1].bound):
                j += 1
        else:
            lo = hi = entries[k].bound
            while j + 1 < n and math.isfinite(entries[j + 1].bound):
                nlo = min(lo, entries[j + 1].bound)
                nhi = max(hi, entries[j + 1].bound)
                if nhi - nlo > tie_tol:
                    break
                lo, hi = nlo, nhi
                j += 1
        if j > k:
            members = entries[k:j + 1]
            boundary_ok = all(e.on_boundary for e in members if e.argmin is not None)
            clusters.append(TieCluster(start=k, end=j, value=members[0].bound,
                                       boundary_consistent=boundary_ok))
        k = j + 1
    return tuple(clusters)


@dataclass(frozen=True)
class BreakabilityRecord:
    """Swap test for the adjacent pair at (position, position + 1), 0-based."""

    position: int
    swapped_bound: float | None
    verdict: str  # breakable | unbreakable | undetermined


def test_breakability(space: SampleSpace, ordering: Ordering, alpha: float,
                      cluster: TieCluster, config: SolverConfig | None = None
                      ) -> tuple[BreakabilityRecord, ...]:
    """Try each adjacent swap inside a tie cluster.

    Swapping positions ``k`` and ``k+1`` leaves every suffix unchanged
    except the one starting at ``k+1``, so one solve per pair decides the
    matter: a bound rising by more than ``tie_tol`` means the tie was
    breakable there; an unchanged bound means that swap cannot help.
    """
    config = config or SolverConfig()
    perm = ordering.perm
    records = []
    for k in range(cluster.start, cluster.end):
        ids = (perm[k],) + tuple(perm[k + 2:])
        try:
            res = solve_central(CentralProblem.from_member_ids(space, ids, alpha), config)
        except NonConvergenceError:
            records.append(BreakabilityRecord(position=k, swapped_bound=None,
                                              verdict="undetermined"))
            continue
        b = res.bound
        tied = cluster.value
        if b > tied + config.tie_tol:
            verdict = "breakable"
        elif math.isinf(b) and math.isinf(tied):
            verdict = "unbreakable"
        elif b >= tied - config.tie_tol:
            verdict = "unbreakable"
        else:
            # A swap can never lower the remaining bound; seeing one means
            # the solves disagree beyond tolerance.
            verdict = "undetermined"
        records.append(BreakabilityRecord(position=k, swapped_bound=b, verdict=verdict))
    return tuple(records)


@dataclass(frozen=True)
class AdmissibilityReport:
    degenerate: bool
    injective: bool
    tie_clusters: tuple[TieCluster, ...]
    breakability: tuple[tuple[BreakabilityRecord, ...], ...]
    verdict: str  # admissible | inadmissible | undetermined
    note: str = ""


def _cluster_verdict(cluster: TieCluster, records) -> str:
    if any(r.verdict == "breakable" for r in records):
        return "breakable"
    if any(r.verdict == "undetermined" for r in records):
        return "undetermined"
    if not cluster.boundary_consistent and math.isfinite(cluster.value):
        # A genuine tie needs boundary argmins; an interior argmin with no
        # breaking swap found is numerical noise we refuse to certify.
        return "undetermined"
    return "unbreakable"


def classify_admissibility(space: SampleSpace, ordering: Ordering, alpha: float,
                           config: SolverConfig | None = None,
                           table: BoundTable | None = None) -> AdmissibilityReport:
    """Sort an ordering into admissible / inadmissible / undetermined.

    Degeneracy (all-least sample not first) is checked structurally before
    any solving: such an order is inadmissible outright, its zero prefix
    is a known tie cluster, and only the swap pulling the all-least sample
    forward can break it.
    """
    config = config or SolverConfig()
    perm = ordering.perm
    zero = space.zero_index
    if perm[0] != zero and table is None:
        k = perm.index(zero)
        prefix = TieCluster(start=0, end=k, value=0.0, boundary_consistent=True)
        records = tuple(
            BreakabilityRecord(
                position=i,
                swapped_bound=None if i == k - 1 else 0.0,
                verdict="breakable" if i == k - 1 else "unbreakable",
            )
            for i in range(k)
        )
        return AdmissibilityReport(
            degenerate=True,
            injective=False,
            tie_clusters=(prefix,),
            breakability=(records,),
            verdict="inadmissible",
            note="degenerate order classified structurally; suffixes beyond the "
                 "zero prefix were not solved",
        )
    if table is None:
        table = compute_bound_table(space, ordering, alpha, config)
    degenerate = perm[0] != zero
    clusters = detect_ties(table, config.tie_tol)
    injective = len(clusters) == 0
    breakability = tuple(
        test_breakability(space, ordering, alpha, c, config) for c in clusters
    )
    if degenerate:
        verdict = "inadmissible"
    elif injective:
        verdict = "admissible"
    else:
        cluster_verdicts = [_cluster_verdict(c, r) for c, r in zip(clusters, breakability)]
        if any(v == "breakable" for v in cluster_verdicts):
            verdict = "inadmissible"
        elif any(v == "undetermined" for v in cluster_verdicts):
            verdict = "undetermined"
        else:
            verdict = "admissible"
    return AdmissibilityReport(
        degenerate=degenerate,
        injective=injective,
        tie_clusters=clusters,
        breakability=breakability,
        verdict=verdict,
    )


def _vectors_match(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    inf_a = np.isinf(a)
    inf_b = np.isinf(b)
    if not np.array_equal(inf_a, inf_b):
        return False
    fin = ~inf_a
    return bool(np.all(np.abs(a[fin] - b[fin]) <= tol))


def enumerate_admissible(space: SampleSpace, alpha: float,
                         config: SolverConfig | None = None,
                         cap: int = 5040):
    """All distinct admissible bound functions, by exhausting orderings.

    Only orders starting with the all-least sample can be admissible, so
    ``(N-1)!`` orderings are tried; the call refuses with
    :class:`CapExceededError` when that count exceeds ``cap``.  Results are
    deduplicated by their bound-value vectors within ``tie_tol``.
    Returns ``(ordering, table, report)`` triples.
    """
    config = config or SolverConfig()
    n = space.size
    total = math.factorial(n - 1)
    if total > cap:
        raise CapExceededError(
            f"enumerating {total} orderings exceeds the cap {cap}"
        )
    zero = space.zero_index
    rest = [i for i in range(n) if i != zero]
    kept: list[tuple[Ordering, BoundTable, AdmissibilityReport]] = []
    vectors: list[np.ndarray] = []
    for tail in itertools.permutations(rest):
        perm = (zero,) + tail
        ordering = Ordering(perm=perm, label="perm:" + ",".join(map(str, perm)))
        table = compute_bound_table(space, ordering, alpha, config)
        report = classify_admissibility(space, ordering, alpha, config, table=table)
        if report.verdict != "admissible":
            continue
        vec = table.values_by_sample()
        if any(_vectors_match(vec, v, config.tie_tol) for v in vectors):
            continue
        vectors.append(vec)
        kept.append((ordering, table, report))
    return kept


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _bound_out(value: float, shift: float, raw: bool):
    if math.isinf(value):
        return math.inf
    return value if raw else value + shift


def table_to_jsonable(space: SampleSpace, table: BoundTable,
                      report: AdmissibilityReport | None = None,
                      raw: bool = False) -> dict:
    """JSON-ready bound table; bounds in original units unless ``raw``."""
    shift = space.support.shift
    entries = []
    for e in table.entries:
        entries.append({
            "sample": [int(c) for c in space.samples[e.sample_index].counts],
            "bound": _bound_out(e.bound, shift, raw),
            "argmin": None if e.argmin is None else [float(x) for x in e.argmin.probs],
            "on_boundary": bool(e.on_boundary),
        })
    out = {
        "alpha": float(table.alpha),
        "ordering": [int(i) for i in table.ordering.perm],
        "entries": entries,
    }
    if report is not None:
        out["report"] = report_to_jsonable(report, shift=shift, raw=raw)
    return out


def report_to_jsonable(report: AdmissibilityReport, shift: float = 0.0,
                       raw: bool = False) -> dict:
    clusters = [{
        "start": c.start,
        "end": c.end,
        "value": _bound_out(c.value, shift, raw),
        "boundary_consistent": bool(c.boundary_consistent),
    } for c in report.tie_clusters]
    breakability = [[{
        "position": r.position,
        "swapped_bound": None if r.swapped_bound is None
        else _bound_out(r.swapped_bound, shift, raw),
        "verdict": r.verdict,
    } for r in records] for records in report.breakability]
    out = {
        "degenerate": bool(report.degenerate),
        "injective": bool(report.injective),
        "tie_clusters": clusters,
        "breakability": breakability,
        "verdict": report.verdict,
    }
    if report.note:
        out["note"] = report.note
    return out
