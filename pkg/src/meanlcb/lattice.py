"""Finite support sets and the lattice of unordered samples drawn from them.

A support set is a finite collection of known real values.  An observed
sample of size ``n`` is an unordered multiset of ``n`` of those values,
canonically represented by its counts vector: entry ``i`` counts how many
draws landed on support value ``i``.  The full collection of possible
samples forms a discrete simplex lattice with ``C(n + m - 1, m - 1)``
points for ``m`` support values.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SupportSet",
    "Sample",
    "SampleSpace",
    "normalize_support",
    "enumerate_sample_space",
    "sample_to_counts",
    "counts_to_sample",
    "multinomial_coefficient",
    "space_to_jsonable",
    "space_from_jsonable",
    "space_to_json",
]

# Largest sample size accepted for exact coefficient work.  Counting the
# lattice and the coefficients themselves stay exact far beyond this; the
# cap only exists to fail loudly on absurd requests instead of grinding.
MAX_SAMPLE_SIZE = 100_000


def normalize_support(raw) -> "SupportSet":
    """Build a :class:`SupportSet` from raw values.

    Values are sorted, exact duplicates are dropped, and the whole set is
    shifted so the least value is zero.  The shift is recorded so callers
    can report results in the original units.

    Raises ``ValueError`` for empty input or non-finite values.
    """
    values = [float(v) for v in raw]
    if len(values) == 0:
        raise ValueError("support set must contain at least one value")
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"support values must be finite, got {v!r}")
    uniq = sorted(set(values))
    shift = uniq[0]
    return SupportSet(values=tuple(v - shift for v in uniq), shift=shift)


@dataclass(frozen=True)
class SupportSet:
    """Known, strictly increasing support values, least value equal to 0.

    ``shift`` is the constant subtracted from the raw values during
    normalization; ``values[i] + shift`` recovers the original units.
    """

    values: tuple[float, ...]
    shift: float = 0.0

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("support set must contain at least one value")
        if self.values[0] != 0.0:
            raise ValueError("normalized support must start at 0; use normalize_support()")
        for a, b in zip(self.values, self.values[1:]):
            if not a < b:
                raise ValueError("support values must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def span(self) -> float:
        """Largest normalized support value (0 for a singleton support)."""
        return self.values[-1]

    def as_array(self) -> np.ndarray:
        arr = np.asarray(self.values, dtype=np.float64)
        arr.flags.writeable = False
        return arr


@dataclass(frozen=True)
class Sample:
    """One unordered sample: the sorted draws plus their counts vector."""

    sorted_values: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def size(self) -> int:
        return sum(self.counts)

    def mean(self) -> float:
        return sum(self.sorted_values) / len(self.sorted_values)


def sample_to_counts(support: SupportSet, draws) -> tuple[int, ...]:
    """Counts vector of an iterable of draws (values must lie in the support)."""
    counts = [0] * support.size
    index = {v: i for i, v in enumerate(support.values)}
    for d in draws:
        d = float(d)
        if d not in index:
            raise ValueError(f"draw {d!r} is not a support value")
        counts[index[d]] += 1
    return tuple(counts)


def counts_to_sample(support: SupportSet, counts) -> Sample:
    """Inverse of :func:`sample_to_counts`."""
    counts = tuple(int(c) for c in counts)
    if len(counts) != support.size:
        raise ValueError("counts length must match support size")
    if any(c < 0 for c in counts):
        raise ValueError("counts must be nonnegative")
    vals = []
    for v, c in zip(support.values, counts):
        vals.extend([v] * c)
    return Sample(sorted_values=tuple(vals), counts=counts)


def multinomial_coefficient(counts) -> int:
    """Number of orderings of a multiset with the given counts: n! / prod(c_i!).

    Exact integer arithmetic throughout.  Python integers are arbitrary
    precision, so no overflow is possible at any allowed size; the explicit
    size guard below turns absurd inputs into an error instead of an
    out-of-memory grind.
    """
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ValueError("counts must be nonnegative")
    n = sum(counts)
    if n > MAX_SAMPLE_SIZE:
        raise OverflowError(f"sample size {n} exceeds the supported maximum {MAX_SAMPLE_SIZE}")
    coef = 1
    partial = 0
    for c in counts:
        partial += c
        coef *= math.comb(partial, c)
    return coef


def _space_size(m: int, n: int) -> int:
    return math.comb(n + m - 1, m - 1)


@dataclass(frozen=True)
class SampleSpace:
    """Every possible size-``n`` sample over a support, in a fixed reference order.

    The reference order is lexicographic on the sorted-draw presentation,
    which is the order ``itertools.combinations_with_replacement`` yields.
    Index 0 is always the all-least sample (all draws equal to the minimum
    support value); it plays a special role everywhere downstream.
    """

    support: SupportSet
    n: int
    samples: tuple[Sample, ...] = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample size must be >= 1")
        expected = _space_size(self.support.size, self.n)
        if len(self.samples) != expected:
            raise ValueError(
                f"sample space has {len(self.samples)} entries, expected {expected}"
            )

    @property
    def size(self) -> int:
        return len(self.samples)

    @property
    def zero_index(self) -> int:
        """Reference index of the all-least sample (always 0 by construction)."""
        return 0

    def counts_matrix(self) -> np.ndarray:
        mat = np.array([s.counts for s in self.samples], dtype=np.int64)
        mat.flags.writeable = False
        return mat

    def index_of_counts(self, counts) -> int:
        key = tuple(int(c) for c in counts)
        try:
            return self._index_map()[key]
        except KeyError:
            raise ValueError(f"counts {key} do not belong to this sample space") from None

    def _index_map(self) -> dict:
        # Cached lazily on the instance; the dataclass is frozen so go
        # through object.__setattr__ once.
        cached = getattr(self, "_cached_index_map", None)
        if cached is None:
            cached = {s.counts: i for i, s in enumerate(self.samples)}
            object.__setattr__(self, "_cached_index_map", cached)
        return cached

    def sample_means(self) -> np.ndarray:
        arr = np.array([s.mean() for s in self.samples], dtype=np.float64)
        arr.flags.writeable = False
        return arr


def enumerate_sample_space(support: SupportSet, n: int, max_size: int = 50_000_000) -> SampleSpace:
    """Enumerate all unordered samples of size ``n``, reference-ordered.

    Refuses (``ValueError``) when the lattice would exceed ``max_size``
    points.
    """
    if n < 1:
        raise ValueError("sample size must be >= 1")
    total = _space_size(support.size, n)
    if total > max_size:
        raise ValueError(f"sample space would hold {total} samples, above the cap {max_size}")
    samples = []
    for combo in itertools.combinations_with_replacement(range(support.size), n):
        counts = [0] * support.size
        for i in combo:
            counts[i] += 1
        counts = tuple(counts)
        vals = tuple(support.values[i] for i in combo)
        samples.append(Sample(sorted_values=vals, counts=counts))
    return SampleSpace(support=support, n=n, samples=tuple(samples))


def space_to_jsonable(space: SampleSpace) -> dict:
    """JSON-ready description of a sample space.

    ``support`` holds the normalized values (least is 0); adding ``shift``
    back recovers the original units.  Samples appear as counts vectors in
    reference order.
    """
    return {
        "support": [float(v) for v in space.support.values],
        "shift": float(space.support.shift),
        "n": int(space.n),
        "samples": [[int(c) for c in s.counts] for s in space.samples],
    }


def space_from_jsonable(obj: dict) -> SampleSpace:
    """Rebuild a sample space from :func:`space_to_jsonable` output."""
    support = SupportSet(values=tuple(float(v) for v in obj["support"]),
                         shift=float(obj.get("shift", 0.0)))
    space = enumerate_sample_space(support, int(obj["n"]))
    got = [tuple(int(c) for c in row) for row in obj["samples"]]
    want = [s.counts for s in space.samples]
    if got != want:
        raise ValueError("sample list does not match the reference enumeration")
    return space


def space_to_json(space: SampleSpace) -> str:
    return json.dumps(space_to_jsonable(space), indent=2)
