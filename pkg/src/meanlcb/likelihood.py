"""Multinomial likelihoods of samples and of sets of samples.

The probability of one unordered sample is its multinomial coefficient
times a monomial in the category probabilities.  The probability of
landing anywhere in a set of samples is the sum of those monomials: a
homogeneous polynomial of degree ``n`` on the probability simplex.  That
polynomial object is what the optimization layers consume.

Degrees above ``LOG_DEGREE_CUTOFF`` evaluate term-by-term in log space so
large coefficients and tiny monomials cannot overflow or underflow.
Everywhere the convention ``0**0 == 1`` applies, so evaluation is exact on
the boundary of the simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .lattice import Sample, SampleSpace, multinomial_coefficient

__all__ = [
    "Distribution",
    "SubsetLikelihood",
    "sample_likelihood",
    "build_subset_likelihood",
    "evaluate",
    "gradient",
    "contour_grid",
]

LOG_DEGREE_CUTOFF = 30
PROB_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over the support categories."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float64).copy()
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("distribution must be a nonempty 1-D probability vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("distribution entries must be finite")
        if np.any(arr < -PROB_SUM_TOL):
            raise ValueError("distribution entries must be nonnegative")
        arr[arr < 0.0] = 0.0
        total = float(arr.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"distribution must sum to 1, got {total!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def size(self) -> int:
        return int(self.probs.shape[0])

    def mean(self, support) -> float:
        """Mean of the support values under this distribution."""
        vals = support.as_array() if hasattr(support, "as_array") else np.asarray(support)
        return float(np.dot(self.probs, vals))

    def min_coordinate(self) -> float:
        return float(self.probs.min())


def point_mass(m: int, index: int = 0) -> Distribution:
    """The distribution putting all mass on one category (category 0 by default)."""
    p = np.zeros(m)
    p[index] = 1.0
    return Distribution(p)


@dataclass(frozen=True, eq=False)
class SubsetLikelihood:
    """Polynomial giving the probability that a sample falls in a fixed set.

    ``terms`` pairs each member's counts vector with its exact integer
    multinomial coefficient.  Coefficients stay exact integers here and are
    converted to floats (or log-floats) only for evaluation.
    """

    degree: int
    member_ids: tuple[int, ...]
    terms: tuple[tuple[tuple[int, ...], int], ...]
    _expts: np.ndarray = field(repr=False, compare=False, default=None)
    _coefs: np.ndarray = field(repr=False, compare=False, default=None)
    _logcoefs: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        ncat = len(self.terms[0][0]) if self.terms else 0
        for counts, coef in self.terms:
            if sum(counts) != self.degree:
                raise ValueError("every term's counts must sum to the degree")
            if len(counts) != ncat:
                raise ValueError("terms must share one category count")
            if coef != multinomial_coefficient(counts):
                raise ValueError("term coefficient does not match its counts")
        if self.terms:
            expts = np.array([c for c, _ in self.terms], dtype=np.int64)
        else:
            expts = np.zeros((0, 1), dtype=np.int64)
        coefs = np.empty(len(self.terms))
        logcoefs = np.empty(len(self.terms))
        for t, (_, coef) in enumerate(self.terms):
            try:
                coefs[t] = float(coef)
            except OverflowError:
                coefs[t] = math.inf
            logcoefs[t] = math.log(coef)
        for arr in (expts, coefs, logcoefs):
            arr.flags.writeable = False
        object.__setattr__(self, "_expts", expts)
        object.__setattr__(self, "_coefs", coefs)
        object.__setattr__(self, "_logcoefs", logcoefs)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def n_categories(self) -> int:
        return int(self._expts.shape[1])

    @property
    def use_log(self) -> bool:
        return self.degree > LOG_DEGREE_CUTOFF

    def kernel_args(self):
        return self._expts, self._coefs, self._logcoefs, self.use_log


def build_subset_likelihood(space: SampleSpace, member_ids) -> SubsetLikelihood:
    """Polynomial for the probability of observing any sample in ``member_ids``.

    Member ids refer to the reference enumeration of ``space``; they are
    deduplicated and stored sorted, which makes the term list canonical for a
    given set.
    """
    ids = sorted(set(int(i) for i in member_ids))
    if any(i < 0 or i >= space.size for i in ids):
        raise ValueError("member id out of range for this sample space")
    terms = []
    for i in ids:
        counts = space.samples[i].counts
        terms.append((counts, multinomial_coefficient(counts)))
    if not ids:
        # Empty set: the zero polynomial over the right number of categories.
        obj = SubsetLikelihood.__new__(SubsetLikelihood)
        object.__setattr__(obj, "degree", space.n)
        object.__setattr__(obj, "member_ids", ())
        object.__setattr__(obj, "terms", ())
        expts = np.zeros((0, space.support.size), dtype=np.int64)
        for name, arr in (("_expts", expts), ("_coefs", np.zeros(0)), ("_logcoefs", np.zeros(0))):
            arr.flags.writeable = False
            object.__setattr__(obj, name, arr)
        return obj
    return SubsetLikelihood(degree=space.n, member_ids=tuple(ids), terms=tuple(terms))


def sample_likelihood(sample: Sample, dist: Distribution) -> float:
    """Probability of observing one particular unordered sample."""
    counts = np.asarray(sample.counts, dtype=np.int64)
    if counts.shape[0] != dist.size:
        raise ValueError("sample and distribution category counts differ")
    n = int(counts.sum())
    coef = multinomial_coefficient(sample.counts)
    if n <= LOG_DEGREE_CUTOFF:
        value = float(coef) * float(np.prod(dist.probs ** counts))
    else:
        acc = math.log(coef)
        for c, p in zip(counts, dist.probs):
            if c > 0:
                if p <= 0.0:
                    return 0.0
                acc += c * math.log(p)
        value = math.exp(acc)
    return min(max(value, 0.0), 1.0)


def evaluate(poly: SubsetLikelihood, dist: Distribution) -> float:
    """Value of the set-probability polynomial at a distribution, clamped to [0, 1]."""
    if poly.n_terms == 0:
        return 0.0
    if dist.size != poly.n_categories:
        raise ValueError("distribution size does not match the polynomial")
    value = _kernels.active.poly_value(dist.probs, *poly.kernel_args())
    return min(max(float(value), 0.0), 1.0)


def gradient(poly: SubsetLikelihood, dist: Distribution) -> np.ndarray:
    """Gradient of the set probability with respect to the category probabilities.

    Evaluated coordinate-wise on the affine extension of the polynomial, so
    it is well defined on the simplex boundary (one-sided there).
    """
    if poly.n_terms == 0:
        return np.zeros(dist.size)
    if dist.size != poly.n_categories:
        raise ValueError("distribution size does not match the polynomial")
    _, grad = _kernels.active.poly_value_grad(dist.probs, *poly.kernel_args())
    return np.asarray(grad, dtype=np.float64)


def contour_grid(poly: SubsetLikelihood, resolution: int, cell_cap: int = 2_000_000):
    """Barycentric grid sweep of the polynomial: (points, values) arrays.

    ``points`` has one grid distribution per row at spacing ``1/resolution``;
    ``values`` holds the polynomial value at each row.  Intended for contour
    plots and CSV export, so the grid is capped to ``cell_cap`` rows.
    """
    from .solver import CapExceededError  # local import to avoid a cycle

    m = poly.n_categories
    d = int(resolution)
    if d < 1:
        raise ValueError("resolution must be >= 1")
    cells = math.comb(d + m - 1, m - 1)
    if cells > cell_cap:
        raise CapExceededError(f"contour grid would hold {cells} cells, above the cap {cell_cap}")
    blocks = list(_kernels._np_grid_blocks(d, m))
    counts = np.concatenate(blocks, axis=0)
    pts = counts / float(d)
    vals = _kernels.batch_values(pts, *poly.kernel_args())
    np.clip(vals, 0.0, 1.0, out=vals)
    return pts, vals
