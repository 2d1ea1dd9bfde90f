"""Hot numeric kernels, twice: a numba fast path and a pure-numpy fallback.

Everything here works on plain arrays so the two implementations stay
interchangeable.  The active set is chosen once at import time: numba when
it is importable and the environment variable ``MEANLCB_NO_NUMBA`` is not
set to a truthy value, the numpy fallback otherwise.  Both paths enumerate
grid cells in the same order, so first-found tie-breaking matches wherever
the compared values agree bitwise; vectorized evaluation can differ from
the scalar path in the last ulp, which is why every run sticks to the one
path chosen at import.

Polynomials are represented term-wise: ``expts`` is an integer ``(T, m)``
exponent matrix, ``coefs`` the matching float coefficients, ``logcoefs``
their logarithms.  ``use_log`` switches term evaluation to log space for
high degrees where direct products underflow.
"""

from __future__ import annotations

import math
import os
from typing import Callable, NamedTuple

import numpy as np

FALLBACK_ENV = "MEANLCB_NO_NUMBA"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

_STEP_INIT = 0.25
_STEP_MAX = 4.0
_STEP_GROW = 1.6
_STEP_SHRINK = 0.5
_STEP_MIN = 1e-14
# A step must beat the current value by an absolute floor plus a relative
# part.  The relative part matters: near a constrained optimum the
# projection's constraint slack admits endless ~1e-16-relative "gains"
# that would otherwise keep the loop alive until the iteration cap.
_IMPROVE_EPS = 1e-17
_IMPROVE_REL = 1e-13
_MEAN_SLACK = 1e-12


# ---------------------------------------------------------------------------
# numpy fallback implementations
# ---------------------------------------------------------------------------

def _np_poly_value(p, expts, coefs, logcoefs, use_log):
    if not use_log:
        return float(np.dot(coefs, np.prod(p[None, :] ** expts, axis=1)))
    m = p.shape[0]
    logp = np.full(m, -np.inf)
    pos = p > 0.0
    logp[pos] = np.log(p[pos])
    with np.errstate(invalid="ignore"):
        contrib = np.where(expts > 0, expts * logp[None, :], 0.0)
    acc = logcoefs + contrib.sum(axis=1)
    return float(np.exp(acc).sum())


def _np_poly_value_grad(p, expts, coefs, logcoefs, use_log):
    m = p.shape[0]
    grad = np.zeros(m)
    if not use_log:
        terms = coefs * np.prod(p[None, :] ** expts, axis=1)
    else:
        logp = np.full(m, -np.inf)
        pos = p > 0.0
        logp[pos] = np.log(p[pos])
        with np.errstate(invalid="ignore"):
            contrib = np.where(expts > 0, expts * logp[None, :], 0.0)
        terms = np.exp(logcoefs + contrib.sum(axis=1))
    val = float(terms.sum())
    for i in range(m):
        e = expts[:, i]
        if p[i] > 0.0:
            grad[i] = float((terms * e).sum() / p[i])
        else:
            # On the boundary only exponent-1 terms contribute a derivative.
            sel = e == 1
            if sel.any():
                red = expts[sel].copy()
                red[:, i] = 0
                grad[i] = _np_poly_value(p, red, coefs[sel], logcoefs[sel], use_log)
    return val, grad


def _np_project_simplex(v):
    m = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1.0, m + 1.0)
    cond = u - (css - 1.0) / idx > 0.0
    rho = int(np.nonzero(cond)[0][-1])
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _np_project_polytope(v, s, cap):
    out = _np_project_simplex(v)
    if float(np.dot(out, s)) <= cap + _MEAN_SLACK:
        return out
    lo = 0.0
    hi = 1.0
    for _ in range(64):
        w = _np_project_simplex(v - hi * s)
        if float(np.dot(w, s)) <= cap:
            break
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        w = _np_project_simplex(v - mid * s)
        if float(np.dot(w, s)) > cap:
            lo = mid
        else:
            hi = mid
    return _np_project_simplex(v - hi * s)


def _np_ascend(p0, expts, coefs, logcoefs, use_log, s, cap, target, max_iters):
    # Monotone projected ascent with a backtracking step.  The step is a
    # movement length in p-space (the gradient only supplies a direction),
    # so flat stretches of high-degree polynomials -- where the gradient
    # all but vanishes -- are crossed in O(1) iterations.
    p = _np_project_polytope(p0, s, cap)
    val, grad = _np_poly_value_grad(p, expts, coefs, logcoefs, use_log)
    step = _STEP_INIT
    it = 0
    converged = val >= target
    while not converged and it < max_iters:
        it += 1
        gnorm = math.sqrt(float(np.dot(grad, grad)))
        if gnorm == 0.0:
            converged = True
            break
        cand = _np_project_polytope(p + (step / gnorm) * grad, s, cap)
        cval = _np_poly_value(cand, expts, coefs, logcoefs, use_log)
        if cval - val > _IMPROVE_EPS + _IMPROVE_REL * abs(val):
            p = cand
            val, grad = _np_poly_value_grad(cand, expts, coefs, logcoefs, use_log)
            if step < _STEP_MAX:
                step *= _STEP_GROW
            if val >= target:
                converged = True
        else:
            step *= _STEP_SHRINK
            if step < _STEP_MIN:
                converged = True
    return val, p, it, converged


def _np_block_values(pts, expts, coefs, logcoefs, use_log):
    """Likelihood at every row of ``pts`` -- the vectorized core of the scans."""
    k = pts.shape[0]
    out = np.zeros(k)
    if not use_log:
        for t in range(expts.shape[0]):
            out += coefs[t] * np.prod(pts ** expts[t], axis=1)
        return out
    with np.errstate(divide="ignore", invalid="ignore"):
        logpts = np.log(pts)
        for t in range(expts.shape[0]):
            sel = expts[t] > 0
            acc = np.full(k, logcoefs[t])
            for i in np.nonzero(sel)[0]:
                acc += expts[t, i] * logpts[:, i]
            out += np.exp(acc)
    return out


def _np_tails(rem, k):
    """All k-tuples of nonnegative ints with sum <= rem, kernel scan order."""
    if k == 0:
        yield ()
        return
    for last in range(rem + 1):
        for head in _np_tails(rem - last, k - 1):
            yield head + (last,)


def _np_grid_blocks(d, m):
    """Grid cells as (k, m) count blocks, matching the numba scan order."""
    if m == 1:
        yield np.array([[d]], dtype=np.int64)
        return
    for tail in _np_tails(d, m - 2):
        rem = d - sum(tail)
        c1 = np.arange(rem + 1, dtype=np.int64)
        block = np.empty((rem + 1, m), dtype=np.int64)
        block[:, 0] = rem - c1
        block[:, 1] = c1
        for j, t in enumerate(tail):
            block[:, 2 + j] = t
        yield block


def _np_grid_min_mean(d, expts, coefs, logcoefs, use_log, s, alpha):
    m = s.shape[0]
    best_mean = np.inf
    best_lik = -1.0
    best_c = np.zeros(m, dtype=np.int64)
    found = False
    for block in _np_grid_blocks(d, m):
        pts = block / float(d)
        lik = _np_block_values(pts, expts, coefs, logcoefs, use_log)
        ok = lik >= alpha
        if not ok.any():
            continue
        means = pts[ok] @ s
        j = int(np.argmin(means))
        if not found or means[j] < best_mean:
            found = True
            best_mean = float(means[j])
            best_lik = float(lik[ok][j])
            best_c = block[ok][j].copy()
    return found, best_mean, best_c, best_lik


def _np_grid_max_lik(d, expts, coefs, logcoefs, use_log, s, mean_cap):
    m = s.shape[0]
    best_lik = -1.0
    best_c = np.zeros(m, dtype=np.int64)
    for block in _np_grid_blocks(d, m):
        pts = block / float(d)
        ok = pts @ s <= mean_cap + _MEAN_SLACK
        if not ok.any():
            continue
        lik = _np_block_values(pts[ok], expts, coefs, logcoefs, use_log)
        j = int(np.argmax(lik))
        if lik[j] > best_lik:
            best_lik = float(lik[j])
            best_c = block[ok][j].copy()
    return best_lik, best_c


# ---------------------------------------------------------------------------
# numba fast path: the same operations written scalar-style for njit
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True, nogil=True)
    def _nb_poly_value(p, expts, coefs, logcoefs, use_log):
        T, m = expts.shape
        total = 0.0
        if not use_log:
            for t in range(T):
                term = coefs[t]
                for i in range(m):
                    term *= p[i] ** expts[t, i]
                total += term
        else:
            for t in range(T):
                acc = logcoefs[t]
                dead = False
                for i in range(m):
                    e = expts[t, i]
                    if e > 0:
                        if p[i] <= 0.0:
                            dead = True
                            break
                        acc += e * math.log(p[i])
                if not dead:
                    total += math.exp(acc)
        return total

    @njit(cache=True, nogil=True)
    def _nb_poly_value_grad(p, expts, coefs, logcoefs, use_log):
        T, m = expts.shape
        grad = np.zeros(m)
        total = 0.0
        for t in range(T):
            if not use_log:
                term = coefs[t]
                for i in range(m):
                    term *= p[i] ** expts[t, i]
            else:
                acc = logcoefs[t]
                dead = False
                for i in range(m):
                    e = expts[t, i]
                    if e > 0:
                        if p[i] <= 0.0:
                            dead = True
                            break
                        acc += e * math.log(p[i])
                term = 0.0 if dead else math.exp(acc)
            total += term
            for i in range(m):
                e = expts[t, i]
                if e > 0:
                    if p[i] > 0.0:
                        grad[i] += term * e / p[i]
                    elif e == 1:
                        if not use_log:
                            prod = coefs[t]
                            for j in range(m):
                                if j != i:
                                    prod *= p[j] ** expts[t, j]
                            grad[i] += prod
                        else:
                            acc2 = logcoefs[t]
                            dead2 = False
                            for j in range(m):
                                if j != i and expts[t, j] > 0:
                                    if p[j] <= 0.0:
                                        dead2 = True
                                        break
                                    acc2 += expts[t, j] * math.log(p[j])
                            if not dead2:
                                grad[i] += math.exp(acc2)
        return total, grad

    @njit(cache=True, nogil=True)
    def _nb_project_simplex(v):
        m = v.shape[0]
        u = np.sort(v)[::-1]
        css = 0.0
        theta = 0.0
        for i in range(m):
            css += u[i]
            t = (css - 1.0) / (i + 1.0)
            if u[i] - t > 0.0:
                theta = t
        out = np.empty(m)
        for i in range(m):
            dlt = v[i] - theta
            out[i] = dlt if dlt > 0.0 else 0.0
        return out

    @njit(cache=True, nogil=True)
    def _nb_project_polytope(v, s, cap):
        out = _nb_project_simplex(v)
        mean = 0.0
        for i in range(s.shape[0]):
            mean += out[i] * s[i]
        if mean <= cap + _MEAN_SLACK:
            return out
        lo = 0.0
        hi = 1.0
        for _ in range(64):
            w = _nb_project_simplex(v - hi * s)
            mw = 0.0
            for i in range(s.shape[0]):
                mw += w[i] * s[i]
            if mw <= cap:
                break
            hi *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            w = _nb_project_simplex(v - mid * s)
            mw = 0.0
            for i in range(s.shape[0]):
                mw += w[i] * s[i]
            if mw > cap:
                lo = mid
            else:
                hi = mid
        return _nb_project_simplex(v - hi * s)

    @njit(cache=True, nogil=True)
    def _nb_ascend(p0, expts, coefs, logcoefs, use_log, s, cap, target, max_iters):
        # Step semantics match _np_ascend: movement length, not a gradient
        # multiplier, so near-flat regions are crossed in O(1) iterations.
        p = _nb_project_polytope(p0, s, cap)
        val, grad = _nb_poly_value_grad(p, expts, coefs, logcoefs, use_log)
        step = _STEP_INIT
        it = 0
        converged = val >= target
        while not converged and it < max_iters:
            it += 1
            gnorm = math.sqrt(np.sum(grad * grad))
            if gnorm == 0.0:
                converged = True
                break
            cand = _nb_project_polytope(p + (step / gnorm) * grad, s, cap)
            cval = _nb_poly_value(cand, expts, coefs, logcoefs, use_log)
            if cval - val > _IMPROVE_EPS + _IMPROVE_REL * abs(val):
                p = cand
                val, grad = _nb_poly_value_grad(cand, expts, coefs, logcoefs, use_log)
                if step < _STEP_MAX:
                    step *= _STEP_GROW
                if val >= target:
                    converged = True
            else:
                step *= _STEP_SHRINK
                if step < _STEP_MIN:
                    converged = True
        return val, p, it, converged

    @njit(cache=True, nogil=True)
    def _nb_grid_min_mean(d, expts, coefs, logcoefs, use_log, s, alpha):
        m = s.shape[0]
        c = np.zeros(m, dtype=np.int64)
        c[0] = d
        p = np.empty(m)
        best_mean = np.inf
        best_lik = -1.0
        best_c = np.zeros(m, dtype=np.int64)
        found = False
        while True:
            for i in range(m):
                p[i] = c[i] / d
            lik = _nb_poly_value(p, expts, coefs, logcoefs, use_log)
            if lik >= alpha:
                mu = 0.0
                for i in range(m):
                    mu += p[i] * s[i]
                if (not found) or mu < best_mean:
                    found = True
                    best_mean = mu
                    best_lik = lik
                    for i in range(m):
                        best_c[i] = c[i]
            if m == 1:
                break
            if c[0] > 0:
                c[0] -= 1
                c[1] += 1
            else:
                j = 1
                while j < m and c[j] == 0:
                    j += 1
                if j >= m - 1:
                    break
                c[0] = c[j] - 1
                c[j] = 0
                c[j + 1] += 1
        return found, best_mean, best_c, best_lik

    @njit(cache=True, nogil=True)
    def _nb_grid_max_lik(d, expts, coefs, logcoefs, use_log, s, mean_cap):
        m = s.shape[0]
        c = np.zeros(m, dtype=np.int64)
        c[0] = d
        p = np.empty(m)
        best_lik = -1.0
        best_c = np.zeros(m, dtype=np.int64)
        while True:
            mu = 0.0
            for i in range(m):
                p[i] = c[i] / d
                mu += p[i] * s[i]
            if mu <= mean_cap + _MEAN_SLACK:
                lik = _nb_poly_value(p, expts, coefs, logcoefs, use_log)
                if lik > best_lik:
                    best_lik = lik
                    for i in range(m):
                        best_c[i] = c[i]
            if m == 1:
                break
            if c[0] > 0:
                c[0] -= 1
                c[1] += 1
            else:
                j = 1
                while j < m and c[j] == 0:
                    j += 1
                if j >= m - 1:
                    break
                c[0] = c[j] - 1
                c[j] = 0
                c[j + 1] += 1
        return best_lik, best_c


# ---------------------------------------------------------------------------
# path selection
# ---------------------------------------------------------------------------

class KernelSet(NamedTuple):
    name: str
    poly_value: Callable
    poly_value_grad: Callable
    project_simplex: Callable
    project_polytope: Callable
    ascend: Callable
    grid_min_mean: Callable
    grid_max_lik: Callable


numpy_kernels = KernelSet(
    "numpy",
    _np_poly_value,
    _np_poly_value_grad,
    _np_project_simplex,
    _np_project_polytope,
    _np_ascend,
    _np_grid_min_mean,
    _np_grid_max_lik,
)

if HAS_NUMBA:
    numba_kernels = KernelSet(
        "numba",
        _nb_poly_value,
        _nb_poly_value_grad,
        _nb_project_simplex,
        _nb_project_polytope,
        _nb_ascend,
        _nb_grid_min_mean,
        _nb_grid_max_lik,
    )
else:  # pragma: no cover
    numba_kernels = None


def _fallback_requested() -> bool:
    return os.environ.get(FALLBACK_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


active: KernelSet = (
    numba_kernels if (HAS_NUMBA and not _fallback_requested()) else numpy_kernels
)


def active_kernel_name() -> str:
    """Which kernel path this process is running ("numba" or "numpy")."""
    return active.name


def batch_values(pts: np.ndarray, expts, coefs, logcoefs, use_log) -> np.ndarray:
    """Likelihood at each row of ``pts``.  Not hot: shared numpy implementation."""
    return _np_block_values(np.asarray(pts, dtype=np.float64), expts, coefs, logcoefs, use_log)


def warmup() -> str:
    """Run every active kernel once on a toy problem (triggers JIT compilation)."""
    expts = np.array([[2, 0], [1, 1]], dtype=np.int64)
    coefs = np.array([1.0, 2.0])
    logcoefs = np.log(coefs)
    s = np.array([0.0, 1.0])
    p = np.array([0.5, 0.5])
    for use_log in (False, True):
        active.poly_value(p, expts, coefs, logcoefs, use_log)
        active.poly_value_grad(p, expts, coefs, logcoefs, use_log)
        active.ascend(p, expts, coefs, logcoefs, use_log, s, 1.0, np.inf, 50)
        active.grid_min_mean(8, expts, coefs, logcoefs, use_log, s, 0.25)
        active.grid_max_lik(8, expts, coefs, logcoefs, use_log, s, 0.5)
    active.project_polytope(np.array([0.9, 0.4]), s, 0.3)
    return active.name
