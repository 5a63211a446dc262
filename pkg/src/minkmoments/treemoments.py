"""Finite-generation tree estimators for the moment sequence.

Two independent diagnostic estimators of m_L from generation n of the
rational tree:

  * composition form: 2**(2-n) * sum of x**L over all x = [0; a1, ..., as]
    with a1 + ... + as = n and as >= 2, enumerated by a stack-based walk
    over compositions with incremental continuant updates;

  * tree form: 2**(1-n) * sum of (x/(x+1))**L over the full generation,
    enumerated by vectorised doubling of (numerator, denominator) arrays.

Both are plain double-precision estimates (certified values come from the
Stieltjes engine); sums are compensated by accumulating exact partial
sums with math.fsum over deterministic chunks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .enclosure import Enclosure
from .errors import ResourceLimitError
from .rationals import GENERATION_LIMIT

_CHUNK_BASE = 12       # full doubling up to this generation, subtrees beyond
_LEAF_BUFFER = 1 << 16


@dataclass(frozen=True)
class GenerationEstimate:
    L: int
    n: int
    value_cf_form: float
    value_tree_form: float
    node_count: int


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-generation errors of both estimators against a certified value."""

    L: int
    reference: Enclosure
    estimates: tuple[GenerationEstimate, ...]
    errors_cf: tuple[float, ...]
    errors_tree: tuple[float, ...]
    rate_cf: float      # fitted per-generation error ratio (nan if degenerate)
    rate_tree: float

    def rows(self) -> list[dict]:
        out = []
        for est, ec, et in zip(self.estimates, self.errors_cf, self.errors_tree):
            out.append({
                "L": est.L, "n": est.n,
                "value_cf_form": est.value_cf_form,
                "value_tree_form": est.value_tree_form,
                "node_count": est.node_count,
                "error_cf": ec, "error_tree": et,
            })
        return out


def _check_generation(n: int, limit: int):
    if n < 1:
        raise ValueError("generation index must be >= 1")
    if n > limit:
        raise ResourceLimitError(f"generation {n} exceeds limit {limit}")


# -- composition-form estimator ----------------------------------------------

def cf_composition_sums(n: int, orders) -> tuple[dict[int, float], int]:
    """Sum of x**L over compositions of n with last part >= 2, per order.

    Walks the composition tree depth first; the continued fraction value
    x = [0; a1, ..., ak] is maintained through the continuant recurrence
    h_new = t*h + h_prev, k_new = t*k + k_prev as terms are appended.
    Returns (sums, leaf_count); sums are fsum-compensated over buffered
    chunks, so they are deterministic for a fixed n.
    """
    orders = tuple(orders)
    parts: dict[int, list[float]] = {L: [] for L in orders}
    leaves = 0
    if n < 2:
        return {L: 0.0 for L in orders}, 0
    buf: list[float] = []

    def flush():
        x = np.array(buf)
        for L in orders:
            parts[L].append(float(np.sum(x ** L)))
        buf.clear()

    # state: remaining sum R, previous and current continuants of [0; ...]
    stack = [(n, 1, 0, 0, 1)]
    while stack:
        r, hp, hc, kp, kc = stack.pop()
        # closing term t = r (>= 2 by construction) completes a composition
        buf.append((r * hc + hp) / (r * kc + kp))
        leaves += 1
        if len(buf) >= _LEAF_BUFFER:
            flush()
        for t in range(1, r - 1):
            stack.append((r - t, hc, t * hc + hp, kc, t * kc + kp))
    if buf:
        flush()
    return {L: math.fsum(parts[L]) for L in orders}, leaves


def m_gen_cf(L: int, n: int, limit: int = GENERATION_LIMIT) -> float:
    """Composition-form estimate 2**(2-n) * sum x**L (zero at n = 1)."""
    if L < 1:
        raise ValueError("composition form needs L >= 1")
    _check_generation(n, limit)
    sums, _ = cf_composition_sums(n, (L,))
    return math.ldexp(sums[L], 2 - n)


def composition_count(n: int, limit: int = GENERATION_LIMIT) -> int:
    """Number of compositions of n with last part >= 2 (2**(n-2) for n >= 2)."""
    _check_generation(n, limit)
    _, leaves = cf_composition_sums(n, ())
    return leaves


# -- tree-form estimator -------------------------------------------------------

def _tree_level_sums(n_max: int, orders) -> dict[int, dict[int, float]]:
    """Sum of (x/(x+1))**L over each generation 1..n_max, per order.

    Generations double by a/b -> a/(a+b), (a+b)/b with children interleaved
    so the array stays in depth-first order.  Beyond the chunk base the
    walk proceeds subtree by subtree to bound memory; partial sums are
    folded with fsum in canonical order.
    """
    orders = tuple(orders)
    parts = {n: {L: [] for L in orders} for n in range(1, n_max + 1)}

    def level_sum(num, den, n):
        r = num / (num + den)
        for L in orders:
            parts[n][L].append(float(np.sum(r ** L)))

    def double(num, den):
        s = num + den
        nn = np.empty(2 * num.size, dtype=np.int64)
        nd = np.empty(2 * num.size, dtype=np.int64)
        nn[0::2] = num; nn[1::2] = s
        nd[0::2] = s;   nd[1::2] = den
        return nn, nd

    num = np.array([1], dtype=np.int64)
    den = np.array([1], dtype=np.int64)
    base = min(n_max, _CHUNK_BASE)
    level_sum(num, den, 1)
    for n in range(2, base + 1):
        num, den = double(num, den)
        level_sum(num, den, n)
    if n_max > base:
        for i in range(num.size):
            cn = num[i:i + 1]
            cd = den[i:i + 1]
            for n in range(base + 1, n_max + 1):
                cn, cd = double(cn, cd)
                level_sum(cn, cd, n)
    return {n: {L: math.fsum(parts[n][L]) for L in orders}
            for n in parts}


def m_gen_tree(L: int, n: int, limit: int = GENERATION_LIMIT) -> float:
    """Tree-form estimate 2**(1-n) * sum (x/(x+1))**L over generation n."""
    if L < 0:
        raise ValueError("moment order must be >= 0")
    _check_generation(n, limit)
    sums = _tree_level_sums(n, (L,))
    return math.ldexp(sums[n][L], 1 - n)


def generation_estimate(L: int, n: int,
                        limit: int = GENERATION_LIMIT) -> GenerationEstimate:
    return GenerationEstimate(
        L, n,
        m_gen_cf(L, n, limit) if n >= 1 and L >= 1 else math.nan,
        m_gen_tree(L, n, limit),
        2 ** (n - 1))


# -- convergence diagnostics ---------------------------------------------------

def _fit_rate(ns, errs) -> float:
    pts = [(n, e) for n, e in zip(ns, errs) if e > 0]
    if len(pts) < 3:
        return math.nan
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.log2([p[1] for p in pts])
    slope = np.polyfit(xs, ys, 1)[0]
    return float(2.0 ** slope)


def convergence_report(L: int, n_max: int, reference: Enclosure,
                       limit: int = GENERATION_LIMIT) -> ConvergenceReport:
    """Errors of both estimators against a certified reference, per n."""
    _check_generation(n_max, limit)
    mid = reference.mid
    tree = _tree_level_sums(n_max, (L,))
    ests = []
    errs_cf = []
    errs_tree = []
    for n in range(1, n_max + 1):
        cf_val = math.ldexp(cf_composition_sums(n, (L,))[0][L], 2 - n) \
            if L >= 1 else math.nan
        tr_val = math.ldexp(tree[n][L], 1 - n)
        ests.append(GenerationEstimate(L, n, cf_val, tr_val, 2 ** (n - 1)))
        errs_cf.append(abs(cf_val - mid))
        errs_tree.append(abs(tr_val - mid))
    ns = list(range(1, n_max + 1))
    return ConvergenceReport(L, reference, tuple(ests),
                             tuple(errs_cf), tuple(errs_tree),
                             _fit_rate(ns, errs_cf), _fit_rate(ns, errs_tree))


def convergence_table(orders, n_max: int, references: dict[int, Enclosure],
                      limit: int = GENERATION_LIMIT) -> dict[int, ConvergenceReport]:
    """Batched reports: one composition walk and one tree sweep per n for all orders."""
    _check_generation(n_max, limit)
    orders = tuple(sorted(set(orders)))
    tree = _tree_level_sums(n_max, orders)
    cf = {n: cf_composition_sums(n, orders)[0] for n in range(2, n_max + 1)}
    out = {}
    for L in orders:
        ests, errs_cf, errs_tree = [], [], []
        mid = references[L].mid
        for n in range(1, n_max + 1):
            cf_val = math.ldexp(cf[n][L], 2 - n) if (n >= 2 and L >= 1) else (
                0.0 if L >= 1 else math.nan)
            tr_val = math.ldexp(tree[n][L], 1 - n)
            ests.append(GenerationEstimate(L, n, cf_val, tr_val, 2 ** (n - 1)))
            errs_cf.append(abs(cf_val - mid))
            errs_tree.append(abs(tr_val - mid))
        ns = list(range(1, n_max + 1))
        out[L] = ConvergenceReport(L, references[L],
                                   tuple(ests), tuple(errs_cf), tuple(errs_tree),
                                   _fit_rate(ns, errs_cf), _fit_rate(ns, errs_tree))
    return out
