"""Certified integration against the question-mark distribution.

Every integral here is a Riemann-Stieltjes integral against dF over a
Stern-Brocot partition, which gives two-sided brackets with no smoothness
assumptions: the measure of a depth-d interval is exactly 2**-d and a
monotone integrand is bracketed by its endpoint values.

The structural constants are reduced to such integrals before being
computed:

  exp2_mean = integral_0^1 2**x d?(x)

  c0 = integral_0^1 Psi(x) dx
     = exp2_mean / (2 log 2)

    (integrate d[2**x (1-F(x))] over [0,1]: the boundary term vanishes
    because 2(1-F(1)) = 1(1-F(0)), leaving
    log2 * integral Psi dx = integral_0^1 2**x dF(x) = exp2_mean / 2.)

  c1 = integral_0^1 x Psi(x) dx
     = (1 - c0 + w/2) / log 2,   w = integral_0^1 x 2**x d?(x)

    (same device applied to d[x 2**x (1-F(x))]; the boundary term is 1.)

A low-precision Riemann cross-check of c0 over a uniform mesh is kept as
an independent oracle for the reductions above.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.special import gammaincc as _gammaincc

from . import _engine
from .enclosure import LOG2, Enclosure
from .qfunc import psi_values_float
from .rationals import (
    Rational,
    SternBrocotInterval,
    sb_refine,
    sb_root,
    sb_unit,
)

INCREASING = "increasing"
DECREASING = "decreasing"
PIECEWISE = "piecewise-with-known-breakpoints"

ADAPTIVE = "adaptive"
UNIFORM = "uniform-depth"

MAX_DEPTH_LIMIT = 40

_FIB = [1, 1]
while len(_FIB) < 64:
    _FIB.append(_FIB[-1] + _FIB[-2])


@dataclass(frozen=True)
class IntegrandDescriptor:
    """A monotone (or piecewise monotone) integrand for integrate_dF.

    `evaluator` must accept every rational in the domain including the
    infinite sentinel (supplying the finite limit value there).  An
    `array_evaluator` taking int64 numerator/denominator arrays unlocks
    the vectorised path; without it the scalar evaluator is looped.
    For piecewise integrands, `directions` gives the monotonicity on each
    of the len(breakpoints)+1 segments.
    """

    evaluator: Callable[[Rational], Enclosure]
    monotonicity: str
    breakpoints: tuple[Rational, ...] = ()
    directions: tuple[str, ...] = ()
    array_evaluator: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.monotonicity not in (INCREASING, DECREASING, PIECEWISE):
            raise ValueError(f"unknown monotonicity {self.monotonicity!r}")
        if self.monotonicity == PIECEWISE:
            if len(self.directions) != len(self.breakpoints) + 1:
                raise ValueError("need one direction per segment")

    def arrays(self):
        if self.array_evaluator is not None:
            return self.array_evaluator
        return _engine.scalar_to_arrays(self.evaluator)


@dataclass(frozen=True)
class QuadratureRequest:
    domain: SternBrocotInterval
    target_width: float
    max_depth: int = MAX_DEPTH_LIMIT
    mode: str = ADAPTIVE

    def __post_init__(self):
        if not self.target_width > 0:
            raise ValueError("target_width must be positive")
        if not 0 <= self.max_depth <= MAX_DEPTH_LIMIT:
            raise ValueError(f"max_depth must be in [0, {MAX_DEPTH_LIMIT}]")
        if self.mode not in (ADAPTIVE, UNIFORM):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class QuadratureOutcome:
    """Enclosure plus convergence metadata; unconverged results stay valid."""

    value: Enclosure
    converged: bool
    leaves: int
    deepest: int

    @property
    def width(self) -> float:
        return self.value.width


@dataclass(frozen=True)
class MomentRecord:
    kind: str          # "m" or "M"
    L: int
    value: Enclosure
    method: str
    budget: str
    wall_time: float
    converged: bool
    leaves: int

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "kind": self.kind,
            "L": self.L,
            "lo": self.value.lo,
            "hi": self.value.hi,
            "width": self.value.width,
            "method": self.method,
            "budget": self.budget,
            "converged": self.converged,
            "leaves": self.leaves,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    @staticmethod
    def from_dict(d: dict) -> "MomentRecord":
        return MomentRecord(
            kind=d["kind"], L=d["L"],
            value=Enclosure(d["lo"], d["hi"]),
            method=d["method"], budget=d["budget"],
            wall_time=d.get("wall_time", 0.0),
            converged=d["converged"], leaves=d["leaves"])


def _guard_entries(domain: SternBrocotInterval, max_depth: int):
    worst = max(domain.left.num, domain.left.den,
                domain.right.num, domain.right.den)
    levels = max_depth - domain.depth + 2
    if levels >= len(_FIB) or worst * _FIB[min(levels, len(_FIB) - 1)] >= 2**62:
        raise OverflowError("refinement could overflow 64-bit entries")


def _partition_at(domain: SternBrocotInterval,
                  points: tuple[Rational, ...]) -> list[SternBrocotInterval]:
    """Minimal list of subintervals whose endpoints include every point."""
    pieces: list[SternBrocotInterval] = []

    def rec(iv):
        if any(iv.contains_strictly(p) for p in points):
            a, b = sb_refine(iv)
            rec(a)
            rec(b)
        else:
            pieces.append(iv)

    rec(domain)
    return pieces


def integrate_dF(f: IntegrandDescriptor, req: QuadratureRequest,
                 threads: int = 1) -> QuadratureOutcome:
    """Enclosure of the integral of f against dF over req.domain."""
    _guard_entries(req.domain, req.max_depth)
    arrays = f.arrays()

    if f.monotonicity != PIECEWISE:
        return _integrate_monotone(arrays, f.monotonicity == INCREASING,
                                   req, threads)

    # piecewise: split the domain so each piece is monotone
    inner = tuple(p for p in f.breakpoints if req.domain.contains_strictly(p))
    pieces = _partition_at(req.domain, inner)
    bps = sorted(f.breakpoints)
    budgets = _piece_budgets(pieces, arrays, req.target_width)
    total = Enclosure(0.0, 0.0)
    converged = True
    leaves = 0
    deepest = req.domain.depth
    for piece, budget in zip(pieces, budgets):
        seg = sum(1 for p in bps if p <= piece.left)
        direction = f.directions[seg]
        sub = QuadratureRequest(piece, budget, req.max_depth, req.mode)
        out = _integrate_monotone(arrays, direction == INCREASING, sub, threads)
        total = total + out.value
        converged &= out.converged
        leaves += out.leaves
        deepest = max(deepest, out.deepest)
    return QuadratureOutcome(total, converged, leaves, deepest)


def _piece_budgets(pieces, arrays, target_width):
    brackets = []
    for piece in pieces:
        en = np.array([piece.left.num, piece.right.num], dtype=np.int64)
        ed = np.array([piece.left.den, piece.right.den], dtype=np.int64)
        lo, hi = arrays(en, ed)
        brackets.append(abs(float(hi.max() - lo.min())) * 2.0**-piece.depth)
    s = sum(brackets) or 1.0
    floor = target_width * 2.0**-20
    return [max(0.45 * target_width * b / s, floor) for b in brackets]


def _integrate_monotone(arrays, increasing, req, threads):
    if req.mode == UNIFORM:
        r = _engine.integrate_uniform(req.domain, arrays, increasing,
                                      req.max_depth, req.max_depth, threads)
    else:
        r = _engine.integrate_adaptive(req.domain, arrays, increasing,
                                       [req.target_width], req.max_depth, threads)
    return QuadratureOutcome(r.value, r.converged, r.leaves, r.deepest)


# -- moments ------------------------------------------------------------------

def ratio_power_descriptor(L: int) -> IntegrandDescriptor:
    """(x/(x+1))**L on [0, oo]; the value at the sentinel is the limit 1."""
    def scalar(x: Rational) -> Enclosure:
        t = Enclosure.point(x.num) / Enclosure.point(x.num + x.den)
        return t.pow_int(L) if L != 1 else t
    return IntegrandDescriptor(scalar, INCREASING,
                               array_evaluator=_engine.ratio_powers_arrays((L,)),
                               name=f"(x/(x+1))^{L}")


def power_descriptor(L: int) -> IntegrandDescriptor:
    """x**L on finite domains."""
    def scalar(x: Rational) -> Enclosure:
        t = Enclosure.point(x.num) / Enclosure.point(x.den)
        return t.pow_int(L) if L != 1 else t
    return IntegrandDescriptor(scalar, INCREASING,
                               array_evaluator=_engine.power_arrays(L),
                               name=f"x^{L}")


def moment_m(L: int, target_width: float = 1e-9, mode: str = ADAPTIVE,
             max_depth: int = MAX_DEPTH_LIMIT, threads: int = 1) -> MomentRecord:
    """Certified enclosure of m_L = integral (x/(x+1))**L dF over [0, oo]."""
    if L < 0:
        raise ValueError("moment order must be >= 0")
    t0 = time.perf_counter()
    if L == 0:
        return MomentRecord("m", 0, Enclosure(1.0, 1.0), "exact", "none",
                            time.perf_counter() - t0, True, 1)
    req = QuadratureRequest(sb_root(), target_width, max_depth, mode)
    out = integrate_dF(ratio_power_descriptor(L), req, threads)
    budget = (f"target_width={target_width:g}" if mode == ADAPTIVE
              else f"depth={max_depth}")
    return MomentRecord("m", L, out.value, f"stieltjes-{mode}", budget,
                        time.perf_counter() - t0, out.converged, out.leaves)


def moments_batch(orders, target_widths, max_depth: int = MAX_DEPTH_LIMIT,
                  threads: int = 1) -> dict[int, MomentRecord]:
    """Certified m_L for several orders over one shared adaptive partition.

    `target_widths` is either a single width or a mapping L -> width.
    Sharing the partition amortises the tree walk: the refinement is
    driven by the row whose bracket is furthest from its target.
    """
    orders = sorted(set(orders))
    if any(L < 0 for L in orders):
        raise ValueError("moment orders must be >= 0")
    if isinstance(target_widths, dict):
        widths = {L: float(target_widths[L]) for L in orders}
    else:
        widths = {L: float(target_widths) for L in orders}
    t0 = time.perf_counter()
    out: dict[int, MomentRecord] = {}
    if 0 in orders:
        out[0] = MomentRecord("m", 0, Enclosure(1.0, 1.0), "exact", "none",
                              0.0, True, 1)
        orders = [L for L in orders if L]
    if not orders:
        return out
    arrays = _engine.ratio_powers_arrays(tuple(orders))
    targets = [widths[L] for L in orders]
    _guard_entries(sb_root(), max_depth)
    r = _engine.integrate_adaptive(sb_root(), arrays, True, targets,
                                   max_depth, threads)
    dt = time.perf_counter() - t0
    for row, L in enumerate(orders):
        value = r.values[row]
        out[L] = MomentRecord("m", L, value, "stieltjes-adaptive",
                              f"target_width={widths[L]:g}", dt,
                              r.converged or value.width <= widths[L],
                              r.leaves)
    return out


def exp2_mean(target_width: float = 1e-9, max_depth: int = MAX_DEPTH_LIMIT,
              threads: int = 1) -> Enclosure:
    """Enclosure of integral_0^1 2**x d?(x) = 2 integral_0^1 2**x dF(x)."""
    desc = IntegrandDescriptor(lambda x: NotImplemented, INCREASING,
                               array_evaluator=_engine.exp2_arrays(1),
                               name="2^x")
    req = QuadratureRequest(sb_unit(), target_width / 2 * 0.98, max_depth, ADAPTIVE)
    out = integrate_dF(desc, req, threads)
    return out.value.scale2(1)


def c0(target_width: float = 1e-9, max_depth: int = MAX_DEPTH_LIMIT,
       threads: int = 1) -> Enclosure:
    """Enclosure of c0 = integral_0^1 Psi(x) dx, via c0 = exp2_mean/(2 log 2)."""
    e = exp2_mean(target_width * 2 * math.log(2) * 0.95, max_depth, threads)
    return e.scale2(-1) / LOG2


def c0_direct_riemann(mesh: int = 10**6) -> tuple[float, float]:
    """Midpoint Riemann sum of Psi over a uniform mesh, with an error bound.

    Independent low-precision oracle for c0: no Stieltjes machinery, just
    the float series for F.  The bound combines the bounded-variation
    midpoint error TV/(2 mesh), TV(Psi) < 1.6, with the evaluation error.
    """
    k = np.arange(mesh, dtype=np.int64)
    nums = 2 * k + 1
    dens = np.full(mesh, 2 * mesh, dtype=np.int64)
    vals, ev_err = psi_values_float(nums, dens)
    est = float(np.mean(vals))
    bound = 1.6 / (2 * mesh) + ev_err + 1e-12
    return est, bound


def _x_exp2_mean(sign: int, target_width: float, max_depth: int,
                 threads: int) -> Enclosure:
    """integral_0^1 x 2**(sign x) d?(x); increasing on [0,1] for both signs."""
    desc = IntegrandDescriptor(lambda x: NotImplemented, INCREASING,
                               array_evaluator=_engine.x_exp2_arrays(sign),
                               name=f"x*2^({sign}x)")
    req = QuadratureRequest(sb_unit(), target_width / 2 * 0.98, max_depth, ADAPTIVE)
    out = integrate_dF(desc, req, threads)
    return out.value.scale2(1)


def c1(target_width: float = 1e-9, max_depth: int = MAX_DEPTH_LIMIT,
       threads: int = 1) -> Enclosure:
    """Enclosure of c1 = integral_0^1 x Psi(x) dx.

    Reduction (see module docstring): c1 = (1 - c0 + w/2)/log 2 with
    w = integral_0^1 x 2**x d?(x).
    """
    ln2 = math.log(2)
    c0_enc = c0(target_width * ln2 * 0.30, max_depth, threads)
    w = _x_exp2_mean(1, target_width * ln2 * 2 * 0.55, max_depth, threads)
    return (1 - c0_enc + w.scale2(-1)) / LOG2


def c1_reflected(target_width: float = 1e-9, max_depth: int = MAX_DEPTH_LIMIT,
                 threads: int = 1) -> Enclosure:
    """Second route to c1 through the x -> 1-x symmetry of the measure.

    d? is invariant under reflection, so w = e - 2v with
    e = integral 2**x d? and v = integral x 2**(-x) d?: different
    integrands, partitions and roundings than the primary route.
    """
    ln2 = math.log(2)
    c0_enc = c0(target_width * ln2 * 0.25, max_depth, threads)
    e = exp2_mean(target_width * ln2 * 0.50, max_depth, threads)
    v = _x_exp2_mean(-1, target_width * ln2 * 0.50, max_depth, threads)
    w = e - v.scale2(1)
    return (1 - c0_enc + w.scale2(-1)) / LOG2


def moment_M(L: int, cutoff: int = 60, target_width: float = 1e-9,
             max_depth: int = MAX_DEPTH_LIMIT, threads: int = 1) -> MomentRecord:
    """Enclosure of M_L = integral_0^oo x**L dF.

    The integral over [0, cutoff] is certified segment by segment; the
    tail over (cutoff, oo) is bounded analytically from
    0.9 * 2**-x <= 1 - F(x) <= 1.2 * 2**-x by parts:

        tail in [0.9, 1.2] * (N**L 2**-N + L integral_N^oo x**(L-1) 2**-x dx)

    with the remaining integral an upper incomplete gamma.
    """
    if L < 0:
        raise ValueError("moment order must be >= 0")
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    t0 = time.perf_counter()
    if L == 0:
        return MomentRecord("M", 0, Enclosure(1.0, 1.0), "exact", "none",
                            time.perf_counter() - t0, True, 1)

    segments = [SternBrocotInterval(Rational(k, 1), Rational(k + 1, 1), k + 1)
                for k in range(cutoff)]
    arrays = _engine.power_arrays(L)
    desc = power_descriptor(L)
    budgets = _piece_budgets(segments, arrays, target_width)
    total = Enclosure(0.0, 0.0)
    converged = True
    leaves = 0
    for seg, budget in zip(segments, budgets):
        req = QuadratureRequest(seg, budget, max_depth, ADAPTIVE)
        out = integrate_dF(desc, req, threads)
        total = total + out.value
        converged &= out.converged
        leaves += out.leaves

    ln2 = math.log(2)
    n = float(cutoff)
    a = n**L * 2.0**-n + L * _gammaincc(L, n * ln2) * float(_gamma_fn(L)) / ln2**L
    slop = 1e-10 * a + 5e-324
    tail = Enclosure(max(0.9 * a - slop, 0.0), 1.2 * a + slop)
    total = total + tail
    if tail.width > target_width:
        converged = False

    return MomentRecord("M", L, total, "stieltjes-adaptive",
                        f"cutoff={cutoff},target_width={target_width:g}",
                        time.perf_counter() - t0, converged, leaves)
