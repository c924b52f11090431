"""Integration over boxes and unbounded domains.

Every coordinate is mapped onto ``(0, 1)``: affinely for finite intervals,
by an algebraic (``u / (1 - u)``-type) or tangent substitution otherwise.
One-dimensional integrals use globally adaptive Gauss-Kronrod (10/21);
``m = 2, 3`` use Genz-Malik cubature with adaptive bisection; larger ``m``
uses Sobol points under independent random shifts.

Integrands with known kinks and support faces (a :class:`Geometry`) are
integrated one coordinate at a time instead: every line is split at the
kinks and clipped to the support before Gauss-Kronrod bisection, and the
errors of inner lines are carried into the outer estimates.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .models import stream

__all__ = ["QuadratureSpec", "Estimate", "Geometry", "integrate_1d", "integrate_lines", "integrate_nd"]

TRANSFORMS = ("algebraic", "tangent")
STRATEGIES = ("auto", "adaptive", "quasi-random")
QMC_CUTOVER = 4
PILOT_POINTS = 1 << 12


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    max_evals: int = 2_000_000
    transform: str = "algebraic"
    strategy: str = "auto"
    seed: int = 0
    shifts: int = 16

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_evals <= 0:
            raise ValueError("max_evals must be positive")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.shifts < 2:
            raise ValueError("need at least two random shifts")

    def with_(self, **kw) -> "QuadratureSpec":
        return replace(self, **kw)

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))


@dataclass(frozen=True)
class Estimate:
    """A value with an error indicator.

    ``error`` is a deterministic error estimate for adaptive rules and a
    standard error for randomized ones.
    """

    value: float
    error: float
    evals: int
    converged: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def scaled(self, c: float) -> "Estimate":
        return replace(self, value=self.value * c, error=self.error * abs(c))


# ---------------------------------------------------------------------------
# coordinate maps onto (0, 1)


def _half_line(v: np.ndarray, transform: str):
    """Map ``v`` in ``(0, 1)`` onto ``[0, inf)``; return the point and its derivative."""
    if transform == "tangent":
        return np.tan(0.5 * np.pi * v), 0.5 * np.pi / np.cos(0.5 * np.pi * v) ** 2
    return v / (1.0 - v), 1.0 / (1.0 - v) ** 2


def _map_interval(u: np.ndarray, lo: float, hi: float, transform: str):
    """Return ``(t, dt/du)`` for ``u`` in ``(0, 1)``."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if math.isfinite(lo) and math.isfinite(hi):
            return lo + (hi - lo) * u, np.full_like(u, hi - lo)
        if math.isfinite(lo):
            s, ds = _half_line(u, transform)
            return lo + s, ds
        if math.isfinite(hi):
            s, ds = _half_line(1.0 - u, transform)
            return hi - s, ds
        w = 2.0 * u - 1.0
        if transform == "tangent":
            return np.tan(0.5 * np.pi * w), np.pi / np.cos(0.5 * np.pi * w) ** 2
        return w / (1.0 - w * w), 2.0 * (1.0 + w * w) / (1.0 - w * w) ** 2


def _clean(values: np.ndarray) -> np.ndarray:
    # integrand underflow times an infinite Jacobian at an endpoint
    return np.where(np.isfinite(values), values, 0.0)


def _scale_error(err: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """``err * |jac|`` where a zero error stays zero and an infinite one stays infinite."""
    with np.errstate(invalid="ignore", over="ignore"):
        out = err * np.abs(jac)
    return np.where(err == 0.0, 0.0, np.where(np.isnan(out), np.inf, out))


# ---------------------------------------------------------------------------
# one dimension

_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208280347341, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
G_WEIGHTS = np.zeros(21)
G_WEIGHTS[1:10:2] = _WG
G_WEIGHTS[11:20:2] = _WG[::-1]
_EPS = np.finfo(float).eps


def _gk21(vals: np.ndarray, half: np.ndarray):
    """Kronrod value and QUADPACK-style error for rows of 21 samples."""
    resk = vals @ GK_WEIGHTS
    resg = vals @ G_WEIGHTS
    resabs = np.abs(vals) @ GK_WEIGHTS
    resasc = np.abs(vals - 0.5 * resk[:, None]) @ GK_WEIGHTS
    err = np.abs(resk - resg) * half
    resasc = resasc * half
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    err = np.maximum(err, 50.0 * _EPS * resabs * half)
    return resk * half, err


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec = QuadratureSpec(),
    lo: float = -math.inf,
    hi: float = math.inf,
    points: Sequence[float] = (),
) -> Estimate:
    """Adaptive Gauss-Kronrod integral of a vectorized ``f`` over ``[lo, hi]``.

    ``points`` are known kinks or jumps of ``f``; the domain is split there
    before any bisection happens.
    """
    if not lo < hi:
        if lo == hi:
            return Estimate(0.0, 0.0, 0, True)
        raise ValueError(f"empty interval [{lo}, {hi}]")
    cuts = sorted({float(p) for p in points if lo < p < hi and math.isfinite(p)})
    edges = [lo] + cuts + [hi]
    segments = list(zip(edges[:-1], edges[1:]))

    def evaluate(items):
        # items: list of (segment index, a, b) with a, b in u-space (0, 1)
        a = np.array([it[1] for it in items])
        b = np.array([it[2] for it in items])
        half = 0.5 * (b - a)
        u = (0.5 * (a + b))[:, None] + half[:, None] * GK_NODES[None, :]
        vals = np.empty_like(u)
        for row, (s, _, _) in enumerate(items):
            slo, shi = segments[s]
            t, jac = _map_interval(u[row], slo, shi, spec.transform)
            vals[row] = t
            u[row] = jac
        fv = np.asarray(f(vals.ravel()), dtype=float).reshape(vals.shape)
        with np.errstate(invalid="ignore", over="ignore"):
            return _gk21(_clean(fv * u), half)

    items = [(s, 0.0, 1.0) for s in range(len(segments))]
    val, err = evaluate(items)
    evals = 21 * len(items)
    heap = [(-e, i, it, v) for i, (it, v, e) in enumerate(zip(items, val, err))]
    heapq.heapify(heap)
    counter = len(heap)
    total = float(np.sum(val))
    total_err = float(np.sum(err))
    converged = total_err <= spec.tolerance(total)
    while not converged and evals + 42 <= spec.max_evals:
        neg_err, _, (s, a, b), v = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            heapq.heappush(heap, (neg_err, counter, (s, a, b), v))
            break
        kids = [(s, a, mid), (s, mid, b)]
        kv, ke = evaluate(kids)
        evals += 42
        total += float(kv.sum()) - v
        total_err += float(ke.sum()) + neg_err
        for it, vv, ee in zip(kids, kv, ke):
            counter += 1
            heapq.heappush(heap, (-ee, counter, it, vv))
        if len(heap) % 64 == 0:
            # re-sum to shed accumulated rounding in the running totals
            total = math.fsum(h[3] for h in heap)
            total_err = math.fsum(-h[0] for h in heap)
        converged = total_err <= spec.tolerance(total)
    total = math.fsum(h[3] for h in heap)
    total_err = math.fsum(-h[0] for h in heap)
    converged = total_err <= spec.tolerance(total)
    return Estimate(total, total_err, evals, bool(converged), {"intervals": len(heap)})


# ---------------------------------------------------------------------------
# several dimensions


class _GenzMalik:
    """Degree-7 rule with embedded degree-5 estimate on ``[-1, 1]^m``."""

    def __init__(self, m: int):
        if m < 2:
            raise ValueError("Genz-Malik needs m >= 2")
        l2, l3, l4, l5 = math.sqrt(9 / 70), math.sqrt(9 / 10), math.sqrt(9 / 10), math.sqrt(9 / 19)
        pts = [np.zeros(m)]
        w7 = [(12824 - 9120 * m + 400 * m * m) / 19683]
        w5 = [(729 - 950 * m + 50 * m * m) / 729]
        eye = np.eye(m)
        for lam, a7, a5 in ((l2, 980 / 6561, 245 / 486), (l3, (1820 - 400 * m) / 19683, (265 - 100 * m) / 1458)):
            for i in range(m):
                for sgn in (1.0, -1.0):
                    pts.append(sgn * lam * eye[i])
                    w7.append(a7)
                    w5.append(a5)
        for i in range(m):
            for j in range(i + 1, m):
                for si in (1.0, -1.0):
                    for sj in (1.0, -1.0):
                        pts.append(l4 * (si * eye[i] + sj * eye[j]))
                        w7.append(200 / 19683)
                        w5.append(25 / 729)
        corners = np.array(np.meshgrid(*([[-1.0, 1.0]] * m), indexing="ij")).reshape(m, -1).T
        for c in corners:
            pts.append(l5 * c)
            w7.append(6859 / 19683 / 2**m)
            w5.append(0.0)
        self.m = m
        self.points = np.array(pts)
        self.w7 = np.array(w7)
        self.w5 = np.array(w5)
        # indices of +-l2 e_i and +-l3 e_i for the fourth-difference split rule
        self.i2 = np.array([[1 + 2 * i, 2 + 2 * i] for i in range(m)])
        self.i3 = np.array([[1 + 2 * m + 2 * i, 2 + 2 * m + 2 * i] for i in range(m)])
        self.ratio = (l2 / l3) ** 2

    @property
    def size(self) -> int:
        return len(self.points)

    def apply(self, g, centers: np.ndarray, halfw: np.ndarray):
        """Integrate ``g`` (on the unit cube) over cells; return value, error, split axis."""
        x = centers[:, None, :] + halfw[:, None, :] * self.points[None, :, :]
        fv = g(x.reshape(-1, self.m)).reshape(x.shape[:2])
        vol = np.prod(2.0 * halfw, axis=1)
        i7 = vol * (fv @ self.w7)
        i5 = vol * (fv @ self.w5)
        f0 = fv[:, :1]
        d2 = fv[:, self.i2].sum(axis=2) - 2 * f0
        d3 = fv[:, self.i3].sum(axis=2) - 2 * f0
        fourth = np.abs(d2 - self.ratio * d3)
        axis = np.argmax(fourth + 1e-300 * halfw, axis=1)
        return i7, np.abs(i7 - i5), axis


def _cube_integrand(f, m: int, bounds, transform: str):
    def g(u: np.ndarray) -> np.ndarray:
        t = np.empty_like(u)
        jac = np.ones(u.shape[0])
        for d in range(m):
            t[:, d], jd = _map_interval(u[:, d], bounds[d][0], bounds[d][1], transform)
            jac = jac * jd
        with np.errstate(invalid="ignore", over="ignore"):
            return _clean(np.asarray(f(t), dtype=float) * jac)

    return g


def _adaptive_cubature(g, m: int, spec: QuadratureSpec) -> Estimate:
    rule = _GenzMalik(m)
    centers = np.full((1, m), 0.5)
    halfw = np.full((1, m), 0.5)
    val, err, axis = rule.apply(g, centers, halfw)
    evals = rule.size
    max_batch = max(1, min(4096, spec.max_evals // (4 * rule.size)))
    while True:
        total = float(np.sum(val))
        total_err = float(np.sum(err))
        tol = spec.tolerance(total)
        if total_err <= tol:
            break
        budget = (spec.max_evals - evals) // (2 * rule.size)
        if budget < 1:
            break
        order = np.argsort(-err, kind="stable")
        # split the largest contributors until the remainder would meet tol
        csum = np.cumsum(err[order])
        need = np.searchsorted(csum, total_err - 0.5 * tol) + 1
        nsplit = int(min(need, max_batch, budget, len(order)))
        pick = order[:nsplit]
        keep = np.ones(len(val), bool)
        keep[pick] = False
        c = centers[pick]
        h = halfw[pick].copy()
        ax = axis[pick]
        rows = np.arange(nsplit)
        h[rows, ax] *= 0.5
        c_lo = c.copy()
        c_hi = c.copy()
        c_lo[rows, ax] -= h[rows, ax]
        c_hi[rows, ax] += h[rows, ax]
        new_c = np.concatenate([c_lo, c_hi])
        new_h = np.concatenate([h, h])
        nv, ne, na = rule.apply(g, new_c, new_h)
        evals += rule.size * len(new_c)
        # the embedded estimate can miss unresolved features; children also
        # carry part of the observed parent-versus-children discrepancy
        gap = 0.25 * np.abs(val[pick] - (nv[:nsplit] + nv[nsplit:]))
        ne = ne + np.concatenate([gap, gap])
        centers = np.concatenate([centers[keep], new_c])
        halfw = np.concatenate([halfw[keep], new_h])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        axis = np.concatenate([axis[keep], na])
    total = math.fsum(val)
    total_err = math.fsum(err)
    return Estimate(total, total_err, evals, total_err <= spec.tolerance(total), {"cells": len(val)})


def _shifted_sobol(g, m: int, spec: QuadratureSpec, spent: Callable[[], int] | None = None) -> Estimate:
    """Mean over randomly shifted copies of one Sobol sequence.

    ``spent`` reports integrand evaluations actually used, for outer rules
    whose every point costs a whole inner integral.
    """
    r = spec.shifts
    shifts = np.array([stream(spec.seed, s).random(m) for s in range(r)])
    engine = qmc.Sobol(d=m, scramble=False)
    sums = np.zeros(r)
    count = 0
    batch = 1 << max(0, min(8, (spec.max_evals // r).bit_length() - 1))
    evals = 0
    value = err = math.nan
    while True:
        used = spent() if spent is not None else evals
        per_point = used / (r * count) if count else 1.0
        if count > 0 and used + per_point * r * batch > spec.max_evals:
            break
        base = engine.random(batch)
        new = np.zeros(r)
        try:
            for s in range(r):
                u = np.mod(base + shifts[s], 1.0)
                u = np.clip(u, 1e-300, np.nextafter(1.0, 0.0))
                new[s] = math.fsum(g(u))
        except _BudgetExceeded:
            if count == 0:
                raise
            break
        sums += new
        count += batch
        evals += r * batch
        means = sums / count
        value = float(np.mean(means))
        err = float(np.std(means, ddof=1) / math.sqrt(r))
        if count >= 1 << 10 and err <= spec.tolerance(value):
            break
        batch = count  # doubling keeps every prefix a full Sobol block
    return Estimate(value, err, evals, err <= spec.tolerance(value), {"points": count, "shifts": r})


def _inverse_map(t: np.ndarray, lo: float, hi: float, transform: str) -> np.ndarray:
    """Inverse of :func:`_map_interval` (``nan`` stays ``nan``)."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if math.isfinite(lo) and math.isfinite(hi):
            return (t - lo) / (hi - lo)

        def half_inv(s):
            if transform == "tangent":
                return 2.0 / np.pi * np.arctan(s)
            return s / (1.0 + s)

        if math.isfinite(lo):
            return np.where(t < lo, -1.0, half_inv(np.maximum(t - lo, 0.0)))
        if math.isfinite(hi):
            return np.where(t > hi, 2.0, 1.0 - half_inv(np.maximum(hi - t, 0.0)))
        if transform == "tangent":
            w = 2.0 / np.pi * np.arctan(t)
        else:
            # invert t = w / (1 - w^2) on (-1, 1)
            w = np.where(t == 0.0, 0.0, 2.0 * t / (1.0 + np.sqrt(1.0 + 4.0 * t * t)))
        return 0.5 * (w + 1.0)


@dataclass(frozen=True)
class Geometry:
    """Where an integrand on ``R^m`` is rough, and where it vanishes.

    ``f`` is smooth inside every cell cut out by the hyperplanes
    ``planes[0] @ t = planes[1]`` and vanishes outside the polyhedron
    ``region[0] @ t <= region[1]`` (whose faces count as planes too).
    Either part may be ``None``.
    """

    planes: tuple[np.ndarray, np.ndarray] | None = None
    region: tuple[np.ndarray, np.ndarray] | None = None

    def rows(self, m: int):
        a = [np.zeros((0, m))]
        b = [np.zeros(0)]
        for part in (self.planes, self.region):
            if part is not None:
                a.append(np.asarray(part[0], float).reshape(-1, m))
                b.append(np.asarray(part[1], float).reshape(-1))
        return np.concatenate(a), np.concatenate(b)

    def region_rows(self, m: int):
        if self.region is None:
            return np.zeros((0, m)), np.zeros(0)
        return np.asarray(self.region[0], float).reshape(-1, m), np.asarray(self.region[1], float).reshape(-1)


def _native(a: np.ndarray, d: int) -> np.ndarray:
    """Rows of ``a`` whose first nonzero coefficient sits in column ``d``."""
    if a.shape[0] == 0:
        return np.zeros(0, bool)
    scale = np.max(np.abs(a), axis=1)
    small = np.abs(a) <= 1e-13 * scale[:, None]
    return np.all(small[:, :d], axis=1) & ~small[:, d]


class _BudgetExceeded(Exception):
    pass


class _Counter:
    def __init__(self, limit: int, strict: bool = False):
        self.limit = limit
        self.evals = 0
        self.truncated = False
        self.strict = strict  # raise instead of truncating

    @property
    def exhausted(self) -> bool:
        return self.truncated or self.evals >= self.limit


class _Level:
    """Vectorized adaptive integration over coordinate ``d`` for many rows at once.

    Rows are the values of coordinates ``d+1..m-1``.  Each row's line is cut
    at the breakpoints and clipped to the support constraints that involve
    no coordinate below ``d``; every piece gets Gauss-Kronrod 21 in the
    mapped variable and pieces are bisected (all rows together) until each
    row meets ``rel_tol``.  ``lower(points)`` returns values and error
    bounds of the integrand over coordinates ``d..m-1``.
    """

    max_rounds = 40
    chunk_points = 1 << 17

    def __init__(self, d, m, bound, transform, lower, geometry: Geometry, rel_tol, abs_tol, counter,
                 extra_breaks=None):
        self.d, self.m = d, m
        self.extra_breaks = extra_breaks
        # abs_tol is measured against the outer integral: a row carrying outer
        # Jacobian weight w may err by abs_tol / w
        self.lo, self.hi = bound
        self.transform = transform
        self.lower = lower
        self.rel_tol, self.abs_tol = rel_tol, abs_tol
        self.counter = counter
        a, b = geometry.rows(m)
        keep = _native(a, d)
        self.brk_a, self.brk_b = a[keep][:, d:], b[keep]
        g, h = geometry.region_rows(m)
        keep = _native(g, d)
        self.reg_g, self.reg_h = g[keep][:, d:], h[keep]

    def _limits(self, rest: np.ndarray):
        """Clipped ``[ulo, uhi]`` per row and the breakpoints in ``u``."""
        n = rest.shape[0]
        lo = np.full(n, self.lo)
        hi = np.full(n, self.hi)
        if self.reg_g.shape[0]:
            c = self.reg_g[:, 0]
            bound = (self.reg_h[None, :] - rest @ self.reg_g[:, 1:].T) / c[None, :]
            up = c > 0
            if up.any():
                hi = np.minimum(hi, bound[:, up].min(axis=1))
            if (~up).any():
                lo = np.maximum(lo, bound[:, ~up].max(axis=1))
        with np.errstate(invalid="ignore"):
            ulo = np.clip(_inverse_map(lo, self.lo, self.hi, self.transform), 0.0, 1.0)
            uhi = np.clip(_inverse_map(hi, self.lo, self.hi, self.transform), 0.0, 1.0)
            ulo = np.where(lo <= self.lo, 0.0, ulo)
            uhi = np.where(hi >= self.hi, 1.0, uhi)
            if self.brk_a.shape[0]:
                tb = (self.brk_b[None, :] - rest @ self.brk_a[:, 1:].T) / self.brk_a[None, :, 0]
                ub = _inverse_map(tb, self.lo, self.hi, self.transform)
            else:
                ub = np.zeros((n, 0))
            if self.extra_breaks is not None:
                tb = np.asarray(self.extra_breaks(rest), dtype=float).reshape(n, -1)
                ub = np.concatenate([ub, _inverse_map(tb, self.lo, self.hi, self.transform)], axis=1)
        ub = np.where(np.isfinite(ub) & (ub > ulo[:, None]) & (ub < uhi[:, None]), ub, uhi[:, None])
        return ulo, uhi, ub

    def _pieces(self, rest, weight, owner, a, b):
        half = 0.5 * (b - a)
        u = (0.5 * (a + b))[:, None] + half[:, None] * GK_NODES
        t, jac = _map_interval(u, self.lo, self.hi, self.transform)
        pts = np.empty(u.shape + (self.m - self.d,))
        pts[..., 0] = t
        pts[..., 1:] = rest[owner][:, None, :]
        w = (weight[owner][:, None] * np.abs(jac)).ravel()
        fv, fe = self.lower(pts.reshape(-1, self.m - self.d), np.where(np.isfinite(w), w, 0.0))
        with np.errstate(invalid="ignore", over="ignore"):
            fv = _clean(fv.reshape(u.shape) * jac)
        fe = _scale_error(fe.reshape(u.shape), jac)
        val, err = _gk21(fv, half)
        return val, err, (fe @ GK_WEIGHTS) * half

    def __call__(self, rest: np.ndarray, weight: np.ndarray):
        n = rest.shape[0]
        width = 21 * (self.brk_a.shape[0] + 4)
        step = max(1, self.chunk_points // width)
        if n > step:
            parts = [self(rest[i:i + step], weight[i:i + step]) for i in range(0, n, step)]
            return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
        ulo, uhi, ub = self._limits(rest)
        edges = np.sort(np.concatenate([ulo[:, None], ub, uhi[:, None]], axis=1), axis=1)
        a = edges[:, :-1].ravel()
        b = edges[:, 1:].ravel()
        owner = np.repeat(np.arange(n), edges.shape[1] - 1)
        live = b > a
        owner, a, b = owner[live], a[live], b[live]
        if owner.size == 0:
            return np.zeros(n), np.zeros(n)
        val, err, inner = self._pieces(rest, weight, owner, a, b)
        with np.errstate(divide="ignore"):
            floor = np.where(weight > 0, self.abs_tol / weight, np.inf)
        for _ in range(self.max_rounds):
            if self.counter.exhausted:
                break
            tot = np.bincount(owner, val, minlength=n)
            tot_err = np.bincount(owner, err, minlength=n)
            allowed = np.maximum(self.rel_tol * np.abs(tot), floor)
            bad = tot_err > allowed
            if not bad.any():
                break
            mid = 0.5 * (a + b)
            split = bad[owner] & (err > 0.125 * allowed[owner]) & (mid > a) & (mid < b)
            if not split.any():
                break
            sa, sb, so, sm = a[split], b[split], owner[split], mid[split]
            kv, ke, ki = self._pieces(rest, weight, np.concatenate([so, so]),
                                      np.concatenate([sa, sm]), np.concatenate([sm, sb]))
            keep = ~split
            owner = np.concatenate([owner[keep], so, so])
            a = np.concatenate([a[keep], sa, sm])
            b = np.concatenate([b[keep], sm, sb])
            val = np.concatenate([val[keep], kv])
            err = np.concatenate([err[keep], ke])
            inner = np.concatenate([inner[keep], ki])
        return np.bincount(owner, val, minlength=n), np.bincount(owner, err + inner, minlength=n)


def _build_levels(f, m, top, bounds, spec, geometry, counter, rel_tols, abs_tols):
    """Chain of :class:`_Level` objects for coordinates ``0..top-1``."""

    def base(pts, weight):
        if counter.evals + pts.shape[0] > counter.limit:
            if counter.strict:
                raise _BudgetExceeded
            # out of budget: contribute nothing, with unbounded error
            counter.truncated = True
            return np.zeros(pts.shape[0]), np.full(pts.shape[0], np.inf)
        counter.evals += pts.shape[0]
        with np.errstate(invalid="ignore", over="ignore"):
            v = np.asarray(f(pts), dtype=float)
        return v, np.zeros_like(v)

    lower = base
    for d in range(top):
        lower = _Level(d, m, bounds[d], spec.transform, lower, geometry, rel_tols[d], abs_tols[d], counter)
    return lower


def _iterated_adaptive(f, m, spec, bounds, geometry, counter, floor):
    # the error budget is halved from each level to the one inside it
    share = [0.5 ** (m - d) for d in range(m)]
    level = _build_levels(f, m, m, bounds, spec, geometry, counter,
                          [spec.rel_tol * c for c in share], [floor * c for c in share])
    val, err = level(np.zeros((1, 0)), np.ones(1))
    return float(val[0]), float(err[0])


def _integrate_iterated(f, m, spec, bounds, geometry: Geometry) -> Estimate:
    counter = _Counter(spec.max_evals)
    if spec.strategy == "adaptive":
        # a cheap sampled pilot fixes the scale for absolute error floors of
        # inner rows, so far-out lines are not resolved to relative accuracy
        floor = spec.abs_tol
        if spec.max_evals >= 4 * PILOT_POINTS:
            probe = _cube_integrand(f, m, bounds, spec.transform)
            u = np.mod(qmc.Sobol(d=m, scramble=False).random(PILOT_POINTS) + stream(spec.seed, 0).random(m), 1.0)
            counter.evals += PILOT_POINTS
            scale = abs(float(np.mean(probe(np.clip(u, 1e-300, np.nextafter(1.0, 0.0))))))
            floor = max(floor, 0.1 * spec.rel_tol * scale)
        value, error = _iterated_adaptive(f, m, spec, bounds, geometry, counter, floor)
        ok = error <= spec.tolerance(value) and not counter.truncated
        return Estimate(value, error, counter.evals, bool(ok), {"levels": m})
    # randomized outer rule over coordinates 1..m-1, exact lines along coordinate 0
    counter.strict = True
    line = _build_levels(f, m, 1, bounds, spec, geometry, counter, [0.1 * spec.rel_tol], [0.0])
    acc = {"val": 0.0, "err": 0.0}

    def outer(u_rest):
        t_rest = np.empty_like(u_rest)
        jac = np.ones(u_rest.shape[0])
        for d in range(m - 1):
            lo, hi = bounds[d + 1]
            t_rest[:, d], jd = _map_interval(u_rest[:, d], lo, hi, spec.transform)
            jac = jac * jd
        val, err = line(t_rest, np.ones(u_rest.shape[0]))
        with np.errstate(invalid="ignore", over="ignore"):
            val = _clean(val * jac)
        err = _scale_error(err, jac)
        acc["val"] += float(np.sum(np.abs(val)))
        acc["err"] += float(np.sum(err))
        return val

    try:
        est = _shifted_sobol(outer, m - 1, spec, spent=lambda: counter.evals)
    except _BudgetExceeded:
        return Estimate(math.nan, math.inf, counter.evals, False, {"budget": "exhausted before one batch"})
    inner = acc["err"] / acc["val"] * abs(est.value) if acc["val"] > 0 else 0.0
    error = est.error + inner
    meta = dict(est.meta, inner_error=inner)
    ok = error <= spec.tolerance(est.value) and not counter.truncated
    return Estimate(est.value, error, counter.evals, bool(ok), meta)


def integrate_lines(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    rows: np.ndarray,
    spec: QuadratureSpec = QuadratureSpec(),
    lo: float = -math.inf,
    hi: float = math.inf,
    breaks: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """``int_lo^hi f(t, row) dt`` for every row of parameters, all at once.

    ``f(t, params)`` gets matching 1-d ``t`` and 2-d ``params`` arrays.
    ``breaks(rows)`` gives per-row kinks or jumps in ``t`` (``nan`` allowed).
    Returns values, error estimates and the number of evaluations; each row
    is refined to ``spec.rel_tol`` (or ``spec.abs_tol``).
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    counter = _Counter(spec.max_evals)

    def base(pts, weight):
        if counter.evals + pts.shape[0] > counter.limit:
            counter.truncated = True
            return np.zeros(pts.shape[0]), np.full(pts.shape[0], np.inf)
        counter.evals += pts.shape[0]
        with np.errstate(invalid="ignore", over="ignore"):
            v = np.asarray(f(pts[:, 0], pts[:, 1:]), dtype=float)
        return v, np.zeros_like(v)

    level = _Level(0, 1 + rows.shape[1], (lo, hi), spec.transform, base, Geometry(),
                   spec.rel_tol, spec.abs_tol, counter, extra_breaks=breaks)
    val, err = level(rows, np.ones(rows.shape[0]))
    return val, err, counter.evals


def integrate_nd(
    f: Callable[[np.ndarray], np.ndarray],
    m: int,
    spec: QuadratureSpec = QuadratureSpec(),
    bounds: Sequence[tuple[float, float]] | None = None,
    geometry: Geometry | None = None,
) -> Estimate:
    """Integrate ``f`` over the box ``bounds`` (default all of ``R^m``).

    ``f`` receives an ``(N, m)`` array and returns ``N`` values.  With
    ``strategy='auto'`` an adaptive rule is used for ``m <= 3`` and randomly
    shifted Sobol points above that; the error of the latter is a standard
    error over the shifts.

    When ``geometry`` is given the integral is done one coordinate at a
    time, each line split at the declared hyperplanes and clipped to the
    declared support, which keeps error estimates honest for integrands
    with jumps and kinks.  The randomized strategy then only samples
    coordinates ``1..m-1``.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if bounds is None:
        bounds = [(-math.inf, math.inf)] * m
    bounds = [(float(a), float(b)) for a, b in bounds]
    if len(bounds) != m:
        raise ValueError(f"expected {m} bounds, got {len(bounds)}")
    if any(not a < b for a, b in bounds):
        if any(a == b for a, b in bounds):
            return Estimate(0.0, 0.0, 0, True)
        raise ValueError(f"empty box {bounds}")
    strategy = spec.strategy
    if strategy == "auto":
        strategy = "adaptive" if m < QMC_CUTOVER else "quasi-random"
    spec = spec.with_(strategy=strategy)
    if geometry is not None and (m >= 2 or strategy == "adaptive"):
        return _integrate_iterated(f, m, spec, bounds, geometry)
    if strategy == "adaptive" and m == 1:
        lo, hi = bounds[0]
        return integrate_1d(lambda t: f(t[:, None]), spec, lo, hi)
    g = _cube_integrand(f, m, bounds, spec.transform)
    if strategy == "adaptive":
        return _adaptive_cubature(g, m, spec)
    return _shifted_sobol(g, m, spec)
