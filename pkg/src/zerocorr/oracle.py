"""Formula-free ground truth from sampled polynomials and their real roots."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .models import CoefficientModel
from .montecarlo import MonteCarloSpec, run_batches
from .quadrature import Estimate

__all__ = [
    "RootSet",
    "BoxFamily",
    "MonteCarloSpec",
    "RootCertificationError",
    "real_roots",
    "root_counts",
    "empirical_intensity",
    "empirical_correlation",
    "empirical_prob_all_real",
    "discriminant_prob_all_real",
]

RESIDUAL_TOL = 1e-10


class RootCertificationError(RuntimeError):
    """The real-root count of a polynomial could not be certified."""


@dataclass(frozen=True)
class RootSet:
    roots: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)


@dataclass(frozen=True)
class BoxFamily:
    """Pairwise disjoint half-open intervals ``[lo, hi)``."""

    boxes: tuple[tuple[float, float], ...]

    def __post_init__(self):
        boxes = tuple((float(a), float(b)) for a, b in self.boxes)
        for a, b in boxes:
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ValueError(f"bad box [{a}, {b})")
        ordered = sorted(boxes)
        for (a0, b0), (a1, b1) in zip(ordered, ordered[1:]):
            if a1 < b0:
                raise ValueError(f"boxes [{a0}, {b0}) and [{a1}, {b1}) overlap")
        object.__setattr__(self, "boxes", boxes)

    @property
    def k(self) -> int:
        return len(self.boxes)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.boxes])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.boxes])


def real_roots(coeffs: Sequence[float]) -> RootSet:
    """All real roots of ``sum coeffs[j] x**j``, certified by a Sturm count.

    Raises :class:`RootCertificationError` when the count cannot be
    certified (near-multiple roots, sign ambiguity) and ``ValueError`` for
    the zero polynomial.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be a finite 1-d sequence")
    deg = c.size - 1
    roots = np.empty(max(deg, 1))
    ws = kernels.make_workspace(max(deg, 1))
    found, status = kernels.isolate_roots(c, roots, *ws)
    if status == kernels.ZERO_POLY:
        raise ValueError("the zero polynomial has no isolated roots")
    if status != kernels.OK:
        raise RootCertificationError(f"root count not certified (status {status}) for {c}")
    out = roots[:found]
    scale = 1.0 + np.polynomial.polynomial.polyval(np.abs(out), np.abs(c))
    resid = np.abs(np.polynomial.polynomial.polyval(out, c))
    if np.any(resid > RESIDUAL_TOL * scale):
        raise RootCertificationError(f"root residual too large for {c}")
    return RootSet(tuple(float(r) for r in out))


def root_counts(coeffs: np.ndarray, lo, hi):
    """Per-row counts of roots in ``[lo[q], hi[q])``; also totals and status codes."""
    coeffs = np.ascontiguousarray(coeffs, dtype=float)
    lo = np.ascontiguousarray(np.atleast_1d(lo), dtype=float)
    hi = np.ascontiguousarray(np.atleast_1d(hi), dtype=float)
    n_s, width = coeffs.shape
    counts = np.zeros((n_s, lo.size), dtype=np.int32)
    totals = np.zeros(n_s, dtype=np.int32)
    status = np.zeros(n_s, dtype=np.int8)
    kernels.batch_root_counts(coeffs, lo, hi, counts, totals, status, *kernels.make_workspace(width - 1))
    return counts, totals, status


def _combine(results, columns: int):
    """Merge per-batch ``(sums, sumsq, used, discarded)`` into means and standard errors."""
    sums = np.zeros(columns)
    sumsq = np.zeros(columns)
    used = 0
    discarded = 0
    for s, q, u, d in results:
        sums += s
        sumsq += q
        used += u
        discarded += d
    mean = sums / used
    var = np.maximum(sumsq / used - mean**2, 0.0) * used / max(used - 1, 1)
    return mean, np.sqrt(var / used), used, discarded


def _sample_counts(model: CoefficientModel, spec: MonteCarloSpec, lo, hi, reducer):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)

    def work(rng, size):
        coeffs = model.sample_coefficients(rng, size)
        counts, totals, status = root_counts(coeffs, lo, hi)
        good = status == kernels.OK
        stat = reducer(counts[good], totals[good]).astype(float)
        return stat.sum(axis=0), (stat**2).sum(axis=0), int(good.sum()), int(size - good.sum())

    return run_batches(spec, work)


def _estimate(mean, se, used, discarded) -> Estimate:
    return Estimate(
        float(mean), float(se), used + discarded, True,
        {"discarded": discarded, "discard_rate": discarded / (used + discarded)},
    )


def empirical_intensity(model: CoefficientModel, edges, spec: MonteCarloSpec = MonteCarloSpec()) -> list[Estimate]:
    """Mean number of real roots in each bin ``[edges[i], edges[i+1])``."""
    edges = np.asarray(edges, float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    res = _sample_counts(model, spec, edges[:-1], edges[1:], lambda c, t: c)
    mean, se, used, disc = _combine(res, edges.size - 1)
    return [_estimate(m, s, used, disc) for m, s in zip(mean, se)]


def empirical_correlation(model: CoefficientModel, boxes: BoxFamily, spec: MonteCarloSpec = MonteCarloSpec()) -> Estimate:
    """Monte Carlo estimate of ``E[prod_i mu(B_i)]`` for disjoint boxes."""
    if not isinstance(boxes, BoxFamily):
        boxes = BoxFamily(tuple(boxes))
    res = _sample_counts(model, spec, boxes.lo, boxes.hi, lambda c, t: np.prod(c, axis=1, keepdims=True))
    mean, se, used, disc = _combine(res, 1)
    return _estimate(mean[0], se[0], used, disc)


def empirical_prob_all_real(model: CoefficientModel, spec: MonteCarloSpec = MonteCarloSpec()) -> Estimate:
    """Fraction of sampled polynomials whose roots are all real."""
    n = model.n
    res = _sample_counts(model, spec, [-np.inf], [np.inf], lambda c, t: (t == n)[:, None])
    mean, se, used, disc = _combine(res, 1)
    return _estimate(mean[0], se[0], used, disc)


def discriminant_prob_all_real(model: CoefficientModel, spec: MonteCarloSpec = MonteCarloSpec()) -> Estimate:
    """``P(xi_1^2 >= 4 xi_0 xi_2)`` for quadratics, without any root finding."""
    if model.n != 2:
        raise ValueError("the discriminant oracle only covers degree 2")

    def work(rng, size):
        c = model.sample_coefficients(rng, size)
        hit = (c[:, 1] ** 2 >= 4.0 * c[:, 0] * c[:, 2]).astype(float)
        return np.array([hit.sum()]), np.array([hit.sum()]), size, 0

    mean, se, used, disc = _combine(run_batches(spec, work), 1)
    return _estimate(mean[0], se[0], used, disc)
