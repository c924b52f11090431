"""Symmetric-function and Vandermonde algebra.

Coefficient vectors are ordered ascending by degree everywhere in this
package: ``a[j]`` multiplies ``x**j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SEPARATION_FLOOR = 1e-8


class SeparationError(ValueError):
    """Evaluation points are too close to each other (or not finite)."""


@dataclass(frozen=True)
class PointConfig:
    """Pairwise distinct evaluation points ``x_1, ..., x_k``."""

    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("PointConfig needs at least one point")
        check_separation(pts)

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points)

    @classmethod
    def coerce(cls, x) -> "PointConfig":
        if isinstance(x, PointConfig):
            return x
        return cls(tuple(np.atleast_1d(np.asarray(x, dtype=float))))


@dataclass(frozen=True)
class Partition:
    """Weakly decreasing tuple of nonnegative integers."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if any(p < 0 for p in parts):
            raise ValueError(f"negative part in {parts}")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"parts must be weakly decreasing: {parts}")
        object.__setattr__(self, "parts", parts)

    def __len__(self):
        return len(self.parts)

    def padded(self, k: int) -> tuple[int, ...]:
        if len(self.parts) > k:
            raise ValueError(f"partition {self.parts} is longer than {k}")
        return self.parts + (0,) * (k - len(self.parts))

    @classmethod
    def hook(cls, arm: int, leg: int, k: int) -> "Partition":
        """``(arm, 1^leg, 0^(k-1-leg))``, the partitions that appear in the eta expansion."""
        return cls((arm,) + (1,) * leg + (0,) * (k - 1 - leg))


def _as_array(x) -> np.ndarray:
    if isinstance(x, PointConfig):
        return x.array
    return np.atleast_1d(np.asarray(x, dtype=float))


def check_separation(x, floor: float = SEPARATION_FLOOR) -> None:
    """Raise :class:`SeparationError` unless ``min |x_i - x_j| >= floor * (1 + max |x_i|)``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise SeparationError(f"non-finite point in {x}")
    if x.size < 2:
        return
    gap = np.min(np.diff(np.sort(x)))
    if gap < floor * (1.0 + np.max(np.abs(x))):
        raise SeparationError(
            f"points closer than the separation floor: min gap {gap:.3g} in {x}"
        )


def elementary_symmetric(x) -> np.ndarray:
    """All elementary symmetric polynomials ``[s_0, ..., s_k]`` of the last axis of ``x``.

    Works on batches: input shape ``(..., k)`` gives output ``(..., k + 1)``.
    """
    if isinstance(x, PointConfig):
        x = x.array
    x = np.asarray(x, dtype=float)
    k = x.shape[-1]
    e = np.zeros(x.shape[:-1] + (k + 1,))
    e[..., 0] = 1.0
    # multiply out prod(1 + x_j z) one factor at a time
    for j in range(k):
        xj = x[..., j : j + 1]
        e[..., 1 : j + 2] = e[..., 1 : j + 2] + xj * e[..., 0 : j + 1]
    return e


def elem_sym(x, i: int) -> float:
    """``sigma_i(x)``; zero for ``i < 0`` or ``i > k``."""
    x = _as_array(x)
    if i < 0 or i > x.size:
        return 0.0
    return float(elementary_symmetric(x)[i])


def vandermonde_det(x) -> float:
    """Signed determinant ``prod_{i<j} (x_j - x_i)`` of the Vandermonde matrix."""
    x = _as_array(x)
    d = 1.0
    for i in range(x.size):
        for j in range(i + 1, x.size):
            d *= x[j] - x[i]
    return d


def abs_vandermonde(x) -> np.ndarray:
    """``prod_{i<j} |x_i - x_j|`` over the last axis; batches allowed."""
    x = np.asarray(x, dtype=float)
    k = x.shape[-1]
    out = np.ones(x.shape[:-1])
    for i in range(k):
        for j in range(i + 1, k):
            out = out * np.abs(x[..., j] - x[..., i])
    return out


def vandermonde_matrix(x, cols: int | None = None) -> np.ndarray:
    x = _as_array(x)
    return np.vander(x, cols if cols is not None else x.size, increasing=True)


def solve_vandermonde(x, rhs) -> np.ndarray:
    """Solve ``V(x) y = rhs`` by Newton divided differences.

    ``y`` holds the ascending coefficients of the polynomial of degree
    ``< k`` taking the value ``rhs[i]`` at ``x[i]``.  ``rhs`` may carry
    extra trailing axes (several right-hand sides at once).
    """
    x = _as_array(x)
    check_separation(x)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != x.size:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {x.size}")
    y = _newton_solve(x, rhs)
    # one step of refinement restores a small componentwise residual
    resid = rhs - np.tensordot(np.vander(x, x.size, increasing=True), y, axes=1)
    return y + _newton_solve(x, resid)


def _newton_solve(x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # nodes by increasing magnitude keep the monomial conversion accurate near 0
    order = np.argsort(np.abs(x), kind="stable")
    x = x[order]
    c = np.array(rhs[order], dtype=float, copy=True)
    k = x.size
    xs = x.reshape((k,) + (1,) * (c.ndim - 1))
    # divided differences, in place
    for j in range(1, k):
        c[j:] = (c[j:] - c[j - 1 : -1]) / (xs[j:] - xs[: k - j])
    # Newton form -> monomial basis
    for j in range(k - 2, -1, -1):
        for i in range(j, k - 1):
            c[i] = c[i] - xs[j] * c[i + 1]
    return c


def schur(lam, x) -> float:
    """Schur function ``S_lam(x)`` as a ratio of alternants.

    The numerator rows are rescaled by their largest entry before the
    determinant is taken.
    """
    x = _as_array(x)
    check_separation(x)
    k = x.size
    if not isinstance(lam, Partition):
        lam = Partition(tuple(lam))
    parts = lam.padded(k)
    expo = np.array([parts[k - 1 - j] + j for j in range(k)])
    a = x[:, None] ** expo[None, :]
    scale = np.max(np.abs(a), axis=1)
    scale[scale == 0.0] = 1.0  # x_i = 0 with every exponent positive
    num = np.linalg.det(a / scale[:, None]) * np.prod(scale)
    return float(num / vandermonde_det(x))


def _tail_matrix(x: np.ndarray, n: int) -> np.ndarray:
    """``X[i, j - k] = x_i ** j`` for ``j = k..n``."""
    k = x.size
    return x[:, None] ** np.arange(k, n + 1)[None, :]


def _check_tail(x: np.ndarray, tail, n: int) -> np.ndarray:
    tail = np.asarray(tail, dtype=float)
    k = x.size
    if n < k:
        raise ValueError(f"degree n={n} is smaller than the number of points k={k}")
    if tail.shape[0] != n - k + 1:
        raise ValueError(f"tail must have n-k+1={n - k + 1} entries, got {tail.shape[0]}")
    if not np.all(np.isfinite(tail)):
        raise ValueError("non-finite tail coefficient")
    return tail


def eta_vandermonde(x, tail, n: int) -> np.ndarray:
    """Low-order coefficients ``eta_0..eta_{k-1}`` forcing a zero at every ``x_i``.

    ``tail`` holds ``xi_k, ..., xi_n``.  The polynomial with coefficients
    ``(eta, tail)`` vanishes at each point of ``x``.
    """
    x = _as_array(x)
    tail = _check_tail(x, tail, n)
    return -solve_vandermonde(x, _tail_matrix(x, n) @ tail)


def eta_schur(x, tail, n: int) -> np.ndarray:
    """Same map as :func:`eta_vandermonde`, expanded in hook Schur functions.

    ``eta_r = (-1)**(k - r) * sum_j xi_j * S_(j-k+1, 1^(k-r-1), 0^r)(x)``
    with ``r`` counted from zero.
    """
    x = _as_array(x)
    tail = _check_tail(x, tail, n)
    k = x.size
    eta = np.zeros(k)
    for r in range(k):
        acc = 0.0
        for j in range(k, n + 1):
            acc += tail[j - k] * schur(Partition.hook(j - k + 1, k - r - 1, k), x)
        eta[r] = (-1) ** (k - r) * acc
    return eta


def derivative_at_points(x, eta, tail) -> np.ndarray:
    """``G'(x_i)`` for the polynomial with coefficients ``(eta, tail)``."""
    x = _as_array(x)
    coeffs = np.concatenate([np.asarray(eta, float), np.asarray(tail, float)])
    deriv = np.arange(1, coeffs.size) * coeffs[1:]
    return np.polynomial.polynomial.polyval(x, deriv)


def eta_jacobian_det(x, tail, n: int) -> float:
    """Determinant of the Jacobian of ``x -> eta(x)`` for fixed tail.

    Equals ``(-1)**k * prod_i G'(x_i) / prod_{i<j} (x_j - x_i)``.
    """
    x = _as_array(x)
    eta = eta_vandermonde(x, tail, n)
    return (-1.0) ** x.size * float(np.prod(derivative_at_points(x, eta, tail))) / vandermonde_det(x)


def factor_matrix(x, n: int) -> np.ndarray:
    """Matrix ``C`` with ``a = C @ b`` for ``sum a_i x^i = prod(x - x_l) * sum b_j x^j``.

    ``C[i, j] = (-1)**(k - i + j) * sigma_{k - i + j}(x)``, shape ``(n + 1, n - k + 1)``.
    """
    x = _as_array(x)
    k = x.size
    e = elementary_symmetric(x)
    c = np.zeros((n + 1, n - k + 1))
    for i in range(n + 1):
        for j in range(n - k + 1):
            idx = k - i + j
            if 0 <= idx <= k:
                c[i, j] = (-1.0) ** idx * e[idx]
    return c


def coeffs_from_factorization(x, b) -> np.ndarray:
    """Coefficients ``a_0..a_n`` of ``prod_l (x - x_l) * sum_j b_j x^j``."""
    x = _as_array(x)
    b = np.asarray(b, dtype=float)
    n = x.size + b.size - 1
    return factor_matrix(x, n) @ b


def derivative_at_root(x, i: int, b) -> float:
    """Derivative of ``prod_l (x - x_l) * sum_j b_j x^j`` at the root ``x[i]`` (0-based)."""
    x = _as_array(x)
    if not 0 <= i < x.size:
        raise IndexError(f"point index {i} out of range for k={x.size}")
    others = np.delete(x, i)
    return float(np.prod(x[i] - others) * np.polynomial.polynomial.polyval(x[i], b))
