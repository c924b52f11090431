"""Independent reference computations used by the tests.

Nothing here imports the package: each oracle recomputes its quantity by a
different route (brute-force expansion, finite differences, enumeration).
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def elem_sym_enum(x, i: int) -> float:
    """sigma_i by summing products over every i-subset."""
    x = list(x)
    if i < 0 or i > len(x):
        return 0.0
    return math.fsum(math.prod(c) for c in itertools.combinations(x, i))


def poly_product(x, b) -> np.ndarray:
    """Ascending coefficients of ``prod_i (z - x_i) * sum_j b_j z^j`` by repeated multiplication."""
    out = np.asarray(b, dtype=float)
    for r in x:
        shifted = np.concatenate([[0.0], out])
        out = shifted - r * np.concatenate([out, [0.0]])
    return out


def poly_derivative_at(coeffs, z: float) -> float:
    """Derivative of ``sum_j c_j z^j`` at ``z``, by Horner on the differentiated coefficients."""
    c = np.asarray(coeffs, dtype=float)
    d = c[1:] * np.arange(1, c.size)
    acc = 0.0
    for v in d[::-1]:
        acc = acc * z + v
    return acc


def eta_lstsq(x, tail, n: int) -> np.ndarray:
    """Low coefficients that make the polynomial vanish at ``x``, via a dense generic solve."""
    x = np.asarray(x, dtype=float)
    k = x.size
    v = x[:, None] ** np.arange(k)[None, :]
    rhs = -(x[:, None] ** np.arange(k, n + 1)[None, :]) @ np.asarray(tail, float)
    return np.linalg.solve(v, rhs)


def fd_jacobian_det(fun, x, h_scale: float = 1e-5) -> float:
    """Central-difference determinant of ``fun`` at ``x`` with steps ``h_i = h_scale (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    k = x.size
    jac = np.empty((k, k))
    for i in range(k):
        h = h_scale * (1.0 + abs(x[i]))
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        jac[:, i] = (np.asarray(fun(up)) - np.asarray(fun(dn))) / (2.0 * h)
    return float(np.linalg.det(jac))


def jacobian_closed_form(x, tail, eta, n: int) -> float:
    """``-prod_i G'(x_i) / prod_{i<j} (x_j - x_i)`` with ``G`` built from ``eta`` and ``tail``."""
    x = np.asarray(x, dtype=float)
    coeffs = np.concatenate([eta, tail])
    num = math.prod(poly_derivative_at(coeffs, xi) for xi in x)
    den = math.prod(x[j] - x[i] for i in range(x.size) for j in range(i + 1, x.size))
    return -num / den


def cauchy_pdf(x: float) -> float:
    return 1.0 / (math.pi * (1.0 + x * x))


def cauchy_mass(a: float, b: float) -> float:
    return (math.atan(b) - math.atan(a)) / math.pi


def random_points(rng: np.random.Generator, k: int, lo: float = -2.0, hi: float = 2.0, gap: float = 0.05):
    """``k`` points uniform on ``[lo, hi]`` with pairwise separation at least ``gap`` (rejection)."""
    while True:
        x = rng.uniform(lo, hi, size=k)
        if k == 1 or np.min(np.diff(np.sort(x))) >= gap:
            return x


def rho_n_scipy(pdfs, x, supports=None) -> float:
    """``rho_n`` from the single ``t``-integral for ``k = n``, using scipy's QUADPACK.

    ``prod_{i<j} |x_i - x_j| * int |t|^n prod_i f_i((-1)^(n-i) sigma_{n-i}(x) t) dt``.
    ``supports`` (one ``(lo, hi)`` per density) restricts ``t`` to the
    interval where no factor vanishes identically.
    """
    from scipy import integrate

    x = list(x)
    n = len(x)
    coef = [(-1) ** (n - i) * elem_sym_enum(x, n - i) for i in range(n + 1)]
    t_lo, t_hi = -np.inf, np.inf
    for c, (lo, hi) in zip(coef, supports or [(-np.inf, np.inf)] * (n + 1)):
        if c == 0.0:
            continue
        a, b = sorted((lo / c, hi / c))
        t_lo, t_hi = max(t_lo, a), min(t_hi, b)

    def f(t):
        out = abs(t) ** n
        for c, pdf in zip(coef, pdfs):
            out *= float(pdf(c * t))
        return out

    total = 0.0
    for a, b in ((t_lo, min(0.0, t_hi)), (max(0.0, t_lo), t_hi)):
        if a < b:
            total += integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=500)[0]
    vdm = math.prod(abs(x[i] - x[j]) for i in range(n) for j in range(i + 1, n))
    return vdm * total
