"""Correlation functions of real zeros: quadrature, Monte Carlo and closed forms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import kernels
from ._accel import USE_NUMBA
from .models import CoefficientModel
from .montecarlo import MonteCarloSpec, batch_spread, merge_moments, run_batches
from .polycore import (
    PointConfig,
    abs_vandermonde,
    elementary_symmetric,
    factor_matrix,
    solve_vandermonde,
)
from .quadrature import Estimate, Geometry, QuadratureSpec, integrate_lines, integrate_nd

__all__ = [
    "CorrelationQuery",
    "Theorem2Integrand",
    "rho_theorem2_integrand",
    "rho_k_quadrature",
    "rho_k_montecarlo",
    "rho_n_gaussian",
    "rho_n_exponential",
    "rho_n_uniform",
    "rho_n_closed_form",
    "rho_n_corollary",
    "rho",
    "rho1_bin_integrals",
    "expected_real_roots",
    "rho2_box_integral",
    "prob_all_real",
]

METHODS = ("auto", "theorem2", "theorem1", "closed-form")
TAIL_WARNING_SIGMA = 5.0


@dataclass(frozen=True)
class CorrelationQuery:
    model: CoefficientModel
    x: PointConfig
    method: str = "auto"
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    mc: MonteCarloSpec = field(default_factory=MonteCarloSpec)

    def __post_init__(self):
        object.__setattr__(self, "x", PointConfig.coerce(self.x))
        if not 1 <= self.x.k <= self.model.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.x.k}, n={self.model.n}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    @property
    def k(self) -> int:
        return self.x.k

    @property
    def n(self) -> int:
        return self.model.n


# ---------------------------------------------------------------------------
# integral over the cofactor coefficients t_0..t_{n-k}


class Theorem2Integrand:
    """``prod_i f_i((C t)_i) * prod_l |sum_j t_j x_l^j|`` without the Vandermonde prefactor.

    ``C`` maps the coefficients of the cofactor ``sum_j t_j x^j`` to those
    of ``prod_l (x - x_l) * sum_j t_j x^j``.  With ``whiten`` the integrand
    is expressed in coordinates ``s`` with ``t = B s``, where ``B`` makes the
    quadratic form ``t' C' diag(spread_i^-2) C t`` the identity; the
    integral is unchanged and the integrand becomes roughly isotropic.
    """

    def __init__(self, model: CoefficientModel, x, whiten: bool = False):
        x = PointConfig.coerce(x).array
        self.model = model
        self.k = x.size
        self.n = model.n
        self.m = self.n - self.k + 1
        self.supports = [f.support for f in model.families]
        coef = factor_matrix(x, self.n)
        powers = x[None, :] ** np.arange(self.m)[:, None]
        if whiten:
            spread = np.array([f.spread for f in model.families], dtype=float)
            form = coef.T @ (coef / spread[:, None] ** 2)
            basis = np.linalg.inv(np.linalg.cholesky(form).T)
        else:
            basis = np.eye(self.m)
        self.basis = basis
        self.jacobian = abs(float(np.linalg.det(basis)))
        self.coef = coef @ basis
        self.powers = basis.T @ powers

    def __call__(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(s)
        a = s @ self.coef.T
        out = np.prod(np.abs(s @ self.powers), axis=1) * self.jacobian
        for i, fam in enumerate(self.model.families):
            out = out * fam.pdf(a[:, i])
        return out

    def geometry(self) -> Geometry:
        """Kinks where some ``sum_j t_j x_l^j`` vanishes; support faces of every ``f_i``."""
        rows, rhs = [], []
        for i, (lo, hi) in enumerate(self.supports):
            if math.isfinite(hi):
                rows.append(self.coef[i])
                rhs.append(hi)
            if math.isfinite(lo):
                rows.append(-self.coef[i])
                rhs.append(-lo)
        region = (np.array(rows), np.array(rhs)) if rows else None
        return Geometry((self.powers.T.copy(), np.zeros(self.k)), region)

    def bounding_box(self) -> list[tuple[float, float]] | None:
        """Tightest box around ``{t : (C t)_i in support(f_i)}``; ``None`` if empty."""
        region = self.geometry().region
        if region is None:
            return [(-math.inf, math.inf)] * self.m
        a_ub, b_ub = region
        box = []
        for j in range(self.m):
            ends = []
            for sign in (1.0, -1.0):
                c = np.zeros(self.m)
                c[j] = sign
                res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * self.m, method="highs")
                if res.status == 2:
                    return None
                if res.status == 3:
                    ends.append(-sign * math.inf)
                elif res.status == 0:
                    ends.append(sign * res.fun)
                else:  # pragma: no cover - solver trouble, fall back to no clipping
                    ends.append(-sign * math.inf)
            lo, hi = ends
            pad = 1e-9 * (1.0 + max(abs(lo) if math.isfinite(lo) else 0.0, abs(hi) if math.isfinite(hi) else 0.0))
            box.append((lo - pad, hi + pad) if lo < hi else (lo, lo))
        return box


def rho_theorem2_integrand(model: CoefficientModel, x, t) -> np.ndarray | float:
    """The cofactor integrand at one cofactor vector ``t`` (or rows of ``t``)."""
    t = np.asarray(t, dtype=float)
    vals = Theorem2Integrand(model, x)(np.atleast_2d(t))
    return float(vals[0]) if t.ndim == 1 else vals


def rho_k_quadrature(q: CorrelationQuery) -> Estimate:
    """``rho_k(x)`` by deterministic integration over ``R^{n-k+1}``."""
    integrand = Theorem2Integrand(q.model, q.x, whiten=True)
    pref = float(abs_vandermonde(q.x.array))
    box = integrand.bounding_box()
    if box is None or any(lo == hi for lo, hi in box):
        return Estimate(0.0, 0.0, 0, True, {"method": "theorem2", "empty_support": True})
    est = integrate_nd(integrand, integrand.m, q.quad, bounds=box, geometry=integrand.geometry())
    out = est.scaled(pref)
    out.meta["method"] = "theorem2"
    return out


# ---------------------------------------------------------------------------
# expectation over the tail coefficients


def _theorem1_maps(x: np.ndarray, n: int):
    """Linear maps ``xi_tail -> eta`` and ``xi_tail -> (G'(x_i))_i``."""
    k = x.size
    tail_pows = np.arange(k, n + 1)
    eta_map = -solve_vandermonde(x, x[:, None] ** tail_pows[None, :])  # (k, m)
    low = np.arange(k)
    d_eta = low[None, :] * x[:, None] ** np.maximum(low - 1, 0)[None, :]
    d_tail = tail_pows[None, :] * x[:, None] ** (tail_pows - 1)[None, :]
    deriv_map = (d_eta @ eta_map + d_tail).T  # (m, k)
    return np.ascontiguousarray(eta_map), np.ascontiguousarray(deriv_map)


def rho_k_montecarlo(q: CorrelationQuery) -> Estimate:
    """``rho_k(x)`` as a Monte Carlo average over the coefficients ``xi_k..xi_n``.

    ``error`` is the sample standard error.  ``meta['tail_warning']`` is set
    when some batch mean sits more than five of its standard errors away
    from the overall mean, a sign of a heavy-tailed integrand.
    """
    x = q.x.array
    k, n = x.size, q.n
    eta_map, deriv_map = _theorem1_maps(x, n)
    low = q.model.families[:k]
    compiled = USE_NUMBA and q.model.compilable
    codes = q.model.codes[:k]
    params = q.model.params[:k]
    pdfs = [f.pdf for f in low]

    def work(rng, size):
        xi = np.ascontiguousarray(q.model.sample_coefficients(rng, size, start=k))
        if compiled:
            mean, m2 = kernels.theorem1_moments(xi, eta_map, deriv_map, codes, params)
        else:
            mean, m2 = kernels.theorem1_moments_numpy(xi, eta_map, deriv_map, pdfs)
        return size, mean, m2

    parts = run_batches(q.mc, work)
    count, mean, m2 = merge_moments(parts)
    se = math.sqrt(m2 / (count - 1) / count) if count > 1 else math.inf
    spread = batch_spread(parts, mean)
    pref = 1.0 / float(abs_vandermonde(x))
    meta = {
        "method": "theorem1",
        "batch_spread": spread,
        "tail_warning": spread > TAIL_WARNING_SIGMA,
        "backend": "numba" if compiled else "numpy",
    }
    return Estimate(mean * pref, se * pref, count, True, meta)


# ---------------------------------------------------------------------------
# closed forms for k = n


def _gamma_half(m: int) -> float:
    """``Gamma(m / 2)`` for a positive integer ``m``."""
    if m % 2 == 0:
        return float(math.factorial(m // 2 - 1))
    g = math.sqrt(math.pi)
    z = 0.5
    while z < m / 2:
        g *= z
        z += 1.0
    return g


def rho_n_gaussian(x, scales=1.0) -> np.ndarray | float:
    """``rho_n`` for centred Gaussian coefficients with standard deviations ``scales``.

    ``Gamma((n+1)/2) / (pi^((n+1)/2) prod v_i) * (sum_i sigma_{n-i}^2 / v_i^2)^(-(n+1)/2)
    * prod_{i<j} |x_i - x_j|``.  ``x`` may be a batch of shape ``(..., n)``.
    """
    xa = np.asarray(x.array if isinstance(x, PointConfig) else x, dtype=float)
    scalar = xa.ndim <= 1
    xa = np.atleast_1d(xa)
    n = xa.shape[-1]
    v = np.broadcast_to(np.asarray(scales, float), (n + 1,))
    if np.any(v <= 0):
        raise ValueError("scales must be positive")
    e = elementary_symmetric(xa)
    quad = np.sum(e[..., ::-1] ** 2 / v**2, axis=-1)
    const = _gamma_half(n + 1) / (math.pi ** ((n + 1) / 2) * float(np.prod(v)))
    out = const * quad ** (-(n + 1) / 2) * abs_vandermonde(xa)
    return float(out) if scalar else out


def rho_n_exponential(x) -> np.ndarray | float:
    """``rho_n`` for rate-one exponential coefficients; zero unless every ``x_i < 0``."""
    xa = np.asarray(x.array if isinstance(x, PointConfig) else x, dtype=float)
    scalar = xa.ndim <= 1
    xa = np.atleast_1d(xa)
    n = xa.shape[-1]
    neg = np.all(xa < 0, axis=-1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        val = math.factorial(n) * abs_vandermonde(xa) / np.prod(1.0 - xa, axis=-1) ** (n + 1)
    out = np.where(neg, val, 0.0)
    return float(out) if scalar else out


def rho_n_uniform(x) -> np.ndarray | float:
    """``rho_n`` for coefficients uniform on ``[-1, 1]``."""
    xa = np.asarray(x.array if isinstance(x, PointConfig) else x, dtype=float)
    scalar = xa.ndim <= 1
    xa = np.atleast_1d(xa)
    n = xa.shape[-1]
    top = np.max(np.abs(elementary_symmetric(xa)), axis=-1)
    out = 2.0**-n / (n + 1) * abs_vandermonde(xa) / top ** (n + 1)
    return float(out) if scalar else out


def rho_n_closed_form(model: CoefficientModel, x):
    """Closed-form ``rho_n`` when every coefficient shares a covered family, else ``None``."""
    kind = model.kind
    if kind == "gaussian":
        return rho_n_gaussian(x, model.scales)
    if kind == "uniform":
        return rho_n_uniform(x)
    if kind == "exponential":
        return rho_n_exponential(x)
    return None


def rho(q: CorrelationQuery) -> Estimate:
    """Dispatch on ``q.method``; ``auto`` prefers closed forms, then quadrature."""
    method = q.method
    if method == "auto":
        if q.k == q.n and q.model.kind is not None:
            method = "closed-form"
        elif q.n - q.k + 1 <= 4:
            method = "theorem2"
        else:
            method = "theorem1"
    if method == "closed-form":
        if q.k != q.n:
            raise ValueError("closed forms exist only for k = n")
        val = rho_n_closed_form(q.model, q.x)
        if val is None:
            raise ValueError(f"no closed form for model {q.model.describe()}")
        return Estimate(float(val), 0.0, 1, True, {"method": "closed-form"})
    if method == "theorem2":
        return rho_k_quadrature(q)
    return rho_k_montecarlo(q)


# ---------------------------------------------------------------------------
# integrals of rho over boxes (for comparison with root counts)


def _lobatto(a: float, b: float, deg: int) -> np.ndarray:
    return 0.5 * (a + b) + 0.5 * (b - a) * np.cos(np.pi * np.arange(deg + 1) / deg)


_MAX_SPLITS = 6


def _piece_integrals(fn, a: float, b: float, cuts: np.ndarray, rel_tol: float, max_deg: int = 64,
                     depth: int = 0, scale: float | None = None):
    """Integrals of a piecewise smooth ``fn`` over ``[cuts[i], cuts[i+1]]`` inside ``[a, b]``.

    ``fn(xs)`` returns values, pointwise errors and convergence flags.  The
    Chebyshev interpolant on Lobatto points is integrated exactly; the
    degree doubles (reusing every earlier point) until successive bin
    integrals agree.  A piece that is still unsettled at ``max_deg`` is
    halved, which copes with weak singularities at the piece ends.
    """
    deg = 8
    xs = _lobatto(a, b, deg)
    vals, errs, ok = fn(xs)
    prev = None
    while True:
        cheb = np.polynomial.Chebyshev.fit(xs, vals, deg, domain=[a, b])
        anti = cheb.integ()
        cur = anti(cuts[1:]) - anti(cuts[:-1])
        if prev is not None:
            diff = np.abs(cur - prev)
            ref = scale if scale is not None else max(np.max(np.abs(cur)), 1e-300)
            settled = bool(np.all(diff <= rel_tol * ref))
            if settled or deg >= max_deg:
                break
        prev = cur
        deg *= 2
        fresh = _lobatto(a, b, deg)[1::2]
        fv, fe, fok = fn(fresh)
        ok = ok and fok
        merged = np.empty(deg + 1)
        merged_err = np.empty(deg + 1)
        merged[0::2], merged[1::2] = vals, fv
        merged_err[0::2], merged_err[1::2] = errs, fe
        xs, vals, errs = _lobatto(a, b, deg), merged, merged_err
    if not settled and depth < _MAX_SPLITS:
        # tolerance stays relative to the whole piece, so halves are not held to a tighter standard
        ref = scale if scale is not None else max(np.max(np.abs(cur)), 1e-300)
        mid = 0.5 * (a + b)
        total, err_total = np.zeros(cuts.size - 1), np.zeros(cuts.size - 1)
        used, all_ok = deg + 1, ok
        for lo, hi in ((a, mid), (mid, b)):
            sub = np.unique(np.clip(cuts, lo, hi))
            v, e, u, good = _piece_integrals(fn, lo, hi, sub, rel_tol, max_deg, depth + 1, 0.5 * ref)
            owner = np.searchsorted(cuts, sub[:-1], side="right") - 1
            np.add.at(total, owner, v)
            np.add.at(err_total, owner, e)
            used += u
            all_ok = all_ok and good
        return total, err_total, used, all_ok
    width = np.diff(cuts)
    return cur, diff + width * float(np.max(errs)), deg + 1, settled and ok


def _rho1_points(model: CoefficientModel, method: str, quad: QuadratureSpec, mc: MonteCarloSpec):
    def fn(xs):
        vals = np.empty(xs.size)
        errs = np.empty(xs.size)
        ok = True
        for i, xv in enumerate(xs):
            e = rho(CorrelationQuery(model, PointConfig((float(xv),)), method, quad, mc))
            vals[i], errs[i] = e.value, e.error
            ok = ok and e.converged
        return vals, errs, ok

    return fn


def rho1_bin_integrals(
    model: CoefficientModel,
    edges,
    rel_tol: float = 1e-6,
    method: str = "theorem2",
    quad: QuadratureSpec | None = None,
    mc: MonteCarloSpec | None = None,
) -> list[Estimate]:
    """``int rho_1`` over each bin ``[edges[i], edges[i+1]]``.

    ``rho_1`` is smooth away from ``x = -1, 0, 1`` (and the ends of the
    root range), so it is interpolated piecewise between those points and
    the interpolant is integrated over the bins.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing")
    quad = quad or QuadratureSpec(rel_tol=0.1 * rel_tol, max_evals=100_000_000)
    mc = mc or MonteCarloSpec()
    fn = _rho1_points(model, method, quad, mc)
    lo, hi = model.root_range()
    splits = {-1.0, 0.0, 1.0, lo, hi}
    knots = sorted({edges[0], edges[-1]} | {p for p in splits if edges[0] < p < edges[-1]})
    values = np.zeros(edges.size - 1)
    errors = np.zeros(edges.size - 1)
    evals = 0
    settled = np.ones(edges.size - 1, dtype=bool)
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= lo or a >= hi:
            continue  # no roots there
        cuts = np.unique(np.clip(edges, a, b))
        val, err, used, ok = _piece_integrals(fn, a, b, cuts, rel_tol)
        evals += used
        # cuts are bin edges clipped to the piece; map pieces back to bins
        owner = np.searchsorted(edges, cuts[:-1], side="right") - 1
        np.add.at(values, owner, val)
        np.add.at(errors, owner, err)
        if not ok:
            settled[owner] = False
    return [
        Estimate(float(v), float(e), evals, bool(c), {"method": method})
        for v, e, c in zip(values, errors, settled)
    ]


def expected_real_roots(
    model: CoefficientModel,
    rel_tol: float = 1e-6,
    method: str = "theorem2",
    quad: QuadratureSpec | None = None,
    mc: MonteCarloSpec | None = None,
) -> Estimate:
    """``int_R rho_1``, the mean number of real roots.

    The part over ``|x| > 1`` is the intensity on ``[-1, 1]`` of the
    polynomial with reversed coefficients (``x -> 1/x``).
    """
    parts = []
    for m in (model, CoefficientModel(tuple(reversed(model.families)))):
        parts.extend(rho1_bin_integrals(m, [-1.0, 0.0, 1.0], rel_tol, method, quad, mc))
    value = math.fsum(p.value for p in parts)
    error = math.fsum(p.error for p in parts)
    return Estimate(value, error, sum(p.evals for p in parts[::2]), all(p.converged for p in parts), {"method": method})


def rho2_box_integral(model: CoefficientModel, box1, box2, spec: QuadratureSpec | None = None,
                      inner: QuadratureSpec | None = None) -> Estimate:
    """``int_{B1} int_{B2} rho_2`` with ``rho_2`` from the cofactor integral (or the closed form when ``n = 2``)."""
    spec = spec or QuadratureSpec(rel_tol=1e-5)
    inner = inner or spec.with_(rel_tol=0.1 * spec.rel_tol)
    inner_err = []

    def rho2(pts):
        if model.n == 2 and model.kind is not None:
            return np.asarray(rho_n_closed_form(model, pts))
        out = np.empty(pts.shape[0])
        for i, p in enumerate(pts):
            e = rho_k_quadrature(CorrelationQuery(model, PointConfig(tuple(p)), "theorem2", inner))
            out[i] = e.value
            inner_err.append(e.error)
        return out

    est = integrate_nd(rho2, 2, spec.with_(strategy="adaptive"), bounds=[tuple(box1), tuple(box2)])
    area = (box1[1] - box1[0]) * (box2[1] - box2[0])
    extra = area * (sum(inner_err) / len(inner_err)) if inner_err else 0.0
    return Estimate(est.value, est.error + extra, est.evals, est.converged, dict(est.meta, inner_error=extra))


# ---------------------------------------------------------------------------
# probability that every root is real


def rho_n_corollary(model: CoefficientModel, pts, spec: QuadratureSpec | None = None):
    """``rho_n`` at each row of ``pts`` from the one-dimensional ``k = n`` integral.

    ``rho_n(x) = prod_{i<j} |x_i - x_j| * int |t|^n prod_i f_i((-1)^(n-i) sigma_{n-i}(x) t) dt``.
    Returns values and error estimates.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-9)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n = model.n
    if pts.shape[1] != n:
        raise ValueError(f"need {n} points per row")
    sig = elementary_symmetric(pts)  # (N, n+1)
    idx = n - np.arange(n + 1)
    coef = sig[:, idx] * (-1.0) ** idx  # coefficient of f_i, i = 0..n
    # t = s / lam gives every row an integrand of unit width in s
    spread = np.array([fam.spread for fam in model.families], dtype=float)
    lam = np.sqrt(np.sum((coef / spread) ** 2, axis=1))
    coef = coef / lam[:, None]
    pdfs = [f.pdf for f in model.families]
    ends = [(lo, hi) for lo, hi in (f.support for f in model.families)]

    def f(t, c):
        out = np.abs(t) ** n
        for i, pdf in enumerate(pdfs):
            out = out * pdf(c[:, i] * t)
        return out

    def breaks(c):
        cols = [np.zeros(c.shape[0])]
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, (lo, hi) in enumerate(ends):
                for e in (lo, hi):
                    if math.isfinite(e):
                        cols.append(np.where(c[:, i] != 0.0, e / c[:, i], np.nan))
        return np.stack(cols, axis=1)

    val, err, _ = integrate_lines(f, coef, spec, breaks=breaks)
    pref = abs_vandermonde(pts) / lam ** (n + 1)
    return val * pref, err * pref


def _rho_n_points(model: CoefficientModel, pts: np.ndarray, inner: QuadratureSpec) -> np.ndarray:
    closed = rho_n_closed_form(model, pts)
    if closed is not None:
        return np.asarray(closed)
    return rho_n_corollary(model, pts, inner)[0]


def prob_all_real(
    model: CoefficientModel,
    outer_spec: QuadratureSpec | None = None,
    inner_spec: QuadratureSpec | None = None,
    exact_linear: bool = True,
) -> Estimate:
    """``P(all n roots real) = (1/n!) * int_{R^n} rho_n``.

    ``rho_n`` comes from a closed form when the model has one, otherwise
    from the one-dimensional ``k = n`` integral at every outer point.  The
    outer integral uses ``x = tan(u)`` per coordinate: adaptive cubature for
    ``n <= 2`` and randomly shifted Sobol points for ``n >= 3``.  Degree one
    returns exactly 1 unless ``exact_linear`` is off.
    """
    n = model.n
    if n == 1 and exact_linear:
        return Estimate(1.0, 0.0, 0, True, {"shortcut": "linear"})
    if outer_spec is None:
        outer_spec = QuadratureSpec(rel_tol=1e-6 if n <= 2 else 1e-4, transform="tangent", max_evals=20_000_000)
    if outer_spec.strategy == "auto":
        outer_spec = outer_spec.with_(strategy="adaptive" if n <= 2 else "quasi-random")
    inner_spec = inner_spec or QuadratureSpec(rel_tol=1e-9)
    bounds = [model.root_range()] * n

    def f(pts):
        return _rho_n_points(model, pts, inner_spec)

    # rho_n has kinks on the diagonals x_i = x_j
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    normals = np.zeros((len(pairs), n))
    for r, (i, j) in enumerate(pairs):
        normals[r, i], normals[r, j] = 1.0, -1.0
    # lines are only worth it for the adaptive rule; sampled points are cheap
    geometry = Geometry((normals, np.zeros(len(pairs)))) if outer_spec.strategy == "adaptive" else None
    est = integrate_nd(f, n, outer_spec, bounds=bounds, geometry=geometry)
    return est.scaled(1.0 / math.factorial(n))
