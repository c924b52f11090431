"""Inner loops: certified real-root isolation and the tail-coefficient Monte Carlo estimator.

Polynomials inside this module are stored with *descending* coefficients
(``p[0]`` is the leading one), which keeps Horner and long division simple.
All public wrappers elsewhere take ascending coefficients.
"""
import math

import numpy as np

from ._accel import njit

OK = 0
UNCERTIFIED = 1  # sign certificate or parity check failed
DEGENERATE = 2  # (near-)multiple root or ill-conditioned Sturm chain
ZERO_POLY = 3

EPS = 2.220446049250313e-16
CHAIN_TOL = 1e-12


@njit
def horner(p, deg, x):
    acc = p[0]
    for i in range(1, deg + 1):
        acc = acc * x + p[i]
    return acc


@njit
def horner_abs(p, deg, x):
    ax = abs(x)
    acc = abs(p[0])
    for i in range(1, deg + 1):
        acc = acc * ax + abs(p[i])
    return acc


@njit
def _sign(v):
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


@njit
def sturm_chain(p, deg, chain, degs, work, mag):
    """Fill ``chain`` with the Sturm sequence of ``p``; return its length or ``-1``.

    Each member is rescaled to unit max-norm (positive factors leave every
    sign count unchanged).  ``mag`` tracks the size of the terms that went
    into each remainder coefficient; coefficients below ``CHAIN_TOL`` of it
    are rounding noise.  ``-1`` flags a remainder that is all noise, i.e. a
    (numerically) repeated root.
    """
    big = 0.0
    for i in range(deg + 1):
        big = max(big, abs(p[i]))
    for i in range(deg + 1):
        chain[0, i] = p[i] / big
    degs[0] = deg
    if deg == 0:
        return 1
    big = 0.0
    for i in range(deg):
        chain[1, i] = (deg - i) * chain[0, i]
        big = max(big, abs(chain[1, i]))
    for i in range(deg):
        chain[1, i] /= big
    degs[1] = deg - 1
    r = 1
    while degs[r] > 0:
        da = degs[r - 1]
        db = degs[r]
        for i in range(da + 1):
            work[i] = chain[r - 1, i]
            mag[i] = abs(work[i])
        for s in range(da - db + 1):
            q = work[s] / chain[r, 0]
            for j in range(db + 1):
                work[s + j] -= q * chain[r, j]
                mag[s + j] += abs(q * chain[r, j])
        # remainder occupies work[da-db+1 .. da], nominal degree db-1;
        # a coefficient below its accumulated rounding error counts as zero
        start = da - db + 1
        big = 0.0
        lead = -1
        for i in range(start, da + 1):
            if abs(work[i]) > CHAIN_TOL * mag[i]:
                if lead < 0:
                    lead = i
                big = max(big, abs(work[i]))
        if lead < 0:
            return -1
        nd = da - lead
        for i in range(nd + 1):
            chain[r + 1, i] = -work[lead + i] / big
        degs[r + 1] = nd
        r += 1
    return r + 1


@njit
def sign_changes(chain, degs, length, x):
    count = 0
    last = 0
    for r in range(length):
        s = _sign(horner(chain[r], degs[r], x))
        if s != 0:
            if last != 0 and s != last:
                count += 1
            last = s
    return count


@njit
def sign_changes_inf(chain, degs, length, direction):
    count = 0
    last = 0
    for r in range(length):
        s = _sign(chain[r, 0])
        if direction < 0 and degs[r] % 2 == 1:
            s = -s
        if s != 0:
            if last != 0 and s != last:
                count += 1
            last = s
    return count


@njit
def _certain_sign(p, deg, x):
    """Sign of ``p(x)`` if it exceeds the Horner rounding bound, else ``0``."""
    v = horner(p, deg, x)
    if abs(v) > 4.0 * (2 * deg + 1) * EPS * horner_abs(p, deg, x):
        return _sign(v)
    return 0


@njit
def _polish(p, deg, a, b, sa):
    """Root of ``p`` in ``(a, b)`` with ``sign p(a) = sa != sign p(b)``; safeguarded Newton."""
    x = 0.5 * (a + b)
    for _ in range(200):
        v = p[0]
        dv = 0.0
        for i in range(1, deg + 1):
            dv = dv * x + v
            v = v * x + p[i]
        if v == 0.0:
            return x
        if _sign(v) == sa:
            a = x
        else:
            b = x
        nx = x - v / dv if dv != 0.0 else 0.5 * (a + b)
        if not (a < nx < b):
            nx = 0.5 * (a + b)
        if abs(nx - x) <= 2.0 * EPS * abs(nx) or b - a <= 4.0 * EPS * max(abs(a), abs(b)):
            return nx
        x = nx
    return x


@njit
def isolate_roots(coeffs_asc, roots, chain, degs, work, stack_a, stack_b, stack_va, stack_vb):
    """Certified real roots of one polynomial (ascending coefficients).

    Writes the sorted roots into ``roots`` and returns ``(count, status)``.
    """
    top = coeffs_asc.shape[0] - 1
    while top >= 0 and coeffs_asc[top] == 0.0:
        top -= 1
    if top < 0:
        return 0, ZERO_POLY
    deg = top
    if deg == 0:
        return 0, OK
    p = np.empty(deg + 1)
    for i in range(deg + 1):
        p[i] = coeffs_asc[deg - i]
    mag = np.empty(deg + 1)
    length = sturm_chain(p, deg, chain, degs, work, mag)
    if length < 0:
        return 0, DEGENERATE
    total = sign_changes_inf(chain, degs, length, -1) - sign_changes_inf(chain, degs, length, 1)
    if total < 0 or (deg - total) % 2 != 0:
        return 0, UNCERTIFIED
    if total == 0:
        return 0, OK
    bound = 0.0
    for i in range(1, deg + 1):
        bound = max(bound, abs(p[i] / p[0]))
    bound = 1.0 + bound
    # bisection on Sturm counts: intervals (a, b] with V(a) - V(b) roots
    found = 0
    sp = 0
    stack_a[0] = -bound
    stack_b[0] = bound
    stack_va[0] = sign_changes(chain, degs, length, -bound)
    stack_vb[0] = sign_changes(chain, degs, length, bound)
    if stack_va[0] - stack_vb[0] != total:
        return 0, UNCERTIFIED
    sp = 1
    while sp > 0:
        sp -= 1
        a = stack_a[sp]
        b = stack_b[sp]
        va = stack_va[sp]
        vb = stack_vb[sp]
        cnt = va - vb
        if cnt == 0:
            continue
        if cnt == 1:
            sa = _certain_sign(p, deg, a)
            sb = _certain_sign(p, deg, b)
            if sa == 0 or sb == 0 or sa == sb:
                return found, UNCERTIFIED
            roots[found] = _polish(p, deg, a, b, sa)
            found += 1
            continue
        if b - a <= 1e-12 * (1.0 + abs(a) + abs(b)) or sp + 2 > stack_a.shape[0]:
            return found, DEGENERATE
        # split where the sign of p is unambiguous (a root may sit on the midpoint)
        mid = 0.5 * (a + b)
        tries = 0
        while _certain_sign(p, deg, mid) == 0:
            tries += 1
            if tries > 8:
                return found, DEGENERATE
            mid = a + (b - a) * (0.5 + 0.0537 * tries * (-1.0) ** tries)
        vm = sign_changes(chain, degs, length, mid)
        stack_a[sp] = a
        stack_b[sp] = mid
        stack_va[sp] = va
        stack_vb[sp] = vm
        stack_a[sp + 1] = mid
        stack_b[sp + 1] = b
        stack_va[sp + 1] = vm
        stack_vb[sp + 1] = vb
        sp += 2
    if found != total:
        return found, UNCERTIFIED
    # insertion sort; found <= deg
    for i in range(1, found):
        v = roots[i]
        j = i - 1
        while j >= 0 and roots[j] > v:
            roots[j + 1] = roots[j]
            j -= 1
        roots[j + 1] = v
    for i in range(1, found):
        if not roots[i] > roots[i - 1]:
            return found, DEGENERATE
    return found, OK


def make_workspace(deg):
    size = deg + 1
    stack = 64 * size + 64
    return (
        np.empty((size, size)),
        np.empty(size, dtype=np.int64),
        np.empty(size),
        np.empty(stack),
        np.empty(stack),
        np.empty(stack, dtype=np.int64),
        np.empty(stack, dtype=np.int64),
    )


@njit
def batch_root_counts(coeffs, box_lo, box_hi, counts, totals, status, chain, degs, work, sa, sb, sva, svb):
    """Root counts in half-open boxes ``[lo, hi)`` for each row of ``coeffs``."""
    nb = box_lo.shape[0]
    roots = np.empty(coeffs.shape[1])
    for s in range(coeffs.shape[0]):
        found, st = isolate_roots(coeffs[s], roots, chain, degs, work, sa, sb, sva, svb)
        status[s] = st
        totals[s] = found
        for q in range(nb):
            c = 0
            for i in range(found):
                if box_lo[q] <= roots[i] < box_hi[q]:
                    c += 1
            counts[s, q] = c


# ---------------------------------------------------------------------------
# tail-coefficient Monte Carlo


@njit
def _density(code, scale, t):
    if code == 0:
        z = t / scale
        return math.exp(-0.5 * z * z) / (2.5066282746310002 * scale)
    if code == 1:
        return 0.5 if abs(t) <= 1.0 else 0.0
    if code == 2:
        return math.exp(-t) if t >= 0.0 else 0.0
    return math.nan


@njit
def theorem1_moments(xi, eta_map, deriv_map, codes, scales):
    """Mean and sum of squared deviations of the tail-coefficient integrand over rows of ``xi``.

    ``eta = xi @ eta_map.T`` and ``G'(x_i) = xi @ deriv_map`` (both linear in
    the tail coefficients); ``codes``/``scales`` describe ``f_0..f_{k-1}``.
    """
    n_s, m = xi.shape
    k = eta_map.shape[0]
    mean = 0.0
    m2 = 0.0
    for s in range(n_s):
        w = 1.0
        for r in range(k):
            e = 0.0
            for j in range(m):
                e += eta_map[r, j] * xi[s, j]
            w *= _density(codes[r], scales[r], e)
            if w == 0.0:
                break
        if w != 0.0:
            for i in range(k):
                g = 0.0
                for j in range(m):
                    g += xi[s, j] * deriv_map[j, i]
                w *= abs(g)
        delta = w - mean
        mean += delta / (s + 1)
        m2 += delta * (w - mean)
    return mean, m2


def theorem1_moments_numpy(xi, eta_map, deriv_map, pdfs):
    """Vectorized counterpart of :func:`theorem1_moments`; ``pdfs[r]`` evaluates ``f_r``."""
    eta = xi @ eta_map.T
    w = np.prod(np.abs(xi @ deriv_map), axis=1)
    for r, pdf in enumerate(pdfs):
        w = w * pdf(eta[:, r])
    mean = float(np.mean(w))
    return mean, float(np.sum((w - mean) ** 2))
