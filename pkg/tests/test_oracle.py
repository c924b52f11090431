import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zerocorr import (
    BoxFamily,
    CoefficientModel,
    MonteCarloSpec,
    RootCertificationError,
    discriminant_prob_all_real,
    empirical_correlation,
    empirical_intensity,
    empirical_prob_all_real,
    real_roots,
    stream,
)
from zerocorr.oracle import root_counts

from oracles import cauchy_mass, poly_product

MODELS = {
    "gaussian": CoefficientModel.gaussian,
    "uniform": CoefficientModel.uniform,
    "exponential": CoefficientModel.exponential,
}


def test_real_roots_examples():
    assert real_roots([-1, 0, 1]).roots == pytest.approx((-1.0, 1.0), abs=1e-15)
    assert real_roots([1, 0, 1]).count == 0
    assert real_roots([-6, 11, -6, 1]).roots == pytest.approx((1.0, 2.0, 3.0), rel=1e-14)
    assert real_roots([3.0]).count == 0
    assert real_roots([2.0, 4.0, 0.0]).roots == pytest.approx((-0.5,), rel=1e-15)


def test_real_roots_errors():
    with pytest.raises(ValueError):
        real_roots([0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        real_roots([1.0, math.nan])
    # a double root cannot be certified
    with pytest.raises(RootCertificationError):
        real_roots([1.0, -2.0, 1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6, unique=True).filter(
    lambda r: len(r) < 2 or np.min(np.diff(np.sort(r))) > 1e-2))
def test_real_roots_recovers_planted_roots(planted):
    coeffs = poly_product(planted, [1.0])
    got = real_roots(coeffs)
    assert got.count == len(planted)
    np.testing.assert_allclose(got.roots, np.sort(planted), atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**31))
def test_root_invariants_on_random_polynomials(n, seed):
    coeffs = np.random.default_rng(seed).standard_normal(n + 1)
    if abs(coeffs[-1]) <= 0.01:
        coeffs[-1] = 0.5
    try:
        rs = real_roots(coeffs)
    except RootCertificationError:
        return  # reported explicitly, never a wrong count
    r = np.array(rs.roots)
    assert np.all(np.diff(r) > 0)
    scale = 1.0 + np.polynomial.polynomial.polyval(np.abs(r), np.abs(coeffs))
    assert np.all(np.abs(np.polynomial.polynomial.polyval(r, coeffs)) <= 1e-10 * scale)
    assert (rs.count - n) % 2 == 0


def test_count_matches_discriminant():
    c = CoefficientModel.gaussian(2).sample_coefficients(stream(99), 100_000)
    disc = c[:, 1] ** 2 - 4 * c[:, 0] * c[:, 2]
    keep = np.abs(disc) >= 1e-10
    _, totals, status = root_counts(c[keep], [-np.inf], [np.inf])
    assert np.all(status == 0)
    assert np.array_equal(totals == 2, disc[keep] > 0)


@pytest.mark.parametrize("model", sorted(MODELS))
def test_discard_rate_small(model):
    for n in (2, 5, 8):
        est = empirical_prob_all_real(MODELS[model](n), MonteCarloSpec(samples=200_000, seed=n))
        assert est.meta["discard_rate"] < 1e-4


def test_box_family_validation():
    with pytest.raises(ValueError):
        BoxFamily(((0.0, 1.0), (0.5, 2.0)))
    with pytest.raises(ValueError):
        BoxFamily(((1.0, 0.0),))
    with pytest.raises(ValueError):
        BoxFamily(((0.0, math.inf),))
    assert BoxFamily(((0.0, 1.0), (1.0, 2.0))).k == 2


def test_empirical_intensity_examples():
    spec = MonteCarloSpec(samples=400_000, seed=1)
    (e,) = empirical_intensity(CoefficientModel.gaussian(1), [-0.5, 0.5], spec)
    assert abs(e.value - cauchy_mass(-0.5, 0.5)) <= 3 * e.error
    assert cauchy_mass(-0.5, 0.5) == pytest.approx(0.295167, abs=1e-6)
    (z,) = empirical_intensity(CoefficientModel.exponential(1), [0.1, 1.0], spec)
    assert z.value == 0.0


def test_bins_are_additive():
    # half-open bins: counts over adjacent bins add up to the count over their union
    spec = MonteCarloSpec(samples=50_000, seed=2)
    model = CoefficientModel.uniform(4)
    parts = empirical_intensity(model, [-1.0, -0.25, 0.5, 2.0], spec)
    (whole,) = empirical_intensity(model, [-1.0, 2.0], spec)
    assert sum(p.value for p in parts) == pytest.approx(whole.value, rel=1e-12)


def test_empirical_correlation_examples():
    spec = MonteCarloSpec(samples=50_000, seed=3)
    for make in MODELS.values():
        e = empirical_correlation(make(1), BoxFamily(((-2.0, -0.1), (0.1, 2.0))), spec)
        assert e.value == 0.0


def test_monotone_boxes():
    # same seed means paired samples, so nested boxes give nested counts
    spec = MonteCarloSpec(samples=100_000, seed=4)
    model = CoefficientModel.gaussian(4)
    small = empirical_correlation(model, BoxFamily(((-1.0, -0.5), (0.2, 0.8))), spec)
    large = empirical_correlation(model, BoxFamily(((-1.5, -0.2), (0.1, 1.6))), spec)
    assert large.value >= small.value


def test_prob_all_real_oracles():
    spec = MonteCarloSpec(samples=200_000, seed=5)
    for make in MODELS.values():
        assert empirical_prob_all_real(make(1), spec).value == 1.0
    a = empirical_prob_all_real(CoefficientModel.gaussian(2), spec)
    b = discriminant_prob_all_real(CoefficientModel.gaussian(2), spec)
    assert abs(a.value - b.value) <= 1e-4  # same samples, only near-degenerate ones can differ
    with pytest.raises(ValueError):
        discriminant_prob_all_real(CoefficientModel.gaussian(3), spec)


def test_oracle_reproducible_across_workers():
    model = CoefficientModel.uniform(5)
    edges = np.linspace(-2, 2, 9)
    a = empirical_intensity(model, edges, MonteCarloSpec(samples=60_000, seed=8, batch=4096, workers=1))
    b = empirical_intensity(model, edges, MonteCarloSpec(samples=60_000, seed=8, batch=4096, workers=3))
    assert [x.value for x in a] == [x.value for x in b]
    assert [x.error for x in a] == [x.error for x in b]
