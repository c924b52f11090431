import json
import os
import subprocess
import sys

import numpy as np
import pytest

from zerocorr import CoefficientModel, CorrelationQuery, MonteCarloSpec, empirical_intensity, rho_k_montecarlo, stream
from zerocorr import kernels
from zerocorr._accel import USE_NUMBA
from zerocorr.correlation import _theorem1_maps

needs_numba = pytest.mark.skipif(not USE_NUMBA, reason="numba disabled")


@needs_numba
def test_isolate_roots_compiled_matches_python():
    rng = np.random.default_rng(0)
    for _ in range(200):
        c = rng.standard_normal(int(rng.integers(2, 9)))
        deg = c.size - 1
        out = []
        for fn in (kernels.isolate_roots, kernels.isolate_roots.py_func):
            roots = np.empty(deg)
            found, status = fn(c, roots, *kernels.make_workspace(deg))
            out.append((found, status, roots[:found].copy()))
        assert out[0][:2] == out[1][:2]
        np.testing.assert_allclose(out[0][2], out[1][2], rtol=1e-13, atol=1e-15)


@needs_numba
def test_theorem1_kernel_matches_python_and_numpy():
    model = CoefficientModel.gaussian(4, [1.0, 0.7, 1.3, 2.0, 0.5])
    x = np.array([-0.4, 0.9])
    eta_map, deriv_map = _theorem1_maps(x, model.n)
    xi = np.ascontiguousarray(model.sample_coefficients(stream(3), 5000, start=2))
    codes, params = model.codes[:2], model.params[:2]
    a = kernels.theorem1_moments(xi, eta_map, deriv_map, codes, params)
    b = kernels.theorem1_moments.py_func(xi, eta_map, deriv_map, codes, params)
    c = kernels.theorem1_moments_numpy(xi, eta_map, deriv_map, [f.pdf for f in model.families[:2]])
    np.testing.assert_allclose(a, b, rtol=1e-12)
    np.testing.assert_allclose(a, c, rtol=1e-10)


_CHILD = """
import json, numpy as np
from zerocorr import CoefficientModel, CorrelationQuery, MonteCarloSpec, empirical_intensity, rho_k_montecarlo
from zerocorr._accel import backend
spec = MonteCarloSpec(samples=20000, seed=6, batch=4096)
m = CoefficientModel.uniform(3)
counts = [e.value for e in empirical_intensity(m, np.linspace(-2, 2, 5), spec)]
r = rho_k_montecarlo(CorrelationQuery(m, (0.3, -0.6), "theorem1", mc=spec))
print(json.dumps({"backend": backend(), "counts": counts, "rho": r.value, "err": r.error}))
"""


def test_fallback_backend_agrees():
    env = dict(os.environ, ZEROCORR_DISABLE_JIT="1")
    res = subprocess.run([sys.executable, "-c", _CHILD], env=env, capture_output=True, text=True, check=True, timeout=600)
    plain = json.loads(res.stdout.strip().splitlines()[-1])
    assert plain["backend"] == "numpy"

    spec = MonteCarloSpec(samples=20000, seed=6, batch=4096)
    m = CoefficientModel.uniform(3)
    counts = [e.value for e in empirical_intensity(m, np.linspace(-2, 2, 5), spec)]
    r = rho_k_montecarlo(CorrelationQuery(m, (0.3, -0.6), "theorem1", mc=spec))
    assert counts == plain["counts"]  # integer counts: identical
    assert r.value == pytest.approx(plain["rho"], rel=1e-12)
    assert r.error == pytest.approx(plain["err"], rel=1e-9)
