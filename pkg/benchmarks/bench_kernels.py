"""Compare the numba kernels with the pure numpy/Python fallback.

Each backend runs in its own interpreter because the JIT switch is read at
import time.  Usage::

    python3 benchmarks/bench_kernels.py [--samples N] [--repeat R]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _workloads(samples: int, repeat: int) -> dict:
    import numpy as np

    from zerocorr import CoefficientModel, CorrelationQuery, MonteCarloSpec, empirical_intensity, rho_k_montecarlo
    from zerocorr._accel import backend

    model = CoefficientModel.gaussian(5)
    edges = np.linspace(-2.0, 2.0, 21)
    spec = MonteCarloSpec(samples=samples, seed=1)
    # warm-up compiles (or loads cached) kernels outside the timed region
    warm = MonteCarloSpec(samples=256, seed=0)
    empirical_intensity(model, edges, warm)
    rho_k_montecarlo(CorrelationQuery(model, (-0.5, 0.7), "theorem1", mc=warm))

    out = {"backend": backend()}
    for name, call in (
        ("root_isolation", lambda: empirical_intensity(model, edges, spec)[10].value),
        ("theorem1_k2", lambda: rho_k_montecarlo(CorrelationQuery(model, (-0.5, 0.7), "theorem1", mc=spec)).value),
    ):
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            value = call()
            best = min(best, time.perf_counter() - t0)
        out[name] = {"seconds": best, "value": value}
    return out


def _child(disable_jit: bool, samples: int, repeat: int) -> dict:
    env = dict(os.environ)
    env["ZEROCORR_DISABLE_JIT"] = "1" if disable_jit else "0"
    cmd = [sys.executable, __file__, "--child", "--samples", str(samples), "--repeat", str(repeat)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)

    if args.child:
        print(json.dumps(_workloads(args.samples, args.repeat)))
        return 0

    jit = _child(False, args.samples, args.repeat)
    plain = _child(True, args.samples, args.repeat)
    print(f"samples={args.samples} repeat={args.repeat} (best of)")
    print(f"{'workload':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}  same value")
    for name in ("root_isolation", "theorem1_k2"):
        a, b = jit[name], plain[name]
        same = abs(a["value"] - b["value"]) <= 1e-12 * max(1.0, abs(a["value"]))
        print(f"{name:<16}{a['seconds']:>12.3f}{b['seconds']:>12.3f}{b['seconds'] / a['seconds']:>10.1f}  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
