"""Command-line front end: ``zerocorr --task rho --degree 3 --grid -2:2:0.5``.

Exit status is 0 on success, 1 for an invalid configuration and 2 when
some result did not converge (or a verification check failed); results
are written in every case except 1.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Sequence

import numpy as np

from . import __version__
from ._accel import backend
from .correlation import (
    CorrelationQuery,
    prob_all_real,
    rho,
    rho1_bin_integrals,
    rho_k_montecarlo,
    rho_k_quadrature,
    rho_n_closed_form,
)
from .models import CoefficientModel, Exponential, Gaussian, Uniform, stream
from .montecarlo import MonteCarloSpec
from .oracle import empirical_intensity, empirical_prob_all_real
from .polycore import PointConfig, check_separation, eta_schur, eta_vandermonde
from .quadrature import QuadratureSpec

TASKS = ("rho", "prob-all-real", "verify", "intensity-profile")
FORMATS = ("csv", "json")
SUITES = ("closed-forms", "cross-method", "eta", "oracle")
METHODS = ("auto", "theorem2", "theorem1", "closed-form", "oracle")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration

# INI section for every RunConfig field
_SECTIONS = {
    "task": "run", "method": "run", "format": "run", "out": "run", "workers": "run", "suite": "run",
    "cases": "run",
    "degree": "model", "model": "model",
    "points": "points", "grid": "points", "k": "points",
    "rel_tol": "quadrature", "abs_tol": "quadrature", "max_evals": "quadrature",
    "transform": "quadrature", "strategy": "quadrature",
    "samples": "montecarlo", "seed": "montecarlo", "batch": "montecarlo",
}


@dataclass(frozen=True)
class RunConfig:
    task: str = "rho"
    degree: int = 1
    model: str = "gaussian"
    points: str = ""
    grid: str = ""
    k: int = 1
    method: str = "auto"
    samples: int = 1_000_000
    seed: int = 0
    batch: int = 1 << 16
    workers: int = 1
    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    max_evals: int = 100_000_000
    transform: str = "algebraic"
    strategy: str = "auto"
    suite: str = "closed-forms"
    cases: int = 10
    format: str = "csv"
    out: str = ""

    # -- parsing -----------------------------------------------------------

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        values = {}
        known = {f.name: f for f in fields(cls)}
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = key.replace("-", "_")
                if name not in known or _SECTIONS[name] != section:
                    raise ConfigError(f"unknown key [{section}] {key}")
                values[name] = raw
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict) -> "RunConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for name, raw in values.items():
            kind = kinds[name]
            try:
                if kind == "int":
                    out[name] = int(raw)
                elif kind == "float":
                    out[name] = float(raw)
                else:
                    out[name] = str(raw).strip()
            except ValueError:
                raise ConfigError(f"{name}: cannot parse {raw!r}") from None
        return cls(**out)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for name, value in asdict(self).items():
            section = _SECTIONS[name]
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, name, repr(value) if isinstance(value, float) else str(value))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    # -- validation and derived objects -------------------------------------

    def validate(self) -> "RunConfig":
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.suite not in SUITES:
            raise ConfigError(f"suite must be one of {SUITES}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.degree < 1:
            raise ConfigError("degree must be at least 1")
        if not 1 <= self.k <= self.degree:
            raise ConfigError(f"need 1 <= k <= degree, got k={self.k}")
        for name in ("samples", "batch", "workers", "max_evals", "cases"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        try:
            self.coefficient_model()
            self.quad_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.task == "rho":
            pts = self.point_list()
            if not pts:
                raise ConfigError("task rho needs --points or --grid")
        if self.task == "intensity-profile":
            self.bin_edges()
        return self

    def coefficient_model(self) -> CoefficientModel:
        return parse_model(self.model, self.degree)

    def quad_spec(self) -> QuadratureSpec:
        return QuadratureSpec(rel_tol=self.rel_tol, abs_tol=self.abs_tol, max_evals=self.max_evals,
                              transform=self.transform, strategy=self.strategy, seed=self.seed)

    def mc_spec(self, workers: int | None = None) -> MonteCarloSpec:
        return MonteCarloSpec(samples=self.samples, seed=self.seed, batch=self.batch,
                              workers=self.workers if workers is None else workers)

    def grid_values(self) -> list[float]:
        lo, hi, step = parse_grid(self.grid)
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [lo + i * step for i in range(count)]

    def point_list(self) -> list[PointConfig]:
        if self.points and self.grid:
            raise ConfigError("give either points or grid, not both")
        if self.points:
            configs = []
            for chunk in self.points.split(";"):
                try:
                    xs = tuple(float(v) for v in chunk.split(","))
                except ValueError:
                    raise ConfigError(f"bad point list {chunk!r}") from None
                if len(xs) != self.k:
                    raise ConfigError(f"point {chunk!r} has {len(xs)} coordinates, expected k={self.k}")
                configs.append(xs)
        elif self.grid:
            axis = self.grid_values()
            configs = [c for c in itertools.product(axis, repeat=self.k) if list(c) == sorted(set(c))]
        else:
            return []
        out = []
        for c in configs:
            try:
                check_separation(c)
            except ValueError as exc:
                raise ConfigError(f"points {c}: {exc}") from None
            out.append(PointConfig(c))
        return out

    def bin_edges(self) -> np.ndarray:
        if not self.grid:
            raise ConfigError("intensity-profile needs --grid lo:hi:step for the bin edges")
        edges = np.array(self.grid_values())
        if edges.size < 2:
            raise ConfigError("grid gives fewer than two bin edges")
        return edges


_TOKEN = re.compile(r"^\s*(gaussian|uniform|exponential)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_model(text: str, degree: int) -> CoefficientModel:
    """``gaussian``, ``uniform``, ``exponential`` or ``gaussian(2.5)``; a comma list gives one family per index."""
    tokens = [t for t in re.split(r",(?![^(]*\))", text) if t.strip()]
    if not tokens:
        raise ConfigError("empty model description")
    fams = []
    for tok in tokens:
        m = _TOKEN.match(tok)
        if not m:
            raise ConfigError(f"unknown family {tok.strip()!r}")
        name, arg = m.groups()
        if name == "gaussian":
            try:
                fams.append(Gaussian(float(arg)) if arg else Gaussian())
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        elif arg:
            raise ConfigError(f"{name} takes no parameter")
        else:
            fams.append(Uniform() if name == "uniform" else Exponential())
    if len(fams) == 1:
        fams = fams * (degree + 1)
    if len(fams) != degree + 1:
        raise ConfigError(f"model lists {len(fams)} families, degree {degree} needs {degree + 1}")
    return CoefficientModel(tuple(fams))


def parse_grid(text: str) -> tuple[float, float, float]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"grid must be lo:hi:step, got {text!r}") from None
    if not (step > 0 and hi >= lo and all(map(math.isfinite, (lo, hi, step)))):
        raise ConfigError(f"bad grid {text!r}")
    return lo, hi, step


# ---------------------------------------------------------------------------
# tasks; each returns (header, rows, ok)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def task_rho(cfg: RunConfig):
    model = cfg.coefficient_model()
    pts = cfg.point_list()
    method = "auto" if cfg.method == "oracle" else cfg.method
    # parallelize over points when there are several, else inside Monte Carlo
    outer = cfg.workers if len(pts) > 1 else 1
    mc = cfg.mc_spec(1 if outer > 1 else cfg.workers)

    def one(x):
        return rho(CorrelationQuery(model, x, method, cfg.quad_spec(), mc))

    with ThreadPoolExecutor(max_workers=outer) as pool:
        results = list(pool.map(one, pts))
    header = [f"x_{i + 1}" for i in range(cfg.k)] + ["rho", "error", "method", "evals", "converged"]
    rows = []
    for x, est in zip(pts, results):
        if est.meta.get("tail_warning"):
            _warn(f"heavy-tailed Monte Carlo integrand at x={x.points}: batch means disagree beyond 5 sigma")
        rows.append(list(x.points) + [est.value, est.error, est.meta.get("method", method), est.evals, est.converged])
    return header, rows, all(r[-1] for r in rows)


def task_prob_all_real(cfg: RunConfig):
    model = cfg.coefficient_model()
    if cfg.method in ("oracle", "theorem1"):
        est = empirical_prob_all_real(model, cfg.mc_spec())
        method = "oracle"
    else:
        outer = cfg.quad_spec().with_(transform="tangent")
        est = prob_all_real(model, outer_spec=outer)
        method = "quadrature"
    header = ["n", "prob_all_real", "error", "method", "evals", "converged"]
    return header, [[cfg.degree, est.value, est.error, method, est.evals, est.converged]], est.converged


def task_intensity_profile(cfg: RunConfig):
    model = cfg.coefficient_model()
    edges = cfg.bin_edges()
    method = "theorem1" if cfg.method == "theorem1" else "theorem2"
    rel_tol = max(cfg.rel_tol, 1e-10)
    # pointwise values need to be tighter than the bin integrals built from them
    theory = rho1_bin_integrals(model, edges, rel_tol=rel_tol, method=method,
                                quad=cfg.quad_spec().with_(rel_tol=0.1 * rel_tol), mc=cfg.mc_spec())
    empirical = empirical_intensity(model, edges, cfg.mc_spec())
    header = ["lo", "hi", "rho1_integral", "error", "empirical", "empirical_error", "z", "converged"]
    rows = []
    for lo, hi, th, em in zip(edges[:-1], edges[1:], theory, empirical):
        comb = math.hypot(th.error, em.error)
        z = (th.value - em.value) / comb if 0 < comb < math.inf else (0.0 if comb == 0 else math.nan)
        rows.append([float(lo), float(hi), th.value, th.error, em.value, em.error, z, th.converged])
    return header, rows, all(t.converged for t in theory)


def _random_points(rng, k: int, lo: float, hi: float) -> tuple[float, ...]:
    while True:
        x = np.sort(rng.uniform(lo, hi, k))
        if k == 1 or np.min(np.diff(x)) >= 0.05:
            return tuple(float(v) for v in x)


def task_verify(cfg: RunConfig):
    model = cfg.coefficient_model()
    rng = stream(cfg.seed, 1 << 20)
    n = cfg.degree
    header = ["suite", "case", "value", "reference", "tolerance", "passed"]
    rows = []
    hi = 0.0 if model.root_range()[1] == 0.0 else 2.0
    if cfg.suite == "closed-forms":
        if model.kind is None:
            raise ConfigError("closed-forms suite needs a single built-in family")
        tol = 1e-4 if model.kind == "uniform" else 1e-6
        for case in range(cfg.cases):
            x = PointConfig(_random_points(rng, n, -2.0, hi - 1e-3 if hi == 0.0 else hi))
            ref = float(rho_n_closed_form(model, x))
            est = rho_k_quadrature(CorrelationQuery(model, x, "theorem2", QuadratureSpec(rel_tol=1e-9)))
            ok = abs(est.value - ref) <= tol * abs(ref) + 1e-300
            rows.append([cfg.suite, case, est.value, ref, tol * abs(ref), ok])
    elif cfg.suite == "cross-method":
        for case in range(cfg.cases):
            x = PointConfig(_random_points(rng, cfg.k, -2.0, hi - 1e-3 if hi == 0.0 else hi))
            q2 = rho_k_quadrature(CorrelationQuery(model, x, "theorem2", cfg.quad_spec().with_(rel_tol=1e-5, max_evals=20_000_000)))
            q1 = rho_k_montecarlo(CorrelationQuery(model, x, "theorem1", mc=cfg.mc_spec()))
            tol = 3.0 * math.hypot(q1.error, q2.error)
            rows.append([cfg.suite, case, q1.value, q2.value, tol, abs(q1.value - q2.value) <= tol])
    elif cfg.suite == "eta":
        for case in range(cfg.cases):
            x = _random_points(rng, cfg.k, -2.0, 2.0)
            tail = rng.standard_normal(n - cfg.k + 1)
            a = eta_schur(x, tail, n)
            b = eta_vandermonde(x, tail, n)
            dev = float(np.max(np.abs(a - b)))
            tol = 1e-9 * max(float(np.max(np.abs(b))), 1e-300)
            rows.append([cfg.suite, case, dev, 0.0, tol, dev <= tol])
    else:  # oracle
        if n > 3:
            raise ConfigError("oracle suite covers degree <= 3")
        est = prob_all_real(model)
        emp = empirical_prob_all_real(model, cfg.mc_spec())
        tol = 3.0 * math.hypot(est.error, emp.error)
        rows.append([cfg.suite, 0, est.value, emp.value, tol, abs(est.value - emp.value) <= tol])
    passed = sum(bool(r[-1]) for r in rows)
    print(f"verify {cfg.suite}: {passed}/{len(rows)} passed", file=sys.stderr)
    return header, rows, passed == len(rows)


TASK_FUNCS = {
    "rho": task_rho,
    "prob-all-real": task_prob_all_real,
    "intensity-profile": task_intensity_profile,
    "verify": task_verify,
}


# ---------------------------------------------------------------------------
# output


def render(cfg: RunConfig, header, rows) -> str:
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()
    meta = {
        "tool": "zerocorr",
        "version": __version__,
        "task": cfg.task,
        "model": cfg.coefficient_model().describe(),
        "degree": cfg.degree,
        "config": asdict(cfg),
        "backend": backend(),
    }
    records = []
    for r in rows:
        rec = {}
        for h, v in zip(header, r):
            if isinstance(v, (np.floating, np.integer)):
                v = v.item()
            if isinstance(v, float) and not math.isfinite(v):
                v = str(v)
            rec[h] = v
        records.append(rec)
    return json.dumps({"metadata": meta, "rows": records}, indent=2, sort_keys=False) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are configuration errors (exit 1), not argparse's 2
        raise ConfigError(message)


# flags whose values may start with '-' (negative coordinates)
_SIGNED = ("--points", "--grid")


def _glue_signed(argv: Sequence[str]) -> list[str]:
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _SIGNED:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zerocorr", description="Correlation functions of real zeros of random polynomials.")
    p.add_argument("--config", help="INI file with [run], [model], [points], [quadrature], [montecarlo] sections")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--degree", type=int, help="polynomial degree n")
    p.add_argument("--model", help="family for every coefficient, or a comma list per index, e.g. gaussian(2)")
    p.add_argument("--points", help="point configurations: '0.1,0.5;0.2,0.7' (k coordinates each)")
    p.add_argument("--grid", help="lo:hi:step; for intensity-profile these are bin edges")
    p.add_argument("--k", type=int, help="number of points per configuration")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--samples", type=int)
    p.add_argument("--rel-tol", type=float, dest="rel_tol")
    p.add_argument("--max-evals", type=int, dest="max_evals", help="integrand evaluation budget per quadrature")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--suite", choices=SUITES, help="verification suite for --task verify")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    return p


def resolve(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = RunConfig.from_ini(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    overrides = {}
    for name in ("task", "degree", "model", "points", "grid", "k", "method", "samples",
                 "rel_tol", "max_evals", "seed", "workers", "suite", "format", "out"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    return replace(cfg, **overrides).validate()


def main(argv: Sequence[str] | None = None) -> int:
    argv = _glue_signed(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.dump_config:
        sys.stdout.write(cfg.to_ini())
        return 0
    try:
        header, rows, ok = TASK_FUNCS[cfg.task](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = render(cfg, header, rows)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not ok:
        print("error: some results did not converge or failed verification", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
