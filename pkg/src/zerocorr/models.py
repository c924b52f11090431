"""Coefficient distributions ``f_0, ..., f_n`` and reproducible random streams."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

__all__ = [
    "Gaussian",
    "Uniform",
    "Exponential",
    "Custom",
    "CoefficientModel",
    "stream",
]

# family codes shared with the compiled Monte Carlo kernel
GAUSSIAN, UNIFORM, EXPONENTIAL, CUSTOM = 0, 1, 2, 3

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator for substream ``stream_id`` of ``seed``.

    Streams depend only on ``(seed, stream_id)``, so batches can be handed
    to any number of workers without changing the numbers drawn.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Gaussian:
    scale: float = 1.0
    code = GAUSSIAN

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"Gaussian scale must be finite and positive, got {self.scale}")

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def pdf(self, t):
        v = self.scale
        return np.exp(-0.5 * (np.asarray(t, float) / v) ** 2) / (_SQRT_2PI * v)

    @property
    def spread(self) -> float:
        return self.scale

    def cdf(self, t):
        return special.ndtr(np.asarray(t, float) / self.scale)

    def sample(self, rng: np.random.Generator, size=None):
        return self.scale * rng.standard_normal(size)

    def describe(self) -> str:
        return "gaussian" if self.scale == 1.0 else f"gaussian({self.scale!r})"


@dataclass(frozen=True)
class Uniform:
    """Uniform on ``[-1, 1]``."""

    code = UNIFORM

    @property
    def support(self) -> tuple[float, float]:
        return (-1.0, 1.0)

    @property
    def spread(self) -> float:
        return 1.0 / math.sqrt(3.0)

    def pdf(self, t):
        t = np.asarray(t, float)
        return np.where(np.abs(t) <= 1.0, 0.5, 0.0)

    def cdf(self, t):
        return np.clip((np.asarray(t, float) + 1.0) / 2.0, 0.0, 1.0)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(-1.0, 1.0, size)

    def describe(self) -> str:
        return "uniform"


@dataclass(frozen=True)
class Exponential:
    """Rate one on ``[0, inf)``."""

    code = EXPONENTIAL

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    @property
    def spread(self) -> float:
        return 1.0

    def pdf(self, t):
        t = np.asarray(t, float)
        with np.errstate(over="ignore"):
            return np.where(t >= 0.0, np.exp(-np.maximum(t, 0.0)), 0.0)

    def cdf(self, t):
        t = np.asarray(t, float)
        return np.where(t > 0.0, -np.expm1(-np.maximum(t, 0.0)), 0.0)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.standard_exponential(size)

    def describe(self) -> str:
        return "exponential"


@dataclass(frozen=True)
class Custom:
    """User-supplied density.

    ``pdf`` must accept numpy arrays; ``sampler(rng, size)`` draws from it.
    ``support`` is the closed interval outside which ``pdf`` vanishes
    (use infinities for unbounded ends); the integrators clip to it.
    ``spread`` is a rough width (a standard deviation will do) used to
    precondition the quadrature.
    """

    pdf_fn: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, object], np.ndarray]
    support: tuple[float, float] = (-math.inf, math.inf)
    cdf_fn: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"
    spread: float = 1.0
    code = CUSTOM

    def pdf(self, t):
        t = np.asarray(t, float)
        lo, hi = self.support
        inside = (t >= lo) & (t <= hi)
        return np.where(inside, self.pdf_fn(t), 0.0)

    def cdf(self, t):
        if self.cdf_fn is None:
            raise NotImplementedError(f"{self.name} has no cdf")
        return self.cdf_fn(np.asarray(t, float))

    def sample(self, rng: np.random.Generator, size=None):
        return self.sampler(rng, size)

    def describe(self) -> str:
        return self.name


Family = Gaussian | Uniform | Exponential | Custom


@dataclass(frozen=True)
class CoefficientModel:
    """Independent coefficient densities, one per power ``0..n``."""

    families: tuple[Family, ...]

    def __post_init__(self):
        fams = tuple(self.families)
        if len(fams) < 2:
            raise ValueError("need at least two coefficients (degree n >= 1)")
        object.__setattr__(self, "families", fams)

    @classmethod
    def gaussian(cls, n: int, scales: Sequence[float] | float = 1.0) -> "CoefficientModel":
        scales = np.broadcast_to(np.asarray(scales, float), (n + 1,))
        return cls(tuple(Gaussian(float(v)) for v in scales))

    @classmethod
    def uniform(cls, n: int) -> "CoefficientModel":
        return cls((Uniform(),) * (n + 1))

    @classmethod
    def exponential(cls, n: int) -> "CoefficientModel":
        return cls((Exponential(),) * (n + 1))

    @property
    def n(self) -> int:
        return len(self.families) - 1

    def _family(self, i: int) -> Family:
        if not 0 <= i <= self.n:
            raise IndexError(f"coefficient index {i} outside 0..{self.n}")
        return self.families[i]

    def pdf(self, i: int, t):
        return self._family(i).pdf(t)

    def cdf(self, i: int, t):
        return self._family(i).cdf(t)

    def sample(self, i: int, rng: np.random.Generator, size=None):
        return self._family(i).sample(rng, size)

    def sample_coefficients(self, rng: np.random.Generator, size: int, start: int = 0) -> np.ndarray:
        """Draw ``(size, n + 1 - start)`` coefficients ``xi_start..xi_n``."""
        out = np.empty((size, self.n + 1 - start))
        for col, i in enumerate(range(start, self.n + 1)):
            out[:, col] = self.families[i].sample(rng, size)
        return out

    def support(self, i: int) -> tuple[float, float]:
        return self._family(i).support

    @property
    def kind(self) -> str | None:
        """``'gaussian'``, ``'uniform'`` or ``'exponential'`` when every index shares that family."""
        first = type(self.families[0])
        if not all(type(f) is first for f in self.families):
            return None
        return {Gaussian: "gaussian", Uniform: "uniform", Exponential: "exponential"}.get(first)

    @property
    def scales(self) -> np.ndarray:
        return np.array([f.scale for f in self.families])

    @property
    def codes(self) -> np.ndarray:
        return np.array([f.code for f in self.families], dtype=np.int64)

    @property
    def params(self) -> np.ndarray:
        return np.array([getattr(f, "scale", 1.0) for f in self.families])

    @property
    def compilable(self) -> bool:
        return all(f.code != CUSTOM for f in self.families)

    def root_range(self) -> tuple[float, float]:
        """Interval that contains every real root almost surely.

        Descartes' rule: one-signed coefficients admit no positive root,
        alternating signs admit no negative root.
        """
        lows = [f.support[0] for f in self.families]
        highs = [f.support[1] for f in self.families]
        if all(lo >= 0 for lo in lows) or all(hi <= 0 for hi in highs):
            return (-math.inf, 0.0)
        for sign in (1, -1):
            if all(
                (lo >= 0) if sign * (-1) ** i > 0 else (hi <= 0)
                for i, (lo, hi) in enumerate(zip(lows, highs))
            ):
                return (0.0, math.inf)
        return (-math.inf, math.inf)

    def describe(self) -> str:
        names = [f.describe() for f in self.families]
        if len(set(names)) == 1:
            return names[0]
        return ",".join(names)
