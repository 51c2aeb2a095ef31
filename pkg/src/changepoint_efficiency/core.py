"""Shared domain types, smooth functionals and the seeded random streams.

Every random quantity in the package is drawn from an :class:`RngStream`,
a Philox counter-based generator keyed by ``(seed, stream_id)``.  Work items
(replications, paths) each own a stream, so results never depend on the
order in which workers pick them up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

GH_NODES = 32

_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the one-change Gaussian mean model.

    ``x_i = theta * 1(i <= tau) + eps * xi_i`` for ``i = 1..n``.
    ``eps = 0`` is accepted for noiseless generation; estimators need ``eps > 0``.
    """

    theta: float
    tau: int
    eps: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 1 <= self.tau <= self.n:
            raise ValueError(f"tau must lie in 1..{self.n}, got {self.tau}")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be a finite non-negative number, got {self.eps}")
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta}")

    def snr(self) -> float:
        return self.theta / self.eps

    def signal(self) -> np.ndarray:
        idx = np.arange(1, self.n + 1)
        return np.where(idx <= self.tau, float(self.theta), 0.0)


@dataclass(frozen=True)
class SequenceSample:
    x: np.ndarray
    params: ModelParams
    seed: int = 0
    replication_index: int = 0

    def __post_init__(self):
        if len(self.x) != self.params.n:
            raise ValueError(f"expected {self.params.n} observations, got {len(self.x)}")

    def noise(self) -> np.ndarray:
        """Standardized noise ``xi_i`` implied by the observations."""
        return (self.x - self.params.signal()) / self.params.eps


@dataclass(frozen=True)
class RngStream:
    """Key of an independent, reproducible random stream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v <= _UINT64_MAX:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def gaussian_draws(rng: RngStream, count: int) -> np.ndarray:
    """``count`` standard normal variates from the start of ``rng``'s stream."""
    if count < 0:
        raise ValueError("count must be non-negative")
    return rng.generator().standard_normal(count)


def gauss_hermite_rule(nodes: int = GH_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for expectations under N(0, 1); weights sum to one."""
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    return x, w / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Functional:
    """A smooth function ``L(theta, tau)`` of the model parameters.

    ``evaluate`` must accept numpy arrays and broadcast.  ``gaussian_mean``,
    when given, returns ``E L(Theta, tau)`` for ``Theta ~ N(m, s2)`` in closed
    form; otherwise :meth:`expect` falls back to Gauss-Hermite quadrature.
    """

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gaussian_mean: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    nodes: int = GH_NODES
    _rule: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_rule", gauss_hermite_rule(self.nodes))

    def __call__(self, theta, tau):
        return self.evaluate(theta, tau)

    @property
    def has_exact_mean(self) -> bool:
        return self.gaussian_mean is not None

    def quadrature_mean(self, m, s2, tau):
        """Gauss-Hermite approximation of ``E L(Theta, tau)``, ``Theta ~ N(m, s2)``."""
        x, w = self._rule
        m = np.asarray(m, dtype=float)
        s = np.sqrt(np.asarray(s2, dtype=float))
        tau = np.asarray(tau)
        theta = m[..., None] + s[..., None] * x
        vals = self.evaluate(theta, tau[..., None])
        return np.sum(vals * w, axis=-1)

    def expect(self, m, s2, tau):
        if self.gaussian_mean is not None:
            return self.gaussian_mean(m, s2, tau)
        return self.quadrature_mean(m, s2, tau)


def _theta_tau(theta, tau):
    return theta * tau


THETA_TAU = Functional(
    name="theta_tau",
    evaluate=_theta_tau,
    gaussian_mean=lambda m, s2, tau: np.asarray(m) * tau,
)
THETA = Functional(
    name="theta",
    evaluate=lambda theta, tau: theta + 0.0 * tau,
    gaussian_mean=lambda m, s2, tau: np.asarray(m) + 0.0 * np.asarray(tau),
)
TAU = Functional(
    name="tau",
    evaluate=lambda theta, tau: 0.0 * theta + tau,
    gaussian_mean=lambda m, s2, tau: 0.0 * np.asarray(m) + tau,
)
THETA_SQUARED_TAU = Functional(
    name="theta_squared_tau",
    evaluate=lambda theta, tau: theta**2 * tau,
    gaussian_mean=lambda m, s2, tau: (np.asarray(m) ** 2 + s2) * tau,
)

FUNCTIONALS = {f.name: f for f in (THETA_TAU, THETA, TAU, THETA_SQUARED_TAU)}


def get_functional(name: str) -> Functional:
    try:
        return FUNCTIONALS[name]
    except KeyError:
        raise ValueError(
            f"unknown functional {name!r}; choose from {sorted(FUNCTIONALS)}"
        ) from None


def batch_means(values: np.ndarray, batches: int = 100) -> tuple[float, float]:
    """Mean and batch-means standard error of a replication series.

    Replications are split into ``min(batches, len)`` contiguous batches.  The
    SE is NaN when fewer than two batches are available.
    """
    values = np.asarray(values, dtype=float)
    mean = math.fsum(values) / len(values)
    b = min(batches, len(values))
    if b < 2:
        return mean, math.nan
    bm = np.array([math.fsum(c) / len(c) for c in np.array_split(values, b)])
    return mean, float(np.std(bm, ddof=1) / math.sqrt(b))


def ratio_batch_means(
    num: np.ndarray, den: np.ndarray, batches: int = 100
) -> tuple[float, float]:
    """Ratio of means ``mean(num)/mean(den)`` with a paired batch-means SE.

    The SE is the delta-method one: the batch means of ``num - R*den``
    divided by ``mean(den)``, which exploits the pairing of the two series.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    mn = math.fsum(num) / len(num)
    md = math.fsum(den) / len(den)
    r = safe_ratio(mn, md)
    b = min(batches, len(num))
    if b < 2 or not math.isfinite(r):
        return r, math.nan
    resid = [
        math.fsum(a) / len(a) - r * math.fsum(d) / len(d)
        for a, d in zip(np.array_split(num, b), np.array_split(den, b))
    ]
    return r, float(np.std(resid, ddof=1) / math.sqrt(b) / md)


def safe_ratio(num: float, den: float) -> float:
    """``num/den``, NaN when the denominator vanishes."""
    if den == 0:
        return math.nan
    return num / den
