"""Monte Carlo of the limiting likelihood-ratio process of a change point.

The limiting log-likelihood in the local change parameter ``u`` is
``B(u) - |u|/2`` (at unit jump), with ``B`` a two-sided Brownian motion.
Paths are simulated on a symmetric grid ``[-T, T]``; the limiting MLE is the
grid argmax and the generalized Bayes estimate is the posterior mean under a
flat prior.  Results for a jump ``delta`` are the unit-jump results divided
by ``delta**2``, which is exact.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import RngStream, batch_means, ratio_batch_means

DEFAULT_STEP = 0.01
DEFAULT_TRUNCATION = 200.0
BLOCK = 32


@dataclass(frozen=True)
class GridSpec:
    step: float = DEFAULT_STEP
    truncation: float = DEFAULT_TRUNCATION

    def __post_init__(self):
        if not (self.step > 0 and self.truncation > 0):
            raise ValueError("grid step and truncation must be positive")
        m = self.truncation / self.step
        if abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise ValueError(
                f"truncation {self.truncation} is not a multiple of step {self.step}"
            )

    @property
    def half_points(self) -> int:
        return int(round(self.truncation / self.step))

    @property
    def points(self) -> int:
        return 2 * self.half_points + 1

    def nodes(self) -> np.ndarray:
        m = self.half_points
        return np.arange(-m, m + 1) * self.step


@dataclass(frozen=True)
class BrownianPath:
    grid: GridSpec
    values: np.ndarray

    def at(self, u: float) -> float:
        j = int(round(u / self.grid.step)) + self.grid.half_points
        return float(self.values[j])


@dataclass(frozen=True)
class LimitDrawResult:
    u_mle: float
    u_bayes: float
    delta: float


@dataclass(frozen=True)
class LimitGaussPart:
    i1: float
    i2: float
    z1: float
    z2: float
    h1_hat: float
    h2_hat: float


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float

    def as_dict(self) -> dict:
        return {"value": self.value, "se": self.se}


@dataclass(frozen=True)
class LimitConstants:
    delta: float
    grid: GridSpec
    reps: int
    seed: int
    e_umle2: Estimate
    e_ub2: Estimate
    kappa0_hat: Estimate
    mean_umle: Estimate
    mean_ub: Estimate
    tail_fraction: float


def _path_values(grid: GridSpec, xi: np.ndarray) -> np.ndarray:
    """Two-sided path from ``2m`` standard normals per row.

    The first ``m`` drive the branch ``u > 0``, the next ``m`` the branch
    ``u < 0``.
    """
    m = grid.half_points
    inc = math.sqrt(grid.step) * xi
    pos = np.cumsum(inc[..., :m], axis=-1)
    neg = np.cumsum(inc[..., m:], axis=-1)
    zero = np.zeros(xi.shape[:-1] + (1,))
    return np.concatenate([neg[..., ::-1], zero, pos], axis=-1)


def sample_brownian_path(grid: GridSpec, rng: RngStream) -> BrownianPath:
    xi = rng.generator().standard_normal(2 * grid.half_points)
    return BrownianPath(grid=grid, values=_path_values(grid, xi))


def _tie_order(m: int) -> np.ndarray:
    # column order 0, -1, +1, -2, +2, ...: first maximizer in this order
    # is the one closest to zero, negative side first
    order = np.empty(2 * m + 1, dtype=np.intp)
    order[0] = m
    order[1::2] = m - np.arange(1, m + 1)
    order[2::2] = m + np.arange(1, m + 1)
    return order


def unit_jump_estimates(grid: GridSpec, values: np.ndarray):
    """Grid argmax and posterior mean of ``u`` at unit jump, row-wise."""
    u = grid.nodes()
    g = np.atleast_2d(values - 0.5 * np.abs(u))
    idx = np.argmax(g, axis=-1)
    gmax = g[np.arange(len(g)), idx][:, None]
    tied = np.flatnonzero(np.count_nonzero(g == gmax, axis=-1) > 1)
    if len(tied):
        order = _tie_order(grid.half_points)
        idx[tied] = order[np.argmax(g[tied][:, order], axis=-1)]
    u_mle = u[idx]
    w = np.exp(g - gmax)
    u_b = np.sum(w * u, axis=-1) / np.sum(w, axis=-1)
    if np.ndim(values) == 1:
        return u_mle[0], u_b[0]
    return u_mle, u_b


def limit_estimates_from_path(path: BrownianPath, delta: float) -> LimitDrawResult:
    """Limiting MLE and Bayes estimates of ``u`` for a given path.

    The Bayes integral is a uniform-weight grid sum, which coincides with the
    trapezoid rule because the integrand is negligible at ``+-T``.
    """
    if path.grid.points < 3:
        raise ValueError("grid needs at least 3 points")
    if not delta > 0:
        raise ValueError("delta must be positive")
    u_mle, u_b = unit_jump_estimates(path.grid, path.values)
    scale = delta**2
    return LimitDrawResult(u_mle=float(u_mle) / scale, u_bayes=float(u_b) / scale, delta=delta)


def draw_limit_estimates(delta: float, grid: GridSpec, rng: RngStream) -> LimitDrawResult:
    return limit_estimates_from_path(sample_brownian_path(grid, rng), delta)


def draw_limit_gauss_part(i1: float, i2: float, rng: RngStream) -> LimitGaussPart:
    """Gaussian part of the limiting log-likelihood and its maximizers.

    The quadratic ``Z^2/2 - I^2 (h - Z/I)^2 / 2`` peaks at ``h = Z/I``, which is
    also its posterior mean under a flat prior.
    """
    if not (i1 > 0 and i2 > 0):
        raise ValueError("i1 and i2 must be positive")
    z1, z2 = rng.generator().standard_normal(2)
    return LimitGaussPart(i1, i2, float(z1), float(z2), float(z1 / i1), float(z2 / i2))


def _simulate_block(args):
    grid, seed, start, stop = args
    xi = np.empty((stop - start, 2 * grid.half_points))
    for row, r in enumerate(range(start, stop)):
        RngStream(seed, r).generator().standard_normal(out=xi[row])
    return unit_jump_estimates(grid, _path_values(grid, xi))


def simulate_unit_jump(grid: GridSpec, reps: int, seed: int, workers: int = 1):
    """Unit-jump ``(u_mle, u_bayes)`` for replications ``0..reps-1``.

    Replication ``r`` uses stream ``(seed, r)``; blocks of replications are
    fixed independently of ``workers``, so outputs are identical for any
    worker count.
    """
    tasks = [(grid, seed, s, min(s + BLOCK, reps)) for s in range(0, reps, BLOCK)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_simulate_block, tasks))
    else:
        parts = [_simulate_block(t) for t in tasks]
    u_mle = np.concatenate([p[0] for p in parts])
    u_b = np.concatenate([p[1] for p in parts])
    return u_mle, u_b


def estimate_limit_constants(
    delta: float = 1.0,
    grid: GridSpec = GridSpec(),
    reps: int = 200_000,
    seed: int = 0,
    workers: int = 1,
    batches: int = 100,
) -> LimitConstants:
    """Paired Monte Carlo estimates of ``E u_mle^2``, ``E u_b^2`` and their ratio."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    if not delta > 0:
        raise ValueError("delta must be positive")
    u_mle, u_b = simulate_unit_jump(grid, reps, seed, workers)
    scale = delta**2
    u_mle = u_mle / scale
    u_b = u_b / scale
    m2 = u_mle**2
    b2 = u_b**2
    kappa, kappa_se = ratio_batch_means(b2, m2, batches)
    return LimitConstants(
        delta=delta,
        grid=grid,
        reps=reps,
        seed=seed,
        e_umle2=Estimate(*batch_means(m2, batches)),
        e_ub2=Estimate(*batch_means(b2, batches)),
        kappa0_hat=Estimate(kappa, kappa_se),
        mean_umle=Estimate(*batch_means(u_mle, batches)),
        mean_ub=Estimate(*batch_means(u_b, batches)),
        tail_fraction=float(np.mean(np.abs(u_mle * scale) > grid.truncation / 2)),
    )
