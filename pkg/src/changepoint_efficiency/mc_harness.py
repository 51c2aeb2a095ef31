"""Seeded replication studies of MLE vs Bayes risk over (theta, tau) grids."""

from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .core import RngStream, batch_means, get_functional, safe_ratio
from .sequence_model import bayes_from_stats, cumulative_stats, mle_from_stats

PAPER_THETAS = (0.5, 1.0, 1.5, 2.0)
PAPER_TAUS = tuple(range(3, 19))


@dataclass(frozen=True)
class StudyConfig:
    n: int = 20
    eps: float = 1.0
    theta_values: tuple = PAPER_THETAS
    tau_values: tuple = PAPER_TAUS
    reps: int = 10_000
    seed: int = 0
    functional_name: str = "theta_tau"

    def __post_init__(self):
        object.__setattr__(self, "theta_values", tuple(float(t) for t in self.theta_values))
        object.__setattr__(self, "tau_values", tuple(int(t) for t in self.tau_values))
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        bad = [t for t in self.tau_values if not 1 <= t <= self.n]
        if bad:
            raise ValueError(f"tau values outside 1..{self.n}: {bad}")
        if not self.theta_values or not self.tau_values:
            raise ValueError("theta_values and tau_values must be non-empty")
        get_functional(self.functional_name)


@dataclass(frozen=True)
class RiskCell:
    theta: float
    tau: int
    mse_tau_mle: float
    se_tau_mle: float
    mse_tau_bayes: float
    se_tau_bayes: float
    mse_l_mle: float
    se_l_mle: float
    mse_l_bayes: float
    se_l_bayes: float
    kappa: float
    kappa_tilde: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list:
        return [getattr(self, c) for c in self.columns()]


@dataclass(frozen=True)
class RiskTable:
    config: StudyConfig
    cells: tuple

    def cell(self, theta: float, tau: int) -> RiskCell:
        for c in self.cells:
            if c.theta == theta and c.tau == tau:
                return c
        raise KeyError((theta, tau))


def stream_id(seed: int, theta: float, tau: int, rep: int) -> int:
    """Stable 64-bit stream id of one replication of one grid cell."""
    h = hashlib.blake2b(
        struct.pack("<dqQ", float(theta), int(tau), int(rep)),
        digest_size=8,
        key=struct.pack("<Q", seed),
    )
    return int.from_bytes(h.digest(), "little")


def draw_noise(theta: float, tau: int, n: int, reps: int, seed: int) -> np.ndarray:
    xi = np.empty((reps, n))
    for r in range(reps):
        RngStream(seed, stream_id(seed, theta, tau, r)).generator().standard_normal(out=xi[r])
    return xi


def cell_errors(theta, tau, eps, n, reps, seed, functional_name="theta_tau"):
    """Per-replication errors ``(tau_mle, tau_b, l_mle, l_b)`` minus truth."""
    functional = get_functional(functional_name)
    signal = np.where(np.arange(1, n + 1) <= tau, float(theta), 0.0)
    x = signal + eps * draw_noise(theta, tau, n, reps, seed)
    stats = cumulative_stats(x, eps)
    tm, _, lm = mle_from_stats(stats, functional)
    tb, _, lb = bayes_from_stats(stats, functional)
    truth = float(functional(float(theta), tau))
    return tm - tau, tb - tau, lm - truth, lb - truth


def run_cell(theta, tau, eps, n, reps, seed, functional_name="theta_tau", batches=100) -> RiskCell:
    e_tm, e_tb, e_lm, e_lb = cell_errors(theta, tau, eps, n, reps, seed, functional_name)
    tm, tm_se = batch_means(e_tm.astype(float) ** 2, batches)
    tb, tb_se = batch_means(e_tb**2, batches)
    lm, lm_se = batch_means(e_lm**2, batches)
    lb, lb_se = batch_means(e_lb**2, batches)
    return RiskCell(
        theta=float(theta),
        tau=int(tau),
        mse_tau_mle=tm,
        se_tau_mle=tm_se,
        mse_tau_bayes=tb,
        se_tau_bayes=tb_se,
        mse_l_mle=lm,
        se_l_mle=lm_se,
        mse_l_bayes=lb,
        se_l_bayes=lb_se,
        kappa=safe_ratio(tb, tm),
        kappa_tilde=safe_ratio(lb, lm),
    )


def _run_cell_task(args):
    return run_cell(*args)


def run_study(config: StudyConfig, workers: int = 1) -> RiskTable:
    """Every (theta, tau) cell of the config, theta-major order.

    Each cell is a self-contained deterministic task, so the table does not
    depend on ``workers``.
    """
    tasks = [
        (th, tau, config.eps, config.n, config.reps, config.seed, config.functional_name)
        for th in config.theta_values
        for tau in config.tau_values
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            cells = list(ex.map(_run_cell_task, tasks))
    else:
        cells = [_run_cell_task(t) for t in tasks]
    return RiskTable(config=config, cells=tuple(cells))


def paper_config(reps: int = 10_000, seed: int = 0) -> StudyConfig:
    return StudyConfig(reps=reps, seed=seed)


def cells_with(table: RiskTable, theta: float) -> list[RiskCell]:
    return [c for c in table.cells if math.isclose(c.theta, theta)]
