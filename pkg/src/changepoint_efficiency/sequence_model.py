"""MLE and generalized-Bayes estimation in the one-change Gaussian sequence.

All estimators work on a single sequence (1-D input) or on a stack of
sequences (2-D input, one sequence per row); results for a row never depend
on the other rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import THETA_TAU, Functional, ModelParams, RngStream, SequenceSample, gaussian_draws


class FunctionalError(ValueError):
    """The posterior expectation of a functional is not finite."""


@dataclass(frozen=True)
class CumulativeStats:
    prefix_sums: np.ndarray
    u: np.ndarray
    n: int
    eps: float

    @property
    def index(self) -> np.ndarray:
        return np.arange(1, self.n + 1)


@dataclass(frozen=True)
class PosteriorSummary:
    weights: np.ndarray
    cond_means: np.ndarray
    cond_vars: np.ndarray


@dataclass(frozen=True)
class EstimateSet:
    tau_mle: int
    theta_mle: float
    l_mle: float
    tau_bayes: float
    theta_bayes: float
    l_bayes: float

    def as_dict(self) -> dict:
        return {
            "tau_mle": int(self.tau_mle),
            "theta_mle": float(self.theta_mle),
            "l_mle": float(self.l_mle),
            "tau_bayes": float(self.tau_bayes),
            "theta_bayes": float(self.theta_bayes),
            "l_bayes": float(self.l_bayes),
        }


def generate_sequence(
    params: ModelParams, rng: RngStream, replication_index: int = 0
) -> SequenceSample:
    xi = gaussian_draws(rng, params.n)
    x = params.signal() + params.eps * xi
    return SequenceSample(x=x, params=params, seed=rng.seed, replication_index=replication_index)


def cumulative_stats(x, eps: float) -> CumulativeStats:
    """Prefix sums ``S_k`` and the profile statistics ``U_k = S_k^2 / (2 eps^2 k)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("need at least one observation")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    n = x.shape[-1]
    s = np.cumsum(x, axis=-1)
    k = np.arange(1, n + 1)
    u = s**2 / (2.0 * eps**2 * k)
    return CumulativeStats(prefix_sums=s, u=u, n=n, eps=float(eps))


def mle_tau(stats: CumulativeStats):
    """Index ``k`` (1-based) maximizing ``U_k``; the first maximizer wins ties."""
    return np.argmax(stats.u, axis=-1) + 1


def bayes_posterior(stats: CumulativeStats) -> PosteriorSummary:
    """Posterior over the change index under a flat prior on theta.

    ``p_k`` is proportional to ``exp(U_k) / sqrt(k)``; computed as a softmax
    of ``U_k - log(k)/2`` so that large ``U_k`` cannot overflow.
    """
    k = stats.index
    a = stats.u - 0.5 * np.log(k)
    a = a - np.max(a, axis=-1, keepdims=True)
    w = np.exp(a)
    w /= np.sum(w, axis=-1, keepdims=True)
    return PosteriorSummary(
        weights=w,
        cond_means=stats.prefix_sums / k,
        cond_vars=np.broadcast_to(stats.eps**2 / k, stats.u.shape),
    )


def _take(a: np.ndarray, tau) -> np.ndarray:
    return np.take_along_axis(a, np.asarray(tau)[..., None] - 1, axis=-1)[..., 0]


def mle_from_stats(stats: CumulativeStats, functional: Functional = THETA_TAU):
    tau = mle_tau(stats)
    theta = _take(stats.prefix_sums, tau) / tau
    if functional is THETA_TAU:
        # theta_hat * tau_hat collapses to the prefix sum, exactly
        l_hat = _take(stats.prefix_sums, tau)
    else:
        l_hat = functional(theta, tau)
    return tau, theta, l_hat


def bayes_from_stats(stats: CumulativeStats, functional: Functional = THETA_TAU):
    post = bayes_posterior(stats)
    k = stats.index
    p = post.weights
    tau_b = np.sum(p * k, axis=-1)
    theta_b = np.sum(p * post.cond_means, axis=-1)
    if functional is THETA_TAU:
        l_b = np.sum(p * stats.prefix_sums, axis=-1)
    else:
        l_b = posterior_functional_mean(post, functional)
    return tau_b, theta_b, l_b


def posterior_functional_mean(post: PosteriorSummary, functional: Functional):
    """``sum_k p_k E[L(Theta, k)]`` with ``Theta ~ N(mean_k, var_k)``."""
    n = post.weights.shape[-1]
    k = np.broadcast_to(np.arange(1, n + 1), post.weights.shape)
    with np.errstate(all="ignore"):
        cond = functional.expect(post.cond_means, post.cond_vars, k)
        val = np.sum(post.weights * cond, axis=-1)
    if not np.all(np.isfinite(val)):
        raise FunctionalError(
            f"posterior mean of functional {functional.name!r} is not finite"
        )
    return val


def mle_estimates(sample: SequenceSample, functional: Functional = THETA_TAU):
    stats = cumulative_stats(sample.x, sample.params.eps)
    tau, theta, l_hat = mle_from_stats(stats, functional)
    return int(tau), float(theta), float(l_hat)


def bayes_estimates(sample: SequenceSample, functional: Functional = THETA_TAU):
    stats = cumulative_stats(sample.x, sample.params.eps)
    tau, theta, l_hat = bayes_from_stats(stats, functional)
    return float(tau), float(theta), float(l_hat)


def estimate(x, eps: float, functional: Functional = THETA_TAU) -> tuple[EstimateSet, PosteriorSummary]:
    """All six point estimates of a single sequence plus its posterior."""
    stats = cumulative_stats(np.asarray(x, dtype=float), eps)
    if stats.u.ndim != 1:
        raise ValueError("estimate() takes a single sequence")
    tm, thm, lm = mle_from_stats(stats, functional)
    tb, thb, lb = bayes_from_stats(stats, functional)
    est = EstimateSet(int(tm), float(thm), float(lm), float(tb), float(thb), float(lb))
    return est, bayes_posterior(stats)


def log_likelihood(x, theta: float, tau: int, eps: float) -> float:
    """Exact Gaussian log-density of ``x`` under ``(theta, tau, eps)``."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if not 1 <= tau <= n:
        raise ValueError(f"tau must lie in 1..{n}, got {tau}")
    resid = np.concatenate([x[:tau] - theta, x[tau:]])
    return -0.5 * n * math.log(2 * math.pi * eps**2) - math.fsum(resid**2) / (2 * eps**2)
