"""Exit criteria of the build, each checked at its stated tolerance.

The limiting-process run (2e5 paths on [-200, 200] at step 0.01) takes
several minutes on one core; it is shared by criteria 1-3.
"""

import math
import time

import numpy as np
import pytest

from changepoint_efficiency.asymptotic_risk import AsymptoticInputs, _first_order, risk_expansion, zeta3
from changepoint_efficiency.cli import main
from changepoint_efficiency.core import THETA_TAU, Functional, ModelParams, RngStream
from changepoint_efficiency.limiting_process import GridSpec, draw_limit_estimates, estimate_limit_constants
from changepoint_efficiency.mc_harness import cells_with, paper_config, run_study
from changepoint_efficiency.sequence_model import (
    bayes_from_stats,
    cumulative_stats,
    estimate,
    generate_sequence,
    mle_estimates,
)

from conftest import record

LIMIT_SEED = 0
STUDY_SEED = 0


@pytest.fixture(scope="module")
def limit_run():
    return estimate_limit_constants(1.0, GridSpec(step=0.01, truncation=200.0), reps=200_000, seed=LIMIT_SEED)


@pytest.fixture(scope="module")
def study():
    start = time.perf_counter()
    table = run_study(paper_config(reps=10_000, seed=STUDY_SEED))
    return table, time.perf_counter() - start


def test_c1_limit_mle_constant(limit_run):
    e = limit_run.e_umle2
    ok = 25.0 <= e.value <= 27.0
    record("C1 E u_mle^2 in [25, 27]", ok, f"{e.value:.4f} +- {e.se:.4f} (target 26)")
    assert ok


def test_c2_limit_bayes_constant(limit_run):
    e = limit_run.e_ub2
    ok = 18.4 <= e.value <= 20.0
    record("C2 E u_b^2 in [18.4, 20.0]", ok, f"{e.value:.4f} +- {e.se:.4f} (target 16 zeta(3) = {16 * zeta3():.4f})")
    assert ok


def test_c3_relative_efficiency(limit_run):
    k = limit_run.kappa0_hat
    ok = 0.71 <= k.value <= 0.77 and k.se <= 0.01
    record("C3 kappa0_hat in [0.71, 0.77], SE <= 0.01", ok, f"{k.value:.4f} +- {k.se:.4f} (target {8 * zeta3() / 13:.4f})")
    assert ok


def test_limit_run_symmetry_and_truncation(limit_run):
    sym = all(abs(e.value) <= 3 * e.se for e in (limit_run.mean_umle, limit_run.mean_ub))
    trunc = limit_run.tail_fraction < 1e-4
    record(
        "limit symmetry |E u| <= 3 SE; tail fraction < 1e-4",
        sym and trunc,
        f"E u_mle = {limit_run.mean_umle.value:.4f} +- {limit_run.mean_umle.se:.4f}, "
        f"E u_b = {limit_run.mean_ub.value:.4f} +- {limit_run.mean_ub.se:.4f}, "
        f"tail = {limit_run.tail_fraction:.2e}",
    )
    assert sym and trunc


def _study_checks(table):
    checks = []

    def band(theta, lo, hi, attr="kappa", taus=None):
        cells = [c for c in cells_with(table, theta) if taus is None or c.tau in taus]
        vals = [getattr(c, attr) for c in cells]
        bad = [(c.tau, round(getattr(c, attr), 4)) for c in cells if not lo <= getattr(c, attr) <= hi]
        return not bad, f"range [{min(vals):.4f}, {max(vals):.4f}]" + (f"; outside at {bad}" if bad else "")

    ok, d = band(2.0, 0.68, 0.82)
    checks.append(("(a) theta/eps=2: kappa in [0.68, 0.82] for all tau", ok, d))
    ok, d = band(1.5, 0.50, 0.87)
    checks.append(("(b) theta/eps=1.5: kappa in [0.50, 0.87] for all tau", ok, d))
    ok, d = band(0.5, -math.inf, 0.80, "kappa_tilde", taus=range(3, 9))
    checks.append(("(c) theta/eps=0.5, tau<=8: kappa_tilde <= 0.80", ok, d))
    d_cells = [c for c in cells_with(table, 1.0) if c.tau >= 15]
    bad = [(c.tau, round(c.kappa_tilde, 4)) for c in d_cells if not c.kappa_tilde > 1]
    checks.append(("(d) theta/eps=1, tau>=15: kappa_tilde > 1", not bad, f"min {min(c.kappa_tilde for c in d_cells):.4f}" + (f"; failing {bad}" if bad else "")))
    e_cells = cells_with(table, 0.5) + cells_with(table, 1.0)
    bad = [(c.theta, c.tau, round(c.kappa, 4)) for c in e_cells if not c.kappa < 1]
    checks.append(("(e) theta/eps in {0.5, 1}: kappa < 1 for all tau", not bad, f"max {max(c.kappa for c in e_cells):.4f}" + (f"; failing {bad}" if bad else "")))
    return checks


def test_c4_finite_sample_study(study):
    table, elapsed = study
    checks = _study_checks(table)
    fast = elapsed < 60
    for label, ok, detail in checks:
        record(f"C4 {label}", ok, detail)
    record("C4 runtime < 60 s", fast, f"{elapsed:.1f} s")
    failing = [label for label, ok, _ in checks if not ok]
    assert fast and not failing, f"failing: {failing}"


def test_c5_exact_formulas():
    exp = risk_expansion(AsymptoticInputs(eps=0.1, i1=1.0, i2=1.0, delta=1.0, dL_dtau=1.0))
    ratio_ok = abs(exp.ratio_limit - 8 * zeta3() / 13) <= 1e-12
    # independent oracle: partial sum to 1e6 bracketed by the integral tail bounds
    n = 10**6
    head = math.fsum(1.0 / np.arange(1, n + 1, dtype=float) ** 3)
    zeta_ok = head + 1 / (2 * (n + 1) ** 2) - 1e-12 <= zeta3() <= head + 1 / (2 * n**2) + 1e-12
    inp = AsymptoticInputs(eps=0.3, i1=1.5, i2=0.8, delta=2.0, dL_dtheta1=0.4, dL_dtheta2=1.2, dL_dtau=0.5)
    shared = risk_expansion(inp).first_order == _first_order(inp)
    ok = ratio_ok and zeta_ok and shared
    record(
        "C5 exact formulas",
        ok,
        f"ratio {exp.ratio_limit:.15f} vs 8 zeta(3)/13 {8 * zeta3() / 13:.15f}; zeta(3) = {zeta3():.15f}",
    )
    assert ok


def test_c6_property_suites():
    rng_seed = 2024
    norm_ok = scale_ok = flip_ok = quad_ok = True
    quad_f = Functional("theta_tau_quadrature", lambda th, t: th * t)
    for r in range(1000):
        g = RngStream(rng_seed, r).generator()
        n = int(g.integers(2, 40))
        params = ModelParams(float(g.normal(0, 2)), int(g.integers(1, n + 1)), float(g.uniform(0.05, 3)), n)
        x = generate_sequence(params, RngStream(rng_seed + 1, r)).x
        est, post = estimate(x, params.eps)
        norm_ok &= abs(post.weights.sum() - 1) <= 1e-12 and bool(np.all(post.weights >= 0))
        flip, pflip = estimate(-x, params.eps)
        flip_ok &= (
            flip.tau_mle == est.tau_mle
            and flip.tau_bayes == est.tau_bayes
            and np.array_equal(pflip.weights, post.weights)
            and flip.theta_mle == -est.theta_mle
            and flip.theta_bayes == -est.theta_bayes
        )
        c = float(g.uniform(0.1, 10))
        sc, psc = estimate(c * x, c * params.eps)
        tol = 1e-12
        scale_ok &= (
            sc.tau_mle == est.tau_mle
            and abs(sc.tau_bayes - est.tau_bayes) <= tol * est.tau_bayes
            and np.allclose(psc.weights, post.weights, rtol=0, atol=tol)
            and all(
                abs(getattr(sc, a) - c * getattr(est, a)) <= tol * max(abs(c * getattr(est, a)), c * np.abs(x).max())
                for a in ("theta_mle", "l_mle", "theta_bayes", "l_bayes")
            )
        )
        stats = cumulative_stats(x, params.eps)
        closed = bayes_from_stats(stats, THETA_TAU)[2]
        quad = bayes_from_stats(stats, quad_f)[2]
        quad_ok &= abs(quad - closed) <= 1e-10 * max(abs(closed), np.abs(stats.prefix_sums).max() + n * params.eps)
    record("C6 posterior weights sum to 1 within 1e-12 (1e3 samples)", norm_ok, "")
    record("C6 sign-flip invariance", flip_ok, "")
    record("C6 joint-scale invariance (1e-12)", scale_ok, "")
    record("C6 closed-form vs quadrature Bayes L (1e-10)", quad_ok, "")

    grid = GridSpec(step=0.01, truncation=200.0)
    scale_exact = True
    for r in range(20):
        one = draw_limit_estimates(1.0, grid, RngStream(77, r))
        for delta in (2.0, 0.5, 3.0):
            other = draw_limit_estimates(delta, grid, RngStream(77, r))
            scale_exact &= other.u_mle == one.u_mle / delta**2 and other.u_bayes == one.u_bayes / delta**2
    record("C6 argmax delta-scaling exact on shared paths", scale_exact, "")

    misses = 0
    for theta, tau, n in ((1.0, 5, 20), (2.0, 12, 20), (-0.5, 3, 10)):
        params = ModelParams(theta, tau, abs(theta) / 20, n)
        misses += sum(int(mle_estimates(generate_sequence(params, RngStream(55, r)))[0] != tau) for r in range(1000))
    record("C6 noiseless identification (eps = theta/20, 1e3 reps)", misses == 0, f"{misses} misses")
    assert norm_ok and flip_ok and scale_ok and quad_ok and scale_exact and misses == 0


def test_c7_determinism_across_workers(tmp_path, capsys):
    for name, workers in (("one", "1"), ("many", "3")):
        code = main(["reproduce-figure1", "--seed", "5", "--workers", workers, "--out", str(tmp_path / name)])
        assert code == 0
    capsys.readouterr()
    a = (tmp_path / "one" / "risk_table.csv").read_bytes()
    b = (tmp_path / "many" / "risk_table.csv").read_bytes()
    ok = a == b and len(a.splitlines()) == 65
    record("C7 reproduce-figure1 byte-identical CSV for 1 and 3 workers", ok, f"{len(a)} bytes")
    assert ok
