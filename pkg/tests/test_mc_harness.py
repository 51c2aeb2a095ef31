import math

import numpy as np
import pytest

from changepoint_efficiency.core import ModelParams, RngStream, SequenceSample, THETA_TAU
from changepoint_efficiency.mc_harness import (
    RiskCell,
    StudyConfig,
    cell_errors,
    paper_config,
    run_cell,
    run_study,
    stream_id,
)
from changepoint_efficiency.sequence_model import bayes_estimates, mle_estimates


def test_noiseless_cell():
    cell = run_cell(1.0, 5, 1e-6, 20, 100, seed=3)
    assert cell.mse_tau_mle == 0
    assert cell.mse_l_mle <= 1e-8


def test_cell_is_deterministic():
    a = run_cell(1.5, 7, 1.0, 20, 300, seed=11)
    b = run_cell(1.5, 7, 1.0, 20, 300, seed=11)
    assert a == b


def test_cell_errors_agree_with_single_sample_estimators():
    theta, tau, eps, n, seed = 1.0, 6, 1.0, 12, 5
    e_tm, e_tb, e_lm, e_lb = cell_errors(theta, tau, eps, n, 25, seed)
    params = ModelParams(theta, tau, eps, n)
    signal = params.signal()
    for r in (0, 9, 24):
        xi = RngStream(seed, stream_id(seed, theta, tau, r)).generator().standard_normal(n)
        s = SequenceSample(x=signal + eps * xi, params=params)
        tm, _, lm = mle_estimates(s, THETA_TAU)
        tb, _, lb = bayes_estimates(s, THETA_TAU)
        assert e_tm[r] == tm - tau and e_lm[r] == lm - theta * tau
        assert e_tb[r] == pytest.approx(tb - tau, abs=1e-12)
        assert e_lb[r] == pytest.approx(lb - theta * tau, abs=1e-12)


def test_seed_isolation_when_extending_reps():
    short = cell_errors(1.0, 8, 1.0, 20, 50, seed=2)
    long = cell_errors(1.0, 8, 1.0, 20, 51, seed=2)
    for a, b in zip(short, long):
        assert np.array_equal(a, b[:50])


def test_stream_ids_distinct_across_cells_and_reps():
    ids = {stream_id(0, th, tau, r) for th in (0.5, 1.0) for tau in (3, 4) for r in range(100)}
    assert len(ids) == 400
    assert stream_id(0, 1.0, 3, 0) != stream_id(1, 1.0, 3, 0)


def test_ratio_consistency():
    cell = run_cell(1.0, 10, 1.0, 20, 500, seed=1)
    assert cell.kappa == cell.mse_tau_bayes / cell.mse_tau_mle
    assert cell.kappa_tilde == cell.mse_l_bayes / cell.mse_l_mle
    assert min(cell.mse_tau_mle, cell.mse_tau_bayes, cell.mse_l_mle, cell.mse_l_bayes) >= 0


def test_single_rep_has_nan_se():
    table = run_study(StudyConfig(n=10, theta_values=(1.0,), tau_values=(3, 5), reps=1, seed=0))
    for c in table.cells:
        assert all(math.isfinite(v) for v in (c.mse_tau_mle, c.mse_tau_bayes, c.mse_l_mle, c.mse_l_bayes))
        assert all(math.isnan(v) for v in (c.se_tau_mle, c.se_tau_bayes, c.se_l_mle, c.se_l_bayes))


def test_paper_config_shape():
    cfg = paper_config()
    assert cfg.n == 20 and cfg.eps == 1.0 and cfg.reps == 10_000
    assert cfg.theta_values == (0.5, 1.0, 1.5, 2.0)
    assert cfg.tau_values == tuple(range(3, 19))
    assert len(cfg.theta_values) * len(cfg.tau_values) == 64


def test_study_cell_count_and_order():
    cfg = StudyConfig(n=8, theta_values=(2.0, 0.5), tau_values=(2, 3, 4), reps=20)
    table = run_study(cfg)
    assert len(table.cells) == 6
    assert [(c.theta, c.tau) for c in table.cells] == [(2.0, 2), (2.0, 3), (2.0, 4), (0.5, 2), (0.5, 3), (0.5, 4)]


def test_permuting_thetas_permutes_cells():
    a = run_study(StudyConfig(n=8, theta_values=(0.5, 2.0), tau_values=(2, 5), reps=40, seed=7))
    b = run_study(StudyConfig(n=8, theta_values=(2.0, 0.5), tau_values=(2, 5), reps=40, seed=7))
    key = lambda c: (c.theta, c.tau)
    assert sorted(a.cells, key=key) == sorted(b.cells, key=key)


def test_workers_do_not_change_table():
    cfg = StudyConfig(n=10, theta_values=(0.5, 1.0), tau_values=(3, 7), reps=200, seed=5)
    assert run_study(cfg, workers=1).cells == run_study(cfg, workers=2).cells


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(n=10, tau_values=(11,))
    with pytest.raises(ValueError):
        StudyConfig(reps=0)
    with pytest.raises(ValueError):
        StudyConfig(functional_name="nope")


def test_general_functional_truth():
    cell = run_cell(1.0, 4, 1e-6, 10, 20, seed=1, functional_name="theta_squared_tau")
    assert cell.mse_l_mle <= 1e-8


def test_columns():
    assert RiskCell.columns() == [
        "theta", "tau", "mse_tau_mle", "se_tau_mle", "mse_tau_bayes", "se_tau_bayes",
        "mse_l_mle", "se_l_mle", "mse_l_bayes", "se_l_bayes", "kappa", "kappa_tilde",
    ]


@pytest.mark.slow
def test_high_snr_kappa_cell():
    cell = run_cell(2.0, 10, 1.0, 20, 10_000, seed=0)
    assert 0.68 <= cell.kappa <= 0.82
