import math

import numpy as np
import pytest

from sievecast import ConfigError, ScreenConfig, ThresholdSpec, db_sis
from sievecast.simulation import (
    SimScenario,
    TableCell,
    accuracy,
    expected_signal_variance,
    generate,
    noise_variance,
    predictor_variance,
    preset_cells,
    run_table,
    sample_predictors,
    theory_report,
)

LN2 = math.log(2.0)


def target_cov(s):
    j = np.arange(s.p)
    if s.cov_family == "identity":
        return np.eye(s.p) * predictor_variance(s.predictor_dist)
    if s.cov_family == "ar":
        return 0.75 ** np.abs(j[:, None] - j[None, :])
    C = np.full((s.p, s.p), 0.0)
    C[:10, :10] = s.rho1
    C[10:, 10:] = 0.05
    np.fill_diagonal(C, 1.0)
    return C


def test_identity_noise_variance():
    s = SimScenario(200, 100, r_star=0.95)
    assert noise_variance(s) == pytest.approx(65 / 6 * 0.05 / 0.95, rel=1e-14)
    assert noise_variance(s) == pytest.approx(0.5702, abs=1e-4)


@pytest.mark.parametrize("s", [
    SimScenario(50, 30, "identity"),
    SimScenario(50, 30, "ar"),
    SimScenario(50, 30, "block", rho1=0.5),
    SimScenario(50, 30, "block", rho1=0.3, kappa=7),
    SimScenario(50, 30, "identity", predictor_dist="student_t"),
    SimScenario(50, 30, "identity", predictor_dist="skew_normal"),
])
def test_signal_variance_closed_form_vs_monte_carlo(s):
    rng = np.random.default_rng(0)
    C = target_cov(s)[: s.kappa, : s.kappa]
    B = rng.uniform(s.beta_low, s.beta_high, size=(200_000, s.kappa))
    mc = np.mean(np.einsum("ri,ij,rj->r", B, C, B))
    assert expected_signal_variance(s) == pytest.approx(mc, rel=3e-3)


def test_noise_vanishes_as_r_star_to_one():
    assert noise_variance(SimScenario(10, 20, r_star=1 - 1e-12)) < 1e-10


def test_ar_lag_two_correlation():
    s = SimScenario(100_000, 6, "ar", kappa=2)
    x = sample_predictors(s, np.random.default_rng(1))
    r = np.corrcoef(x[:, 1], x[:, 3])[0, 1]
    assert r == pytest.approx(0.5625, abs=0.01)


@pytest.mark.parametrize("s", [
    SimScenario(100_000, 15, "identity"),
    SimScenario(100_000, 15, "ar"),
    SimScenario(100_000, 15, "block", rho1=0.5),
    SimScenario(100_000, 15, "block", rho1=0.3),
    SimScenario(100_000, 6, "identity", predictor_dist="skew_normal", kappa=2),
])
def test_sample_covariance(s):
    x = sample_predictors(s, np.random.default_rng(2))
    np.testing.assert_allclose(np.cov(x, rowvar=False), target_cov(s), atol=0.02)


def test_student_t_variance():
    # raw t(4) columns, variance 2, heavy tails make the sample variance noisy
    s = SimScenario(400_000, 2, predictor_dist="student_t", kappa=1)
    x = sample_predictors(s, np.random.default_rng(3))
    assert predictor_variance("student_t") == 2.0
    np.testing.assert_allclose(x.var(axis=0), 2.0, rtol=0.05)


def test_skew_normal_moments():
    from scipy import stats

    x = sample_predictors(SimScenario(200_000, 1, predictor_dist="skew_normal", kappa=1),
                          np.random.default_rng(4))[:, 0]
    ref = stats.skewnorm(-8, loc=1, scale=1.5)
    assert x.mean() == pytest.approx(ref.mean(), abs=0.01)
    assert x.var() == pytest.approx(ref.var(), rel=0.02)
    assert predictor_variance("skew_normal") == pytest.approx(ref.var(), rel=1e-12)


@pytest.mark.parametrize("s", [
    SimScenario(10_000, 20, "identity", r_star=0.9),
    SimScenario(10_000, 20, "ar", r_star=0.7),
    SimScenario(10_000, 20, "block", r_star=0.6, rho1=0.5),
    SimScenario(10_000, 20, "identity", r_star=0.8, predictor_dist="student_t"),
])
def test_sample_r2_near_target(s):
    r2 = []
    for seed in range(10):
        d = generate(s, np.random.default_rng(seed))
        fitted = d.X.values @ d.beta
        resid = d.Y.values - fitted
        r2.append(1 - resid.var() / d.Y.values.var())
    assert np.mean(r2) == pytest.approx(s.r_star, abs=0.05)


def test_generate_layout():
    d = generate(SimScenario(30, 50, kappa=4), np.random.default_rng(5))
    assert d.X.shape == (30, 50)
    assert d.truth.tolist() == [0, 1, 2, 3]
    assert np.all((d.beta[:4] >= 0.5) & (d.beta[:4] <= 1.5))
    assert np.all(d.beta[4:] == 0)


def test_generate_deterministic():
    s = SimScenario(20, 40, "block", rho1=0.3)
    a = generate(s, np.random.default_rng(6))
    b = generate(s, np.random.default_rng(6))
    assert a.X.values.tobytes() == b.X.values.tobytes()
    assert a.Y.values.tobytes() == b.Y.values.tobytes()


@pytest.mark.parametrize("kwargs", [
    dict(r_star=1.0), dict(r_star=0.0), dict(kappa=0), dict(kappa=200),
    dict(cov_family="block", kappa=11), dict(cov_family="block", rho1=-0.2),
    dict(cov_family="ar", predictor_dist="student_t"), dict(cov_family="toeplitz"),
])
def test_scenario_validation(kwargs):
    with pytest.raises(ConfigError):
        SimScenario(50, 100, **kwargs)


def test_accuracy_examples():
    truth = list(range(1, 11))
    assert accuracy(truth, truth) == 1.0
    assert accuracy(truth, list(range(1, 6)) + list(range(11, 21))) == 0.5
    assert accuracy(truth, []) == 0.0
    with pytest.raises(ConfigError):
        accuracy([], [1])


def test_theory_closed_forms():
    rep = theory_report(300, 2000, 0.5, mc_reps=1000, rng=np.random.default_rng(0))
    assert rep.lambda0 == pytest.approx(LN2, rel=1e-15)
    assert rep.tail_bounds[1] == pytest.approx(0.6931, abs=1e-4)
    assert rep.tail_bounds[2] == pytest.approx(0.2402, abs=1e-4)
    assert rep.tail_bounds[3] == pytest.approx(0.0555, abs=1e-4)
    tb = [rep.tail_bounds[r] for r in range(1, 6)]
    assert all(a > b for a, b in zip(tb, tb[1:]))
    assert 0 <= rep.p1 <= 1 and rep.lambda0 > 0
    assert rep.threshold == pytest.approx(rep.c_p / math.sqrt(300), rel=1e-15)
    rep95 = theory_report(300, 2000, 0.95, mc_reps=100, rng=np.random.default_rng(0))
    assert rep95.lambda0 == pytest.approx(2.9957, abs=1e-4)


def test_theory_single_predictor_monte_carlo():
    rep = theory_report(1000, 1, 0.5, kappa=0, mc_reps=1_000_000, rng=np.random.default_rng(1))
    assert rep.p1 == pytest.approx(0.5, abs=0.002)


def test_theory_mc_agrees_with_beta_law():
    rep = theory_report(200, 500, 0.5, mc_reps=400_000, rng=np.random.default_rng(2))
    assert abs(rep.p1 - rep.p1_exact) < 4 * rep.p1_mc_se + 1e-12


def test_theory_limit_from_below():
    n = 300
    p = math.floor(n ** 1.9)
    rep = theory_report(n, p, 0.5, mc_reps=2_000_000, rng=np.random.default_rng(3))
    assert p * rep.p1 <= rep.lambda0 * (1 + 3 * rep.p1_mc_se * p)


def test_theory_null_experiment_matches():
    n, p, runs = 300, 500, 300
    rep = theory_report(n, p, 0.5, kappa=0, mc_reps=200_000, rng=np.random.default_rng(4))
    spec = ThresholdSpec(0.5, "normal")
    counts = []
    for s in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence(5, spawn_key=(s,)))
        counts.append(db_sis(rng.standard_normal(n), rng.standard_normal((n, p)), None, spec, rng).size)
    se = np.std(counts, ddof=1) / math.sqrt(runs)
    assert abs(np.mean(counts) - p * rep.p1) < 3 * se + 3 * p * rep.p1_mc_se


def test_theory_validation():
    with pytest.raises(ConfigError):
        theory_report(3, 10, 0.5)
    with pytest.raises(ConfigError):
        theory_report(10, 10, 0.5, kappa=10)
    with pytest.raises(ConfigError):
        theory_report(10, 100, 1.0)


def test_run_table_rows_and_determinism():
    s = SimScenario(60, 300, r_star=0.9, kappa=4)
    cfg = ScreenConfig(threshold="normal")
    cells = [TableCell(s, "basic", cfg), TableCell(s, "basic", cfg.replace(alpha=0.8))]
    a = run_table(cells, 4, seed=1)
    b = run_table(cells, 4, seed=1)
    assert a == b
    assert [r["alpha"] for r in a] == [0.5, 0.8]
    assert all(r["reps"] == 4 and 0 <= r["mean_accuracy"] <= 1 for r in a)
    # common random numbers: the larger alpha can only add predictors
    assert a[1]["median_selected"] >= a[0]["median_selected"]


def test_run_table_validation():
    with pytest.raises(ConfigError):
        run_table([], 3)
    with pytest.raises(ConfigError):
        run_table([TableCell(SimScenario(20, 30))], 0)


def test_preset_shapes():
    assert len(preset_cells("table1", n=200)) == 8
    assert {c.scenario.p for c in preset_cells("table1", n=200)} == {34_000}
    t2 = preset_cells("table2", n=200, T=5)
    assert len(t2) == 8 and {c.scenario.p for c in t2} == {136_000}
    assert {c.config.T for c in t2 if c.method == "two-stage"} == {5}
    assert len(preset_cells("table3")) == 10
    assert len(preset_cells("table-heavy")) == 4
    with pytest.raises(ConfigError):
        preset_cells("table9")
