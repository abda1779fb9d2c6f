import json
import math

import numpy as np
import pytest

from sco_lab.experiments import (
    ExperimentConfig,
    TrialRecord,
    adversarial_necessity_demo,
    clopper_pearson,
    coin_instance_spec,
    correlation_experiment,
    derive_seed,
    estimate_success,
    find_min_m,
    fit_rate,
    gadget_instance_spec,
    quad_instance_spec,
    run_experiment,
    run_trial,
    tent_instance_spec,
    uc_deviation_quadratic,
    write_experiment_artifacts,
    write_trials_csv,
    read_trials_csv,
)
from sco_lab.families import Feasible
from sco_lab.lattice import l2_integer_packing


def coin_config(eps=0.25, delta=0.25, d=2, R=1.0, rho=0.5, m_grid=(1, 4, 16, 64),
                trials=200, seed=7, rule="erm"):
    return ExperimentConfig(
        experiment_id="coin-test",
        family={"kind": "coin_linear", "d": d, "R": R, "rho": rho,
                "mode": "dimension"},
        feasible=Feasible.box_continuous(R).to_spec(),
        rule=rule, epsilon=eps, delta=delta, m_grid=m_grid, trials=trials,
        master_seed=seed)


def tent_config(m_grid=(4, 512), trials=300, rho=0.5, eps=None, seed=3):
    packing = l2_integer_packing(8, 3, seed=0, target_size=8)
    r = packing.radius
    eps = eps if eps is not None else r / 16
    return ExperimentConfig(
        experiment_id="tent-test",
        family={"kind": "tent", "packing": packing.to_spec(), "rho": rho},
        feasible=Feasible.l2_ball(3.0).to_spec(),
        rule="erm", epsilon=eps, delta=0.25, m_grid=m_grid, trials=trials,
        master_seed=seed)


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(1, "a", 10, 3) == derive_seed(1, "a", 10, 3)

    def test_disjoint_streams(self):
        seeds = {derive_seed(ms, eid, m, t)
                 for ms in (0, 1) for eid in ("x", "y")
                 for m in (1, 2) for t in range(50)}
        assert len(seeds) == 2 * 2 * 2 * 50


class TestRunTrial:
    def test_record_is_reproducible(self):
        cfg = coin_config()
        r1 = run_trial(cfg, 16, 5)
        r2 = run_trial(cfg, 16, 5)
        assert r1 == r2
        assert r1.seed == derive_seed(cfg.master_seed, cfg.experiment_id, 16, 5)

    def test_success_flag_consistent(self):
        cfg = coin_config()
        for t in range(50):
            r = run_trial(cfg, 8, t)
            assert r.success == (r.excess <= cfg.epsilon)

    def test_solver_errors_become_flagged_failures(self):
        # no ERM rule is wired for logistic losses: every trial must come
        # back as a counted failure with the error flag set
        cfg = ExperimentConfig(
            experiment_id="err", rule="erm", epsilon=0.1, delta=0.25,
            family={"kind": "logistic", "d": 2, "mu": 1.0, "M": 1.0},
            feasible=Feasible.box_integer(1).to_spec(),
            m_grid=(4,), trials=10, master_seed=0, randomize_instance=False)
        est = estimate_success(cfg, 4)
        assert est.p_hat == 0.0
        assert all(r.error and not r.success for r in est.records)


class TestEstimateSuccess:
    def test_vacuous_threshold(self):
        # epsilon above the family's maximal excess: every trial succeeds
        cfg = coin_config(eps=10.0, trials=50)
        est = estimate_success(cfg, 1)
        assert est.p_hat == 1.0

    def test_single_sample_high_dimension_is_chance_level(self):
        cfg = coin_config(d=8, rho=0.5, eps=0.25, trials=400)
        est = estimate_success(cfg, 1)
        assert est.p_hat < 0.5

    def test_tent_identification_at_m200(self):
        cfg = tent_config(m_grid=(200,), trials=500)
        est = estimate_success(cfg, 200)
        assert est.p_hat >= 0.95

    def test_ci_brackets_p_hat(self):
        cfg = coin_config(trials=100)
        est = estimate_success(cfg, 4)
        assert est.ci_low <= est.p_hat <= est.ci_high


class TestClopperPearson:
    def test_extremes(self):
        lo, hi = clopper_pearson(0, 20)
        assert lo == 0.0 and hi < 0.2
        lo, hi = clopper_pearson(20, 20)
        assert hi == 1.0 and lo > 0.8

    def test_coverage_shape(self):
        lo, hi = clopper_pearson(50, 100)
        assert lo == pytest.approx(0.3983, abs=2e-3)
        assert hi == pytest.approx(0.6017, abs=2e-3)


class TestFindMinM:
    def test_all_pass_returns_first(self):
        cfg = coin_config(eps=10.0, trials=20)
        out = find_min_m(cfg)
        assert out.m_hat == cfg.m_grid[0]

    def test_all_fail_returns_none(self):
        # epsilon = 0 can never be met strictly... use tiny eps with tiny grid
        cfg = coin_config(d=8, eps=1e-6, m_grid=(1, 2), trials=30)
        out = find_min_m(cfg)
        assert out.m_hat is None

    def test_coin_bracket_against_theory(self):
        from sco_lab.bounds import BoundQuery, linf_lower_bounds
        cfg = coin_config(eps=0.25, delta=0.25, d=2, R=1.0,
                          m_grid=tuple(2 ** k for k in range(15)), trials=300)
        out = find_min_m(cfg)
        assert out.m_hat is not None
        lb = linf_lower_bounds(BoundQuery(d=2, R=1.0, epsilon=0.25, delta=0.25))
        assert out.m_hat >= lb.combined  # lower bound is far below desk scale
        # empirical upper-bound constant C in m_hat <= C (R^2/eps^2)(d + ln(1/delta))
        scale = (1.0 / 0.25 ** 2) * (2 + math.log(4))
        assert out.m_hat <= 8 * scale


class TestFitRate:
    def test_exact_inverse_square(self):
        pairs = [(e, 100 / e ** 2) for e in (0.4, 0.2, 0.1, 0.05)]
        fit = fit_rate(pairs)
        assert fit.slope == pytest.approx(2.0, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_exact_inverse(self):
        fit = fit_rate([(e, 100 / e) for e in (0.4, 0.2, 0.1)])
        assert fit.slope == pytest.approx(1.0, abs=1e-9)

    def test_noisy_slope_band(self):
        rng = np.random.default_rng(0)
        eps = np.geomspace(0.4, 0.0125, 8)
        pairs = [(e, (100 / e ** 2) * rng.uniform(0.8, 1.25)) for e in eps]
        fit = fit_rate(pairs)
        assert 1.8 <= fit.slope <= 2.2

    def test_refit_reproduces(self):
        fit = fit_rate([(0.4, 700), (0.2, 2500), (0.1, 11000)])
        refit = fit_rate(fit.points)
        assert abs(refit.slope - fit.slope) <= 1e-9
        assert abs(refit.intercept - fit.intercept) <= 1e-9

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            fit_rate([(0.1, 10), (0.1, 20), (0.1, 30)])
        with pytest.raises(ValueError):
            fit_rate([(0.1, 10), (0.2, 20)])


class TestUcDeviation:
    def test_worked_example_formula(self):
        # diff = (0.3, -0.5) on the {-1,0,1}^2 lattice: sup = 0.8
        from sco_lab.lattice import enumerate_integer_points
        diff = np.array([0.3, -0.5])
        pts = np.asarray(enumerate_integer_points(2, 1, "linf").points, float)
        brute = float(np.max(np.abs((pts * diff).sum(axis=1))))
        closed = float(np.sum(np.abs(diff) * 1))
        assert brute == closed == pytest.approx(0.8)

    def test_zero_noise(self):
        sups = uc_deviation_quadratic(2, 1, 1.0, 0.0, (0.5, -0.5), 10, 20, seed=1)
        assert np.all(sups == 0.0)

    def test_closed_form_equals_brute_force(self):
        for d in (1, 2, 3):
            uc_deviation_quadratic(d, 2, 1.0, 1.0, np.zeros(d), 25, 100,
                                   seed=d, cross_check=True)

    def test_median_scaling(self):
        meds = {}
        for m in (100, 1000, 10000):
            sups = uc_deviation_quadratic(3, 2, 1.0, 1.0, np.zeros(3), m, 100,
                                          seed=42)
            meds[m] = float(np.median(sups))
        for m1, m2 in ((100, 1000), (1000, 10000)):
            ratio = meds[m1] / meds[m2]
            assert math.sqrt(10) / 2 <= ratio <= 2 * math.sqrt(10)

    def test_infinite_box_rejected(self):
        with pytest.raises(ValueError):
            uc_deviation_quadratic(2, math.inf, 1.0, 1.0, (0, 0), 10, 10, 0)


class TestCorrelationExperiment:
    def test_majority_within_ceiling(self):
        rep = correlation_experiment(16, 1.0, 0.25, 16, 1000, seed=5)
        assert rep.within_ceiling
        assert rep.ceiling == pytest.approx(0.25 * math.sqrt(2))

    def test_consistency_at_large_m(self):
        rep = correlation_experiment(16, 1.0, 0.25, 16_000, 100, seed=6)
        assert rep.estimate > 0.9


class TestAdversarialNecessity:
    def test_remark_construction_m2(self):
        rep = adversarial_necessity_demo(lambda s: 0.0, mu=1.0, epsilon=0.25,
                                         delta=0.2, m=2, trials=4000, seed=8)
        assert rep.p_zero == pytest.approx((math.sqrt(0.2) + 1) / 2)
        assert rep.failure_freq == pytest.approx(rep.p_zero ** 2, abs=0.03)
        assert rep.exceeds_delta

    def test_excess_lower_bound(self):
        for eps, mu in ((0.25, 1.0), (0.9, 2.0), (0.1, 0.5)):
            rep = adversarial_necessity_demo(lambda s: 0.0, mu=mu, epsilon=eps,
                                             delta=0.2, m=1, trials=10, seed=9)
            assert rep.excess_at_default >= 2 * eps

    def test_invalid_delta_rejected(self):
        with pytest.raises(ValueError):
            adversarial_necessity_demo(lambda s: 0.0, 1.0, 0.25, 1.0, 2, 10, 0)


class TestInstanceBuilders:
    def test_coin_rho(self):
        spec = coin_instance_spec(4, 2.0, 0.1)
        assert spec["rho"] == pytest.approx(0.2)
        assert coin_instance_spec(4, 2.0, 10.0)["rho"] == 0.5

    def test_gadget_gamma_and_tau(self):
        spec = gadget_instance_spec(4, 1.0, 64.0, 8, 0.012, c1=0.3)
        assert spec["tau"] == 2
        assert spec["gamma"] == pytest.approx(0.012 / 0.6)
        with pytest.raises(ValueError):
            gadget_instance_spec(4, 1.0, 64.0, 8, 0.4, c1=0.3)

    def test_tent_rho(self):
        packing = l2_integer_packing(8, 3, seed=0, target_size=8)
        spec = tent_instance_spec(packing.to_spec(), packing.radius,
                                  packing.radius / 16)
        assert spec["rho"] == pytest.approx(0.5)


class TestRunExperimentArtifacts:
    def test_reproducible_and_thread_invariant(self, tmp_path):
        cfg = coin_config(m_grid=(1, 8, 64), trials=40)
        paths = []
        for i, threads in enumerate((1, 1, 2)):
            out = run_experiment(cfg, threads=threads)
            d = tmp_path / f"run{i}"
            write_experiment_artifacts(cfg, out, d)
            paths.append(d)
        blobs = [(p / "trials.csv").read_bytes() for p in paths]
        assert blobs[0] == blobs[1] == blobs[2]
        summaries = [(p / "summary.json").read_bytes() for p in paths]
        assert summaries[0] == summaries[1] == summaries[2]

    def test_manifest_echoes_config(self, tmp_path):
        cfg = coin_config(m_grid=(1, 4), trials=10)
        out = run_experiment(cfg)
        write_experiment_artifacts(cfg, out, tmp_path / "r")
        manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
        assert manifest["config"]["master_seed"] == cfg.master_seed
        assert manifest["config"] == cfg.to_spec()
        assert "version" in manifest

    def test_trials_csv_schema(self, tmp_path):
        cfg = coin_config(m_grid=(1, 4), trials=10)
        out = run_experiment(cfg)
        path = tmp_path / "trials.csv"
        write_trials_csv(cfg, out["records"], path)
        rows = read_trials_csv(path)
        assert len(rows) == 20
        assert rows[0]["experiment_id"] == "coin-test"
        assert {r["m"] for r in rows} == {"1", "4"}

    def test_aggregation_commutes(self):
        cfg = coin_config(m_grid=(8,), trials=60)
        out = run_experiment(cfg)
        records = list(out["records"])
        k = sum(r.success for r in records)
        rng = np.random.default_rng(0)
        rng.shuffle(records)
        assert sum(r.success for r in records) == k

    def test_success_monotone_across_grid(self):
        for cfg in (coin_config(d=6, eps=0.2, rho=0.4,
                                m_grid=(1, 1024), trials=200),
                    tent_config(m_grid=(1, 512), trials=200)):
            out = run_experiment(cfg)
            per_m = out["summary"]["per_m"]
            assert per_m[-1]["p_hat"] >= per_m[0]["p_hat"] + 0.2


class TestConfigSerialization:
    def test_round_trip(self):
        cfg = coin_config()
        back = ExperimentConfig.from_spec(json.loads(json.dumps(cfg.to_spec())))
        assert back == cfg

    def test_validation(self):
        with pytest.raises(ValueError):
            coin_config(m_grid=(4, 2))
        with pytest.raises(ValueError):
            coin_config(m_grid=())
        with pytest.raises(ValueError):
            coin_config(eps=-1.0)


class TestSgdRule:
    def test_sgd_trial_on_quad(self):
        cfg = ExperimentConfig(
            experiment_id="sgd-quad",
            family=quad_instance_spec(2, 1.0, 1.0, theta=(0.5, -0.5)),
            feasible=Feasible.box_continuous(3.0).to_spec(),
            rule="sgd", epsilon=0.05, delta=0.25, m_grid=(64, 4096),
            trials=60, master_seed=11, randomize_instance=False)
        out = run_experiment(cfg)
        per_m = out["summary"]["per_m"]
        assert per_m[1]["p_hat"] >= per_m[0]["p_hat"]
        mean_excess = np.mean([r.excess for r in out["records"] if r.m == 4096])
        assert mean_excess < 0.05
