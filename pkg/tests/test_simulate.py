import numpy as np
import pytest

from graphfission import (
    SimConfig,
    cv_error_curves,
    emit_plotdata,
    generate_trend,
    grid_graph,
    run_ci_experiment,
    run_cv_experiment,
    run_poisson_experiment,
    sample_errors,
)
from graphfission.simulate import write_rows_csv


class TestSampleErrors:
    @pytest.mark.parametrize(
        "dist", ["gaussian", "laplace", "skew_normal", "student_t"]
    )
    def test_standardized_moments(self, dist):
        rng = np.random.default_rng(0)
        x = sample_errors(dist, 100_000, rng)
        assert abs(np.mean(x)) < 0.02
        assert abs(np.var(x) - 1.0) < 0.05

    def test_skew_normal_is_skewed(self):
        rng = np.random.default_rng(1)
        x = sample_errors("skew_normal", 100_000, rng)
        skew = np.mean((x - np.mean(x)) ** 3)
        assert skew > 0.1

    def test_student_t_heavy_tails(self):
        rng = np.random.default_rng(2)
        x = sample_errors("student_t", 200_000, rng)
        kurt = np.mean(x**4) / np.var(x) ** 2
        assert kurt > 3.5

    def test_unknown_dist_rejected(self):
        with pytest.raises(ValueError):
            sample_errors("cauchy", 10, np.random.default_rng(0))


class TestGenerateTrend:
    def test_k0_piecewise_constant_off_active(self):
        g = grid_graph(8, 8)
        mu = generate_trend(g, 0, 0.1, 3.0, seed=0)
        # degree-0 polynomial means each inactive component is constant
        from graphfission import connected_components

        rng = np.random.default_rng(0)
        n_active = int(np.ceil(0.1 * 64))
        active = rng.choice(64, size=n_active, replace=False)
        for comp in connected_components(g, removed_nodes=active):
            vals = mu.values[comp]
            assert np.max(vals) - np.min(vals) < 1e-12

    def test_values_bounded_by_jump(self):
        g = grid_graph(6, 6)
        for k in (0, 1):
            mu = generate_trend(g, k, 0.3, 2.0, seed=5)
            # degree-k polynomial with coefs in [-2, 2] on [0,1]^2 coords is
            # bounded by 2 * (number of monomials)
            n_terms = (k + 1) * (k + 2) // 2
            assert np.max(np.abs(mu.values)) <= 2.0 * n_terms + 1e-9

    def test_determinism(self):
        g = grid_graph(5, 5)
        a = generate_trend(g, 1, 0.2, 2.0, seed=9)
        b = generate_trend(g, 1, 0.2, 2.0, seed=9)
        np.testing.assert_array_equal(a.values, b.values)

    def test_active_fraction_zero_single_polynomial(self):
        g = grid_graph(5, 5)
        mu = generate_trend(g, 0, 0.0, 2.0, seed=3)
        assert np.max(mu.values) - np.min(mu.values) < 1e-12


class TestConfig:
    def test_guards(self):
        with pytest.raises(ValueError):
            SimConfig(trials=0)
        with pytest.raises(ValueError):
            SimConfig(active_fraction=1.5)
        with pytest.raises(ValueError):
            SimConfig(error_dist="cauchy")

    def test_json_round_trip(self, tmp_path):
        cfg = SimConfig(rows=5, cols=4, trials=3, jump_size=1.5)
        p = tmp_path / "cfg.json"
        cfg.to_json(p)
        assert SimConfig.from_json(p) == cfg


class TestExperiments:
    def test_cv_experiment_rows_and_determinism(self, tmp_path):
        cfg = SimConfig(rows=5, cols=5, trials=2, folds=3,
                        lambda_grid_size=5, seed=11)
        rows = run_cv_experiment(cfg)
        # 2 trials x 2 methods x 2 rules
        assert len(rows) == 8
        for r in rows:
            assert r["method"] in ("graph_cv", "ordinary_cv")
            assert r["rule"] in ("min", "one_se")
            assert r["oracle_risk"] >= 0.0
        # byte-identical CSV on a rerun
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_rows_csv(rows, p1)
        write_rows_csv(run_cv_experiment(cfg), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_ci_experiment_covered_flag_recomputable(self):
        cfg = SimConfig(rows=5, cols=5, trials=2, folds=3,
                        lambda_grid_size=6, jump_size=4.0, seed=12)
        rows = run_ci_experiment(cfg)
        assert len(rows) == 2 * 2 * 25
        for r in rows:
            assert r["covered"] in (0, 1)
            assert r["length"] >= 0.0
            assert r["sigma_low"] <= r["sigma_high"]
        robust = [r for r in rows if r["method"] == "robust"]
        naive = [r for r in rows if r["method"] == "naive"]
        assert np.mean([r["length"] for r in robust]) >= np.mean(
            [r["length"] for r in naive]
        )

    def test_poisson_experiment_rows(self):
        cfg = SimConfig(rows=5, cols=5, trials=3, jump_size=1.0, seed=13)
        rows = run_poisson_experiment(cfg, theta_scales=[0.5])
        assert all(r["theta_scale"] == 0.5 for r in rows)
        cov = np.mean([r["covered"] for r in rows])
        assert 0.0 <= cov <= 1.0

    def test_error_curves_matched_lambda_grid(self):
        cfg = SimConfig(rows=5, cols=5, trials=2, folds=3,
                        lambda_grid_size=5, seed=14)
        curves = cv_error_curves(cfg, dists=("gaussian", "laplace"))
        assert len(curves["lambda_grid"]) == 5
        assert curves["gaussian"].shape == (5,)
        assert curves["laplace"].shape == (5,)
        assert np.all(np.isfinite(curves["gaussian"]))

    def test_near_zero_noise_risk_small(self):
        cfg = SimConfig(rows=5, cols=5, trials=2, folds=3, sigma=1e-6,
                        jump_size=3.0, lambda_grid_size=8, seed=15)
        rows = run_cv_experiment(cfg)
        graph_min = [
            r["oracle_risk"] for r in rows
            if r["method"] == "graph_cv" and r["rule"] == "min"
        ]
        # limited by the grid-bottom penalty and solver tolerance, but far
        # below any noise-driven risk at this jump size
        assert np.max(graph_min) < 1e-3


class TestOutput:
    def test_write_rows_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_rows_csv([], tmp_path / "x.csv")

    def test_emit_plotdata_groups_and_means(self, tmp_path):
        rows = [
            {"method": "a", "trial": 0, "val": 1.0},
            {"method": "a", "trial": 1, "val": 3.0},
            {"method": "b", "trial": 0, "val": 5.0},
        ]
        p = tmp_path / "exp.csv"
        write_rows_csv(rows, p)
        files = emit_plotdata(p, tmp_path)
        text = (tmp_path / "exp_summary.dat").read_text()
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        assert lines == ["a 2", "b 5"]
        assert files == [str(tmp_path / "exp_summary.dat")]

    def test_emit_plotdata_svg(self, tmp_path):
        rows = [{"method": "a", "trial": 0, "val": 1.0}]
        p = tmp_path / "exp.csv"
        write_rows_csv(rows, p)
        files = emit_plotdata(p, tmp_path, svg=True)
        assert any(f.endswith(".svg") for f in files)
