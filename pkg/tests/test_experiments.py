"""
Integration tests for configuration loading, schedules, the trial pool,
the four experiment drivers and the command line.
"""
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

from app.__main__ import main
from app.core.diagnostics import cond_lower_bound_1d
from app.core.errors import ConfigError, NumericError
from app.core.schemas import ExperimentKind, RuleKind, TrialRecord
from app.core.storage import ResultStore, read_json, read_table
from app.core.utils import (
    COEFF_STREAM,
    EVAL_STREAM,
    GRAM_STREAM,
    POOL_STREAM,
    SCHEDULE_STREAM,
    VOLUME_STREAM,
)
from app.experiments import (
    TrialScheduler,
    run_bounds,
    run_conditioning_sweep,
    run_convergence,
    run_error_map,
    run_experiment,
)
from app.experiments.base import ExperimentDriver
from app.experiments.config_loader import (
    apply_overrides,
    config_digest,
    config_from_mapping,
    load_config,
)
from app.experiments.schedule import oversampling_ratio, resolve_schedule, trial_seed
from app.experiments.scheduler import TrialOutcome, summarize_point

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def make_config(kind="converge", domain=None, schedule=None, **experiment):
    document = {
        "experiment": {"kind": kind, "seed": 5, "trials": 3, "error_points": 1000, "gram_points": 2000,
                       **experiment.pop("settings", {})},
        "domain": domain or {"kind": "l_shape", "dimension": 2},
        "index_set": {"kind": experiment.pop("index_set", "total_degree")},
        "schedule": schedule or {"mode": "degree", "values": [2, 4],
                                 "rules": [{"kind": "linear", "constant": 5.0}]},
    }
    document.update(experiment)
    return config_from_mapping(document)


class TestConfigLoading:
    """TOML parsing, validation and overrides."""

    def test_shipped_configs_validate(self):
        paths = sorted(CONFIG_DIR.glob("*.toml"))
        assert paths
        for path in paths:
            config = load_config(path)
            assert config.name == path.stem

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[experiment\nkind = ", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            config_from_mapping({"experiment": {"kind": "converge"}, "plots": {}})

    def test_invalid_values(self):
        with pytest.raises(ConfigError):
            make_config(kind="errormap", domain={"kind": "corner", "dimension": 3})
        with pytest.raises(ConfigError):
            make_config(schedule={"mode": "degree", "values": [4, 2]})

    def test_chebyshev_basis_selects_chebyshev_measure(self):
        config = make_config(basis={"kind": "chebyshev"})
        assert config.measure.value == "chebyshev"

    def test_overrides_and_hash(self, tmp_path):
        config = make_config()
        moved = apply_overrides(config, out=str(tmp_path))
        assert moved.output_dir == str(tmp_path)
        assert config_digest(moved) == config_digest(config)
        reseeded = apply_overrides(config, seed=99, trials=7)
        assert (reseeded.seed, reseeded.trials) == (99, 7)
        assert config_digest(reseeded) != config_digest(config)
        assert len(config_digest(config)) == 12


class TestSchedule:
    """Resolution of schedules into (n, N, M)."""

    def test_fixed_ratio_hyperbolic_cross(self):
        config = make_config(index_set="hyperbolic_cross",
                             schedule={"mode": "degree", "values": [100],
                                       "rules": [{"kind": "linear", "constant": 5.0}]})
        point = resolve_schedule(config)[0]
        assert (point.n, point.n_basis, point.samples) == (100, 484, 2420)
        assert oversampling_ratio(point) == pytest.approx(5.0)

    def test_budget_mode(self):
        config = make_config(domain={"kind": "slab", "dimension": 1},
                             schedule={"mode": "budget", "values": [10],
                                       "rules": [{"kind": "linear", "constant": 1.0}]})
        point = resolve_schedule(config)[0]
        assert (point.n, point.samples) == (9, 10)

    def test_chernoff_rule_uses_lambda(self):
        config = make_config(schedule={"mode": "degree", "values": [3], "rules": [{"kind": "chernoff"}]},
                             bounds={"delta": 0.5, "gamma": 0.01})
        point = resolve_schedule(config)[0]
        # Total degree 3 in d=2 has N = 10 and the L-shape has lambda = 2/3.
        assert (point.n_basis, point.samples) == (10, 6754)

    def test_rules_are_outermost(self):
        config = make_config(schedule={"mode": "degree", "values": [1, 2],
                                       "rules": [{"kind": "linear"}, {"kind": "quadratic"}]})
        points = resolve_schedule(config)
        assert [p.index for p in points] == [0, 1, 2, 3]
        assert [p.rule.kind for p in points] == [RuleKind.LINEAR, RuleKind.LINEAR,
                                                 RuleKind.QUADRATIC, RuleKind.QUADRATIC]
        assert points[3].samples == 36

    @pytest.mark.parametrize("name, sizes", [
        ("regularity_errormap_logdisc", (200, 1102, 5510)),
        ("regularity_errormap_mandelbrot_cossin", (100, 484, 2420)),
    ])
    def test_error_map_sizes(self, name, sizes):
        point = resolve_schedule(load_config(CONFIG_DIR / f"{name}.toml"))[-1]
        assert (point.n, point.n_basis, point.samples) == sizes

    def test_chebyshev_configs(self):
        paths = sorted(CONFIG_DIR.glob("chebyshev_*_cosmean_d*.toml"))
        assert {load_config(p).domain.kind.value for p in paths} == {"corner", "norm_exclusion", "unit_ball"}
        for path in paths:
            config = load_config(path)
            assert config.measure.value == "chebyshev"
            assert config.schedule.rules[0].label() == "loglinear(c=0.5)"

    def test_trial_seed(self):
        config = make_config()
        assert trial_seed(config, 1, 2) == 5 ^ (1 * 3 + 2)


class TestRunCaches:
    """Seed streams and per-run caches shared by worker threads."""

    def setup_method(self):
        self.config = make_config(target={"id": "random_polynomial"})
        self.driver = ExperimentDriver(self.config)
        self.driver.points = resolve_schedule(self.config)

    def test_streams_are_distinct(self):
        streams = [EVAL_STREAM, GRAM_STREAM, POOL_STREAM, COEFF_STREAM, VOLUME_STREAM, SCHEDULE_STREAM]
        assert len(set(streams)) == len(streams)
        # High bits keep stream seeds clear of trial offsets.
        assert all(s >> 32 for s in streams)

    def test_target_built_once_across_threads(self):
        point = self.driver.points[-1]
        with ThreadPoolExecutor(max_workers=8) as pool:
            targets = list(pool.map(lambda _: self.driver.target_for(point), range(32)))
        assert len({id(t) for t in targets}) == 1

    def test_volume_cached_across_threads(self):
        with ThreadPoolExecutor(max_workers=8) as pool:
            volumes = list(pool.map(lambda _: self.driver.volume(), range(16)))
        assert volumes == [volumes[0]] * 16
        assert volumes[0] == pytest.approx(0.75)


class TestScheduler:
    """Failure handling of the trial pool."""

    def setup_method(self):
        self.scheduler = TrialScheduler(max_workers=2)

    def _failure(self, s, t, error):
        return TrialOutcome(schedule_index=s, trial=t)

    def test_failed_trials_are_flagged(self):
        def work(s, t):
            if t == 0:
                raise NumericError("singular")
            return TrialOutcome(schedule_index=s, trial=t)

        outcomes = self.scheduler.run([(0, t) for t in range(3)], work, self._failure)
        assert [o.trial for o in outcomes] == [0, 1, 2]
        summary = summarize_point(0, outcomes)
        assert summary.failed == 1
        assert len(summary.ok) == 2
        assert summary.flagged

    def test_all_failed_aborts(self):
        def work(s, t):
            raise NumericError(f"trial {t} diverged")

        outcomes = self.scheduler.run([(0, t) for t in range(4)], work, self._failure)
        with pytest.raises(NumericError):
            summarize_point(0, outcomes)

    def test_other_errors_propagate(self):
        def work(s, t):
            raise ConfigError("bad")

        with pytest.raises(ConfigError):
            self.scheduler.run([(0, 0)], work, self._failure)


class TestConvergence:
    """Median errors per schedule point."""

    def test_basis_function_is_recovered(self):
        config = make_config(domain={"kind": "full_box", "dimension": 2},
                             target={"id": "basis_function", "multi_index": [1, 2]})
        result = run_convergence(config)
        assert len(result.rows) == 2
        assert len(result.records) == 6
        last = result.rows[-1]
        assert last.N == 15 and last.M == 75
        assert last.l2_error < 1e-10
        assert last.coefficient_norm == pytest.approx(1.0)
        assert not last.flagged

    def test_errors_decrease_for_smooth_target(self):
        config = make_config(target={"id": "expmean"},
                             schedule={"mode": "degree", "values": [1, 3, 6],
                                       "rules": [{"kind": "linear", "constant": 3.0}]})
        rows = run_convergence(config).rows
        assert rows[0].l2_error > rows[1].l2_error > rows[2].l2_error
        assert all(r.linf_error >= r.l2_error for r in rows)

    def test_recovery_floor(self):
        config = apply_overrides(load_config(CONFIG_DIR / "recovery_lshape_random_polynomial.toml"))
        result = run_convergence(config)
        assert result.rows[0].N == 70 and result.rows[0].M == 350
        assert sum(r.l2_error < 1e-7 for r in result.records) >= 18

    def test_reproducible_bytes(self, tmp_path):
        config = make_config(target={"id": "expmean"}, settings={"trials": 4})
        first = run_experiment(config, ResultStore(tmp_path / "a"), TrialScheduler(1))
        second = run_experiment(config, ResultStore(tmp_path / "b"), TrialScheduler(3))
        assert [p.name for p in first.paths] == ["converge_l_shape_d2.csv", "converge_l_shape_d2_trials.csv"]
        for a, b in zip(first.paths, second.paths):
            assert a.read_bytes() == b.read_bytes()
        echoed, frame = read_table(first.paths[0])
        assert echoed["seed"] == 5
        assert "output_dir" not in echoed
        assert list(frame["schedule_index"]) == [0, 1]
        assert list(frame["trial"]) == [-1, -1]
        assert set(frame["seed"]) == {5}
        assert set(frame["config_hash"]) == {config_digest(config)}


class TestConditioning:
    """Conditioning constants across schedules and thresholds."""

    def test_rows_per_threshold(self):
        config = make_config(kind="conditioning", settings={"epsilons": [1e-2, 1e-8]})
        result = run_conditioning_sweep(config)
        assert len(result.rows) == 4
        assert [r.epsilon for r in result.rows] == [1e-2, 1e-8, 1e-2, 1e-8]
        assert len(result.records) == 2 * 3 * 2
        for row in result.rows:
            assert row.trials_ok == 3
            assert row.universal_cap == pytest.approx(1 / (np.sqrt(0.75) * row.epsilon))

    def test_universal_cap_when_undersampled(self):
        config = make_config(kind="conditioning",
                             schedule={"mode": "degree", "values": [2, 4],
                                       "rules": [{"kind": "linear", "constant": 1.0}]},
                             settings={"epsilons": [1e-1, 1e-2, 1e-4], "gram_points": 20_000, "trials": 5})
        result = run_conditioning_sweep(config)
        cap = {r.epsilon: r.universal_cap for r in result.rows}
        for record in result.records:
            assert record.M == record.N
            assert record.c_max <= cap[record.epsilon] * (1 + 3 * record.c_max_spread)

    def test_condition_reports_written(self, tmp_path):
        config = make_config(kind="conditioning", settings={"epsilons": [1e-2, 1e-8], "trials": 2})
        result = run_conditioning_sweep(config, ResultStore(tmp_path))
        assert [p.name for p in result.paths] == [
            "conditioning_l_shape_d2.csv", "conditioning_l_shape_d2_trials.csv",
            "conditioning_l_shape_d2_conditions.json",
        ]
        _, frame = read_table(result.paths[0])
        assert set(frame["trial"]) == {-1}
        assert set(frame["config_hash"]) == {config_digest(config)}
        artifact = read_json(result.paths[2])
        assert artifact["config_hash"] == config_digest(config)
        reports = artifact["reports"]
        assert len(reports) == 2 * 2 * 2
        assert {(r["schedule_index"], r["trial"]) for r in reports} == {(0, 0), (0, 1), (1, 0), (1, 1)}
        for report in reports:
            assert report["c_max"] == max(report["c_prime"], report["c_double_prime"])
            assert report["epsilon"] in (1e-2, 1e-8)

    def test_half_interval_is_ill_conditioned(self):
        config = apply_overrides(load_config(CONFIG_DIR / "illconditioning_slab.toml"), trials=3)
        rows = run_conditioning_sweep(config).rows
        assert [r.N for r in rows] == [5, 10, 15]
        for row in rows:
            assert row.M == 50 * row.N
            assert row.condition_number > cond_lower_bound_1d(row.N, 1.0)
        assert rows[-1].condition_number > 1e6

    def test_chernoff_sample_counts(self):
        config = load_config(CONFIG_DIR / "complexity_lshape_chernoff.toml")
        result = run_conditioning_sweep(config)
        assert [r.N for r in result.rows] == [6, 10, 15]
        for row in result.rows:
            assert row.trials_ok == 50
            assert row.fraction_c_unregularized_above <= 0.2


class TestErrorMap:
    """Single fit evaluated on a grid."""

    def test_sentinel_outside_domain(self):
        config = make_config(kind="errormap", target={"id": "expmean"}, settings={"grid_size": 21})
        result = run_error_map(config)
        assert len(result.rows) == 21 * 21
        outside = [r for r in result.rows if not r.inside]
        assert len(outside) == 100 == result.extras["outside_count"]
        assert all(r.abs_error == -1.0 for r in outside)
        assert result.extras["max_abs_error"] == max(r.abs_error for r in result.rows if r.inside)
        assert len(result.records) == 1 and result.records[0].schedule_index == 1

    def test_polynomial_target(self, tmp_path):
        config = make_config(kind="errormap", index_set="hyperbolic_cross",
                             target={"id": "basis_function", "multi_index": [1, 2]},
                             schedule={"mode": "degree", "values": [5],
                                       "rules": [{"kind": "linear", "constant": 4.0}]},
                             settings={"grid_size": 16})
        result = run_error_map(config, ResultStore(tmp_path))
        assert result.extras["max_abs_error"] < 1e-8
        record = result.records[0]
        assert all((r.trial, r.seed, r.config_hash) == (0, record.seed, record.config_hash)
                   for r in result.rows)
        _, frame = read_table(tmp_path / "errormap_l_shape_d2.csv")
        assert set(frame["seed"]) == {record.seed}
        artifact = read_json(tmp_path / "errormap_l_shape_d2_fit.json")
        solution = artifact["solution"]
        assert set(solution) == {"epsilon", "retained_rank", "singular_values", "coefficients",
                                 "residual_norm", "index_set_descriptor", "basis_descriptor", "seed"}
        assert solution["index_set_descriptor"] == "dim=2 kind=hyperbolic_cross n=5"
        assert solution["basis_descriptor"] == "legendre"
        assert solution["seed"] == record.seed
        assert len(solution["coefficients"]) == record.N


class TestBounds:
    """Measured quantities against their theoretical bounds."""

    def test_corner_cosmean(self):
        config = make_config(kind="bounds", domain={"kind": "corner", "dimension": 3},
                             target={"id": "cosmean"}, bounds={"delta": 0.5, "gamma": 0.1},
                             schedule={"mode": "degree", "values": [1, 2],
                                       "rules": [{"kind": "linear", "constant": 10.0}]},
                             settings={"trials": 8})
        result = run_bounds(config)
        checks = {r.check for r in result.rows}
        assert checks == {"error_bound", "coefficient_bound", "universal_cap",
                          "truncation_contraction", "truncated_expectation"}
        assert result.extras["violations"] == 0
        expectation = [r for r in result.rows if r.check == "truncated_expectation"]
        assert len(expectation) == 2 and all(r.trial == -1 for r in expectation)

    def test_l_shape_expmean(self, tmp_path):
        config = make_config(kind="bounds", target={"id": "expmean"},
                             settings={"trials": 4, "quadrature_order": 12})
        result = run_bounds(config, ResultStore(tmp_path))
        assert result.extras["violations"] == 0
        assert all(isinstance(r, TrialRecord) for r in result.records)
        reports = read_json(tmp_path / "bounds_l_shape_d2_conditions.json")["reports"]
        assert len(reports) == 2 * 4
        assert {r["trial"] for r in reports} == {0, 1, 2, 3}
        _, frame = read_table(tmp_path / "bounds_l_shape_d2.csv")
        assert set(frame["config_hash"]) == {config_digest(config)}

    def test_unknown_bound_is_config_error(self):
        config = make_config(kind="bounds", target={"id": "invsqrt"}, settings={"trials": 1})
        with pytest.raises(ConfigError):
            run_bounds(config)


class TestCli:
    """Exit codes and outputs of the command line."""

    def test_complexity(self, capsys):
        code = main(["complexity", "--n-basis", "10", "--lam", str(2 / 3), "--delta", "0.5", "--gamma", "0.01"])
        assert code == 0
        assert capsys.readouterr().out.strip() == "6754"

    def test_missing_config(self, tmp_path):
        assert main(["converge", "--config", str(tmp_path / "nope.toml")]) == 2

    def test_kind_mismatch(self, tmp_path):
        code = main(["converge", "--config", str(CONFIG_DIR / "illconditioning_slab.toml"),
                     "--out", str(tmp_path)])
        assert code == 2

    def test_indexset(self, tmp_path):
        out = tmp_path / "hc.txt"
        assert main(["indexset", "--kind", "hyperbolic_cross", "--n", "3", "--d", "2", "--out", str(out)]) == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 9

    def test_sample(self, tmp_path):
        out = tmp_path / "y.csv"
        assert main(["sample", "--domain", "annulus", "--outer-radius", "0.5", "--count", "25",
                     "--seed", "4", "--out", str(out)]) == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 27

    def test_sampling_failure_exit_code(self, tmp_path):
        code = main(["sample", "--domain", "circle", "--radius", "1e-4", "--count", "1",
                     "--out", str(tmp_path / "y.csv")])
        assert code == 4

    def test_validate(self, capsys):
        assert main(["validate", "--config", str(CONFIG_DIR / "illconditioning_slab.toml")]) == 0
        out = capsys.readouterr().out
        assert "illconditioning_slab [conditioning]" in out
        assert "M=750" in out

    def test_run_experiment(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            '[experiment]\nkind = "converge"\nname = "tiny"\ntrials = 2\nerror_points = 200\n'
            '[domain]\nkind = "linear_constraint"\n'
            '[index_set]\nkind = "total_degree"\n'
            '[schedule]\nvalues = [1, 2]\nrules = [{ kind = "linear", constant = 4 }]\n',
            encoding="utf-8",
        )
        assert main(["converge", "--config", str(path), "--out", str(tmp_path / "out"), "--seed", "3"]) == 0
        config, frame = read_table(tmp_path / "out" / "tiny.csv")
        assert config["seed"] == 3
        assert list(frame["N"]) == [3, 6]


@pytest.mark.slow
class TestFigureScale:
    """Shipped figure configurations at full size."""

    def test_circle_regimes(self):
        linear = load_config(CONFIG_DIR / "conditioning_circle_r1.toml")
        rows = [r for r in run_experiment(linear).rows
                if r.rule.startswith("linear") and r.epsilon == 1e-8]
        assert rows[-1].c_max > 1e3

        loglinear = load_config(CONFIG_DIR / "conditioning_circle_r05.toml")
        rows = [r for r in run_experiment(loglinear).rows
                if r.rule.startswith("loglinear") and r.epsilon == 1e-8]
        assert all(r.c_max < 10 for r in rows)

    def test_truncated_estimator(self):
        config = load_config(CONFIG_DIR / "bounds_corner_cosmean.toml")
        assert config.experiment == ExperimentKind.BOUNDS
        result = run_bounds(config)
        assert result.extras["violations"] == 0

    @pytest.mark.parametrize("name", [
        "bounds_l_shape_expmean",
        "bounds_linear_constraint_expmean",
        "bounds_disc_exclusion_expmean",
        "bounds_annulus_expmean",
    ])
    def test_error_bounds(self, name):
        result = run_bounds(load_config(CONFIG_DIR / f"{name}.toml"))
        assert result.extras["violations"] == 0
