import copy

import numpy as np
import pytest

from src.certificates.checkers import (
    ExceedanceChecker,
    PerturbationSeriesChecker,
    RootConditionChecker,
    SmoothnessChecker,
    StepScheduleChecker,
    ThreeSeriesChecker,
    create_certificate_checker,
)
from src.core.models import Regime, Verdict
from src.noise.certificates import analytic_bounds
from src.services.factory import Experiment, build_experiment, parse_config


def experiment_from(data: dict, **sections) -> Experiment:
    updated = copy.deepcopy(data)
    updated.update(sections)
    return build_experiment(parse_config(updated))


def verdicts(results) -> dict[str, Verdict]:
    return {r.name: r.verdict for r in results}


@pytest.fixture
def lp_experiment(small_config_data) -> Experiment:
    return experiment_from(
        small_config_data,
        regime="lp_pointwise",
        space={"norm_kind": "lp", "p": 1.0, "m": 21},
        problem={"kind": "pointwise_monotone", "monotone": "arctan", "target": {"shape": "sine"}},
        noise={"kind": "heavy_tailed_pointwise", "bounds": "remark"},
        schedule={"kind": "log_harmonic"},
    )


@pytest.fixture
def smooth_experiment(small_config_data) -> Experiment:
    return experiment_from(
        small_config_data,
        regime="smooth_truncated",
        space={"norm_kind": "lp", "p": 2.0, "m": 21, "smoothness": {"p_smooth": 2.0, "D": 2.0}},
        problem={"kind": "kernel_contraction", "gamma": 0.5, "target": {"shape": "ramp"}},
        noise={"kind": "heavy_tailed_global", "bounds": "analytic"},
    )


def deterministic_experiment(data: dict, z: str) -> Experiment:
    run = dict(data["run"], engine="deterministic")
    return experiment_from(
        data,
        regime="deterministic",
        run=run,
        deterministic={"z": z, "h": {"shape": "constant", "amplitude": 0.02}},
    )


class TestIndividualCheckers:
    async def test_root_condition_for_contraction(self, small_config):
        results = await RootConditionChecker(n_samples=2000).check(build_experiment(small_config))
        assert len(results) == 1
        assert results[0].verdict == Verdict.PASS
        assert results[0].value <= 0.5 + 1e-9

    async def test_root_condition_with_bounds(self, lp_experiment):
        results = await RootConditionChecker(n_samples=2000).check(lp_experiment)
        assert [r.verdict for r in results] == [Verdict.PASS, Verdict.PASS]

    async def test_constant_step_fails_square_summability(self, small_config_data):
        experiment = experiment_from(small_config_data, schedule={"kind": "constant", "a": 0.1})
        results = verdicts(await StepScheduleChecker().check(experiment))
        assert results["sum alpha_n = inf"] == Verdict.PASS
        assert results["sum alpha_n^2 < inf"] == Verdict.FAIL

    async def test_short_custom_schedule_is_inconclusive(self, small_config_data):
        experiment = experiment_from(
            small_config_data,
            schedule={"kind": "custom", "values": [0.5] * 64},
        )
        results = await StepScheduleChecker().check(experiment)
        assert [r.verdict for r in results] == [Verdict.INCONCLUSIVE]

    async def test_smoothness_without_constant(self, small_config):
        results = await SmoothnessChecker(n_pairs=10).check(build_experiment(small_config))
        assert results[0].verdict == Verdict.INCONCLUSIVE

    async def test_three_series_needs_pareto_for_analytic_bounds(self, small_config):
        checker = ThreeSeriesChecker(Regime.LP_POINTWISE)
        results = await checker.check(build_experiment(small_config))
        assert [r.verdict for r in results] == [Verdict.INCONCLUSIVE]

    def test_pointwise_bounds_use_space_exponent(self, small_config_data):
        experiment = experiment_from(
            small_config_data,
            regime="lp_pointwise",
            space={"norm_kind": "lp", "p": 2.0, "m": 21},
            problem={"kind": "pointwise_monotone", "monotone": "arctan", "target": {"shape": "sine"}},
            noise={"kind": "heavy_tailed_pointwise", "tail_exponent": 2.5, "bounds": "analytic"},
            schedule={"kind": "log_harmonic"},
        )
        bounds = ThreeSeriesChecker(Regime.LP_POINTWISE).bounds(experiment, 256)
        second = analytic_bounds(experiment.noise, experiment.schedule, 256, 2.0)
        first = analytic_bounds(experiment.noise, experiment.schedule, 256, 1.0)
        assert np.array_equal(bounds.delta, second.delta)
        assert not np.allclose(bounds.delta, first.delta)

    async def test_exceedance_skips_other_noise(self, small_config):
        assert await ExceedanceChecker().check(build_experiment(small_config)) == []

    async def test_perturbation_series(self, small_config_data):
        summable = deterministic_experiment(small_config_data, "summable_alternating")
        constant = deterministic_experiment(small_config_data, "constant")
        checker = PerturbationSeriesChecker(horizon=4096)
        assert (await checker.check(summable))[0].verdict == Verdict.PASS
        assert (await checker.check(constant))[0].verdict == Verdict.FAIL


class TestComprehensiveChecker:
    async def test_gaussian_regime(self, small_config):
        report = await create_certificate_checker(Regime.GAUSSIAN).check_all(build_experiment(small_config))
        names = verdicts(report.results)
        assert report.regime == Regime.GAUSSIAN
        assert report.passed
        assert names["gaussian marginal Z(1) ~ N(0, sigma^2)"] == Verdict.PASS
        assert "Doob maximal ratio <= 4" not in names

    async def test_martingale_regime(self, small_config_data):
        experiment = experiment_from(
            small_config_data,
            regime="martingale",
            noise={"kind": "martingale", "sigma": 1.0},
        )
        report = await create_certificate_checker(Regime.MARTINGALE).check_all(experiment)
        assert verdicts(report.results)["Doob maximal ratio <= 4"] == Verdict.PASS
        assert report.passed

    async def test_constant_step_fails(self, small_config_data):
        experiment = experiment_from(small_config_data, schedule={"kind": "constant", "a": 0.1})
        report = await create_certificate_checker(Regime.GAUSSIAN).check_all(experiment)
        assert not report.passed

    async def test_lp_pointwise_regime(self, lp_experiment):
        report = await create_certificate_checker(Regime.LP_POINTWISE).check_all(lp_experiment)
        results = verdicts(report.results)
        assert results["sum alpha*delta < inf"] == Verdict.PASS
        assert results["sum alpha^2*sigma^2 < inf"] == Verdict.PASS
        assert report.passed

    async def test_smooth_truncated_regime(self, smooth_experiment):
        report = await create_certificate_checker(Regime.SMOOTH_TRUNCATED).check_all(smooth_experiment)
        results = verdicts(report.results)
        assert results["p-uniform smoothness (p=2, D=2)"] == Verdict.PASS
        assert results["tail probability cross-check"] == Verdict.PASS
        assert report.passed

    async def test_deterministic_regime(self, small_config_data):
        experiment = deterministic_experiment(small_config_data, "summable_alternating")
        report = await create_certificate_checker(Regime.DETERMINISTIC).check_all(experiment)
        assert verdicts(report.results)["sum alpha*z < inf"] == Verdict.PASS
        assert report.passed
