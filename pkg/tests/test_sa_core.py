import copy
from pathlib import Path

import numpy as np
import pytest

from src.certificates.checkers import ThreeSeriesChecker
from src.core.exceptions import ContractViolation, NumericDivergence
from src.core.models import EngineKind, Regime, SeriesVerdict, Verdict
from src.diagnostics.convergence import checkpoint_summary, doob_statistics
from src.noise.certificates import three_series_certificate
from src.noise.samplers import GaussianIIDNoise, MartingaleNoise
from src.operators.problems import MonotoneBounds, RootProblem, linear_contraction, pointwise_monotone
from src.sa_core.accumulate import CompensatedSum, LogProduct
from src.sa_core.engine import (
    checkpoint_indices,
    partial_noise_sum,
    run_controlled,
    run_deterministic,
    run_stochastic,
)
from src.sa_core.policies import (
    ClippedNormLambda,
    ConstantLambda,
    ConstantSequence,
    RunningMaxLambda,
    SummableAlternatingSequence,
    ZeroSequence,
)
from src.sa_core.weighted_sums import partition_identity, tail_products, weighted_tail_sums
from src.schedule.steps import StepSchedule
from src.services.factory import build_experiment, load_config, parse_config
from src.space.grid import SpaceDescriptor

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def sine(t):
    return np.sin(2.0 * np.pi * t)


def random_beta(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.uniform(1e-3, 0.999, size=size)


def contraction_config(data: dict, **run) -> dict:
    """작은 설정 dict 를 복사해 run 항목만 바꾼다"""
    updated = copy.deepcopy(data)
    updated["run"].update(run)
    return updated


class TestAccumulate:
    def test_compensated_sum_beats_naive(self):
        total = CompensatedSum((1,))
        naive = np.zeros(1)
        total.add(np.array([1.0]))
        naive += 1.0
        for _ in range(10_000):
            total.add(np.array([1e-16]))
            naive += 1e-16
        assert total.value()[0] == pytest.approx(1.0 + 1e-12, rel=1e-15)
        assert naive[0] == 1.0

    def test_reset(self):
        total = CompensatedSum((2,))
        total.add(np.ones(2))
        total.reset()
        assert np.all(total.value() == 0.0)

    def test_log_product(self):
        product = LogProduct()
        for beta in (0.5, 0.5, 0.5):
            product.multiply(beta)
        assert product.value() == pytest.approx(0.125)
        product.multiply(1.0)
        assert product.value() == 0.0


class TestPartitionIdentity:
    def test_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            m = int(rng.integers(0, 50))
            n = m + int(rng.integers(0, 1000))
            beta = random_beta(rng, n + 1)
            assert abs(partition_identity(beta, m, n) - 1.0) <= 1e-12

    def test_empty_product_is_one(self):
        assert tail_products([0.3, 0.4, 0.5], 0, 2)[-1] == 1.0

    @pytest.mark.parametrize("beta, m, n", [([0.5, 0.5], 1, 0), ([0.5], 0, 3), ([0.5, 1.0], 0, 1)])
    def test_invalid_arguments(self, beta, m, n):
        with pytest.raises(ValueError):
            partition_identity(beta, m, n)


class TestWeightedSums:
    def test_abel_rearrangement_matches_direct_sum(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            m = int(rng.integers(0, 20))
            n = m + int(rng.integers(1, 200))
            beta = random_beta(rng, n + 1)
            alpha = beta / 4.0
            phi = np.cumsum(rng.uniform(0.0, 1.0, size=n + 1))
            z = rng.standard_normal((n + 1, 5, 1))
            sums = weighted_tail_sums(z, phi, beta, alpha, m, n)
            for direct, rearranged in ((sums.b, sums.b_abel), (sums.w, sums.w_abel)):
                scale = max(1.0, float(np.max(np.abs(direct.values))))
                assert np.max(np.abs(direct.values - rearranged.values)) <= 1e-10 * scale

    def test_decreasing_phi_is_rejected(self):
        z = np.ones((4, 3, 1))
        beta = np.full(4, 0.5)
        with pytest.raises(ValueError):
            weighted_tail_sums(z, [1.0, 2.0, 1.5, 3.0], beta, beta, 0, 3)

    def test_unit_phi_gives_b(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((10, 3, 1))
        beta = np.full(10, 0.2)
        sums = weighted_tail_sums(z, np.ones(10), beta, beta, 2, 9)
        assert np.allclose(sums.w.values, sums.b.values)
        assert np.allclose(sums.a.values, (0.2 * z[2:]).sum(axis=0))


class TestCheckpoints:
    def test_dyadic(self):
        assert checkpoint_indices(10) == [1, 2, 4, 8, 10]
        assert checkpoint_indices(9, base=3) == [1, 3, 9]

    def test_partial_noise_sum(self):
        samples = np.ones((8, 3, 1))
        schedule = StepSchedule.constant(0.25)
        assert np.allclose(partial_noise_sum(samples, schedule, 3).values, 1.0)
        with pytest.raises(ValueError):
            partial_noise_sum(samples, schedule, 8)


class TestStochasticEngine:
    def test_zero_noise_is_geometric(self, sup_space):
        x_star = sup_space.element(sine)
        problem = linear_contraction(0.5, x_star, sup_space)
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        trajectory = run_stochastic(
            problem, GaussianIIDNoise(sup_space, sigma=0.0), schedule, sup_space.zero(), 200, seed=0
        )
        factors = np.concatenate([[1.0], np.cumprod(1.0 - 0.5 * schedule.alphas(200))])
        assert np.allclose(trajectory.error_curve, factors * sup_space.norm(x_star), rtol=1e-12)
        assert trajectory.start_index == 0
        assert trajectory.engine == EngineKind.STOCHASTIC

    def test_same_seed_same_trajectory(self, sup_space):
        problem = linear_contraction(0.5, sup_space.element(sine), sup_space)
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        noise = GaussianIIDNoise(sup_space)
        first = run_stochastic(problem, noise, schedule, sup_space.zero(), 300, seed=4)
        second = run_stochastic(problem, GaussianIIDNoise(sup_space), schedule, sup_space.zero(), 300, seed=4)
        other = run_stochastic(problem, noise, schedule, sup_space.zero(), 300, seed=5)
        assert np.array_equal(first.error_curve, second.error_curve)
        assert not np.array_equal(first.error_curve, other.error_curve)

    def test_partial_sum_matches_samples(self, sup_space):
        problem = linear_contraction(0.5, sup_space.zero(), sup_space)
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        noise = GaussianIIDNoise(sup_space)
        trajectory = run_stochastic(problem, noise, schedule, sup_space.zero(), 100, seed=1)
        expected = partial_noise_sum(noise.samples(0, 100, seed=1), schedule, 99)
        assert np.allclose(trajectory.partial_sum.values, expected.values, atol=1e-14)

    def test_divergence_is_reported(self, sup_space):
        problem = RootProblem(
            problem_id="expanding",
            apply=lambda v: -1000.0 * v,
            x_star=sup_space.zero(),
            theta=1.0,
            rho=0.5,
            space=sup_space,
        )
        x0 = sup_space.element(lambda t: np.ones_like(t))
        with pytest.raises(NumericDivergence) as info:
            run_stochastic(
                problem, GaussianIIDNoise(sup_space, sigma=0.0), StepSchedule.constant(0.1), x0, 1000, seed=0
            )
        assert 0 < info.value.step < 1000
        assert np.isfinite(info.value.last_error)

    def test_start_index_is_skipped(self, sup_space):
        # theta = 4 이므로 alpha_0, alpha_1 은 건너뛴다
        problem = pointwise_monotone(
            lambda t, v: 1.5 * (v - sine(t)),
            MonotoneBounds(c1=1.0, c2=2.0),
            sup_space,
            x_star=sup_space.element(sine),
        )
        trajectory = run_stochastic(
            problem, GaussianIIDNoise(sup_space), StepSchedule.log_harmonic(), sup_space.zero(), 16, seed=0
        )
        assert trajectory.start_index == 2
        assert trajectory.metadata().start_index == 2
        assert len(trajectory.iterates) == len(trajectory.checkpoints)


class TestControlledEngine:
    def test_lambda_bound_violation_aborts(self, sup_space):
        problem = linear_contraction(0.5, sup_space.element(sine), sup_space)
        with pytest.raises(ContractViolation) as info:
            run_controlled(
                problem,
                GaussianIIDNoise(sup_space),
                StepSchedule.power_law(1.0, 10.0, 1.0),
                ConstantLambda(2.0),
                1.0,
                sup_space.zero(),
                100,
                seed=0,
            )
        assert info.value.step == 0

    def test_unit_lambda_matches_stochastic(self, sup_space):
        problem = linear_contraction(0.5, sup_space.element(sine), sup_space)
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        noise = GaussianIIDNoise(sup_space)
        plain = run_stochastic(problem, noise, schedule, sup_space.zero(), 1000, seed=5)
        controlled = run_controlled(
            problem, noise, schedule, ConstantLambda(1.0), 1.0, sup_space.zero(), 1000, seed=5
        )
        assert np.array_equal(controlled.error_curve, plain.error_curve)
        assert all(a == b for a, b in zip(controlled.iterates, plain.iterates, strict=True))
        assert controlled.final == plain.final
        assert controlled.partial_sum == plain.partial_sum

    @pytest.mark.parametrize("policy", [ClippedNormLambda(), RunningMaxLambda()])
    def test_ratio_stays_bounded(self, sup_space, policy):
        problem = linear_contraction(0.5, sup_space.element(sine), sup_space)
        trajectory = run_controlled(
            problem,
            GaussianIIDNoise(sup_space),
            StepSchedule.power_law(1.0, 10.0, 1.0),
            policy,
            1.0,
            sup_space.zero(),
            2000,
            seed=3,
        )
        assert trajectory.chi_curve is not None
        assert np.all(np.abs(trajectory.chi_curve) <= 1.0)
        assert trajectory.final_error < trajectory.error_curve[0]

    def test_bound_constant_must_be_positive(self, sup_space):
        problem = linear_contraction(0.5, sup_space.zero(), sup_space)
        with pytest.raises(ValueError):
            run_controlled(
                problem, GaussianIIDNoise(sup_space), StepSchedule.constant(0.1),
                ConstantLambda(), 0.0, sup_space.zero(), 10, seed=0,
            )


class TestDeterministicEngine:
    def setup_problem(self, space, amplitude=0.02):
        x_star = space.element(lambda t: amplitude * sine(t))
        return linear_contraction(0.5, x_star, space)

    def test_zero_sequence(self, sup_space):
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        trajectory = run_deterministic(
            self.setup_problem(sup_space), ZeroSequence(sup_space.m), schedule, False, sup_space.zero(), 500
        )
        assert trajectory.seed is None
        assert np.all(np.diff(trajectory.error_curve) <= 0.0)

    def test_summable_sequence_converges(self):
        space = SpaceDescriptor.sup(m=101)
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        h = np.full((space.m, 1), 0.02)
        trajectory = run_deterministic(
            self.setup_problem(space), SummableAlternatingSequence(schedule, h), schedule, False,
            space.zero(), 100_000,
        )
        assert trajectory.final_error < 1e-3

    def test_constant_sequence_converges_to_shifted_point(self, sup_space):
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        h = np.full((sup_space.m, 1), 0.02)
        problem = self.setup_problem(sup_space)
        trajectory = run_deterministic(
            problem, ConstantSequence(h), schedule, False, sup_space.zero(), 20_000
        )
        # (1 - gamma)(x - x*) = h
        offset = 0.02 / (1.0 - 0.5)
        assert trajectory.final_error == pytest.approx(offset, rel=0.1)
        shifted = problem.x_star.values + offset
        assert np.max(np.abs(trajectory.final.values - shifted)) < 0.1 * offset

    def test_psi_scaling_keeps_convergence(self, sup_space):
        schedule = StepSchedule.power_law(1.0, 10.0, 1.0)
        h = np.full((sup_space.m, 1), 0.02)
        trajectory = run_deterministic(
            self.setup_problem(sup_space), SummableAlternatingSequence(schedule, h), schedule, True,
            sup_space.zero(), 20_000, c_bound=1.0,
        )
        assert np.all(trajectory.psi_curve >= 1.0)
        assert trajectory.final_error < 5e-3


@pytest.mark.slow
class TestRegimes:
    """시드 여러 개의 데스크 규모 수렴 실험"""

    def run_seeds(self, data: dict, seeds: range) -> tuple[np.ndarray, list[int]]:
        experiment = build_experiment(parse_config(data))
        trajectories = [experiment.run(seed) for seed in seeds]
        return np.stack([t.error_curve for t in trajectories]), trajectories[0].checkpoints

    def regime_data(self, small_config_data: dict, noise: str) -> dict:
        data = contraction_config(small_config_data, n_steps=100_000)
        data["space"]["m"] = 101
        data["noise"]["kind"] = noise
        return data

    @pytest.mark.parametrize("noise", ["gaussian_iid", "martingale"])
    def test_convergence_and_plateau(self, small_config_data, noise):
        data = self.regime_data(small_config_data, noise)
        curves, checkpoints = self.run_seeds(data, range(50))
        stats = checkpoint_summary(curves, checkpoints)
        medians = [s.median for s in stats[-4:]]
        assert stats[-1].median < 0.05
        assert all(later < earlier for earlier, later in zip(medians, medians[1:]))

        data["schedule"] = {"kind": "constant", "a": 0.1}
        plateau, _ = self.run_seeds(contraction_config(data, n_steps=20_000), range(10))
        assert float(np.median(plateau[:, -1])) > 3.0 * stats[-1].median

    def test_martingale_doob_ratio(self, sup_space):
        ratio, stderr = doob_statistics(MartingaleNoise(sup_space), 10_000, seed=0)
        assert ratio <= 4.0 + 3.0 * stderr

    def test_pointwise_heavy_tails_improve(self):
        config = load_config(CONFIGS / "lp_pointwise.toml")
        assert (config.run.n_steps, len(config.seed_list)) == (1_000_000, 50)
        experiment = build_experiment(config)

        bounds = ThreeSeriesChecker(Regime.LP_POINTWISE).bounds(experiment, 1 << 20)
        report = three_series_certificate(bounds, experiment.schedule, Regime.LP_POINTWISE)
        assert report.verdict == Verdict.PASS
        assert report.schedule_divergent == SeriesVerdict.DIVERGES

        early, final = [], []
        for seed in config.seed_list:
            curve = experiment.run(seed).error_curve
            early.append(curve[1000])
            final.append(curve[-1])
        assert np.median(final) < np.median(early)
