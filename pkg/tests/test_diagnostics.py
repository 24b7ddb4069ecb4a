import numpy as np
import pytest

from src.core.exceptions import InsufficientDataError
from src.core.models import SeriesVerdict
from src.diagnostics.convergence import (
    checkpoint_summary,
    decay_fit,
    increment_second_moment_check,
    ks_gaussian_check,
    tail_report,
    tail_sup,
)
from src.noise.samplers import GaussianIIDNoise
from src.schedule.steps import StepSchedule
from src.space.grid import SpaceDescriptor


def linear_sums(count: int, m: int = 5) -> np.ndarray:
    """S_i = i (모든 노드)"""
    return np.arange(count, dtype=np.float64)[:, None, None] * np.ones((1, m, 1))


class TestTailSup:
    @pytest.mark.parametrize("space", [SpaceDescriptor.sup(m=5), SpaceDescriptor.lp(1.0, m=5)])
    def test_linear_sums(self, space):
        assert tail_sup(linear_sums(20), 3, 6, space) == pytest.approx(6.0)

    def test_scalar_sup_matches_all_pairs(self):
        space = SpaceDescriptor.sup(m=7)
        rng = np.random.default_rng(0)
        sums = np.cumsum(rng.standard_normal((40, 7, 1)), axis=0)
        block = sums[5:26]
        brute = max(
            float(np.max(np.abs(block[q] - block[i])))
            for i in range(block.shape[0])
            for q in range(i + 1, block.shape[0])
        )
        assert tail_sup(sums, 5, 20, space) == pytest.approx(brute, rel=1e-15)

    def test_vector_valued_uses_general_path(self):
        space = SpaceDescriptor.sup(m=4, d=2)
        sums = linear_sums(10, m=4) * np.ones((1, 1, 2))
        assert tail_sup(sums, 0, 4, space) == pytest.approx(4.0 * np.sqrt(2.0))

    def test_window_outside_data(self):
        with pytest.raises(InsufficientDataError):
            tail_sup(linear_sums(10), 5, 5, SpaceDescriptor.sup(m=5))
        with pytest.raises(ValueError):
            tail_sup(linear_sums(10), -1, 2, SpaceDescriptor.sup(m=5))


class TestTailReport:
    def test_constant_sums_converge(self):
        sums = np.ones((200, 5, 1))
        report = tail_report(sums, [1, 2, 4, 8, 16], SpaceDescriptor.sup(m=5))
        assert report.verdict == SeriesVerdict.CONVERGES
        assert report.windows == [2, 4, 8, 16, 32]

    def test_growing_sums_diverge(self):
        report = tail_report(linear_sums(200), [1, 2, 4, 8, 16, 32], SpaceDescriptor.sup(m=5))
        assert report.verdict == SeriesVerdict.DIVERGES

    def test_skips_windows_beyond_data(self):
        report = tail_report(linear_sums(20), [1, 4, 16], SpaceDescriptor.sup(m=5))
        assert report.checkpoints == [1, 4]

    def test_no_usable_window(self):
        with pytest.raises(InsufficientDataError):
            tail_report(linear_sums(5), [8], SpaceDescriptor.sup(m=5))


class TestDecayFit:
    def test_power_law_rate(self):
        n = np.arange(1, 1001, dtype=np.float64)
        curve = np.concatenate([[1.0], 3.0 * n ** -0.5])
        rate, intercept, r2 = decay_fit(curve)
        assert rate == pytest.approx(-0.5)
        assert intercept == pytest.approx(np.log(3.0))
        assert r2 == pytest.approx(1.0)

    def test_not_enough_points(self):
        with pytest.raises(InsufficientDataError):
            decay_fit(np.ones(5))


class TestSummaries:
    def test_checkpoint_summary(self):
        curves = np.array([[0.0, 1.0, 2.0, 3.0], [0.0, 3.0, 4.0, 5.0]])
        stats = checkpoint_summary(curves, [1, 3])
        assert [s.checkpoint for s in stats] == [1, 3]
        assert stats[0].median == 2.0
        assert stats[1].q25 == pytest.approx(3.5)
        assert stats[1].q75 == pytest.approx(4.5)

    def test_ks_rejects_wrong_scale(self):
        rng = np.random.default_rng(3)
        _, p_value = ks_gaussian_check(rng.normal(scale=2.0, size=2000), 1.0)
        assert p_value < 1e-6

    def test_increment_moment_in_hilbert_space(self, hilbert_space):
        report = increment_second_moment_check(
            GaussianIIDNoise(hilbert_space),
            StepSchedule.power_law(1.0, 10.0, 1.0),
            hilbert_space,
            m=10,
            n=50,
            replications=4000,
            seed=6,
        )
        assert report.alpha_sq_sum == pytest.approx(float(np.sum(1.0 / (np.arange(10, 51) + 10.0) ** 2)))
        assert report.estimate == pytest.approx(report.bound, rel=0.1)

    def test_increment_range(self, sup_space):
        with pytest.raises(ValueError):
            increment_second_moment_check(
                GaussianIIDNoise(sup_space), StepSchedule.constant(0.1), sup_space, 5, 4, 10, 0
            )
