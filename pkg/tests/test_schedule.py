import math

import numpy as np
import pytest

from src.core.models import ScheduleKind, ScheduleSpec, SeriesVerdict
from src.schedule.steps import StepSchedule, alpha, beta, robbins_monro_report, start_index


class TestStepSchedule:
    def test_power_law_values(self):
        s = StepSchedule.power_law(1.0, 10.0, 1.0)
        assert alpha(s, 0) == pytest.approx(0.1)
        assert alpha(s, 90) == pytest.approx(0.01)
        assert np.allclose(s.alphas(5), 1.0 / (np.arange(5) + 10.0))

    def test_log_harmonic(self):
        s = StepSchedule.log_harmonic()
        assert s.alpha(0) == pytest.approx(1.0 / (2.0 * math.log(2.0)))

    def test_alphas_with_offset(self):
        s = StepSchedule.power_law(1.0, 10.0, 0.6)
        assert np.allclose(s.alphas(20, start=5), s.alphas(20)[5:])

    def test_custom_horizon(self):
        s = StepSchedule.custom([0.5, 0.25, 0.125])
        assert s.horizon == 3
        with pytest.raises(ValueError):
            s.alphas(4)

    @pytest.mark.parametrize(
        "build",
        [
            lambda: StepSchedule.power_law(1.0, 1.0, 1.0),
            lambda: StepSchedule.constant(1.0),
            lambda: StepSchedule.custom([0.5, 1.5]),
            lambda: StepSchedule.custom([]),
        ],
    )
    def test_steps_must_lie_in_unit_interval(self, build):
        with pytest.raises(ValueError):
            build()

    def test_from_spec(self):
        spec = ScheduleSpec(kind=ScheduleKind.POWER_LAW, a=0.5, b=4.0, q=0.75)
        s = StepSchedule.from_spec(spec)
        assert s.describe() == {"kind": "power_law", "a": 0.5, "b": 4.0, "q": 0.75}

    def test_negative_index(self):
        with pytest.raises(ValueError):
            StepSchedule.constant(0.1).alpha(-1)


class TestStartIndex:
    def test_beta(self):
        s = StepSchedule.power_law(1.0, 10.0, 1.0)
        assert beta(s, 4.0, 0) == pytest.approx(0.4)
        with pytest.raises(ValueError):
            beta(s, 0.5, 0)

    def test_no_shift_when_theta_alpha_below_one(self):
        assert start_index(StepSchedule.power_law(1.0, 10.0, 1.0), 1.0) == 0

    def test_log_harmonic_with_theta_four(self):
        # 4 alpha_1 = 1.21, 4 alpha_2 = 0.72
        assert start_index(StepSchedule.log_harmonic(), 4.0) == 2

    def test_unreachable(self):
        with pytest.raises(ValueError):
            start_index(StepSchedule.constant(0.5), 4.0, limit=100)


class TestRobbinsMonro:
    def test_harmonic_schedule(self):
        report = robbins_monro_report(StepSchedule.power_law(1.0, 10.0, 1.0), 1 << 20)
        assert report.steps_diverge
        assert report.squares_converge
        assert report.alpha.checkpoints[-1] == 1 << 20

    def test_slow_power_law(self):
        report = robbins_monro_report(StepSchedule.power_law(1.0, 10.0, 0.6), 1 << 20)
        assert report.steps_diverge
        assert report.squares_converge

    def test_constant_step_squares_diverge(self):
        report = robbins_monro_report(StepSchedule.constant(0.1), 1 << 16)
        assert report.alpha_sq.verdict == SeriesVerdict.DIVERGES
        assert not report.squares_converge

    def test_summable_steps(self):
        report = robbins_monro_report(StepSchedule.power_law(0.5, 2.0, 2.0), 1 << 16)
        assert report.alpha.verdict == SeriesVerdict.CONVERGES
        assert not report.steps_diverge

    def test_records(self):
        report = robbins_monro_report(StepSchedule.log_harmonic(), 128)
        records = report.records()
        assert records[0]["checkpoint"] == 1
        assert set(records[0]["verdicts"]) == {"alpha", "alpha_sq"}

    def test_minimum_horizon(self):
        with pytest.raises(ValueError):
            robbins_monro_report(StepSchedule.log_harmonic(), 50)
