import asyncio
import logging
from typing import Optional

import numpy as np

from src.core.config import settings
from src.core.models import (
    BoundsKind,
    CertificateReport,
    CertificateResult,
    NoiseKind,
    Regime,
    SeriesReport,
    SeriesVerdict,
    Verdict,
)
from src.diagnostics.convergence import (
    doob_statistics,
    increment_second_moment_check,
    ks_gaussian_check,
    tail_report,
)
from src.interfaces.certificate_checker import CertificateCheckerInterface, CompositeCheckerInterface
from src.noise.certificates import (
    CertificateBounds,
    analytic_bounds,
    estimate_exceedance,
    pareto_exceedance,
    remark_bounds,
    three_series_certificate,
)
from src.noise.samplers import HeavyTailedGlobalNoise, _ParetoNoise
from src.operators.problems import MIN_RADIUS, node_functional_certificate, verify_r2
from src.sa_core.accumulate import CompensatedSum
from src.schedule.steps import robbins_monro_report, start_index
from src.services.factory import Experiment
from src.space.grid import empirical_smoothness_constant

logger = logging.getLogger(__name__)

_SERIES_VERDICT = {
    SeriesVerdict.CONVERGES: Verdict.PASS,
    SeriesVerdict.DIVERGES: Verdict.FAIL,
    SeriesVerdict.INCONCLUSIVE: Verdict.INCONCLUSIVE,
}


def _series_detail(report: SeriesReport) -> str:
    parts = [f"last_block={report.last_block:.3e}"]
    if report.exponent is not None:
        parts.append(f"exponent={report.exponent:.3f}")
    if report.tail_estimate is not None:
        parts.append(f"tail~{report.tail_estimate:.3e}")
    return ", ".join(parts)


def _series_result(report: SeriesReport, expected: SeriesVerdict) -> CertificateResult:
    """급수 판정을 기대 판정과 비교한 결과"""
    if report.verdict == SeriesVerdict.INCONCLUSIVE:
        verdict = Verdict.INCONCLUSIVE
    elif report.verdict == expected:
        verdict = Verdict.PASS
    else:
        verdict = Verdict.FAIL
    issues = [] if verdict == Verdict.PASS else [f"{report.name}: {report.verdict.value}"]
    return CertificateResult(
        name=f"{report.name} {'= inf' if expected == SeriesVerdict.DIVERGES else '< inf'}",
        verdict=verdict,
        value=report.partial_sums[-1] if report.partial_sums else None,
        detail=_series_detail(report),
        issues=issues,
    )


def _horizon(experiment: Experiment) -> int:
    return experiment.schedule.horizon or settings.certificate_horizon


class RootConditionChecker(CertificateCheckerInterface):
    """||G(x)/theta - (x - x*)|| <= rho ||x - x*|| 표본 검사와 노드 범함수 검사"""

    def __init__(self, n_samples: Optional[int] = None, seed: int = 0):
        self.n_samples = n_samples or settings.r2_samples
        self.seed = seed

    def _radius(self, experiment: Experiment) -> float:
        distance = experiment.problem.error(experiment.x0)
        return 10.0 * distance if distance > MIN_RADIUS else 1.0

    async def check(self, experiment: Experiment) -> list[CertificateResult]:
        problem = experiment.problem
        radius = self._radius(experiment)
        ratio = await asyncio.to_thread(verify_r2, problem, self.n_samples, radius, self.seed)
        limit = problem.rho + settings.r2_tolerance
        results = [
            CertificateResult(
                name="root condition ratio <= rho",
                verdict=Verdict.PASS if ratio <= limit else Verdict.FAIL,
                value=ratio,
                detail=f"theta={problem.theta:g}, rho={problem.rho:g}, radius={radius:g}",
                issues=[] if ratio <= limit else [f"표본 최대 비율 {ratio:.6g} > {limit:.6g}"],
            )
        ]

        if problem.bounds is not None:
            report = await asyncio.to_thread(
                node_functional_certificate, problem, self.n_samples, self.seed, radius
            )
            issues = []
            if report.sign_violations:
                issues.append(f"부호 불일치 {report.sign_violations} 회")
            if not report.passed:
                issues.append(
                    f"비율 범위 [{report.min_ratio:.6g}, {report.max_ratio:.6g}]"
                    f" 가 [{report.c1:g}, {report.c2:g}] 밖입니다"
                )
            results.append(
                CertificateResult(
                    name="node functional c1 <= ratio <= c2",
                    verdict=Verdict.PASS if report.passed else Verdict.FAIL,
                    value=report.max_ratio,
                    detail=f"min={report.min_ratio:.6g}, max={report.max_ratio:.6g}",
                    issues=issues,
                )
            )
        return results


class StepScheduleChecker(CertificateCheckerInterface):
    """sum alpha_n = inf (항상) 와 sum alpha_n^2 < inf (선택)"""

    def __init__(self, require_square_summable: bool = True):
        self.require_square_summable = require_square_summable

    async def check(self, experiment: Experiment) -> list[CertificateResult]:
        n_max = _horizon(experiment)
        try:
            report = await asyncio.to_thread(robbins_monro_report, experiment.schedule, n_max)
        except ValueError as e:
            return [
                CertificateResult(
                    name="step schedule", verdict=Verdict.INCONCLUSIVE, detail=str(e), issues=[str(e)]
                )
            ]

        results = [_series_result(report.alpha, SeriesVerdict.DIVERGES)]
        if self.require_square_summable:
            results.append(_series_result(report.alpha_sq, SeriesVerdict.CONVERGES))
        return results


class SmoothnessChecker(CertificateCheckerInterface):
    """표본 쌍으로 추정한 최소 D 가 선언된 D 이하인지"""

    def __init__(self, n_pairs: Optional[int] = None, seed: int = 0):
        self.n_pairs = n_pairs or settings.smoothness_pairs
        self.seed = seed

    async def check(self, experiment: Experiment) -> list[CertificateResult]:
        smooth = experiment.space.smoothness
        if smooth is None:
            return [
                CertificateResult(
                    name="p-uniform smoothness",
                    verdict=Verdict.INCONCLUSIVE,
                    issues=["공간에 평활성 상수가 없습니다"],
                )
            ]
        estimate = await asyncio.to_thread(
            empirical_smoothness_constant, experiment.space, self.n_pairs, self.seed
        )
        limit = smooth.D * (1.0 + 1e-9) + 1e-12
        passed = estimate <= limit
        return [
            CertificateResult(
                name=f"p-uniform smoothness (p={smooth.p_smooth:g}, D={smooth.D:g})",
                verdict=Verdict.PASS if passed else Verdict.FAIL,
                value=estimate,
                detail=f"표본 최소 D = {estimate:.6g}",
                issues=[] if passed else [f"표본 D {estimate:.6g} > {smooth.D:g}"],
            )
        ]


class ThreeSeriesChecker(CertificateCheckerInterface):
    """절단 경계 수열로 만든 급수 인증서"""

    def __init__(self, regime: Regime):
        self.regime = regime

    def bounds(self, experiment: Experiment, n_max: int) -> CertificateBounds:
        """경계 수열 (노드별 체제의 delta_n 은 L^p 지수 차 모멘트, 그 외 1 차)"""
        if experiment.config.noise.bounds == BoundsKind.REMARK:
            return remark_bounds(n_max)
        if not isinstance(experiment.noise, _ParetoNoise):
            raise TypeError(f"{experiment.noise.kind.value}: 해석적 경계가 없는 잡음입니다")
        order = 1.0
        if self.regime == Regime.LP_POINTWISE and experiment.space.p is not None:
            order = experiment.space.p
        return analytic_bounds(experiment.noise, experiment.schedule, n_max, order)

    async def check(self, experiment: Experiment) -> list[CertificateResult]:
        n_max = _horizon(experiment)
        smooth = experiment.space.smoothness
        p_smooth = smooth.p_smooth if self.regime == Regime.SMOOTH_TRUNCATED and smooth else None
        try:
            bounds = self.bounds(experiment, n_max)
            report = await asyncio.to_thread(
                three_series_certificate, bounds, experiment.schedule, self.regime, p_smooth
            )
        except TypeError as e:
            return [CertificateResult(name="three series", verdict=Verdict.INCONCLUSIVE, issues=[str(e)])]
        except ValueError as e:
            logger.error("세 급수 인증서 계산 실패: %s", e)
            return [CertificateResult(name="three series", verdict=Verdict.FAIL, issues=[str(e)])]

        logger.info("세 급수 인증서 (%s): %s", report.regime, report.verdict.value)
        return [_series_result(series, SeriesVerdict.CONVERGES) for series in report.series]


class ExceedanceChecker(CertificateCheckerInterface):
    """P(||alpha_n Z_{n+1}|| >= 1) 의 해석값과 몬테카를로 추정 비교"""

    def __init__(self, steps: tuple[int, ...] = (0, 10, 100), replications: int = 20_000, seed: int = 0):
        self.steps = steps
        self.replications = replications
        self.seed = seed

    async def check(self, experiment: Experiment) -> list[CertificateResult]:
        model = experiment.noise
        if not isinstance(model, HeavyTailedGlobalNoise):
            return []
        schedule = experiment.schedule
        worst, issues = 0.0, []
        for n in self.steps:
            estimate, stderr = await asyncio.to_thread(
                estimate_exceedance, model, schedule, n, self.replications, self.seed
            )
            exact = float(
                pareto_exceedance(model.scale_at(n), model.tail_exponent, np.asarray(1.0 / schedule.alpha(n)))
            )
            gap = abs(estimate - exact)
            worst = max(worst, gap)
            # 이항 표준오차 4배 + 해상도 1/replications
            if gap > 4.0 * stderr + 1.0 / self.replications:
                issues.append(f"n={n}: 추정 {estimate:.4g} vs 해석 {exact:.4g}")
        return [
            CertificateResult(
                name="tail probability cross-check",
                verdict=Verdict.FAIL if issues else Verdict.PASS,
                value=worst,
                detail=f"steps={list(self.steps)}, replications={self.replications}",
                issues=issues,
            )
        ]


class NoiseChecker(CertificateCheckerInterface):
    """잡음 모델 검사: 가우스 주변분포, Doob 비율, 증분 2차 모멘트"""

    def __init__(self, replications: int = 10_000, seed: int = 0):
        self.replications = replications
        self.seed = seed

    async def _gaussian(self, experiment: Experiment) -> Optional[CertificateResult]:
        sigma = experiment.config.noise.sigma
        if sigma == 0.0:
            return None
        samples = experiment.noise.draw(self.replications, 0, self.seed)
        statistic, p_value = await asyncio.to_thread(ks_gaussian_check, samples[:, -1, 0], sigma)
        passed = p_value >= 1e-3
        return CertificateResult(
            name="gaussian marginal Z(1) ~ N(0, sigma^2)",
            verdict=Verdict.PASS if passed else Verdict.FAIL,
            value=p_value,
            detail=f"KS statistic={statistic:.4g}",
            issues=[] if passed else [f"KS p-value {p_value:.3g} < 1e-3"],
        )

    async def _doob(self, experiment: Experiment) -> CertificateResult:
        ratio, stderr = await asyncio.to_thread(
            doob_statistics, experiment.noise, self.replications, self.seed
        )
        limit = 4.0 + 3.0 * stderr
        return CertificateResult(
            name="Doob maximal ratio <= 4",
            verdict=Verdict.PASS if ratio <= limit else Verdict.FAIL,
            value=ratio,
            detail=f"SE={stderr:.3g}",
            issues=[] if ratio <= limit else [f"비율 {ratio:.4g} > {limit:.4g}"],
        )

    async def _increments(self, experiment: Experiment) -> CertificateResult:
        report = await asyncio.to_thread(
            increment_second_moment_check,
            experiment.noise,
            experiment.schedule,
            experiment.space,
            10,
            100,
            2000,
            self.seed,
        )
        # 진단용 점검이라 초과해도 FAIL 로 보지 않는다
        return CertificateResult(
            name="increment second moment <= K sum alpha^2",
            verdict=Verdict.PASS if report.passed else Verdict.INCONCLUSIVE,
            value=report.estimate,
            detail=f"bound={report.bound:.4g}, SE={report.stderr:.3g}",
            issues=[] if report.passed else [f"추정 {report.estimate:.4g} > {report.bound:.4g}"],
        )

    async def check(self, experiment: Experiment) -> list[CertificateResult]:
        results: list[CertificateResult] = []
        kind = experiment.noise.kind
        if kind == NoiseKind.GAUSSIAN_IID:
            gaussian = await self._gaussian(experiment)
            if gaussian is not None:
                results.append(gaussian)
        if kind == NoiseKind.MARTINGALE:
            results.append(await self._doob(experiment))
        if kind in (NoiseKind.GAUSSIAN_IID, NoiseKind.MARTINGALE):
            results.append(await self._increments(experiment))
        return results


class PerturbationSeriesChecker(CertificateCheckerInterface):
    """결정적 섭동 급수 sum alpha_n z_{n+1} 의 코시 꼬리 검사"""

    def __init__(self, horizon: Optional[int] = None):
        self.horizon = horizon

    def _length(self, experiment: Experiment) -> int:
        if self.horizon is not None:
            return self.horizon
        space = experiment.space
        # 스칼라 sup 노름만 윈도우 최대를 선형 시간에 계산한다
        return 1 << 14 if space.p is None and space.d == 1 else 1 << 11

    def _partial_sums(self, experiment: Experiment) -> np.ndarray:
        assert experiment.z_sequence is not None
        n0 = start_index(experiment.schedule, experiment.problem.theta)
        length = self._length(experiment)
        if experiment.schedule.horizon is not None:
            length = max(min(length, experiment.schedule.horizon - n0), 0)
        alphas = experiment.schedule.alphas(n0 + length)[n0:]
        space = experiment.space
        sums = np.empty((length + 1, space.m, space.d))
        total = CompensatedSum((space.m, space.d))
        sums[0] = total.current
        for k in range(length):
            total.add(alphas[k] * experiment.z_sequence.value(n0 + k))
            sums[k + 1] = total.current
        return sums

    async def check(self, experiment: Experiment) -> list[CertificateResult]:
        if experiment.z_sequence is None:
            return []
        sums = await asyncio.to_thread(self._partial_sums, experiment)
        last = sums.shape[0] - 1
        j_values = [1 << k for k in range(last.bit_length()) if 3 * (1 << k) <= last]
        try:
            report = await asyncio.to_thread(tail_report, sums, j_values, experiment.space)
        except ValueError as e:
            return [
                CertificateResult(name="sum alpha*z < inf", verdict=Verdict.INCONCLUSIVE, issues=[str(e)])
            ]
        verdict = _SERIES_VERDICT[report.verdict]
        return [
            CertificateResult(
                name="sum alpha*z < inf",
                verdict=verdict,
                value=report.sups[-1],
                detail=f"j={report.checkpoints[-1]}, window={report.windows[-1]}",
                issues=[] if verdict == Verdict.PASS else [f"꼬리 상한 {report.sups[-1]:.4g}"],
            )
        ]


class ComprehensiveCertificateChecker(CompositeCheckerInterface):
    """체제별 인증서 검사기 묶음"""

    def __init__(self, regime: Regime, checkers: list[CertificateCheckerInterface]):
        self.regime = regime
        self.checkers = checkers

    async def check_all(self, experiment: Experiment) -> CertificateReport:
        results: list[CertificateResult] = []
        for checker in self.checkers:
            found = await checker.check(experiment)
            for result in found:
                log = logger.warning if result.verdict == Verdict.FAIL else logger.info
                log("%s: %s", result.name, result.verdict.value)
            results.extend(found)
        return CertificateReport(regime=self.regime, results=results)


def create_certificate_checker(regime: Regime, seed: int = 0) -> ComprehensiveCertificateChecker:
    """체제별 인증서 검사기 생성"""
    checkers: list[CertificateCheckerInterface] = [RootConditionChecker(seed=seed)]

    # 1. 가우스/마팅게일: 스텝 두 조건 + 잡음 모델 검사
    if regime in (Regime.GAUSSIAN, Regime.MARTINGALE):
        checkers += [StepScheduleChecker(), NoiseChecker(seed=seed)]

    # 2. 평활 공간 절단: 평활성 + 세 급수 + 꼬리 확률 교차 검증
    elif regime == Regime.SMOOTH_TRUNCATED:
        checkers += [
            StepScheduleChecker(require_square_summable=False),
            SmoothnessChecker(seed=seed),
            ThreeSeriesChecker(regime),
            ExceedanceChecker(seed=seed),
        ]

    # 3. L^p 노드별 절단: 세 급수
    elif regime == Regime.LP_POINTWISE:
        checkers += [StepScheduleChecker(require_square_summable=False), ThreeSeriesChecker(regime)]

    # 4. 결정적: 섭동 급수의 코시 꼬리
    else:
        checkers += [StepScheduleChecker(require_square_summable=False), PerturbationSeriesChecker()]

    return ComprehensiveCertificateChecker(regime, checkers)
