"""절단 분해의 경계 수열 (delta_n, mu_n, sigma_n^2) 과 세 급수 인증서"""
import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import bisect

from src.core.models import Regime, SeriesVerdict, ThreeSeriesReport, Verdict
from src.diagnostics.series import classify_series
from src.noise.samplers import HeavyTailedGlobalNoise, HeavyTailedPointwiseNoise, _ParetoNoise
from src.noise.truncation import below_threshold_mask
from src.schedule.steps import StepSchedule

logger = logging.getLogger(__name__)


class CertificateBounds(BaseModel):
    """경계 수열 (인덱스 n = 0..N-1)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    delta: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    tail_prob: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def _check_entries(self) -> "CertificateBounds":
        lengths = {self.delta.size, self.mu.size, self.sigma2.size}
        if self.tail_prob is not None:
            lengths.add(self.tail_prob.size)
        if len(lengths) != 1:
            raise ValueError(f"경계 수열 길이가 서로 다릅니다: {sorted(lengths)}")
        for name in ("delta", "mu", "sigma2", "tail_prob"):
            values = getattr(self, name)
            if values is None:
                continue
            if not np.all(np.isfinite(values)) or np.any(values < 0.0):
                raise ValueError(f"{name}: 모든 항은 유한한 0 이상 값이어야 합니다")
        return self

    @property
    def n_max(self) -> int:
        return int(self.delta.size)


def pareto_moment_above(p: float, scale: np.ndarray, a: float, c: np.ndarray) -> np.ndarray:
    """E[R^p 1{R >= c}], R = s P, P ~ Pareto(a) on [1, inf)"""
    if p >= a:
        raise ValueError(f"p={p} 차 모멘트가 꼬리 지수 a={a} 에서 무한합니다")
    s = np.asarray(scale, dtype=np.float64)
    c = np.maximum(np.asarray(c, dtype=np.float64), s)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = a * s**a * c ** (p - a) / (a - p)
    return np.where(s > 0.0, value, 0.0)


def pareto_second_moment_below(scale: np.ndarray, a: float, c: np.ndarray) -> np.ndarray:
    """E[R^2 1{R < c}]"""
    s = np.asarray(scale, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    upper = np.maximum(c, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.isclose(a, 2.0):
            value = a * s**a * np.log(upper / s)
        else:
            value = a * s**a * (upper ** (2.0 - a) - s ** (2.0 - a)) / (2.0 - a)
    return np.where(s > 0.0, value, 0.0)


def pareto_exceedance(scale: np.ndarray, a: float, c: np.ndarray) -> np.ndarray:
    """P(R >= c) = min(1, (s/c)^a)"""
    s = np.asarray(scale, dtype=np.float64)
    return np.minimum(1.0, (s / np.asarray(c, dtype=np.float64)) ** a)


def analytic_bounds(
    model: _ParetoNoise, schedule: StepSchedule, n_max: int, p: float
) -> CertificateBounds:
    """대칭 파레토 잡음의 닫힌 형태 경계

    임계 c_n = 1/alpha_n 에서 delta_n 은 Jensen 으로 (E[R^p 1{R>=c}])^(1/p),
    mu_n 은 대칭성으로 0, sigma_n^2 = E[R^2 1{R<c}].
    """
    if not isinstance(model, (HeavyTailedGlobalNoise, HeavyTailedPointwiseNoise)):
        raise ValueError(f"{model.kind.value}: 해석적 경계는 파레토 잡음에만 있습니다")
    alphas = schedule.alphas(n_max)
    c = 1.0 / alphas
    scale = model.scale_at(np.arange(n_max))
    a = model.tail_exponent
    return CertificateBounds(
        delta=pareto_moment_above(p, scale, a, c) ** (1.0 / p),
        mu=np.zeros(n_max),
        sigma2=pareto_second_moment_below(scale, a, c),
        tail_prob=pareto_exceedance(scale, a, c),
    )


def remark_bounds(n_max: int) -> CertificateBounds:
    """delta_n = mu_n = 1/log(n+2), sigma_n^2 = max(n, 1)"""
    n = np.arange(n_max, dtype=np.float64)
    inv_log = 1.0 / np.log(n + 2.0)
    return CertificateBounds(delta=inv_log, mu=inv_log.copy(), sigma2=np.maximum(n, 1.0))


def estimate_exceedance(
    model: _ParetoNoise, schedule: StepSchedule, n: int, replications: int, seed: int
) -> tuple[float, float]:
    """P(||alpha_n Z_{n+1}|| >= 1) 몬테카를로 추정과 표준오차"""
    samples = model.draw(replications, n, seed)
    below = below_threshold_mask(samples, schedule.alpha(n), model.space, pointwise=False)
    hits = ~below[:, 0, 0]
    p_hat = float(hits.mean())
    return p_hat, float(np.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / replications))


def calibrate_scale(tail_exponent: float, schedule: StepSchedule, n_range: range) -> float:
    """모든 n 에서 E[R^2 1{R < 1/alpha_n}] <= max(n, 1) 이 되는 가장 큰 상수 척도"""
    n = np.asarray(n_range, dtype=np.float64)
    if n.size == 0:
        raise ValueError("빈 n 범위입니다")
    c = 1.0 / schedule.alphas(int(n.max()) + 1)[n.astype(int)]
    target = np.maximum(n, 1.0)

    def margin(s: float) -> float:
        return float(np.max(pareto_second_moment_below(np.full(n.size, s), tail_exponent, c) - target))

    lo, hi = 0.0, 1.0 / 1024
    while margin(hi) <= 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > float(c.min()):
            return lo
    return float(bisect(margin, lo, hi, xtol=1e-12)) * (1.0 - 1e-9)


def three_series_certificate(
    bounds: CertificateBounds,
    schedule: StepSchedule,
    regime: Regime,
    p_smooth: Optional[float] = None,
) -> ThreeSeriesReport:
    """절단 경계와 스텝 크기로 만든 급수들의 수렴 인증서"""
    n_max = bounds.n_max
    alphas = schedule.alphas(n_max)
    series = []
    if regime == Regime.SMOOTH_TRUNCATED:
        if p_smooth is None:
            raise ValueError("smooth_truncated 체제에는 p_smooth 가 필요합니다")
        if bounds.tail_prob is not None:
            series.append(classify_series("sum P(|alpha Z| >= 1)", bounds.tail_prob))
        series.append(classify_series("sum alpha*mu", alphas * bounds.mu))
        series.append(
            classify_series("sum alpha^p*sigma^p", (alphas * alphas * bounds.sigma2) ** (p_smooth / 2.0))
        )
    elif regime == Regime.LP_POINTWISE:
        series.append(classify_series("sum alpha*delta", alphas * bounds.delta))
        series.append(classify_series("sum alpha*mu", alphas * bounds.mu))
        series.append(classify_series("sum alpha^2*sigma^2", alphas * alphas * bounds.sigma2))
    else:
        raise ValueError(f"{regime.value}: 세 급수 인증서가 없는 체제입니다")

    verdicts = {report.verdict for report in series}
    if SeriesVerdict.DIVERGES in verdicts:
        verdict = Verdict.FAIL
    elif verdicts == {SeriesVerdict.CONVERGES}:
        verdict = Verdict.PASS
    else:
        verdict = Verdict.INCONCLUSIVE

    steps = classify_series("sum alpha_n", alphas)
    if steps.verdict != SeriesVerdict.DIVERGES:
        logger.warning("스텝 합 sum alpha_n 이 발산하지 않습니다: %s", steps.verdict.value)
    return ThreeSeriesReport(
        regime=regime.value if p_smooth is None else f"{regime.value}(p={p_smooth:g})",
        series=series,
        verdict=verdict,
        schedule_divergent=steps.verdict,
    )
