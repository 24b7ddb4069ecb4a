"""수렴 진단: 꼬리 상한, Doob 비율, 감쇠율 적합, 몬테카를로 모멘트 점검"""
import logging
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, Field
from scipy import stats

from src.core.config import settings
from src.core.exceptions import InsufficientDataError
from src.core.models import CheckpointStat, SeriesVerdict
from src.interfaces.noise_sampler import NoiseSamplerInterface
from src.schedule.steps import StepSchedule
from src.space.grid import SpaceDescriptor, node_magnitudes

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 10
MIN_DOOB_REPLICATIONS = 1000


class TailSupReport(BaseModel):
    """부분합 꼬리 상한 보고"""
    checkpoints: list[int] = Field(..., description="시작 인덱스 j")
    windows: list[int] = Field(..., description="윈도우 길이")
    sups: list[float] = Field(..., description="max ||S_q - S_m||, j <= m < q <= j + window")
    verdict: SeriesVerdict


class MomentCheckReport(BaseModel):
    """E||S_{n+1} - S_m||^2 <= K sum alpha_k^2 점검"""
    m: int
    n: int
    estimate: float = Field(..., description="E||S_{n+1} - S_m||^2 추정")
    stderr: float
    k_constant: float = Field(..., description="K = E||Z_1||^2 추정")
    alpha_sq_sum: float

    @property
    def bound(self) -> float:
        return self.k_constant * self.alpha_sq_sum

    @property
    def passed(self) -> bool:
        return self.estimate <= self.bound + 3.0 * self.stderr


def tail_sup(partial_sums: ArrayLike, j: int, window: int, space: SpaceDescriptor) -> float:
    """윈도우 [j, j + window] 안 모든 쌍의 최대 ||S_q - S_m|| (정확한 최대값)

    partial_sums[i] = S_i, 모양 (K, M, d).
    """
    sums = np.asarray(partial_sums, dtype=np.float64)
    if j < 0 or window < 1:
        raise ValueError(f"j >= 0, window >= 1 이어야 합니다: j={j}, window={window}")
    if j + window >= sums.shape[0]:
        raise InsufficientDataError(
            f"부분합 {sums.shape[0]} 개로는 [j, j+window] = [{j}, {j + window}] 를 덮을 수 없습니다"
        )
    block = sums[j: j + window + 1]
    if space.p is None and block.shape[-1] == 1:
        # 스칼라 sup 노름: 노드별 (최대 - 최소) 의 최대
        return float(np.max(block.max(axis=0) - block.min(axis=0)))
    best = 0.0
    for i in range(block.shape[0] - 1):
        spread = np.asarray(space.norm_values(block[i + 1:] - block[i]))
        best = max(best, float(spread.max()))
    return best


def tail_report(
    partial_sums: ArrayLike,
    j_values: Sequence[int],
    space: SpaceDescriptor,
    window: Optional[int] = None,
) -> TailSupReport:
    """여러 j 에 대한 꼬리 상한 (기본 윈도우 2j)"""
    sums = np.asarray(partial_sums, dtype=np.float64)
    js, windows, sups = [], [], []
    for j in j_values:
        w = window if window is not None else max(2 * j, 1)
        if j + w >= sums.shape[0]:
            logger.debug("j=%d 윈도우 %d 가 데이터 범위를 넘어 건너뜁니다", j, w)
            continue
        js.append(int(j))
        windows.append(int(w))
        sups.append(tail_sup(sums, j, w, space))
    if not sups:
        raise InsufficientDataError("계산 가능한 j 가 없습니다")

    if sups[-1] < settings.cauchy_tolerance:
        verdict = SeriesVerdict.CONVERGES
    elif len(sups) >= 3 and sups[-1] >= 0.5 * sups[0]:
        verdict = SeriesVerdict.DIVERGES
    else:
        verdict = SeriesVerdict.INCONCLUSIVE
    return TailSupReport(checkpoints=js, windows=windows, sups=sups, verdict=verdict)


def doob_statistics(
    model: NoiseSamplerInterface, replications: int, seed: int
) -> tuple[float, float]:
    """E[sup_t |M_t|^2] / E[|M_1|^2] 와 델타 방법 표준오차"""
    if replications < MIN_DOOB_REPLICATIONS:
        raise ValueError(f"복제 수는 {MIN_DOOB_REPLICATIONS} 이상이어야 합니다: {replications}")
    paths = model.draw(replications, 0, seed)
    magnitudes = node_magnitudes(paths) ** 2
    sup_sq = magnitudes.max(axis=1)
    end_sq = magnitudes[:, -1]
    mean_end = float(end_sq.mean())
    if mean_end == 0.0:
        return 0.0, 0.0
    ratio = float(sup_sq.mean()) / mean_end
    # 비율 추정량의 선형화 잔차
    residual = (sup_sq - ratio * end_sq) / mean_end
    return ratio, float(residual.std(ddof=1) / np.sqrt(replications))


def doob_ratio(model: NoiseSamplerInterface, replications: int, seed: int) -> float:
    """Doob 최대 부등식 비율 (<= 4 기대)"""
    return doob_statistics(model, replications, seed)[0]


def decay_fit(error_curve: ArrayLike, from_index: int = 1) -> tuple[float, float, float]:
    """log error 대 log n 최소제곱 (rate, intercept, r^2)"""
    errors = np.asarray(error_curve, dtype=np.float64)
    start = max(from_index, 1)
    n = np.arange(start, errors.size, dtype=np.float64)
    values = np.clip(errors[start:], 1e-300, None)
    usable = values > 1e-300
    if int(usable.sum()) < MIN_FIT_POINTS:
        raise InsufficientDataError(f"적합에 쓸 점이 {int(usable.sum())} 개뿐입니다")
    fit = stats.linregress(np.log(n[usable]), np.log(values[usable]))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def increment_second_moment_check(
    noise: NoiseSamplerInterface,
    schedule: StepSchedule,
    space: SpaceDescriptor,
    m: int,
    n: int,
    replications: int,
    seed: int,
) -> MomentCheckReport:
    """E||S_{n+1} - S_m||^2 를 K sum_{k=m}^n alpha_k^2 (K = E||Z_1||^2) 와 비교"""
    if not 0 <= m <= n:
        raise ValueError(f"0 <= m <= n 이어야 합니다: m={m}, n={n}")
    alphas = schedule.alphas(n + 1)
    increment = np.zeros((replications, space.m, space.d))
    for k in range(m, n + 1):
        increment += alphas[k] * noise.draw(replications, k, seed)
    squares = np.asarray(space.norm_values(increment)) ** 2
    reference = np.asarray(space.norm_values(noise.draw(replications, 0, seed + 1))) ** 2
    return MomentCheckReport(
        m=m,
        n=n,
        estimate=float(squares.mean()),
        stderr=float(squares.std(ddof=1) / np.sqrt(replications)),
        k_constant=float(reference.mean()),
        alpha_sq_sum=float(np.sum(alphas[m: n + 1] ** 2)),
    )


def ks_gaussian_check(samples: ArrayLike, sigma: float) -> tuple[float, float]:
    """Normal(0, sigma^2) 에 대한 KS 검정 (statistic, p-value)"""
    values = np.asarray(samples, dtype=np.float64).ravel()
    result = stats.kstest(values, "norm", args=(0.0, sigma))
    return float(result.statistic), float(result.pvalue)


def checkpoint_summary(curves: ArrayLike, checkpoints: Sequence[int]) -> list[CheckpointStat]:
    """시드별 오차 곡선 (S, N+1) 의 체크포인트별 중앙값과 사분위"""
    table = np.atleast_2d(np.asarray(curves, dtype=np.float64))
    columns = table[:, list(checkpoints)]
    q25, median, q75 = np.percentile(columns, [25.0, 50.0, 75.0], axis=0)
    return [
        CheckpointStat(checkpoint=int(c), median=float(md), q25=float(lo), q75=float(hi))
        for c, md, lo, hi in zip(checkpoints, median, q25, q75)
    ]
