"""잡음 절단 분해 Z = hat + bar + tilde.

hat 은 임계 초과 부분, truncated 는 임계 이하 부분(= bar + tilde),
bar 는 임계 이하 부분의 조건부 평균 추정, tilde 는 중심화된 유계 부분이다.
임계값은 정확히 1 이고, ||alpha z|| = 1 인 경계는 임계 이하 쪽으로 보낸다.
"""
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.interfaces.noise_sampler import NoiseSamplerInterface
from src.space.grid import GridFunction, SpaceDescriptor, node_magnitudes


class TruncationTriple(BaseModel):
    """절단 분해 결과"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    hat: GridFunction
    truncated: GridFunction
    bar: GridFunction
    tilde: GridFunction

    def reassemble(self) -> GridFunction:
        """hat + truncated (원래 표본과 비트 단위로 같음)"""
        return self.hat + self.truncated


def _split(z: GridFunction, keep: np.ndarray, bar_estimate: Optional[GridFunction]) -> TruncationTriple:
    """keep 이 참인 곳은 임계 이하 부분"""
    bar = bar_estimate if bar_estimate is not None else GridFunction.zero(z.m, z.d)
    z._check_shape(bar)
    values = z.values
    truncated = np.where(keep, values, 0.0)
    hat = np.where(keep, 0.0, values)
    return TruncationTriple(
        hat=GridFunction(hat),
        truncated=GridFunction(truncated),
        bar=bar,
        tilde=GridFunction(truncated - bar.values),
    )


def truncate_global(
    z: GridFunction,
    alpha_n: float,
    space: SpaceDescriptor,
    bar_estimate: Optional[GridFunction] = None,
) -> TruncationTriple:
    """표본 전체 노름 ||alpha z|| 로 절단

    ||alpha z|| = 1 인 경계값은 절단하지 않고 유계 쪽(truncated)에 남긴다.
    """
    if alpha_n <= 0.0:
        raise ValueError(f"alpha_n 은 양수여야 합니다: {alpha_n}")
    below = space.norm(z * alpha_n) <= 1.0
    keep = np.full(z.shape, below)
    return _split(z, keep, bar_estimate)


def truncate_pointwise(
    z: GridFunction, alpha_n: float, bar_estimate: Optional[GridFunction] = None
) -> TruncationTriple:
    """노드별 |alpha z(t)| 로 절단 (|alpha z(t)| = 1 은 유계 쪽에 남김)"""
    if alpha_n <= 0.0:
        raise ValueError(f"alpha_n 은 양수여야 합니다: {alpha_n}")
    below = node_magnitudes(alpha_n * z.values) <= 1.0
    keep = np.repeat(below[:, None], z.d, axis=1)
    return _split(z, keep, bar_estimate)


def below_threshold_mask(
    samples: np.ndarray, alpha_n: float, space: SpaceDescriptor, pointwise: bool
) -> np.ndarray:
    """(R, M, d) 표본의 임계 이하 지시자 (R, M, 1)"""
    if pointwise:
        return (node_magnitudes(alpha_n * samples) <= 1.0)[..., None]
    below = np.asarray(space.norm_values(alpha_n * samples)) <= 1.0
    return np.broadcast_to(below[:, None, None], samples.shape[:-1] + (1,))


def estimate_bar(
    model: NoiseSamplerInterface,
    alpha_n: float,
    n: int,
    draws: int,
    seed: int,
    space: SpaceDescriptor,
    pointwise: bool,
) -> tuple[GridFunction, float]:
    """E[Z 1{||alpha Z|| <= 1}] 몬테카를로 추정과 (노드 최대) 표준오차"""
    if model.symmetric:
        return GridFunction.zero(space.m, space.d), 0.0
    samples = model.draw(draws, n, seed)
    kept = samples * below_threshold_mask(samples, alpha_n, space, pointwise)
    mean = kept.mean(axis=0)
    stderr = float(np.max(kept.std(axis=0, ddof=1)) / np.sqrt(draws)) if draws > 1 else float("inf")
    return GridFunction(mean), stderr


def discrete_bar(
    outcomes: Sequence[GridFunction],
    probabilities: Sequence[float],
    alpha_n: float,
    space: SpaceDescriptor,
    pointwise: bool,
) -> GridFunction:
    """이산 분포의 조건부 평균을 모든 경우를 나열해 정확히 계산"""
    if len(outcomes) != len(probabilities) or not outcomes:
        raise ValueError("결과와 확률의 개수가 맞지 않습니다")
    if not np.isclose(sum(probabilities), 1.0, atol=1e-12):
        raise ValueError("확률의 합이 1 이 아닙니다")
    stacked = np.stack([o.values for o in outcomes])
    kept = stacked * below_threshold_mask(stacked, alpha_n, space, pointwise)
    weights = np.asarray(probabilities, dtype=np.float64)[:, None, None]
    return GridFunction((weights * kept).sum(axis=0))
