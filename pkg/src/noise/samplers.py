"""네 가지 잡음 체제의 시드 고정 샘플러.

스텝 n 의 잡음 Z_{n+1} 은 블록 b = n // B 안의 행 n % B 로 정해지고, 블록은
SeedSequence([seed, stream, b]) 로 생성된다. 따라서 sample(n, seed) 는
(모델 파라미터, n, seed) 의 순수 함수이다.
"""
from abc import abstractmethod
from functools import lru_cache
from typing import Optional

import numpy as np

from src.core.config import settings
from src.core.models import NoiseKind
from src.interfaces.noise_sampler import NoiseSamplerInterface
from src.space.grid import GridFunction, SpaceDescriptor

_DRAW_STREAM = 0xD7A


def mix_seed(seed: int, replication: int) -> int:
    """복제 시드 seed' = SeedSequence([seed, replication]).generate_state(1)[0]"""
    return int(np.random.SeedSequence([seed, replication]).generate_state(1)[0])


def brownian_paths(rng: np.random.Generator, count: int, m: int, d: int, sigma: float) -> np.ndarray:
    """Z(0) = 0, Z(t_i) = Z(t_{i-1}) + sigma sqrt(dt) xi_i 인 경로 (count, M, d)"""
    dt = 1.0 / (m - 1)
    paths = np.zeros((count, m, d))
    increments = rng.normal(scale=sigma * np.sqrt(dt), size=(count, m - 1, d))
    np.cumsum(increments, axis=1, out=paths[:, 1:, :])
    return paths


class NoiseModel(NoiseSamplerInterface):
    """블록 샘플링 공통 기반"""

    stream: int = 0

    def __init__(self, space: SpaceDescriptor, block_size: Optional[int] = None):
        self.space = space
        self.block_size = block_size or settings.noise_block_size

    @property
    def symmetric(self) -> bool:
        return True

    @abstractmethod
    def _draw(self, rng: np.random.Generator, steps: np.ndarray) -> np.ndarray:
        """steps 의 각 원소에 대해 독립 표본 하나씩"""
        pass

    def describe(self) -> dict[str, object]:
        return {"kind": self.kind.value}

    def sample_block(self, block: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([seed, self.stream, block]))
        first = block * self.block_size
        steps = np.arange(first, first + self.block_size)
        return self._draw(rng, steps)

    def sample_array(self, n: int, seed: int) -> np.ndarray:
        return _cached_block(self, n // self.block_size, seed)[n % self.block_size]

    def sample(self, n: int, seed: int) -> GridFunction:
        """Z_{n+1}"""
        if n < 0:
            raise ValueError(f"스텝 인덱스는 0 이상이어야 합니다: {n}")
        return GridFunction(self.sample_array(n, seed))

    def samples(self, start: int, stop: int, seed: int) -> np.ndarray:
        """Z_{start+1} .. Z_{stop} 를 (stop-start, M, d) 로"""
        first, last = start // self.block_size, (stop - 1) // self.block_size
        blocks = np.concatenate([self.sample_block(b, seed) for b in range(first, last + 1)])
        offset = first * self.block_size
        return blocks[start - offset: stop - offset]

    def draw(self, count: int, n: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence([seed, self.stream, _DRAW_STREAM, n]))
        return self._draw(rng, np.full(count, n))


@lru_cache(maxsize=8)
def _cached_block(model: NoiseModel, block: int, seed: int) -> np.ndarray:
    values = model.sample_block(block, seed)
    values.flags.writeable = False
    return values


class GaussianIIDNoise(NoiseModel):
    """브라운 운동 경로 (i.i.d. 가우스)"""

    stream = 1

    def __init__(self, space: SpaceDescriptor, sigma: float = 1.0, block_size: Optional[int] = None):
        if sigma < 0.0:
            raise ValueError(f"sigma 는 0 이상이어야 합니다: {sigma}")
        super().__init__(space, block_size)
        self.sigma = sigma

    @property
    def kind(self) -> NoiseKind:
        return NoiseKind.GAUSSIAN_IID

    def describe(self) -> dict[str, object]:
        return {"kind": self.kind.value, "sigma": self.sigma}

    def _draw(self, rng: np.random.Generator, steps: np.ndarray) -> np.ndarray:
        return brownian_paths(rng, steps.size, self.space.m, self.space.d, self.sigma)


class MartingaleNoise(NoiseModel):
    """+-1 부호 증분 랜덤워크 마팅게일, |증분|^2 = sigma^2 dt"""

    stream = 2

    def __init__(self, space: SpaceDescriptor, sigma: float = 1.0, block_size: Optional[int] = None):
        if sigma < 0.0:
            raise ValueError(f"sigma 는 0 이상이어야 합니다: {sigma}")
        super().__init__(space, block_size)
        self.sigma = sigma

    @property
    def kind(self) -> NoiseKind:
        return NoiseKind.MARTINGALE

    @property
    def volatility(self) -> float:
        """성분별 증분 크기 sigma sqrt(dt / d)"""
        return self.sigma * np.sqrt(1.0 / ((self.space.m - 1) * self.space.d))

    def describe(self) -> dict[str, object]:
        return {"kind": self.kind.value, "sigma": self.sigma}

    def increments(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """증분 = 변동성 x 중심화된 +-1 (조건부 평균 0)"""
        m, d = self.space.m, self.space.d
        signs = 2.0 * rng.integers(0, 2, size=(count, m - 1, d)) - 1.0
        return self.volatility * signs

    def _draw(self, rng: np.random.Generator, steps: np.ndarray) -> np.ndarray:
        paths = np.zeros((steps.size, self.space.m, self.space.d))
        np.cumsum(self.increments(rng, steps.size), axis=1, out=paths[:, 1:, :])
        return paths


class _ParetoNoise(NoiseModel):
    """척도 s_n = s_0 (n+1)^g 인 대칭 파레토 잡음 공통"""

    def __init__(
        self,
        space: SpaceDescriptor,
        tail_exponent: float = 1.5,
        scale: float = 0.4,
        scale_power: float = 0.0,
        block_size: Optional[int] = None,
    ):
        if tail_exponent <= 1.0:
            raise ValueError(f"꼬리 지수는 1 보다 커야 합니다: {tail_exponent}")
        if scale < 0.0:
            raise ValueError(f"척도는 0 이상이어야 합니다: {scale}")
        super().__init__(space, block_size)
        self.tail_exponent = tail_exponent
        self.scale = scale
        self.scale_power = scale_power

    def describe(self) -> dict[str, object]:
        return {
            "kind": self.kind.value,
            "tail_exponent": self.tail_exponent,
            "scale": self.scale,
            "scale_power": self.scale_power,
        }

    def scale_at(self, n: np.ndarray | int) -> np.ndarray:
        return self.scale * (np.asarray(n, dtype=np.float64) + 1.0) ** self.scale_power

    def _pareto(self, rng: np.random.Generator, size: tuple[int, ...]) -> np.ndarray:
        """[1, inf) 위 파레토(a)"""
        return 1.0 + rng.pareto(self.tail_exponent, size=size)


class HeavyTailedPointwiseNoise(_ParetoNoise):
    """노드별 독립 대칭 파레토: Z(t) = s_n P(t) e(t), e 는 무작위 부호/방향"""

    stream = 3

    @property
    def kind(self) -> NoiseKind:
        return NoiseKind.HEAVY_TAILED_POINTWISE

    def _draw(self, rng: np.random.Generator, steps: np.ndarray) -> np.ndarray:
        count, m, d = steps.size, self.space.m, self.space.d
        radius = self.scale_at(steps)[:, None] * self._pareto(rng, (count, m))
        if d == 1:
            direction = (2.0 * rng.integers(0, 2, size=(count, m, 1)) - 1.0)
        else:
            direction = rng.standard_normal((count, m, d))
            direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        return radius[:, :, None] * direction


class HeavyTailedGlobalNoise(_ParetoNoise):
    """Z = s_n eps P V, V 는 단위 노름 브라운 모양이므로 ||Z|| = s_n P"""

    stream = 4

    @property
    def kind(self) -> NoiseKind:
        return NoiseKind.HEAVY_TAILED_GLOBAL

    def _draw(self, rng: np.random.Generator, steps: np.ndarray) -> np.ndarray:
        count = steps.size
        shape = brownian_paths(rng, count, self.space.m, self.space.d, 1.0)
        norms = np.asarray(self.space.norm_values(shape))
        shape /= np.where(norms > 0.0, norms, 1.0)[:, None, None]
        signs = 2.0 * rng.integers(0, 2, size=count) - 1.0
        magnitude = self.scale_at(steps) * signs * self._pareto(rng, (count,))
        return magnitude[:, None, None] * shape


def sample_gaussian_iid(model: GaussianIIDNoise, n: int, seed: int) -> GridFunction:
    return model.sample(n, seed)


def sample_martingale(model: MartingaleNoise, n: int, seed: int) -> GridFunction:
    return model.sample(n, seed)


def sample_heavy_tailed(model: _ParetoNoise, n: int, seed: int) -> GridFunction:
    return model.sample(n, seed)
