from abc import ABC, abstractmethod

import numpy as np

from src.core.models import NoiseKind


class NoiseSamplerInterface(ABC):
    """잡음 샘플러 인터페이스"""

    @property
    @abstractmethod
    def kind(self) -> NoiseKind:
        """잡음 체제"""
        pass

    @property
    @abstractmethod
    def symmetric(self) -> bool:
        """부호 대칭 여부 (조건부 평균이 해석적으로 0)"""
        pass

    @abstractmethod
    def sample_block(self, block: int, seed: int) -> np.ndarray:
        """블록 단위 잡음 (B, M, d)"""
        pass

    @abstractmethod
    def draw(self, count: int, n: int, seed: int) -> np.ndarray:
        """스텝 n 분포에서 독립 표본 count 개 (count, M, d)"""
        pass
