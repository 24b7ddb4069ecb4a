from abc import ABC, abstractmethod

import numpy as np


class LambdaPolicyInterface(ABC):
    """잡음 배율 lambda_n(Y_0, ..., Y_n) 인터페이스

    이력 의존 정책은 reset() 이후 observe() 로 받은 반복값을 직접 보관한다.
    엔진은 매 스텝 observe() 를 먼저 호출하고 value() 를 읽는다.
    """

    def reset(self) -> None:
        """새 실행 시작"""

    def observe(self, n: int, y: np.ndarray, y_norm: float) -> None:
        """Y_n 관측"""

    @abstractmethod
    def value(self, n: int, y: np.ndarray, y_norm: float, max_norm: float) -> float:
        """lambda_n"""
        pass


class ZSequenceInterface(ABC):
    """결정적 섭동 수열 z_{n+1} 인터페이스"""

    @abstractmethod
    def value(self, n: int) -> np.ndarray:
        """z_{n+1} (M, d)"""
        pass

    def describe(self) -> dict[str, object]:
        return {"kind": type(self).__name__}
