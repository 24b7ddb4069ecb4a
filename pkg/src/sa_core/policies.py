"""lambda_n 정책과 결정적 z 수열"""
import math

import numpy as np

from src.interfaces.control import LambdaPolicyInterface, ZSequenceInterface
from src.schedule.steps import StepSchedule


class ConstantLambda(LambdaPolicyInterface):
    """lambda_n = c"""

    def __init__(self, c: float = 1.0):
        self.c = float(c)

    def value(self, n: int, y: np.ndarray, y_norm: float, max_norm: float) -> float:
        return self.c


class ClippedNormLambda(LambdaPolicyInterface):
    """lambda_n = min(1, ||Y_n||) (Y_n 에만 의존)"""

    def value(self, n: int, y: np.ndarray, y_norm: float, max_norm: float) -> float:
        return min(1.0, y_norm)


class RunningMaxLambda(LambdaPolicyInterface):
    """lambda_n = sqrt(1 + max_{k<=n} ||Y_k||) (전체 이력 의존)"""

    def __init__(self) -> None:
        self._max = 0.0

    def reset(self) -> None:
        self._max = 0.0

    def observe(self, n: int, y: np.ndarray, y_norm: float) -> None:
        self._max = max(self._max, y_norm)

    def value(self, n: int, y: np.ndarray, y_norm: float, max_norm: float) -> float:
        return math.sqrt(1.0 + self._max)


class ZeroSequence(ZSequenceInterface):
    """z_{n+1} = 0"""

    def __init__(self, m: int, d: int = 1):
        self._zero = np.zeros((m, d))
        self._zero.flags.writeable = False

    def value(self, n: int) -> np.ndarray:
        return self._zero


class SummableAlternatingSequence(ZSequenceInterface):
    """z_{n+1} = ((-1)^n / alpha_n) (n+1)^-2 h, 따라서 sum alpha_n z_{n+1} 은 절대수렴"""

    def __init__(self, schedule: StepSchedule, h: np.ndarray):
        self.schedule = schedule
        self.h = np.array(h, dtype=np.float64)
        self.h.flags.writeable = False

    def value(self, n: int) -> np.ndarray:
        sign = -1.0 if n % 2 else 1.0
        return (sign / (self.schedule.alpha(n) * (n + 1.0) ** 2)) * self.h

    def describe(self) -> dict[str, object]:
        return {"kind": "summable_alternating"}


class ConstantSequence(ZSequenceInterface):
    """z_{n+1} = h (sum alpha_n h 발산, 음성 대조군)"""

    def __init__(self, h: np.ndarray):
        self.h = np.array(h, dtype=np.float64)
        self.h.flags.writeable = False

    def value(self, n: int) -> np.ndarray:
        return self.h

    def describe(self) -> dict[str, object]:
        return {"kind": "constant"}
