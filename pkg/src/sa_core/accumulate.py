import numpy as np


class CompensatedSum:
    """Kahan 보정 누적합 (배열 값)"""

    def __init__(self, shape: tuple[int, ...]):
        self._sum = np.zeros(shape)
        self._carry = np.zeros(shape)

    def reset(self) -> None:
        self._sum.fill(0.0)
        self._carry.fill(0.0)

    def add(self, item: np.ndarray) -> None:
        y = item - self._carry
        t = self._sum + y
        self._carry = (t - self._sum) - y
        self._sum = t

    def value(self) -> np.ndarray:
        return self._sum.copy()

    @property
    def current(self) -> np.ndarray:
        """복사 없는 현재 합 (읽기 전용으로 사용)"""
        return self._sum


class LogProduct:
    """prod (1 - beta_j) 를 log 영역에서 누적"""

    def __init__(self) -> None:
        self._log = 0.0
        self._zero = False

    def multiply(self, beta: float) -> None:
        if beta >= 1.0:
            self._zero = True
        else:
            self._log += float(np.log1p(-beta))

    def value(self) -> float:
        return 0.0 if self._zero else float(np.exp(self._log))
