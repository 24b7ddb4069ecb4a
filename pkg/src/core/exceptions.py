class SAError(Exception):
    """확률 근사 하네스 기본 예외"""

    exit_code: int = 1


class ConfigError(SAError):
    """설정 파싱/검증 오류"""

    exit_code = 2

    def __init__(self, message: str, key: str | None = None):
        self.message = message
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)

    def __reduce__(self):
        return type(self), (self.message, self.key)


class ContractViolation(SAError):
    """계약 위반 (예: lambda_n 상한)"""

    exit_code = 3

    def __init__(self, message: str, step: int | None = None):
        self.message = message
        self.step = step
        super().__init__(f"[n={step}] {message}" if step is not None else message)

    def __reduce__(self):
        return type(self), (self.message, self.step)


class RootBracketError(ContractViolation):
    """노드별 이분법이 근을 감싸지 못함"""


class NumericDivergence(SAError):
    """수치 발산 (오버플로우/비유한값)"""

    exit_code = 4

    def __init__(self, message: str, step: int, last_error: float):
        self.message = message
        self.step = step
        self.last_error = last_error
        super().__init__(f"[n={step}] {message} (마지막 유한 오차 {last_error:.6g})")

    def __reduce__(self):
        return type(self), (self.message, self.step, self.last_error)


class InsufficientDataError(ValueError):
    """윈도우/적합에 필요한 데이터 부족"""
