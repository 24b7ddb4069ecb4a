"""스텝 크기 수열 alpha_n 과 Robbins-Monro 점검"""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.config import settings
from src.core.models import RobbinsMonroReport, ScheduleKind, ScheduleSpec
from src.diagnostics.series import classify_series

logger = logging.getLogger(__name__)


class StepSchedule(BaseModel):
    """alpha_n 수열

    - power_law:    a / (n + b)^q
    - log_harmonic: 1 / ((n + 2) log(n + 2))
    - constant:     a
    - custom:       values[n]
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ScheduleKind
    a: float = Field(default=1.0, gt=0.0)
    b: float = Field(default=10.0, gt=0.0)
    q: float = Field(default=1.0, gt=0.0)
    values: Optional[tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check_range(self) -> "StepSchedule":
        if self.kind == ScheduleKind.POWER_LAW:
            # 감소 수열이므로 n=0 에서 확인하면 충분
            first = self.a / self.b**self.q
            if first >= 1.0:
                raise ValueError(f"power_law alpha_0 = {first:g} >= 1")
        elif self.kind == ScheduleKind.CONSTANT:
            if self.a >= 1.0:
                raise ValueError(f"constant alpha = {self.a:g} >= 1")
        elif self.kind == ScheduleKind.CUSTOM:
            if not self.values:
                raise ValueError("custom 수열에는 values 가 필요합니다")
            bad = [v for v in self.values if not 0.0 < v < 1.0 or not math.isfinite(v)]
            if bad:
                raise ValueError(f"custom alpha 값은 (0,1) 안에 있어야 합니다: {bad[0]!r}")
        return self

    @classmethod
    def power_law(cls, a: float, b: float, q: float) -> "StepSchedule":
        return cls(kind=ScheduleKind.POWER_LAW, a=a, b=b, q=q)

    @classmethod
    def log_harmonic(cls) -> "StepSchedule":
        return cls(kind=ScheduleKind.LOG_HARMONIC)

    @classmethod
    def constant(cls, a: float) -> "StepSchedule":
        return cls(kind=ScheduleKind.CONSTANT, a=a)

    @classmethod
    def custom(cls, values: Sequence[float]) -> "StepSchedule":
        return cls(kind=ScheduleKind.CUSTOM, values=tuple(float(v) for v in values))

    @classmethod
    def from_spec(cls, spec: ScheduleSpec) -> "StepSchedule":
        values = tuple(spec.values) if spec.values is not None else None
        return cls(kind=spec.kind, a=spec.a, b=spec.b, q=spec.q, values=values)

    @property
    def horizon(self) -> Optional[int]:
        """정의된 항 수 (custom 만 유한)"""
        return len(self.values) if self.kind == ScheduleKind.CUSTOM and self.values else None

    def describe(self) -> dict[str, object]:
        """메타데이터용 요약"""
        if self.kind == ScheduleKind.POWER_LAW:
            return {"kind": self.kind.value, "a": self.a, "b": self.b, "q": self.q}
        if self.kind == ScheduleKind.CONSTANT:
            return {"kind": self.kind.value, "a": self.a}
        if self.kind == ScheduleKind.CUSTOM:
            return {"kind": self.kind.value, "length": self.horizon}
        return {"kind": self.kind.value}

    def alpha(self, n: int) -> float:
        """alpha_n"""
        if n < 0:
            raise ValueError(f"스텝 인덱스는 0 이상이어야 합니다: {n}")
        return float(self.alphas(n + 1, start=n)[0])

    def alphas(self, n_max: int, start: int = 0) -> np.ndarray:
        """alpha_start .. alpha_{n_max-1} 벡터"""
        n = np.arange(start, n_max, dtype=np.float64)
        if self.kind == ScheduleKind.POWER_LAW:
            return self.a / (n + self.b) ** self.q
        if self.kind == ScheduleKind.LOG_HARMONIC:
            return 1.0 / ((n + 2.0) * np.log(n + 2.0))
        if self.kind == ScheduleKind.CONSTANT:
            return np.full(n.shape, self.a)
        assert self.values is not None
        if n_max > len(self.values):
            raise ValueError(f"custom 수열 길이 {len(self.values)} < 요청 {n_max}")
        return np.asarray(self.values[start:n_max], dtype=np.float64)


def alpha(s: StepSchedule, n: int) -> float:
    return s.alpha(n)


def beta(s: StepSchedule, theta: float, n: int) -> float:
    """beta_n = theta * alpha_n"""
    if theta < 1.0:
        raise ValueError(f"theta 는 1 이상이어야 합니다: {theta}")
    return theta * s.alpha(n)


def start_index(s: StepSchedule, theta: float, limit: Optional[int] = None) -> int:
    """theta * alpha_n < 1 이 되는 가장 작은 n"""
    limit = limit or settings.start_index_limit
    if s.horizon is not None:
        limit = min(limit, s.horizon)
    chunk = 4096
    for begin in range(0, limit, chunk):
        end = min(begin + chunk, limit)
        hits = np.flatnonzero(theta * s.alphas(end, start=begin) < 1.0)
        if hits.size:
            return begin + int(hits[0])
    raise ValueError(f"{limit} 항 안에서 theta*alpha_n < 1 인 n 이 없습니다")


def robbins_monro_report(s: StepSchedule, n_max: int) -> RobbinsMonroReport:
    """sum alpha = inf 와 sum alpha^2 < inf 점검"""
    if n_max < 100:
        raise ValueError(f"N_max 는 100 이상이어야 합니다: {n_max}")
    values = s.alphas(n_max)
    report = RobbinsMonroReport(
        n_max=n_max,
        alpha=classify_series("sum alpha_n", values),
        alpha_sq=classify_series("sum alpha_n^2", values * values),
    )
    logger.debug(
        "Robbins-Monro %s: alpha=%s alpha_sq=%s",
        s.describe(),
        report.alpha.verdict.value,
        report.alpha_sq.verdict.value,
    )
    return report
