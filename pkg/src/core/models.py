from enum import Enum
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.space.grid import NormKind, SpaceDescriptor


class NoiseKind(str, Enum):
    """잡음 체제"""
    GAUSSIAN_IID = "gaussian_iid"
    MARTINGALE = "martingale"
    HEAVY_TAILED_GLOBAL = "heavy_tailed_global"
    HEAVY_TAILED_POINTWISE = "heavy_tailed_pointwise"


class ScheduleKind(str, Enum):
    """스텝 크기 종류"""
    POWER_LAW = "power_law"
    LOG_HARMONIC = "log_harmonic"
    CONSTANT = "constant"
    CUSTOM = "custom"


class OperatorKind(str, Enum):
    """연산자 종류"""
    LINEAR_CONTRACTION = "linear_contraction"
    KERNEL_CONTRACTION = "kernel_contraction"
    POINTWISE_MONOTONE = "pointwise_monotone"


class EngineKind(str, Enum):
    """반복 엔진"""
    STOCHASTIC = "stochastic"
    CONTROLLED = "controlled"
    DETERMINISTIC = "deterministic"


class Regime(str, Enum):
    """수렴 체제 (잡음 종류와 공간 기하)"""
    GAUSSIAN = "gaussian"
    MARTINGALE = "martingale"
    SMOOTH_TRUNCATED = "smooth_truncated"
    LP_POINTWISE = "lp_pointwise"
    DETERMINISTIC = "deterministic"


class LambdaKind(str, Enum):
    """lambda_n 정책"""
    CONSTANT = "constant"
    CLIPPED_NORM = "clipped_norm"
    RUNNING_MAX = "running_max"


class ZSequenceKind(str, Enum):
    """결정적 z 수열"""
    ZERO = "zero"
    SUMMABLE_ALTERNATING = "summable_alternating"
    CONSTANT = "constant"


class BoundsKind(str, Enum):
    """인증서 경계 수열 출처"""
    ANALYTIC = "analytic"
    REMARK = "remark"


class Verdict(str, Enum):
    """인증서 판정"""
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


class SeriesVerdict(str, Enum):
    """급수 판정"""
    CONVERGES = "CONVERGES"
    DIVERGES = "DIVERGES"
    INCONCLUSIVE = "INCONCLUSIVE"


class _Spec(BaseModel):
    """설정 섹션 공통 기반"""
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class ProfileSpec(_Spec):
    """격자 위 함수 모양"""
    shape: Literal["zero", "constant", "sine", "ramp"] = Field(default="constant")
    amplitude: float = Field(default=1.0, description="진폭")


class ProblemSpec(_Spec):
    """연산자 설정"""
    kind: OperatorKind = Field(..., description="연산자 종류")
    gamma: float = Field(default=0.5, gt=0.0, lt=1.0, description="축소 상수")
    target: ProfileSpec = Field(default_factory=ProfileSpec, description="근 또는 오프셋 모양")
    length_scale: float = Field(default=0.1, gt=0.0, description="커널 길이 척도")
    monotone: Literal["linear", "arctan", "quadratic"] = Field(default="linear")
    c: float = Field(default=1.0, gt=0.0, description="선형 단조 기울기")
    c1: float = Field(default=1.0, gt=0.0, description="단조 하한")
    c2: float = Field(default=2.0, gt=0.0, description="단조 상한")

    @model_validator(mode="after")
    def _check_bounds(self) -> "ProblemSpec":
        if self.kind == OperatorKind.POINTWISE_MONOTONE:
            if self.c1 > self.c2:
                raise ValueError("c1 <= c2 이어야 합니다")
            if self.monotone == "linear" and not self.c1 <= self.c <= self.c2:
                raise ValueError("선형 기울기 c 는 [c1, c2] 안에 있어야 합니다")
        return self


class NoiseSpec(_Spec):
    """잡음 설정"""
    kind: NoiseKind = Field(..., description="잡음 체제")
    sigma: float = Field(default=1.0, ge=0.0, description="변동성")
    tail_exponent: float = Field(default=1.5, gt=1.0, description="파레토 꼬리 지수")
    scale: float = Field(default=0.4, ge=0.0, description="척도 s_0")
    scale_power: float = Field(default=0.0, description="척도 성장 지수 (s_n = s_0 (n+1)^g)")
    bounds: BoundsKind = Field(default=BoundsKind.ANALYTIC, description="인증서 경계 출처")
    seed: int = Field(default=0, ge=0, description="기본 시드")


class ScheduleSpec(_Spec):
    """스텝 크기 설정"""
    kind: ScheduleKind = Field(..., description="스텝 크기 종류")
    a: float = Field(default=1.0, gt=0.0)
    b: float = Field(default=10.0, gt=0.0)
    q: float = Field(default=1.0, gt=0.0)
    values: Optional[list[float]] = Field(default=None, description="사용자 수열")


class LambdaSpec(_Spec):
    """lambda_n 정책 설정"""
    kind: LambdaKind = Field(default=LambdaKind.CONSTANT)
    c: float = Field(default=1.0, description="상수 정책 값")
    c_bound: float = Field(default=1.0, gt=0.0, description="lambda 상한 상수 C")


class DeterministicSpec(_Spec):
    """결정적 엔진 설정"""
    z: ZSequenceKind = Field(default=ZSequenceKind.ZERO)
    h: ProfileSpec = Field(default_factory=ProfileSpec, description="z 방향 h")
    psi_enabled: bool = Field(default=False)


class RunSpec(_Spec):
    """실행 설정"""
    n_steps: int = Field(..., ge=1, description="반복 횟수 N")
    engine: EngineKind = Field(default=EngineKind.STOCHASTIC)
    seeds: Optional[list[int]] = Field(default=None, description="명시적 시드 목록")
    n_seeds: int = Field(default=1, ge=1, description="시드 개수 (seeds 미지정 시)")
    x0: ProfileSpec = Field(default_factory=ProfileSpec, description="초기점 모양")
    checkpoint_base: int = Field(default=2, ge=2, description="체크포인트 기수")

    @model_validator(mode="after")
    def _check_seeds(self) -> "RunSpec":
        if self.seeds is not None and not self.seeds:
            raise ValueError("시드가 최소 하나 필요합니다")
        return self


class OutputSpec(_Spec):
    """출력 설정"""
    directory: Optional[str] = Field(default=None, description="출력 디렉토리 (없으면 Settings)")
    name: str = Field(default="experiment", description="실행 이름")


class ExperimentConfig(_Spec):
    """실험 설정 전체"""
    regime: Regime = Field(default=Regime.GAUSSIAN)
    space: SpaceDescriptor = Field(default_factory=SpaceDescriptor)
    problem: ProblemSpec
    noise: NoiseSpec
    schedule: ScheduleSpec
    run: RunSpec
    lambda_: Optional[LambdaSpec] = Field(default=None, alias="lambda")
    deterministic: Optional[DeterministicSpec] = Field(default=None)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @model_validator(mode="after")
    def _check_references(self) -> "ExperimentConfig":
        if self.space.norm_kind == NormKind.LP and self.space.p is None:
            raise ValueError("space.p: L^p 노름에는 p 가 필요합니다")
        if self.space.norm_kind == NormKind.SUP and self.space.p is not None:
            raise ValueError("space.p: sup 노름에는 p 를 지정하지 않습니다")
        if self.regime == Regime.SMOOTH_TRUNCATED and self.space.smoothness is None:
            raise ValueError("space.smoothness: smooth_truncated 체제에는 평활성 상수가 필요합니다")
        if self.run.engine == EngineKind.CONTROLLED and self.lambda_ is None:
            raise ValueError("lambda: controlled 엔진에는 lambda 섹션이 필요합니다")
        if self.run.engine == EngineKind.DETERMINISTIC and self.deterministic is None:
            raise ValueError("deterministic: deterministic 엔진에는 해당 섹션이 필요합니다")
        if self.schedule.kind == ScheduleKind.CUSTOM:
            values = self.schedule.values or []
            if len(values) < self.run.n_steps:
                raise ValueError("schedule.values: 사용자 수열이 n_steps 보다 짧습니다")
        return self

    @property
    def seed_list(self) -> list[int]:
        """실제 사용할 시드 목록"""
        if self.run.seeds is not None:
            return list(self.run.seeds)
        return [self.noise.seed + i for i in range(self.run.n_seeds)]


class SeriesReport(BaseModel):
    """급수 부분합 보고"""
    name: str = Field(..., description="급수 이름")
    checkpoints: list[int] = Field(default_factory=list, description="2진 체크포인트")
    partial_sums: list[float] = Field(default_factory=list, description="체크포인트 부분합")
    last_block: float = Field(..., description="마지막 2진 블록 합 (코시 꼬리)")
    exponent: Optional[float] = Field(default=None, description="블록 감쇠 지수")
    tail_estimate: Optional[float] = Field(default=None, description="외삽 꼬리 추정")
    verdict: SeriesVerdict = Field(..., description="판정")


class RobbinsMonroReport(BaseModel):
    """Robbins-Monro 조건 보고"""
    n_max: int = Field(..., description="최대 항 수")
    alpha: SeriesReport = Field(..., description="sum alpha_n")
    alpha_sq: SeriesReport = Field(..., description="sum alpha_n^2")

    @property
    def steps_diverge(self) -> bool:
        """sum alpha_n = inf 판정"""
        return self.alpha.verdict == SeriesVerdict.DIVERGES

    @property
    def squares_converge(self) -> bool:
        """sum alpha_n^2 < inf 판정"""
        return self.alpha_sq.verdict == SeriesVerdict.CONVERGES

    def records(self) -> list[dict[str, Any]]:
        """JSON-lines 레코드"""
        return [
            {
                "checkpoint": n,
                "partial_sum_alpha": s1,
                "partial_sum_alpha_sq": s2,
                "verdicts": {
                    "alpha": self.alpha.verdict.value,
                    "alpha_sq": self.alpha_sq.verdict.value,
                },
            }
            for n, s1, s2 in zip(
                self.alpha.checkpoints, self.alpha.partial_sums, self.alpha_sq.partial_sums
            )
        ]


class ThreeSeriesReport(BaseModel):
    """세 급수 인증서 보고"""
    regime: str = Field(..., description="체제 이름 (평활 체제는 p 포함)")
    series: list[SeriesReport] = Field(default_factory=list, description="요구 급수")
    verdict: Verdict = Field(..., description="종합 판정")
    schedule_divergent: SeriesVerdict = Field(..., description="sum alpha_n 판정 (별도 표시)")


class CertificateResult(BaseModel):
    """인증서 검사 결과"""
    name: str = Field(..., description="인증서 이름")
    verdict: Verdict = Field(..., description="판정")
    value: Optional[float] = Field(default=None, description="측정값")
    detail: str = Field(default="", description="설명")
    issues: list[str] = Field(default_factory=list, description="발견된 문제점")

    @property
    def passed(self) -> bool:
        """통과 여부"""
        return self.verdict == Verdict.PASS


class CertificateReport(BaseModel):
    """인증서 종합 보고"""
    regime: Regime = Field(..., description="수렴 체제")
    results: list[CertificateResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        """FAIL 이 하나도 없으면 통과"""
        return all(result.verdict != Verdict.FAIL for result in self.results)


class CheckpointStat(BaseModel):
    """체크포인트별 시드 요약"""
    checkpoint: int
    median: float
    q25: float
    q75: float


class RunMetadata(BaseModel):
    """시드별 실행 메타데이터"""
    seed: int = Field(..., description="시드")
    problem_id: str = Field(..., description="문제 식별자")
    engine: EngineKind = Field(..., description="엔진")
    schedule: dict[str, Any] = Field(..., description="스텝 설정")
    n_steps: int = Field(..., description="N")
    start_index: int = Field(..., description="beta_n < 1 시작 인덱스 이동")
    final_error: float = Field(..., description="최종 오차")
    checkpoints: list[int] = Field(default_factory=list, description="체크포인트 인덱스")
    tail_stats: list[float] = Field(default_factory=list, description="체크포인트별 꼬리 통계")


class RunOutcome(BaseModel):
    """실행 하나의 저장 결과"""
    name: str = Field(..., description="실행 이름")
    directory: str = Field(..., description="실행 디렉토리")
    seeds: list[int] = Field(default_factory=list)
    summary: list[CheckpointStat] = Field(default_factory=list, description="체크포인트 요약")

    @property
    def final(self) -> CheckpointStat:
        """마지막 체크포인트 요약"""
        return self.summary[-1]
