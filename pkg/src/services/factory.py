"""설정 트리 -> 실행 객체 조립 (Factory)"""
import copy
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from src.core.exceptions import ConfigError
from src.core.models import (
    EngineKind,
    ExperimentConfig,
    LambdaKind,
    LambdaSpec,
    NoiseKind,
    OperatorKind,
    ProfileSpec,
    ZSequenceKind,
)
from src.interfaces.control import LambdaPolicyInterface, ZSequenceInterface
from src.noise.samplers import (
    GaussianIIDNoise,
    HeavyTailedGlobalNoise,
    HeavyTailedPointwiseNoise,
    MartingaleNoise,
    NoiseModel,
)
from src.operators.problems import (
    MonotoneBounds,
    RootProblem,
    kernel_contraction,
    linear_contraction,
    pointwise_monotone,
    quadratic_gradient,
)
from src.sa_core.engine import Trajectory, run_controlled, run_deterministic, run_stochastic
from src.sa_core.policies import (
    ClippedNormLambda,
    ConstantLambda,
    ConstantSequence,
    RunningMaxLambda,
    SummableAlternatingSequence,
    ZeroSequence,
)
from src.schedule.steps import StepSchedule
from src.space.grid import FloatArray, GridFunction, SpaceDescriptor

logger = logging.getLogger(__name__)

Profile = Callable[[FloatArray], FloatArray]


def profile_function(spec: ProfileSpec) -> Profile:
    """모양 이름 -> t 의 함수"""
    amp = spec.amplitude
    if spec.shape == "zero":
        return lambda t: np.zeros_like(t)
    if spec.shape == "constant":
        return lambda t: np.full_like(t, amp)
    if spec.shape == "sine":
        return lambda t: amp * np.sin(2.0 * np.pi * t)
    return lambda t: amp * t


def build_profile(spec: ProfileSpec, space: SpaceDescriptor) -> GridFunction:
    return space.element(profile_function(spec))


def build_problem(config: ExperimentConfig) -> RootProblem:
    """연산자 설정 -> RootProblem"""
    spec = config.problem
    space = config.space
    target = profile_function(spec.target)

    if spec.kind == OperatorKind.LINEAR_CONTRACTION:
        return linear_contraction(spec.gamma, space.element(target), space)
    if spec.kind == OperatorKind.KERNEL_CONTRACTION:
        return kernel_contraction(spec.gamma, spec.length_scale, space.element(target), space)

    # pointwise_monotone
    if spec.monotone == "linear":
        c = spec.c

        def g_linear(t: FloatArray, v: FloatArray) -> FloatArray:
            return c * (v - target(t))

        return pointwise_monotone(
            g_linear,
            MonotoneBounds(c1=spec.c1, c2=spec.c2),
            space,
            x_star=space.element(target),
            problem_id=f"pointwise_linear(c={c:g})",
        )
    if spec.monotone == "arctan":

        def g_arctan(t: FloatArray, v: FloatArray) -> FloatArray:
            return v + np.arctan(v) - target(t)

        # dg/dv = 1 + 1/(1+v^2) in (1, 2]
        return pointwise_monotone(
            g_arctan, MonotoneBounds(c1=1.0, c2=2.0), space, problem_id="pointwise_arctan"
        )

    c1, c2 = spec.c1, spec.c2

    def a(t: FloatArray) -> FloatArray:
        return c1 + (c2 - c1) * np.asarray(t)

    def b(t: FloatArray) -> FloatArray:
        return a(t) * target(np.asarray(t, dtype=np.float64))

    return quadratic_gradient(a, b, space)


def build_noise(config: ExperimentConfig) -> NoiseModel:
    """잡음 설정 -> 샘플러"""
    spec = config.noise
    space = config.space
    if spec.kind == NoiseKind.GAUSSIAN_IID:
        return GaussianIIDNoise(space, spec.sigma)
    if spec.kind == NoiseKind.MARTINGALE:
        return MartingaleNoise(space, spec.sigma)
    if spec.kind == NoiseKind.HEAVY_TAILED_POINTWISE:
        return HeavyTailedPointwiseNoise(space, spec.tail_exponent, spec.scale, spec.scale_power)
    return HeavyTailedGlobalNoise(space, spec.tail_exponent, spec.scale, spec.scale_power)


def build_policy(spec: LambdaSpec) -> LambdaPolicyInterface:
    if spec.kind == LambdaKind.CONSTANT:
        return ConstantLambda(spec.c)
    if spec.kind == LambdaKind.CLIPPED_NORM:
        return ClippedNormLambda()
    return RunningMaxLambda()


def build_z_sequence(config: ExperimentConfig, schedule: StepSchedule) -> ZSequenceInterface:
    assert config.deterministic is not None
    spec = config.deterministic
    space = config.space
    if spec.z == ZSequenceKind.ZERO:
        return ZeroSequence(space.m, space.d)
    h = build_profile(spec.h, space).values
    if spec.z == ZSequenceKind.SUMMABLE_ALTERNATING:
        return SummableAlternatingSequence(schedule, h)
    return ConstantSequence(h)


class Experiment(BaseModel):
    """조립된 실험 (문제, 잡음, 스텝, 초기점, 제어 정책)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    config: ExperimentConfig
    problem: RootProblem
    noise: NoiseModel
    schedule: StepSchedule
    x0: GridFunction
    policy: Optional[LambdaPolicyInterface] = None
    z_sequence: Optional[ZSequenceInterface] = None

    @property
    def space(self) -> SpaceDescriptor:
        return self.config.space

    def run(self, seed: int) -> Trajectory:
        """설정된 엔진으로 시드 하나 실행"""
        run = self.config.run
        if run.engine == EngineKind.STOCHASTIC:
            return run_stochastic(
                self.problem, self.noise, self.schedule, self.x0, run.n_steps, seed,
                checkpoint_base=run.checkpoint_base,
            )
        if run.engine == EngineKind.CONTROLLED:
            assert self.policy is not None and self.config.lambda_ is not None
            return run_controlled(
                self.problem, self.noise, self.schedule, self.policy,
                self.config.lambda_.c_bound, self.x0, run.n_steps, seed,
                checkpoint_base=run.checkpoint_base,
            )
        assert self.z_sequence is not None and self.config.deterministic is not None
        trajectory = run_deterministic(
            self.problem, self.z_sequence, self.schedule,
            self.config.deterministic.psi_enabled, self.x0, run.n_steps,
            checkpoint_base=run.checkpoint_base,
        )
        return trajectory.model_copy(update={"seed": seed})


def _guarded(key: str, build: Callable[[], Any]) -> Any:
    """생성 단계 ValueError 를 설정 키가 붙은 ConfigError 로 변환"""
    try:
        return build()
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e), key=key) from e


def build_experiment(config: ExperimentConfig) -> Experiment:
    """설정 -> Experiment"""
    schedule = _guarded("schedule", lambda: StepSchedule.from_spec(config.schedule))
    problem = _guarded("problem", lambda: build_problem(config))
    noise = _guarded("noise", lambda: build_noise(config))
    x0 = build_profile(config.run.x0, config.space)

    policy = build_policy(config.lambda_) if config.lambda_ is not None else None
    z_sequence = None
    if config.deterministic is not None:
        z_sequence = _guarded("deterministic", lambda: build_z_sequence(config, schedule))

    logger.debug("실험 조립 완료: %s, %s", problem.problem_id, config.space.label)
    return Experiment(
        config=config,
        problem=problem,
        noise=noise,
        schedule=schedule,
        x0=x0,
        policy=policy,
        z_sequence=z_sequence,
    )


def _error_location(error: ValidationError) -> tuple[str, str]:
    """첫 검증 오류의 (점 경로 키, 메시지)"""
    first = error.errors()[0]
    key = ".".join(str(part) for part in first["loc"])
    message = first["msg"].removeprefix("Value error, ")
    # 모델 수준 검증기는 "키: 설명" 형태로 메시지를 만든다
    if not key and ": " in message:
        key, message = message.split(": ", 1)
    return key, message


def parse_config(data: dict[str, Any]) -> ExperimentConfig:
    """dict -> ExperimentConfig (검증 오류는 ConfigError)"""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        key, message = _error_location(e)
        raise ConfigError(message, key=key or None) from e


def load_config(path: str | Path) -> ExperimentConfig:
    """TOML 설정 파일 읽기"""
    target = Path(path)
    try:
        data = tomllib.loads(target.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"설정 파일이 없습니다: {target}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML 파싱 실패: {e}") from e
    logger.debug("설정 로드: %s", target)
    return parse_config(data)


def parse_scalar(text: str) -> Any:
    """스윕 값 문자열을 TOML 스칼라로 해석 (실패하면 문자열 그대로)"""
    try:
        return tomllib.loads(f"value = {text.strip()}")["value"]
    except tomllib.TOMLDecodeError:
        return text.strip()


def apply_override(config: ExperimentConfig, path: str, value: Any) -> ExperimentConfig:
    """점 경로 (예: problem.gamma) 하나를 바꾼 새 설정"""
    data = copy.deepcopy(config.model_dump(mode="json", by_alias=True))
    parts = path.split(".")
    node: Any = data
    for part in parts[:-1]:
        if not isinstance(node, dict) or not isinstance(node.get(part), dict):
            raise ConfigError("알 수 없는 파라미터 경로입니다", key=path)
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError("알 수 없는 파라미터 경로입니다", key=path)
    node[parts[-1]] = value
    return parse_config(data)
