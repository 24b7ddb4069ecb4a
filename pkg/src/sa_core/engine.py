"""확률 근사 반복 엔진.

세 반복 모두 빼기 형태 X_{n+1} = X_n - alpha_n (G(X_n) + c_n Z_{n+1}) 로 구현한다.
    stochastic:    c_n = 1
    controlled:    c_n = lambda_n(Y_0..Y_n), |lambda_n| <= psi_n = C(1 + max ||Y_k||)
    deterministic: c_n = psi_n (또는 1), 잡음 자리에 -z_{n+1} 을 넣어 더하기 형태와 일치
theta alpha_n >= 1 인 초기 스텝은 건너뛴다 (시작 인덱스 n0, 메타데이터에 기록).
"""
import logging
from typing import Any, Callable, Optional

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from src.core.config import settings
from src.core.exceptions import ContractViolation, NumericDivergence
from src.core.models import EngineKind, RunMetadata
from src.interfaces.control import LambdaPolicyInterface, ZSequenceInterface
from src.noise.samplers import NoiseModel
from src.operators.problems import RootProblem
from src.sa_core.accumulate import CompensatedSum
from src.schedule.steps import StepSchedule, start_index
from src.space.grid import FloatArray, GridFunction

logger = logging.getLogger(__name__)


class Trajectory(BaseModel):
    """반복 결과 (체크포인트 반복값 + 스텝별 오차)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    seed: Optional[int] = Field(default=None, description="시드 (결정적 실행은 None)")
    problem_id: str
    engine: EngineKind
    schedule: dict[str, Any]
    n_steps: int
    start_index: int = Field(..., description="건너뛴 초기 스텝 수 n0")
    checkpoints: list[int]
    iterates: list[GridFunction] = Field(..., description="체크포인트 반복값")
    final: GridFunction
    error_curve: FloatArray = Field(..., description="||X_n - x*||, n = 0..N")
    psi_curve: FloatArray = Field(..., description="psi_n, n = 0..N-1")
    chi_curve: Optional[FloatArray] = Field(default=None, description="lambda_n / psi_n")
    tail_stats: FloatArray = Field(..., description="max_{n>=j} ||S_{n+1} - S_j||, j 는 체크포인트")
    partial_sum: GridFunction = Field(..., description="S_N = sum alpha_k Z_{k+1}")

    @property
    def final_error(self) -> float:
        return float(self.error_curve[-1])

    def checkpoint_errors(self) -> FloatArray:
        return self.error_curve[self.checkpoints]

    def metadata(self) -> RunMetadata:
        return RunMetadata(
            seed=self.seed if self.seed is not None else -1,
            problem_id=self.problem_id,
            engine=self.engine,
            schedule=self.schedule,
            n_steps=self.n_steps,
            start_index=self.start_index,
            final_error=self.final_error,
            checkpoints=self.checkpoints,
            tail_stats=[float(v) for v in self.tail_stats],
        )


def checkpoint_indices(n_steps: int, base: int = 2) -> list[int]:
    """1, b, b^2, ... (<= N) 와 N"""
    points = []
    k = 1
    while k <= n_steps:
        points.append(k)
        k *= base
    if points[-1] != n_steps:
        points.append(n_steps)
    return points


def _iterate(
    problem: RootProblem,
    schedule: StepSchedule,
    x0: GridFunction,
    n_steps: int,
    perturbation: Callable[[int, int], np.ndarray],
    engine: EngineKind,
    *,
    seed: Optional[int] = None,
    policy: Optional[LambdaPolicyInterface] = None,
    c_bound: float = 1.0,
    psi_enabled: bool = True,
    checkpoint_base: int = 2,
) -> Trajectory:
    if n_steps < 1:
        raise ValueError(f"N 은 1 이상이어야 합니다: {n_steps}")
    space = problem.space
    space.check(x0)
    norm = space.norm_values
    n0 = start_index(schedule, problem.theta)
    alphas = schedule.alphas(n0 + n_steps)[n0:]
    logger.info(
        "%s 실행 시작: %s, N=%d, n0=%d, seed=%s",
        engine.value, problem.problem_id, n_steps, n0, seed,
    )

    x_star = problem.x_star.values
    x = np.array(x0.values)
    errors = np.empty(n_steps + 1)
    errors[0] = float(norm(x - x_star))
    psi_curve = np.empty(n_steps)
    chi_curve = np.empty(n_steps) if engine == EngineKind.CONTROLLED else None

    checkpoints = checkpoint_indices(n_steps, checkpoint_base)
    checkpoint_set = set(checkpoints)
    iterates: list[GridFunction] = []
    anchors = np.empty((len(checkpoints),) + x.shape)
    tails = np.zeros(len(checkpoints))
    n_anchors = 0
    partial = CompensatedSum(x.shape)

    if policy is not None:
        policy.reset()
    y_norm = float(norm(x))
    max_norm = y_norm
    limit = settings.overflow_limit

    for k in range(n_steps):
        a = alphas[k]
        max_norm = max(max_norm, y_norm)
        psi = c_bound * (1.0 + max_norm)
        z = perturbation(k, n0 + k)
        gx = problem.apply(x)

        if engine == EngineKind.STOCHASTIC:
            psi_curve[k] = psi
            step = gx + z
        elif engine == EngineKind.CONTROLLED:
            assert policy is not None and chi_curve is not None
            policy.observe(k, x, y_norm)
            lam = policy.value(k, x, y_norm, max_norm)
            if not np.isfinite(lam) or abs(lam) > psi:
                logger.error("lambda 상한 위반: n=%d, lambda=%g, psi=%g", k, lam, psi)
                raise ContractViolation(
                    f"|lambda_n| = {lam:g} > C(1 + max||Y_k||) = {psi:g}", step=k
                )
            psi_curve[k] = psi
            chi_curve[k] = lam / psi
            step = gx + lam * z
        else:
            coef = psi if psi_enabled else 1.0
            psi_curve[k] = coef
            step = gx - coef * z

        x = x - a * step
        partial.add(a * z)

        y_norm = float(norm(x))
        error = float(norm(x - x_star))
        if not (np.isfinite(y_norm) and np.isfinite(error)) or y_norm > limit:
            logger.error("수치 발산: n=%d", k + 1)
            raise NumericDivergence("반복값이 발산했습니다", step=k + 1, last_error=float(errors[k]))
        errors[k + 1] = error

        if n_anchors:
            current = partial.current
            spread = np.asarray(norm(current - anchors[:n_anchors]))
            np.maximum(tails[:n_anchors], spread, out=tails[:n_anchors])
        if k + 1 in checkpoint_set:
            iterates.append(GridFunction(x))
            anchors[n_anchors] = partial.current
            n_anchors += 1
            logger.debug("체크포인트 n=%d 오차=%.6g", k + 1, error)

    logger.info("%s 실행 종료: 최종 오차 %.6g", engine.value, errors[-1])
    return Trajectory(
        seed=seed,
        problem_id=problem.problem_id,
        engine=engine,
        schedule=schedule.describe(),
        n_steps=n_steps,
        start_index=n0,
        checkpoints=checkpoints,
        iterates=iterates,
        final=GridFunction(x),
        error_curve=errors,
        psi_curve=psi_curve,
        chi_curve=chi_curve,
        tail_stats=tails,
        partial_sum=GridFunction(partial.value()),
    )


def _noise_stream(noise: NoiseModel, seed: int) -> Callable[[int, int], np.ndarray]:
    """스텝 k 의 잡음 Z_{k+1} (블록 단위로 생성)"""
    cache: dict[str, Any] = {"block": -1, "values": None}
    size = noise.block_size

    def at(k: int, _n: int) -> np.ndarray:
        block = k // size
        if block != cache["block"]:
            cache["block"] = block
            cache["values"] = noise.sample_block(block, seed)
        return cache["values"][k % size]

    return at


def run_stochastic(
    problem: RootProblem,
    noise: NoiseModel,
    schedule: StepSchedule,
    x0: GridFunction,
    n_steps: int,
    seed: int,
    checkpoint_base: int = 2,
) -> Trajectory:
    """X_{n+1} = X_n - alpha_n (G(X_n) + Z_{n+1})"""
    return _iterate(
        problem, schedule, x0, n_steps, _noise_stream(noise, seed), EngineKind.STOCHASTIC,
        seed=seed, checkpoint_base=checkpoint_base,
    )


def run_controlled(
    problem: RootProblem,
    noise: NoiseModel,
    schedule: StepSchedule,
    policy: LambdaPolicyInterface,
    c_bound: float,
    x0: GridFunction,
    n_steps: int,
    seed: int,
    checkpoint_base: int = 2,
) -> Trajectory:
    """Y_{n+1} = Y_n - alpha_n (G(Y_n) + lambda_n(Y_0..Y_n) Z_{n+1})"""
    if c_bound <= 0.0:
        raise ValueError(f"C 는 양수여야 합니다: {c_bound}")
    return _iterate(
        problem, schedule, x0, n_steps, _noise_stream(noise, seed), EngineKind.CONTROLLED,
        seed=seed, policy=policy, c_bound=c_bound, checkpoint_base=checkpoint_base,
    )


def run_deterministic(
    problem: RootProblem,
    z_sequence: ZSequenceInterface,
    schedule: StepSchedule,
    psi_enabled: bool,
    x0: GridFunction,
    n_steps: int,
    c_bound: float = 1.0,
    checkpoint_base: int = 2,
) -> Trajectory:
    """x_{n+1} = x_n - alpha_n G(x_n) + psi_n alpha_n z_{n+1}

    z 수열은 스텝 크기와 같은 인덱스 (n0 + k) 로 읽는다.
    """
    def perturbation(_k: int, n: int) -> np.ndarray:
        return z_sequence.value(n)

    return _iterate(
        problem, schedule, x0, n_steps, perturbation, EngineKind.DETERMINISTIC,
        psi_enabled=psi_enabled, c_bound=c_bound, checkpoint_base=checkpoint_base,
    )


def partial_noise_sum(samples: ArrayLike, schedule: StepSchedule, up_to: int) -> GridFunction:
    """S_{n+1} = sum_{k=0}^{n} alpha_k Z_{k+1}, samples[k] = Z_{k+1}"""
    values = np.asarray(samples, dtype=np.float64)
    if values.ndim != 3 or up_to >= values.shape[0] or up_to < 0:
        raise ValueError(f"표본 (K, M, d) 에 n={up_to} 까지의 항이 없습니다")
    alphas = schedule.alphas(up_to + 1)
    total = CompensatedSum(values.shape[1:])
    for k in range(up_to + 1):
        total.add(alphas[k] * values[k])
    return GridFunction(total.value())
