import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional, Sequence

from src.core.config import settings
from src.core.exceptions import ConfigError
from src.core.models import CertificateReport, EngineKind, ExperimentConfig, RunOutcome
from src.certificates.checkers import create_certificate_checker
from src.sa_core.engine import Trajectory
from src.services.factory import Experiment, apply_override, build_experiment
from src.services.output_service import OutputService, point_name, summarize

logger = logging.getLogger(__name__)


def run_seed(config: ExperimentConfig, seed: int) -> Trajectory:
    """워커 프로세스 진입점 (설정만 전달하고 객체는 워커에서 조립)"""
    return build_experiment(config).run(seed)


def effective_seeds(config: ExperimentConfig) -> list[int]:
    """결정적 엔진은 시드와 무관하므로 첫 시드 하나만 실행"""
    seeds = config.seed_list
    if config.run.engine == EngineKind.DETERMINISTIC:
        return seeds[:1]
    return seeds


class ExperimentService:
    """실험 서비스 (Facade Pattern + Service Layer)"""

    def __init__(self, out_dir: Optional[str | Path] = None, jobs: Optional[int] = None):
        self.out_dir = out_dir
        self.jobs = jobs or settings.jobs

    def _output(self, config: ExperimentConfig) -> OutputService:
        return OutputService(self.out_dir or config.output.directory or settings.out_dir)

    async def _execute(self, tasks: Sequence[tuple[ExperimentConfig, int]]) -> list[Trajectory]:
        """(설정, 시드) 작업들을 워커 풀에서 실행, 입력 순서대로 반환"""
        if self.jobs == 1 or len(tasks) == 1:
            results = []
            built: dict[int, Experiment] = {}
            for config, seed in tasks:
                if id(config) not in built:
                    built[id(config)] = build_experiment(config)
                results.append(built[id(config)].run(seed))
                logger.info("시드 %d 완료: 최종 오차 %.6g", seed, results[-1].final_error)
            return results

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=min(self.jobs, len(tasks))) as pool:
            futures = [loop.run_in_executor(pool, run_seed, config, seed) for config, seed in tasks]
            results = list(await asyncio.gather(*futures))
        for trajectory in results:
            logger.info("시드 %s 완료: 최종 오차 %.6g", trajectory.seed, trajectory.final_error)
        return results

    async def run(self, config: ExperimentConfig) -> RunOutcome:
        """모든 시드 실행 후 실행 디렉토리 저장 (메인 워크플로우)"""

        # 1. 설정 검증 (조립 실패는 실행 전에 ConfigError)
        build_experiment(config)
        seeds = effective_seeds(config)

        # 2. 시드 실행
        trajectories = await self._execute([(config, seed) for seed in seeds])

        # 3. 저장
        directory = await self._output(config).save_run(config.output.name, trajectories)
        return RunOutcome(
            name=config.output.name,
            directory=str(directory),
            seeds=seeds,
            summary=summarize(trajectories),
        )

    async def verify(self, config: ExperimentConfig) -> tuple[CertificateReport, Path]:
        """체제에 해당하는 인증서를 모두 검사하고 certificates.jsonl 저장"""
        experiment = build_experiment(config)
        checker = create_certificate_checker(config.regime, seed=config.noise.seed)
        report = await checker.check_all(experiment)
        directory = await self._output(config).save_certificates(
            f"{config.output.name}-verify", report
        )
        return report, directory

    async def sweep(self, config: ExperimentConfig, axis: str, values: Sequence[Any]) -> list[RunOutcome]:
        """한 파라미터에 대한 스윕: 값마다 실행 디렉토리 + 종합 요약"""
        if not values:
            raise ConfigError("스윕 값 목록이 비어 있습니다", key="values")

        # 1. 모든 점의 설정을 먼저 검증
        points = [(value, apply_override(config, axis, value)) for value in values]
        for _, point in points:
            build_experiment(point)

        # 2. 모든 (점, 시드) 작업을 한 풀에서 실행
        tasks = [(point, seed) for _, point in points for seed in effective_seeds(point)]
        trajectories = await self._execute(tasks)

        # 3. 점별 저장 (조인 이후 단일 흐름)
        sweep_name = f"{config.output.name}-sweep"
        output = OutputService(self._output(config).root / sweep_name)
        outcomes, rows, offset = [], [], 0
        for value, point in points:
            count = len(effective_seeds(point))
            chunk = trajectories[offset: offset + count]
            offset += count
            name = point_name(axis, value)
            directory = await output.save_run(name, chunk)
            outcome = RunOutcome(
                name=name, directory=str(directory), seeds=effective_seeds(point), summary=summarize(chunk)
            )
            outcomes.append(outcome)
            final = outcome.final
            rows.append({"value": value, "run": name, "median": final.median, "q25": final.q25, "q75": final.q75})

        await self._output(config).save_sweep_summary(sweep_name, axis, rows)
        return outcomes
