import io
import json
import logging
import os
import shutil
from pathlib import Path
from typing import Any, Optional, Sequence

import aiofiles
import numpy as np
from slugify import slugify

from src.core.config import settings
from src.core.models import CertificateReport, CheckpointStat
from src.diagnostics.convergence import checkpoint_summary
from src.sa_core.engine import Trajectory
from src.space.io import FLOAT_FORMAT, format_csv

logger = logging.getLogger(__name__)


def format_table(header: Sequence[str], columns: Sequence[Any]) -> str:
    """첫 열은 정수, 나머지는 17 유효숫자인 CSV"""
    table = np.column_stack([np.asarray(c, dtype=np.float64) for c in columns])
    fmt = ["%d"] + [FLOAT_FORMAT] * (table.shape[1] - 1)
    buffer = io.StringIO()
    np.savetxt(buffer, table, fmt=fmt, delimiter=",", header=",".join(header), comments="")
    return buffer.getvalue()


def point_name(axis: str, value: Any) -> str:
    """스윕 점 디렉토리 이름"""
    return slugify(f"{axis} {value}")


def error_curves(trajectories: Sequence[Trajectory]) -> np.ndarray:
    return np.vstack([t.error_curve for t in trajectories])


def summarize(trajectories: Sequence[Trajectory]) -> list[CheckpointStat]:
    """시드들의 체크포인트별 중앙값/사분위"""
    return checkpoint_summary(error_curves(trajectories), trajectories[0].checkpoints)


class OutputService:
    """실행 디렉토리 저장소 (Repository Pattern)

    모든 파일은 `<root>/.tmp-<name>` 에 먼저 쓰고 성공하면 이름을 바꾼다.
    """

    def __init__(self, root: Optional[str | Path] = None):
        self.root = Path(root or settings.out_dir)

    def _staging(self, name: str) -> Path:
        staging = self.root / f".tmp-{name}"
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        return staging

    def _commit(self, staging: Path, name: str) -> Path:
        final = self.root / name
        if final.exists():
            shutil.rmtree(final)
        os.replace(staging, final)
        logger.info("결과 저장: %s", final)
        return final

    async def _write(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(path, "w", encoding="utf-8", newline="\n") as file:
            await file.write(text)

    async def _write_trajectories(self, directory: Path, trajectories: Sequence[Trajectory]) -> None:
        records = []
        for trajectory in trajectories:
            seed = trajectory.seed if trajectory.seed is not None else 0
            records.append(trajectory.metadata().model_dump_json())
            n = np.arange(trajectory.error_curve.size)
            await self._write(
                directory / f"error_seed{seed}.csv",
                format_table(["n", "error"], [n, trajectory.error_curve]),
            )
            for k, iterate in zip(trajectory.checkpoints, trajectory.iterates):
                await self._write(directory / "checkpoints" / f"seed{seed}_n{k}.csv", format_csv(iterate))
        await self._write(directory / "metadata.jsonl", "\n".join(records) + "\n")

    async def _write_summary(self, directory: Path, trajectories: Sequence[Trajectory]) -> None:
        stats = summarize(trajectories)
        await self._write(
            directory / "summary.csv",
            format_table(
                ["checkpoint", "median", "q25", "q75"],
                [
                    [s.checkpoint for s in stats],
                    [s.median for s in stats],
                    [s.q25 for s in stats],
                    [s.q75 for s in stats],
                ],
            ),
        )
        curves = error_curves(trajectories)
        await self._write(
            directory / "plot_error.csv",
            format_table(["n", "median"], [np.arange(curves.shape[1]), np.median(curves, axis=0)]),
        )

    async def save_run(self, name: str, trajectories: Sequence[Trajectory]) -> Path:
        """시드별 결과와 요약을 원자적으로 저장"""
        if not trajectories:
            raise ValueError("저장할 실행 결과가 없습니다")
        staging = self._staging(name)
        try:
            await self._write_trajectories(staging, trajectories)
            await self._write_summary(staging, trajectories)
        except Exception:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        return self._commit(staging, name)

    async def save_certificates(self, name: str, report: CertificateReport) -> Path:
        """인증서 결과 certificates.jsonl"""
        staging = self._staging(name)
        try:
            lines = [
                json.dumps({"regime": report.regime.value, **result.model_dump(mode="json")}, ensure_ascii=False)
                for result in report.results
            ]
            await self._write(staging / "certificates.jsonl", "\n".join(lines) + "\n")
        except Exception:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        return self._commit(staging, name)

    async def save_sweep_summary(self, name: str, axis: str, rows: Sequence[dict[str, Any]]) -> Path:
        """스윕 점별 최종 중앙값 요약 (값, 디렉토리, median, q25, q75)"""
        lines = [f"{axis},run,final_median,final_q25,final_q75"]
        for row in rows:
            lines.append(
                ",".join(
                    [
                        str(row["value"]),
                        row["run"],
                        FLOAT_FORMAT % row["median"],
                        FLOAT_FORMAT % row["q25"],
                        FLOAT_FORMAT % row["q75"],
                    ]
                )
            )
        path = self.root / name / "sweep_summary.csv"
        await self._write(path, "\n".join(lines) + "\n")
        logger.info("스윕 요약 저장: %s", path)
        return path
