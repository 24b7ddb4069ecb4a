import asyncio
from pathlib import Path
from typing import Any, Coroutine, Optional, TypeVar

import typer
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from src.core.config import settings
from src.core.exceptions import ConfigError, SAError
from src.core.log import setup_logging
from src.core.models import CertificateReport, RunOutcome, Verdict
from src.services.experiment_service import ExperimentService
from src.services.factory import load_config, parse_scalar

app = typer.Typer(help="이산화 바나흐 공간 확률 근사 실험 하네스")
console = Console()

T = TypeVar("T")

_VERDICT_STYLE = {
    Verdict.PASS: "green",
    Verdict.FAIL: "red",
    Verdict.INCONCLUSIVE: "yellow",
}


@app.callback()
def main(
    ctx: typer.Context,
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="출력 디렉토리 (기본: BANACH_SA_OUT_DIR)"),
    jobs: Optional[int] = typer.Option(None, "--jobs", "-j", min=1, help="워커 프로세스 수 (기본: BANACH_SA_JOBS)"),
    log_level: Optional[str] = typer.Option(None, "--log-level", "-l", help="로그 레벨"),
):
    """전역 옵션"""
    setup_logging(level=log_level)
    ctx.obj = {"out": out, "jobs": jobs or settings.jobs}


def _service(ctx: typer.Context) -> ExperimentService:
    obj = ctx.obj or {}
    return ExperimentService(out_dir=obj.get("out"), jobs=obj.get("jobs"))


def _execute(coro: Coroutine[Any, Any, T], description: str) -> T:
    """비동기 작업 실행, 예외를 문서화된 종료 코드로 변환"""
    try:
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            transient=True,
        ) as progress:
            progress.add_task(description, total=None)
            return asyncio.run(coro)
    except SAError as e:
        kind = type(e).__name__
        console.print(f"[red]{kind}:[/red] {e}")
        raise typer.Exit(e.exit_code)


def _display_outcome(outcome: RunOutcome) -> None:
    """체크포인트 요약 출력"""
    table = Table(title=f"{outcome.name} (시드 {len(outcome.seeds)} 개)")
    table.add_column("n", style="cyan", justify="right")
    table.add_column("median", style="white", justify="right")
    table.add_column("q25", style="blue", justify="right")
    table.add_column("q75", style="blue", justify="right")
    for stat in outcome.summary:
        table.add_row(str(stat.checkpoint), f"{stat.median:.6g}", f"{stat.q25:.6g}", f"{stat.q75:.6g}")
    console.print(table)
    console.print(f"[green]저장:[/green] {outcome.directory}")


def _display_certificates(report: CertificateReport, directory: Path) -> None:
    table = Table(title=f"인증서 ({report.regime.value})")
    table.add_column("검사", style="white")
    table.add_column("판정")
    table.add_column("값", justify="right")
    table.add_column("설명", style="dim")
    for result in report.results:
        style = _VERDICT_STYLE[result.verdict]
        table.add_row(
            result.name,
            f"[{style}]{result.verdict.value}[/{style}]",
            "" if result.value is None else f"{result.value:.6g}",
            "; ".join([result.detail, *result.issues]).strip("; "),
        )
    console.print(table)
    console.print(f"[green]저장:[/green] {directory}")


@app.command("run")
def run_experiment(
    ctx: typer.Context,
    config_path: Path = typer.Argument(..., help="실험 설정 TOML"),
):
    """모든 시드를 실행하고 실행 디렉토리 저장"""
    outcome = _execute(_run_async(ctx, config_path), "실행 중...")
    _display_outcome(outcome)


async def _run_async(ctx: typer.Context, config_path: Path) -> RunOutcome:
    config = load_config(config_path)
    return await _service(ctx).run(config)


@app.command("verify")
def verify(
    ctx: typer.Context,
    config_path: Path = typer.Argument(..., help="실험 설정 TOML"),
):
    """체제에 해당하는 인증서 검사 (FAIL 이 있으면 종료 코드 1)"""
    report, directory = _execute(_verify_async(ctx, config_path), "인증서 검사 중...")
    _display_certificates(report, directory)
    if not report.passed:
        raise typer.Exit(1)


async def _verify_async(ctx: typer.Context, config_path: Path) -> tuple[CertificateReport, Path]:
    config = load_config(config_path)
    return await _service(ctx).verify(config)


@app.command("sweep")
def sweep(
    ctx: typer.Context,
    config_path: Path = typer.Argument(..., help="실험 설정 TOML"),
    axis: str = typer.Option(..., "--axis", "-a", help="파라미터 점 경로 (예: problem.gamma)"),
    values: str = typer.Option(..., "--values", "-v", help="쉼표로 구분한 값 목록"),
):
    """한 파라미터 스윕: 값마다 실행 디렉토리와 종합 요약"""
    parsed = [parse_scalar(v) for v in values.split(",") if v.strip()]
    outcomes = _execute(_sweep_async(ctx, config_path, axis, parsed), "스윕 실행 중...")

    table = Table(title=f"스윕 {axis}")
    table.add_column(axis, style="cyan")
    table.add_column("최종 median", justify="right")
    table.add_column("디렉토리", style="dim")
    for value, outcome in zip(parsed, outcomes):
        table.add_row(str(value), f"{outcome.final.median:.6g}", outcome.directory)
    console.print(table)


async def _sweep_async(ctx: typer.Context, config_path: Path, axis: str, values: list[Any]) -> list[RunOutcome]:
    config = load_config(config_path)
    if not values:
        raise ConfigError("스윕 값 목록이 비어 있습니다", key="values")
    return await _service(ctx).sweep(config, axis, values)


@app.command("config")
def show_config():
    """현재 설정 표시"""
    console.print(Panel.fit(
        f"""[bold]출력[/bold]
디렉토리: {settings.out_dir}
워커 수: {settings.jobs}
로그 레벨: {settings.log_level_name}
로그 파일: {settings.log_file or "없음"}

[bold]급수 판정[/bold]
발산 임계값: {settings.divergence_threshold:g}
코시 허용오차: {settings.cauchy_tolerance:g}
수렴/발산 지수: {settings.converge_exponent:g} / {settings.diverge_exponent:g}

[bold]인증서[/bold]
근 조건 허용오차: {settings.r2_tolerance:g}
근 조건 표본 수: {settings.r2_samples}
급수 최대 항 수: {settings.certificate_horizon}

[bold]엔진[/bold]
발산 한계: {settings.overflow_limit:g}
잡음 블록 크기: {settings.noise_block_size}
        """,
        title="현재 설정",
        border_style="green"
    ))


if __name__ == "__main__":
    app()
