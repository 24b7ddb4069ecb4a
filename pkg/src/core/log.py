import logging
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler

from src.core.config import settings

_FILE_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str | None = None, log_file: str | None = None) -> None:
    """루트 로거 설정 (콘솔은 rich, 파일은 평문)"""
    level_name = (level or settings.log_level_name).upper()
    handlers: list[logging.Handler] = [
        RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    ]

    target = log_file or settings.log_file
    if target:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(target, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(_FILE_FORMAT))
        handlers.append(file_handler)

    logging.basicConfig(level=level_name, format="%(message)s", handlers=handlers, force=True)
