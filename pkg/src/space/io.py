import io
from pathlib import Path

import numpy as np

from src.space.grid import GridFunction, grid_nodes

# 17 유효숫자 (double 왕복 보장)
FLOAT_FORMAT = "%.17g"


def csv_header(d: int) -> str:
    """`t,v0,...,v{d-1}` 헤더"""
    return ",".join(["t"] + [f"v{i}" for i in range(d)])


def format_csv(f: GridFunction) -> str:
    """GridFunction 을 CSV 문자열로 직렬화"""
    table = np.column_stack([f.nodes, f.values])
    buffer = io.StringIO()
    np.savetxt(buffer, table, fmt=FLOAT_FORMAT, delimiter=",", header=csv_header(f.d), comments="")
    return buffer.getvalue()


def parse_csv(text: str) -> GridFunction:
    """CSV 문자열에서 GridFunction 복원"""
    lines = text.strip().splitlines()
    if not lines:
        raise ValueError("빈 CSV 입니다")
    header = lines[0].strip().split(",")
    if header[0] != "t" or len(header) < 2:
        raise ValueError(f"잘못된 헤더: {lines[0]!r}")
    d = len(header) - 1
    if header != csv_header(d).split(","):
        raise ValueError(f"잘못된 헤더: {lines[0]!r}")

    table = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
    if table.shape[1] != d + 1:
        raise ValueError(f"열 개수 불일치: {table.shape[1]} != {d + 1}")
    nodes = grid_nodes(table.shape[0])
    if not np.allclose(table[:, 0], nodes, rtol=0.0, atol=1e-12):
        raise ValueError("격자 노드가 균등 격자 i/(M-1) 과 일치하지 않습니다")
    return GridFunction(table[:, 1:], d=d)


def write_csv(path: str | Path, f: GridFunction) -> None:
    Path(path).write_text(format_csv(f), encoding="utf-8")


def read_csv(path: str | Path) -> GridFunction:
    return parse_csv(Path(path).read_text(encoding="utf-8"))
