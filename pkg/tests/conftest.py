from pathlib import Path
from typing import Any, Callable

import pytest

from src.core.models import ExperimentConfig
from src.services.factory import parse_config
from src.space.grid import Smoothness, SpaceDescriptor

SMALL_CONFIG = """
regime = "gaussian"

[space]
norm_kind = "sup"
m = 11

[problem]
kind = "linear_contraction"
gamma = 0.5

[problem.target]
shape = "sine"
amplitude = 1.0

[noise]
kind = "gaussian_iid"
sigma = 1.0
seed = 3

[schedule]
kind = "power_law"
a = 1.0
b = 10.0
q = 1.0

[run]
n_steps = 64
n_seeds = 2

[run.x0]
shape = "zero"

[output]
name = "small"
"""


@pytest.fixture
def sup_space() -> SpaceDescriptor:
    return SpaceDescriptor.sup(m=21)


@pytest.fixture
def l1_space() -> SpaceDescriptor:
    return SpaceDescriptor.lp(1.0, m=21)


@pytest.fixture
def hilbert_space() -> SpaceDescriptor:
    return SpaceDescriptor.lp(2.0, m=21, smoothness=Smoothness(p_smooth=2.0, D=2.0))


@pytest.fixture
def small_config_data() -> dict[str, Any]:
    """작은 가우스 실험 설정 dict"""
    return {
        "regime": "gaussian",
        "space": {"norm_kind": "sup", "m": 11},
        "problem": {"kind": "linear_contraction", "gamma": 0.5, "target": {"shape": "sine"}},
        "noise": {"kind": "gaussian_iid", "sigma": 1.0, "seed": 3},
        "schedule": {"kind": "power_law", "a": 1.0, "b": 10.0, "q": 1.0},
        "run": {"n_steps": 64, "n_seeds": 2, "x0": {"shape": "zero"}},
        "output": {"name": "small"},
    }


@pytest.fixture
def small_config(small_config_data: dict[str, Any]) -> ExperimentConfig:
    return parse_config(small_config_data)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str], Path]:
    """TOML 텍스트를 임시 파일로 저장"""

    def write(text: str = SMALL_CONFIG, name: str = "experiment.toml") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
