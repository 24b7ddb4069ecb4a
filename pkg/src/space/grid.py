"""균등 격자 위의 함수 공간.

C([0,1],R^d) 와 L^p([0,1],R^d) 의 원소는 모두 격자 t_i = i/(M-1) 위의 d-벡터 값
``GridFunction`` 으로 표현한다. D([0,1],R^d) 도 격자 위에서는 동일하다.
R^d 성분의 크기는 유클리드 노름, L^p 적분은 사다리꼴 구적법을 쓴다.
"""
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

FloatArray = NDArray[np.float64]


class NormKind(str, Enum):
    """노름 종류"""
    SUP = "sup"
    LP = "lp"


class Smoothness(BaseModel):
    """p-균등 평활성 (p_smooth, D)"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    p_smooth: float = Field(..., gt=1.0, le=2.0, description="평활성 지수")
    D: float = Field(..., gt=0.0, description="평활성 상수")


@lru_cache(maxsize=64)
def grid_nodes(m: int) -> FloatArray:
    """격자 노드 t_i = i/(M-1)"""
    if m < 2:
        raise ValueError(f"격자 크기는 2 이상이어야 합니다: {m}")
    nodes = np.arange(m, dtype=np.float64) / (m - 1)
    nodes.flags.writeable = False
    return nodes


@lru_cache(maxsize=64)
def trapezoid_weights(m: int) -> FloatArray:
    """사다리꼴 가중치 (합 = 1)"""
    if m < 2:
        raise ValueError(f"격자 크기는 2 이상이어야 합니다: {m}")
    h = 1.0 / (m - 1)
    weights = np.full(m, h)
    weights[0] = weights[-1] = 0.5 * h
    weights.flags.writeable = False
    return weights


class GridFunction:
    """격자 위 d-벡터 값 함수 (불변)"""

    __slots__ = ("_values",)

    def __init__(self, values: ArrayLike, d: Optional[int] = None):
        array = np.array(values, dtype=np.float64)
        if array.ndim == 1:
            width = d or 1
            if array.size % width:
                raise ValueError(f"값 길이 {array.size} 가 d={width} 의 배수가 아닙니다")
            array = array.reshape(-1, width)
        if array.ndim != 2:
            raise ValueError(f"값 배열은 (M, d) 모양이어야 합니다: {array.shape}")
        if d is not None and array.shape[1] != d:
            raise ValueError(f"공역 차원 불일치: {array.shape[1]} != {d}")
        if array.shape[0] < 2:
            raise ValueError("격자 크기 M 은 2 이상이어야 합니다")
        if not np.all(np.isfinite(array)):
            raise ValueError("GridFunction 에 NaN/Inf 값이 있습니다")
        array.flags.writeable = False
        self._values = array

    @classmethod
    def from_callable(
        cls, func: Callable[[FloatArray], ArrayLike], m: int, d: int = 1
    ) -> "GridFunction":
        """t -> f(t) 를 격자에서 평가"""
        raw = np.asarray(func(grid_nodes(m)), dtype=np.float64)
        if raw.ndim == 1:
            raw = np.repeat(raw[:, None], d, axis=1)
        return cls(raw, d=d)

    @classmethod
    def zero(cls, m: int, d: int = 1) -> "GridFunction":
        """영 함수"""
        return cls(np.zeros((m, d)))

    @property
    def values(self) -> FloatArray:
        """(M, d) 읽기 전용 값"""
        return self._values

    @property
    def flat(self) -> FloatArray:
        """길이 M*d 평탄화 값"""
        return self._values.reshape(-1)

    @property
    def m(self) -> int:
        return int(self._values.shape[0])

    @property
    def d(self) -> int:
        return int(self._values.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.d)

    @property
    def nodes(self) -> FloatArray:
        return grid_nodes(self.m)

    def magnitudes(self) -> FloatArray:
        """노드별 유클리드 크기 |f(t_i)|_2"""
        return node_magnitudes(self._values)

    def copy(self) -> "GridFunction":
        return GridFunction(self._values)

    def _check_shape(self, other: "GridFunction") -> None:
        if self.shape != other.shape:
            raise ValueError(f"모양 불일치: {self.shape} != {other.shape}")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_shape(other)
        return GridFunction(self._values + other._values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check_shape(other)
        return GridFunction(self._values - other._values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(float(scalar) * self._values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(-self._values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._values, other._values))

    __hash__ = None  # type: ignore[assignment]

    def __reduce__(self):
        # 워커 프로세스 간 전달 후에도 읽기 전용 유지
        return type(self), (self._values,)

    def __repr__(self) -> str:
        return f"GridFunction(m={self.m}, d={self.d})"


def add(x: GridFunction, y: GridFunction) -> GridFunction:
    """x + y"""
    return x + y


def scale(a: float, x: GridFunction) -> GridFunction:
    """a x"""
    return x * a


def axpy(a: float, x: GridFunction, y: GridFunction) -> GridFunction:
    """a x + y"""
    x._check_shape(y)
    return GridFunction(a * x.values + y.values)


def zero(m: int, d: int = 1) -> GridFunction:
    return GridFunction.zero(m, d)


def copy(x: GridFunction) -> GridFunction:
    return x.copy()


def node_magnitudes(values: FloatArray) -> FloatArray:
    """(..., M, d) 배열의 노드별 유클리드 크기 (..., M)"""
    if values.shape[-1] == 1:
        return np.abs(values[..., 0])
    return np.sqrt(np.einsum("...i,...i->...", values, values))


def sup_norm_values(values: FloatArray) -> FloatArray | float:
    """max_i |v(t_i)|_2 (배치 지원)"""
    return np.max(node_magnitudes(values), axis=-1)


def lp_norm_values(values: FloatArray, p: float) -> FloatArray | float:
    """(sum_i w_i |v(t_i)|^p)^(1/p) (배치 지원)"""
    if p < 1.0:
        raise ValueError(f"L^p 노름은 p >= 1 이어야 합니다: {p}")
    mags = node_magnitudes(values)
    weights = trapezoid_weights(values.shape[-2])
    if p == 1.0:
        return mags @ weights
    if p == 2.0:
        return np.sqrt((mags * mags) @ weights)
    return ((mags**p) @ weights) ** (1.0 / p)


def sup_norm(f: GridFunction) -> float:
    """sup 노름"""
    return float(sup_norm_values(f.values))


def lp_norm(f: GridFunction, p: float) -> float:
    """사다리꼴 구적 L^p 노름"""
    return float(lp_norm_values(f.values, p))


class SpaceDescriptor(BaseModel):
    """이산화 공간 기술자"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    norm_kind: NormKind = Field(default=NormKind.SUP, description="노름 종류")
    p: Optional[float] = Field(default=None, ge=1.0, description="L^p 지수")
    m: int = Field(default=101, ge=2, description="격자 크기")
    d: int = Field(default=1, ge=1, description="공역 차원")
    smoothness: Optional[Smoothness] = Field(default=None, description="p-균등 평활성")

    @model_validator(mode="after")
    def _check_norm(self) -> "SpaceDescriptor":
        if self.norm_kind == NormKind.SUP and self.p is not None:
            raise ValueError("sup 노름에는 p 를 지정하지 않습니다")
        if self.norm_kind == NormKind.LP and self.p is None:
            raise ValueError("L^p 노름에는 p 가 필요합니다")
        return self

    @classmethod
    def sup(cls, m: int = 101, d: int = 1) -> "SpaceDescriptor":
        return cls(norm_kind=NormKind.SUP, m=m, d=d)

    @classmethod
    def lp(
        cls, p: float, m: int = 101, d: int = 1, smoothness: Optional[Smoothness] = None
    ) -> "SpaceDescriptor":
        return cls(norm_kind=NormKind.LP, p=p, m=m, d=d, smoothness=smoothness)

    @property
    def label(self) -> str:
        if self.norm_kind == NormKind.SUP:
            return f"C([0,1],R^{self.d}) sup, M={self.m}"
        return f"L^{self.p:g}([0,1],R^{self.d}), M={self.m}"

    def norm_values(self, values: FloatArray) -> FloatArray | float:
        """배열 (..., M, d) 에 대한 공간 노름"""
        if self.norm_kind == NormKind.SUP:
            return sup_norm_values(values)
        assert self.p is not None
        return lp_norm_values(values, self.p)

    def norm(self, f: GridFunction) -> float:
        """공간 노름"""
        self.check(f)
        return float(self.norm_values(f.values))

    def check(self, f: GridFunction) -> None:
        """원소 모양 확인"""
        if f.shape != (self.m, self.d):
            raise ValueError(f"공간 모양 {(self.m, self.d)} 과 원소 모양 {f.shape} 불일치")

    def zero(self) -> GridFunction:
        return GridFunction.zero(self.m, self.d)

    def element(self, func: Callable[[FloatArray], ArrayLike]) -> GridFunction:
        return GridFunction.from_callable(func, self.m, self.d)


def smoothness_residual(x: GridFunction, y: GridFunction, space: SpaceDescriptor) -> float:
    """(p-균등 평활성) ||x+y||^p + ||x-y||^p - 2||x||^p - D||y||^p"""
    if space.smoothness is None:
        raise ValueError("공간에 평활성 상수 (p_smooth, D) 가 없습니다")
    x._check_shape(y)
    p = space.smoothness.p_smooth
    nx = space.norm(x)
    ny = space.norm(y)
    plus = space.norm(x + y)
    minus = space.norm(x - y)
    return float(plus**p + minus**p - 2.0 * nx**p - space.smoothness.D * ny**p)


def empirical_smoothness_constant(
    space: SpaceDescriptor, n_pairs: int, seed: int, p_smooth: Optional[float] = None
) -> float:
    """표본 쌍에서 허용되는 가장 작은 D 추정

    max over pairs of (||x+y||^p + ||x-y||^p - 2||x||^p) / ||y||^p
    x 는 단위 노름, y 는 로그-균등 크기 [1e-3, 10] 로 뽑는다.
    """
    p = p_smooth if p_smooth is not None else (space.smoothness.p_smooth if space.smoothness else None)
    if p is None:
        raise ValueError("평활성 지수 p_smooth 가 필요합니다")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5300]))
    shape = (n_pairs, space.m, space.d)
    x = rng.standard_normal(shape)
    y = rng.standard_normal(shape)
    x /= np.asarray(space.norm_values(x))[:, None, None]
    y /= np.asarray(space.norm_values(y))[:, None, None]
    y *= (10.0 ** rng.uniform(-3.0, 1.0, size=n_pairs))[:, None, None]

    norm_y = np.asarray(space.norm_values(y))
    lhs = (
        np.asarray(space.norm_values(x + y)) ** p
        + np.asarray(space.norm_values(x - y)) ** p
        - 2.0 * np.asarray(space.norm_values(x)) ** p
    )
    return float(np.max(lhs / norm_y**p))
