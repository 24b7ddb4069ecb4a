"""근 문제 G(x) = 0 구성과 근 조건 ||x - x* - theta^-1 (G(x) - G(x*))|| <= rho ||x - x*|| 검증"""
import logging
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import bisect

from src.core.exceptions import InsufficientDataError, RootBracketError
from src.space.grid import FloatArray, GridFunction, SpaceDescriptor, grid_nodes, trapezoid_weights

logger = logging.getLogger(__name__)

ArrayMap = Callable[[FloatArray], FloatArray]
ScalarMap = Callable[[FloatArray, FloatArray], FloatArray]

ROOT_TOLERANCE = 1e-9
BISECTION_TOLERANCE = 1e-12
PICARD_TOLERANCE = 1e-12
MIN_OFFSET_NORM = 1e-14
MIN_RADIUS = 1e-10
MAX_EMPTY_CHUNKS = 100


class MonotoneBounds(BaseModel):
    """단조 상하한 0 < c1 <= c2 < inf"""
    model_config = ConfigDict(frozen=True)

    c1: float = Field(..., gt=0.0, allow_inf_nan=False)
    c2: float = Field(..., gt=0.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _check_order(self) -> "MonotoneBounds":
        if self.c2 < self.c1:
            raise ValueError(f"c2 ({self.c2}) 는 c1 ({self.c1}) 이상이어야 합니다")
        return self


class RootProblem(BaseModel):
    """근 문제: 연산자 G, 알려진 근 x*, 근 조건 상수 theta, rho"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    problem_id: str
    apply: ArrayMap = Field(..., description="(..., M, d) 배열에 작용하는 G")
    x_star: GridFunction
    theta: float = Field(..., ge=1.0)
    rho: float = Field(..., gt=0.0, lt=1.0)
    space: SpaceDescriptor
    bounds: Optional[MonotoneBounds] = Field(default=None, description="노드별 단조 상하한")

    @model_validator(mode="after")
    def _check_root(self) -> "RootProblem":
        self.space.check(self.x_star)
        residual = float(self.space.norm_values(self.apply(self.x_star.values)))
        if residual > ROOT_TOLERANCE:
            raise ValueError(f"{self.problem_id}: ||G(x*)|| = {residual:.3e} > {ROOT_TOLERANCE:g}")
        return self

    def g(self, x: GridFunction) -> GridFunction:
        """G(x)"""
        return GridFunction(self.apply(x.values))

    def error(self, x: GridFunction) -> float:
        """||x - x*||"""
        return self.space.norm(x - self.x_star)


def picard_fixed_point(
    f: ArrayMap, x0: FloatArray, tol: float = PICARD_TOLERANCE, max_iter: int = 100_000
) -> tuple[FloatArray, int]:
    """x_{k+1} = F(x_k) 를 sup 차이 < tol 까지 반복"""
    x = np.array(x0, dtype=np.float64)
    for k in range(1, max_iter + 1):
        nxt = f(x)
        if np.max(np.abs(nxt - x)) < tol:
            return nxt, k
        x = nxt
    raise RuntimeError(f"Picard 반복이 {max_iter} 회 안에 수렴하지 않았습니다")


def from_contraction(
    f: ArrayMap,
    gamma: float,
    x_star: GridFunction,
    space: SpaceDescriptor,
    problem_id: str = "contraction",
) -> RootProblem:
    """축소사상 F 로부터 G(x) = x - F(x), theta = 1, rho = gamma"""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma 는 (0,1) 안에 있어야 합니다: {gamma}")
    space.check(x_star)
    drift = float(space.norm_values(f(x_star.values) - x_star.values))
    if drift > ROOT_TOLERANCE:
        raise ValueError(f"F(x*) != x*: ||F(x*) - x*|| = {drift:.3e}")

    def apply(values: FloatArray) -> FloatArray:
        return values - f(values)

    return RootProblem(
        problem_id=problem_id, apply=apply, x_star=x_star, theta=1.0, rho=gamma, space=space
    )


def linear_contraction(gamma: float, x_star: GridFunction, space: SpaceDescriptor) -> RootProblem:
    """F(x) = gamma x + (1 - gamma) x*"""
    offset = (1.0 - gamma) * x_star.values

    def f(values: FloatArray) -> FloatArray:
        return gamma * values + offset

    return from_contraction(f, gamma, x_star, space, problem_id=f"linear_contraction(gamma={gamma:g})")


def averaging_kernel(m: int, length_scale: float) -> FloatArray:
    """가우스 커널을 사다리꼴 가중치로 행 정규화한 확률 행렬 K_ij"""
    nodes = grid_nodes(m)
    weights = trapezoid_weights(m)
    diff = nodes[:, None] - nodes[None, :]
    kernel = np.exp(-0.5 * (diff / length_scale) ** 2) * weights[None, :]
    return kernel / kernel.sum(axis=1, keepdims=True)


def kernel_operator_norm(kernel: FloatArray, space: SpaceDescriptor) -> float:
    """비음수 커널 행렬의 공간 노름 상한 (L^p 는 Riesz-Thorin 보간)"""
    row = float(np.max(kernel.sum(axis=1)))
    if space.p is None:
        return row
    weights = trapezoid_weights(kernel.shape[0])
    column = float(np.max((weights[:, None] * kernel).sum(axis=0) / weights))
    return column ** (1.0 / space.p) * row ** (1.0 - 1.0 / space.p)


def kernel_contraction(
    gamma: float, length_scale: float, b: GridFunction, space: SpaceDescriptor
) -> RootProblem:
    """(F x)(t) = gamma sum_j w_j k(t, t_j) x(t_j) + b(t), x* 는 Picard 반복으로 계산"""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma 는 (0,1) 안에 있어야 합니다: {gamma}")
    space.check(b)
    kernel = averaging_kernel(space.m, length_scale)
    rho = gamma * kernel_operator_norm(kernel, space)
    if rho >= 1.0:
        raise ValueError(f"이 공간에서 커널 축소 상수 {rho:.4f} >= 1 입니다")
    offset = b.values

    def f(values: FloatArray) -> FloatArray:
        return gamma * np.matmul(kernel, values) + offset

    fixed, iterations = picard_fixed_point(f, offset)
    logger.debug("커널 축소사상 x* Picard 반복 %d 회", iterations)
    problem = from_contraction(
        f,
        rho,
        GridFunction(fixed),
        space,
        problem_id=f"kernel_contraction(gamma={gamma:g},l={length_scale:g})",
    )
    return problem


def theta_rho_from_bounds(b: MonotoneBounds) -> tuple[float, float]:
    """theta = 1 + c1 + c2, rho = 1 - c1/theta"""
    theta = 1.0 + b.c1 + b.c2
    return theta, 1.0 - b.c1 / theta


def _bracket_root(g: Callable[[float], float], start: float = 1.0, limit: int = 80) -> tuple[float, float]:
    """부호가 바뀌는 구간 [lo, hi] 를 확장하며 탐색"""
    lo, hi = -start, start
    for _ in range(limit):
        g_lo, g_hi = g(lo), g(hi)
        if g_lo == 0.0:
            return lo, lo
        if g_hi == 0.0:
            return hi, hi
        if g_lo < 0.0 < g_hi or g_hi < 0.0 < g_lo:
            return lo, hi
        lo, hi = 2.0 * lo, 2.0 * hi
    raise RootBracketError("이분법 구간을 찾지 못했습니다")


def solve_nodewise(g_scalar: ScalarMap, m: int, d: int = 1) -> GridFunction:
    """노드별 이분법으로 g(t_i, v) = 0 의 근 곡선 계산"""
    nodes = grid_nodes(m)
    roots = np.empty(m)
    for i, t in enumerate(nodes):

        def g(v: float, t: float = float(t)) -> float:
            return float(g_scalar(np.float64(t), np.float64(v)))

        try:
            lo, hi = _bracket_root(g)
        except RootBracketError as e:
            raise RootBracketError(f"t={t:.6g}: {e}") from e
        roots[i] = lo if lo == hi else bisect(g, lo, hi, xtol=BISECTION_TOLERANCE, maxiter=400)
    return GridFunction(np.repeat(roots[:, None], d, axis=1))


def pointwise_monotone(
    g_scalar: ScalarMap,
    bounds: MonotoneBounds,
    space: SpaceDescriptor,
    x_star: Optional[GridFunction] = None,
    problem_id: str = "pointwise_monotone",
) -> RootProblem:
    """(G x)(t) = g(t, x(t)) 를 각 성분에 적용, c1 <= dg/dv <= c2"""
    nodes = grid_nodes(space.m)[:, None]

    def apply(values: FloatArray) -> FloatArray:
        return np.asarray(g_scalar(nodes, values), dtype=np.float64)

    if x_star is None:
        x_star = solve_nodewise(g_scalar, space.m, space.d)
    theta, rho = theta_rho_from_bounds(bounds)
    return RootProblem(
        problem_id=problem_id,
        apply=apply,
        x_star=x_star,
        theta=theta,
        rho=rho,
        space=space,
        bounds=bounds,
    )


def quadratic_gradient(
    a: Callable[[FloatArray], FloatArray],
    b: Callable[[FloatArray], FloatArray],
    space: SpaceDescriptor,
) -> RootProblem:
    """F(x) = 1/2 int a|x|^2 - int <b, x> 의 그래디언트 G(x) = a x - b"""
    nodes = grid_nodes(space.m)
    a_values = np.asarray(a(nodes), dtype=np.float64)
    if np.any(a_values <= 0.0):
        raise ValueError("계수 a(t) 는 양수여야 합니다")
    bounds = MonotoneBounds(c1=float(a_values.min()), c2=float(a_values.max()))
    x_star = GridFunction.from_callable(lambda t: np.asarray(b(t)) / np.asarray(a(t)), space.m, space.d)

    def g_scalar(t: FloatArray, v: FloatArray) -> FloatArray:
        return np.asarray(a(t)) * v - np.asarray(b(t))

    return pointwise_monotone(g_scalar, bounds, space, x_star=x_star, problem_id="quadratic_gradient")


def _sample_offsets(
    space: SpaceDescriptor, count: int, radius: float, rng: np.random.Generator
) -> FloatArray:
    """공간 노름으로 정규화한 무작위 방향 u 에 r in (0, radius] 를 곱한 변위"""
    directions = rng.standard_normal((count, space.m, space.d))
    directions /= np.asarray(space.norm_values(directions))[:, None, None]
    r = radius * (1.0 - rng.random(count))
    return r[:, None, None] * directions


def verify_r2(
    problem: RootProblem, n_samples: int, radius: float = 1.0, seed: int = 0, chunk: int = 1024
) -> float:
    """max ||G(x)/theta - (x - x*)|| / ||x - x*|| (표본 최대값)"""
    if n_samples < 1:
        raise ValueError("n_samples 는 1 이상이어야 합니다")
    if not radius >= MIN_RADIUS:
        raise ValueError(f"radius 는 {MIN_RADIUS:g} 이상이어야 합니다: {radius}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x52]))
    space = problem.space
    x_star = problem.x_star.values
    worst = 0.0
    done = 0
    empty = 0
    while done < n_samples:
        count = min(chunk, n_samples - done)
        offsets = _sample_offsets(space, count, radius, rng)
        denom = np.asarray(space.norm_values(offsets))
        keep = denom >= MIN_OFFSET_NORM
        if not np.any(keep):
            empty += 1
            if empty >= MAX_EMPTY_CHUNKS:
                raise InsufficientDataError(f"노름 {MIN_OFFSET_NORM:g} 이상인 변위를 뽑지 못했습니다")
            continue
        empty = 0
        offsets, denom = offsets[keep], denom[keep]
        residual = problem.apply(x_star + offsets) / problem.theta - offsets
        ratios = np.asarray(space.norm_values(residual)) / denom
        worst = max(worst, float(np.max(ratios)))
        done += int(keep.sum())
    return worst


class NodeFunctionalReport(BaseModel):
    """노드 평가 범함수에서의 단조성 하한/상한 점검 결과"""
    min_ratio: float = Field(..., description="min |L(Gx-Gy)| / |L(x-y)|")
    max_ratio: float = Field(..., description="max |L(Gx-Gy)| / |L(x-y)|")
    sign_violations: int = Field(..., description="부호 불일치 횟수")
    c1: float
    c2: float
    samples: int

    @property
    def passed(self) -> bool:
        tol = 1e-9
        return (
            self.sign_violations == 0
            and self.min_ratio >= self.c1 * (1.0 - tol)
            and self.max_ratio <= self.c2 * (1.0 + tol)
        )


def node_functional_certificate(
    problem: RootProblem, n_samples: int, seed: int = 0, radius: float = 1.0
) -> NodeFunctionalReport:
    """점 평가 범함수 L = e_c delta_t 에 대해 c1|L(x-y)| <= |L(Gx-Gy)| <= c2|L(x-y)|"""
    if problem.bounds is None:
        raise ValueError(f"{problem.problem_id}: 단조 상하한이 없는 문제입니다")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4E46]))
    space = problem.space
    x = problem.x_star.values + _sample_offsets(space, n_samples, radius, rng)
    y = problem.x_star.values + _sample_offsets(space, n_samples, radius, rng)
    dx = x - y
    dg = problem.apply(x) - problem.apply(y)
    mask = np.abs(dx) > 1e-12
    ratios = np.abs(dg[mask]) / np.abs(dx[mask])
    signs = np.sign(dg[mask]) != np.sign(dx[mask])
    return NodeFunctionalReport(
        min_ratio=float(ratios.min()) if ratios.size else problem.bounds.c1,
        max_ratio=float(ratios.max()) if ratios.size else problem.bounds.c2,
        sign_violations=int(signs.sum()),
        c1=problem.bounds.c1,
        c2=problem.bounds.c2,
        samples=n_samples,
    )
