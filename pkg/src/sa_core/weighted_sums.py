"""결정적 수렴 논증의 가중합 a, b, u, v, w 와 분할 항등식.

인덱스 k 의 배열 값은 다음을 뜻한다.
    z[k] = z_{k+1},  alpha[k] = alpha_k,  beta[k] = beta_k,  phi[k] = phi_k
P_k = prod_{k<j<=n} (1 - beta_j) 이고 빈 곱은 1 이다.
"""
import math
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict

from src.space.grid import FloatArray, GridFunction


class WeightedSums(BaseModel):
    """(m, n) 에 대한 가중합"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    m: int
    n: int
    a: GridFunction
    b: GridFunction
    b_abel: GridFunction
    u: GridFunction
    v: GridFunction
    w: GridFunction
    w_abel: GridFunction
    products: FloatArray
    full_product: float

    def decomposition(self) -> GridFunction:
        """x_{n+1} - x* = u - v - w"""
        return self.u - self.v - self.w


def tail_products(beta: ArrayLike, m: int, n: int) -> FloatArray:
    """P_k = prod_{k<j<=n}(1 - beta_j), k = m..n (log 영역 누적)"""
    b = np.asarray(beta, dtype=np.float64)[m: n + 1]
    logs = np.log1p(-b)
    # 역방향 누적: k 보다 큰 j 만 포함
    suffix = np.concatenate([np.cumsum(logs[::-1])[::-1][1:], [0.0]])
    return np.exp(suffix)


def _check_range(beta: FloatArray, m: int, n: int) -> None:
    if not 0 <= m <= n:
        raise ValueError(f"0 <= m <= n 이어야 합니다: m={m}, n={n}")
    if n >= beta.size:
        raise ValueError(f"수열 길이 {beta.size} 가 n={n} 보다 짧습니다")
    window = beta[m: n + 1]
    if np.any(window <= 0.0) or np.any(window >= 1.0):
        raise ValueError("beta_k 는 (0,1) 안에 있어야 합니다")


def partition_identity(beta: ArrayLike, m: int, n: int) -> float:
    """prod_{k=m}^n (1-beta_k) + sum_{k=m}^n P_k beta_k (항상 1)"""
    b = np.asarray(beta, dtype=np.float64)
    _check_range(b, m, n)
    products = tail_products(b, m, n)
    full = float(products[0] * (1.0 - b[m]))
    return math.fsum([full, *(products * b[m: n + 1]).tolist()])


def weighted_tail_sums(
    z: ArrayLike,
    phi: ArrayLike,
    beta: ArrayLike,
    alpha: ArrayLike,
    m: int,
    n: int,
    deviations: Optional[ArrayLike] = None,
    residuals: Optional[ArrayLike] = None,
) -> WeightedSums:
    """가중합을 직접 합과 Abel 재배열 두 방식으로 계산

    deviations[k] = x_k - x*, residuals[k] = y_k - (x_k - x*) 가 주어지면 u, v 도 계산한다.
    """
    z_arr = np.asarray(z, dtype=np.float64)
    phi_arr = np.asarray(phi, dtype=np.float64)
    beta_arr = np.asarray(beta, dtype=np.float64)
    alpha_arr = np.asarray(alpha, dtype=np.float64)
    _check_range(beta_arr, m, n)
    if z_arr.ndim != 3 or min(z_arr.shape[0], phi_arr.size, alpha_arr.size) <= n:
        raise ValueError("z 는 (K, M, d), 모든 수열은 n 이상 길이여야 합니다")
    window_phi = phi_arr[m: n + 1]
    if np.any(np.diff(window_phi) < 0.0):
        raise ValueError("phi 수열은 비감소여야 합니다")

    products = tail_products(beta_arr, m, n)
    full_product = float(products[0] * (1.0 - beta_arr[m]))
    terms = alpha_arr[m: n + 1, None, None] * z_arr[m: n + 1]
    weighted = products[:, None, None] * terms

    a = terms.sum(axis=0)
    b = weighted.sum(axis=0)
    w = (window_phi[:, None, None] * weighted).sum(axis=0)

    # a_{t,n}, t = m..n
    a_tail = np.cumsum(terms[::-1], axis=0)[::-1]
    # P(t-1) = prod_{t-1<j<=n}, t = m+1..n
    diffs = products[1:] - products[:-1]
    b_abel = (diffs[:, None, None] * a_tail[1:]).sum(axis=0) + products[0] * a_tail[0]

    # b_{t,n}, t = m..n
    b_tail = np.cumsum(weighted[::-1], axis=0)[::-1]
    phi_steps = np.diff(window_phi)
    w_abel = window_phi[0] * b_tail[0] + (phi_steps[:, None, None] * b_tail[1:]).sum(axis=0)

    shape = z_arr.shape[1:]
    u = np.zeros(shape)
    v = np.zeros(shape)
    if deviations is not None:
        u = full_product * np.asarray(deviations, dtype=np.float64)[m]
    if residuals is not None:
        res = np.asarray(residuals, dtype=np.float64)[m: n + 1]
        v = ((products * beta_arr[m: n + 1])[:, None, None] * res).sum(axis=0)

    return WeightedSums(
        m=m,
        n=n,
        a=GridFunction(a),
        b=GridFunction(b),
        b_abel=GridFunction(b_abel),
        u=GridFunction(u),
        v=GridFunction(v),
        w=GridFunction(w),
        w_abel=GridFunction(w_abel),
        products=products,
        full_product=full_product,
    )
