"""유한 부분합 기반 급수 수렴/발산 판정.

유한 계산으로 수렴을 증명할 수는 없으므로 판정은 휴리스틱이다.
2진 블록 B_k = sum_{2^(k-1) <= n < 2^k} a_n 을 보정 합산(math.fsum)으로 구하고,
마지막 블록들에서 log B_k 를 log k 에 회귀해 국소 감쇠 지수 s 를 얻는다.

    a_n ~ 1/n            -> s ~ 0   (발산)
    a_n ~ 1/(n log n)    -> s ~ 1   (발산)
    a_n ~ 1/(n log^2 n)  -> s ~ 2   (수렴)
    a_n ~ n^-q, q > 1    -> s 가 k 에 비례해 커짐 (수렴)
"""
import math
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from src.core.config import settings
from src.core.models import SeriesReport, SeriesVerdict


def dyadic_checkpoints(n_terms: int) -> list[int]:
    """1, 2, 4, ..., 2^K (<= n_terms), 마지막에 n_terms"""
    if n_terms < 1:
        return []
    points = [1 << k for k in range(n_terms.bit_length()) if 1 << k <= n_terms]
    if points[-1] != n_terms:
        points.append(n_terms)
    return points


def dyadic_block_sums(terms: ArrayLike) -> list[float]:
    """[a_0], [a_1], [a_2, a_3], [a_4..a_7], ... 완전한 2진 블록 합"""
    values = np.asarray(terms, dtype=np.float64)
    n_terms = values.size
    if n_terms == 0:
        return []
    blocks = [math.fsum(values[:1])]
    k = 1
    while 1 << k <= n_terms:
        blocks.append(math.fsum(values[1 << (k - 1): 1 << k]))
        k += 1
    return blocks


def block_decay_exponent(blocks: list[float], fit_blocks: int) -> Optional[float]:
    """log B_k 대 log k 기울기의 부호 반전 (양의 블록 3개 미만이면 None)"""
    indexed = list(enumerate(blocks))[1:]
    window = indexed[-fit_blocks:]
    if len(window) < 3 or any(b <= 0.0 or not math.isfinite(b) for _, b in window):
        return None
    log_k = np.log([k for k, _ in window])
    log_b = np.log([b for _, b in window])
    slope = np.polyfit(log_k, log_b, 1)[0]
    return float(-slope)


def classify_series(
    name: str,
    terms: ArrayLike,
    *,
    divergence_threshold: Optional[float] = None,
    cauchy_tolerance: Optional[float] = None,
    converge_exponent: Optional[float] = None,
    diverge_exponent: Optional[float] = None,
    fit_blocks: Optional[int] = None,
) -> SeriesReport:
    """음이 아닌 항의 급수 sum a_n 판정"""
    threshold = divergence_threshold if divergence_threshold is not None else settings.divergence_threshold
    tolerance = cauchy_tolerance if cauchy_tolerance is not None else settings.cauchy_tolerance
    s_conv = converge_exponent if converge_exponent is not None else settings.converge_exponent
    s_div = diverge_exponent if diverge_exponent is not None else settings.diverge_exponent
    n_fit = fit_blocks if fit_blocks is not None else settings.series_fit_blocks

    values = np.asarray(terms, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError(f"{name}: 1차원 비어있지 않은 항 배열이 필요합니다")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name}: 항에 NaN/Inf 가 있습니다")
    if np.any(values < 0.0):
        raise ValueError(f"{name}: 음의 항은 지원하지 않습니다")

    n_terms = values.size
    blocks = dyadic_block_sums(values)
    checkpoints = dyadic_checkpoints(n_terms)

    partial_sums = [math.fsum(blocks[: k + 1]) for k in range(len(blocks))]
    complete = 1 << (len(blocks) - 1)
    if n_terms != complete:
        partial_sums.append(math.fsum(blocks + [math.fsum(values[complete:])]))

    last_block = math.fsum(values[n_terms // 2:]) if n_terms > 1 else float(values[0])
    exponent = block_decay_exponent(blocks, n_fit)
    total = partial_sums[-1]

    tail_estimate: Optional[float] = None
    if exponent is not None and exponent > 1.0:
        k_last = len(blocks) - 1
        tail_estimate = blocks[-1] * k_last / (exponent - 1.0)
    elif blocks[-1] == 0.0:
        tail_estimate = 0.0

    if total > threshold:
        verdict = SeriesVerdict.DIVERGES
    elif exponent is not None and exponent < s_div:
        verdict = SeriesVerdict.DIVERGES
    elif exponent is not None and exponent > s_conv:
        verdict = SeriesVerdict.CONVERGES
    elif last_block < tolerance:
        verdict = SeriesVerdict.CONVERGES
    else:
        verdict = SeriesVerdict.INCONCLUSIVE

    return SeriesReport(
        name=name,
        checkpoints=checkpoints,
        partial_sums=partial_sums,
        last_block=last_block,
        exponent=exponent,
        tail_estimate=tail_estimate,
        verdict=verdict,
    )
