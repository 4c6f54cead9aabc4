"""Distribution-free k-sample tests over the four interval groups.

Neither statistic needs the kernel to be right, which makes them the guard
rail for the likelihood machinery: a QTL that moves anything about the
phenotype law shifts at least one group ECDF.

The sup statistic compares each group ECDF with the pooled one,

    T = sup_y sum_i n_i (F_i(y) - F(y))^2,

attained at pooled order statistics. The rank statistic is the k-sample
Anderson-Darling form; with ties present the midrank variant is used, and
either way the value is standardized as (A2 - (k-1)) / sigma_N so that
critical points are comparable across group counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._utils import NS_CALIBRATE, stream
from .errors import DegenerateDataError, DomainError, InvalidDataError
from .likelihood import PhenotypeGroups

__all__ = ["NonparamResult", "ks_ksample", "ad_ksample", "mc_calibrate"]


@dataclass(frozen=True)
class NonparamResult:
    statistic: float
    method: str  # "ks" | "ad"
    n_groups: int
    tied: bool = False

    def __float__(self) -> float:
        return self.statistic


def _group_arrays(groups) -> list:
    if isinstance(groups, PhenotypeGroups):
        arrs = [groups.g1, groups.g2, groups.g3, groups.g4]
    else:
        arrs = [np.asarray(g, dtype=float).ravel() for g in groups]
        for g in arrs:
            if g.size and not np.all(np.isfinite(g)):
                raise InvalidDataError("group values must be finite")
    arrs = [g for g in arrs if g.size]
    if len(arrs) < 2:
        raise DegenerateDataError("need at least two non-empty groups")
    return arrs


def ks_ksample(groups) -> NonparamResult:
    """Sup-type ECDF statistic over the non-empty groups.

    Accepts a PhenotypeGroups or any sequence of value arrays.
    """
    arrs = _group_arrays(groups)
    pooled = np.sort(np.concatenate(arrs))
    n_total = pooled.size
    uniq = np.unique(pooled)
    f_pool = np.searchsorted(pooled, uniq, side="right") / n_total
    total = np.zeros_like(uniq)
    for g in arrs:
        fi = np.searchsorted(np.sort(g), uniq, side="right") / g.size
        total += g.size * (fi - f_pool) ** 2
    tied = uniq.size < n_total
    return NonparamResult(
        statistic=float(np.max(total)),
        method="ks",
        n_groups=len(arrs),
        tied=tied,
    )


def _ad_continuous(arrs, pooled, n_total) -> float:
    j = np.arange(1, n_total)  # 1 .. N-1
    z = pooled[: n_total - 1]
    denom = j * (n_total - j)
    a2 = 0.0
    for g in arrs:
        mi = np.searchsorted(np.sort(g), z, side="right")
        a2 += np.sum((n_total * mi - j * g.size) ** 2 / denom) / g.size
    return a2 / n_total


def _ad_midrank(arrs, pooled, n_total) -> float:
    vals, counts = np.unique(pooled, return_counts=True)
    lj = counts.astype(float)
    bj = np.cumsum(lj) - 0.5 * lj
    denom = bj * (n_total - bj) - 0.25 * n_total * lj
    a2 = 0.0
    for g in arrs:
        gs = np.sort(g)
        right = np.searchsorted(gs, vals, side="right").astype(float)
        left = np.searchsorted(gs, vals, side="left").astype(float)
        mij = 0.5 * (right + left)  # cumulative count with half the ties
        num = (n_total * mij - g.size * bj) ** 2
        # the pooled-extreme blocks can zero the denominator; their
        # numerator vanishes there too, so the terms drop out
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(denom > 0.0, lj * num / np.where(denom > 0, denom, 1.0), 0.0)
        a2 += np.sum(terms) / g.size
    return (n_total - 1.0) / n_total * a2 / n_total


def _ad_sigma(n_total: int, k: int, cap_h: float) -> float:
    """Null standard deviation of A2 (continuous case formula)."""
    n = float(n_total)
    inv = 1.0 / np.arange(1, n_total)
    hsum = np.cumsum(inv)
    h = float(hsum[-1])
    idx = np.arange(1, n_total - 1)
    g = float(np.sum((h - hsum[idx - 1]) / (n_total - idx)))
    a = (4.0 * g - 6.0) * (k - 1) + (10.0 - 6.0 * g) * cap_h
    b = (
        (2.0 * g - 4.0) * k * k
        + 8.0 * h * k
        + (2.0 * g - 14.0 * h - 4.0) * cap_h
        - 8.0 * h
        + 4.0 * g
        - 6.0
    )
    c = (
        (6.0 * h + 2.0 * g - 2.0) * k * k
        + (4.0 * h - 4.0 * g + 6.0) * k
        + (2.0 * h - 6.0) * cap_h
        + 4.0 * h
    )
    d = (2.0 * h + 6.0) * k * k - 4.0 * h * k
    var = (a * n**3 + b * n**2 + c * n + d) / ((n - 1.0) * (n - 2.0) * (n - 3.0))
    if var <= 0.0:
        raise DegenerateDataError("degenerate pooled sample for the rank statistic")
    return math.sqrt(var)


def ad_ksample(groups) -> NonparamResult:
    """Standardized k-sample rank statistic.

    Uses the continuous-data form when the pooled sample is tie-free and the
    midrank form otherwise; either raw value is standardized by the
    continuous-case null mean k-1 and standard deviation.
    """
    arrs = _group_arrays(groups)
    pooled = np.sort(np.concatenate(arrs))
    n_total = pooled.size
    if n_total < 4:
        raise DegenerateDataError("rank statistic needs at least four observations")
    k = len(arrs)
    tied = np.unique(pooled).size < n_total
    if tied:
        a2 = _ad_midrank(arrs, pooled, n_total)
    else:
        a2 = _ad_continuous(arrs, pooled, n_total)
    cap_h = float(sum(1.0 / g.size for g in arrs))
    sigma = _ad_sigma(n_total, k, cap_h)
    standardized = (a2 - (k - 1)) / sigma
    return NonparamResult(
        statistic=float(standardized), method="ad", n_groups=k, tied=tied
    )


def mc_calibrate(
    test_fn: Callable,
    null_sampler: Callable,
    n_reps: int,
    alpha: float,
    seed: int = 0,
) -> float:
    """Monte Carlo critical value of `test_fn` under `null_sampler`.

    null_sampler(rng) must return one dataset accepted by test_fn; the value
    of test_fn is coerced with float(). Returns the smallest simulated value
    whose exceedance rate is <= alpha.
    """
    n_reps = int(n_reps)
    if n_reps < 1000:
        raise DomainError("calibration needs at least 1000 replicates")
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    stats = np.empty(n_reps)
    for i in range(n_reps):
        rng = stream(seed, NS_CALIBRATE, i)
        stats[i] = float(test_fn(null_sampler(rng)))
    return float(np.quantile(stats, 1.0 - alpha, method="higher"))
