"""Likelihood ratio and score-form statistics for the QTL effect test.

Two statistics, matching the two alternatives:

    full statistic      2 * (loglik(full fit) - loglik(null fit))
    equal-scale variant 2 * (loglik(equal-scale fit) - loglik(null fit))

Both are nonnegative by construction of the fits. P-values come from a
simulated table of the limiting law (see asymptotics) and, optionally, from
the closed-form tail approximation.

The score-form statistic rebuilds the same test from null-standardized
residual scores only: with a_i the per-group sums of (T, U) at the null fit,
b(theta) = a1 - a4 + (2 theta - 1)(a2 - a3), and tau(theta) the variance
factor 1 + 4 r theta (theta - 1),

    sup_theta b(theta)' (n tau(theta) A)^{-1} b(theta)

which is first-order equivalent to the full statistic under the null and
needs no EM at all. It serves as an independent cross-check of the LRT path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .asymptotics import NullDistTable, davies_pvalue, pvalue
from .errors import DomainError, InvalidDataError, NumericalError
from .estimate import FitConfig, MixtureFit, fit_all, fit_equal_scale, fit_null, theta_grid
from .kernels import KernelFamily, info_matrix, score
from .likelihood import IntervalConfig, PhenotypeGroups

__all__ = [
    "TestOutcome",
    "ScoreVectors",
    "lrt_full",
    "lrt_equal_scale",
    "score_vectors",
    "score_form_statistic",
]

logger = logging.getLogger(__name__)

# A null table matches an interval when the recombination fractions agree to
# the table cache rounding (4 decimals).
_R_MATCH_TOL = 5e-5


@dataclass(frozen=True)
class TestOutcome:
    """Result of one interval test."""

    statistic: float
    kind: str  # "full" | "equal_scale"
    p_value_rep: Optional[float]
    p_value_davies: Optional[float]
    theta_hat: float
    fit: MixtureFit
    null_fit: MixtureFit

    def to_json_dict(self) -> dict:
        """Flat serializable summary (the CLI's JSON schema)."""
        return {
            "statistic": self.statistic,
            "kind": self.kind,
            "p_value_rep": self.p_value_rep,
            "p_value_davies": self.p_value_davies,
            "theta_hat": self.theta_hat,
            "mu1": self.fit.params.comp1.mu,
            "mu2": self.fit.params.comp2.mu,
            "sigma1": self.fit.params.comp1.sigma,
            "sigma2": self.fit.params.comp2.sigma,
            "mu0": self.null_fit.params.comp1.mu,
            "sigma0": self.null_fit.params.comp1.sigma,
            "converged": self.fit.converged,
        }


def _statistic(fit: MixtureFit, null_fit: MixtureFit) -> float:
    stat = 2.0 * (fit.loglik - null_fit.loglik)
    if stat < -1e-6:
        raise NumericalError(
            f"likelihood ratio statistic {stat!r} below the numerical-noise band"
        )
    if stat < 0.0:
        logger.debug("clamping statistic %.3g to 0", stat)
        stat = 0.0
    return stat


def _check_table(nulldist: Optional[NullDistTable], kind: str, interval: IntervalConfig):
    if nulldist is None:
        return
    if nulldist.kind != kind:
        raise InvalidDataError(
            f"null table kind {nulldist.kind!r} does not match statistic {kind!r}"
        )
    if abs(nulldist.r - interval.r) > _R_MATCH_TOL:
        raise InvalidDataError(
            f"null table r={nulldist.r} does not match interval r={interval.r}"
        )


def _outcome(kind, fit, null_fit, interval, nulldist, davies):
    stat = _statistic(fit, null_fit)
    p_rep = pvalue(stat, nulldist) if nulldist is not None else None
    law = "full" if kind == "full" else "star"
    p_dav = davies_pvalue(stat, interval.r, law) if davies else None
    return TestOutcome(
        statistic=stat,
        kind=kind,
        p_value_rep=p_rep,
        p_value_davies=float(p_dav) if p_dav is not None else None,
        theta_hat=fit.theta_hat,
        fit=fit,
        null_fit=null_fit,
    )


def lrt_full(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    interval: IntervalConfig,
    cfg: Optional[FitConfig] = None,
    nulldist: Optional[NullDistTable] = None,
    davies: bool = False,
) -> TestOutcome:
    """Location-and-scale QTL likelihood ratio test.

    Args:
        nulldist: simulated table of the limiting law (kind "full", same r);
            omit to skip the table p-value.
        davies: also attach the closed-form tail approximation p-value.
    """
    _check_table(nulldist, "full", interval)
    null_fit, _, full_fit = fit_all(groups, kernel, cfg)
    return _outcome("full", full_fit, null_fit, interval, nulldist, davies)


def lrt_equal_scale(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    interval: IntervalConfig,
    cfg: Optional[FitConfig] = None,
    nulldist: Optional[NullDistTable] = None,
    davies: bool = False,
) -> TestOutcome:
    """Location-only variant: both components share one scale."""
    _check_table(nulldist, "star", interval)
    cfg = cfg or FitConfig()
    null_fit = fit_null(groups, kernel, cfg)
    eq_fit = fit_equal_scale(groups, kernel, cfg)
    return _outcome("equal_scale", eq_fit, null_fit, interval, nulldist, davies)


# ---------------------------------------------------------------------------
# Score form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreVectors:
    """Per-group sums of null-standardized scores (T, U)."""

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    a4: np.ndarray

    def b(self, theta) -> np.ndarray:
        """b(theta) = a1 - a4 + (2 theta - 1)(a2 - a3); theta may be an array."""
        th = np.asarray(theta, dtype=float)
        base = self.a1 - self.a4
        slope = self.a2 - self.a3
        return base + (2.0 * th - 1.0)[..., None] * slope if th.ndim else base + (
            2.0 * th - 1.0
        ) * slope


def score_vectors(
    groups: PhenotypeGroups, kernel: KernelFamily, null_fit: Optional[MixtureFit] = None
) -> ScoreVectors:
    """Score sums a_i = sum over group i of (T(z), U(z)) at the null fit."""
    null_fit = null_fit or fit_null(groups, kernel)
    p0 = null_fit.params.comp1
    sums = []
    for g in (groups.g1, groups.g2, groups.g3, groups.g4):
        z = (g - p0.mu) / p0.sigma
        T, U = score(kernel, z)
        sums.append(np.array([np.sum(T), np.sum(U)]))
    return ScoreVectors(*sums)


def score_form_statistic(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    interval: IntervalConfig,
    grid=None,
) -> float:
    """sup over the theta grid of b(theta)' (n tau(theta) A)^{-1} b(theta).

    Args:
        grid: theta values (array) or a grid size (int); defaults to the
            standard 101-point grid.

    Raises:
        DomainError: tau(theta) <= 0 somewhere on the grid (r = 1 with an
            interior grid; ruled out for Haldane-derived r).
    """
    if grid is None:
        grid = theta_grid(FitConfig().theta_grid_size)
    elif np.isscalar(grid):
        grid = theta_grid(int(grid))
    else:
        grid = np.asarray(grid, dtype=float)

    r = interval.r
    tau = 1.0 + 4.0 * r * grid * (grid - 1.0)
    if np.any(tau <= 0.0):
        raise DomainError("tau(theta) must be positive on the whole grid")

    vec = score_vectors(groups, kernel)
    b = vec.b(grid)  # (G, 2)
    a_inv = info_matrix(kernel).inv()
    quad = np.einsum("gi,ij,gj->g", b, a_inv, b)
    vals = quad / (groups.n * tau)
    return float(np.max(vals))
