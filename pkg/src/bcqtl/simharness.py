"""Replicated experiments: size and power of the interval tests.

A scenario fixes the two component laws, the mixing position theta, the
marker interval, and the sample size. Group sizes are multinomial with the
backcross probabilities ((1-r)/2, r/2, r/2, (1-r)/2); draws leaving fewer
than two observations in either flanking group are redrawn, since those
groups anchor the component fits.

Replicate streams are derived from (seed, namespace, replicate), so results
do not depend on evaluation order and never collide with the streams used
for calibration or null tables.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ._utils import NS_CALIBRATE, NS_DATA, haldane, stream
from .asymptotics import (
    davies_pvalue,
    kl_projection,
    pvalue,
    sample_R,
    sample_Rstar,
)
from .errors import (
    DegenerateDataError,
    DomainError,
    NumericalError,
    ValidationError,
)
from .estimate import FitConfig, fit_all, fit_equal_scale, fit_null
from .kernels import KernelFamily, LocScaleParams, get_kernel, sample
from .likelihood import IntervalConfig, PhenotypeGroups
from .nonparam import ad_ksample, ks_ksample

__all__ = [
    "SimScenario",
    "ExperimentRow",
    "haldane",
    "group_probs",
    "gen_group_sizes",
    "gen_data",
    "type1_experiment",
    "power_experiment",
    "simulate_scan_dataset",
]

logger = logging.getLogger(__name__)

_METHODS = ("rn", "rn_star", "rn_davies", "rn_star_davies", "ks", "ad")

# an experiment aborts if more than this fraction of replicates fail outright
_MAX_FAIL_FRACTION = 0.01


def group_probs(r: float) -> Tuple[float, float, float, float]:
    """Backcross genotype-group probabilities for one marker interval."""
    if not (0.0 < r < 1.0):
        raise DomainError("recombination fraction must lie in (0, 1)")
    return ((1.0 - r) / 2.0, r / 2.0, r / 2.0, (1.0 - r) / 2.0)


@dataclass(frozen=True)
class SimScenario:
    """One simulation cell."""

    kernel: KernelFamily
    f1: LocScaleParams
    f2: LocScaleParams
    interval: IntervalConfig
    n: int = 200
    theta: float = 0.5
    alpha: float = 0.05
    n_reps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.kernel, str):
            object.__setattr__(self, "kernel", get_kernel(self.kernel))
        if self.n < 8:
            raise DomainError("sample size must be at least 8")
        if not (0.0 <= self.theta <= 1.0):
            raise DomainError("theta must lie in [0, 1]")
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie in (0, 1)")
        if self.n_reps < 1:
            raise DomainError("n_reps must be positive")

    @property
    def r(self) -> float:
        return self.interval.r

    @property
    def is_null(self) -> bool:
        return self.f1 == self.f2


@dataclass(frozen=True)
class ExperimentRow:
    """Rejection rates of one experiment, one entry per requested method."""

    kind: str  # "type1" | "power"
    scenario: SimScenario
    methods: Tuple[str, ...]
    rates: Dict[str, float]
    std_errors: Dict[str, float]
    n_used: int
    n_failed: int
    n_nonconverged: int
    kl: Optional[float] = None
    critical_values: Dict[str, float] = field(default_factory=dict)

    def to_rows(self) -> list:
        """Flat per-method dicts, ready for CSV writing."""
        sc = self.scenario
        rows = []
        for m in self.methods:
            rows.append(
                {
                    "kind": self.kind,
                    "method": m,
                    "kernel": sc.kernel.name,
                    "n": sc.n,
                    "r": sc.r,
                    "theta": sc.theta,
                    "alpha": sc.alpha,
                    "n_reps": sc.n_reps,
                    "seed": sc.seed,
                    "mu1": sc.f1.mu,
                    "sigma1": sc.f1.sigma,
                    "mu2": sc.f2.mu,
                    "sigma2": sc.f2.sigma,
                    "rate": self.rates[m],
                    "std_error": self.std_errors[m],
                    "critical_value": self.critical_values.get(m),
                    "n_used": self.n_used,
                    "n_failed": self.n_failed,
                    "n_nonconverged": self.n_nonconverged,
                    "kl": self.kl,
                }
            )
        return rows


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------


def gen_group_sizes(
    n: int, r: float, rng: np.random.Generator, max_attempts: int = 100
) -> Tuple[int, int, int, int]:
    """Multinomial group sizes, redrawn until both flanking groups hold >= 2."""
    p = group_probs(r)
    for _ in range(max_attempts):
        n1, n2, n3, n4 = (int(v) for v in rng.multinomial(n, p))
        if n1 >= 2 and n4 >= 2:
            return n1, n2, n3, n4
    raise DegenerateDataError(
        f"no usable group sizes in {max_attempts} draws (n={n}, r={r})"
    )


def gen_data(scenario: SimScenario, rng: np.random.Generator) -> PhenotypeGroups:
    """One replicate of the four-group backcross sample."""
    n1, n2, n3, n4 = gen_group_sizes(scenario.n, scenario.r, rng)
    k, th = scenario.kernel, scenario.theta
    g1 = sample(k, scenario.f1, n1, rng)

    u2 = rng.random(n2)
    a2 = sample(k, scenario.f1, n2, rng)
    b2 = sample(k, scenario.f2, n2, rng)
    g2 = np.where(u2 < th, a2, b2)

    u3 = rng.random(n3)
    a3 = sample(k, scenario.f1, n3, rng)
    b3 = sample(k, scenario.f2, n3, rng)
    g3 = np.where(u3 < 1.0 - th, a3, b3)

    g4 = sample(k, scenario.f2, n4, rng)
    return PhenotypeGroups(g1, g2, g3, g4)


# ---------------------------------------------------------------------------
# Replicate statistics
# ---------------------------------------------------------------------------

_NEED = {
    "rn": "full",
    "rn_davies": "full",
    "rn_star": "star",
    "rn_star_davies": "star",
    "ks": "ks",
    "ad": "ad",
}


def _check_methods(methods) -> Tuple[str, ...]:
    methods = tuple(methods)
    if not methods:
        raise DomainError("at least one method is required")
    for m in methods:
        if m not in _METHODS:
            raise DomainError(f"unknown method {m!r}; choose from {_METHODS}")
    return methods


def _lrt_stat(a_loglik: float, null_loglik: float) -> float:
    stat = 2.0 * (a_loglik - null_loglik)
    if stat < -1e-6:
        raise NumericalError(f"negative likelihood ratio statistic {stat!r}")
    return max(stat, 0.0)


def _replicate_stats(
    data: PhenotypeGroups, scenario: SimScenario, cfg: FitConfig, needs: set
) -> Tuple[Dict[str, float], bool]:
    """Per-replicate raw statistics plus a joint convergence flag."""
    out: Dict[str, float] = {}
    converged = True
    if "full" in needs:
        null_fit, eq_fit, full_fit = fit_all(data, scenario.kernel, cfg)
        out["full"] = _lrt_stat(full_fit.loglik, null_fit.loglik)
        converged &= full_fit.converged
        if "star" in needs:
            out["star"] = _lrt_stat(eq_fit.loglik, null_fit.loglik)
            converged &= eq_fit.converged
    elif "star" in needs:
        null_fit = fit_null(data, scenario.kernel, cfg)
        eq_fit = fit_equal_scale(data, scenario.kernel, cfg)
        out["star"] = _lrt_stat(eq_fit.loglik, null_fit.loglik)
        converged &= eq_fit.converged
    if "ks" in needs:
        out["ks"] = ks_ksample(data).statistic
    if "ad" in needs:
        out["ad"] = ad_ksample(data).statistic
    return out, converged


def _collect(
    scenario: SimScenario,
    cfg: FitConfig,
    needs: set,
    namespace: int,
    n_reps: int,
) -> Tuple[Dict[str, np.ndarray], np.ndarray, int]:
    """Stats arrays (nan on failed replicates), convergence flags, fail count."""
    stats = {key: np.full(n_reps, np.nan) for key in needs}
    conv = np.zeros(n_reps, dtype=bool)
    n_failed = 0
    for i in range(n_reps):
        rng = stream(scenario.seed, namespace, i)
        try:
            data = gen_data(scenario, rng)
            vals, ok = _replicate_stats(data, scenario, cfg, needs)
        except (DegenerateDataError, NumericalError) as exc:
            n_failed += 1
            logger.debug("replicate %d failed: %s", i, exc)
            continue
        for key, v in vals.items():
            stats[key][i] = v
        conv[i] = ok
    if n_failed > _MAX_FAIL_FRACTION * n_reps:
        raise NumericalError(
            f"{n_failed} of {n_reps} replicates failed; scenario looks degenerate"
        )
    return stats, conv, n_failed


def _finish_row(kind, scenario, methods, reject, conv_ok, n_used, n_failed, kl, crits):
    rates, ses = {}, {}
    for m in methods:
        rate = float(np.count_nonzero(reject[m])) / n_used
        rates[m] = rate
        ses[m] = math.sqrt(rate * (1.0 - rate) / n_used)
    return ExperimentRow(
        kind=kind,
        scenario=scenario,
        methods=methods,
        rates=rates,
        std_errors=ses,
        n_used=n_used,
        n_failed=n_failed,
        n_nonconverged=int(np.count_nonzero(~conv_ok)),
        kl=kl,
        critical_values=crits,
    )


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def type1_experiment(
    scenario: SimScenario,
    methods: Sequence[str] = ("rn", "rn_star"),
    cfg: Optional[FitConfig] = None,
    nulldist_n: int = 100_000,
    calib_reps: int = 2000,
) -> ExperimentRow:
    """Empirical size of the requested tests under f1 == f2.

    LRT p-values come from representation tables of the limiting law (with
    the closed-form tail bound for the *_davies variants); the rank and ECDF
    tests are Monte Carlo calibrated under the same scenario. Non-converged
    fits count as non-rejections and are tallied.
    """
    if not scenario.is_null:
        raise ValidationError("type-1 scenario needs identical components")
    methods = _check_methods(methods)
    cfg = cfg or FitConfig()
    needs = {_NEED[m] for m in methods}
    r = scenario.r

    crits: Dict[str, float] = {}
    table_full = table_star = None
    if "rn" in methods:
        table_full = sample_R(r, nulldist_n, scenario.seed)
        crits["rn"] = table_full.critical_value(scenario.alpha)
    if "rn_star" in methods:
        table_star = sample_Rstar(r, nulldist_n, scenario.seed)
        crits["rn_star"] = table_star.critical_value(scenario.alpha)
    for m, fn in (("ks", ks_ksample), ("ad", ad_ksample)):
        if m in methods:
            crits[m] = _calibrate_nonparam(scenario, fn, calib_reps)

    stats, conv, n_failed = _collect(scenario, cfg, needs, NS_DATA, scenario.n_reps)
    used = ~np.isnan(stats[next(iter(needs))])
    n_used = int(np.count_nonzero(used))

    reject: Dict[str, np.ndarray] = {}
    for m in methods:
        key = _NEED[m]
        vals = stats[key][used]
        if m == "rn":
            rej = np.array([pvalue(v, table_full) <= scenario.alpha for v in vals])
        elif m == "rn_star":
            rej = np.array([pvalue(v, table_star) <= scenario.alpha for v in vals])
        elif m == "rn_davies":
            rej = davies_pvalue(vals, r, "full") <= scenario.alpha
        elif m == "rn_star_davies":
            rej = davies_pvalue(vals, r, "star") <= scenario.alpha
        else:
            rej = vals > crits[m]
        if key in ("full", "star"):
            rej = rej & conv[used]
        reject[m] = rej
    return _finish_row(
        "type1", scenario, methods, reject, conv[used], n_used, n_failed, None, crits
    )


def _calibrate_nonparam(scenario: SimScenario, stat_fn, calib_reps: int) -> float:
    """MC critical value of a nonparametric statistic under the null scenario."""
    vals = np.empty(calib_reps)
    bad = 0
    for i in range(calib_reps):
        rng = stream(scenario.seed, NS_CALIBRATE, i)
        try:
            vals[i] = stat_fn(gen_data(scenario, rng)).statistic
        except DegenerateDataError:
            vals[i] = np.nan
            bad += 1
    if bad > _MAX_FAIL_FRACTION * calib_reps:
        raise NumericalError("nonparametric calibration failed too often")
    good = vals[~np.isnan(vals)]
    return float(np.quantile(good, 1.0 - scenario.alpha, method="higher"))


def power_experiment(
    scenario: SimScenario,
    methods: Sequence[str] = ("rn", "rn_star"),
    cfg: Optional[FitConfig] = None,
    calib_reps: int = 5000,
) -> ExperimentRow:
    """Empirical power with all tests Monte Carlo calibrated at the null.

    The null used for calibration is the single component closest in KL to
    the scenario's group mixture, so the reported rates answer "how often is
    this alternative detected at exact level alpha". The attained KL is
    returned on the row. Davies variants are not calibrated here; request
    them in type1_experiment instead.
    """
    if scenario.is_null:
        raise ValidationError("power scenario needs distinct components")
    methods = _check_methods(methods)
    for m in methods:
        if m.endswith("_davies"):
            raise DomainError("davies variants are size-only; drop them here")
    cfg = cfg or FitConfig()
    if calib_reps < 1000:
        raise DomainError("calibration needs at least 1000 replicates")
    needs = {_NEED[m] for m in methods}
    r = scenario.r

    params0, kl = kl_projection(
        group_probs(r),
        (scenario.kernel, scenario.f1),
        (scenario.kernel, scenario.f2),
        scenario.theta,
        scenario.kernel,
    )
    null_scenario = replace(scenario, f1=params0, f2=params0)

    calib_stats, _, _ = _collect(null_scenario, cfg, needs, NS_CALIBRATE, calib_reps)
    crits: Dict[str, float] = {}
    for m in methods:
        vals = calib_stats[_NEED[m]]
        good = vals[~np.isnan(vals)]
        crits[m] = float(np.quantile(good, 1.0 - scenario.alpha, method="higher"))

    stats, conv, n_failed = _collect(scenario, cfg, needs, NS_DATA, scenario.n_reps)
    used = ~np.isnan(stats[next(iter(needs))])
    n_used = int(np.count_nonzero(used))
    reject = {}
    for m in methods:
        key = _NEED[m]
        rej = stats[key][used] > crits[m]
        if key in ("full", "star"):
            rej = rej & conv[used]
        reject[m] = rej
    return _finish_row(
        "power", scenario, methods, reject, conv[used], n_used, n_failed, kl, crits
    )


# ---------------------------------------------------------------------------
# Synthetic genome scans
# ---------------------------------------------------------------------------


def simulate_scan_dataset(
    marker_positions: Sequence[float],
    n_individuals: int,
    qtl_position: float,
    f1: LocScaleParams,
    f2: LocScaleParams,
    kernel: KernelFamily,
    seed: int = 0,
    missing_rate: float = 0.0,
):
    """Backcross chromosome with one planted effect locus.

    Genotypes follow a Markov chain along the chromosome with Haldane
    recombination between adjacent loci; the trait locus is inserted at
    qtl_position and phenotypes are drawn from f1 when its genotype is 1 and
    from f2 otherwise. Returns a ScanDataset (the trait locus itself is not
    reported as a marker).
    """
    from .scan import ScanDataset

    pos = np.asarray(marker_positions, dtype=float)
    if pos.ndim != 1 or pos.size < 2 or np.any(np.diff(pos) <= 0.0):
        raise DomainError("marker positions must be strictly increasing, length >= 2")
    if n_individuals < 2:
        raise DomainError("need at least two individuals")
    if not (0.0 <= missing_rate < 1.0):
        raise DomainError("missing_rate must lie in [0, 1)")
    qtl_position = float(qtl_position)

    # insert the trait locus into the chain
    loci = np.append(pos, qtl_position)
    order = np.argsort(loci, kind="stable")
    loci = loci[order]
    qtl_col = int(np.nonzero(order == pos.size)[0][0])

    rng = stream(seed, NS_DATA, 0)
    n_loci = loci.size
    states = np.empty((n_individuals, n_loci), dtype=np.int8)
    states[:, 0] = rng.integers(0, 2, n_individuals, dtype=np.int8)
    for j in range(1, n_loci):
        gap = loci[j] - loci[j - 1]
        rj = haldane(gap) if gap > 0.0 else 0.0
        flips = rng.random(n_individuals) < rj
        states[:, j] = states[:, j - 1] ^ flips

    qtl = states[:, qtl_col].astype(bool)
    geno = np.delete(states, qtl_col, axis=1)

    y = np.empty(n_individuals)
    y[qtl] = sample(kernel, f1, int(qtl.sum()), rng)
    y[~qtl] = sample(kernel, f2, int((~qtl).sum()), rng)

    if missing_rate > 0.0:
        na = rng.random(geno.shape) < missing_rate
        geno = geno.copy()
        geno[na] = -1

    width = len(str(pos.size))
    markers = tuple(f"m{j + 1:0{width}d}" for j in range(pos.size))
    ids = tuple(f"ind{i + 1:04d}" for i in range(n_individuals))
    return ScanDataset(
        markers=markers,
        positions=pos,
        genotypes=geno,
        ids=ids,
        phenotypes=y,
    )
