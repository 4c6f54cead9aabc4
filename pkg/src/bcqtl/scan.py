"""Marker-interval scans over a chromosome of backcross genotypes.

Input is three CSV files: a marker map (`marker,position_cM`), a genotype
matrix (`id,<marker...>` with cells 0, 1 or NA), and phenotypes (`id,value`).
Each adjacent marker pair becomes one interval test: individuals are grouped
by their flanking genotypes ((1,1), (1,0), (0,1), (0,0)), rows with a missing
flank are excluded for that interval, and the recombination fraction comes
from the Haldane map distance.

Intervals whose flanking groups are too thin to fit are reported as
untestable rather than failing the scan.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import kstest

from ._utils import NS_PERMUTE, haldane, stream
from .asymptotics import NullDistTable, sample_R, sample_Rstar
from .errors import (
    DegenerateDataError,
    DomainError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .estimate import FitConfig
from .kernels import KernelFamily
from .likelihood import IntervalConfig, PhenotypeGroups
from .lrt import lrt_equal_scale, lrt_full
from .nonparam import ad_ksample, ks_ksample

__all__ = [
    "ScanDataset",
    "IntervalResult",
    "load_dataset",
    "interval_groups",
    "scan",
    "results_to_csv",
]

logger = logging.getLogger(__name__)

_GENO_CODES = {"0": 0, "1": 1, "NA": -1}

# minimum per-flank group size for the interval to count as testable
_MIN_FLANK = 2


@dataclass(frozen=True)
class ScanDataset:
    """Aligned marker map, genotype matrix and phenotype vector."""

    markers: Tuple[str, ...]
    positions: np.ndarray  # cM, strictly increasing
    genotypes: np.ndarray  # (n_individuals, n_markers), int8, -1 = missing
    ids: Tuple[str, ...]
    phenotypes: np.ndarray  # (n_individuals,)
    n_dropped: int = 0  # genotyped individuals lacking a phenotype

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        geno = np.asarray(self.genotypes, dtype=np.int8)
        phen = np.asarray(self.phenotypes, dtype=float)
        m, n = len(self.markers), len(self.ids)
        if len(set(self.markers)) != m:
            raise ValidationError("marker names must be unique")
        if len(set(self.ids)) != n:
            raise ValidationError("individual ids must be unique")
        if m < 2:
            raise ValidationError("need at least two markers")
        if n < 1:
            raise ValidationError("need at least one individual")
        if pos.shape != (m,) or np.any(~np.isfinite(pos)) or np.any(np.diff(pos) <= 0):
            raise ValidationError("positions must be finite and strictly increasing")
        if geno.shape != (n, m):
            raise ValidationError(
                f"genotype matrix shape {geno.shape} does not match "
                f"{n} individuals x {m} markers"
            )
        if not np.isin(geno, (-1, 0, 1)).all():
            raise ValidationError("genotype codes must be 0, 1 or missing")
        if phen.shape != (n,) or np.any(~np.isfinite(phen)):
            raise ValidationError("phenotypes must be finite, one per individual")
        for arr, name in ((pos, "positions"), (geno, "genotypes"), (phen, "phenotypes")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_individuals(self) -> int:
        return len(self.ids)

    @property
    def n_intervals(self) -> int:
        return len(self.markers) - 1


@dataclass(frozen=True)
class IntervalResult:
    """One scanned interval; statistic fields are None when untestable."""

    index: int
    left_marker: str
    right_marker: str
    left_pos: float
    right_pos: float
    r: float
    n_groups: Tuple[int, int, int, int]
    rn: Optional[float] = None
    p_rn: Optional[float] = None
    p_rn_davies: Optional[float] = None
    rn_star: Optional[float] = None
    p_rn_star: Optional[float] = None
    p_rn_star_davies: Optional[float] = None
    theta_hat: Optional[float] = None
    ks: Optional[float] = None
    p_ks: Optional[float] = None
    ad: Optional[float] = None
    p_ad: Optional[float] = None
    p_norm_g1: Optional[float] = None
    p_norm_g4: Optional[float] = None
    untestable: bool = False
    note: str = ""


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _read_rows(path: str) -> List[Tuple[int, List[str]]]:
    rows = []
    try:
        with open(path, newline="") as fh:
            for lineno, fields in enumerate(csv.reader(fh), start=1):
                if not fields or all(not f.strip() for f in fields):
                    continue
                rows.append((lineno, [f.strip() for f in fields]))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path} is empty")
    return rows


def _load_map(path: str) -> Tuple[List[str], List[float]]:
    rows = _read_rows(path)
    if rows[0][1] != ["marker", "position_cM"]:
        raise ParseError(f"{path}:1: expected header 'marker,position_cM'")
    markers, positions = [], []
    for lineno, fields in rows[1:]:
        if len(fields) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
        name, raw = fields
        if not name:
            raise ParseError(f"{path}:{lineno}: empty marker name")
        try:
            pos = float(raw)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad position {raw!r}") from exc
        markers.append(name)
        positions.append(pos)
    return markers, positions


def _load_geno(path: str, markers: List[str]):
    rows = _read_rows(path)
    header = rows[0][1]
    if header[:1] != ["id"] or header[1:] != markers:
        raise ParseError(
            f"{path}:1: genotype columns must be 'id' plus the map markers in order"
        )
    ids, lines = [], []
    for lineno, fields in rows[1:]:
        if len(fields) != len(markers) + 1:
            raise ParseError(
                f"{path}:{lineno}: expected {len(markers) + 1} fields, got {len(fields)}"
            )
        ids.append(fields[0])
        codes = []
        for name, cell in zip(markers, fields[1:]):
            if cell not in _GENO_CODES:
                raise ParseError(
                    f"{path}:{lineno}: genotype at {name} must be 0, 1 or NA, got {cell!r}"
                )
            codes.append(_GENO_CODES[cell])
        lines.append(codes)
    return ids, np.array(lines, dtype=np.int8)


def _load_pheno(path: str) -> Dict[str, float]:
    rows = _read_rows(path)
    if rows[0][1] != ["id", "value"]:
        raise ParseError(f"{path}:1: expected header 'id,value'")
    values: Dict[str, float] = {}
    for lineno, fields in rows[1:]:
        if len(fields) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 fields, got {len(fields)}")
        ident, raw = fields
        if ident in values:
            raise ParseError(f"{path}:{lineno}: duplicate phenotype for {ident!r}")
        try:
            val = float(raw)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad value {raw!r}") from exc
        if not np.isfinite(val):
            raise ParseError(f"{path}:{lineno}: value must be finite")
        values[ident] = val
    return values


def load_dataset(map_path, geno_path, pheno_path) -> ScanDataset:
    """Read and cross-validate the three scan input files.

    Genotyped individuals without a phenotype are dropped (count logged and
    kept on the dataset); phenotypes without genotypes are ignored with a log
    note.
    """
    markers, positions = _load_map(str(map_path))
    ids, geno = _load_geno(str(geno_path), markers)
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate individual ids in the genotype file")
    pheno = _load_pheno(str(pheno_path))

    keep = [i for i, ident in enumerate(ids) if ident in pheno]
    n_dropped = len(ids) - len(keep)
    if n_dropped:
        logger.warning("dropped %d genotyped individuals without phenotype", n_dropped)
    orphans = set(pheno) - set(ids)
    if orphans:
        logger.warning("%d phenotypes have no genotype row; ignored", len(orphans))
    if not keep:
        raise ValidationError("no individuals carry both genotype and phenotype")

    kept_ids = tuple(ids[i] for i in keep)
    return ScanDataset(
        markers=tuple(markers),
        positions=np.asarray(positions, dtype=float),
        genotypes=geno[keep],
        ids=kept_ids,
        phenotypes=np.array([pheno[i] for i in kept_ids]),
        n_dropped=n_dropped,
    )


# ---------------------------------------------------------------------------
# Interval classification and scanning
# ---------------------------------------------------------------------------


def _classify(dataset: ScanDataset, k: int):
    if not 0 <= k < dataset.n_intervals:
        raise DomainError(f"interval index {k} out of range")
    left = dataset.genotypes[:, k]
    right = dataset.genotypes[:, k + 1]
    ok = (left >= 0) & (right >= 0)
    y = dataset.phenotypes[ok]
    lft, rgt = left[ok], right[ok]
    arrs = (
        y[(lft == 1) & (rgt == 1)],
        y[(lft == 1) & (rgt == 0)],
        y[(lft == 0) & (rgt == 1)],
        y[(lft == 0) & (rgt == 0)],
    )
    r = haldane(float(dataset.positions[k + 1] - dataset.positions[k]))
    return arrs, r


def interval_groups(dataset: ScanDataset, k: int) -> Tuple[PhenotypeGroups, float]:
    """Phenotype groups and recombination fraction for interval k.

    Raises DegenerateDataError when a flanking group is empty.
    """
    arrs, r = _classify(dataset, k)
    return PhenotypeGroups(*arrs), r


def _norm_pvalue(y: np.ndarray) -> Optional[float]:
    # KS against the moment-fitted normal; parameter estimation makes the
    # asymptotic p optimistic, used for screening only
    if y.size < 8:
        return None
    sd = float(np.std(y, ddof=1))
    if sd <= 0.0:
        return None
    return float(kstest(y, "norm", args=(float(np.mean(y)), sd)).pvalue)


def _perm_pvalues(
    arrs, obs_ks: float, obs_ad: Optional[float], seed: int, k: int, perm_reps: int
):
    pooled = np.concatenate(arrs)
    sizes = np.cumsum([a.size for a in arrs])[:-1]
    ge_ks = 0
    ge_ad = 0
    for i in range(perm_reps):
        rng = stream(seed, NS_PERMUTE, k, i)
        perm = rng.permutation(pooled)
        parts = np.split(perm, sizes)
        if ks_ksample(parts).statistic >= obs_ks:
            ge_ks += 1
        if obs_ad is not None and ad_ksample(parts).statistic >= obs_ad:
            ge_ad += 1
    p_ks = (1 + ge_ks) / (perm_reps + 1)
    p_ad = (1 + ge_ad) / (perm_reps + 1) if obs_ad is not None else None
    return p_ks, p_ad


def scan(
    dataset: ScanDataset,
    kernel: KernelFamily,
    cfg: Optional[FitConfig] = None,
    nulldist_n: int = 100_000,
    seed: int = 0,
    davies: bool = False,
    nonparam: bool = False,
    perm_reps: int = 2000,
    normality: bool = False,
) -> List[IntervalResult]:
    """Run both interval tests over every adjacent marker pair.

    Null tables are simulated once per distinct recombination fraction
    (rounded to 4 decimals) and shared across intervals. Permutation
    p-values for the nonparametric tests and per-flank normality screens are
    opt-in.
    """
    cfg = cfg or FitConfig()
    tables: Dict[Tuple[str, float], NullDistTable] = {}
    results: List[IntervalResult] = []

    for k in range(dataset.n_intervals):
        arrs, r = _classify(dataset, k)
        counts = tuple(a.size for a in arrs)
        base = dict(
            index=k,
            left_marker=dataset.markers[k],
            right_marker=dataset.markers[k + 1],
            left_pos=float(dataset.positions[k]),
            right_pos=float(dataset.positions[k + 1]),
            r=r,
            n_groups=counts,
        )
        if counts[0] < _MIN_FLANK or counts[3] < _MIN_FLANK:
            results.append(
                IntervalResult(
                    untestable=True,
                    note=f"flanking groups too small ({counts[0]}, {counts[3]})",
                    **base,
                )
            )
            continue

        r_key = round(r, 4)
        for kind, maker in (("full", sample_R), ("star", sample_Rstar)):
            if (kind, r_key) not in tables:
                tables[(kind, r_key)] = maker(r_key, nulldist_n, seed)

        groups = PhenotypeGroups(*arrs)
        interval = IntervalConfig(r=r)
        try:
            full = lrt_full(
                groups, kernel, interval, cfg,
                nulldist=tables[("full", r_key)], davies=davies,
            )
            star = lrt_equal_scale(
                groups, kernel, interval, cfg,
                nulldist=tables[("star", r_key)], davies=davies,
            )
        except (DegenerateDataError, NumericalError) as exc:
            results.append(IntervalResult(untestable=True, note=str(exc), **base))
            continue

        fields: dict = dict(
            rn=full.statistic,
            p_rn=full.p_value_rep,
            p_rn_davies=full.p_value_davies,
            rn_star=star.statistic,
            p_rn_star=star.p_value_rep,
            p_rn_star_davies=star.p_value_davies,
            theta_hat=full.theta_hat,
        )
        if nonparam:
            obs_ks = ks_ksample(groups).statistic
            try:
                obs_ad = ad_ksample(groups).statistic
            except DegenerateDataError:
                obs_ad = None
            p_ks, p_ad = _perm_pvalues(
                [a for a in arrs if a.size], obs_ks, obs_ad, seed, k, perm_reps
            )
            fields.update(ks=obs_ks, p_ks=p_ks, ad=obs_ad, p_ad=p_ad)
        if normality:
            fields.update(
                p_norm_g1=_norm_pvalue(arrs[0]), p_norm_g4=_norm_pvalue(arrs[3])
            )
        results.append(IntervalResult(**base, **fields))
    return results


_CSV_COLUMNS = [
    "index", "left_marker", "right_marker", "left_pos_cM", "right_pos_cM", "r",
    "n1", "n2", "n3", "n4", "rn", "p_rn", "p_rn_davies", "rn_star", "p_rn_star",
    "p_rn_star_davies", "theta_hat", "ks", "p_ks", "ad", "p_ad",
    "p_norm_g1", "p_norm_g4", "untestable", "note",
]


def results_to_csv(results: List[IntervalResult], path) -> None:
    """Write scan results as one CSV row per interval (None becomes empty)."""

    def cell(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(float(v))  # numpy scalars repr as np.float64(...)
        return str(v)

    with open(str(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for res in results:
            n1, n2, n3, n4 = res.n_groups
            writer.writerow(
                [
                    cell(v)
                    for v in (
                        res.index, res.left_marker, res.right_marker,
                        res.left_pos, res.right_pos, res.r,
                        n1, n2, n3, n4,
                        res.rn, res.p_rn, res.p_rn_davies,
                        res.rn_star, res.p_rn_star, res.p_rn_star_davies,
                        res.theta_hat, res.ks, res.p_ks, res.ad, res.p_ad,
                        res.p_norm_g1, res.p_norm_g4,
                        res.untestable, res.note,
                    )
                ]
            )
