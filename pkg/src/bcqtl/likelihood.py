"""Four-group mixture data model and its log-likelihood.

A backcross interval partitions individuals by the two flanking marker
genotypes into four phenotype groups. Writing f1, f2 for the two component
densities (same kernel, separate location/scale) and theta for the conditional
probability tied to a single recombination event, the group densities are

    group 1:  f1
    group 2:  theta * f1 + (1 - theta) * f2
    group 3:  (1 - theta) * f1 + theta * f2
    group 4:  f2

Under the no-effect null f1 = f2 and theta drops out; it is identified only
under the alternative, which is what makes the testing problem nonstandard.

Log-likelihood sums are accumulated group-symmetrically ((g1 + g4) + (g2 + g3))
so that swapping the middle groups, or relabeling components together with
swapping the anchor groups, leaves totals bitwise unchanged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._utils import haldane, pairsum
from .errors import DomainError, InvalidDataError, ParseError, ValidationError
from .kernels import KernelFamily, LocScaleParams, log_density

__all__ = [
    "PhenotypeGroups",
    "IntervalConfig",
    "MixtureParams",
    "loglik",
    "null_loglik",
    "read_groups_csv",
    "write_groups_csv",
]


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


def _clean_group(values, label: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidDataError(f"group {label} contains non-finite phenotypes")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhenotypeGroups:
    """Phenotypes split by flanking genotype class.

    Groups 1 and 4 anchor the two components and must be non-empty; groups 2
    and 3 (the recombinant classes) may be empty. Fitting additionally needs
    at least two observations in each anchor group, which is enforced by the
    fit routines rather than here so that plain likelihood evaluation works on
    minimal data.
    """

    g1: np.ndarray
    g2: np.ndarray
    g3: np.ndarray
    g4: np.ndarray

    def __post_init__(self):
        for label in ("g1", "g2", "g3", "g4"):
            object.__setattr__(self, label, _clean_group(getattr(self, label), label))
        if self.g1.size == 0 or self.g4.size == 0:
            raise InvalidDataError("anchor groups g1 and g4 must be non-empty")

    @property
    def n1(self) -> int:
        return self.g1.size

    @property
    def n2(self) -> int:
        return self.g2.size

    @property
    def n3(self) -> int:
        return self.g3.size

    @property
    def n4(self) -> int:
        return self.g4.size

    @property
    def n(self) -> int:
        return self.n1 + self.n2 + self.n3 + self.n4

    def swapped_middle(self) -> "PhenotypeGroups":
        """Groups with g2 and g3 exchanged (used by symmetry checks)."""
        return PhenotypeGroups(self.g1, self.g3, self.g2, self.g4)


@dataclass(frozen=True)
class IntervalConfig:
    """Recombination setting of one marker interval.

    Exactly one of `r` (direct recombination fraction, in (0, 1]) or `d` (map
    distance in cM, converted through the Haldane map, landing in (0, 0.5))
    must be supplied.
    """

    r: Optional[float] = None
    d: Optional[float] = None

    def __post_init__(self):
        if (self.r is None) == (self.d is None):
            raise ValidationError("provide exactly one of r and d")
        if self.d is not None:
            object.__setattr__(self, "r", float(haldane(self.d)))
        else:
            r = float(self.r)
            if not (np.isfinite(r) and 0.0 < r <= 1.0):
                raise DomainError(f"r must lie in (0, 1], got {r!r}")
            object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class MixtureParams:
    """Full parameter point: mixing theta plus the two component params."""

    theta: float
    comp1: LocScaleParams
    comp2: LocScaleParams

    def __post_init__(self):
        t = float(self.theta)
        if not (np.isfinite(t) and 0.0 <= t <= 1.0):
            raise DomainError(f"theta must lie in [0, 1], got {t!r}")
        object.__setattr__(self, "theta", t)


# ---------------------------------------------------------------------------
# Log-likelihood
# ---------------------------------------------------------------------------


def _mix_logdens(
    kernel: KernelFamily,
    y: np.ndarray,
    first: LocScaleParams,
    second: LocScaleParams,
    w_first: float,
) -> np.ndarray:
    """log(w * f_first + (1 - w) * f_second), elementwise.

    w = 0 and w = 1 short-circuit to the surviving component so no log(0)
    is ever formed.
    """
    if w_first == 0.0:
        return log_density(kernel, y, second)
    if w_first == 1.0:
        return log_density(kernel, y, first)
    la = math.log(w_first) + log_density(kernel, y, first)
    lb = math.log1p(-w_first) + log_density(kernel, y, second)
    return np.logaddexp(la, lb)


def _group_logliks(
    groups: PhenotypeGroups, kernel: KernelFamily, params: MixtureParams
) -> tuple[float, float, float, float]:
    """Per-group log-likelihood sums (used by EM diagnostics and loglik)."""
    t = params.theta
    s1 = float(np.sum(log_density(kernel, groups.g1, params.comp1)))
    s4 = float(np.sum(log_density(kernel, groups.g4, params.comp2)))
    s2 = float(np.sum(_mix_logdens(kernel, groups.g2, params.comp1, params.comp2, t)))
    # group 3 weights mirror group 2: (1 - theta) on component 1
    if t == 0.0:
        s3 = float(np.sum(log_density(kernel, groups.g3, params.comp1)))
    elif t == 1.0:
        s3 = float(np.sum(log_density(kernel, groups.g3, params.comp2)))
    else:
        la = math.log1p(-t) + log_density(kernel, groups.g3, params.comp1)
        lb = math.log(t) + log_density(kernel, groups.g3, params.comp2)
        s3 = float(np.sum(np.logaddexp(la, lb)))
    return s1, s2, s3, s4


def loglik(
    groups: PhenotypeGroups, kernel: KernelFamily, params: MixtureParams
) -> float:
    """Observed-data log-likelihood of the four-group mixture model."""
    s1, s2, s3, s4 = _group_logliks(groups, kernel, params)
    return pairsum(s1, s2, s3, s4)


def null_loglik(
    groups: PhenotypeGroups, kernel: KernelFamily, params: LocScaleParams
) -> float:
    """Log-likelihood of the pooled single-density model f1 = f2 = f(.; mu, sigma)."""
    s1 = float(np.sum(log_density(kernel, groups.g1, params)))
    s2 = float(np.sum(log_density(kernel, groups.g2, params)))
    s3 = float(np.sum(log_density(kernel, groups.g3, params)))
    s4 = float(np.sum(log_density(kernel, groups.g4, params)))
    return pairsum(s1, s2, s3, s4)


# ---------------------------------------------------------------------------
# Groups CSV (header: group,phenotype; group in {1,2,3,4})
# ---------------------------------------------------------------------------


def read_groups_csv(path) -> PhenotypeGroups:
    """Read a two-column CSV of (group, phenotype) rows into PhenotypeGroups.

    Raises:
        ParseError: malformed header, group id, or phenotype (message carries
            the 1-based line number).
        InvalidDataError: structurally valid but empty anchor groups.
    """
    buckets: dict[int, list[float]] = {1: [], 2: [], 3: [], 4: []}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header] != ["group", "phenotype"]:
            raise ParseError(f"{path}:1: expected header 'group,phenotype'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                g = int(row[0])
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: group must be an integer, got {row[0]!r}"
                ) from None
            if g not in buckets:
                raise ParseError(f"{path}:{lineno}: group must be in 1..4, got {g}")
            try:
                y = float(row[1])
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: phenotype must be a number, got {row[1]!r}"
                ) from None
            if not math.isfinite(y):
                raise ParseError(f"{path}:{lineno}: phenotype must be finite")
            buckets[g].append(y)
    return PhenotypeGroups(buckets[1], buckets[2], buckets[3], buckets[4])


def write_groups_csv(groups: PhenotypeGroups, path) -> None:
    """Inverse of read_groups_csv."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "phenotype"])
        for g, arr in enumerate((groups.g1, groups.g2, groups.g3, groups.g4), start=1):
            for y in arr:
                writer.writerow([g, repr(float(y))])
