"""Shared fixtures: deterministic four-group datasets and tmp CSV helpers."""

from __future__ import annotations

import numpy as np
import pytest

from bcqtl.kernels import LocScaleParams, get_kernel, sample
from bcqtl.likelihood import IntervalConfig, PhenotypeGroups


def make_groups(
    seed: int,
    kernel_name: str = "normal",
    sizes: tuple = (40, 12, 12, 40),
    f1: LocScaleParams = LocScaleParams(0.0, 1.0),
    f2: LocScaleParams = LocScaleParams(0.8, 1.2),
    theta: float = 0.5,
) -> PhenotypeGroups:
    """Draw a four-group dataset from the mixture model at the given theta."""
    kernel = get_kernel(kernel_name)
    rng = np.random.default_rng(seed)
    n1, n2, n3, n4 = sizes
    g1 = sample(kernel, f1, n1, rng)
    g4 = sample(kernel, f2, n4, rng)
    pick2 = rng.random(n2) < theta
    g2 = np.where(pick2, sample(kernel, f1, n2, rng), sample(kernel, f2, n2, rng))
    pick3 = rng.random(n3) < 1.0 - theta
    g3 = np.where(pick3, sample(kernel, f1, n3, rng), sample(kernel, f2, n3, rng))
    return PhenotypeGroups(g1=g1, g2=g2, g3=g3, g4=g4)


def make_null_groups(seed: int, kernel_name: str = "normal", sizes=(40, 12, 12, 40)):
    shared = LocScaleParams(0.3, 0.9)
    return make_groups(seed, kernel_name, sizes, f1=shared, f2=shared)


@pytest.fixture
def groups_normal() -> PhenotypeGroups:
    return make_groups(7, "normal")


@pytest.fixture
def groups_logistic() -> PhenotypeGroups:
    return make_groups(7, "logistic")


@pytest.fixture
def interval_r01() -> IntervalConfig:
    return IntervalConfig(r=0.1)


def write_scan_csvs(ds, directory):
    """Write a ScanDataset out as the three scan input files."""
    mp = directory / "map.csv"
    gp = directory / "geno.csv"
    pp = directory / "pheno.csv"
    lines = ["marker,position_cM"] + [
        f"{m},{p}" for m, p in zip(ds.markers, ds.positions)
    ]
    mp.write_text("\n".join(lines) + "\n")
    rows = ["id," + ",".join(ds.markers)]
    for ident, row in zip(ds.ids, ds.genotypes):
        cells = ["NA" if v < 0 else str(int(v)) for v in row]
        rows.append(ident + "," + ",".join(cells))
    gp.write_text("\n".join(rows) + "\n")
    pl = ["id,value"] + [
        f"{ident},{float(val)!r}" for ident, val in zip(ds.ids, ds.phenotypes)
    ]
    pp.write_text("\n".join(pl) + "\n")
    return mp, gp, pp


@pytest.fixture
def groups_csv(tmp_path):
    """Write a small groups CSV and return its path plus the expected arrays."""
    rows = [
        (1, 0.5), (1, -0.25), (1, 1.0),
        (2, 0.125), (2, 2.0),
        (3, -1.5), (3, 0.75),
        (4, 1.5), (4, 2.25), (4, 0.0),
    ]
    path = tmp_path / "groups.csv"
    lines = ["group,phenotype"] + [f"{g},{v}" for g, v in rows]
    path.write_text("\n".join(lines) + "\n")
    expected = {
        1: np.array([0.5, -0.25, 1.0]),
        2: np.array([0.125, 2.0]),
        3: np.array([-1.5, 0.75]),
        4: np.array([1.5, 2.25, 0.0]),
    }
    return path, expected
