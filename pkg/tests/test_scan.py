"""Scan inputs, interval classification, the scan loop, result CSV."""

import csv
import math

import numpy as np
import pytest

from bcqtl._utils import haldane
from bcqtl.errors import DomainError, ParseError, ValidationError
from bcqtl.estimate import FitConfig
from bcqtl.kernels import LocScaleParams, get_kernel
from bcqtl.scan import (
    ScanDataset,
    _CSV_COLUMNS,
    interval_groups,
    load_dataset,
    results_to_csv,
    scan,
)
from bcqtl.simharness import simulate_scan_dataset

from conftest import write_scan_csvs

NORMAL = get_kernel("normal")
CFG = FitConfig(theta_grid_size=11)


def _tiny_dataset():
    return ScanDataset(
        markers=("m1", "m2"),
        positions=np.array([0.0, 10.0]),
        genotypes=np.array(
            [[1, 1], [1, 1], [1, 0], [0, 1], [0, 0], [0, 0], [-1, 0]], dtype=np.int8
        ),
        ids=tuple(f"i{k}" for k in range(1, 8)),
        phenotypes=np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]),
    )


# ---------------------------------------------------------------------------
# container validation
# ---------------------------------------------------------------------------


def test_dataset_validation_catches_structure_errors():
    good = _tiny_dataset()
    with pytest.raises(ValidationError, match="unique"):
        ScanDataset(("m1", "m1"), good.positions, good.genotypes, good.ids, good.phenotypes)
    with pytest.raises(ValidationError, match="two markers"):
        ScanDataset(("m1",), np.array([0.0]), good.genotypes[:, :1], good.ids, good.phenotypes)
    with pytest.raises(ValidationError, match="increasing"):
        ScanDataset(("m1", "m2"), np.array([10.0, 0.0]), good.genotypes, good.ids, good.phenotypes)
    with pytest.raises(ValidationError, match="genotype codes"):
        bad = np.array([[2, 0]] * 7, dtype=np.int8)
        ScanDataset(("m1", "m2"), good.positions, bad, good.ids, good.phenotypes)
    with pytest.raises(ValidationError, match="finite"):
        ScanDataset(("m1", "m2"), good.positions, good.genotypes, good.ids,
                    np.array([np.nan] + [0.0] * 6))


def test_dataset_arrays_read_only():
    ds = _tiny_dataset()
    with pytest.raises(ValueError):
        ds.genotypes[0, 0] = 0
    with pytest.raises(ValueError):
        ds.phenotypes[0] = 9.9


# ---------------------------------------------------------------------------
# interval classification
# ---------------------------------------------------------------------------


def test_interval_groups_by_flanking_genotypes():
    ds = _tiny_dataset()
    groups, r = interval_groups(ds, 0)
    np.testing.assert_array_equal(groups.g1, [0.1, 0.2])
    np.testing.assert_array_equal(groups.g2, [0.3])
    np.testing.assert_array_equal(groups.g3, [0.4])
    np.testing.assert_array_equal(groups.g4, [0.5, 0.6])  # NA flank dropped
    assert r == pytest.approx(haldane(10.0))


def test_interval_groups_index_range():
    ds = _tiny_dataset()
    with pytest.raises(DomainError):
        interval_groups(ds, 1)
    with pytest.raises(DomainError):
        interval_groups(ds, -1)


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------


def _sim(seed=0, **kw):
    args = dict(
        marker_positions=[0.0, 8.0, 16.0, 24.0],
        n_individuals=60,
        qtl_position=12.0,
        f1=LocScaleParams(0.0, 1.0),
        f2=LocScaleParams(1.5, 1.0),
        kernel=NORMAL,
        seed=seed,
    )
    args.update(kw)
    return simulate_scan_dataset(**args)


def test_load_dataset_round_trip(tmp_path):
    ds = _sim(missing_rate=0.1)
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    back = load_dataset(mp, gp, pp)
    assert back.markers == ds.markers
    assert back.ids == ds.ids
    np.testing.assert_array_equal(back.positions, ds.positions)
    np.testing.assert_array_equal(back.genotypes, ds.genotypes)
    np.testing.assert_allclose(back.phenotypes, ds.phenotypes, rtol=0, atol=0)
    assert back.n_dropped == 0


def test_load_dataset_drops_unphenotyped_and_ignores_orphans(tmp_path, caplog):
    ds = _sim()
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    lines = pp.read_text().splitlines()
    # remove two phenotypes, add one orphan
    pp.write_text("\n".join(lines[:-2] + ["ghost,1.25"]) + "\n")
    back = load_dataset(mp, gp, pp)
    assert back.n_dropped == 2
    assert back.n_individuals == ds.n_individuals - 2
    assert "ghost" not in back.ids


def test_load_dataset_duplicate_ids(tmp_path):
    ds = _sim()
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    lines = gp.read_text().splitlines()
    dup = lines[1].split(",")
    dup[0] = lines[2].split(",")[0]
    lines[1] = ",".join(dup)
    gp.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_dataset(mp, gp, pp)


def test_load_dataset_duplicate_phenotype(tmp_path):
    ds = _sim()
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    lines = pp.read_text().splitlines()
    pp.write_text("\n".join(lines + [lines[1]]) + "\n")
    with pytest.raises(ParseError, match="duplicate phenotype"):
        load_dataset(mp, gp, pp)


@pytest.mark.parametrize(
    "file_key,mutate,fragment",
    [
        ("map", lambda t: "marker,cM\nm1,0\nm2,8\n", "position_cM"),
        ("map", lambda t: t.replace("m2,8.0", "m2,eight"), "bad position"),
        ("geno", lambda t: t.replace("id,", "ids,", 1), "'id' plus the map markers"),
        ("geno", lambda t: t.replace(",1", ",2", 1), "must be 0, 1 or NA"),
        ("pheno", lambda t: t.replace("id,value", "id,pheno"), "id,value"),
        ("pheno", lambda t: "\n".join(t.splitlines()[:1] + ["ind0001,abc"]) + "\n", "bad value"),
    ],
)
def test_load_dataset_parse_errors(tmp_path, file_key, mutate, fragment):
    ds = _sim()
    paths = dict(zip(("map", "geno", "pheno"), write_scan_csvs(ds, tmp_path)))
    target = paths[file_key]
    target.write_text(mutate(target.read_text()))
    with pytest.raises(ParseError, match=fragment):
        load_dataset(paths["map"], paths["geno"], paths["pheno"])


def test_load_dataset_missing_file(tmp_path):
    ds = _sim()
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    with pytest.raises(ParseError, match="cannot read"):
        load_dataset(tmp_path / "absent.csv", gp, pp)


def test_load_dataset_geno_column_order_enforced(tmp_path):
    ds = _sim()
    mp, gp, pp = write_scan_csvs(ds, tmp_path)
    text = gp.read_text().splitlines()
    head = text[0].split(",")
    head[1], head[2] = head[2], head[1]
    text[0] = ",".join(head)
    gp.write_text("\n".join(text) + "\n")
    with pytest.raises(ParseError, match="in order"):
        load_dataset(mp, gp, pp)


# ---------------------------------------------------------------------------
# the scan loop
# ---------------------------------------------------------------------------


def test_scan_full_feature_pass():
    ds = _sim(seed=3, n_individuals=90)
    results = scan(
        ds, NORMAL, cfg=CFG, nulldist_n=4000, seed=1,
        davies=True, nonparam=True, perm_reps=200, normality=True,
    )
    assert len(results) == ds.n_intervals
    for res in results:
        assert not res.untestable
        assert res.rn >= 0.0 and res.rn_star >= 0.0
        assert 0.0 < res.p_rn <= 1.0 and 0.0 < res.p_rn_star <= 1.0
        assert 0.0 <= res.p_rn_davies <= 1.0
        assert 0.0 < res.p_ks <= 1.0 and 0.0 < res.p_ad <= 1.0
        assert 0.0 <= res.theta_hat <= 1.0
        assert sum(res.n_groups) <= ds.n_individuals
        assert res.p_norm_g1 is None or 0.0 <= res.p_norm_g1 <= 1.0


def test_scan_optional_blocks_default_off():
    ds = _sim(seed=4)
    res = scan(ds, NORMAL, cfg=CFG, nulldist_n=2000)[0]
    assert res.ks is None and res.p_ks is None
    assert res.ad is None and res.p_ad is None
    assert res.p_rn_davies is None and res.p_rn_star_davies is None
    assert res.p_norm_g1 is None


def test_scan_flags_thin_flanking_groups():
    geno = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 0], [1, 1, 1], [0, 1, 1]] * 4,
                    dtype=np.int8)
    ds = ScanDataset(
        markers=("m1", "m2", "m3"),
        positions=np.array([0.0, 5.0, 10.0]),
        genotypes=geno,
        ids=tuple(f"i{k}" for k in range(20)),
        phenotypes=np.linspace(-1, 1, 20),
    )
    results = scan(ds, NORMAL, cfg=CFG, nulldist_n=2000)
    # first interval: right flank is constant 1, so the (0,0) group is empty
    assert results[0].untestable
    assert "flanking groups too small" in results[0].note
    assert results[0].rn is None


def test_scan_label_swap_symmetry():
    ds = _sim(seed=5, n_individuals=70)
    flipped = ScanDataset(
        markers=ds.markers,
        positions=ds.positions,
        genotypes=np.where(ds.genotypes >= 0, 1 - ds.genotypes, -1).astype(np.int8),
        ids=ds.ids,
        phenotypes=ds.phenotypes,
    )
    a = scan(ds, NORMAL, cfg=FitConfig(theta_grid_size=21), nulldist_n=2000)
    b = scan(flipped, NORMAL, cfg=FitConfig(theta_grid_size=21), nulldist_n=2000)
    for ra, rb in zip(a, b):
        assert rb.n_groups == ra.n_groups[::-1]
        assert rb.rn == pytest.approx(ra.rn, abs=1e-8)
        assert rb.rn_star == pytest.approx(ra.rn_star, abs=1e-8)
        # swapping both flank labels exchanges the component roles and the
        # anchor groups at once, so the mixing position itself is unchanged
        assert rb.theta_hat == pytest.approx(ra.theta_hat, abs=1e-9)


def test_scan_planted_effect_is_localized():
    # strong effect at 12 cM: the covering interval (8, 16) must carry the
    # smallest full-test p-value
    ds = _sim(seed=6, n_individuals=150, f2=LocScaleParams(2.5, 1.0))
    results = scan(ds, NORMAL, cfg=FitConfig(theta_grid_size=21), nulldist_n=20_000)
    stats = [res.rn for res in results]
    assert int(np.argmax(stats)) == 1  # p-values floor out at the table size
    assert results[1].p_rn < 0.01


def test_scan_table_cache_rounds_r(caplog):
    # equal gaps share one table (r rounds to the same key); mixed gaps add one
    ds = _sim(seed=7)
    results = scan(ds, NORMAL, cfg=CFG, nulldist_n=2000)
    rs = {round(res.r, 4) for res in results}
    assert len(rs) == 1


# ---------------------------------------------------------------------------
# CSV writer
# ---------------------------------------------------------------------------


def test_results_to_csv_schema_and_values(tmp_path):
    ds = _sim(seed=8)
    results = scan(ds, NORMAL, cfg=CFG, nulldist_n=2000, davies=True)
    out = tmp_path / "scan.csv"
    results_to_csv(results, out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == _CSV_COLUMNS
    assert len(rows) == 1 + len(results)
    first = dict(zip(rows[0], rows[1]))
    assert first["index"] == "0"
    assert first["left_marker"] == "m1"
    assert float(first["rn"]) == results[0].rn  # repr round-trips exactly
    assert float(first["r"]) == float(results[0].r)
    assert first["untestable"] == "false"
    assert first["ks"] == ""  # nonparam was off
    # every populated numeric cell must parse back; numpy scalar reprs do not
    for name, raw in first.items():
        if raw and name not in ("left_marker", "right_marker", "untestable", "note"):
            float(raw)


def test_results_to_csv_untestable_row(tmp_path):
    geno = np.tile(np.array([[1, 1], [1, 1], [0, 1], [0, 1]], dtype=np.int8), (3, 1))
    ds = ScanDataset(
        markers=("m1", "m2"),
        positions=np.array([0.0, 5.0]),
        genotypes=geno,
        ids=tuple(f"i{k}" for k in range(12)),
        phenotypes=np.linspace(0, 1, 12),
    )
    results = scan(ds, NORMAL, cfg=CFG, nulldist_n=2000)
    out = tmp_path / "scan.csv"
    results_to_csv(results, out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    row = dict(zip(rows[0], rows[1]))
    assert row["untestable"] == "true"
    assert row["rn"] == "" and row["p_rn"] == ""
    assert "flanking groups too small" in row["note"]
