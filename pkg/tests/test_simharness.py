"""Replicated experiments: data generation, type I, power, scan simulator."""

import numpy as np
import pytest

from bcqtl._utils import stream
from bcqtl.errors import DomainError, ValidationError
from bcqtl.estimate import FitConfig
from bcqtl.kernels import LocScaleParams, get_kernel
from bcqtl.likelihood import IntervalConfig
from bcqtl.simharness import (
    SimScenario,
    gen_data,
    gen_group_sizes,
    group_probs,
    power_experiment,
    simulate_scan_dataset,
    type1_experiment,
)

NORMAL = get_kernel("normal")
STD = LocScaleParams(0.0, 1.0)
SHIFTED = LocScaleParams(1.0, 1.0)
IV = IntervalConfig(r=0.1)
SMALL_CFG = FitConfig(theta_grid_size=11)


def _scenario(**kw):
    base = dict(
        kernel=NORMAL, f1=STD, f2=STD, interval=IV,
        n=80, theta=0.5, alpha=0.05, n_reps=50, seed=0,
    )
    base.update(kw)
    return SimScenario(**base)


# ---------------------------------------------------------------------------
# design probabilities and data generation
# ---------------------------------------------------------------------------


def test_group_probs():
    p = group_probs(0.2)
    assert p == (0.4, 0.1, 0.1, 0.4)
    assert sum(p) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        group_probs(0.0)
    with pytest.raises(DomainError):
        group_probs(1.0)


def test_gen_group_sizes_sum_and_floor():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n1, n2, n3, n4 = gen_group_sizes(40, 0.3, rng)
        assert n1 + n2 + n3 + n4 == 40
        assert n1 >= 2 and n4 >= 2


def test_gen_group_sizes_deterministic():
    a = gen_group_sizes(100, 0.1, np.random.default_rng(5))
    b = gen_group_sizes(100, 0.1, np.random.default_rng(5))
    assert a == b


def test_gen_data_theta_extremes_route_middle_groups():
    far1 = LocScaleParams(-50.0, 0.1)
    far2 = LocScaleParams(50.0, 0.1)
    sc = _scenario(f1=far1, f2=far2, theta=0.0, n=400)
    g = gen_data(sc, np.random.default_rng(1))
    # theta = 0: group 2 draws purely from the second component, group 3 from the first
    assert np.all(g.g2 > 0.0)
    assert np.all(g.g3 < 0.0)
    sc = _scenario(f1=far1, f2=far2, theta=1.0, n=400)
    g = gen_data(sc, np.random.default_rng(2))
    assert np.all(g.g2 < 0.0)
    assert np.all(g.g3 > 0.0)


def test_gen_data_group_means_track_components():
    sc = _scenario(f1=STD, f2=LocScaleParams(3.0, 1.0), n=4000)
    g = gen_data(sc, np.random.default_rng(3))
    assert np.mean(g.g1) == pytest.approx(0.0, abs=0.15)
    assert np.mean(g.g4) == pytest.approx(3.0, abs=0.15)
    # the middle groups mix half and half at theta = 0.5
    mid = np.concatenate([g.g2, g.g3])
    if mid.size >= 100:
        assert np.mean(mid) == pytest.approx(1.5, abs=0.5)


def test_scenario_validation():
    with pytest.raises(DomainError):
        _scenario(n=4)
    with pytest.raises(DomainError):
        _scenario(theta=1.5)
    with pytest.raises(DomainError):
        _scenario(alpha=1.0)
    with pytest.raises(DomainError):
        _scenario(n_reps=0)


def test_scenario_kernel_accepts_name_string():
    sc = _scenario(kernel="logistic")
    assert sc.kernel.name == "logistic"
    with pytest.raises(DomainError):
        _scenario(kernel="weibull")


def test_scenario_null_detection():
    assert _scenario().is_null
    assert not _scenario(f2=SHIFTED).is_null
    assert _scenario().r == pytest.approx(0.1)


# ---------------------------------------------------------------------------
# type I experiments
# ---------------------------------------------------------------------------


def test_type1_requires_null_scenario():
    with pytest.raises(ValidationError):
        type1_experiment(_scenario(f2=SHIFTED), methods=("rn",), cfg=SMALL_CFG)


def test_type1_unknown_method_rejected():
    with pytest.raises(DomainError):
        type1_experiment(_scenario(), methods=("rn", "wilcoxon"), cfg=SMALL_CFG)


def test_type1_small_run_shape():
    row = type1_experiment(
        _scenario(n_reps=40, seed=8),
        methods=("rn", "rn_star", "rn_davies"),
        cfg=SMALL_CFG,
        nulldist_n=4000,
    )
    assert row.kind == "type1"
    assert set(row.methods) == {"rn", "rn_star", "rn_davies"}
    for m in row.methods:
        assert 0.0 <= row.rates[m] <= 1.0
        assert 0.0 <= row.std_errors[m] <= 0.5
    assert row.n_used <= 40
    assert row.kl is None
    assert "rn" in row.critical_values


def test_type1_nonparametric_methods_calibrated():
    row = type1_experiment(
        _scenario(n_reps=60, seed=9, n=40),
        methods=("ks", "ad"),
        cfg=SMALL_CFG,
        calib_reps=1000,
    )
    # exact MC calibration: rejection rate within binomial noise of alpha
    for m in ("ks", "ad"):
        assert row.rates[m] <= 0.25


def test_to_rows_schema():
    row = type1_experiment(
        _scenario(n_reps=20, seed=10), methods=("rn",), cfg=SMALL_CFG, nulldist_n=2000
    )
    flat = row.to_rows()
    assert len(flat) == 1
    want_keys = {
        "kind", "method", "kernel", "n", "r", "theta", "alpha", "n_reps", "seed",
        "mu1", "sigma1", "mu2", "sigma2", "rate", "std_error", "critical_value",
        "n_used", "n_failed", "n_nonconverged", "kl",
    }
    assert set(flat[0]) == want_keys
    assert flat[0]["kernel"] == "normal"
    assert flat[0]["kind"] == "type1"


# ---------------------------------------------------------------------------
# power experiments
# ---------------------------------------------------------------------------


def test_power_requires_alternative():
    with pytest.raises(ValidationError):
        power_experiment(_scenario(), methods=("rn",), cfg=SMALL_CFG)


def test_power_rejects_davies_methods():
    with pytest.raises(DomainError):
        power_experiment(
            _scenario(f2=SHIFTED), methods=("rn_davies",), cfg=SMALL_CFG
        )


def test_power_needs_enough_calibration():
    with pytest.raises(DomainError):
        power_experiment(
            _scenario(f2=SHIFTED), methods=("rn",), cfg=SMALL_CFG, calib_reps=500
        )


def test_power_small_run_detects_strong_effect():
    sc = _scenario(
        f2=LocScaleParams(2.5, 1.0), n=120, n_reps=40, seed=12, alpha=0.05
    )
    row = power_experiment(sc, methods=("rn", "ks"), cfg=SMALL_CFG, calib_reps=1000)
    assert row.kind == "power"
    assert row.kl is not None and row.kl > 0.0
    assert row.rates["rn"] >= 0.9  # 2.5 sigma separation is unmissable
    assert row.rates["ks"] >= 0.5
    assert row.critical_values["rn"] > 0.0


def test_power_deterministic_given_seed():
    sc = _scenario(f2=SHIFTED, n_reps=25, seed=13)
    a = power_experiment(sc, methods=("rn",), cfg=SMALL_CFG, calib_reps=1000)
    b = power_experiment(sc, methods=("rn",), cfg=SMALL_CFG, calib_reps=1000)
    assert a.rates == b.rates
    assert a.critical_values == b.critical_values


# ---------------------------------------------------------------------------
# scan simulator
# ---------------------------------------------------------------------------


def test_simulate_scan_dataset_shapes_and_names():
    ds = simulate_scan_dataset(
        [0.0, 10.0, 20.0, 30.0], 50, 15.0, STD, SHIFTED, NORMAL, seed=1
    )
    assert ds.markers == ("m1", "m2", "m3", "m4")
    assert ds.ids[0] == "ind0001" and ds.ids[-1] == "ind0050"
    assert ds.genotypes.shape == (50, 4)
    assert ds.phenotypes.shape == (50,)
    assert set(np.unique(ds.genotypes)) <= {0, 1}
    np.testing.assert_array_equal(ds.positions, [0.0, 10.0, 20.0, 30.0])
    assert ds.n_intervals == 3


def test_simulate_scan_dataset_deterministic():
    a = simulate_scan_dataset([0.0, 10.0], 20, 5.0, STD, SHIFTED, NORMAL, seed=4)
    b = simulate_scan_dataset([0.0, 10.0], 20, 5.0, STD, SHIFTED, NORMAL, seed=4)
    np.testing.assert_array_equal(a.genotypes, b.genotypes)
    np.testing.assert_array_equal(a.phenotypes, b.phenotypes)


def test_simulate_scan_dataset_missing_rate():
    ds = simulate_scan_dataset(
        list(np.linspace(0, 90, 10)), 400, 45.0, STD, SHIFTED, NORMAL,
        seed=2, missing_rate=0.2,
    )
    frac = np.mean(ds.genotypes == -1)
    assert frac == pytest.approx(0.2, abs=0.02)


def test_simulate_scan_dataset_linkage_decays_with_distance():
    # adjacent markers agree more often than distant ones
    ds = simulate_scan_dataset(
        [0.0, 5.0, 80.0], 3000, 2.0, STD, STD, NORMAL, seed=3
    )
    g = ds.genotypes
    agree_near = np.mean(g[:, 0] == g[:, 1])
    agree_far = np.mean(g[:, 0] == g[:, 2])
    assert agree_near > 0.9
    assert agree_far < 0.7


def test_simulate_scan_dataset_phenotype_tracks_planted_locus():
    # effect locus sits on top of the second marker (tiny gap), components
    # far apart: phenotype sign must follow that marker almost surely
    ds = simulate_scan_dataset(
        [0.0, 10.0, 20.0], 500, 10.0 + 1e-9,
        LocScaleParams(-30.0, 0.5), LocScaleParams(30.0, 0.5), NORMAL, seed=5,
    )
    m2 = ds.genotypes[:, 1].astype(bool)
    assert np.mean((ds.phenotypes < 0.0) == m2) > 0.99


def test_simulate_scan_dataset_validation():
    with pytest.raises(DomainError):
        simulate_scan_dataset([0.0], 10, 0.5, STD, SHIFTED, NORMAL)
    with pytest.raises(DomainError):
        simulate_scan_dataset([0.0, 0.0], 10, 0.5, STD, SHIFTED, NORMAL)
    with pytest.raises(DomainError):
        simulate_scan_dataset([0.0, 5.0], 1, 0.5, STD, SHIFTED, NORMAL)
    with pytest.raises(DomainError):
        simulate_scan_dataset([0.0, 5.0], 10, 0.5, STD, SHIFTED, NORMAL, missing_rate=1.0)
