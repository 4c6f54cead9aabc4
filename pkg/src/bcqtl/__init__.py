"""Likelihood ratio tests for a QTL effect in backcross phenotype data.

The package follows the analysis pipeline: phenotype groups from flanking
marker genotypes (`likelihood`), profile-EM mixture fits (`estimate`), the
two likelihood ratio statistics (`lrt`), their limiting null laws and tail
approximations (`asymptotics`), distribution-free companions (`nonparam`),
replicated size/power experiments (`simharness`), and whole-chromosome scans
(`scan`). The `bcqtl` console script exposes the same pipeline from the
shell.
"""

from ._utils import haldane
from .asymptotics import (
    AngleGeometry,
    LocalAlternative,
    NullDistTable,
    classify_angle,
    cov_limit,
    davies_pvalue,
    kl_information,
    kl_projection,
    load_table,
    local_power_limit,
    oracle_sup_process,
    pvalue,
    sample_R,
    sample_Rstar,
    save_table,
)
from .errors import (
    BcqtlError,
    DegenerateDataError,
    DomainError,
    InvalidDataError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .estimate import (
    FitConfig,
    MixtureFit,
    fit_all,
    fit_equal_scale,
    fit_full,
    fit_null,
    theta_grid,
)
from .kernels import (
    InfoMatrix,
    KernelFamily,
    LocScaleParams,
    get_kernel,
    info_matrix,
    kernel_names,
    log_density,
    register_kernel,
    sample,
    score,
)
from .likelihood import (
    IntervalConfig,
    MixtureParams,
    PhenotypeGroups,
    loglik,
    null_loglik,
    read_groups_csv,
    write_groups_csv,
)
from .lrt import (
    ScoreVectors,
    TestOutcome,
    lrt_equal_scale,
    lrt_full,
    score_form_statistic,
    score_vectors,
)
from .nonparam import NonparamResult, ad_ksample, ks_ksample, mc_calibrate
from .scan import (
    IntervalResult,
    ScanDataset,
    interval_groups,
    load_dataset,
    results_to_csv,
    scan,
)
from .simharness import (
    ExperimentRow,
    SimScenario,
    gen_data,
    gen_group_sizes,
    group_probs,
    power_experiment,
    simulate_scan_dataset,
    type1_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "BcqtlError", "DomainError", "InvalidDataError", "DegenerateDataError",
    "ParseError", "ValidationError", "NumericalError",
    # kernels
    "KernelFamily", "LocScaleParams", "InfoMatrix", "get_kernel",
    "kernel_names", "register_kernel", "log_density", "score", "info_matrix",
    "sample",
    # likelihood
    "PhenotypeGroups", "IntervalConfig", "MixtureParams", "loglik",
    "null_loglik", "read_groups_csv", "write_groups_csv", "haldane",
    # estimation
    "FitConfig", "MixtureFit", "fit_null", "fit_equal_scale", "fit_full",
    "fit_all", "theta_grid",
    # tests
    "TestOutcome", "ScoreVectors", "lrt_full", "lrt_equal_scale",
    "score_vectors", "score_form_statistic",
    # limiting laws
    "AngleGeometry", "classify_angle", "NullDistTable", "sample_R",
    "sample_Rstar", "oracle_sup_process", "pvalue", "cov_limit",
    "davies_pvalue", "LocalAlternative", "local_power_limit",
    "kl_projection", "kl_information", "save_table", "load_table",
    # nonparametric
    "NonparamResult", "ks_ksample", "ad_ksample", "mc_calibrate",
    # simulation
    "SimScenario", "ExperimentRow", "group_probs", "gen_group_sizes",
    "gen_data", "type1_experiment", "power_experiment",
    "simulate_scan_dataset",
    # scan
    "ScanDataset", "IntervalResult", "load_dataset", "interval_groups",
    "scan", "results_to_csv",
]
