"""Command-line surface.

Subcommands: critval (quantiles of the limiting null laws), test (one
four-group dataset), scan (marker-interval scan over three CSV files),
simulate (TOML-driven replicated experiments), kl (separation of a scenario
from its best single-component fit).

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .asymptotics import kl_projection, sample_R, sample_Rstar, save_table
from .errors import (
    DomainError,
    InvalidDataError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .estimate import FitConfig
from .kernels import LocScaleParams, get_kernel, kernel_names
from .likelihood import IntervalConfig, read_groups_csv
from .lrt import lrt_equal_scale, lrt_full
from .nonparam import ad_ksample, ks_ksample
from .scan import load_dataset, results_to_csv, scan
from .simharness import (
    SimScenario,
    group_probs,
    power_experiment,
    type1_experiment,
)

__all__ = ["main", "entry"]

logger = logging.getLogger(__name__)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default
        raise _UsageError(message)


def _alpha_list(raw: str):
    try:
        vals = [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {raw!r}")
    if not vals or any(not 0.0 < a < 1.0 for a in vals):
        raise argparse.ArgumentTypeError("alpha levels must lie in (0, 1)")
    return vals


def _add_interval_flags(parser, required=True):
    grp = parser.add_mutually_exclusive_group(required=required)
    grp.add_argument("--r", type=float, help="recombination fraction in (0, 1)")
    grp.add_argument("--d", type=float, help="map distance in cM (Haldane)")


def _interval_from_args(args) -> IntervalConfig:
    if args.r is not None:
        return IntervalConfig(r=args.r)
    return IntervalConfig(d=args.d)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="bcqtl",
        description="Interval tests for a QTL effect in backcross phenotype data.",
    )
    parser.add_argument("--version", action="version", version=f"bcqtl {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("critval", help="critical values of the limiting null law")
    _add_interval_flags(p)
    p.add_argument("--kind", choices=["full", "star"], required=True)
    p.add_argument("--alpha", type=_alpha_list, default=[0.05])
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-table", metavar="CSV", default=None,
                   help="also persist the simulated table (CSV + JSON sidecar)")

    p = sub.add_parser("test", help="test one four-group dataset")
    p.add_argument("--input", required=True, help="groups CSV (group,phenotype)")
    p.add_argument("--kernel", choices=kernel_names(), required=True)
    _add_interval_flags(p)
    p.add_argument("--equal-scale", action="store_true",
                   help="location-only variant (shared scale)")
    p.add_argument("--davies", action="store_true",
                   help="also report the closed-form tail p-value")
    p.add_argument("--method", choices=["lrt", "ks", "ad"], default="lrt",
                   help="lrt (default) or a permutation-calibrated rank test")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", choices=["json", "csv"], default="json")

    p = sub.add_parser("scan", help="scan every marker interval of a chromosome")
    p.add_argument("--map", dest="map_path", required=True)
    p.add_argument("--geno", dest="geno_path", required=True)
    p.add_argument("--pheno", dest="pheno_path", required=True)
    p.add_argument("--kernel", choices=kernel_names(), required=True)
    p.add_argument("--nonparam", action="store_true",
                   help="add permutation-calibrated rank/ECDF tests")
    p.add_argument("--normality", action="store_true",
                   help="screen the flanking groups against a fitted normal")
    p.add_argument("--davies", action="store_true")
    p.add_argument("--perm-reps", type=int, default=2000)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="results CSV path")

    p = sub.add_parser("simulate", help="TOML-driven size/power experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="rows CSV path")

    p = sub.add_parser("kl", help="KL separation of a scenario from one component")
    p.add_argument("--config", required=True)

    return parser


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


def _cmd_critval(args) -> int:
    interval = _interval_from_args(args)
    maker = sample_R if args.kind == "full" else sample_Rstar
    table = maker(interval.r, args.reps, args.seed)
    print("alpha,critical_value")
    for a in args.alpha:
        print(f"{a!r},{table.critical_value(a)!r}")
    if args.save_table:
        save_table(table, args.save_table)
    return 0


def _cmd_test(args) -> int:
    groups = read_groups_csv(args.input)
    interval = _interval_from_args(args)

    if args.method == "lrt":
        kernel = get_kernel(args.kernel)
        if args.equal_scale:
            table = sample_Rstar(interval.r, args.reps, args.seed)
            outcome = lrt_equal_scale(
                groups, kernel, interval, nulldist=table, davies=args.davies
            )
        else:
            table = sample_R(interval.r, args.reps, args.seed)
            outcome = lrt_full(
                groups, kernel, interval, nulldist=table, davies=args.davies
            )
        payload = outcome.to_json_dict()
    else:
        fn = ks_ksample if args.method == "ks" else ad_ksample
        res = fn(groups)
        arrs = [g for g in (groups.g1, groups.g2, groups.g3, groups.g4) if g.size]
        pooled = np.concatenate(arrs)
        sizes = np.cumsum([a.size for a in arrs])[:-1]
        perm_reps = min(args.reps, 100_000)
        from ._utils import NS_PERMUTE, stream

        ge = 0
        for i in range(perm_reps):
            rng = stream(args.seed, NS_PERMUTE, i)
            parts = np.split(rng.permutation(pooled), sizes)
            if fn(parts).statistic >= res.statistic:
                ge += 1
        payload = {
            "statistic": res.statistic,
            "method": res.method,
            "p_value": (1 + ge) / (perm_reps + 1),
            "tied": res.tied,
            "n_groups": res.n_groups,
        }

    if args.out == "json":
        print(json.dumps(payload, indent=2))
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(payload.keys())
        writer.writerow("" if v is None else v for v in payload.values())
    return 0


def _cmd_scan(args) -> int:
    dataset = load_dataset(args.map_path, args.geno_path, args.pheno_path)
    kernel = get_kernel(args.kernel)
    results = scan(
        dataset,
        kernel,
        nulldist_n=args.reps,
        seed=args.seed,
        davies=args.davies,
        nonparam=args.nonparam,
        perm_reps=args.perm_reps,
        normality=args.normality,
    )
    results_to_csv(results, args.out)
    bad = sum(1 for res in results if res.untestable)
    print(f"scanned {len(results)} intervals ({bad} untestable), wrote {args.out}")
    return 0


def _read_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"bad TOML in {path}: {exc}") from exc


def _pop(section: dict, key, default=None, required=False):
    if required and key not in section:
        raise ValidationError(f"config key {key!r} is required")
    return section.pop(key, default)


def _scenario_from_config(conf: dict) -> tuple:
    section = dict(conf.get("scenario") or {})
    if not section:
        raise ValidationError("config needs a [scenario] section")
    kind = _pop(section, "kind", required=True)
    if kind not in ("type1", "power"):
        raise ValidationError("scenario kind must be 'type1' or 'power'")
    kernel = get_kernel(_pop(section, "kernel", required=True))
    mu1 = float(_pop(section, "mu1", required=True))
    sigma1 = float(_pop(section, "sigma1", required=True))
    mu2 = float(_pop(section, "mu2", mu1))
    sigma2 = float(_pop(section, "sigma2", sigma1))
    r = _pop(section, "r")
    d = _pop(section, "d")
    interval = IntervalConfig(r=r, d=d)
    scenario = SimScenario(
        kernel=kernel,
        f1=LocScaleParams(mu1, sigma1),
        f2=LocScaleParams(mu2, sigma2),
        interval=interval,
        n=int(_pop(section, "n", 200)),
        theta=float(_pop(section, "theta", 0.5)),
        alpha=float(_pop(section, "alpha", 0.05)),
        n_reps=int(_pop(section, "n_reps", 1000)),
        seed=int(_pop(section, "seed", 0)),
    )
    if section:
        raise ValidationError(f"unknown [scenario] keys: {sorted(section)}")
    return kind, scenario


def _cmd_simulate(args) -> int:
    conf = _read_toml(args.config)
    kind, scenario = _scenario_from_config(conf)
    fit_cfg = FitConfig.from_mapping(conf.get("fit") or {})

    calib = dict(conf.get("calibration") or {})
    methods = tuple(_pop(calib, "methods", ["rn", "rn_star"]))
    nulldist_n = int(_pop(calib, "nulldist_n", 100_000))
    calib_reps = _pop(calib, "calib_reps")
    if calib:
        raise ValidationError(f"unknown [calibration] keys: {sorted(calib)}")

    if kind == "type1":
        row = type1_experiment(
            scenario,
            methods,
            cfg=fit_cfg,
            nulldist_n=nulldist_n,
            calib_reps=int(calib_reps) if calib_reps is not None else 2000,
        )
    else:
        row = power_experiment(
            scenario,
            methods,
            cfg=fit_cfg,
            calib_reps=int(calib_reps) if calib_reps is not None else 5000,
        )

    flat = row.to_rows()
    columns = list(flat[0].keys())
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for line in flat:
            writer.writerow({k: "" if v is None else v for k, v in line.items()})

    manifest = {
        "command": "simulate",
        "kind": kind,
        "config": args.config,
        "out": args.out,
        "seed": scenario.seed,
        "methods": list(methods),
        "budgets": {
            "n_reps": scenario.n_reps,
            "nulldist_n": nulldist_n,
            "calib_reps": calib_reps,
        },
        "fit": asdict(fit_cfg),
        "versions": {
            "bcqtl": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    rates = ", ".join(f"{m}={row.rates[m]:.4f}" for m in row.methods)
    print(f"{kind}: {rates} (n_used={row.n_used}, failed={row.n_failed})")
    return 0


def _cmd_kl(args) -> int:
    conf = _read_toml(args.config)
    section = dict(conf.get("case") or conf)
    section.pop("case", None)
    kernel = get_kernel(_pop(section, "kernel", required=True))
    null_name = _pop(section, "kernel_null")
    kernel_null = get_kernel(null_name) if null_name else kernel
    f1 = LocScaleParams(
        float(_pop(section, "mu1", required=True)),
        float(_pop(section, "sigma1", required=True)),
    )
    f2 = LocScaleParams(
        float(_pop(section, "mu2", required=True)),
        float(_pop(section, "sigma2", required=True)),
    )
    theta = float(_pop(section, "theta", 0.5))
    r = _pop(section, "r")
    d = _pop(section, "d")
    interval = IntervalConfig(r=r, d=d)
    if section:
        raise ValidationError(f"unknown config keys: {sorted(section)}")
    params0, kl = kl_projection(
        group_probs(interval.r), (kernel, f1), (kernel, f2), theta, kernel_null
    )
    print(
        json.dumps(
            {
                "kl": kl,
                "kl_x100": 100.0 * kl,
                "mu0": params0.mu,
                "sigma0": params0.sigma,
                "r": interval.r,
                "theta": theta,
            },
            indent=2,
        )
    )
    return 0


_DISPATCH = {
    "critval": _cmd_critval,
    "test": _cmd_test,
    "scan": _cmd_scan,
    "simulate": _cmd_simulate,
    "kl": _cmd_kl,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"bcqtl: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _DISPATCH[args.command](args)
    except (InvalidDataError, DomainError) as exc:
        print(f"bcqtl {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bcqtl {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"bcqtl {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())
