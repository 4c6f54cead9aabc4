"""Small size and power study, with the KL information column.

Runs a trimmed version of the simulation harness: empirical size of both
tests under a normal null, then power against a mean shift, a scale shift,
and a mean+scale alternative, each with the KL information of the group
mixture from its closest single density. More information, more power.

Budgets here are deliberately small so the demo finishes in about a
minute; the acceptance suite runs the full-size versions.

Run:  python3 demos/04_size_and_power.py
"""

from bcqtl import IntervalConfig, LocScaleParams, SimScenario, get_kernel
from bcqtl.simharness import power_experiment, type1_experiment

INTERVAL = IntervalConfig(d=5.0)
NORMAL = get_kernel("normal")


def scenario(f2, n_reps, seed, f1=LocScaleParams(0.0, 1.0)):
    return SimScenario(
        kernel=NORMAL, f1=f1, f2=f2, interval=INTERVAL,
        n=200, theta=0.5, alpha=0.05, n_reps=n_reps, seed=seed,
    )


def main():
    print("empirical size at the 5% level (1000 replicates, n=200):")
    row = type1_experiment(
        scenario(LocScaleParams(0.0, 1.0), 1000, seed=1),
        methods=("rn", "rn_star", "rn_davies"),
        nulldist_n=50_000,
    )
    for m in ("rn", "rn_star", "rn_davies"):
        print(f"  {m:10} {100 * row.rates[m]:5.2f}%  (se {100 * row.std_errors[m]:.2f}pp)")

    cases = (
        ("mean shift", LocScaleParams(0.5, 1.0)),
        ("scale shift", LocScaleParams(0.0, 1.5)),
        ("mean+scale", LocScaleParams(0.5, 1.5)),
    )
    print("\npower at the 5% level (500 replicates, n=200), with 100*KL:")
    print(f"  {'alternative':12} {'rn':>7} {'rn_star':>8} {'100KL':>7}")
    for i, (label, f2) in enumerate(cases):
        row = power_experiment(
            scenario(f2, 500, seed=10 + i),
            methods=("rn", "rn_star"),
            calib_reps=2000,
        )
        print(
            f"  {label:12} {100 * row.rates['rn']:6.1f}% "
            f"{100 * row.rates['rn_star']:7.1f}% {100 * row.kl:7.3f}"
        )
    print(
        "\nthe equal-scale statistic wins on pure location alternatives and"
        "\ncollapses to its size on pure scale ones; the full statistic pays a"
        "\nsmall location premium for real power against scale effects"
    )


if __name__ == "__main__":
    main()
