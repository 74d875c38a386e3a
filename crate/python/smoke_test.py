"""Smoke test for the mixavg Python extension.

Build and install the extension first, for example with
``pip install ./crates/python`` or ``maturin develop -m crates/python/Cargo.toml``,
then run ``python python/smoke_test.py``.
"""

import json
import math
import os
import sys
import tempfile

import mixavg

HERE = os.path.dirname(os.path.abspath(__file__))
IRIS = os.path.join(HERE, "..", "crates", "core", "tests", "fixtures", "iris.csv")


def check(cond, message):
    if not cond:
        raise AssertionError(message)
    print(f"ok  {message}")


def main():
    check(len(mixavg.structures()) == 14, "14 covariance structures")
    check(len(mixavg.structures(fittable_only=True)) == 10, "10 fittable structures")

    ari = mixavg.adjusted_rand_index(["a", "a", "b", "b"], [1, 1, 2, 2])
    check(ari == 1.0, "ARI is label invariant")
    check(abs(mixavg.adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) + 0.5) < 1e-12, "ARI of crossed pairs is -1/2")

    weights = mixavg.bma_weights([100.0, 102.0])
    check(abs(sum(weights) - 1.0) < 1e-12 and weights[0] > weights[1], "BMA weights favour lower BIC")

    merge_map, merge_ari = mixavg.best_merge([0, 0, 1, 1, 2, 2], [0, 0, 1, 1, 1, 1])
    check(merge_ari == 1.0 and merge_map[1] == merge_map[2] != merge_map[0], "best merge joins the split cluster")

    check(mixavg.harden([[0.2, 0.8], [0.5, 0.5]]) == [1, 0], "harden breaks ties to the lowest index")

    iris = mixavg.Dataset.load_csv(IRIS, "Species")
    check((iris.n, iris.p) == (150, 4), "iris loads with 4 features")

    fit = mixavg.em_fit(iris, "VEV", 2, seed=1)
    check(fit.structure == "VEV" and fit.g == 2 and fit.rho == 26, "VEV G=2 fit has 26 free parameters")
    check(abs(fit.bic - (-2 * fit.loglik + fit.rho * math.log(150))) < 1e-9, "BIC is -2 loglik + rho log n")
    check(all(b - a >= -1e-8 for a, b in zip(fit.loglik_trace, fit.loglik_trace[1:])), "loglik trace is monotone")
    z = fit.posteriors(iris)
    check(all(abs(sum(row) - 1.0) < 1e-10 for row in z), "posterior rows sum to one")
    check(set(fit.classify(iris)) == {0, 1}, "labels are zero-based")

    try:
        mixavg.em_fit(iris, "EVE", 2)
    except ValueError as err:
        check("EVE" in str(err), "unfittable structure raises ValueError")
    else:
        raise AssertionError("EVE should not be fittable")

    sweep = mixavg.run_sweep(iris, structures=["VEV", "VVV", "EEE"], g_min=1, g_max=3, restarts=2, seed=7)
    table = sweep.bic_table()
    check(len(table) == 9 and all(a[2] <= b[2] for a, b in zip(table, table[1:])), "sweep table is sorted by BIC")
    again = mixavg.SweepResult.from_json(sweep.to_json())
    check(again.bic_table() == table, "sweep round-trips through JSON")

    report = mixavg.average(iris, sweep, c=20.0)
    check(abs(sum(w[3] for w in report.window) - 1.0) < 1e-12, "window weights sum to one")
    for name in mixavg.Report.clustering_names():
        labels = report.partition(name)
        check(len(labels) == 150 and min(labels) == 0, f"{name} partition has 150 zero-based labels")
        check(report.ari(name) is not None, f"{name} has an ARI against the species")
    parsed = json.loads(report.to_json())
    check(parsed["n"] == 150 and "clusterings" in parsed, "report serializes to JSON")

    sep = mixavg.simulate_separated(2, 2, 40, 30.0, seed=2)
    one = mixavg.run_pipeline(sep, structures=["EII"], g_min=1, g_max=3, restarts=3)
    check(one.singleton_window and one.ari("model_average") == 1.0, "singleton window is flagged")

    s3 = mixavg.gen_scenario3(seed=1)
    check((s3.n, s3.p) == (500, 2) and len(set(s3.labels)) == 4, "scenario 3 has 500 points in 4 groups")
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "s3.csv")
        s3.save_csv(path)
        back = mixavg.Dataset.load_csv(path, "label")
        check(back.rows() == s3.rows(), "simulated data round-trips through CSV")

    tiny = mixavg.Dataset([[0.0, 1.0], [2.0, 3.0], [5.0, 4.0]])
    try:
        mixavg.run_sweep(tiny, g_min=5, g_max=6, restarts=1)
    except RuntimeError:
        check(True, "a grid with no fittable cell raises RuntimeError")
    else:
        raise AssertionError("expected RuntimeError")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
