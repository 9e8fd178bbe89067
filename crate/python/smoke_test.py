#!/usr/bin/env python3
"""Smoke test for the condpanel_py extension module.

Builds the module if needed, imports it, and exercises the main surface:
identification checks, simulation, CMLE fitting, likelihood calculus, and
the CSV round trip. Run from anywhere:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libcondpanel_py.so",
        ROOT / "target" / "debug" / "libcondpanel_py.so",
    ]
    so = next((p for p in candidates if p.exists()), None)
    if so is None:
        subprocess.run(
            ["cargo", "build", "-p", "condpanel-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        so = ROOT / "target" / "debug" / "libcondpanel_py.so"
    staging = Path(tempfile.mkdtemp(prefix="condpanel_py_"))
    shutil.copy2(so, staging / "condpanel_py.so")
    sys.path.insert(0, str(staging))
    import condpanel_py

    return condpanel_py


def spec2_config(n=2000, seed=20240801):
    return {
        "theta0": {"rho": 0.5, "beta": 1.0},
        "spec": 2,
        "support": [0, 1],
        "T": 3,
        "N": n,
        "init_law": "uniform",
        "heterogeneity": {"type": "normal", "mu": 0.0, "sigma": 1.0},
        "kernel_law": {"type": "dirichlet", "concentration": [1.0, 1.0]},
        "seed": seed,
    }


def main():
    cp = load_module()
    print(f"loaded condpanel_py {cp.__version__}")

    # Identification verdicts for the four benchmark model classes.
    cases = [
        (1, 3, True, False),
        (1, 2, False, False),
        (2, 2, False, True),
        (2, 3, True, True),
    ]
    for spec, t, want_rho, want_beta in cases:
        for criterion in ("span", "per-stat"):
            rep = cp.check_identification(spec, t, [0, 1], criterion)
            assert rep["rho_identified"] == want_rho, (spec, t, criterion, rep)
            assert rep["beta_identified"] == want_beta, (spec, t, criterion, rep)
    print("identification verdicts match the benchmark table")

    # A fractional support works too and leaves the Spec1 verdict unchanged.
    rep = cp.check_identification(1, 3, ["0", "1/3", "7/2"])
    assert rep["rho_identified"] and not rep["beta_identified"]

    # Simulation is deterministic and the fit recovers theta0 roughly.
    cfg = spec2_config()
    ds = cp.PanelDataset.simulate(json.dumps(cfg))
    assert ds.n() == cfg["N"] and ds.horizon == cfg["T"]
    assert ds.to_csv_string() == cp.PanelDataset.simulate(json.dumps(cfg)).to_csv_string()
    fit = cp.fit_cmle(ds)
    assert fit["converged"], fit
    assert abs(fit["rho"] - 0.5) < 0.3 and abs(fit["beta"] - 1.0) < 0.3, fit
    assert fit["rho_std_err"] > 0 and fit["beta_std_err"] > 0
    print(
        f"fit on N={ds.n()}: rho={fit['rho']:.3f} (+-{fit['rho_std_err']:.3f}), "
        f"beta={fit['beta']:.3f} (+-{fit['beta_std_err']:.3f})"
    )

    # Analytic score agrees with a central finite difference of the log-lik.
    h = 1e-6
    g = cp.score(ds, 0.3, 0.7)
    fd = (
        (cp.cond_log_lik(ds, 0.3 + h, 0.7) - cp.cond_log_lik(ds, 0.3 - h, 0.7)) / (2 * h),
        (cp.cond_log_lik(ds, 0.3, 0.7 + h) - cp.cond_log_lik(ds, 0.3, 0.7 - h)) / (2 * h),
    )
    for a, b in zip(g, fd):
        assert math.isclose(a, b, rel_tol=1e-5, abs_tol=1e-5), (g, fd)
    hess = cp.hessian(ds, 0.3, 0.7)
    assert hess[0][0] < 0 and hess[1][1] < 0
    print("score matches finite differences; Hessian diagonal is negative")

    # CSV round trip through a file.
    with tempfile.TemporaryDirectory() as tmp:
        path = str(Path(tmp) / "panel.csv")
        ds.write_csv(path)
        back = cp.PanelDataset.from_csv(path, 2, [0, 1])
        assert back.to_csv_string() == ds.to_csv_string()
    print("CSV round trip is exact")

    # Dataset-level identification and the beta profile.
    rep = cp.dataset_identification(ds)
    assert rep["span_rank"] == 2
    curve = cp.profile(ds, "beta", [0.0, 0.5, 1.0, 1.5])
    values = [ll for _, ll in curve]
    assert max(values) == max(values[1], values[2]), curve  # interior max near 1.0

    # A small Monte Carlo run aggregates cleanly.
    mc = cp.monte_carlo(json.dumps(spec2_config(n=300, seed=7)), 5)
    assert mc["reps"] == 5 and mc["n_converged"] + mc["n_not_converged"] + mc["n_no_identification"] == 5
    assert mc["rho"]["n_estimated"] == mc["n_converged"]
    print("monte carlo summary:", json.dumps(mc["beta"], sort_keys=True))

    print("smoke test passed")


if __name__ == "__main__":
    main()
