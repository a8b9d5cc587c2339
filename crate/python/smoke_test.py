#!/usr/bin/env python3
"""Smoke test for the grnssm_py extension module.

Builds nothing itself: run `cargo build -p grnssm-py` (or --release)
first, then `python3 python/smoke_test.py`. The script locates the
compiled cdylib, imports it, and drives a small end-to-end pipeline.
"""

import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def locate_extension():
    candidates = [
        os.path.join(ROOT, "target", profile, "libgrnssm_py.so")
        for profile in ("release", "debug")
    ]
    found = [c for c in candidates if os.path.exists(c)]
    if not found:
        sys.exit(
            "libgrnssm_py.so not found; run `cargo build -p grnssm-py` first"
        )
    # Prefer the most recently built profile.
    return max(found, key=os.path.getmtime)


def import_module():
    so = locate_extension()
    stage = tempfile.mkdtemp(prefix="grnssm-py-")
    shutil.copy(so, os.path.join(stage, "grnssm_py.so"))
    sys.path.insert(0, stage)
    import grnssm_py

    return grnssm_py


checks = 0


def check(name, condition):
    global checks
    if not condition:
        sys.exit(f"FAIL {name}")
    checks += 1
    print(f"PASS {name}")


def main():
    m = import_module()

    check("param_count(58, 4) == 3844", m.param_count(58, 4) == 3844)
    check("max_hidden_k(58, 10, 44) == 101", m.max_hidden_k(58, 10, 44) == 101)
    check("max_hidden_k(1, 1, 1) is None", m.max_hidden_k(1, 1, 1) is None)
    check("aicc example", abs(m.aicc(-100.0, 100, 5) - 210.63829787234042) < 1e-9)

    dataset, truth = m.simulate(2, 2, 10, 30, seed=7)
    check("simulate shape", (dataset.p, dataset.t, dataset.n_reps) == (2, 10, 30))
    check("truth graph is 4x4", len(truth.graph()) == 4)

    outcome = m.fit(dataset, 2, seed=7)
    trace = outcome.loglik_trace
    check("fit converged", outcome.converged)
    check("loglik trace monotone", all(b >= a - 1e-8 for a, b in zip(trace, trace[1:])))
    ll = m.marginal_loglik(outcome.params, dataset)
    check("final loglik matches trace", abs(ll - trace[-1]) < 1e-6 * (1 + abs(ll)))

    chosen, entries = m.select_k(dataset, [0, 1, 2], seed=7)
    check("select_k returns all entries", [e[0] for e in entries] == [0, 1, 2])
    check("select_k choice is listed", chosen in [e[0] for e in entries])

    edges = m.bootstrap_edges(dataset, 2, nb=19, level=0.99, seed=7)
    check("bootstrap covers all entries", len(edges) == 16)
    check("interval order", all(e.lower <= e.upper for e in edges))
    check(
        "significance rule",
        all(e.significant == (e.lower > 0 or e.upper < 0) for e in edges),
    )

    metrics = m.recovery_metrics(truth, edges)
    check("metrics cover matrix", metrics["tp"] + metrics["fp"] + metrics["tn"] + metrics["fn"] == 16)
    check("f1 in range", 0.0 <= metrics["f1"] <= 1.0)

    with tempfile.TemporaryDirectory() as d:
        csv_path = os.path.join(d, "data.csv")
        dataset.save_csv(csv_path)
        back = m.Dataset.load_csv(csv_path)
        check("csv round trip", back.values() == dataset.values())

        json_path = os.path.join(d, "truth.json")
        truth.save_json(json_path)
        again = m.Params.load_json(json_path)
        check("params json round trip", again.graph() == truth.graph())

    print(f"OK: {checks} checks passed")


if __name__ == "__main__":
    main()
