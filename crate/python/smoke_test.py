"""Smoke test for the `symreg` extension module.

Build and run from the repository root:

    cargo build --release -p symreg-py --features extension-module
    cp target/release/libsymreg.so python/symreg.so
    python3 python/smoke_test.py
"""

import math
import os
import random
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import symreg  # noqa: E402


def main():
    t4 = symreg.Family("student-t:4")
    assert str(t4) == "student-t:4"
    assert abs(t4.weight(2.0) - 0.625) < 1e-15
    assert abs(t4.variance - 2.0) < 1e-12
    closed = t4.deltas()
    quad = t4.oracle_deltas()
    assert all(abs(closed[k] - quad[k]) < 1e-8 for k in closed), "δ routes disagree"
    print("deltas ok:", {k: round(v, 6) for k, v in list(closed.items())[:3]})

    # Intercept-only normal fit: mean and divisor-n variance.
    f = symreg.fit([1.0, 2.0, 3.0], [[1.0]] * 3)
    assert abs(f.beta[0] - 2.0) < 1e-12 and abs(f.phi ** 2 - 2.0 / 3.0) < 1e-12
    print(f)

    rng = random.Random(1)
    x = [[1.0, rng.random(), rng.random()] for _ in range(30)]
    y = [1.0 + 2.0 * r[1] + 0.5 * rng.gauss(0, 1) for r in x]
    fit = symreg.fit(y, x, family="logistic2")
    assert fit.converged and all(math.isfinite(s) for s in fit.std_errors)

    rep = symreg.test(y, x, tested=[2], family="logistic2", boot=99, seed=5)
    assert set(rep["bootstrap"]) >= {"wald", "lr", "score", "gradient"}
    print("statistics:", {k: round(v, 4) for k, v in rep["statistics"].items() if v is not None})
    print("bootstrap p-values:", rep["bootstrap"])

    t = [math.exp(v) for v in y]
    log_fit = symreg.fit(t, x, family="normal", log=True)
    assert abs(log_fit.beta[1] - symreg.fit(y, x).beta[1]) < 1e-12

    try:
        symreg.fit([0.0, 1.0, 2.0], [[1.0]] * 3, log=True)
    except ValueError as e:
        print("rejected as expected:", e)
    else:
        raise AssertionError("non-positive response accepted")

    size = symreg.simulate_size(
        'family = "normal"\nn = 20\np = 4\nq = 3\nphi = 3.0\nreps = 2000\n'
        "seeds = { covariate = 2024, noise = 7 }\n",
        threads=2,
    )
    cols = symreg.table_columns()
    row = size["rows"][1]
    print("size at 5%:", {c: r for c, r in zip(cols, row["rate"]) if r is not None})
    assert abs(row["rate"][cols.index("S*_LR")] - 5.0) < 2.0
    print("symreg", symreg.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
