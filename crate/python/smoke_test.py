"""Smoke test for the pykdeconv extension.

Build with `cargo build -p kdeconv-py --release` and copy
target/release/libpykdeconv.so next to this file as pykdeconv.so.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pykdeconv as kd

CONFIG = {
    "signal": {"kind": "gamma", "shape": 2.0, "scale": 1.0},
    "error": {"kind": "gamma", "beta": 0.3, "eta": 1.0},
    "functional": {"kind": "indicator"},
    "bandwidth": {"rule": "rate"},
    "n": 500,
    "replications": 20,
    "sup_reps": 2000,
    "seed": 11,
}


def main():
    k = kd.Kernel()
    assert k.order() >= 7
    assert abs(k.ft(0.2) - 1.0) < 1e-12
    assert abs(k.cdf(600.0) - 1.0) < 1e-8

    em = kd.ErrorModel.gamma(0.3, 1.0)
    z = em.cf(0.0)
    assert abs(z - 1.0) < 1e-12
    assert em.beta() == 0.3

    text = json.dumps(CONFIG)
    y = kd.simulate(text)
    assert len(y) == 500 and min(y) > 0
    assert kd.simulate(text) == y

    t = [0.5, 1.0, 2.0, 4.0]
    curve = kd.estimate(y, em, kd.Functional.indicator(), 0.3, t)
    assert len(curve) == 4
    assert all(a <= b + 0.05 for a, b in zip(curve.theta_hat, curve.theta_hat[1:]))

    b = kd.band(text)
    assert b.q > 0 and all(lo <= th <= hi for lo, th, hi in zip(b.lo, b.theta_hat, b.hi))

    summary = json.loads(kd.run_study("coverage", text))
    assert summary["kind"] == "coverage"
    assert 0.0 <= summary["summary"]["coverage"] <= 1.0

    h = kd.bandwidth_rate(1000, 2.0, 0.3, 0.49)
    assert 0 < h < 1

    try:
        kd.ErrorModel.laplace(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative scale accepted")

    bad = dict(CONFIG, n=1)
    try:
        kd.simulate(json.dumps(bad))
    except ValueError:
        pass
    else:
        raise AssertionError("n = 1 accepted")

    checks = kd.selftest(0)
    assert all(passed for _, _, _, passed in checks), checks
    assert not math.isnan(h)
    print(f"smoke test ok: {len(checks)} selftest checks, coverage {summary['summary']['coverage']:.2f}")


if __name__ == "__main__":
    main()
